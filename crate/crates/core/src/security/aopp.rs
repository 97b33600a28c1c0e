//! Actively odd-parity pairing.
//!
//! Bob pairs each bit of his minority value with a distinct bit of the
//! other value, so every pair has odd parity on his side. Alice announces
//! which pairs have odd parity on hers; only those survive, and each
//! surviving pair keeps the bit of its first element on both sides.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::Setting;
use crate::simulate::SessionTally;

/// Indices into the raw key of one pair; `first` is the kept element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AoppPair {
    pub first: usize,
    pub second: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AoppOutcome {
    /// Every pair Bob formed, in announcement order.
    pub pairs: Vec<AoppPair>,
    /// Indices into `pairs` of the pairs Alice accepted.
    pub survivors: Vec<usize>,
    pub paired_bits_a: Vec<u8>,
    pub paired_bits_b: Vec<u8>,
}

impl AoppOutcome {
    pub fn survived(&self) -> usize {
        self.survivors.len()
    }

    /// Bit-flip error rate of the distilled key.
    pub fn qber(&self) -> f64 {
        if self.survivors.is_empty() {
            return 0.0;
        }
        let errors = self
            .paired_bits_a
            .iter()
            .zip(&self.paired_bits_b)
            .filter(|(a, b)| a != b)
            .count();
        errors as f64 / self.survived() as f64
    }
}

/// Runs the pairing on aligned raw keys. Deterministic in `seed`.
pub fn aopp(bits_a: &[u8], bits_b: &[u8], seed: u64) -> Result<AoppOutcome> {
    if bits_a.len() != bits_b.len() {
        return Err(invalid(
            "bits_b",
            format!("length {} differs from Alice's {}", bits_b.len(), bits_a.len()),
        ));
    }
    if bits_a.iter().chain(bits_b).any(|&b| b > 1) {
        return Err(invalid("bits", "bit values must be 0 or 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ones: Vec<usize> = (0..bits_b.len()).filter(|&i| bits_b[i] == 1).collect();
    let mut zeros: Vec<usize> = (0..bits_b.len()).filter(|&i| bits_b[i] == 0).collect();
    ones.shuffle(&mut rng);
    zeros.shuffle(&mut rng);

    let pairs: Vec<AoppPair> = ones
        .iter()
        .zip(&zeros)
        .map(|(&o, &z)| {
            if rng.random::<bool>() {
                AoppPair { first: o, second: z }
            } else {
                AoppPair { first: z, second: o }
            }
        })
        .collect();

    let mut out = AoppOutcome {
        pairs,
        survivors: Vec::new(),
        paired_bits_a: Vec::new(),
        paired_bits_b: Vec::new(),
    };
    for (k, p) in out.pairs.iter().enumerate() {
        if bits_a[p.first] ^ bits_a[p.second] == 1 {
            out.survivors.push(k);
            out.paired_bits_a.push(bits_a[p.first]);
            out.paired_bits_b.push(bits_b[p.first]);
        }
    }
    Ok(out)
}

/// Pairing statistics entering the key-rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AoppSummary {
    /// Bob's raw-key zeros (he sent).
    pub bob_zeros: f64,
    /// Bob's raw-key ones (he did not send).
    pub bob_ones: f64,
    pub pairs: f64,
    pub survived: f64,
    pub qber_after: f64,
}

impl AoppSummary {
    pub fn from_outcome(bits_b: &[u8], out: &AoppOutcome) -> Self {
        let ones = bits_b.iter().filter(|&&b| b == 1).count() as f64;
        Self {
            bob_zeros: bits_b.len() as f64 - ones,
            bob_ones: ones,
            pairs: out.pairs.len() as f64,
            survived: out.survived() as f64,
            qber_after: out.qber(),
        }
    }
}

/// Expected pairing statistics of an expectation-valued tally.
///
/// Bob's zeros err when both parties sent, his ones when neither did; a
/// pair survives when both or neither of its bits are wrong, and the kept
/// bit is then wrong only in the first case.
pub fn expected_aopp(tally: &SessionTally) -> AoppSummary {
    use Setting::*;
    let n = |a, b| tally.cell(a, b).one_detector_events;
    let (both, bob_only) = (n(SignalSend, SignalSend), n(SignalSkip, SignalSend));
    let (alice_only, neither) = (n(SignalSend, SignalSkip), n(SignalSkip, SignalSkip));
    let bob_zeros = both + bob_only;
    let bob_ones = alice_only + neither;
    let e0 = if bob_zeros > 0.0 { both / bob_zeros } else { 0.0 };
    let e1 = if bob_ones > 0.0 { neither / bob_ones } else { 0.0 };
    let pairs = bob_zeros.min(bob_ones);
    let p_survive = (1.0 - e0) * (1.0 - e1) + e0 * e1;
    AoppSummary {
        bob_zeros,
        bob_ones,
        pairs,
        survived: pairs * p_survive,
        qber_after: if p_survive > 0.0 { e0 * e1 / p_survive } else { 0.0 },
    }
}

/// Phase-flip error rate of the distilled untagged bits: a kept parity bit
/// flips when exactly one constituent does.
pub fn post_aopp_phase_error(e1ph_before: f64) -> f64 {
    (2.0 * e1ph_before * (1.0 - e1ph_before)).clamp(0.0, 0.5)
}
