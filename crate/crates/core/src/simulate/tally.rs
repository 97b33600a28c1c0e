use serde::{Deserialize, Serialize};

use crate::model::Setting;

/// Counts for one (Alice setting, Bob setting) combination.
///
/// Counts are real-valued so the same type carries both expectation values
/// and sampled integers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellTally {
    pub pulses: f64,
    /// Exactly one detector clicked.
    pub one_detector_events: f64,
    /// Signal/signal cells: heralded events whose key bits disagree.
    /// Weak/weak decoy cell: accepted-slice events at the wrong port.
    pub error_events: f64,
    /// Pulses whose announced relative phase fell inside the phase slice.
    pub accepted_pulses: f64,
    /// Heralded events among `accepted_pulses`.
    pub accepted_events: f64,
}

impl CellTally {
    fn add(&mut self, o: &CellTally) {
        self.pulses += o.pulses;
        self.one_detector_events += o.one_detector_events;
        self.error_events += o.error_events;
        self.accepted_pulses += o.accepted_pulses;
        self.accepted_events += o.accepted_events;
    }

    fn scaled(&self, k: f64) -> CellTally {
        CellTally {
            pulses: self.pulses * k,
            one_detector_events: self.one_detector_events * k,
            error_events: self.error_events * k,
            accepted_pulses: self.accepted_pulses * k,
            accepted_events: self.accepted_events * k,
        }
    }

    /// Heralded events per pulse.
    pub fn gain(&self) -> f64 {
        if self.pulses > 0.0 {
            self.one_detector_events / self.pulses
        } else {
            0.0
        }
    }
}

/// A heralded signal/signal event, with the simulator's ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZEvent {
    pub alice_sent: bool,
    pub bob_sent: bool,
    /// Photons emitted by the senders in this window.
    pub photons: u32,
}

impl ZEvent {
    pub fn bits(&self) -> ZBits {
        z_bit_assignment(self.alice_sent, self.bob_sent)
    }

    /// Exactly one party sent, and its pulse carried exactly one photon.
    pub fn is_untagged(&self) -> bool {
        self.alice_sent != self.bob_sent && self.photons == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZBits {
    pub bit_a: u8,
    pub bit_b: u8,
    pub is_error: bool,
}

/// Key-bit convention for signal windows: Alice's bit is 1 iff she sent,
/// Bob's bit is 0 iff he sent. The bits agree when exactly one party sent.
pub fn z_bit_assignment(alice_sent: bool, bob_sent: bool) -> ZBits {
    let bit_a = u8::from(alice_sent);
    let bit_b = u8::from(!bob_sent);
    ZBits {
        bit_a,
        bit_b,
        is_error: bit_a != bit_b,
    }
}

/// Per-setting-pair statistics of one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionTally {
    pub n_pulses: f64,
    pub(crate) cells: [[CellTally; 5]; 5],
    /// Heralded signal/signal events in emission order (Monte Carlo only).
    pub z_events: Vec<ZEvent>,
}

impl Default for SessionTally {
    fn default() -> Self {
        Self {
            n_pulses: 0.0,
            cells: [[CellTally::default(); 5]; 5],
            z_events: Vec::new(),
        }
    }
}

impl SessionTally {
    pub fn cell(&self, a: Setting, b: Setting) -> &CellTally {
        &self.cells[a.index()][b.index()]
    }

    pub fn cell_mut(&mut self, a: Setting, b: Setting) -> &mut CellTally {
        &mut self.cells[a.index()][b.index()]
    }

    /// All 25 cells with their settings.
    pub fn cells(&self) -> impl Iterator<Item = (Setting, Setting, &CellTally)> {
        Setting::ALL.into_iter().flat_map(move |a| {
            Setting::ALL
                .into_iter()
                .map(move |b| (a, b, &self.cells[a.index()][b.index()]))
        })
    }

    pub fn total_heralded(&self) -> f64 {
        self.cells().map(|(_, _, c)| c.one_detector_events).sum()
    }

    fn signal_cells(&self) -> impl Iterator<Item = &CellTally> {
        self.cells()
            .filter(|(a, b, _)| a.is_signal_window() && b.is_signal_window())
            .map(|(_, _, c)| c)
    }

    /// Heralded signal/signal events (raw key length before pairing).
    pub fn z_heralded(&self) -> f64 {
        self.signal_cells().map(|c| c.one_detector_events).sum()
    }

    /// Bit-flip error rate of the raw signal-window key.
    pub fn z_qber(&self) -> f64 {
        let n = self.z_heralded();
        if n > 0.0 {
            self.signal_cells().map(|c| c.error_events).sum::<f64>() / n
        } else {
            0.0
        }
    }

    /// Error rate of phase-slice accepted weak/weak decoy events.
    pub fn x_qber(&self) -> f64 {
        let c = self.cell(Setting::DecoyWeak, Setting::DecoyWeak);
        if c.accepted_events > 0.0 {
            c.error_events / c.accepted_events
        } else {
            0.0
        }
    }

    pub fn z_bits_alice(&self) -> Vec<u8> {
        self.z_events.iter().map(|e| e.bits().bit_a).collect()
    }

    pub fn z_bits_bob(&self) -> Vec<u8> {
        self.z_events.iter().map(|e| e.bits().bit_b).collect()
    }

    /// Ground-truth untagged events among the recorded signal-window events.
    pub fn true_untagged(&self) -> usize {
        self.z_events.iter().filter(|e| e.is_untagged()).count()
    }

    /// Appends another tally; event records keep `self` first.
    pub fn merge(&mut self, other: SessionTally) {
        self.n_pulses += other.n_pulses;
        for a in 0..5 {
            for b in 0..5 {
                self.cells[a][b].add(&other.cells[a][b]);
            }
        }
        self.z_events.extend(other.z_events);
    }

    /// Multiplies every count by `k` (event records are dropped).
    pub fn scaled(&self, k: f64) -> SessionTally {
        let mut out = SessionTally {
            n_pulses: self.n_pulses * k,
            ..SessionTally::default()
        };
        for a in 0..5 {
            for b in 0..5 {
                out.cells[a][b] = self.cells[a][b].scaled(k);
            }
        }
        out
    }
}
