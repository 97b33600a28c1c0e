//! Finite-size decoy-state bounds, actively odd-parity pairing and the
//! secure key rate, plus the repeaterless (PLOB) benchmark.

mod aopp;
mod analysis;
mod decoy;
mod finite;
mod rate;

pub use aopp::{aopp, expected_aopp, post_aopp_phase_error, AoppOutcome, AoppPair, AoppSummary};
pub use analysis::{analyze_expected, analyze_session, SessionAnalysis};
pub use decoy::{decoy_bounds, DecoyEstimate};
pub use finite::{fluctuation_bounds, observed_lower};
pub use rate::{key_rate, plob_bound, KeyRateInputs, KeyRateReport, KeyRateTerms};
