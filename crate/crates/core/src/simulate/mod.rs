//! Session statistics for the four-intensity sending-or-not-sending protocol,
//! both as expectation values and by Monte Carlo sampling.

mod expected;
mod interference;
mod monte_carlo;
mod tally;

pub use expected::expected_tallies;
pub use interference::{
    click_probabilities, click_probabilities_in, instantaneous, ClickProbabilities,
    PhaseQuadrature, PhaseWindow, QUADRATURE_POINTS,
};
pub use monte_carlo::{
    monte_carlo_session, monte_carlo_session_partitioned, Click, SliceMembership, WindowOutcome,
    BLOCK_PULSES,
};
pub use tally::{z_bit_assignment, CellTally, SessionTally, ZBits, ZEvent};
