//! Vibration sensing on the twin-field link: propagation of fiber phase
//! perturbations to both ends, phase recovery from reference pulses, and
//! localization from the relative arrival delay.

mod correlate;
mod propagate;
mod recover;
mod spectrum;
mod trace;

pub use correlate::{
    correlation, cross_correlate_delay, detrend, locate, localize, raw_position_from_bob_km,
    LocalizationResult,
};
pub use propagate::{
    simulate_phase_traces, LinkGeometry, TraceNoise, VibrationSource, Waveform,
    FIBER_LIGHT_SPEED_KM_PER_S,
};
pub use recover::{recover_phase_from_reference, reference_counts, FrameCounts, REFERENCE_FRAME_RATE_HZ};
pub use spectrum::{decimate, dominant_frequency};
pub use trace::{Origin, PhaseTrace};

/// Default sampling rate of the phase measurement; `v / fs` is 1 km.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 200e3;
