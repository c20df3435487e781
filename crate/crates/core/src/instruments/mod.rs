//! Laboratory primitives as stochastic per-site state transformers.

mod audit;
mod composite;
mod imaging;
mod ops;

pub use audit::{audit_transitions, transition_table, Instrument, Violation};
pub use composite::{
    check_composite, composite_detect_site, composite_erasure_detect, ramp_array, CompositeMode, StepKey,
};
pub use imaging::{classify, eps01, eps10, expose, fluorescence_image, readout, Exposure};
pub use ops::{
    check_selection_rule, convert_erasures, microwave_transfer, optical_pump, pump_duration_for, pump_fidelity,
    raman_pulse, ramp_depth, F0,
};
