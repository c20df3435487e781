//! Time evolution between instrument operations.

mod calibration;
mod hold;
mod noise;
mod rates;

pub use calibration::{
    calibrate_dephasing, calibrate_dephasing_with, decoupled_amplitude, decoupled_time, xy8_options,
    CalibrationOptions, DecouplingTarget, DephasingFit, T2_ECHO, T2_STAR, XY8_SPACING, XY8_TIME_XA,
};
pub use hold::{evolve_hold, light_shift, node_of, HoldModel};
pub use noise::{ou_phase_increment, Filter, OuNoiseState};
pub use rates::{master_rates_solve, offres_ratio, Edge, Node, Occupancy, RateMatrix};
