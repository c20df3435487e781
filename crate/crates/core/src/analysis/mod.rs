//! Estimators over trial records.

mod decompose;
mod excise;
mod fit;
mod purity;
mod stats;

pub use decompose::{decay_rate, rate_decompose, Combo, DecayBatch, Decomposition, Rate};
pub use excise::{
    excise, excised_fidelity, excised_purity, flagged_fraction, fraction, occupied, Excision, FlagSelector,
};
pub use fit::{fit_exponential, fit_exponential_weighted, fit_fringe, FitResult};
pub use purity::{conditional_purity, purity_by_enumeration};
pub use stats::{binomial_sigma, ks_two_sample, Proportion};
