//! Headline estimators written next to every record batch.

use serde::Serialize;

use erasim::analysis::{
    excise, excised_fidelity, excised_purity, flagged_fraction, fraction, occupied, FlagSelector, Proportion,
};
use erasim::engine::{Primitive, Schedule, TrialRecord, Warning};
use erasim::instruments::{eps01, eps10};
use erasim::{PhysicsParams, StateBin};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub value: Option<f64>,
    pub sigma: f64,
    pub successes: u64,
    pub trials: u64,
}

impl From<Proportion> for Estimate {
    fn from(p: Proportion) -> Self {
        Estimate { value: p.value(), sigma: p.sigma(), successes: p.successes, trials: p.trials }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub master_seed: u64,
    pub schedule_digest: String,
    pub params_digest: String,
    pub n_trials: u64,
    pub n_sites: usize,
    pub n_records: usize,
    pub flag_images: usize,
    pub occupied_fraction: Estimate,
    /// Occupied sites flagged by any error image; this is the data-rate
    /// reduction from excision.
    pub flagged_fraction: Estimate,
    /// Occupied sites flagged although they end in the measured target.
    pub false_positive_fraction: Option<Estimate>,
    pub measure_target: Option<StateBin>,
    /// Occupied sites ending in the target, no excision.
    pub fidelity: Option<Estimate>,
    /// `f_E`: occupied and in the target, among unflagged sites.
    pub excised_fidelity: Option<Estimate>,
    /// `p_E`: in the target among unflagged sites that still hold a molecule.
    pub excised_purity: Option<Estimate>,
    pub model_eps01: f64,
    pub model_eps10: f64,
    pub warnings: Vec<Warning>,
}

pub fn measure_target(schedule: &Schedule) -> Option<StateBin> {
    schedule.steps().iter().rev().find_map(|p| match p {
        Primitive::Measure { target } => Some(*target),
        _ => None,
    })
}

pub fn summarize(
    records: &[TrialRecord],
    schedule: &Schedule,
    params: &PhysicsParams,
    seed: u64,
    n_trials: u64,
    warnings: Vec<Warning>,
) -> Summary {
    let sel = FlagSelector::Any;
    let target = measure_target(schedule);
    let occ = occupied(records);
    let image = &params.images.error;
    Summary {
        master_seed: seed,
        schedule_digest: schedule.digest(),
        params_digest: params.digest(),
        n_trials,
        n_sites: schedule.n_sites(),
        n_records: records.len(),
        flag_images: schedule.n_flags(),
        occupied_fraction: Proportion::from_iter(records.iter().map(|r| r.occupied_initial)).into(),
        flagged_fraction: flagged_fraction(records, sel).into(),
        false_positive_fraction: target
            .map(|t| fraction(occ.iter().copied(), |r| r.any_flag() && r.final_bin == t).into()),
        measure_target: target,
        fidelity: target.map(|t| fraction(occ.iter().copied(), |r| r.final_bin == t).into()),
        excised_fidelity: target.map(|t| excised_fidelity(records, sel, t).into()),
        excised_purity: target.map(|t| excised_purity(records, sel, t).into()),
        model_eps01: eps01(image.threshold, image),
        model_eps10: eps10(image.threshold, image),
        warnings,
    }
}

/// Retained fraction under the same selector, for the sweep table.
pub fn retained(records: &[TrialRecord]) -> Option<f64> {
    excise(records, FlagSelector::Any).retained_fraction()
}
