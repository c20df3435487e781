//! Executing schedules over trials and sites.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::schedule::{resolve_image, ImageKind, LoadInit, Primitive, Schedule};
use crate::dynamics::{HoldModel, OuNoiseState};
use crate::error::{Error, Result};
use crate::instruments::{
    check_composite, classify, composite_detect_site, fluorescence_image, microwave_transfer, optical_pump,
    raman_pulse, ramp_depth, CompositeMode, F0,
};
use crate::params::{ImageParams, PhysicsParams, RamanScheme};
use crate::rng::{stream, STATIC_TRIAL};
use crate::state::{SiteState, StateBin};

/// Upper bound on `n_trials × n_sites` for one run.
pub const MAX_SITE_TRIALS: u64 = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub site_id: u32,
    /// Result of the first non-destructive image; the true load outcome when
    /// the schedule has none.
    pub occupied_initial: bool,
    /// Whether a molecule was actually loaded.
    pub loaded: bool,
    /// `(step index, bit)` for every error or composite image.
    pub flags: Vec<(usize, bool)>,
    pub final_bin: StateBin,
    pub final_measure: Option<bool>,
    /// Bins entered during the trial, in order, starting from the loaded bin.
    pub trail: Vec<StateBin>,
}

impl TrialRecord {
    pub fn any_flag(&self) -> bool {
        self.flags.iter().any(|f| f.1)
    }
}

enum Step<'a> {
    Load { fill: f64, init: LoadInit },
    Image { kind: ImageKind, image: ImageParams },
    Pump(f64),
    Microwave { fidelity: f64, source: StateBin, dest: StateBin },
    Raman { scheme: &'a RamanScheme, angle: f64, axis_phase: f64 },
    Composite { scheme: &'a RamanScheme, mode: CompositeMode, image: ImageParams },
    Hold { duration: f64, repump: Option<f64> },
    Ramp(f64),
    Convert,
    Measure(StateBin),
}

/// A schedule bound to a parameter table.
pub struct Plan<'a> {
    params: &'a PhysicsParams,
    hold: HoldModel<'a>,
    steps: Vec<Step<'a>>,
}

impl<'a> Plan<'a> {
    pub fn new(schedule: &Schedule, params: &'a PhysicsParams) -> Result<Self> {
        params.validate()?;
        let steps = schedule
            .steps()
            .iter()
            .map(|p| {
                Ok(match p {
                    Primitive::Load { fill_prob, init, .. } => Step::Load { fill: *fill_prob, init: *init },
                    Primitive::Image { kind, overrides } => {
                        Step::Image { kind: *kind, image: resolve_image(kind.preset(params), overrides)? }
                    }
                    Primitive::Pump { duration } => Step::Pump(duration.seconds()),
                    Primitive::Microwave { fidelity, source, dest } => {
                        Step::Microwave { fidelity: *fidelity, source: *source, dest: *dest }
                    }
                    Primitive::Raman { scheme, angle, axis_phase } => Step::Raman {
                        scheme: params.raman.get(*scheme),
                        angle: angle.radians(),
                        axis_phase: axis_phase.radians(),
                    },
                    Primitive::CompositeDetect { scheme, mode, overrides } => {
                        let scheme = params.raman.get(*scheme);
                        check_composite(scheme, *mode)?;
                        Step::Composite { scheme, mode: *mode, image: resolve_image(&params.images.error, overrides)? }
                    }
                    Primitive::Hold { duration, repump_period } => {
                        Step::Hold { duration: duration.seconds(), repump: repump_period.map(|r| r.seconds()) }
                    }
                    Primitive::Ramp { depth } => Step::Ramp(depth.resolve(params)),
                    Primitive::Convert => Step::Convert,
                    Primitive::Measure { target } => Step::Measure(*target),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Plan { params, hold: HoldModel::new(params), steps })
    }

    /// Run one site of one trial.
    pub fn run_site(&self, master_seed: u64, trial: u64, site: u32) -> Result<TrialRecord> {
        let p = self.params;
        let mut s = SiteState::new(StateBin::Empty, p.trap.depth_hf);
        let mut loaded = false;
        let mut occupied_initial = None;
        let mut final_measure = None;
        let mut start_bin = StateBin::Empty;
        for (i, step) in self.steps.iter().enumerate() {
            let rng = &mut stream(master_seed, trial, site as u64, i as u64);
            match step {
                Step::Load { fill, init } => {
                    loaded = rng.random::<f64>() < *fill;
                    let bin = match (loaded, init) {
                        (false, _) => StateBin::Empty,
                        (true, LoadInit::Bin(b)) => *b,
                        (true, LoadInit::Detect) if rng.random::<f64>() < F0 => StateBin::DPrime,
                        (true, LoadInit::Detect) => StateBin::FRest,
                    };
                    s = SiteState::new(bin, p.trap.depth_hf);
                    let d = &p.dephasing;
                    if d.sigma_quasistatic > 0.0 {
                        s.static_detune = Normal::new(0.0, d.sigma_quasistatic).expect("finite sigma").sample(rng);
                    }
                    s.ou_detune = OuNoiseState::stationary(d.tau_ou, d.sigma_ou, rng).current_detune;
                    let inh = p.trap.depth_inhomogeneity;
                    if inh > 0.0 {
                        s.depth_error = stream(master_seed, STATIC_TRIAL, site as u64, 0).random_range(-inh..inh);
                    }
                    start_bin = bin;
                }
                Step::Image { kind, image } => {
                    let (count, next) = fluorescence_image(&s, image, p, rng);
                    s = next;
                    let bit = classify(count, image.threshold);
                    match kind {
                        ImageKind::Nondestructive => {
                            occupied_initial.get_or_insert(bit);
                        }
                        ImageKind::Error => s.push_flag(i, bit),
                        ImageKind::Destructive => final_measure = Some(bit),
                    }
                }
                Step::Pump(t) => s = optical_pump(&s, *t, &p.pump, rng),
                Step::Microwave { fidelity, source, dest } => {
                    s = microwave_transfer(&s, *fidelity, *source, *dest, rng)?
                }
                Step::Raman { scheme, angle, axis_phase } => s = raman_pulse(&s, scheme, *angle, *axis_phase, p, rng),
                Step::Composite { scheme, mode, image } => {
                    let (flag, next) = composite_detect_site(&s, scheme, image, *mode, &self.hold, p, rng)?;
                    s = next;
                    if let Some(bit) = flag {
                        s.push_flag(i, bit);
                    }
                }
                Step::Hold { duration, repump } => s = self.hold.evolve(&s, *duration, *repump, rng)?,
                Step::Ramp(depth) => s = ramp_depth(&s, *depth, p, rng)?,
                Step::Convert => s = crate::instruments::convert_erasures(&s, p, rng),
                Step::Measure(target) => {
                    if target.is_qubit_state() {
                        s.project_qubit(rng.random());
                    }
                    final_measure = Some(s.bin == *target);
                }
            }
        }
        let mut trail = Vec::with_capacity(s.trail.len() + 1);
        trail.push(start_bin);
        trail.extend_from_slice(&s.trail);
        Ok(TrialRecord {
            trial_id: trial,
            site_id: site,
            occupied_initial: occupied_initial.unwrap_or(loaded),
            loaded,
            flags: std::mem::take(&mut s.flags),
            final_bin: s.bin,
            final_measure,
            trail,
        })
    }
}

fn check_size(schedule: &Schedule, n_trials: u64) -> Result<()> {
    if n_trials == 0 {
        return Err(Error::Argument("n_trials must be at least 1".into()));
    }
    let total = n_trials.saturating_mul(schedule.n_sites() as u64);
    if total > MAX_SITE_TRIALS {
        return Err(Error::ResourceLimit(format!("{total} site-trials exceeds the limit of {MAX_SITE_TRIALS}")));
    }
    Ok(())
}

/// Run every `(trial, site)` in parallel. Records come back sorted by trial
/// then site and are identical for any thread count.
pub fn run_trials(
    schedule: &Schedule,
    n_trials: u64,
    master_seed: u64,
    params: &PhysicsParams,
) -> Result<Vec<TrialRecord>> {
    run_trials_from(schedule, 0, n_trials, master_seed, params)
}

/// As [`run_trials`], with trial ids starting at `first_trial`.
pub fn run_trials_from(
    schedule: &Schedule,
    first_trial: u64,
    n_trials: u64,
    master_seed: u64,
    params: &PhysicsParams,
) -> Result<Vec<TrialRecord>> {
    check_size(schedule, n_trials)?;
    let plan = Plan::new(schedule, params)?;
    let n_sites = schedule.n_sites() as u64;
    let mut records = (0..n_trials * n_sites)
        .into_par_iter()
        .map(|k| plan.run_site(master_seed, first_trial + k / n_sites, (k % n_sites) as u32))
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| (r.trial_id, r.site_id));
    Ok(records)
}

/// Serial reference execution, used to check the parallel path.
pub fn run_trials_serial(
    schedule: &Schedule,
    n_trials: u64,
    master_seed: u64,
    params: &PhysicsParams,
) -> Result<Vec<TrialRecord>> {
    check_size(schedule, n_trials)?;
    let plan = Plan::new(schedule, params)?;
    let mut out = Vec::new();
    for trial in 0..n_trials {
        for site in 0..schedule.n_sites() as u32 {
            out.push(plan.run_site(master_seed, trial, site)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::parse_script;

    #[test]
    fn load_fraction() {
        let s = parse_script("load 10 0.6").unwrap();
        let recs = run_trials(&s, 1000, 3, &PhysicsParams::default()).unwrap();
        let n = recs.len() as f64;
        let frac = recs.iter().filter(|r| r.loaded).count() as f64 / n;
        assert!((frac - 0.6).abs() < 3.0 * (0.24 / n).sqrt(), "{frac}");
    }

    #[test]
    fn deterministic_and_parallel_safe() {
        let s = parse_script("load 5 0.8 init=Q_DOWN\nraman xb pi/2\nhold 200ms repump=50ms\ncomposite_detect xb\nraman xb pi/2 1.0\nmeasure Q_DOWN")
            .unwrap();
        let p = PhysicsParams::default();
        let a = run_trials(&s, 200, 7, &p).unwrap();
        let b = run_trials(&s, 200, 7, &p).unwrap();
        let c = run_trials_serial(&s, 200, 7, &p).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_ne!(a, run_trials(&s, 200, 8, &p).unwrap());
        assert!(a.iter().all(|r| r.flags.len() == s.n_flags()));
    }

    #[test]
    fn limits() {
        let s = parse_script("load 10 1").unwrap();
        let p = PhysicsParams::default();
        assert!(matches!(run_trials(&s, 0, 1, &p), Err(Error::Argument(_))));
        assert!(matches!(run_trials(&s, MAX_SITE_TRIALS, 1, &p), Err(Error::ResourceLimit(_))));
    }
}
