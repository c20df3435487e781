//! Shared experiment builders for the registered scenarios.

use std::f64::consts::TAU;

use super::Context;
use crate::analysis::{
    excise, fit_exponential, fit_fringe, rate_decompose, Combo, DecayBatch, Decomposition, FitResult, FlagSelector,
    Proportion,
};
use crate::engine::{parse_script, run_trials, TrialRecord};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

pub const FRINGE_PHASES: usize = 8;

pub fn run_script(ctx: &Context, text: &str, n_trials: u64, stream: u64) -> Result<Vec<TrialRecord>> {
    let schedule = parse_script(text)?;
    run_trials(&schedule, n_trials, derive_seed(ctx.seed, stream), &ctx.params)
}

/// Fraction of records whose terminal measurement came out true.
pub fn measured<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Proportion {
    Proportion::from_iter(records.into_iter().map(|r| r.final_measure == Some(true)))
}

pub fn repeat(n: u32, body: &str) -> String {
    if n == 0 {
        String::new()
    } else {
        format!("repeat {n}\n{}\nend\n", body.trim_end())
    }
}

/// Records to keep when reading a fringe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    All,
    Excised,
}

/// Fringe fits (offset, amplitude) against a scan variable, one series per
/// view. `script(x, phase)` must end in a measurement.
pub fn fringe_series(
    ctx: &Context,
    xs: &[f64],
    script: impl Fn(f64, f64) -> String,
    n_trials: u64,
    stream: u64,
    views: &[View],
) -> Result<Vec<Vec<(f64, FitResult)>>> {
    let mut out = vec![Vec::with_capacity(xs.len()); views.len()];
    for (i, &x) in xs.iter().enumerate() {
        let mut points = vec![Vec::with_capacity(FRINGE_PHASES); views.len()];
        for k in 0..FRINGE_PHASES {
            let phase = k as f64 * TAU / FRINGE_PHASES as f64;
            let records = run_script(ctx, &script(x, phase), n_trials, stream * 1000 + (i * FRINGE_PHASES + k) as u64)?;
            for (v, view) in views.iter().enumerate() {
                let p = match view {
                    View::All => measured(&records),
                    View::Excised => measured(excise(&records, FlagSelector::Any).kept),
                };
                let value = p.value().ok_or(Error::UndefinedStatistic("fringe point with no retained sites"))?;
                points[v].push((phase, value));
            }
        }
        for (v, pts) in points.iter().enumerate() {
            out[v].push((x, fit_fringe(pts)?));
        }
    }
    Ok(out)
}

pub fn column(series: &[(f64, FitResult)], name: &str) -> Vec<(f64, f64)> {
    series.iter().map(|(x, f)| (*x, f.get(name).unwrap_or(f64::NAN))).collect()
}

/// Decay rate and its sigma from an offset-free exponential fit.
pub fn decay(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let f = fit_exponential(points, false)?;
    Ok((f.get("rate").unwrap_or(f64::NAN), f.sigma("rate").unwrap_or(f64::NAN)))
}

/// Per-repetition error `1 - exp(-rate)` with a propagated sigma.
pub fn per_repetition(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    let (rate, sigma) = decay(points)?;
    Ok((1.0 - (-rate).exp(), sigma * (-rate).exp()))
}

/// Time at which the normalized amplitude first crosses 1/e, interpolating
/// log-amplitude linearly between the bracketing points.
pub fn one_over_e_time(points: &[(f64, f64)]) -> Option<f64> {
    let a0 = points.first()?.1;
    let logs: Vec<(f64, f64)> = points.iter().map(|&(t, a)| (t, (a / a0).max(1e-12).ln())).collect();
    logs.windows(2).find(|w| w[1].1 <= -1.0).map(|w| {
        let (t0, l0) = w[0];
        let (t1, l1) = w[1];
        t0 + (t1 - t0) * (-1.0 - l0) / (l1 - l0)
    })
}

/// One XY8 block with pulse separation `spacing` (seconds). Holds carry
/// `hold_opts` verbatim, e.g. a repump period.
pub fn xy8_block(scheme: &str, spacing: f64, hold_opts: &str) -> String {
    const AXES: [&str; 8] = ["0", "pi/2", "0", "pi/2", "pi/2", "0", "pi/2", "0"];
    let us = |s: f64| format!("{:.3}us", s * 1e6);
    let mut out = format!("hold {}{hold_opts}\n", us(spacing / 2.0));
    for (i, axis) in AXES.iter().enumerate() {
        out.push_str(&format!("raman {scheme} pi {axis}\n"));
        let gap = if i + 1 == AXES.len() { spacing / 2.0 } else { spacing };
        out.push_str(&format!("hold {}{hold_opts}\n", us(gap)));
    }
    out
}

/// Period of one decomposition cycle: the 3 ms image plus the ramps and
/// repump pulse around it.
pub const DECOMPOSITION_CYCLE: &str = "4ms";

/// Survival of |↓⟩ against repetitions of each ramp (T), detection light (E)
/// and v=1 repump (V) combination.
pub fn decomposition(ctx: &Context, n_trials: u64, stream: u64) -> Result<Decomposition> {
    let hold = format!("hold {DECOMPOSITION_CYCLE}");
    let cycles = [
        (Combo::Tev, format!("ramp ed\nimage error\nconvert\nramp hf\n{hold}")),
        (Combo::Ev, format!("image error\nconvert\n{hold}")),
        (Combo::T, format!("ramp ed\nramp hf\n{hold}")),
        (Combo::None, hold.clone()),
    ];
    let mut batches = Vec::new();
    for (c, (combo, cycle)) in cycles.iter().enumerate() {
        let mut points = Vec::new();
        for n in (0u32..=60).step_by(10) {
            let text = format!("load 10 1 init=Q_DOWN\n{}measure Q_DOWN", repeat(n, cycle));
            let records = run_script(ctx, &text, n_trials, stream * 100 + (c * 10) as u64 + (n / 10) as u64)?;
            points.push((n, measured(&records)));
        }
        batches.push(DecayBatch { combo: *combo, points });
    }
    rate_decompose(&batches)
}
