//! Splitting a per-image loss rate into ramp, light, and background parts.

use serde::Serialize;

use super::fit::{fit_exponential_weighted, FitResult};
use super::stats::Proportion;
use crate::error::{Error, Result};

/// Which ingredients of the composite detection step a batch contained:
/// ramps (T), exposure light (E), and the V1 repump (V).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Combo {
    Tev,
    Ev,
    T,
    None,
}

impl Combo {
    pub const ALL: [Combo; 4] = [Combo::Tev, Combo::Ev, Combo::T, Combo::None];

    pub fn name(self) -> &'static str {
        match self {
            Combo::Tev => "TEV",
            Combo::Ev => "EV",
            Combo::T => "T",
            Combo::None => "none",
        }
    }
}

/// Survival against the number of repetitions for one combination.
#[derive(Debug, Clone)]
pub struct DecayBatch {
    pub combo: Combo,
    pub points: Vec<(u32, Proportion)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    pub total: Rate,
    pub ramp: Rate,
    pub light: Rate,
    pub background: Rate,
    /// `|total - (ramp + light + background)|` in units of its combined sigma.
    pub additivity_z: f64,
}

impl Decomposition {
    pub fn additive(&self) -> bool {
        self.additivity_z < 2.0
    }
}

/// Per-repetition loss rate from a survival decay, weighted by binomial
/// errors (floored at one count so that a perfect survival still weighs in).
pub fn decay_rate(points: &[(u32, Proportion)]) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|(n, p)| p.value().map(|v| (*n as f64, v)))
        .collect::<Option<_>>()
        .ok_or(Error::UndefinedStatistic("survival with no conditioned sites"))?;
    let sigmas: Vec<f64> = points.iter().map(|(_, p)| p.sigma().max(1.0 / p.trials as f64)).collect();
    fit_exponential_weighted(&pts, &sigmas, false)
}

pub fn rate_decompose(batches: &[DecayBatch]) -> Result<Decomposition> {
    let missing: Vec<&str> =
        Combo::ALL.iter().filter(|c| !batches.iter().any(|b| b.combo == **c)).map(|c| c.name()).collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteDesign(missing.join(", ")));
    }
    let rate = |c: Combo| -> Result<Rate> {
        let batch = batches.iter().find(|b| b.combo == c).expect("checked above");
        let fit = decay_rate(&batch.points)?;
        Ok(Rate { value: fit.get("rate").unwrap_or(0.0), sigma: fit.sigma("rate").unwrap_or(f64::INFINITY) })
    };
    let (tev, ev, t, none) = (rate(Combo::Tev)?, rate(Combo::Ev)?, rate(Combo::T)?, rate(Combo::None)?);
    let diff = |a: Rate, b: Rate| Rate { value: a.value - b.value, sigma: a.sigma.hypot(b.sigma) };
    let sum = t.value + ev.value - none.value;
    let sigma = [tev.sigma, t.sigma, ev.sigma, none.sigma].iter().map(|s| s * s).sum::<f64>().sqrt();
    let gap = (tev.value - sum).abs();
    Ok(Decomposition {
        total: tev,
        ramp: diff(t, none),
        light: diff(ev, none),
        background: none,
        additivity_z: if sigma > 0.0 {
            gap / sigma
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        },
    })
}
