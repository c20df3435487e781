//! Registered reference scenarios. Each target runs a fixed experiment at a
//! fixed seed and compares the simulated estimate to a reference value.

mod criteria;
mod experiments;

use serde::Serialize;
use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::params::PhysicsParams;

/// Inputs shared by every target.
#[derive(Debug, Clone)]
pub struct Context {
    pub params: PhysicsParams,
    pub seed: u64,
}

impl Default for Context {
    fn default() -> Self {
        Context { params: PhysicsParams::default(), seed: 20_240_601 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    Within {
        target: f64,
        tol: f64,
    },
    AtLeast {
        bound: f64,
    },
    AtMost {
        bound: f64,
    },
    /// `|simulated - expected| <= k * sigma`.
    Sigmas {
        expected: f64,
        k: f64,
    },
    Holds,
}

impl fmt::Display for Tolerance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Tolerance::Within { target, tol } => write!(f, "{} ± {}", num(target), num(tol)),
            Tolerance::AtLeast { bound } => write!(f, ">= {}", num(bound)),
            Tolerance::AtMost { bound } => write!(f, "<= {}", num(bound)),
            Tolerance::Sigmas { expected, k } => write!(f, "{} within {k}σ", num(expected)),
            Tolerance::Holds => write!(f, "holds"),
        }
    }
}

fn num(x: f64) -> String {
    if x == 0.0 || (1e-2..1e4).contains(&x.abs()) {
        format!("{x:.4}")
    } else {
        format!("{x:.3e}")
    }
}

/// One compared quantity.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub label: String,
    /// Reference value as published, with its quoted uncertainty.
    pub reference: String,
    pub simulated: f64,
    pub sigma: Option<f64>,
    pub tolerance: Tolerance,
    pub pass: bool,
}

impl Check {
    pub fn within(label: &str, reference: &str, simulated: f64, sigma: Option<f64>, target: f64, tol: f64) -> Self {
        let pass = (simulated - target).abs() <= tol;
        Check::new(label, reference, simulated, sigma, Tolerance::Within { target, tol }, pass)
    }

    pub fn at_least(label: &str, reference: &str, simulated: f64, sigma: Option<f64>, bound: f64) -> Self {
        Check::new(label, reference, simulated, sigma, Tolerance::AtLeast { bound }, simulated >= bound)
    }

    pub fn at_most(label: &str, reference: &str, simulated: f64, sigma: Option<f64>, bound: f64) -> Self {
        Check::new(label, reference, simulated, sigma, Tolerance::AtMost { bound }, simulated <= bound)
    }

    pub fn agrees(label: &str, reference: &str, simulated: f64, sigma: f64, expected: f64, k: f64) -> Self {
        let pass = (simulated - expected).abs() <= k * sigma;
        Check::new(label, reference, simulated, Some(sigma), Tolerance::Sigmas { expected, k }, pass)
    }

    pub fn holds(label: &str, reference: &str, pass: bool) -> Self {
        Check::new(label, reference, pass as u8 as f64, None, Tolerance::Holds, pass)
    }

    fn new(label: &str, reference: &str, simulated: f64, sigma: Option<f64>, tolerance: Tolerance, pass: bool) -> Self {
        let pass = pass && simulated.is_finite();
        Check { label: label.into(), reference: reference.into(), simulated, sigma, tolerance, pass }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sim = match (self.tolerance, self.sigma) {
            (Tolerance::Holds, _) => (if self.pass { "yes" } else { "no" }).to_string(),
            (_, Some(s)) => format!("{} ± {}", num(self.simulated), num(s)),
            (_, None) => num(self.simulated),
        };
        write!(
            f,
            "{} {:<34} reference {:<14} simulated {:<24} tolerance {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.label,
            self.reference,
            sim,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub id: &'static str,
    pub criterion: u8,
    pub title: &'static str,
    pub checks: Vec<Check>,
    pub elapsed_s: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} criterion {} [{}] {} ({:.1} s)",
            if self.passed() { "PASS" } else { "FAIL" },
            self.criterion,
            self.id,
            self.title,
            self.elapsed_s
        )?;
        for c in &self.checks {
            writeln!(f, "    {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Target {
    pub id: &'static str,
    pub criterion: u8,
    pub title: &'static str,
    run: fn(&Context) -> Result<Vec<Check>>,
}

impl Target {
    pub fn run(&self, ctx: &Context) -> Result<Report> {
        let start = Instant::now();
        let checks = (self.run)(ctx)?;
        Ok(Report {
            id: self.id,
            criterion: self.criterion,
            title: self.title,
            checks,
            elapsed_s: start.elapsed().as_secs_f64(),
        })
    }
}

static REGISTRY: [Target; 9] = [
    Target {
        id: "imaging-lifetime",
        criterion: 1,
        title: "target-state lifetime under continuous imaging",
        run: criteria::imaging_lifetime,
    },
    Target { id: "roc-operating-point", criterion: 2, title: "classifier infidelities", run: criteria::roc },
    Target {
        id: "prep-fidelity",
        criterion: 3,
        title: "state preparation with error excision",
        run: criteria::preparation,
    },
    Target {
        id: "coherence-calibration",
        criterion: 4,
        title: "dephasing calibration and XY8 times",
        run: criteria::coherence_calibration,
    },
    Target {
        id: "composite-eps-p",
        criterion: 5,
        title: "errors per composite erasure detection",
        run: criteria::composite,
    },
    Target {
        id: "rate-decomposition",
        criterion: 6,
        title: "ramp, light and background loss per image",
        run: criteria::decomposition,
    },
    Target {
        id: "blackbody-conversion",
        criterion: 7,
        title: "erasure conversion of blackbody errors",
        run: criteria::blackbody,
    },
    Target {
        id: "coherence-excision",
        criterion: 8,
        title: "XY8 coherence with and without excision",
        run: criteria::coherence_excision,
    },
    Target { id: "property-suite", criterion: 9, title: "model property checks", run: criteria::properties },
];

pub fn registry() -> &'static [Target] {
    &REGISTRY
}

pub fn target_ids() -> Vec<&'static str> {
    REGISTRY.iter().map(|t| t.id).collect()
}

/// Look up a target by id or by criterion number.
pub fn find(id: &str) -> Result<&'static Target> {
    REGISTRY.iter().find(|t| t.id == id || t.criterion.to_string() == id).ok_or_else(|| {
        Error::Argument(format!("unknown reproduce target `{id}`; available: {}", target_ids().join(", ")))
    })
}

pub fn reproduce(id: &str, ctx: &Context) -> Result<Report> {
    find(id)?.run(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(find("prep-fidelity").unwrap().criterion, 3);
        assert_eq!(find("5").unwrap().id, "composite-eps-p");
        let err = find("nope").unwrap_err().to_string();
        assert!(err.contains("imaging-lifetime") && err.contains("property-suite"));
    }

    #[test]
    fn check_semantics() {
        assert!(Check::within("x", "1", 1.05, None, 1.0, 0.1).pass);
        assert!(!Check::within("x", "1", 1.2, None, 1.0, 0.1).pass);
        assert!(!Check::within("x", "1", f64::NAN, None, 1.0, 0.1).pass);
        assert!(Check::agrees("x", "1", 1.0, 0.1, 1.15, 2.0).pass);
        assert!(Check::at_most("x", "1", 0.5, None, 0.5).pass);
        let line = Check::within("eps", "0.033", 0.0331, Some(2e-4), 0.033, 0.005).to_string();
        assert!(line.starts_with("PASS") && line.contains("0.0331"));
    }
}
