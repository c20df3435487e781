//! Exponential decay and Ramsey fringe fits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    /// Named parameters in model order.
    pub params: Vec<(&'static str, f64)>,
    /// One-sigma uncertainties, same order as `params`.
    pub sigmas: Vec<f64>,
    pub residual_norm: f64,
    pub n_points: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.0 == name).map(|p| p.1)
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.params.iter().position(|p| p.0 == name).map(|i| self.sigmas[i])
    }
}

fn model(theta: &[f64], t: f64) -> f64 {
    theta[0] * (-theta[1] * t).exp() + theta.get(2).copied().unwrap_or(0.0)
}

fn jacobian(theta: &[f64], ts: &[f64]) -> DMatrix<f64> {
    let p = theta.len();
    DMatrix::from_fn(ts.len(), p, |i, j| {
        let e = (-theta[1] * ts[i]).exp();
        match j {
            0 => e,
            1 => -theta[0] * ts[i] * e,
            _ => 1.0,
        }
    })
}

fn rss(theta: &[f64], pts: &[(f64, f64)], w: &[f64]) -> f64 {
    pts.iter().zip(w).map(|(&(t, y), w)| w * (y - model(theta, t)).powi(2)).sum()
}

/// Log-linear least squares on `ln(y - c)` for the starting point.
fn initial_guess(pts: &[(f64, f64)], with_offset: bool) -> Vec<f64> {
    let c = if with_offset {
        let min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        min - 0.1 * (max - min).max(1e-12)
    } else {
        0.0
    };
    let usable: Vec<(f64, f64)> = pts.iter().filter(|p| p.1 - c > 0.0).map(|&(t, y)| (t, (y - c).ln())).collect();
    let (a, g) = if usable.len() >= 2 {
        let n = usable.len() as f64;
        let mt = usable.iter().map(|p| p.0).sum::<f64>() / n;
        let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = usable.iter().map(|p| (p.0 - mt).powi(2)).sum();
        let sxy: f64 = usable.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        ((my - slope * mt).exp(), -slope)
    } else {
        (pts[0].1 - c, 0.0)
    };
    let mut theta = vec![a, g];
    if with_offset {
        theta.push(c);
    }
    theta
}

/// Fit `y = A exp(-gamma t) [+ C]` by Levenberg-Marquardt. Uncertainties
/// are scaled by the residual variance.
pub fn fit_exponential(points: &[(f64, f64)], with_offset: bool) -> Result<FitResult> {
    fit_exponential_core(points, &vec![1.0; points.len()], with_offset, false)
}

/// Weighted variant with per-point standard errors `sigmas`. The covariance
/// is inflated by the reduced chi-square only when that exceeds one.
pub fn fit_exponential_weighted(points: &[(f64, f64)], sigmas: &[f64], with_offset: bool) -> Result<FitResult> {
    if sigmas.len() != points.len() || sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::Argument("weights must be positive and match the points".into()));
    }
    let w: Vec<f64> = sigmas.iter().map(|s| 1.0 / (s * s)).collect();
    fit_exponential_core(points, &w, with_offset, true)
}

fn fit_exponential_core(points: &[(f64, f64)], w: &[f64], with_offset: bool, weighted: bool) -> Result<FitResult> {
    let p = if with_offset { 3 } else { 2 };
    if points.len() < p + 1 {
        return Err(Error::Argument(format!("need at least {} points, got {}", p + 1, points.len())));
    }
    let mut ts: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ts_all = ts.clone();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < p {
        return Err(Error::Argument("fewer distinct abscissae than parameters".into()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::Argument("non-finite data point".into()));
    }
    let mut theta = initial_guess(points, with_offset);
    let mut cost = rss(&theta, points, w);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..500 {
        let j = jacobian(&theta, &ts_all);
        let r =
            DVector::from_iterator(points.len(), points.iter().zip(w).map(|(&(t, y), w)| w * (y - model(&theta, t))));
        let jt = j.transpose();
        let jtw = DMatrix::from_fn(p, points.len(), |a, i| jt[(a, i)] * w[i]);
        let jtj = &jtw * &j;
        let g = jt * r;
        if g.amax() < 1e-15 * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut stepped = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..p {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&g) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
            let c = rss(&trial, points, w);
            if c.is_finite() && c <= cost {
                let rel = delta.iter().zip(&theta).map(|(d, t)| d.abs() / (t.abs() + 1e-10)).fold(0.0, f64::max);
                let small = rel < 1e-10 || (cost - c) <= 1e-14 * cost.max(1e-300);
                theta = trial;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                stepped = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !stepped {
            // No downhill step at any damping: a stationary point.
            converged = true;
            break;
        }
    }
    let residual_norm = cost.sqrt();
    if !converged || theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Fit { message: "exponential fit did not converge".into(), residual_norm });
    }
    let dof = points.len() - p;
    let chi2 = cost / dof as f64;
    let s2 = if weighted { chi2.max(1.0) } else { chi2 };
    let j = jacobian(&theta, &ts_all);
    let jtw = DMatrix::from_fn(p, points.len(), |a, i| j[(i, a)] * w[i]);
    let cov = (jtw * j).try_inverse();
    let sigmas = match cov {
        Some(c) => (0..p).map(|k| (s2 * c[(k, k)]).max(0.0).sqrt()).collect(),
        None => vec![f64::INFINITY; p],
    };
    let names: [&'static str; 3] = ["amplitude", "rate", "offset"];
    Ok(FitResult {
        params: names.iter().copied().zip(theta).collect(),
        sigmas,
        residual_norm,
        n_points: points.len(),
        converged,
    })
}

/// Largest circular gap between phases, in radians.
fn max_phase_gap(phases: &[f64]) -> f64 {
    let mut w: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
    w.sort_by(f64::total_cmp);
    let wrap = w[0] + TAU - w[w.len() - 1];
    w.windows(2).map(|p| p[1] - p[0]).fold(wrap, f64::max)
}

fn linear_fringe(phases: &[f64], ys: &[f64]) -> Option<[f64; 3]> {
    let x = DMatrix::from_fn(phases.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => phases[i].cos(),
        _ => phases[i].sin(),
    });
    let y = DVector::from_column_slice(ys);
    let beta = (x.transpose() * &x).lu().solve(&(x.transpose() * y))?;
    Some([beta[0], beta[1], beta[2]])
}

fn fringe_params(beta: [f64; 3]) -> (f64, f64, f64) {
    (beta[0], 2.0 * beta[1].hypot(beta[2]), beta[2].atan2(beta[1]))
}

/// Fit `P(phi) = C + (A/2) cos(phi - phi0)` by linear least squares.
/// Uncertainties come from a 200-resample residual bootstrap.
pub fn fit_fringe(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 5 {
        return Err(Error::Argument(format!("need at least 5 fringe points, got {}", points.len())));
    }
    let phases: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    if max_phase_gap(&phases) >= std::f64::consts::PI {
        return Err(Error::Argument("degenerate phase coverage: points must span a full period".into()));
    }
    let beta = linear_fringe(&phases, &ys)
        .ok_or_else(|| Error::Argument("degenerate phase coverage: singular design".into()))?;
    let fitted: Vec<f64> = phases.iter().map(|p| beta[0] + beta[1] * p.cos() + beta[2] * p.sin()).collect();
    let resid: Vec<f64> = ys.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let residual_norm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
    let (c, a, phi0) = fringe_params(beta);

    let mut rng = stream(0xF1_7F_21_7E, points.len() as u64, 0, 0);
    let mut samples = Vec::with_capacity(200);
    for _ in 0..200 {
        let yb: Vec<f64> = fitted.iter().map(|f| f + resid[rng.random_range(0..resid.len())]).collect();
        if let Some(b) = linear_fringe(&phases, &yb) {
            samples.push(fringe_params(b));
        }
    }
    let sd = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
        let n = samples.len() as f64;
        let m = samples.iter().map(f).sum::<f64>() / n;
        (samples.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    // Wrap each bootstrap phase to the fitted one before taking the spread.
    let phase_dev = |s: &(f64, f64, f64)| (s.2 - phi0 + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
    Ok(FitResult {
        params: vec![("offset", c), ("amplitude", a), ("phase", phi0)],
        sigmas: vec![sd(&|s| s.0), sd(&|s| s.1), sd(&phase_dev)],
        residual_norm,
        n_points: points.len(),
        converged: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_recovered() {
        let pts: Vec<(f64, f64)> = (0..12).map(|i| (i as f64, 0.9 * (-0.07 * i as f64).exp())).collect();
        let f = fit_exponential(&pts, false).unwrap();
        assert!((f.get("rate").unwrap() - 0.07).abs() < 1e-9);
        assert!((f.get("amplitude").unwrap() - 0.9).abs() < 1e-9);
        let pts: Vec<(f64, f64)> = (0..15).map(|i| (i as f64, 0.4 * (-0.2 * i as f64).exp() + 0.5)).collect();
        let f = fit_exponential(&pts, true).unwrap();
        assert!((f.get("rate").unwrap() - 0.2).abs() < 1e-7, "{f:?}");
        assert!((f.get("offset").unwrap() - 0.5).abs() < 1e-7);
    }

    #[test]
    fn constant_data_has_zero_rate() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 0.8)).collect();
        let f = fit_exponential(&pts, false).unwrap();
        assert!(f.get("rate").unwrap().abs() <= f.sigma("rate").unwrap() + 1e-12);
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(fit_exponential(&[(0.0, 1.0), (1.0, 0.5)], false).is_err());
        assert!(fit_exponential(&[(0.0, 1.0), (0.0, 0.5), (0.0, 0.4)], false).is_err());
    }

    #[test]
    fn fringe_recovered() {
        let pts: Vec<(f64, f64)> =
            (0..8).map(|k| k as f64 * TAU / 8.0).map(|p| (p, 0.5 + 0.45 * (p - 0.3).cos())).collect();
        let f = fit_fringe(&pts).unwrap();
        assert!((f.get("offset").unwrap() - 0.5).abs() < 1e-12);
        assert!((f.get("amplitude").unwrap() - 0.9).abs() < 1e-12);
        assert!((f.get("phase").unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn flat_fringe_and_bad_coverage() {
        let pts: Vec<(f64, f64)> = (0..8).map(|k| (k as f64 * TAU / 8.0, 0.5)).collect();
        let f = fit_fringe(&pts).unwrap();
        assert!(f.get("amplitude").unwrap() <= f.sigma("amplitude").unwrap() + 1e-12);
        let half: Vec<(f64, f64)> = (0..8).map(|k| (k as f64 * 0.4, 0.5)).collect();
        assert!(fit_fringe(&half).is_err());
        assert!(fit_fringe(&pts[..4]).is_err());
    }
}
