//! Fit the two-component dephasing model to measured coherence times.
//!
//! The quasi-static part is fixed by the free-induction time alone. The OU
//! part must then reproduce the echo time; its correlation time is either
//! pinned to half the echo time or chosen to also match a dynamically
//! decoupled coherence time.

use serde::Serialize;

use super::noise::Filter;
use crate::error::{Error, Result};
use crate::params::PhysicsParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DephasingFit {
    pub sigma_quasistatic: f64,
    pub sigma_ou: f64,
    pub tau_ou: f64,
    /// |model echo amplitude at `t2_echo` − 1/e|.
    pub residual: f64,
}

/// A dynamically decoupled coherence time the OU correlation time should match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecouplingTarget {
    /// Spacing of the π pulses, s.
    pub pulse_spacing: f64,
    /// Measured 1/e time of the decoupled fringe amplitude, s.
    pub t_target: f64,
    /// Fractional fringe-amplitude loss per π pulse.
    pub pulse_amplitude_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CalibrationOptions {
    /// Coherence decay not caused by frequency noise (population loss), 1/s.
    pub background_rate: f64,
    /// When set, choose `tau_ou` to satisfy it; otherwise `tau_ou = t2_echo / 2`.
    pub decoupling: Option<DecouplingTarget>,
}

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Measured free-induction time of the hyperfine qubit at `depth_hf`, s.
pub const T2_STAR: f64 = 19.5e-3;
/// Measured single-echo coherence time, s.
pub const T2_ECHO: f64 = 0.288;
/// XY8 pulse separation, s.
pub const XY8_SPACING: f64 = 33.3e-3;
/// XY8 coherence time with X-A pulses, s.
pub const XY8_TIME_XA: f64 = 1.1;

/// Options that tie the OU correlation time to the X-A XY8 time, with the
/// population loss from blackbody excitation and vacuum as background.
pub fn xy8_options(params: &PhysicsParams) -> CalibrationOptions {
    let xa = &params.raman.xa_current;
    CalibrationOptions {
        background_rate: params.blackbody.gamma_01 + params.vacuum.gamma_vac,
        decoupling: Some(DecouplingTarget {
            pulse_spacing: XY8_SPACING,
            t_target: XY8_TIME_XA,
            pulse_amplitude_loss: xa.pulse_amplitude_loss(),
        }),
    }
}

/// Calibration with `tau_ou = t2_echo / 2` and no background decay.
pub fn calibrate_dephasing(t2_star: f64, t2_echo: f64) -> Result<DephasingFit> {
    calibrate_dephasing_with(t2_star, t2_echo, &CalibrationOptions::default())
}

pub fn calibrate_dephasing_with(t2_star: f64, t2_echo: f64, opts: &CalibrationOptions) -> Result<DephasingFit> {
    if !(t2_star > 0.0 && t2_echo > t2_star) {
        return Err(Error::Calibration(format!(
            "need t2_echo > t2_star > 0, got t2_star = {t2_star}, t2_echo = {t2_echo}"
        )));
    }
    let sigma_quasistatic = std::f64::consts::SQRT_2 / t2_star;
    let tau_ou = match opts.decoupling {
        None => t2_echo / 2.0,
        Some(target) => solve_tau(t2_echo, opts.background_rate, &target)?,
    };
    let sigma_ou = sigma_for_echo(t2_echo, tau_ou, opts.background_rate)?;
    let amp = (-opts.background_rate * t2_echo).exp() * Filter::echo(t2_echo).coherence(0.0, sigma_ou, tau_ou);
    let residual = (amp - INV_E).abs();
    if residual > 1e-3 {
        return Err(Error::Calibration(format!("echo residual {residual:.2e} exceeds 1e-3")));
    }
    Ok(DephasingFit { sigma_quasistatic, sigma_ou, tau_ou, residual })
}

/// OU amplitude that puts the echo at 1/e after `t2_echo`.
fn sigma_for_echo(t2_echo: f64, tau: f64, background: f64) -> Result<f64> {
    let budget = 1.0 - background * t2_echo;
    if budget <= 0.0 {
        return Err(Error::Calibration(format!(
            "background decay {background} 1/s alone exceeds the echo time {t2_echo} s"
        )));
    }
    // Var/2 = σ² · (unit-variance half-variance).
    let unit = 0.5 * Filter::echo(t2_echo).ou_variance(1.0, tau);
    Ok((budget / unit).sqrt())
}

/// Amplitude after `n` decoupling pulses for the given noise model.
pub fn decoupled_amplitude(n: usize, target: &DecouplingTarget, background: f64, sigma_ou: f64, tau_ou: f64) -> f64 {
    let t = n as f64 * target.pulse_spacing;
    (-background * t).exp()
        * (1.0 - target.pulse_amplitude_loss).powi(n as i32)
        * Filter::equally_spaced(n, target.pulse_spacing).coherence(0.0, sigma_ou, tau_ou)
}

/// 1/e time of the decoupled amplitude, interpolating log-amplitude between
/// whole pulse numbers.
pub fn decoupled_time(target: &DecouplingTarget, background: f64, sigma_ou: f64, tau_ou: f64) -> Option<f64> {
    let mut prev = 0.0f64;
    for n in 1..100_000 {
        let cur = decoupled_amplitude(n, target, background, sigma_ou, tau_ou).ln();
        if cur <= -1.0 {
            let frac = (-1.0 - prev) / (cur - prev);
            return Some(((n - 1) as f64 + frac) * target.pulse_spacing);
        }
        prev = cur;
    }
    None
}

fn solve_tau(t2_echo: f64, background: f64, target: &DecouplingTarget) -> Result<f64> {
    let mismatch = |tau: f64| -> Result<f64> {
        let sigma = sigma_for_echo(t2_echo, tau, background)?;
        let t = decoupled_time(target, background, sigma, tau).unwrap_or(f64::INFINITY);
        Ok(t - target.t_target)
    };
    // Longer correlation times let the decoupling filter more noise, so the
    // decoupled time grows monotonically with tau over this bracket.
    let (mut lo, mut hi) = (t2_echo * 1e-3, t2_echo * 10.0);
    let (flo, fhi) = (mismatch(lo)?, mismatch(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::Calibration(format!(
            "no tau_ou in [{lo:.3e}, {hi:.3e}] s reproduces the decoupled time {} s \
             (mismatch {flo:.3e} .. {fhi:.3e} s)",
            target.t_target
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mismatch(mid)?.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-12 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}
