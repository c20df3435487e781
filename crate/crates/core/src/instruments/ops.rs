//! Optical pumping, microwave shelving, Raman pulses, tweezer ramps, and
//! erasure conversion.

use std::f64::consts::PI;

use rand::Rng;

use super::imaging::leak_destination;
use crate::error::{Error, Result};
use crate::params::{PhysicsParams, PumpParams, RamanScheme};
use crate::state::{apply_rotation, SiteState, StateBin};

/// Population in `|D'⟩` with no pumping: one of twelve states.
pub const F0: f64 = 1.0 / 12.0;

/// Optical pumping fidelity after `duration`.
pub fn pump_fidelity(duration: f64, pump: &PumpParams) -> f64 {
    let decay = (-duration / pump.tau_op).exp();
    pump.f_inf * (1.0 - decay) + F0 * decay
}

/// Pumping duration that reaches fidelity `f`, if reachable.
pub fn pump_duration_for(f: f64, pump: &PumpParams) -> Option<f64> {
    let ratio = (pump.f_inf - f) / (pump.f_inf - F0);
    (ratio > 0.0 && ratio <= 1.0).then(|| -pump.tau_op * ratio.ln())
}

pub fn optical_pump<R: Rng + ?Sized>(site: &SiteState, duration: f64, pump: &PumpParams, rng: &mut R) -> SiteState {
    let mut s = site.clone();
    if !s.bin.in_cycling_manifold() {
        return s;
    }
    let to = if rng.random::<f64>() < pump_fidelity(duration, pump) { StateBin::DPrime } else { StateBin::FRest };
    s.jump(to);
    s
}

/// A microwave photon changes N by one, so only N=0 ↔ N=1 pairs are allowed.
pub fn check_selection_rule(source: StateBin, dest: StateBin) -> Result<()> {
    let ground = |b: StateBin| b.in_ground_rotational() && b != StateBin::Qubit;
    if (ground(source) && dest.in_cycling_manifold()) || (source.in_cycling_manifold() && ground(dest)) {
        Ok(())
    } else {
        Err(Error::SelectionRule { from: source, dest })
    }
}

pub fn microwave_transfer<R: Rng + ?Sized>(
    site: &SiteState,
    fidelity: f64,
    source: StateBin,
    dest: StateBin,
    rng: &mut R,
) -> Result<SiteState> {
    if source == dest {
        return Err(Error::Argument("microwave source and destination coincide".into()));
    }
    if !(0.0..=1.0).contains(&fidelity) {
        return Err(Error::Argument(format!("microwave fidelity {fidelity} is not a probability")));
    }
    check_selection_rule(source, dest)?;
    let mut s = site.clone();
    if s.bin == StateBin::Qubit && source.is_qubit_state() {
        s.project_qubit(rng.random());
    }
    if s.bin == source && rng.random::<f64>() < fidelity {
        s.jump(dest);
    }
    Ok(s)
}

/// A Raman pulse: leakage and phase kicks from off-resonant scattering, the
/// ideal rotation otherwise. Light resonant with the detection manifold heats
/// those molecules out of the trap.
pub fn raman_pulse<R: Rng + ?Sized>(
    site: &SiteState,
    scheme: &RamanScheme,
    angle: f64,
    axis_phase: f64,
    params: &PhysicsParams,
    rng: &mut R,
) -> SiteState {
    let mut s = site.clone();
    if s.bin.in_cycling_manifold() {
        if scheme.resonant_with_f {
            s.jump(StateBin::Empty);
        }
        return s;
    }
    if !s.bin.is_qubit_state() {
        return s;
    }
    let pis = angle.abs() / PI;
    let p_leak = (pis / scheme.q_pi).min(1.0);
    if rng.random::<f64>() < p_leak {
        s.project_qubit(rng.random());
        let to = leak_destination(s.bin, params, rng);
        s.jump(to);
        return s;
    }
    let mut out = apply_rotation(&s, axis_phase, angle);
    if rng.random::<f64>() < (pis * scheme.pure_dephasing_per_pi).min(1.0) {
        let kick = rng.random::<f64>() * 2.0 * PI;
        if let Some(b) = out.bloch {
            out.bloch = Some(b.precess(kick));
        }
    }
    out
}

/// Change the tweezer depth. Each ramp costs half the calibrated pair loss.
pub fn ramp_depth<R: Rng + ?Sized>(
    site: &SiteState,
    to_depth: f64,
    params: &PhysicsParams,
    rng: &mut R,
) -> Result<SiteState> {
    if !(to_depth > 0.0) {
        return Err(Error::Argument(format!("ramp target depth {to_depth} must be positive")));
    }
    let mut s = site.clone();
    s.depth = to_depth;
    if s.bin.is_occupied() && rng.random::<f64>() < params.trap.loss_ramp_pair / 2.0 {
        s.jump(StateBin::Empty);
    }
    Ok(s)
}

/// One pass of v=1 repump light: `V1_N1` returns to the detection manifold or
/// is lost to unrecoverable states.
pub fn convert_erasures<R: Rng + ?Sized>(site: &SiteState, params: &PhysicsParams, rng: &mut R) -> SiteState {
    let mut s = site.clone();
    if s.bin == StateBin::V1N1 {
        let bb = &params.blackbody;
        let to =
            if rng.random::<f64>() < bb.eta_convert * bb.branch_repump_to_f { StateBin::FRest } else { StateBin::Sink };
        s.jump(to);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::state::Bloch;

    fn fraction(n: u64, mut f: impl FnMut(u64) -> bool) -> f64 {
        (0..n).filter(|&k| f(k)).count() as f64 / n as f64
    }

    #[test]
    fn pump_fidelity_curve() {
        let pump = PumpParams { f_inf: 0.96, tau_op: 1e-3 };
        assert!((pump_fidelity(0.0, &pump) - 1.0 / 12.0).abs() < 1e-15);
        assert!((pump_fidelity(1.0, &pump) - 0.96).abs() < 1e-12);
        let at_tau = 1.0 / 12.0 + (0.96 - 1.0 / 12.0) * (1.0 - (-1.0f64).exp());
        assert!((pump_fidelity(1e-3, &pump) - at_tau).abs() < 1e-12);
        assert!((at_tau - 0.637).abs() < 1e-3);
        let t = pump_duration_for(0.46, &pump).unwrap();
        assert!((pump_fidelity(t, &pump) - 0.46).abs() < 1e-12);
        assert!(pump_duration_for(0.99, &pump).is_none());
    }

    #[test]
    fn pump_ignores_dark_states() {
        let pump = PumpParams { f_inf: 0.96, tau_op: 1e-3 };
        let s = SiteState::new(StateBin::MMinus, 39.0);
        assert_eq!(optical_pump(&s, 1.0, &pump, &mut stream(1, 0, 0, 0)), s);
    }

    #[test]
    fn microwave_examples() {
        let s = SiteState::new(StateBin::DPrime, 39.0);
        let out = microwave_transfer(&s, 1.0, StateBin::DPrime, StateBin::MMinus, &mut stream(1, 0, 0, 0)).unwrap();
        assert_eq!(out.bin, StateBin::MMinus);
        let s = SiteState::new(StateBin::FRest, 39.0);
        let out = microwave_transfer(&s, 1.0, StateBin::DPrime, StateBin::MMinus, &mut stream(1, 0, 0, 0)).unwrap();
        assert_eq!(out.bin, StateBin::FRest);
        let n = 100_000;
        let moved = fraction(n, |k| {
            let s = SiteState::new(StateBin::DPrime, 39.0);
            microwave_transfer(&s, 0.99, StateBin::DPrime, StateBin::MMinus, &mut stream(2, k, 0, 0)).unwrap().bin
                == StateBin::MMinus
        });
        assert!((moved - 0.99).abs() < 3.0 * (0.99 * 0.01 / n as f64).sqrt());
    }

    #[test]
    fn microwave_guard() {
        let s = SiteState::new(StateBin::QDown, 39.0);
        let mut rng = stream(1, 0, 0, 0);
        assert!(matches!(
            microwave_transfer(&s, 1.0, StateBin::QDown, StateBin::MMinus, &mut rng),
            Err(Error::SelectionRule { .. })
        ));
        assert!(microwave_transfer(&s, 1.0, StateBin::QDown, StateBin::N2, &mut rng).is_err());
        assert!(microwave_transfer(&s, 1.0, StateBin::QDown, StateBin::QDown, &mut rng).is_err());
        assert!(microwave_transfer(&s, 1.0, StateBin::QDown, StateBin::Up, &mut rng).is_ok());
    }

    #[test]
    fn raman_leak_and_identity() {
        let p = PhysicsParams::default();
        let xb = &p.raman.xb;
        let n = 200_000;
        let leaked = fraction(n, |k| {
            let s = SiteState::new(StateBin::QDown, 39.0);
            !raman_pulse(&s, xb, PI, 0.0, &p, &mut stream(3, k, 0, 0)).bin.is_qubit_state()
        });
        let expect = 1.0 / 37.0;
        assert!((leaked - expect).abs() < 4.0 * (expect / n as f64).sqrt(), "{leaked}");
        assert!((1.0 / p.raman.xa_current.q_pi - 3.4e-3).abs() < 1e-12);
        let s = SiteState::qubit(Bloch::new([0.2, 0.3, 0.9]), 39.0);
        let out = raman_pulse(&s, xb, 0.0, 1.0, &p, &mut stream(1, 0, 0, 0));
        assert_eq!(out, s);
    }

    #[test]
    fn resonant_raman_heats_detect_states() {
        let p = PhysicsParams::default();
        let s = SiteState::new(StateBin::FRest, 39.0);
        let out = raman_pulse(&s, &p.raman.xa_current, PI, 0.0, &p, &mut stream(1, 0, 0, 0));
        assert_eq!(out.bin, StateBin::Empty);
        let out = raman_pulse(&s, &p.raman.xb, PI, 0.0, &p, &mut stream(1, 0, 0, 0));
        assert_eq!(out.bin, StateBin::FRest);
    }

    #[test]
    fn ramp_pair_loss() {
        let p = PhysicsParams::default();
        let n = 100_000;
        let lost = fraction(n, |k| {
            let mut rng = stream(4, k, 0, 0);
            let s = SiteState::new(StateBin::QDown, p.trap.depth_hf);
            let s = ramp_depth(&s, p.trap.depth_ed, &p, &mut rng).unwrap();
            ramp_depth(&s, p.trap.depth_hf, &p, &mut rng).unwrap().bin == StateBin::Empty
        });
        assert!((lost - 2.6e-3).abs() < 0.3e-3, "{lost}");
        let s = SiteState::new(StateBin::QDown, 39.0);
        assert!(ramp_depth(&s, 0.0, &p, &mut stream(1, 0, 0, 0)).is_err());
    }

    #[test]
    fn conversion() {
        let p = PhysicsParams::default();
        let n = 100_000;
        let to_f = fraction(n, |k| {
            let s = SiteState::new(StateBin::V1N1, 39.0);
            convert_erasures(&s, &p, &mut stream(6, k, 0, 0)).bin == StateBin::FRest
        });
        assert!((to_f - 0.882).abs() < 4.0 * (0.882 * 0.118 / n as f64).sqrt());
        for bin in [StateBin::Qubit, StateBin::Sink, StateBin::QZero] {
            let s = SiteState::new(bin, 39.0);
            assert_eq!(convert_erasures(&s, &p, &mut stream(1, 0, 0, 0)), s);
        }
    }
}
