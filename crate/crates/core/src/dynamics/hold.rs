//! Trajectory sampling of a hold: exact exponential jumps on the rate chain,
//! gridded phase accrual, and periodic erasure conversion.

use rand::Rng;
use rand_distr::Exp1;

use super::noise::{ou_phase_increment, OuNoiseState};
use super::rates::{Node, RateMatrix};
use crate::error::{Error, Result};
use crate::instruments::convert_erasures;
use crate::params::PhysicsParams;
use crate::state::{SiteState, StateBin};

/// Precomputed hold model for one parameter table.
#[derive(Debug, Clone)]
pub struct HoldModel<'a> {
    params: &'a PhysicsParams,
    chain: RateMatrix,
    max_dt: f64,
}

enum Event {
    Jump,
    Repump,
    End,
}

impl<'a> HoldModel<'a> {
    pub fn new(params: &'a PhysicsParams) -> Self {
        let max_dt = (1e-3f64).min(params.dephasing.tau_ou / 10.0);
        HoldModel { params, chain: RateMatrix::from_params(params), max_dt }
    }

    pub fn chain(&self) -> &RateMatrix {
        &self.chain
    }

    /// Hold the site for `duration`, converting erasures whenever the site
    /// clock crosses a multiple of `repump_period`.
    pub fn evolve<R: Rng + ?Sized>(
        &self,
        site: &SiteState,
        duration: f64,
        repump_period: Option<f64>,
        rng: &mut R,
    ) -> Result<SiteState> {
        if !(duration >= 0.0) {
            return Err(Error::Argument(format!("hold duration {duration} is negative")));
        }
        if let Some(p) = repump_period {
            if !(p > 0.0) {
                return Err(Error::Argument("repump period must be positive".into()));
            }
        }
        let mut s = site.clone();
        let mut remaining = duration;
        while remaining > 0.0 {
            let node = node_of(&s);
            let total = self.chain.total_rate(node);
            let wait = if total > 0.0 { rng.sample::<f64, _>(Exp1) / total } else { f64::INFINITY };
            let tick = repump_period.map_or(f64::INFINITY, |p| next_tick(s.clock, p));
            let (seg, event) = if wait < tick.min(remaining) {
                (wait, Event::Jump)
            } else if tick <= remaining {
                (tick, Event::Repump)
            } else {
                (remaining, Event::End)
            };
            self.accrue(&mut s, seg, rng);
            remaining -= seg;
            match event {
                Event::Jump => self.jump(&mut s, node, total, rng),
                Event::Repump => s = convert_erasures(&s, self.params, rng),
                Event::End => break,
            }
        }
        Ok(s)
    }

    fn jump<R: Rng + ?Sized>(&self, s: &mut SiteState, node: Node, total: f64, rng: &mut R) {
        let edges = self.chain.edges(node);
        let mut u = rng.random::<f64>() * total;
        let edge = edges
            .iter()
            .find(|e| {
                u -= e.rate;
                u < 0.0
            })
            .unwrap_or_else(|| edges.last().expect("jump without edges"));
        match edge.to {
            Node::V1From(origin) => {
                let origin = if origin == StateBin::Qubit {
                    s.project_qubit(rng.random());
                    s.bin
                } else {
                    origin
                };
                s.jump(StateBin::V1N1);
                s.origin = Some(origin);
            }
            Node::Bin(b) => s.jump(b),
        }
    }

    /// Advance clock, OU noise, and (inside the qubit) the Bloch phase.
    fn accrue<R: Rng + ?Sized>(&self, s: &mut SiteState, seg: f64, rng: &mut R) {
        if seg <= 0.0 {
            return;
        }
        s.clock += seg;
        let d = &self.params.dephasing;
        let mut noise = OuNoiseState { current_detune: s.ou_detune, tau_ou: d.tau_ou, sigma_ou: d.sigma_ou };
        if s.bin != StateBin::Qubit {
            if d.sigma_ou > 0.0 {
                s.ou_detune = noise.advance(seg, rng).current_detune;
            }
            return;
        }
        let steady = s.static_detune + light_shift(s, self.params);
        let mut phase = steady * seg;
        if d.sigma_ou > 0.0 {
            let n = (seg / self.max_dt).ceil().max(1.0) as usize;
            let h = seg / n as f64;
            for _ in 0..n {
                let (dphi, next) = ou_phase_increment(&noise, h, rng);
                phase += dphi;
                noise = next;
            }
            s.ou_detune = noise.current_detune;
        }
        s.phase_accum += phase;
        if let Some(b) = s.bloch {
            s.bloch = Some(b.precess(phase));
        }
    }
}

/// Chain node holding the site.
pub fn node_of(s: &SiteState) -> Node {
    match s.bin {
        StateBin::V1N1 => Node::V1From(s.origin.unwrap_or(StateBin::QDown)),
        b => Node::Bin(b),
    }
}

/// Time from `clock` to the next repump, strictly in the future.
fn next_tick(clock: f64, period: f64) -> f64 {
    let k = ((clock + 1e-12) / period).floor() + 1.0;
    k * period - clock
}

/// Trap light shift of the qubit frequency relative to the shallow-trap mean.
pub fn light_shift(s: &SiteState, p: &PhysicsParams) -> f64 {
    let t = &p.trap;
    t.qubit_shift_deep * ((s.depth / t.depth_ed) * (1.0 + s.depth_error) - t.depth_hf / t.depth_ed)
}

/// Convenience wrapper that builds the model for a single call.
pub fn evolve_hold<R: Rng + ?Sized>(
    site: &SiteState,
    duration: f64,
    params: &PhysicsParams,
    repump_period: Option<f64>,
    rng: &mut R,
) -> Result<SiteState> {
    HoldModel::new(params).evolve(site, duration, repump_period, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::state::Bloch;

    fn quiet() -> PhysicsParams {
        let mut p = PhysicsParams::default();
        let bb = &mut p.blackbody;
        bb.gamma_01 = 0.0;
        bb.gamma_01_detect = 0.0;
        bb.gamma_10 = 0.0;
        bb.gamma_n3_loss = 0.0;
        p.vacuum.gamma_vac = 0.0;
        p.vacuum.gamma_detect_sink = 0.0;
        p
    }

    #[test]
    fn zero_duration_is_identity() {
        let p = PhysicsParams::default();
        let s = SiteState::qubit(Bloch::new([1.0, 0.0, 0.0]), p.trap.depth_hf);
        let out = evolve_hold(&s, 0.0, &p, None, &mut stream(1, 0, 0, 0)).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn negative_duration_is_rejected() {
        let p = PhysicsParams::default();
        let s = SiteState::new(StateBin::QDown, p.trap.depth_hf);
        assert!(evolve_hold(&s, -1.0, &p, None, &mut stream(1, 0, 0, 0)).is_err());
    }

    #[test]
    fn one_way_excitation_out_of_qubit() {
        let mut p = quiet();
        p.blackbody.gamma_01 = 0.3;
        let model = HoldModel::new(&p);
        let n = 100_000u64;
        let left = (0..n)
            .filter(|&k| {
                let s = SiteState::qubit(Bloch::new([0.0, 1.0, 0.0]), p.trap.depth_hf);
                let out = model.evolve(&s, 1.0, None, &mut stream(9, k, 0, 0)).unwrap();
                out.bin == StateBin::V1N1
            })
            .count() as f64
            / n as f64;
        let expect = 1.0 - (-0.3f64).exp();
        let sigma = (expect * (1.0 - expect) / n as f64).sqrt();
        assert!((left - expect).abs() < 4.0 * sigma, "{left} vs {expect}");
    }

    #[test]
    fn static_detuning_precesses_qubit() {
        let mut p = quiet();
        p.dephasing.sigma_ou = 0.0;
        let mut s = SiteState::qubit(Bloch::new([1.0, 0.0, 0.0]), p.trap.depth_hf);
        s.static_detune = 10.0;
        let out = evolve_hold(&s, 0.05, &p, None, &mut stream(1, 0, 0, 0)).unwrap();
        let b = out.bloch.unwrap();
        assert!((b.x() - 0.5f64.cos()).abs() < 1e-12 && (b.y() - 0.5f64.sin()).abs() < 1e-12);
        assert!((out.clock - 0.05).abs() < 1e-15);
    }

    #[test]
    fn repump_converts_inside_hold() {
        let mut p = quiet();
        p.blackbody.eta_convert = 1.0;
        p.blackbody.branch_repump_to_f = 1.0;
        let mut s = SiteState::new(StateBin::V1N1, p.trap.depth_hf);
        s.origin = Some(StateBin::QDown);
        let out = evolve_hold(&s, 0.06, &p, Some(0.05), &mut stream(1, 0, 0, 0)).unwrap();
        assert_eq!(out.bin, StateBin::FRest);
    }

    #[test]
    fn repump_cadence_spans_consecutive_holds() {
        let mut p = quiet();
        p.blackbody.eta_convert = 1.0;
        p.blackbody.branch_repump_to_f = 1.0;
        let mut s = SiteState::new(StateBin::V1N1, p.trap.depth_hf);
        s.clock = 0.03;
        let out = evolve_hold(&s, 0.03, &p, Some(0.05), &mut stream(1, 0, 0, 0)).unwrap();
        assert_eq!(out.bin, StateBin::FRest);
        let mut s = SiteState::new(StateBin::V1N1, p.trap.depth_hf);
        s.clock = 0.0;
        let out = evolve_hold(&s, 0.03, &p, Some(0.05), &mut stream(1, 0, 0, 0)).unwrap();
        assert_eq!(out.bin, StateBin::V1N1);
    }

    #[test]
    fn excitation_remembers_origin() {
        let mut p = quiet();
        p.blackbody.gamma_01 = 50.0;
        let s = SiteState::new(StateBin::QZero, p.trap.depth_hf);
        let out = evolve_hold(&s, 1.0, &p, None, &mut stream(1, 0, 0, 0)).unwrap();
        assert_eq!(out.bin, StateBin::V1N1);
        assert_eq!(out.origin, Some(StateBin::QZero));
    }

    #[test]
    fn deep_trap_shift_uses_depth_error() {
        let p = PhysicsParams::default();
        let mut s = SiteState::new(StateBin::QDown, p.trap.depth_ed);
        let base = p.trap.qubit_shift_deep * (1.0 - p.trap.depth_hf / p.trap.depth_ed);
        assert!((light_shift(&s, &p) - base).abs() < 1e-9);
        s.depth_error = 0.1;
        assert!((light_shift(&s, &p) - base - 0.1 * p.trap.qubit_shift_deep).abs() < 1e-9);
        s.depth = p.trap.depth_hf;
        s.depth_error = 0.0;
        assert!(light_shift(&s, &p).abs() < 1e-9);
    }
}
