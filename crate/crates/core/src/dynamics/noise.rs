//! Two-component qubit frequency noise: a static Gaussian detuning per shot
//! plus an Ornstein-Uhlenbeck process.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuNoiseState {
    /// rad/s.
    pub current_detune: f64,
    /// s.
    pub tau_ou: f64,
    /// Stationary standard deviation, rad/s.
    pub sigma_ou: f64,
}

impl OuNoiseState {
    /// Draw the detuning from the stationary distribution.
    pub fn stationary<R: Rng + ?Sized>(tau_ou: f64, sigma_ou: f64, rng: &mut R) -> Self {
        let z: f64 = rng.sample(StandardNormal);
        OuNoiseState { current_detune: sigma_ou * z, tau_ou, sigma_ou }
    }

    /// Exact update over `dt`, without the phase.
    pub fn advance<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Self {
        if self.sigma_ou == 0.0 {
            return OuNoiseState { current_detune: 0.0, ..*self };
        }
        let decay = (-dt / self.tau_ou).exp();
        let z: f64 = rng.sample(StandardNormal);
        let kick = self.sigma_ou * (1.0 - decay * decay).max(0.0).sqrt() * z;
        OuNoiseState { current_detune: self.current_detune * decay + kick, ..*self }
    }
}

/// Advance the OU detuning by `dt` and return the phase accrued meanwhile,
/// taken at the midpoint detuning.
pub fn ou_phase_increment<R: Rng + ?Sized>(noise: &OuNoiseState, dt: f64, rng: &mut R) -> (f64, OuNoiseState) {
    let next = noise.advance(dt, rng);
    let phase = 0.5 * (noise.current_detune + next.current_detune) * dt;
    (phase, next)
}

/// A piecewise-constant sign filter: segment durations with the sign of the
/// accumulated phase in each (flipped by every π pulse).
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    segments: Vec<(f64, f64)>,
}

impl Filter {
    pub fn new(segments: Vec<(f64, f64)>) -> Self {
        Filter { segments }
    }

    /// Free induction over `t`.
    pub fn ramsey(t: f64) -> Self {
        Filter::new(vec![(t, 1.0)])
    }

    /// A single π pulse at `t / 2`.
    pub fn echo(t: f64) -> Self {
        Filter::new(vec![(t / 2.0, 1.0), (t / 2.0, -1.0)])
    }

    /// `n` equally spaced π pulses with spacing `tau` (first and last
    /// half-gaps `tau / 2`), as in CPMG and XY-family sequences.
    pub fn equally_spaced(n: usize, tau: f64) -> Self {
        if n == 0 {
            return Filter::ramsey(tau);
        }
        let mut segs = vec![(tau / 2.0, 1.0)];
        let mut sign = -1.0;
        for _ in 1..n {
            segs.push((tau, sign));
            sign = -sign;
        }
        segs.push((tau / 2.0, sign));
        Filter::new(segs)
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.0).sum()
    }

    /// Variance of the accumulated phase under static noise of std `sigma`.
    pub fn static_variance(&self, sigma: f64) -> f64 {
        let net: f64 = self.segments.iter().map(|(l, s)| l * s).sum();
        sigma * sigma * net * net
    }

    /// Variance of the accumulated phase under stationary OU noise.
    pub fn ou_variance(&self, sigma: f64, tau: f64) -> f64 {
        let mut starts = Vec::with_capacity(self.segments.len());
        let mut t = 0.0;
        for (l, _) in &self.segments {
            starts.push(t);
            t += l;
        }
        let mut total = 0.0;
        for (j, &(lj, sj)) in self.segments.iter().enumerate() {
            let ej = -(-lj / tau).exp_m1();
            total += sj * sj * 2.0 * tau * (lj - tau * ej);
            for (k, &(lk, sk)) in self.segments.iter().enumerate().skip(j + 1) {
                let ek = -(-lk / tau).exp_m1();
                let gap = starts[k] - (starts[j] + lj);
                total += 2.0 * sj * sk * tau * tau * ej * ek * (-gap / tau).exp();
            }
        }
        sigma * sigma * total
    }

    /// Expected coherence `⟨cos φ⟩` for Gaussian phase noise.
    pub fn coherence(&self, sigma_static: f64, sigma_ou: f64, tau_ou: f64) -> f64 {
        let var = self.static_variance(sigma_static) + self.ou_variance(sigma_ou, tau_ou);
        (-0.5 * var).exp()
    }
}
