//! Fluorescence imaging, threshold classification, and the modelled
//! classifier infidelities.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal as NormalDist, Poisson};
use statrs::distribution::{ContinuousCDF, Discrete, Normal, Poisson as PoissonPmf};

use crate::params::{ImageParams, PhysicsParams};
use crate::state::{SiteState, StateBin};

/// Photon tally of one exposure, possibly split into segments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Exposure {
    photons: u64,
    /// The molecule has gone dark for the rest of this exposure.
    dark: bool,
}

impl Exposure {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn photons(&self) -> u64 {
        self.photons
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Per-image hazards (in units of one full exposure) for a bright molecule.
fn hazards(image: &ImageParams) -> (f64, f64) {
    (-(-image.dropout_prob).ln_1p(), -(-image.loss_prob).ln_1p())
}

/// Leakage destination for a dark N=0 molecule scattering imaging or Raman
/// light. Qubit states land in M±; an M± molecule lands in one of the other
/// three N=0 sublevels.
pub(crate) fn leak_destination<R: Rng + ?Sized>(from: StateBin, params: &PhysicsParams, rng: &mut R) -> StateBin {
    if rng.random::<f64>() < params.imaging.leak_to_n2_fraction {
        return StateBin::N2;
    }
    let others = match from {
        StateBin::MMinus => [StateBin::MPlus, StateBin::QDown, StateBin::QZero],
        StateBin::MPlus => [StateBin::MMinus, StateBin::QDown, StateBin::QZero],
        _ => return if rng.random::<bool>() { StateBin::MPlus } else { StateBin::MMinus },
    };
    others[rng.random_range(0..3)]
}

/// Expose the site for `fraction` of a full image. Exposure time itself is
/// not evolved here; callers that need hold dynamics run them alongside.
pub fn expose<R: Rng + ?Sized>(
    site: &SiteState,
    exposure: &mut Exposure,
    fraction: f64,
    image: &ImageParams,
    params: &PhysicsParams,
    rng: &mut R,
) -> SiteState {
    let mut s = site.clone();
    if s.bin == StateBin::N3 {
        // The rotational repump runs with the imaging light.
        s.jump(StateBin::FRest);
    }
    exposure.photons += poisson(image.mean_background_counts * fraction, rng);
    match s.bin {
        b if b.in_cycling_manifold() => {
            if exposure.dark {
                return s;
            }
            let (h_drop, h_loss) = hazards(image);
            let h = h_drop + h_loss;
            let depart = if h > 0.0 { rng.sample::<f64, _>(Exp1) / h } else { f64::INFINITY };
            let bright = depart.min(fraction);
            exposure.photons += poisson(image.mean_signal_counts * bright, rng);
            if depart < fraction {
                if rng.random::<f64>() * h < h_loss {
                    s.jump(StateBin::Empty);
                } else {
                    exposure.dark = true;
                }
            }
        }
        b if b.in_ground_rotational() => {
            let per_image = if b.is_qubit_state() {
                params.imaging.loss_qubit_light_per_image
            } else {
                params.imaging.loss_target_per_image
            };
            let p = -(fraction * (-per_image).ln_1p()).exp_m1();
            if rng.random::<f64>() < p {
                s.project_qubit(rng.random());
                let to = leak_destination(s.bin, params, rng);
                s.jump(to);
            }
        }
        _ => {}
    }
    s
}

/// Camera readout: photon count plus Gaussian read noise.
pub fn readout<R: Rng + ?Sized>(exposure: &Exposure, image: &ImageParams, rng: &mut R) -> f64 {
    let noise = if image.camera_noise_sigma > 0.0 {
        NormalDist::new(0.0, image.camera_noise_sigma).expect("finite sigma").sample(rng)
    } else {
        0.0
    };
    exposure.photons as f64 + noise
}

/// One complete image: returns the camera count and the updated site.
pub fn fluorescence_image<R: Rng + ?Sized>(
    site: &SiteState,
    image: &ImageParams,
    params: &PhysicsParams,
    rng: &mut R,
) -> (f64, SiteState) {
    let mut exposure = Exposure::new();
    let s = expose(site, &mut exposure, 1.0, image, params, rng);
    (readout(&exposure, image, rng), s)
}

/// The flag bit: bright iff the count exceeds the threshold.
pub fn classify(count: f64, threshold: f64) -> bool {
    count > threshold
}

fn tail_above(mean: f64, sigma: f64, threshold: f64) -> f64 {
    // P(Pois(mean) + N(0, σ) > θ).
    if mean <= 0.0 {
        return above(0.0, sigma, threshold);
    }
    let pois = PoissonPmf::new(mean).expect("positive mean");
    let kmax = (mean + 12.0 * mean.sqrt() + 30.0 + threshold.max(0.0)) as u64;
    (0..=kmax).map(|k| pois.pmf(k) * above(k as f64, sigma, threshold)).sum()
}

fn above(k: f64, sigma: f64, threshold: f64) -> f64 {
    if sigma > 0.0 {
        1.0 - Normal::new(0.0, sigma).expect("positive sigma").cdf(threshold - k)
    } else if k > threshold {
        1.0
    } else {
        0.0
    }
}

/// Modelled false-positive probability ε₀₁(θ): a dark site reads bright.
pub fn eps01(threshold: f64, image: &ImageParams) -> f64 {
    tail_above(image.mean_background_counts, image.camera_noise_sigma, threshold)
}

/// Modelled false-negative probability ε₁₀(θ): a molecule in the detection
/// manifold at the start of the image reads dark, including molecules that
/// go dark or are lost part-way through.
pub fn eps10(threshold: f64, image: &ImageParams) -> f64 {
    let (h_drop, h_loss) = hazards(image);
    let h = h_drop + h_loss;
    let bg = image.mean_background_counts;
    let s = image.mean_signal_counts;
    let below = |bright: f64| 1.0 - tail_above(bg + s * bright, image.camera_noise_sigma, threshold);
    let survive = (-h).exp();
    if h == 0.0 {
        return below(1.0);
    }
    // Composite Simpson over the departure time in [0, 1].
    let n = 400;
    let step = 1.0 / n as f64;
    let integral: f64 = (0..=n)
        .map(|i| {
            let t = i as f64 * step;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h * (-h * t).exp() * below(t)
        })
        .sum::<f64>()
        * step
        / 3.0;
    survive * below(1.0) + integral
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn classify_examples() {
        assert!(classify(20.0, 4.8));
        assert!(!classify(0.0, 4.8));
        assert!(!classify(4.8, 4.8));
    }

    #[test]
    fn dark_tail_is_poisson_without_read_noise() {
        let mut img = PhysicsParams::default().images.error;
        img.camera_noise_sigma = 0.0;
        let pois = PoissonPmf::new(0.5).unwrap();
        let expect = 1.0 - (0..=4).map(|k| pois.pmf(k)).sum::<f64>();
        assert!((eps01(4.8, &img) - expect).abs() < 1e-12);
        assert!((expect - 1.7e-4).abs() < 0.1e-4);
    }

    #[test]
    fn bright_tail_without_dynamics() {
        let mut img = PhysicsParams::default().images.error;
        img.camera_noise_sigma = 0.0;
        img.dropout_prob = 0.0;
        img.loss_prob = 0.0;
        img.mean_background_counts = 0.0;
        let pois = PoissonPmf::new(20.0).unwrap();
        let expect: f64 = (0..=4).map(|k| pois.pmf(k)).sum();
        assert!((eps10(4.8, &img) - expect).abs() < 1e-12);
    }

    #[test]
    fn calibrated_operating_point() {
        let img = PhysicsParams::default().images.error;
        let e10 = eps10(img.threshold, &img);
        assert!((e10 - 0.033).abs() < 5e-4, "eps10 = {e10}");
    }

    #[test]
    fn model_curves_are_monotone() {
        let img = PhysicsParams::default().images.error;
        let grid: Vec<f64> = (0..=30).map(|i| i as f64 * 0.5).collect();
        for w in grid.windows(2) {
            assert!(eps01(w[1], &img) <= eps01(w[0], &img) + 1e-15);
            assert!(eps10(w[1], &img) >= eps10(w[0], &img) - 1e-15);
        }
    }

    #[test]
    fn sampled_false_negative_matches_model() {
        let p = PhysicsParams::default();
        let img = &p.images.error;
        let n = 100_000u64;
        let misses = (0..n)
            .filter(|&k| {
                let s = SiteState::new(StateBin::FRest, p.trap.depth_ed);
                let (c, _) = fluorescence_image(&s, img, &p, &mut stream(5, k, 0, 0));
                !classify(c, img.threshold)
            })
            .count() as f64
            / n as f64;
        let model = eps10(img.threshold, img);
        let sigma = (model * (1.0 - model) / n as f64).sqrt();
        assert!((misses - model).abs() < 4.0 * sigma, "{misses} vs {model}");
    }

    #[test]
    fn n3_is_repumped_and_v1_stays_dark() {
        let p = PhysicsParams::default();
        let s = SiteState::new(StateBin::N3, p.trap.depth_ed);
        let (_, out) = fluorescence_image(&s, &p.images.error, &p, &mut stream(1, 0, 0, 0));
        assert!(out.bin.in_cycling_manifold() || out.bin == StateBin::Empty);
        let s = SiteState::new(StateBin::V1N1, p.trap.depth_ed);
        let (_, out) = fluorescence_image(&s, &p.images.error, &p, &mut stream(1, 0, 0, 0));
        assert_eq!(out.bin, StateBin::V1N1);
    }
}
