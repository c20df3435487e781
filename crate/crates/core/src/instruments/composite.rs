//! Composite erasure detection: ramp up, half image, echo π pulse, half
//! image, ramp down.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::imaging::{classify, expose, readout, Exposure};
use super::ops::{raman_pulse, ramp_depth};
use crate::dynamics::HoldModel;
use crate::error::{Error, Result};
use crate::params::{ImageParams, PhysicsParams, RamanScheme};
use crate::rng::stream;
use crate::state::SiteState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CompositeMode {
    /// The full detection sequence.
    #[default]
    Full,
    /// Ramps and the echo pulse, without imaging light or exposure time.
    NoImage,
    /// The echo pulse alone.
    PiOnly,
}

impl CompositeMode {
    pub fn name(self) -> &'static str {
        match self {
            CompositeMode::Full => "full",
            CompositeMode::NoImage => "no-image",
            CompositeMode::PiOnly => "pi-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Some(CompositeMode::Full),
            "no-image" | "noimage" => Some(CompositeMode::NoImage),
            "pi-only" | "pionly" => Some(CompositeMode::PiOnly),
            _ => None,
        }
    }

    pub fn images(self) -> bool {
        self == CompositeMode::Full
    }
}

/// Imaging light would be resonant with a scheme that heats ℱ.
pub fn check_composite(scheme: &RamanScheme, mode: CompositeMode) -> Result<()> {
    if scheme.resonant_with_f && mode.images() {
        return Err(Error::Precondition(format!(
            "Raman scheme {} is resonant with the detection manifold and cannot be combined with an erasure image",
            scheme.kind.name()
        )));
    }
    Ok(())
}

/// Composite detection on one site. Returns the flag (absent without an
/// image) and the updated site.
pub fn composite_detect_site<R: Rng + ?Sized>(
    site: &SiteState,
    scheme: &RamanScheme,
    image: &ImageParams,
    mode: CompositeMode,
    hold: &HoldModel<'_>,
    params: &PhysicsParams,
    rng: &mut R,
) -> Result<(Option<bool>, SiteState)> {
    check_composite(scheme, mode)?;
    if mode == CompositeMode::PiOnly {
        return Ok((None, raman_pulse(site, scheme, PI, 0.0, params, rng)));
    }
    let mut s = ramp_depth(site, params.trap.depth_ed, params, rng)?;
    let mut flag = None;
    if mode.images() {
        let mut exposure = Exposure::new();
        for half in 0..2 {
            s = expose(&s, &mut exposure, 0.5, image, params, rng);
            s = hold.evolve(&s, image.duration / 2.0, None, rng)?;
            if half == 0 {
                s = raman_pulse(&s, scheme, PI, 0.0, params, rng);
            }
        }
        flag = Some(classify(readout(&exposure, image, rng), image.threshold));
    } else {
        s = raman_pulse(&s, scheme, PI, 0.0, params, rng);
    }
    let s = ramp_depth(&s, params.trap.depth_hf, params, rng)?;
    Ok((flag, s))
}

/// Address of the random stream used for an array-level step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepKey {
    pub master_seed: u64,
    pub trial: u64,
    pub step: u64,
}

/// Composite detection across an array. Each site draws from its own
/// `(seed, trial, site, step)` stream, so the result does not depend on
/// whether sites run in parallel.
pub fn composite_erasure_detect(
    array: &[SiteState],
    scheme: &RamanScheme,
    image: &ImageParams,
    mode: CompositeMode,
    params: &PhysicsParams,
    key: StepKey,
) -> Result<(Vec<Option<bool>>, Vec<SiteState>)> {
    check_composite(scheme, mode)?;
    let hold = HoldModel::new(params);
    let out: Result<Vec<_>> = array
        .par_iter()
        .enumerate()
        .map(|(i, site)| {
            let mut rng = stream(key.master_seed, key.trial, i as u64, key.step);
            composite_detect_site(site, scheme, image, mode, &hold, params, &mut rng)
        })
        .collect();
    Ok(out?.into_iter().unzip())
}

/// Ramp every site of an array.
pub fn ramp_array(array: &[SiteState], to_depth: f64, params: &PhysicsParams, key: StepKey) -> Result<Vec<SiteState>> {
    array
        .par_iter()
        .enumerate()
        .map(|(i, site)| {
            let mut rng = stream(key.master_seed, key.trial, i as u64, key.step);
            ramp_depth(site, to_depth, params, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{apply_rotation, Bloch, StateBin};

    fn key() -> StepKey {
        StepKey { master_seed: 11, trial: 3, step: 4 }
    }

    #[test]
    fn resonant_scheme_is_refused() {
        let p = PhysicsParams::default();
        let sites = vec![SiteState::new(StateBin::QDown, 39.0)];
        let err =
            composite_erasure_detect(&sites, &p.raman.xa_current, &p.images.error, CompositeMode::Full, &p, key());
        assert!(matches!(err, Err(Error::Precondition(_))));
        assert!(composite_erasure_detect(
            &sites,
            &p.raman.xa_current,
            &p.images.error,
            CompositeMode::NoImage,
            &p,
            key()
        )
        .is_ok());
    }

    #[test]
    fn parallel_equals_serial() {
        let p = PhysicsParams::default();
        let sites: Vec<SiteState> = (0..10)
            .map(|i| {
                let mut s = SiteState::qubit(Bloch::new([1.0, 0.0, 0.0]), p.trap.depth_hf);
                s.depth_error = 0.01 * i as f64;
                s
            })
            .collect();
        let (flags, out) =
            composite_erasure_detect(&sites, &p.raman.xb, &p.images.error, CompositeMode::Full, &p, key()).unwrap();
        let hold = HoldModel::new(&p);
        for (i, site) in sites.iter().enumerate() {
            let mut rng = stream(11, 3, i as u64, 4);
            let (f, s) =
                composite_detect_site(site, &p.raman.xb, &p.images.error, CompositeMode::Full, &hold, &p, &mut rng)
                    .unwrap();
            assert_eq!(f, flags[i]);
            assert_eq!(s, out[i]);
        }
    }

    /// With pulse errors and decay switched off, the mid-image π pulse echoes
    /// out the per-site deep-trap shift.
    #[test]
    fn echo_cancels_inhomogeneous_light_shift() {
        let mut p = PhysicsParams::default();
        p.raman.xb.q_pi = f64::INFINITY;
        p.raman.xb.pure_dephasing_per_pi = 0.0;
        p.trap.loss_ramp_pair = 0.0;
        p.imaging.loss_qubit_light_per_image = 0.0;
        p.blackbody.gamma_01 = 0.0;
        p.vacuum.gamma_vac = 0.0;
        p.dephasing.sigma_ou = 0.0;
        let hold = HoldModel::new(&p);
        let mut total = 0.0;
        let n = 200;
        for k in 0..n {
            let mut rng = stream(12, k, 0, 0);
            let mut s = apply_rotation(&SiteState::new(StateBin::QDown, p.trap.depth_hf), 0.0, PI / 2.0);
            s.depth_error = rng.random_range(-0.1..0.1);
            s.static_detune = rng.random_range(-70.0..70.0);
            let before = s.bloch.unwrap();
            let (_, out) =
                composite_detect_site(&s, &p.raman.xb, &p.images.error, CompositeMode::Full, &hold, &p, &mut rng)
                    .unwrap();
            // An ideal π about x maps (x, y, z) to (x, -y, -z).
            let b = out.bloch.unwrap();
            total += before.x() * b.x() - before.y() * b.y() - before.z() * b.z();
        }
        assert!(total / n as f64 >= 0.999, "overlap {}", total / n as f64);
    }
}
