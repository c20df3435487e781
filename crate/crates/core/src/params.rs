//! Calibrated rate table and instrument presets.
//!
//! Every field is overridable by dotted key (`blackbody.gamma_01=0.25`), which
//! is how the CLI and sweeps address parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsParams {
    pub optics: Optics,
    pub imaging: ImagingLeakage,
    pub images: ImagePresets,
    pub trap: Trap,
    pub blackbody: Blackbody,
    pub vacuum: Vacuum,
    pub dephasing: Dephasing,
    pub pump: PumpParams,
    pub raman: RamanPresets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Optics {
    /// Imaging transition linewidth, rad/s.
    pub gamma_opt: f64,
    /// Optical separation of the detection and target manifolds, rad/s.
    pub delta_ft: f64,
}

/// Leakage of dark N=0 molecules caused by imaging light.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingLeakage {
    /// Per-image loss of `M_MINUS`/`M_PLUS` under back-to-back imaging.
    pub loss_target_per_image: f64,
    /// Per-image leakage of the qubit states due to detection light.
    pub loss_qubit_light_per_image: f64,
    /// Share of light-induced leakage that lands in N=2 rather than m_F=±1.
    /// Uncalibrated.
    pub leak_to_n2_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagePresets {
    pub nondestructive: ImageParams,
    pub error: ImageParams,
    pub destructive: ImageParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageParams {
    /// Exposure, s.
    pub duration: f64,
    /// Mean detected photons from a bright molecule over the full exposure.
    pub mean_signal_counts: f64,
    pub mean_background_counts: f64,
    /// Gaussian read noise, counts.
    pub camera_noise_sigma: f64,
    /// Classification threshold θ_E, counts.
    pub threshold: f64,
    /// Probability a bright molecule goes dark for the rest of the exposure.
    pub dropout_prob: f64,
    /// Probability a bright molecule is heated out of the trap.
    pub loss_prob: f64,
}

impl ImageParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) {
            return Err(Error::Argument("image duration must be positive".into()));
        }
        if self.mean_signal_counts < 0.0 || self.mean_background_counts < 0.0 {
            return Err(Error::Argument("mean counts must be non-negative".into()));
        }
        if self.camera_noise_sigma < 0.0 || self.threshold < 0.0 {
            return Err(Error::Argument("noise and threshold must be non-negative".into()));
        }
        check_prob("dropout_prob", self.dropout_prob)?;
        check_prob("loss_prob", self.loss_prob)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trap {
    /// Depth used for coherent operations, µK.
    pub depth_hf: f64,
    /// Depth used for error detection, µK.
    pub depth_ed: f64,
    /// Differential qubit light shift at `depth_ed`, rad/s.
    pub qubit_shift_deep: f64,
    /// Half-width of the uniform site-to-site depth error.
    pub depth_inhomogeneity: f64,
    /// Population loss for an up + down ramp pair.
    pub loss_ramp_pair: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Blackbody {
    /// v=0 → v=1 excitation out of N=0, 1/s.
    pub gamma_01: f64,
    /// v=0 → v=1 excitation out of the detection manifold, 1/s.
    pub gamma_01_detect: f64,
    /// v=1 → v=0 spontaneous decay, 1/s.
    pub gamma_10: f64,
    /// Share of `V1_N1` decays that return to the originating N=0 state.
    pub v1_return_fraction: f64,
    /// Of the remaining `V1_N1` decays, share that lands in N=3 (rest N=2).
    pub v1_changed_to_n3_fraction: f64,
    /// Share of `V1_OTHER` decays that return to N=1 (rest N=3).
    pub v1_other_to_f_fraction: f64,
    /// Double excitation N=3 → N≥5 during holds without rotational repump, 1/s.
    pub gamma_n3_loss: f64,
    /// Probability the v=1 repump excites a `V1_N1` molecule.
    pub eta_convert: f64,
    /// Branching of the repump-excited state back into N=1.
    pub branch_repump_to_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vacuum {
    /// Background-gas loss for any occupied bin, 1/s.
    pub gamma_vac: f64,
    /// Residual detection-manifold loss to unrecoverable states, 1/s.
    pub gamma_detect_sink: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dephasing {
    /// Standard deviation of the shot-to-shot static detuning, rad/s.
    pub sigma_quasistatic: f64,
    /// Stationary standard deviation of the OU detuning, rad/s.
    pub sigma_ou: f64,
    /// OU correlation time, s.
    pub tau_ou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpParams {
    pub f_inf: f64,
    /// s.
    pub tau_op: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RamanKind {
    Xb,
    XaCurrent,
    XaOptimal,
}

impl RamanKind {
    pub fn name(self) -> &'static str {
        match self {
            RamanKind::Xb => "xb",
            RamanKind::XaCurrent => "xa-current",
            RamanKind::XaOptimal => "xa-optimal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "xb" | "x-b" => Some(RamanKind::Xb),
            "xa-current" | "xa" | "x-a" => Some(RamanKind::XaCurrent),
            "xa-optimal" => Some(RamanKind::XaOptimal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanScheme {
    pub kind: RamanKind,
    /// Rabi frequency over π times the scattering rate.
    pub q_pi: f64,
    /// Probability of a uniformly random phase kick per π of rotation.
    pub pure_dephasing_per_pi: f64,
    /// Light resonant with the detection manifold heats those molecules out.
    pub resonant_with_f: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RamanPresets {
    pub xb: RamanScheme,
    pub xa_current: RamanScheme,
    pub xa_optimal: RamanScheme,
}

impl RamanScheme {
    /// Fringe-amplitude loss per π pulse from leakage and phase kicks.
    pub fn pulse_amplitude_loss(&self) -> f64 {
        1.0 - (1.0 - 1.0 / self.q_pi) * (1.0 - self.pure_dephasing_per_pi)
    }
}

impl RamanPresets {
    pub fn get(&self, kind: RamanKind) -> &RamanScheme {
        match kind {
            RamanKind::Xb => &self.xb,
            RamanKind::XaCurrent => &self.xa_current,
            RamanKind::XaOptimal => &self.xa_optimal,
        }
    }
}

impl Default for PhysicsParams {
    fn default() -> Self {
        let camera_noise_sigma = 2.07;
        PhysicsParams {
            optics: Optics { gamma_opt: TWO_PI * 10e6, delta_ft: TWO_PI * 20e9 },
            imaging: ImagingLeakage {
                loss_target_per_image: 3.8e-3,
                loss_qubit_light_per_image: 3.0e-3,
                leak_to_n2_fraction: 0.5,
            },
            images: ImagePresets {
                nondestructive: ImageParams {
                    duration: 10e-3,
                    mean_signal_counts: 60.0,
                    mean_background_counts: 1.0,
                    camera_noise_sigma,
                    threshold: 15.0,
                    dropout_prob: 0.01,
                    loss_prob: 0.05,
                },
                error: ImageParams {
                    duration: 3e-3,
                    mean_signal_counts: 20.0,
                    mean_background_counts: 0.5,
                    camera_noise_sigma,
                    threshold: 4.8,
                    dropout_prob: 0.1293,
                    loss_prob: 1e-3,
                },
                destructive: ImageParams {
                    duration: 3e-3,
                    mean_signal_counts: 20.0,
                    mean_background_counts: 0.5,
                    camera_noise_sigma,
                    threshold: 4.8,
                    dropout_prob: 0.1293,
                    loss_prob: 1e-3,
                },
            },
            trap: Trap {
                depth_hf: 39.0,
                depth_ed: 930.0,
                qubit_shift_deep: TWO_PI * 400.0,
                depth_inhomogeneity: 0.10,
                loss_ramp_pair: 2.6e-3,
            },
            blackbody: Blackbody {
                gamma_01: 0.25,
                gamma_01_detect: 0.25,
                gamma_10: 5.3,
                v1_return_fraction: 0.75,
                v1_changed_to_n3_fraction: 0.5,
                v1_other_to_f_fraction: 0.7,
                gamma_n3_loss: 0.15,
                eta_convert: 0.90,
                branch_repump_to_f: 0.98,
            },
            vacuum: Vacuum { gamma_vac: 0.074, gamma_detect_sink: 0.0 },
            dephasing: Dephasing {
                sigma_quasistatic: 2f64.sqrt() / 19.5e-3,
                sigma_ou: 11.595_175_7,
                tau_ou: 0.038_024_28,
            },
            pump: PumpParams { f_inf: 0.96, tau_op: 1e-3 },
            raman: RamanPresets {
                xb: RamanScheme {
                    kind: RamanKind::Xb,
                    q_pi: 37.0,
                    pure_dephasing_per_pi: 9.0e-3,
                    resonant_with_f: false,
                },
                xa_current: RamanScheme {
                    kind: RamanKind::XaCurrent,
                    q_pi: 1.0 / 3.4e-3,
                    pure_dephasing_per_pi: 6.0e-3,
                    resonant_with_f: true,
                },
                xa_optimal: RamanScheme {
                    kind: RamanKind::XaOptimal,
                    q_pi: 1.0 / 1e-4,
                    pure_dephasing_per_pi: 5.9e-3,
                    resonant_with_f: false,
                },
            },
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} = {p} is not a probability")))
    }
}

fn check_rate(name: &str, r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("{name} = {r} is not a valid rate")))
    }
}

impl PhysicsParams {
    pub fn validate(&self) -> Result<()> {
        let im = &self.imaging;
        check_prob("imaging.loss_target_per_image", im.loss_target_per_image)?;
        check_prob("imaging.loss_qubit_light_per_image", im.loss_qubit_light_per_image)?;
        check_prob("imaging.leak_to_n2_fraction", im.leak_to_n2_fraction)?;
        self.images.nondestructive.validate()?;
        self.images.error.validate()?;
        self.images.destructive.validate()?;
        let t = &self.trap;
        if !(t.depth_ed > t.depth_hf && t.depth_hf > 0.0) {
            return Err(Error::Argument("trap depths must satisfy depth_ed > depth_hf > 0".into()));
        }
        check_prob("trap.loss_ramp_pair", t.loss_ramp_pair)?;
        check_prob("trap.depth_inhomogeneity", t.depth_inhomogeneity)?;
        let bb = &self.blackbody;
        check_rate("blackbody.gamma_01", bb.gamma_01)?;
        check_rate("blackbody.gamma_01_detect", bb.gamma_01_detect)?;
        check_rate("blackbody.gamma_10", bb.gamma_10)?;
        check_rate("blackbody.gamma_n3_loss", bb.gamma_n3_loss)?;
        check_prob("blackbody.v1_return_fraction", bb.v1_return_fraction)?;
        check_prob("blackbody.v1_changed_to_n3_fraction", bb.v1_changed_to_n3_fraction)?;
        check_prob("blackbody.v1_other_to_f_fraction", bb.v1_other_to_f_fraction)?;
        check_prob("blackbody.eta_convert", bb.eta_convert)?;
        check_prob("blackbody.branch_repump_to_f", bb.branch_repump_to_f)?;
        check_rate("vacuum.gamma_vac", self.vacuum.gamma_vac)?;
        check_rate("vacuum.gamma_detect_sink", self.vacuum.gamma_detect_sink)?;
        let d = &self.dephasing;
        check_rate("dephasing.sigma_quasistatic", d.sigma_quasistatic)?;
        check_rate("dephasing.sigma_ou", d.sigma_ou)?;
        if !(d.tau_ou > 0.0) {
            return Err(Error::Argument("dephasing.tau_ou must be positive".into()));
        }
        check_prob("pump.f_inf", self.pump.f_inf)?;
        if !(self.pump.tau_op > 0.0) {
            return Err(Error::Argument("pump.tau_op must be positive".into()));
        }
        for kind in [RamanKind::Xb, RamanKind::XaCurrent, RamanKind::XaOptimal] {
            let s = self.raman.get(kind);
            if !(s.q_pi > 0.0) {
                return Err(Error::Argument(format!("raman.{}.q_pi must be positive", kind.name())));
            }
            check_prob("raman.pure_dephasing_per_pi", s.pure_dephasing_per_pi)?;
        }
        Ok(())
    }

    /// Apply `key=value` overrides. Values are parsed as JSON, falling back to
    /// a bare string.
    pub fn with_overrides<'a, I>(&self, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut tree = serde_json::to_value(self)?;
        for (key, raw) in overrides {
            let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_dotted(&mut tree, key, value)?;
        }
        let out: PhysicsParams = serde_json::from_value(tree)
            .map_err(|e| Error::Override { key: "<params>".into(), message: e.to_string() })?;
        out.validate()?;
        Ok(out)
    }

    pub fn get_dotted(&self, key: &str) -> Result<Value> {
        let tree = serde_json::to_value(self)?;
        let mut node = &tree;
        for part in key.split('.') {
            node = node
                .get(part)
                .ok_or_else(|| Error::Override { key: key.to_string(), message: "no such parameter".into() })?;
        }
        Ok(node.clone())
    }

    /// Stable digest of the full parameter table.
    pub fn digest(&self) -> String {
        crate::rng::digest_hex(serde_json::to_string(self).expect("params serialise").as_bytes())
    }
}

fn set_dotted(tree: &mut Value, key: &str, value: Value) -> Result<()> {
    let err = |message: &str| Error::Override { key: key.to_string(), message: message.to_string() };
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| err("not a parameter group"))?;
        let child = obj.get_mut(*part).ok_or_else(|| err("no such parameter"))?;
        if i + 1 == parts.len() {
            if child.is_object() {
                return Err(err("refers to a group, not a value"));
            }
            *child = value;
            return Ok(());
        }
        node = child;
    }
    Err(err("empty key"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PhysicsParams::default().validate().unwrap();
    }

    #[test]
    fn dotted_override() {
        let p = PhysicsParams::default()
            .with_overrides([("blackbody.gamma_01", "0.25"), ("images.error.threshold", "6.6")])
            .unwrap();
        assert_eq!(p.blackbody.gamma_01, 0.25);
        assert_eq!(p.images.error.threshold, 6.6);
        assert_eq!(p.get_dotted("images.error.threshold").unwrap(), Value::from(6.6));
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let p = PhysicsParams::default();
        assert!(p.with_overrides([("blackbody.nope", "1")]).is_err());
        assert!(p.with_overrides([("blackbody", "1")]).is_err());
        assert!(p.with_overrides([("blackbody.eta_convert", "1.5")]).is_err());
        assert!(p.with_overrides([("trap.depth_ed", "10")]).is_err());
    }

    #[test]
    fn raman_kind_names() {
        for k in [RamanKind::Xb, RamanKind::XaCurrent, RamanKind::XaOptimal] {
            assert_eq!(RamanKind::parse(k.name()), Some(k));
        }
        assert_eq!(RamanKind::parse("XA_CURRENT"), Some(RamanKind::XaCurrent));
        assert_eq!(RamanKind::parse("xc"), None);
    }

    #[test]
    fn digest_changes_with_params() {
        let a = PhysicsParams::default();
        let b = a.with_overrides([("vacuum.gamma_vac", "0.05")]).unwrap();
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), PhysicsParams::default().digest());
    }
}
