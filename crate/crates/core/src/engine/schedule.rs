//! Experiment schedules and their canonical text form.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::parse::{ParseError, ParseErrorCode};
use crate::error::{Error, Result};
use crate::instruments::CompositeMode;
use crate::params::{ImageParams, PhysicsParams, RamanKind};
use crate::rng::digest_hex;
use crate::state::StateBin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeUnit {
    Us,
    Ms,
    S,
}

impl TimeUnit {
    fn scale(self) -> f64 {
        match self {
            TimeUnit::Us => 1e-6,
            TimeUnit::Ms => 1e-3,
            TimeUnit::S => 1.0,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            TimeUnit::Us => "us",
            TimeUnit::Ms => "ms",
            TimeUnit::S => "s",
        }
    }
}

/// A duration as written, so that printing reproduces the script exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpan {
    pub value: f64,
    pub unit: TimeUnit,
}

impl TimeSpan {
    pub fn seconds(self) -> f64 {
        self.value * self.unit.scale()
    }

    pub fn s(value: f64) -> Self {
        TimeSpan { value, unit: TimeUnit::S }
    }

    pub fn ms(value: f64) -> Self {
        TimeSpan { value, unit: TimeUnit::Ms }
    }
}

impl fmt::Display for TimeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.value, self.unit.suffix())
    }
}

/// A rotation angle, either in radians or as a multiple of π.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Angle {
    Rad(f64),
    PiTimes(f64),
}

impl Angle {
    pub fn radians(self) -> f64 {
        match self {
            Angle::Rad(r) => r,
            Angle::PiTimes(m) => m * std::f64::consts::PI,
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Angle::Rad(r) => write!(f, "{r}"),
            Angle::PiTimes(m) if m == 1.0 => f.write_str("pi"),
            Angle::PiTimes(m) if m == -1.0 => f.write_str("-pi"),
            Angle::PiTimes(m) if m == 0.5 => f.write_str("pi/2"),
            Angle::PiTimes(m) if m == -0.5 => f.write_str("-pi/2"),
            Angle::PiTimes(m) => write!(f, "{m}pi"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageKind {
    Nondestructive,
    Error,
    Destructive,
}

impl ImageKind {
    pub fn name(self) -> &'static str {
        match self {
            ImageKind::Nondestructive => "nondestructive",
            ImageKind::Error => "error",
            ImageKind::Destructive => "destructive",
        }
    }

    pub fn preset(self, params: &PhysicsParams) -> &ImageParams {
        match self {
            ImageKind::Nondestructive => &params.images.nondestructive,
            ImageKind::Error => &params.images.error,
            ImageKind::Destructive => &params.images.destructive,
        }
    }
}

/// Initial internal state of loaded molecules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LoadInit {
    /// Spread over the twelve N=1 states: `DPRIME` with weight 1/12, the rest
    /// in `F_REST`.
    Detect,
    Bin(StateBin),
}

/// Tweezer depth for a ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Depth {
    Hf,
    Ed,
    Microkelvin(f64),
}

impl Depth {
    pub fn resolve(self, params: &PhysicsParams) -> f64 {
        match self {
            Depth::Hf => params.trap.depth_hf,
            Depth::Ed => params.trap.depth_ed,
            Depth::Microkelvin(u) => u,
        }
    }
}

impl fmt::Display for Depth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Depth::Hf => f.write_str("hf"),
            Depth::Ed => f.write_str("ed"),
            Depth::Microkelvin(u) => write!(f, "{u}"),
        }
    }
}

/// Inline overrides of an image preset, e.g. `threshold=5.6`.
pub type ImageOverrides = Vec<(String, f64)>;

pub const IMAGE_KEYS: [&str; 7] = [
    "duration",
    "mean_signal_counts",
    "mean_background_counts",
    "camera_noise_sigma",
    "threshold",
    "dropout_prob",
    "loss_prob",
];

/// Apply inline overrides to an image preset.
pub fn resolve_image(base: &ImageParams, overrides: &ImageOverrides) -> Result<ImageParams> {
    let mut p = base.clone();
    for (key, value) in overrides {
        let slot = match key.as_str() {
            "duration" => &mut p.duration,
            "mean_signal_counts" => &mut p.mean_signal_counts,
            "mean_background_counts" => &mut p.mean_background_counts,
            "camera_noise_sigma" => &mut p.camera_noise_sigma,
            "threshold" => &mut p.threshold,
            "dropout_prob" => &mut p.dropout_prob,
            "loss_prob" => &mut p.loss_prob,
            _ => return Err(Error::Override { key: key.clone(), message: "not an image parameter".into() }),
        };
        *slot = *value;
    }
    p.validate()?;
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    Load { n_sites: usize, fill_prob: f64, init: LoadInit },
    Image { kind: ImageKind, overrides: ImageOverrides },
    Pump { duration: TimeSpan },
    Microwave { fidelity: f64, source: StateBin, dest: StateBin },
    Raman { scheme: RamanKind, angle: Angle, axis_phase: Angle },
    CompositeDetect { scheme: RamanKind, mode: CompositeMode, overrides: ImageOverrides },
    Hold { duration: TimeSpan, repump_period: Option<TimeSpan> },
    Ramp { depth: Depth },
    Convert,
    Measure { target: StateBin },
}

impl Primitive {
    /// Whether this step appends an error flag to the trial record.
    pub fn emits_flag(&self) -> bool {
        match self {
            Primitive::Image { kind, .. } => *kind == ImageKind::Error,
            Primitive::CompositeDetect { mode, .. } => mode.images(),
            _ => false,
        }
    }

    fn is_terminal(&self) -> bool {
        matches!(self, Primitive::Measure { .. } | Primitive::Image { kind: ImageKind::Destructive, .. })
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Primitive::Load { .. } => "load",
            Primitive::Image { .. } => "image",
            Primitive::Pump { .. } => "pump",
            Primitive::Microwave { .. } => "microwave",
            Primitive::Raman { .. } => "raman",
            Primitive::CompositeDetect { .. } => "composite_detect",
            Primitive::Hold { .. } => "hold",
            Primitive::Ramp { .. } => "ramp",
            Primitive::Convert => "convert",
            Primitive::Measure { .. } => "measure",
        }
    }
}

fn write_overrides(f: &mut fmt::Formatter<'_>, overrides: &ImageOverrides) -> fmt::Result {
    overrides.iter().try_for_each(|(k, v)| write!(f, " {k}={v}"))
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())?;
        match self {
            Primitive::Load { n_sites, fill_prob, init } => {
                write!(f, " {n_sites} {fill_prob}")?;
                if let LoadInit::Bin(b) = init {
                    write!(f, " init={b}")?;
                }
                Ok(())
            }
            Primitive::Image { kind, overrides } => {
                write!(f, " {}", kind.name())?;
                write_overrides(f, overrides)
            }
            Primitive::Pump { duration } => write!(f, " {duration}"),
            Primitive::Microwave { fidelity, source, dest } => write!(f, " {fidelity} {source} {dest}"),
            Primitive::Raman { scheme, angle, axis_phase } => write!(f, " {} {angle} {axis_phase}", scheme.name()),
            Primitive::CompositeDetect { scheme, mode, overrides } => {
                write!(f, " {}", scheme.name())?;
                if *mode != CompositeMode::Full {
                    write!(f, " mode={}", mode.name())?;
                }
                write_overrides(f, overrides)
            }
            Primitive::Hold { duration, repump_period } => {
                write!(f, " {duration}")?;
                if let Some(p) = repump_period {
                    write!(f, " repump={p}")?;
                }
                Ok(())
            }
            Primitive::Ramp { depth } => write!(f, " {depth}"),
            Primitive::Convert => Ok(()),
            Primitive::Measure { target } => write!(f, " {target}"),
        }
    }
}

/// A validated, ordered list of primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    steps: Vec<Primitive>,
}

impl Schedule {
    /// Check the structural invariants. Errors carry the 1-based step number
    /// as the line.
    pub fn new(steps: Vec<Primitive>) -> Result<Self, ParseError> {
        let at = |i: usize, code, msg: String| ParseError::new(i + 1, 1, code, msg);
        if steps.is_empty() {
            return Err(ParseError::new(1, 1, ParseErrorCode::EmptySchedule, "schedule has no steps".into()));
        }
        for (i, step) in steps.iter().enumerate() {
            match step {
                Primitive::Load { n_sites, fill_prob, .. } => {
                    if i != 0 {
                        return Err(at(
                            i,
                            ParseErrorCode::LoadPlacement,
                            "LOAD must be the first and only load step".into(),
                        ));
                    }
                    if *n_sites == 0 || !(0.0..=1.0).contains(fill_prob) {
                        return Err(at(
                            i,
                            ParseErrorCode::BadValue,
                            "LOAD needs n_sites >= 1 and fill in [0, 1]".into(),
                        ));
                    }
                }
                Primitive::CompositeDetect { scheme: RamanKind::XaCurrent, mode: CompositeMode::Full, .. } => {
                    return Err(at(
                        i,
                        ParseErrorCode::Precondition,
                        "composite detection with xa-current light would heat molecules in the detection manifold"
                            .into(),
                    ));
                }
                s if s.is_terminal() && i + 1 != steps.len() => {
                    return Err(at(
                        i,
                        ParseErrorCode::TerminalPlacement,
                        "a destructive readout must be the last step".into(),
                    ));
                }
                _ => {}
            }
        }
        if !matches!(steps[0], Primitive::Load { .. }) {
            return Err(at(0, ParseErrorCode::LoadPlacement, "schedule must start with LOAD".into()));
        }
        Ok(Schedule { steps })
    }

    pub fn steps(&self) -> &[Primitive] {
        &self.steps
    }

    pub fn n_sites(&self) -> usize {
        match self.steps[0] {
            Primitive::Load { n_sites, .. } => n_sites,
            _ => unreachable!("validated schedule starts with LOAD"),
        }
    }

    /// Number of flag-emitting steps, i.e. the flag count of every record.
    pub fn n_flags(&self) -> usize {
        self.steps.iter().filter(|s| s.emits_flag()).count()
    }

    /// Stable digest of the canonical text.
    pub fn digest(&self) -> String {
        digest_hex(self.to_string().as_bytes())
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.steps.iter().try_for_each(|s| writeln!(f, "{s}"))
    }
}
