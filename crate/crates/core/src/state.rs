//! Binned internal-state catalog, the target/detect/erasable partition, and
//! the per-site hybrid state (bin plus Bloch vector inside the qubit subspace).
//!
//! Bloch convention: `+z` is `|↓⟩` (`Q_DOWN`), `-z` is `|0⟩` (`Q_ZERO`).
//! A rotation by `angle` about the equatorial axis `(cos φ, sin φ, 0)` acts
//! right-handed, so a π/2 pulse at `φ = 0` takes `+z` to `-y`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::TrialRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StateBin {
    /// |X, v=0, N=0, F=1, m_F=0⟩, the qubit `|↓⟩`.
    QDown,
    /// |X, v=0, N=0, F=0, m_F=0⟩, the qubit `|0⟩`.
    QZero,
    /// |X, v=0, N=0, F=1, m_F=-1⟩, the preparation target `|−⟩`.
    MMinus,
    /// |X, v=0, N=0, F=1, m_F=+1⟩.
    MPlus,
    /// Coherent superposition of `Q_DOWN` and `Q_ZERO`; carries a Bloch vector.
    Qubit,
    /// |D'⟩ = |X, v=0, N=1, J=3/2, F=2, m_F=-2⟩.
    DPrime,
    /// |↑⟩ = |X, v=0, N=1, J=1/2, F=0, m_F=0⟩.
    Up,
    /// The remaining ten hyperfine states of X(v=0, N=1).
    FRest,
    /// X(v=0, N=2).
    N2,
    /// X(v=0, N=3), rotationally repumped during imaging.
    N3,
    /// X(v=1, N=1), the erasure-convertible manifold.
    V1N1,
    /// X(v=1, N=0 or 2), reached by blackbody excitation out of N=1.
    V1Other,
    /// Any state with no path back to the detection manifold.
    Sink,
    /// Empty tweezer.
    Empty,
}

impl StateBin {
    pub const ALL: [StateBin; 14] = [
        StateBin::QDown,
        StateBin::QZero,
        StateBin::MMinus,
        StateBin::MPlus,
        StateBin::Qubit,
        StateBin::DPrime,
        StateBin::Up,
        StateBin::FRest,
        StateBin::N2,
        StateBin::N3,
        StateBin::V1N1,
        StateBin::V1Other,
        StateBin::Sink,
        StateBin::Empty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StateBin::QDown => "Q_DOWN",
            StateBin::QZero => "Q_ZERO",
            StateBin::MMinus => "M_MINUS",
            StateBin::MPlus => "M_PLUS",
            StateBin::Qubit => "QUBIT",
            StateBin::DPrime => "DPRIME",
            StateBin::Up => "UP",
            StateBin::FRest => "F_REST",
            StateBin::N2 => "N2",
            StateBin::N3 => "N3",
            StateBin::V1N1 => "V1_N1",
            StateBin::V1Other => "V1_OTHER",
            StateBin::Sink => "SINK",
            StateBin::Empty => "EMPTY",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&b| b == self).unwrap()
    }

    pub fn description(self) -> &'static str {
        match self {
            StateBin::QDown => "X(v=0,N=0,F=1,mF=0) qubit |down>",
            StateBin::QZero => "X(v=0,N=0,F=0,mF=0) qubit |0>",
            StateBin::MMinus => "X(v=0,N=0,F=1,mF=-1) |->",
            StateBin::MPlus => "X(v=0,N=0,F=1,mF=+1)",
            StateBin::Qubit => "superposition of Q_DOWN and Q_ZERO (Bloch vector)",
            StateBin::DPrime => "X(v=0,N=1,J=3/2,F=2,mF=-2) |D'>",
            StateBin::Up => "X(v=0,N=1,J=1/2,F=0,mF=0) |up>",
            StateBin::FRest => "other 10 hyperfine states of X(v=0,N=1)",
            StateBin::N2 => "X(v=0,N=2)",
            StateBin::N3 => "X(v=0,N=3)",
            StateBin::V1N1 => "X(v=1,N=1)",
            StateBin::V1Other => "X(v=1,N=0,2)",
            StateBin::Sink => "unrecoverable internal states (N>=5, higher v)",
            StateBin::Empty => "empty tweezer",
        }
    }

    /// Occupied means a molecule is still in the trap.
    pub fn is_occupied(self) -> bool {
        self != StateBin::Empty
    }

    /// Ground rotational manifold X(v=0, N=0).
    pub fn in_ground_rotational(self) -> bool {
        matches!(self, StateBin::QDown | StateBin::QZero | StateBin::MMinus | StateBin::MPlus | StateBin::Qubit)
    }

    /// The optical cycling manifold X(v=0, N=1).
    pub fn in_cycling_manifold(self) -> bool {
        matches!(self, StateBin::DPrime | StateBin::Up | StateBin::FRest)
    }

    pub fn is_qubit_state(self) -> bool {
        matches!(self, StateBin::QDown | StateBin::QZero | StateBin::Qubit)
    }
}

impl fmt::Display for StateBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateBin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        StateBin::ALL.iter().copied().find(|b| b.name() == upper).ok_or_else(|| Error::UnknownBin(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PartitionClass {
    Target,
    Detect,
    Erasable,
    Sink,
    Empty,
}

/// Which bins form the target space. Everything else follows from the catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    target: Vec<StateBin>,
}

impl Partition {
    /// `𝒯 = {|−⟩}`, used for state preparation.
    pub fn preparation() -> Self {
        Self { target: vec![StateBin::MMinus] }
    }

    /// `𝒯 = {|↓⟩, |0⟩}` together with their superpositions.
    pub fn qubit() -> Self {
        Self { target: vec![StateBin::QDown, StateBin::QZero, StateBin::Qubit] }
    }

    /// Custom target set. Only N=0 bins may be targets, otherwise the target
    /// would overlap the detection manifold or the absorbing bins.
    pub fn with_target(target: Vec<StateBin>) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::Argument("target set is empty".into()));
        }
        if let Some(bad) = target.iter().find(|b| !b.in_ground_rotational()) {
            return Err(Error::Argument(format!("{bad} cannot be a target bin")));
        }
        Ok(Self { target })
    }

    pub fn target(&self) -> &[StateBin] {
        &self.target
    }

    pub fn class_of(&self, bin: StateBin) -> PartitionClass {
        match bin {
            StateBin::Empty => PartitionClass::Empty,
            StateBin::Sink => PartitionClass::Sink,
            b if b.in_cycling_manifold() => PartitionClass::Detect,
            b if self.target.contains(&b) => PartitionClass::Target,
            _ => PartitionClass::Erasable,
        }
    }
}

pub fn partition_of(bin: StateBin, config: &Partition) -> PartitionClass {
    config.class_of(bin)
}

/// Unit vector on the qubit Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bloch([f64; 3]);

impl Bloch {
    pub const DOWN: Bloch = Bloch([0.0, 0.0, 1.0]);
    pub const ZERO: Bloch = Bloch([0.0, 0.0, -1.0]);

    /// Normalises `v`; panics on the zero vector.
    pub fn new(v: [f64; 3]) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        assert!(n > 0.0, "zero Bloch vector");
        Bloch([v[0] / n, v[1] / n, v[2] / n])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn norm(&self) -> f64 {
        let [x, y, z] = self.0;
        (x * x + y * y + z * z).sqrt()
    }

    /// Probability of finding `|↓⟩` in a projective measurement.
    pub fn p_down(&self) -> f64 {
        0.5 * (1.0 + self.0[2])
    }

    /// Rodrigues rotation about the equatorial axis at azimuth `axis_phase`.
    pub fn rotate_equatorial(&self, axis_phase: f64, angle: f64) -> Self {
        let k = [axis_phase.cos(), axis_phase.sin(), 0.0];
        let v = self.0;
        let (s, c) = angle.sin_cos();
        let kxv = [k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2], k[0] * v[1] - k[1] * v[0]];
        let kdv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = v[i] * c + kxv[i] * s + k[i] * kdv * (1.0 - c);
        }
        Bloch(out)
    }

    /// Free precession: rotation about `z` by `phase`.
    pub fn precess(&self, phase: f64) -> Self {
        let (s, c) = phase.sin_cos();
        let [x, y, z] = self.0;
        Bloch([x * c - y * s, x * s + y * c, z])
    }
}

/// Trajectory state of one tweezer site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteState {
    pub bin: StateBin,
    /// Present iff `bin == QUBIT`.
    pub bloch: Option<Bloch>,
    /// Total free-precession phase accrued while in the qubit subspace.
    pub phase_accum: f64,
    /// Shot-to-shot quasi-static detuning, rad/s.
    pub static_detune: f64,
    /// Current value of the Ornstein-Uhlenbeck detuning, rad/s.
    pub ou_detune: f64,
    /// Fractional trap-depth error of this site, fixed per experiment.
    pub depth_error: f64,
    /// Current tweezer depth, µK.
    pub depth: f64,
    /// N=0 bin a `V1_N1` molecule returns to on spontaneous decay.
    pub origin: Option<StateBin>,
    /// Elapsed hold time, s. Drives the repump cadence across consecutive holds.
    pub clock: f64,
    /// Append-only (image index, bit) log.
    pub flags: Vec<(usize, bool)>,
    /// Bins entered by jumps, in order.
    pub trail: Vec<StateBin>,
}

impl SiteState {
    pub fn new(bin: StateBin, depth: f64) -> Self {
        let mut s = SiteState {
            bin,
            bloch: None,
            phase_accum: 0.0,
            static_detune: 0.0,
            ou_detune: 0.0,
            depth_error: 0.0,
            depth,
            origin: None,
            clock: 0.0,
            flags: Vec::new(),
            trail: Vec::new(),
        };
        if bin == StateBin::Qubit {
            s.bloch = Some(Bloch::DOWN);
        }
        s
    }

    pub fn qubit(bloch: Bloch, depth: f64) -> Self {
        let mut s = SiteState::new(StateBin::Qubit, depth);
        s.bloch = Some(bloch);
        s
    }

    /// Jump to `bin`, dropping any coherence.
    pub fn jump(&mut self, bin: StateBin) {
        if bin == self.bin && bin != StateBin::Qubit {
            return;
        }
        self.bin = bin;
        self.bloch = if bin == StateBin::Qubit { Some(Bloch::DOWN) } else { None };
        if bin != StateBin::V1N1 {
            self.origin = None;
        }
        self.trail.push(bin);
    }

    /// Lift a classical qubit pole into the `QUBIT` representation.
    pub fn lift_qubit(&mut self) {
        match self.bin {
            StateBin::QDown => {
                self.bin = StateBin::Qubit;
                self.bloch = Some(Bloch::DOWN);
            }
            StateBin::QZero => {
                self.bin = StateBin::Qubit;
                self.bloch = Some(Bloch::ZERO);
            }
            _ => {}
        }
    }

    /// Projective measurement in the `|↓⟩/|0⟩` basis, `u` uniform on [0, 1).
    pub fn project_qubit(&mut self, u: f64) {
        if let (StateBin::Qubit, Some(b)) = (self.bin, self.bloch) {
            self.bin = if u < b.p_down() { StateBin::QDown } else { StateBin::QZero };
            self.bloch = None;
        }
    }

    pub fn push_flag(&mut self, image_index: usize, bit: bool) {
        self.flags.push((image_index, bit));
    }
}

/// Ideal pulse acting on the qubit subspace. Sites outside it are returned
/// unchanged.
pub fn apply_rotation(site: &SiteState, axis_phase: f64, angle: f64) -> SiteState {
    let mut out = site.clone();
    out.lift_qubit();
    match (out.bin, out.bloch) {
        (StateBin::Qubit, Some(b)) => {
            out.bloch = Some(b.rotate_equatorial(axis_phase, angle));
        }
        _ => {
            log::trace!("rotation on {} ignored: not in the qubit subspace", site.bin);
            return site.clone();
        }
    }
    out
}

/// Fraction of records whose final bin still holds a recoverable molecule.
pub fn survival_probability(records: &[TrialRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::UndefinedStatistic("survival of an empty batch"));
    }
    let alive = records.iter().filter(|r| !matches!(r.final_bin, StateBin::Empty | StateBin::Sink)).count();
    Ok(alive as f64 / records.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn partition_examples() {
        let q = Partition::qubit();
        assert_eq!(partition_of(StateBin::DPrime, &q), PartitionClass::Detect);
        assert_eq!(partition_of(StateBin::Empty, &q), PartitionClass::Empty);
        assert_eq!(partition_of(StateBin::V1N1, &q), PartitionClass::Erasable);
        assert_eq!(partition_of(StateBin::Qubit, &q), PartitionClass::Target);
        let p = Partition::preparation();
        assert_eq!(partition_of(StateBin::MMinus, &p), PartitionClass::Target);
        assert_eq!(partition_of(StateBin::QDown, &p), PartitionClass::Erasable);
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint() {
        for config in [Partition::qubit(), Partition::preparation()] {
            let mut detect = Vec::new();
            for bin in StateBin::ALL {
                let class = config.class_of(bin);
                if class == PartitionClass::Detect {
                    detect.push(bin);
                }
                if class == PartitionClass::Target {
                    assert!(!bin.in_cycling_manifold());
                }
            }
            assert_eq!(detect, vec![StateBin::DPrime, StateBin::Up, StateBin::FRest]);
        }
    }

    #[test]
    fn custom_target_rejects_detect_bins() {
        assert!(Partition::with_target(vec![StateBin::Up]).is_err());
        assert!(Partition::with_target(vec![]).is_err());
        assert!(Partition::with_target(vec![StateBin::MPlus]).is_ok());
    }

    #[test]
    fn bin_names_round_trip() {
        for bin in StateBin::ALL {
            assert_eq!(bin.name().parse::<StateBin>().unwrap(), bin);
            assert_eq!(bin.name().to_lowercase().parse::<StateBin>().unwrap(), bin);
        }
        assert!(matches!("X3".parse::<StateBin>(), Err(Error::UnknownBin(_))));
    }

    #[test]
    fn pi_flip_and_quarter_turn() {
        let s = SiteState::qubit(Bloch::DOWN, 39.0);
        for phase in [0.0, 0.3, 2.0] {
            let out = apply_rotation(&s, phase, PI);
            assert!(close(out.bloch.unwrap().as_array(), [0.0, 0.0, -1.0], 1e-12));
        }
        let out = apply_rotation(&s, 0.0, FRAC_PI_2);
        assert!(close(out.bloch.unwrap().as_array(), [0.0, -1.0, 0.0], 1e-12));
    }

    #[test]
    fn two_half_pulses_make_a_pi_pulse() {
        let s = SiteState::qubit(Bloch::new([0.3, -0.4, 0.5]), 39.0);
        let twice = apply_rotation(&apply_rotation(&s, 0.7, FRAC_PI_2), 0.7, FRAC_PI_2);
        let once = apply_rotation(&s, 0.7, PI);
        assert!(close(twice.bloch.unwrap().as_array(), once.bloch.unwrap().as_array(), 1e-12));
    }

    #[test]
    fn rotation_lifts_classical_pole() {
        let s = SiteState::new(StateBin::QZero, 39.0);
        let out = apply_rotation(&s, 0.0, PI);
        assert_eq!(out.bin, StateBin::Qubit);
        assert!((out.bloch.unwrap().z() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_outside_qubit_is_noop() {
        let s = SiteState::new(StateBin::FRest, 39.0);
        assert_eq!(apply_rotation(&s, 0.0, PI), s);
    }

    #[test]
    fn survival_of_empty_batch_is_undefined() {
        assert!(survival_probability(&[]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn rotation_composition(th1 in -7.0f64..7.0, th2 in -7.0f64..7.0, phase in 0.0f64..6.3,
                                x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            proptest::prop_assume!(x * x + y * y + z * z > 1e-3);
            let s = SiteState::qubit(Bloch::new([x, y, z]), 39.0);
            let a = apply_rotation(&apply_rotation(&s, phase, th1), phase, th2).bloch.unwrap();
            let b = apply_rotation(&s, phase, th1 + th2).bloch.unwrap();
            proptest::prop_assert!(close(a.as_array(), b.as_array(), 1e-9));
            proptest::prop_assert!((a.norm() - 1.0).abs() < 1e-9);
        }
    }
}
