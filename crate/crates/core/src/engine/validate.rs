//! Physics sanity checks that do not make a schedule invalid.

use serde::Serialize;

use super::schedule::{ImageKind, Primitive, Schedule};
use crate::params::PhysicsParams;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    /// 0-based step index.
    pub step: usize,
    pub message: String,
}

pub fn validate_schedule(schedule: &Schedule, params: &PhysicsParams) -> Vec<Warning> {
    let mut out = Vec::new();
    let mut depth = params.trap.depth_hf;
    let mut explicit_ramp = false;
    let decay_time = 1.0 / params.blackbody.gamma_10;
    for (step, prim) in schedule.steps().iter().enumerate() {
        let mut warn = |message: String| out.push(Warning { step, message });
        match prim {
            Primitive::Hold { duration, repump_period: None } if duration.seconds() > decay_time => warn(format!(
                "hold of {duration} without repump exceeds the v=1 decay time ({decay_time:.3} s); \
                 blackbody erasures will decay before they can be converted"
            )),
            Primitive::Hold { repump_period: Some(p), .. } if p.seconds() > decay_time => {
                warn(format!("repump period {p} is longer than the v=1 decay time ({decay_time:.3} s)"))
            }
            Primitive::Ramp { depth: d } => {
                depth = d.resolve(params);
                explicit_ramp = true;
            }
            Primitive::CompositeDetect { .. } if explicit_ramp && depth < params.trap.depth_ed => warn(format!(
                "composite detection after a ramp to {depth} uK: detection runs below the calibrated depth of {} uK",
                params.trap.depth_ed
            )),
            Primitive::Image { kind: ImageKind::Error, .. } if depth < params.trap.depth_ed => warn(format!(
                "error image at {depth} uK, below the calibrated detection depth of {} uK",
                params.trap.depth_ed
            )),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::parse_script;

    fn warnings(text: &str) -> Vec<Warning> {
        validate_schedule(&parse_script(text).unwrap(), &PhysicsParams::default())
    }

    #[test]
    fn unconverted_hold_warns() {
        assert_eq!(warnings("load 1 1\nhold 1s").len(), 1);
        assert!(warnings("load 1 1\nhold 1s repump=50ms").is_empty());
    }

    #[test]
    fn shallow_detection_warns() {
        assert_eq!(warnings("load 1 1\nramp 39\ncomposite_detect xb").len(), 1);
        assert!(warnings("load 1 1\ncomposite_detect xb").is_empty());
        assert!(warnings("load 1 1\nramp ed\nimage error").is_empty());
    }
}
