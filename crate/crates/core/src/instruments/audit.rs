//! Transition-table audit of the parity selection rule: no instrument other
//! than microwave transfer and erasure conversion may move population
//! directly between the target manifold and the detection manifold.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::Serialize;

use super::composite::{composite_detect_site, CompositeMode};
use super::imaging::fluorescence_image;
use super::ops::{convert_erasures, optical_pump, raman_pulse, ramp_depth};
use crate::dynamics::HoldModel;
use crate::error::Result;
use crate::params::{PhysicsParams, RamanKind};
use crate::rng::stream;
use crate::state::{SiteState, StateBin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Instrument {
    Image,
    Pump,
    Raman(RamanKind),
    Ramp,
    Hold,
    Composite,
    Convert,
}

impl Instrument {
    pub const AUDITED: [Instrument; 9] = [
        Instrument::Image,
        Instrument::Pump,
        Instrument::Raman(RamanKind::Xb),
        Instrument::Raman(RamanKind::XaCurrent),
        Instrument::Raman(RamanKind::XaOptimal),
        Instrument::Ramp,
        Instrument::Hold,
        Instrument::Composite,
        Instrument::Convert,
    ];

    /// Instruments the selection rule exempts.
    pub fn may_cross_parity(self) -> bool {
        matches!(self, Instrument::Convert)
    }
}

/// Every `(from, to)` jump observed when applying `instrument` `samples` times
/// to each catalog bin, intermediate jumps included.
pub fn transition_table(
    instrument: Instrument,
    params: &PhysicsParams,
    samples: u64,
    seed: u64,
) -> Result<BTreeSet<(StateBin, StateBin)>> {
    let hold = HoldModel::new(params);
    let mut seen = BTreeSet::new();
    for (b, &bin) in StateBin::ALL.iter().enumerate() {
        for k in 0..samples {
            let mut rng = stream(seed, k, b as u64, 0);
            let mut site = SiteState::new(bin, params.trap.depth_hf);
            if bin == StateBin::V1N1 {
                site.origin = Some(StateBin::QDown);
            }
            let out = match instrument {
                Instrument::Image => fluorescence_image(&site, &params.images.error, params, &mut rng).1,
                Instrument::Pump => optical_pump(&site, 1e-3, &params.pump, &mut rng),
                Instrument::Raman(kind) => raman_pulse(&site, params.raman.get(kind), PI, 0.0, params, &mut rng),
                Instrument::Ramp => ramp_depth(&site, params.trap.depth_ed, params, &mut rng)?,
                Instrument::Hold => hold.evolve(&site, 2.0, Some(0.05), &mut rng)?,
                Instrument::Composite => {
                    composite_detect_site(
                        &site,
                        &params.raman.xb,
                        &params.images.error,
                        CompositeMode::Full,
                        &hold,
                        params,
                        &mut rng,
                    )?
                    .1
                }
                Instrument::Convert => convert_erasures(&site, params, &mut rng),
            };
            let mut prev = bin;
            for &next in &out.trail {
                if next != prev {
                    seen.insert((prev, next));
                }
                prev = next;
            }
        }
    }
    Ok(seen)
}

/// A jump that breaks the selection rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub instrument: Instrument,
    pub from: StateBin,
    pub to: StateBin,
}

fn crosses(from: StateBin, to: StateBin) -> bool {
    (from.in_ground_rotational() && to.in_cycling_manifold())
        || (from.in_cycling_manifold() && to.in_ground_rotational())
}

pub fn audit_transitions(params: &PhysicsParams, samples: u64, seed: u64) -> Result<Vec<Violation>> {
    let mut out = Vec::new();
    for instrument in Instrument::AUDITED {
        if instrument.may_cross_parity() {
            continue;
        }
        for (from, to) in transition_table(instrument, params, samples, seed)? {
            if crosses(from, to) {
                out.push(Violation { instrument, from, to });
            }
        }
    }
    Ok(out)
}
