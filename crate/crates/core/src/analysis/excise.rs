//! Conditioning on initial occupancy and excision of flagged records.

use serde::Serialize;

use super::stats::Proportion;
use crate::engine::TrialRecord;
use crate::state::StateBin;

/// Which flag decides excision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlagSelector {
    /// The `k`-th flag of each record (0-based, in step order).
    Image(usize),
    /// Any flag set.
    Any,
}

impl FlagSelector {
    fn flagged(self, r: &TrialRecord) -> bool {
        match self {
            FlagSelector::Image(k) => r.flags.get(k).is_some_and(|f| f.1),
            FlagSelector::Any => r.any_flag(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Excision<'a> {
    pub kept: Vec<&'a TrialRecord>,
    /// Records that passed the occupancy condition.
    pub conditioned: usize,
}

impl Excision<'_> {
    /// `None` when no record passed the occupancy condition.
    pub fn retained_fraction(&self) -> Option<f64> {
        (self.conditioned > 0).then(|| self.kept.len() as f64 / self.conditioned as f64)
    }
}

/// Sites initially identified as occupied.
pub fn occupied(records: &[TrialRecord]) -> Vec<&TrialRecord> {
    records.iter().filter(|r| r.occupied_initial).collect()
}

/// Keep occupied-identified records whose selected flag is 0.
pub fn excise(records: &[TrialRecord], selector: FlagSelector) -> Excision<'_> {
    let conditioned = occupied(records);
    let n = conditioned.len();
    Excision { kept: conditioned.into_iter().filter(|r| !selector.flagged(r)).collect(), conditioned: n }
}

/// Excision-based estimators over a batch.
pub fn fraction<'a, I, F>(records: I, pred: F) -> Proportion
where
    I: IntoIterator<Item = &'a TrialRecord>,
    F: Fn(&TrialRecord) -> bool,
{
    Proportion::from_iter(records.into_iter().map(pred))
}

/// f_E: occupied and in the target after excision.
pub fn excised_fidelity(records: &[TrialRecord], selector: FlagSelector, target: StateBin) -> Proportion {
    fraction(excise(records, selector).kept, |r| r.final_bin == target)
}

/// p_E: internal-state purity after excision, among molecules still present.
pub fn excised_purity(records: &[TrialRecord], selector: FlagSelector, target: StateBin) -> Proportion {
    let kept = excise(records, selector).kept;
    fraction(kept.into_iter().filter(|r| r.final_bin.is_occupied()), |r| r.final_bin == target)
}

/// Fraction of occupied-identified sites that were flagged.
pub fn flagged_fraction(records: &[TrialRecord], selector: FlagSelector) -> Proportion {
    fraction(occupied(records), |r| selector.flagged(r))
}
