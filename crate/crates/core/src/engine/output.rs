//! Record serialisation.

use std::io::Write;

use super::run::TrialRecord;
use crate::error::Result;

pub const CSV_HEADER: [&str; 6] = ["trial", "site", "occupied", "flags", "final_bin", "measure"];

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// CSV with flags as semicolon-joined bits and an empty `measure` when the
/// schedule has no readout.
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        let flags = r.flags.iter().map(|f| bit(f.1)).collect::<Vec<_>>().join(";");
        w.write_record([
            r.trial_id.to_string().as_str(),
            r.site_id.to_string().as_str(),
            bit(r.occupied_initial),
            flags.as_str(),
            r.final_bin.name(),
            r.final_measure.map_or("", bit),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per record.
pub fn write_jsonl<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
