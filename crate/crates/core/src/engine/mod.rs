//! Experiment scripts, schedules, and deterministic execution.

mod output;
mod parse;
mod run;
mod schedule;
mod validate;

pub use output::{write_csv, write_jsonl, CSV_HEADER};
pub use parse::{canonical, parse_script, ParseError, ParseErrorCode};
pub use run::{run_trials, run_trials_from, run_trials_serial, Plan, TrialRecord, MAX_SITE_TRIALS};
pub use schedule::{
    resolve_image, Angle, Depth, ImageKind, ImageOverrides, LoadInit, Primitive, Schedule, TimeSpan, TimeUnit,
    IMAGE_KEYS,
};
pub use validate::{validate_schedule, Warning};
