//! Runs every registered reference scenario at its registered trial count and
//! prints one PASS/FAIL line per criterion followed by its individual checks.

use std::io::Write;

use erasim::reproduce::{registry, Context};

#[test]
fn acceptance_criteria() {
    let ctx = Context::default();
    let mut failed = Vec::new();
    let mut out = std::io::stdout().lock();
    for target in registry() {
        match target.run(&ctx) {
            Ok(report) => {
                write!(out, "{report}").unwrap();
                if !report.passed() {
                    failed.push(target.id);
                }
            }
            Err(e) => {
                writeln!(out, "FAIL criterion {} [{}] error: {e}", target.criterion, target.id).unwrap();
                failed.push(target.id);
            }
        }
        out.flush().unwrap();
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
