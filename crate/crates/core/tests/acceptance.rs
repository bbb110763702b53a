//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

use std::process::ExitCode;

use guideq::validation::{run_all, CRITERIA};

fn main() -> ExitCode {
    let reports = run_all();
    assert_eq!(reports.len(), CRITERIA.len());
    for report in &reports {
        println!("{}", report.summary_line());
    }
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed()).map(|r| r.id).collect();
    println!("acceptance: {}/{} criteria passed", reports.len() - failed.len(), reports.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
