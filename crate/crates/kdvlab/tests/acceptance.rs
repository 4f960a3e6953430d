//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use kdvlab::acceptance::{run_criterion, CRITERIA};

fn main() -> ExitCode {
    // `cargo test -- <filter>` passes arguments through; numeric ones select criteria
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<usize> = if selected.is_empty() { (1..=CRITERIA).collect() } else { selected };
    let mut failed = 0;
    println!("acceptance: {} criteria", ids.len());
    for id in ids {
        let start = Instant::now();
        let report = run_criterion(id);
        println!("{report} [{:.1}s]", start.elapsed().as_secs_f64());
        failed += usize::from(!report.passed);
    }
    if failed == 0 {
        println!("acceptance: all passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} failed");
        ExitCode::FAILURE
    }
}
