//! The full validation battery at a reduced horizon, printing one verdict
//! per check. `rgflow validate` runs the same battery at t_end = 0.5.
//!
//! Run with: cargo run --release --example validation_battery

use rgflow::validation::{run_battery, CheckStatus};
use rgflow::FlowParams;

fn main() -> rgflow::Result<()> {
    let base = FlowParams {
        t_end: 0.2,
        ..FlowParams::default()
    };
    let report = run_battery(&base, 42)?;
    for r in &report.results {
        let mark = match r.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        println!(
            "{mark}  {:<44} measured {:>12.4e}  threshold {:>10.3e}",
            r.name, r.measured, r.threshold
        );
    }
    let (pass, fail, skip) = report.results.iter().fold((0, 0, 0), |(p, f, s), r| match r.status {
        CheckStatus::Pass => (p + 1, f, s),
        CheckStatus::Fail => (p, f + 1, s),
        CheckStatus::Skipped => (p, f, s + 1),
    });
    println!("\n{pass} passed, {fail} failed, {skip} skipped in {:.1}s", report.wall_seconds);
    std::process::exit(if fail == 0 { 0 } else { 1 });
}
