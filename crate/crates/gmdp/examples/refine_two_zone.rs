//! Refine a regulation policy from the deterministic two-zone mean model
//! onto the noisy concrete model and watch the output error against the
//! certified ε level.

use gmdp::demo::{run_two_zone, TwoZoneConfig};

fn main() -> gmdp::Result<()> {
    let cfg = TwoZoneConfig { trials: 500, ..Default::default() };
    let report = run_two_zone(std::path::Path::new("out/two-zone"), &cfg)?;
    println!(
        "certified δ at ε = {}: {:.4} (exact noise exceedance {:.4})",
        report.epsilon, report.delta, report.delta_exact
    );
    println!(
        "over {} runs of {} steps: {:.2} ε-excursions per run on average",
        report.trials, report.horizon, report.mean_excursions
    );
    println!(
        "expected-count budget {:.1} (+3se {:.2}): {}",
        report.excursion_bound,
        3.0 * report.excursion_std_error,
        if report.bound_holds { "within budget" } else { "EXCEEDED" }
    );
    println!("per-step error of one run: out/two-zone/two_zone_sample_error.csv");
    Ok(())
}
