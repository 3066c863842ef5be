//! Randomized verification of the refinement bounds on finite models: exact
//! pairs must reproduce the abstract output law to 1e-10, approximate pairs
//! must respect the two-sided γ envelope for every output event.

use gmdp::validate::sandwich_suite;

fn main() -> gmdp::Result<()> {
    let outcomes = sandwich_suite(100, 7, 1e-9)?;
    let mut failures = 0;
    for o in &outcomes {
        if !o.pass {
            failures += 1;
            println!(
                "instance {} FAILED: exact={} δ={:.4} γ={:.4} gap={:.3e}",
                o.index, o.exact, o.delta, o.gamma, o.tv_gap
            );
        }
    }
    let exact: Vec<_> = outcomes.iter().filter(|o| o.exact).collect();
    let worst = exact.iter().map(|o| o.tv_gap).fold(0.0_f64, f64::max);
    println!(
        "{} instances, {} exact (worst exact gap {:.2e}), {} failures",
        outcomes.len(),
        exact.len(),
        worst,
        failures
    );
    let slack: Vec<f64> = outcomes
        .iter()
        .filter(|o| !o.exact)
        .map(|o| o.gamma - o.tv_gap)
        .collect();
    if let Some(tightest) = slack.iter().cloned().reduce(f64::min) {
        println!("tightest approximate margin γ − gap: {tightest:.4}");
    }
    Ok(())
}
