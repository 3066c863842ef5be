//! End-to-end office run: reduce, certify, grid-DP on the shrunk safe set,
//! refine the grid policy onto the five-state model, and validate the
//! two-sided probability bound by Monte Carlo.
//!
//! Uses a lighter configuration than the `demo office` command so it
//! finishes in a few seconds.

use gmdp::demo::{run_office, OfficeConfig};

fn main() -> gmdp::Result<()> {
    let cfg = OfficeConfig {
        dp_cells: vec![40, 40],
        mc_trials: 20_000,
        certify_samples: 20_000,
        ..Default::default()
    };
    let report = run_office(std::path::Path::new("out/office"), &cfg)?;

    println!("hankel values: {:?}", report.hankel_values.iter().map(|h| format!("{h:.2e}")).collect::<Vec<_>>());
    println!(
        "certified ε at δ = {:.0e}: norm bound {:.4}, S-procedure {:.4} (2-dof variant {:.4})",
        report.delta, report.epsilon_normbound, report.epsilon_sproc, report.epsilon_sproc_dof2
    );
    println!("certificate sampling check: {}", if report.certificate_sampling_ok { "ok" } else { "FALSIFIED" });
    println!(
        "grid value at the origin {:.4} (discretization error bound {:.2})",
        report.dp_value_at_origin, report.dp_error_bound
    );
    println!(
        "abstract stays in the shrunk band {:.4}; refined concrete stays in the full band {:.4}",
        report.abstract_safe_fraction, report.concrete_safe_fraction
    );
    println!(
        "refinement guarantee: concrete ≥ {:.4} − γ {:.4} = {:.4} → {}",
        report.abstract_safe_fraction,
        report.gamma,
        report.lower_bound,
        if report.sandwich_pass { "HOLDS" } else { "VIOLATED" }
    );
    println!("artifacts in out/office/");
    Ok(())
}
