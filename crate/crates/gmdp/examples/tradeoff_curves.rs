//! ε(δ) trade-off curves for the office pair: the closed-form norm bound
//! against the S-procedure multiplier search, at two disturbance quantiles.

use gmdp::casedata::{office_full, office_reduced_reference, office_reference};
use gmdp::linalg::Mat;
use gmdp::simrel::{tradeoff_normbound, tradeoff_sprocedure, ErrorSystem, LtiInterface};

fn main() -> gmdp::Result<()> {
    let office = office_full();
    let reduced = office_reduced_reference();
    let r = office_reference();
    let interface = LtiInterface {
        r: Mat::from_row_slice(1, 1, &[r.r]),
        q: r.q.clone(),
        k: r.k.clone(),
        p: r.p.clone(),
    };
    let err = ErrorSystem::build(&office, &reduced, &interface, &r.m)?;
    let (alpha, beta, rho) = err.gains();
    println!("error-system gains: α = {alpha:.4}, β = {beta:.4}, ρ = {rho:.4}");

    let nb = tradeoff_normbound(&err, &r.delta_grid, r.c1, 3)?;
    let sp3 = tradeoff_sprocedure(&err, &r.delta_grid, r.c1, 3)?;
    let sp2 = tradeoff_sprocedure(&err, &r.delta_grid, r.c1, 2)?;

    println!("{:>10}  {:>10}  {:>10}  {:>10}  {:>10}", "delta", "normbound", "sproc(3)", "sproc(2)", "reference");
    for (i, &d) in r.delta_grid.iter().enumerate() {
        println!(
            "{:>10.5}  {:>10.4}  {:>10.4}  {:>10.4}  {:>10.4}",
            d,
            nb.epsilon_at(d).unwrap(),
            sp3.epsilon_at(d).unwrap(),
            sp2.epsilon_at(d).unwrap(),
            r.epsilon_row[i],
        );
    }
    Ok(())
}
