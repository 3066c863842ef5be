//! Chain certificates through transitivity: a probability-slack-only step
//! composed with an output-error-only step yields a combined (ε, δ) bound.

use gmdp::simrel::{
    analytic_shared_noise_relation, compose_transitive, gamma_horizon, SimRelCertificate,
};

fn main() -> gmdp::Result<()> {
    // step 1: a noise truncation carries probability slack only
    let base = analytic_shared_noise_relation(0.6, 1.0, 0.5)?;
    let truncation = SimRelCertificate {
        delta: 0.05,
        epsilon: 0.0,
        abstract_sig: 1,
        concrete_sig: 2,
        ..base.clone()
    };
    // step 2: dropping the truncated noise entirely costs output error only
    let noiseless = SimRelCertificate {
        delta: 0.0,
        epsilon: base.epsilon,
        abstract_sig: 2,
        concrete_sig: 3,
        ..base.clone()
    };

    let combined = compose_transitive(&truncation, &noiseless)?;
    println!(
        "composed certificate: ε = {:.3}, δ = {:.3}",
        combined.epsilon, combined.delta
    );
    for n in [1usize, 5, 10] {
        println!(
            "horizon {n:>2}: probability envelope γ = {:.4}",
            gamma_horizon(combined.delta, n)
        );
    }

    // composing with an exact certificate changes nothing
    let exact = SimRelCertificate {
        delta: 0.0,
        epsilon: 0.0,
        abstract_sig: 3,
        concrete_sig: 4,
        ..base
    };
    let same = compose_transitive(&combined, &exact)?;
    println!(
        "after composing with an exact step: ε = {:.3}, δ = {:.3}",
        same.epsilon, same.delta
    );
    Ok(())
}
