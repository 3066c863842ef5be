//! Reduce the office thermal model to second order with a stabilizing
//! prefeedback, and inspect how well the reduction preserves the transfer
//! behaviour.

use gmdp::casedata::office_full;
use gmdp::reduction::{balanced_truncation, markov_parameters, prefeedback_gain};

fn main() -> gmdp::Result<()> {
    let office = office_full();

    let f = prefeedback_gain(&office, 0.02)?;
    println!("prefeedback gain: {:.5}", f);

    let reduced = balanced_truncation(&office, 2, Some(&f))?;
    println!(
        "hankel values: {}",
        reduced
            .hankel_values
            .iter()
            .map(|h| format!("{h:.3e}"))
            .collect::<Vec<_>>()
            .join("  ")
    );
    println!("reduced A:\n{:.4}", reduced.model.a);
    println!("reduced B: {:.4}", reduced.model.b.transpose());

    // transfer-level agreement for the kept dynamics
    let full_markov = markov_parameters(&office, 4);
    // the reduced model approximates the *stabilized* dynamics, so compare
    // against those
    let stabilized = gmdp::model::GaussianLtiGmdp::new(
        &office.a + &office.b * &f,
        office.b.clone(),
        office.b_w.clone(),
        office.c.clone(),
        office.init.clone(),
        None,
    )?;
    let stab_markov = markov_parameters(&stabilized, 4);
    let red_markov = markov_parameters(&reduced.model, 4);
    for (j, ((full, stab), red)) in
        full_markov.iter().zip(stab_markov.iter()).zip(red_markov.iter()).enumerate()
    {
        println!(
            "markov parameter {j}: |full| {:.4e}, |stabilized − reduced| {:.2e}",
            full.norm(),
            (stab - red).norm()
        );
    }
    Ok(())
}
