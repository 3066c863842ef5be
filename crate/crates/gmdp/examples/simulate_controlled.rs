//! Build a finite chain and a Gaussian LTI model, execute both under simple
//! strategies, and export a trace CSV.

use gmdp::io::{write_trace_csv, Provenance};
use gmdp::linalg::{Col, Mat};
use gmdp::model::{
    execute_controlled, FiniteGmdp, FnStrategy, GaussianLtiGmdp, InputPoint, LtiInit,
    MarkovPolicy, ModelRef, Output, OutputMetric,
};

fn main() -> gmdp::Result<()> {
    // a lazy/busy two-state chain under a single action
    let chain = FiniteGmdp::new(
        vec![Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.3, 0.7])],
        Col::from_row_slice(&[1.0, 0.0]),
        vec![Output::Label(0), Output::Label(1)],
        OutputMetric::Discrete,
    )?;
    let mut policy = MarkovPolicy::stationary_deterministic(&[0, 0], 1);
    let trace = execute_controlled(ModelRef::Finite(&chain), &mut policy, 10, 7)?;
    let labels: Vec<String> = trace
        .outputs
        .iter()
        .map(|o| match o {
            Output::Label(l) => l.to_string(),
            _ => unreachable!(),
        })
        .collect();
    println!("finite chain outputs: {}", labels.join(" "));

    // a controlled scalar Gaussian model regulated toward the origin
    let lti = GaussianLtiGmdp::new(
        Mat::from_row_slice(1, 1, &[0.9]),
        Mat::from_row_slice(1, 1, &[1.0]),
        Mat::from_row_slice(1, 1, &[0.2]),
        Mat::identity(1, 1),
        LtiInit::Point(Col::from_row_slice(&[2.0])),
        None,
    )?;
    let mut controller = FnStrategy::new(|_, x| {
        let x = x.as_vector().unwrap();
        InputPoint::Vector(Col::from_row_slice(&[-0.5 * x[0]]))
    });
    let trace = execute_controlled(ModelRef::Lti(&lti), &mut controller, 20, 7)?;
    let path = std::path::Path::new("out/example_trace.csv");
    write_trace_csv(path, &Provenance { seed: 7, config_hash: 0 }, &trace)?;
    println!("LTI trace written to {}", path.display());
    println!(
        "final state {:.4}",
        trace.states.last().unwrap().as_vector().unwrap()[0]
    );
    Ok(())
}
