//! Grid safety value iteration on a scalar model: compute the probability of
//! staying in a band for six steps, extract the maximizing policy, and
//! cross-check the value against a Monte-Carlo run of that policy.

use gmdp::linalg::{Col, Mat};
use gmdp::model::{GaussianLtiGmdp, LtiInit, ModelRef};
use gmdp::safety::{
    decorrelate, grid_to_strategy, value_iteration_safety, Grid, OutputBox,
};
use gmdp::validate::monte_carlo_safety;

fn main() -> gmdp::Result<()> {
    // x⁺ = 0.9 x + u + 0.3 w, safe band |x| ≤ 1
    let model = GaussianLtiGmdp::new(
        Mat::from_row_slice(1, 1, &[0.9]),
        Mat::from_row_slice(1, 1, &[1.0]),
        Mat::from_row_slice(1, 1, &[0.3]),
        Mat::identity(1, 1),
        LtiInit::Point(Col::zeros(1)),
        None,
    )?;
    let dec = decorrelate(&model)?;
    let grid = Grid::new(vec![-10.0], vec![10.0], vec![401])?;
    let safe = OutputBox::symmetric(&[1.0]);
    let inputs: Vec<Col> =
        (-2..=2).map(|i| Col::from_row_slice(&[0.15 * i as f64])).collect();

    let vf = value_iteration_safety(&model, &grid, &safe, &inputs, 6)?;
    let origin = grid.cell_of(&(&dec.l_inv * Col::zeros(1))).unwrap();
    println!(
        "value at the origin: {:.4} (grid error bound {:.4})",
        vf.values[0][origin], vf.error_bound
    );

    let strategy = grid_to_strategy(&vf, &grid, &dec, &inputs);
    let mc = monte_carlo_safety(ModelRef::Lti(&model), &strategy, &safe, 6, 100_000, 1)?;
    println!(
        "Monte-Carlo under the extracted policy: {:.4} (95% interval [{:.4}, {:.4}])",
        mc.estimate, mc.wilson.0, mc.wilson.1
    );
    println!(
        "difference {:.4} within bound {:.4}",
        (vf.values[0][origin] - mc.estimate).abs(),
        vf.error_bound + 3.0 * mc.std_error()
    );
    Ok(())
}
