//! Couplings of finite distributions: the minimal-δ lifting LP, the maximal
//! (γ-)coupling, and the block-mass shortcut for equivalence partitions.

use gmdp::coupling::{
    gamma_coupling, min_delta_lifting, quotient_tv, Block, EquivalencePartition,
};
use gmdp::linalg::Col;

fn main() -> gmdp::Result<()> {
    let p = Col::from_row_slice(&[0.5, 0.3, 0.2]);
    let q = Col::from_row_slice(&[0.4, 0.4, 0.2]);

    // identity relation: the minimal δ is the total-variation distance
    let diag: Vec<Vec<bool>> = (0..3).map(|i| (0..3).map(|j| i == j).collect()).collect();
    let c = min_delta_lifting(&p, &q, &diag)?;
    println!("minimal δ over the identity relation: {:.4}", c.delta);
    println!("coupling matrix:\n{:.4}", c.w);

    // a coarser relation lowers δ
    let coarse = vec![
        vec![true, true, false],
        vec![true, true, false],
        vec![false, false, true],
    ];
    println!(
        "minimal δ over a coarser relation: {:.4}",
        min_delta_lifting(&p, &q, &coarse)?.delta
    );

    // the maximal coupling puts the common mass on the diagonal
    let g = gamma_coupling(&p, &q)?;
    println!("maximal coupling off-diagonal mass (= TV): {:.4}", g.delta);

    // partition route: block-mass discrepancies equal the LP optimum on the
    // induced relation
    let part = EquivalencePartition::new(
        vec![
            Block { left: vec![0, 1], right: vec![0, 1] },
            Block { left: vec![2], right: vec![2] },
        ],
        3,
        3,
    )?;
    let tv_blocks = quotient_tv(&p, &q, &part)?;
    let lp = min_delta_lifting(&p, &q, &part.induced_mask())?.delta;
    println!("block-mass bound {tv_blocks:.4} vs LP on the induced mask {lp:.4}");
    Ok(())
}
