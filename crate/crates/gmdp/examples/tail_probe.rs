//! Emit Gaussian-tail and quantile values on a fixed probe set, for
//! cross-checking the quadrature and special functions against independent
//! implementations.

use gmdp::coupling::gaussian_ball_exceedance;
use gmdp::linalg::{chi_square_inv, Mat};

fn main() -> gmdp::Result<()> {
    println!("# kind,args,value");
    for (k, p) in [(1, 0.5), (2, 0.95), (3, 0.99), (5, 0.999), (7, 0.01)] {
        println!("chi2inv,{k};{p},{:.12e}", chi_square_inv(k, p)?);
    }
    let probes: Vec<(Vec<f64>, f64)> = vec![
        (vec![1.0], 1.3),
        (vec![0.25], 0.9),
        (vec![2.0, 0.5], 1.7),
        (vec![0.0049, 0.0009], 0.16),
        (vec![1.0, 1.0, 1.0], 2.0),
        (vec![3.0, 2.0, 1.0], 2.2360679774997896),
        (vec![5.0, 0.01], 3.0),
    ];
    for (diag, r) in probes {
        let n = diag.len();
        let cov = Mat::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 });
        let spec: Vec<String> = diag.iter().map(|v| format!("{v}")).collect();
        println!(
            "exceedance,{};{r},{:.12e}",
            spec.join("|"),
            gaussian_ball_exceedance(&cov, r)?
        );
    }
    Ok(())
}
