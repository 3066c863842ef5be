//! Dense numerical kernels: discrete Lyapunov/Sylvester/Riccati solvers,
//! chi-square quantiles, and the factorization utilities the rest of the
//! crate builds on.
//!
//! The equation solvers are written for the model sizes that show up in
//! control-oriented case studies (state dimensions up to ~10); they favour
//! reproducibility and assertable residuals over asymptotic performance.

use nalgebra::{DMatrix, DVector};

use crate::error::{GmdpError, Result};

pub type Mat = DMatrix<f64>;
pub type Col = DVector<f64>;

/// Largest eigenvalue magnitude of a (real, possibly non-symmetric) matrix.
pub fn spectral_radius(a: &Mat) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.max()
}

/// Upper-triangular factor `U` with `UᵀU = m` for symmetric positive definite `m`.
pub fn chol_upper(m: &Mat) -> Result<Mat> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| GmdpError::InvalidArgument("matrix not positive definite".into()))?;
    Ok(chol.l().transpose())
}

/// Rank-revealing factor `F` with `FFᵀ ≈ m` for symmetric PSD `m`; negative
/// eigenvalues below `-tol` are rejected, small ones are clipped to zero.
pub fn psd_factor(m: &Mat, tol: f64) -> Result<Mat> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    let mut cols = Vec::new();
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -tol * scale.max(1.0) {
            return Err(GmdpError::InvalidArgument(format!(
                "matrix not PSD: eigenvalue {lam:.3e}"
            )));
        }
        if lam > tol * scale.max(1.0) {
            cols.push(eig.eigenvectors.column(i) * lam.sqrt());
        }
    }
    if cols.is_empty() {
        return Ok(Mat::zeros(m.nrows(), 0));
    }
    Ok(Mat::from_columns(&cols))
}

/// Moore-Penrose pseudoinverse via SVD.
pub fn pinv(a: &Mat, rel_tol: f64) -> Mat {
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = rel_tol * max_sv.max(1e-300);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut sinv = Mat::zeros(vt.nrows(), u.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            sinv[(i, i)] = 1.0 / s;
        }
    }
    vt.transpose() * sinv * u.transpose()
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Mat::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij != 0.0 {
                out.view_mut((i * rb, j * cb), (rb, cb)).copy_from(&(b * aij));
            }
        }
    }
    out
}

/// Column-major vectorization.
pub fn vec_mat(a: &Mat) -> Col {
    Col::from_column_slice(a.as_slice())
}

pub fn unvec(v: &Col, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}

fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Solve `A X Aᵀ − X + Q = 0` by squaring (doubling) iteration.
///
/// Requires spectral radius of `A` strictly below one.
pub fn solve_discrete_lyapunov(a: &Mat, q: &Mat) -> Result<Mat> {
    if a.nrows() != a.ncols() || q.nrows() != q.ncols() || a.nrows() != q.nrows() {
        return Err(GmdpError::Dimension("lyapunov: A and Q must be square of equal size".into()));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 - 1e-9 {
        return Err(GmdpError::UnstableDynamics { rho });
    }
    let mut x = symmetrize(q);
    let mut ak = a.clone();
    for _ in 0..200 {
        let step = &ak * &x * ak.transpose();
        x += &step;
        ak = &ak * &ak;
        if ak.norm() < 1e-300 || step.norm() <= 1e-16 * x.norm().max(1e-300) {
            break;
        }
    }
    Ok(symmetrize(&x))
}

/// Stabilizing DARE solution together with the feedback gain.
#[derive(Debug, Clone)]
pub struct DareSolution {
    /// Stabilizing solution `X` of `X = AᵀXA − AᵀXB(Rc+BᵀXB)⁻¹BᵀXA + Qc`.
    pub x: Mat,
    /// Gain `F = −(Rc+BᵀXB)⁻¹BᵀXA`; the closed loop `A+BF` is stable.
    pub gain: Mat,
    /// Riccati residual of the returned solution.
    pub residual: f64,
}

fn dare_residual(a: &Mat, b: &Mat, qc: &Mat, rc: &Mat, x: &Mat) -> f64 {
    let btxb = rc + b.transpose() * x * b;
    let inv = match btxb.clone().try_inverse() {
        Some(m) => m,
        None => return f64::INFINITY,
    };
    let r = a.transpose() * x * a - x - a.transpose() * x * b * inv * b.transpose() * x * a + qc;
    r.norm() / (1.0 + x.norm())
}

/// Solve the discrete algebraic Riccati equation by structure-preserving
/// doubling, with a fixed-point fallback.
pub fn solve_dare(a: &Mat, b: &Mat, qc: &Mat, rc: &Mat) -> Result<DareSolution> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || qc.shape() != (n, n) || rc.shape() != (b.ncols(), b.ncols()) {
        return Err(GmdpError::Dimension("dare: inconsistent matrix dimensions".into()));
    }
    let rinv = rc
        .clone()
        .try_inverse()
        .ok_or_else(|| GmdpError::InvalidArgument("dare: Rc must be invertible (Rc ≻ 0)".into()))?;

    // structure-preserving doubling
    let mut ak = a.clone();
    let mut gk = b * &rinv * b.transpose();
    let mut hk = symmetrize(qc);
    let eye = Mat::identity(n, n);
    let mut best: Option<Mat> = None;
    for _ in 0..200 {
        let w = &eye + &gk * &hk;
        let lu = w.lu();
        let winv_a = match lu.solve(&ak) {
            Some(m) => m,
            None => break,
        };
        let winv_g = match lu.solve(&gk) {
            Some(m) => m,
            None => break,
        };
        let a_next = &ak * &winv_a;
        let g_next = &gk + &ak * winv_g * ak.transpose();
        let h_next = &hk + ak.transpose() * &hk * &winv_a;
        let delta = (&h_next - &hk).norm();
        ak = a_next;
        gk = symmetrize(&g_next);
        hk = symmetrize(&h_next);
        if delta <= 1e-14 * hk.norm().max(1e-300) {
            best = Some(hk.clone());
            break;
        }
    }
    let mut x = best.unwrap_or_else(|| hk.clone());

    if dare_residual(a, b, qc, rc, &x) > 1e-9 {
        // fixed-point fallback
        x = symmetrize(qc);
        let mut converged = false;
        for _ in 0..10_000 {
            let btxb = rc + b.transpose() * &x * b;
            let inv = btxb
                .try_inverse()
                .ok_or_else(|| GmdpError::NoConvergence("dare: Rc+BᵀXB singular".into()))?;
            let xn = a.transpose() * &x * a - a.transpose() * &x * b * inv * b.transpose() * &x * a + qc;
            let xn = symmetrize(&xn);
            let delta = (&xn - &x).norm();
            x = xn;
            if delta <= 1e-13 * x.norm().max(1e-300) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(GmdpError::NoConvergence(
                "dare: fixed-point iteration did not converge in 10^4 steps".into(),
            ));
        }
    }

    let residual = dare_residual(a, b, qc, rc, &x);
    if residual > 1e-8 {
        return Err(GmdpError::NoConvergence(format!(
            "dare: residual {residual:.3e} above 1e-8"
        )));
    }
    let btxb = rc + b.transpose() * &x * b;
    let gain = -(btxb
        .try_inverse()
        .ok_or_else(|| GmdpError::NoConvergence("dare: Rc+BᵀXB singular".into()))?
        * b.transpose()
        * &x
        * a);
    let rho = spectral_radius(&(a + b * &gain));
    if rho >= 1.0 {
        return Err(GmdpError::NoConvergence(format!(
            "dare: closed loop not stable (spectral radius {rho:.6})"
        )));
    }
    Ok(DareSolution { x, gain, residual })
}

/// Constrained least-squares solution of the model-matching equations
/// `P·A_i = A·P + B·Q` and `C·P = C_i`.
///
/// Among all `(P, Q, R)` satisfying the two constraints, minimizes
/// `‖B_w − P·B_wi‖_F² + ‖B·R − P·B_s‖_F²` over the affine solution set.
#[allow(clippy::too_many_arguments)]
pub fn solve_sylvester_ls(
    a: &Mat,
    b: &Mat,
    a_i: &Mat,
    c: &Mat,
    c_i: &Mat,
    b_w: &Mat,
    b_wi: &Mat,
    b_s: &Mat,
) -> Result<(Mat, Mat, Mat)> {
    let n = a.nrows();
    let ns = a_i.nrows();
    let m = b.ncols();
    let ms = b_s.ncols();
    let d = c.nrows();
    if a.ncols() != n || a_i.ncols() != ns || b.nrows() != n || c.ncols() != n {
        return Err(GmdpError::Dimension("sylvester: A/B/C dimensions inconsistent".into()));
    }
    if c_i.shape() != (d, ns) || b_w.nrows() != n || b_wi.nrows() != ns || b_wi.ncols() != b_w.ncols()
    {
        return Err(GmdpError::Dimension("sylvester: C_i/B_w/B_wi dimensions inconsistent".into()));
    }
    if b_s.nrows() != ns {
        return Err(GmdpError::Dimension("sylvester: B_s must have the reduced row count".into()));
    }

    let np = n * ns;
    let nq = m * ns;
    let nr = m * ms;
    let nvar = np + nq + nr;
    let eye_n = Mat::identity(n, n);
    let eye_ns = Mat::identity(ns, ns);
    let eye_ms = Mat::identity(ms, ms);

    // equality constraints E θ = f
    let n_eq = np + d * ns;
    let mut e = Mat::zeros(n_eq, nvar);
    let mut f = Col::zeros(n_eq);
    // vec(P A_i − A P − B Q) = 0
    let sylv_p = kron(&a_i.transpose(), &eye_n) - kron(&eye_ns, a);
    let sylv_q = -kron(&eye_ns, b);
    e.view_mut((0, 0), (np, np)).copy_from(&sylv_p);
    e.view_mut((0, np), (np, nq)).copy_from(&sylv_q);
    // vec(C P) = vec(C_i)
    let out_p = kron(&eye_ns, c);
    e.view_mut((np, 0), (d * ns, np)).copy_from(&out_p);
    f.rows_mut(np, d * ns).copy_from(&vec_mat(c_i));

    // objective ‖G θ − h‖²
    let n_obj = n * b_w.ncols() + n * ms;
    let mut g = Mat::zeros(n_obj, nvar);
    let mut h = Col::zeros(n_obj);
    // vec(P B_wi) ≈ vec(B_w)
    let gw = kron(&b_wi.transpose(), &eye_n);
    g.view_mut((0, 0), (n * b_w.ncols(), np)).copy_from(&gw);
    h.rows_mut(0, n * b_w.ncols()).copy_from(&vec_mat(b_w));
    // vec(B R − P B_s) ≈ 0
    let gp = -kron(&b_s.transpose(), &eye_n);
    let gr = kron(&eye_ms, b);
    g.view_mut((n * b_w.ncols(), 0), (n * ms, np)).copy_from(&gp);
    g.view_mut((n * b_w.ncols(), np + nq), (n * ms, nr)).copy_from(&gr);

    // equality-constrained least squares through the KKT system
    //   [GᵀG Eᵀ] [θ]   [Gᵀh]
    //   [E    0] [λ] = [f  ]
    // solved with a pseudoinverse so degenerate optima resolve to the
    // minimum-norm stationary point deterministically
    let mut kkt = Mat::zeros(nvar + n_eq, nvar + n_eq);
    kkt.view_mut((0, 0), (nvar, nvar)).copy_from(&(g.transpose() * &g));
    kkt.view_mut((0, nvar), (nvar, n_eq)).copy_from(&e.transpose());
    kkt.view_mut((nvar, 0), (n_eq, nvar)).copy_from(&e);
    let mut rhs = Col::zeros(nvar + n_eq);
    rhs.rows_mut(0, nvar).copy_from(&(g.transpose() * &h));
    rhs.rows_mut(nvar, n_eq).copy_from(&f);
    let sol = pinv(&kkt, 1e-12) * rhs;
    let theta = sol.rows(0, nvar).into_owned();

    let feas_res = (&e * &theta - &f).norm();
    if feas_res > 1e-8 * (1.0 + f.norm()) {
        let rank = e.clone().svd(false, false).rank(1e-11 * e.norm().max(1.0));
        return Err(GmdpError::Infeasible(format!(
            "output-matching constraint C·P = C_i unattainable: residual {feas_res:.3e}, \
             constraint rank {rank} of {n_eq} rows"
        )));
    }

    let p = unvec(&theta.rows(0, np).into_owned(), n, ns);
    let q = unvec(&theta.rows(np, nq).into_owned(), m, ns);
    let r = unvec(&theta.rows(np + nq, nr).into_owned(), m, ms);

    let sylv_res = (&p * a_i - a * &p - b * &q).norm();
    let out_res = (c * &p - c_i).norm();
    if sylv_res > 1e-8 * (1.0 + a.norm()) || out_res > 1e-8 * (1.0 + c_i.norm()) {
        return Err(GmdpError::Infeasible(format!(
            "sylvester solution residuals too large: dynamics {sylv_res:.3e}, output {out_res:.3e}"
        )));
    }
    Ok((p, q, r))
}

// ---------------------------------------------------------------------------
// special functions
// ---------------------------------------------------------------------------

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().abs().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + 7.5;
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
    }
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn reg_lower_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < s + 1.0 {
        // series expansion
        let mut sum = 1.0 / s;
        let mut term = sum;
        for n in 1..10_000 {
            term *= x / (s + n as f64);
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (sum * (-x + s * x.ln() - ln_gamma(s)).exp()).min(1.0)
    } else {
        1.0 - reg_upper_gamma_cf(s, x)
    }
}

/// Regularized upper incomplete gamma `Q(s, x)` for `x ≥ s + 1` (Lentz CF).
fn reg_upper_gamma_cf(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / 1e-300;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < 1e-300 {
            d = 1e-300;
        }
        c = b + an / c;
        if c.abs() < 1e-300 {
            c = 1e-300;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    ((-x + s * x.ln() - ln_gamma(s)).exp() * h).clamp(0.0, 1.0)
}

/// Regularized upper incomplete gamma `Q(s, x)`.
pub fn reg_upper_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < s + 1.0 {
        1.0 - reg_lower_gamma(s, x)
    } else {
        reg_upper_gamma_cf(s, x)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    if x >= 0.0 {
        1.0 - 0.5 * reg_upper_gamma(0.5, 0.5 * x * x).min(1.0)
    } else {
        0.5 * reg_upper_gamma(0.5, 0.5 * x * x)
    }
}

/// Standard normal survival function `1 − Φ(x)`, accurate in the far tail.
pub fn normal_sf(x: f64) -> f64 {
    normal_cdf(-x)
}

/// Chi-square inverse CDF: the `p`-quantile of the chi-square law with `k`
/// degrees of freedom.
pub fn chi_square_inv(k: usize, p: f64) -> Result<f64> {
    if k < 1 {
        return Err(GmdpError::InvalidArgument("chi_square_inv: k must be ≥ 1".into()));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(GmdpError::InvalidArgument(format!(
            "chi_square_inv: p = {p} outside [0, 1)"
        )));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let s = k as f64 / 2.0;
    let cdf = |x: f64| reg_lower_gamma(s, x / 2.0);
    // Wilson-Hilferty initial guess
    let kf = k as f64;
    let z = inverse_normal_cdf(p);
    let mut x = kf * (1.0 - 2.0 / (9.0 * kf) + z * (2.0 / (9.0 * kf)).sqrt()).powi(3);
    if !x.is_finite() || x <= 0.0 {
        x = kf;
    }
    // safeguarded Newton
    let (mut lo, mut hi) = (0.0_f64, kf.max(1.0));
    while cdf(hi) < p {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    for _ in 0..200 {
        let fx = cdf(x) - p;
        if fx.abs() <= 1e-14 {
            break;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let ln_pdf = (s - 1.0) * (x / 2.0).ln() - x / 2.0 - ln_gamma(s) - 2.0_f64.ln();
        let pdf = ln_pdf.exp();
        let step = if pdf > 1e-300 { fx / pdf } else { 0.0 };
        let mut xn = x - step;
        if !(xn > lo && xn < hi) || !xn.is_finite() {
            xn = 0.5 * (lo + hi);
        }
        if (xn - x).abs() <= 1e-13 * x.max(1.0) {
            x = xn;
            break;
        }
        x = xn;
    }
    Ok(x)
}

/// Inverse standard normal CDF (Acklam's rational approximation, refined by
/// one Halley step against [`normal_cdf`]).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "inverse_normal_cdf domain");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let plow = 0.02425;
    let mut x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // one Halley refinement
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x -= u / (1.0 + x * u / 2.0);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: usize, cols: usize, data: &[f64]) -> Mat {
        Mat::from_row_slice(rows, cols, data)
    }

    #[test]
    fn lyapunov_zero_a_returns_q() {
        let a = Mat::zeros(3, 3);
        let q = mat(3, 3, &[2.0, 0.1, 0.0, 0.1, 1.0, 0.0, 0.0, 0.0, 3.0]);
        let x = solve_discrete_lyapunov(&a, &q).unwrap();
        assert_relative_eq!(x, q, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_scalar_geometric_series() {
        let a = mat(1, 1, &[0.5]);
        let q = mat(1, 1, &[1.0]);
        let x = solve_discrete_lyapunov(&a, &q).unwrap();
        assert_relative_eq!(x[(0, 0)], 4.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn lyapunov_random_stable_residual() {
        use rand::Rng;
        let mut rng = crate::rng::SeedStream::new(11).stream(0);
        for _ in 0..20 {
            let raw = Mat::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let a = &raw * (0.9 / spectral_radius(&raw).max(1e-9));
            let qh = Mat::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let q = &qh * qh.transpose();
            let x = solve_discrete_lyapunov(&a, &q).unwrap();
            let res = (&a * &x * a.transpose() - &x + &q).norm();
            assert!(res <= 1e-10 * q.norm().max(1.0), "residual {res}");
            assert!((x.clone() - x.transpose()).norm() < 1e-12);
            // PSD when Q is PSD
            let eigs = x.symmetric_eigen().eigenvalues;
            assert!(eigs.min() > -1e-10);
        }
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = mat(1, 1, &[1.0]);
        let q = mat(1, 1, &[1.0]);
        assert!(matches!(
            solve_discrete_lyapunov(&a, &q),
            Err(GmdpError::UnstableDynamics { .. })
        ));
    }

    #[test]
    fn dare_scalar_one_step() {
        let sol = solve_dare(&mat(1, 1, &[0.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]))
            .unwrap();
        assert_relative_eq!(sol.x[(0, 0)], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.gain[(0, 0)], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn dare_scalar_golden_ratio() {
        let sol = solve_dare(&mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]), &mat(1, 1, &[1.0]))
            .unwrap();
        assert_relative_eq!(sol.x[(0, 0)], (1.0 + 5.0_f64.sqrt()) / 2.0, epsilon = 1e-8);
        assert!(sol.residual <= 1e-8);
    }

    #[test]
    fn dare_random_stabilizes() {
        use rand::Rng;
        let mut rng = crate::rng::SeedStream::new(5).stream(0);
        for _ in 0..10 {
            let raw = Mat::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
            let a = &raw * (0.95 / spectral_radius(&raw).max(1e-9));
            let b = Mat::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
            let q = Mat::identity(4, 4);
            let r = Mat::identity(2, 2) * 0.1;
            let sol = solve_dare(&a, &b, &q, &r).unwrap();
            assert!(spectral_radius(&(&a + &b * &sol.gain)) < 1.0);
            assert!(sol.residual <= 1e-8);
        }
    }

    #[test]
    fn sylvester_self_abstraction_is_identity() {
        let a = mat(3, 3, &[0.5, 0.1, 0.0, 0.0, 0.4, 0.2, 0.1, 0.0, 0.3]);
        let b = mat(3, 1, &[1.0, 0.5, 0.2]);
        let c = mat(1, 3, &[1.0, 0.0, 1.0]);
        let bw = mat(3, 2, &[0.1, 0.0, 0.0, 0.2, 0.05, 0.05]);
        let (p, q, r) = solve_sylvester_ls(&a, &b, &a, &c, &c, &bw, &bw, &b).unwrap();
        assert_relative_eq!(p, Mat::identity(3, 3), epsilon = 1e-7);
        assert!(q.norm() < 1e-7);
        assert_relative_eq!(r[(0, 0)], 1.0, epsilon = 1e-7);
    }

    #[test]
    fn sylvester_scalar() {
        let one = mat(1, 1, &[1.0]);
        let half = mat(1, 1, &[0.5]);
        let (p, q, _r) =
            solve_sylvester_ls(&half, &one, &half, &one, &one, &one, &one, &one).unwrap();
        assert_relative_eq!(p[(0, 0)], 1.0, epsilon = 1e-9);
        assert!(q[(0, 0)].abs() < 1e-9);
    }

    #[test]
    fn sylvester_infeasible_output_match() {
        // C = 0 cannot reproduce C_i = 1
        let a = mat(2, 2, &[0.5, 0.0, 0.0, 0.4]);
        let b = mat(2, 1, &[1.0, 1.0]);
        let c = mat(1, 2, &[0.0, 0.0]);
        let ci = mat(1, 1, &[1.0]);
        let ai = mat(1, 1, &[0.5]);
        let bw = mat(2, 1, &[0.1, 0.1]);
        let bwi = mat(1, 1, &[0.1]);
        let bs = mat(1, 1, &[1.0]);
        assert!(matches!(
            solve_sylvester_ls(&a, &b, &ai, &c, &ci, &bw, &bwi, &bs),
            Err(GmdpError::Infeasible(_))
        ));
    }

    #[test]
    fn chi_square_quantiles() {
        assert_eq!(chi_square_inv(2, 0.0).unwrap(), 0.0);
        assert_relative_eq!(chi_square_inv(2, 0.99).unwrap(), -2.0 * 0.01_f64.ln(), epsilon = 1e-9);
        assert_relative_eq!(chi_square_inv(1, 0.95).unwrap(), 3.841459, epsilon = 1e-5);
        assert!(chi_square_inv(2, 1.0).is_err());
        assert!(chi_square_inv(0, 0.5).is_err());
    }

    #[test]
    fn chi_square_inv_monotone_in_p() {
        for k in [1usize, 2, 3, 7] {
            let mut prev = -1.0;
            for i in 1..40 {
                let p = i as f64 / 40.0;
                let x = chi_square_inv(k, p).unwrap();
                assert!(x > prev, "k={k} p={p}");
                prev = x;
            }
        }
    }

    #[test]
    fn chi_square_roundtrip_against_gamma() {
        for k in [1usize, 2, 5, 11] {
            for &p in &[0.001, 0.3, 0.5, 0.9, 0.999] {
                let x = chi_square_inv(k, p).unwrap();
                let back = reg_lower_gamma(k as f64 / 2.0, x / 2.0);
                assert!((back - p).abs() <= 1e-10, "k={k} p={p} back={back}");
            }
        }
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_cdf(1.959963984540054), 0.975, epsilon = 1e-12);
        assert_relative_eq!(normal_sf(3.0), 1.3498980316300945e-3, epsilon = 1e-12);
        assert!(normal_sf(37.0) > 0.0);
        assert_eq!(normal_cdf(f64::INFINITY), 1.0);
        assert_eq!(normal_cdf(f64::NEG_INFINITY), 0.0);
    }

    #[test]
    fn pinv_reconstructs() {
        let a = mat(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let ap = pinv(&a, 1e-13);
        assert_relative_eq!(&a * &ap * &a, a, epsilon = 1e-10);
    }

    #[test]
    fn kron_shapes_and_values() {
        let a = mat(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Mat::identity(2, 2);
        let k = kron(&a, &b);
        assert_eq!(k.shape(), (4, 4));
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(2, 2)], 4.0);
        assert_eq!(k[(0, 2)], 2.0);
    }
}
