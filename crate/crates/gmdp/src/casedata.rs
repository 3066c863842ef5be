//! Embedded models for the two bundled demos: a two-zone thermal model with
//! its deterministic mean abstraction, and a five-state office thermal model
//! with reference reduced-order data (reduced dynamics, interface gains,
//! relation matrix, prefeedback gain, and a trade-off reference row).

use crate::linalg::{Col, Mat};
use crate::model::{GaussianLtiGmdp, LtiInit};

/// Two-zone thermal model: zone temperatures plus ambient deviation, white
/// noise through `F`, outputs the two zone temperatures.
pub fn two_zone_concrete() -> GaussianLtiGmdp {
    let a = Mat::from_row_slice(
        3,
        3,
        &[
            0.8725, 0.0625, 0.0375, //
            0.0625, 0.8775, 0.0250, //
            0.0, 0.0, 0.9900,
        ],
    );
    let b = Mat::from_row_slice(3, 2, &[0.0650, 0.0, 0.0, 0.60, 0.0, 0.0]);
    let f = Mat::from_row_slice(3, 3, &[0.05, -0.02, 0.0, -0.02, 0.05, 0.0, 0.0, 0.0, 0.1]);
    let c = Mat::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    GaussianLtiGmdp::new(
        a,
        b,
        f,
        c,
        LtiInit::Point(Col::from_row_slice(&[16.0, 14.0, -5.0])),
        None,
    )
    .expect("two-zone model data is consistent")
}

/// Deterministic mean abstraction of the two-zone model: the two zone
/// temperatures only, no noise, identity output.
pub fn two_zone_abstract() -> GaussianLtiGmdp {
    let a = Mat::from_row_slice(2, 2, &[0.8725, 0.0625, 0.0625, 0.8775]);
    let b = Mat::from_row_slice(2, 2, &[0.0650, 0.0, 0.0, 0.60]);
    GaussianLtiGmdp::new(
        a,
        b,
        Mat::zeros(2, 0),
        Mat::identity(2, 2),
        LtiInit::Point(Col::from_row_slice(&[16.0, 14.0])),
        None,
    )
    .expect("two-zone abstraction data is consistent")
}

/// Five-state office thermal model (internal temperatures plus a first-order
/// weather filter), scaled heat input, three normalized noise channels,
/// output = inner-air temperature deviation.
pub fn office_full() -> GaussianLtiGmdp {
    let a = Mat::from_row_slice(
        5,
        5,
        &[
            0.4487, 0.216, 0.2164, 0.1186, 2.96e-4, //
            0.216, 0.1778, 0.3719, 0.2334, 8.789e-4, //
            0.09639, 0.1657, 0.6569, 0.08082, 1.928e-4, //
            0.005234, 0.0103, 8.007e-3, 0.9708, 0.005667, //
            0.0, 0.0, 0.0, 0.0, 0.7788,
        ],
    );
    let b = Mat::from_row_slice(5, 1, &[0.1326, 0.3725, 1.029, 4.309e-3, 0.0]);
    let b_w = Mat::from_row_slice(
        5,
        3,
        &[
            0.006918, 0.06596, 0.0, //
            0.01372, 0.1308, 0.0, //
            0.004712, 0.04492, 0.0, //
            2.485e-4, 0.002369, 0.0, //
            0.0, 0.0, 0.6273,
        ],
    );
    let c = Mat::from_row_slice(1, 5, &[0.0, 1.0, 0.0, 0.0, 0.0]);
    GaussianLtiGmdp::new(a, b, b_w, c, LtiInit::Point(Col::zeros(5)), None)
        .expect("office model data is consistent")
}

/// Reference second-order reduction of the prefeedback-stabilized office
/// model, with the interface and relation data tuned for it.
pub struct OfficeReference {
    pub a_i: Mat,
    pub b_i: Mat,
    pub b_wi: Mat,
    pub c_i: Mat,
    pub r: f64,
    pub q: Mat,
    pub k: Mat,
    pub p: Mat,
    pub m: Mat,
    /// Stabilizing prefeedback gain magnitudes as commonly printed with the
    /// opposite sign convention; `A − B·f_gain` is stable.
    pub f_gain: Mat,
    /// δ grid of the reference trade-off row.
    pub delta_grid: Vec<f64>,
    /// Reference ε at each δ for the reduced model below.
    pub epsilon_row: Vec<f64>,
    /// Input-freedom bound `u_s² ≤ c1`.
    pub c1: f64,
}

pub fn office_reference() -> OfficeReference {
    OfficeReference {
        a_i: Mat::from_row_slice(2, 2, &[0.0, -0.05267, 0.125, -0.1081]),
        b_i: Mat::from_row_slice(2, 1, &[0.8917, 0.3725]),
        b_wi: Mat::from_row_slice(2, 3, &[0.01925, 0.1835, 0.002356, 0.01372, 0.1308, 3.229e-5]),
        c_i: Mat::from_row_slice(1, 2, &[0.0, 1.0]),
        r: 1.004,
        q: Mat::from_row_slice(1, 2, &[-1.857, 1.406]),
        k: Mat::from_row_slice(1, 5, &[-0.3553, -0.2931, -0.65, -0.4739, -0.002547]),
        p: Mat::from_row_slice(
            5,
            2,
            &[
                -0.6186, 0.2348, //
                0.0, 1.0, //
                2.562, -2.314, //
                -0.009378, 0.001329, //
                0.0, 0.0,
            ],
        ),
        m: Mat::from_row_slice(
            5,
            5,
            &[
                0.2416, 0.06342, 0.3159, 0.1299, 0.00106, //
                0.06342, 1.772, 0.07267, 0.02663, 0.0007664, //
                0.3159, 0.07267, 0.4191, 0.1728, 0.001395, //
                0.1299, 0.02663, 0.1728, 0.08168, 0.000351, //
                0.00106, 0.0007664, 0.001395, 0.000351, 0.0001456,
            ],
        ),
        f_gain: Mat::from_row_slice(1, 5, &[0.48456, 0.39865, 0.85352, 0.56387, 0.0024252]),
        delta_grid: vec![
            1.0,
            10f64.powf(-1.0 / 3.0),
            10f64.powf(-2.0 / 3.0),
            1e-1,
            10f64.powf(-4.0 / 3.0),
            10f64.powf(-5.0 / 3.0),
            1e-2,
            10f64.powf(-7.0 / 3.0),
            10f64.powf(-8.0 / 3.0),
            1e-3,
        ],
        epsilon_row: vec![
            0.01445, 0.1037, 0.132, 0.1534, 0.1714, 0.1871, 0.2014, 0.2145, 0.2267, 0.2381,
        ],
        c1: 0.04,
    }
}

/// The reference reduced model as a standalone gMDP.
pub fn office_reduced_reference() -> GaussianLtiGmdp {
    let r = office_reference();
    GaussianLtiGmdp::new(
        r.a_i,
        r.b_i,
        r.b_wi,
        r.c_i,
        LtiInit::Point(Col::zeros(2)),
        Some(r.c1),
    )
    .expect("reference reduced model data is consistent")
}
