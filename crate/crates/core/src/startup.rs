//! Series launch off the singular orbit.
//!
//! Near `r = 0` the primal system has a regular singular point. Writing the
//! solution as a pole part plus a correction `eta`, the correction satisfies a
//! linear system whose matrix `A = P D P^-1` is known in closed form; the first
//! order term is fixed by `K` on every eigendirection except the two with
//! eigenvalue 1, which carry the free shooting data.

use nalgebra::{DMatrix, DVector, SMatrix, SVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::state::{embed_biaxial, PrimalState, ShootParams, State7};

pub type Mat7 = SMatrix<f64, 7, 7>;
pub type Vec7 = SVector<f64, 7>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaunchError {
    #[error("triaxial launch needs n = 4 (got n = {0})")]
    NeedsN4(u32),
    #[error("biaxial launch needs gamma = 0 (got {0})")]
    NotBiaxial(f64),
    #[error("epsilon = {0} outside (0, 0.01]")]
    BadEpsilon(f64),
    #[error(transparent)]
    Params(#[from] crate::state::DomainError),
}

/// Largest admissible launch radius.
pub const MAX_EPSILON: f64 = 0.01;

/// Eigenvalues of the singular linearization, in the column order of `P`.
pub const EIGENVALUES: [f64; 7] = [-2.0, -2.0, -1.0, -1.0, 0.0, 1.0, 1.0];

/// Column of `P` carrying the alpha-matching freedom.
pub const ALPHA_COLUMN: usize = 5;
/// Column of `P` carrying beta (the R1 slope).
pub const BETA_COLUMN: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SingularLinearization {
    pub a: Mat7,
    pub k: Vec7,
    pub d: Mat7,
    pub p: Mat7,
    pub pinv: Mat7,
}

const H: f64 = 0.5;
const Q: f64 = 0.25;

#[rustfmt::skip]
const A_ROWS: [f64; 49] = [
    0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    -1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, -1.0, 0.0, H, H, -H,
    0.0, 0.0, 0.0, -1.0, H, -H, H,
    0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
    0.0, -H, H, -H, 0.0, -1.0, 0.0,
    0.0, -H, -H, H, 0.0, 0.0, -1.0,
];

#[rustfmt::skip]
const P_ROWS: [f64; 49] = [
    1.0, 1.0, 0.0, 0.0, 0.0, 8.0, 0.0,
    1.0, 1.0, 0.0, 0.0, 0.0, -4.0, 0.0,
    H, -H, 0.0, 1.0, -1.0, 0.0, Q,
    -H, H, 0.0, 1.0, 1.0, 0.0, Q,
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    0.0, 1.0, 1.0, 0.0, -1.0, 1.0, 0.0,
    1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0,
];

#[rustfmt::skip]
const PINV_ROWS: [f64; 49] = [
    1.0 / 6.0, 1.0 / 3.0, Q, -Q, 0.0, -Q, Q,
    1.0 / 6.0, 1.0 / 3.0, -Q, Q, 0.0, Q, -Q,
    -Q, -Q, 0.0, 0.0, 0.0, H, H,
    0.0, 0.0, H, H, -Q, 0.0, 0.0,
    0.0, 0.0, -Q, Q, 0.0, -Q, Q,
    1.0 / 12.0, -1.0 / 12.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
];

pub fn build_linearization(lambda: f64, gamma: f64) -> SingularLinearization {
    let g2 = 2.0 * gamma * gamma;
    SingularLinearization {
        a: Mat7::from_row_slice(&A_ROWS),
        k: Vec7::from_column_slice(&[-lambda - g2, -lambda - g2, -lambda, -lambda, 0.0, g2, g2]),
        d: Mat7::from_diagonal(&Vec7::from_column_slice(&EIGENVALUES)),
        p: Mat7::from_row_slice(&P_ROWS),
        pinv: Mat7::from_row_slice(&PINV_ROWS),
    }
}

/// Eigen-coordinates `c` of the first order correction, so that the launched
/// state is `S(eps) + eps * P c`.
pub fn first_order_coeffs(lin: &SingularLinearization, alpha: f64, beta: f64) -> Vec7 {
    let pk = lin.pinv * lin.k;
    let mut c = Vec7::zeros();
    for i in 0..7 {
        let dii = lin.d[(i, i)];
        if dii != 1.0 {
            c[i] = pk[i] / (1.0 - dii);
        }
    }
    c[BETA_COLUMN] = beta;
    // alpha = lim (xi - L1 - L2 - L3)/r is affine in the free column
    let e = lin.p * c;
    let current = e[0] - e[1] - e[2] - e[3];
    let col = lin.p.column(ALPHA_COLUMN);
    let slope = col[0] - col[1] - col[2] - col[3];
    c[ALPHA_COLUMN] = (alpha - current) / slope;
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesLaunch {
    pub params: ShootParams,
    pub epsilon: f64,
    /// First order coefficient of the correction, in state coordinates.
    pub eta_slope: State7,
    /// The same in eigen-coordinates (triaxial launches only).
    pub eigen_coeffs: Option<State7>,
    pub state_at_eps: PrimalState,
}

fn check_eps(eps: f64) -> Result<(), LaunchError> {
    if eps > 0.0 && eps <= MAX_EPSILON {
        Ok(())
    } else {
        Err(LaunchError::BadEpsilon(eps))
    }
}

/// Pole part plus order-zero part of the triaxial ansatz.
fn leading_part(eps: f64, gamma: f64) -> State7 {
    let inv = 1.0 / eps;
    [inv, inv, gamma, -gamma, 0.0, 0.5 * inv + gamma, 0.5 * inv - gamma]
}

fn project_einstein(mut v: State7) -> State7 {
    v[0] = v[1] + (v[2] + v[3]);
    v
}

pub fn launch_triaxial(params: &ShootParams, epsilon: f64) -> Result<SeriesLaunch, LaunchError> {
    params.validate()?;
    if params.n != 4 {
        return Err(LaunchError::NeedsN4(params.n));
    }
    check_eps(epsilon)?;
    let alpha = if params.is_einstein() { 0.0 } else { params.alpha };
    let lin = build_linearization(params.lambda, params.gamma);
    let c = first_order_coeffs(&lin, alpha, params.beta);
    let eta = lin.p * c;
    let lead = leading_part(epsilon, params.gamma);
    let mut v = [0.0; 7];
    for i in 0..7 {
        v[i] = lead[i] + epsilon * eta[i];
    }
    if params.is_einstein() {
        v = project_einstein(v);
    }
    Ok(SeriesLaunch {
        params: *params,
        epsilon,
        eta_slope: eta.into(),
        eigen_coeffs: Some(c.into()),
        state_at_eps: PrimalState::from_array(epsilon, &v),
    })
}

/// Jacobian of the biaxial field at the pole coefficient `(1, 1, 0, 0, 2/n)`.
fn biaxial_pole_jacobian(n: u32) -> SMatrix<f64, 5, 5> {
    let w = 2.0 / n as f64;
    #[rustfmt::skip]
    let rows = [
        0.0, -2.0, 0.0, 0.0, 0.0,
        -1.0, -1.0, 0.0, 0.0, 0.0,
        0.0, 0.0, -1.0, w, 0.0,
        0.0, 0.0, 0.0, 1.0, 0.0,
        0.0, -w, 0.0, 0.0, -1.0,
    ];
    SMatrix::<f64, 5, 5>::from_row_slice(&rows)
}

/// First order slope of the biaxial correction: `(I - A) eta = K` bordered by
/// the two conditions fixing alpha and beta.
pub fn biaxial_slope(n: u32, lambda: f64, alpha: f64, beta: f64) -> [f64; 5] {
    let a = biaxial_pole_jacobian(n);
    let mut m = DMatrix::<f64>::zeros(7, 5);
    for i in 0..5 {
        for j in 0..5 {
            m[(i, j)] = if i == j { 1.0 } else { 0.0 } - a[(i, j)];
        }
    }
    // alpha = lim (xi - L1 - 2 L2)/r, beta = lim R1/r
    for (j, v) in [1.0, -1.0, -2.0, 0.0, 0.0].iter().enumerate() {
        m[(5, j)] = *v;
    }
    m[(6, 3)] = 1.0;
    let rhs = DVector::from_column_slice(&[-lambda, -lambda, -lambda, 0.0, 0.0, alpha, beta]);
    let svd = m.svd(true, true);
    let sol = svd.solve(&rhs, 1e-14).expect("bordered system has full column rank");
    [sol[0], sol[1], sol[2], sol[3], sol[4]]
}

pub fn launch_biaxial(params: &ShootParams, epsilon: f64) -> Result<SeriesLaunch, LaunchError> {
    params.validate()?;
    if params.gamma != 0.0 {
        return Err(LaunchError::NotBiaxial(params.gamma));
    }
    check_eps(epsilon)?;
    let alpha = if params.is_einstein() { 0.0 } else { params.alpha };
    let eta = biaxial_slope(params.n, params.lambda, alpha, params.beta);
    let inv = 1.0 / epsilon;
    let pole = [inv, inv, 0.0, 0.0, 2.0 * inv / params.n as f64];
    let mut v5 = [0.0; 5];
    for i in 0..5 {
        v5[i] = pole[i] + epsilon * eta[i];
    }
    let mut v = embed_biaxial(&v5);
    if params.is_einstein() {
        v = project_einstein(v);
    }
    Ok(SeriesLaunch {
        params: *params,
        epsilon,
        eta_slope: embed_biaxial(&eta),
        eigen_coeffs: None,
        state_at_eps: PrimalState::from_array(epsilon, &v),
    })
}

/// Biaxial launches go through the reduced series; n = 4 with gamma != 0
/// through the full one.
pub fn launch(params: &ShootParams, epsilon: f64) -> Result<SeriesLaunch, LaunchError> {
    if params.is_biaxial() {
        launch_biaxial(params, epsilon)
    } else {
        launch_triaxial(params, epsilon)
    }
}

/// Shooting data read back from a state: `((xi - sum L)/r, R1/r, (L2 - L3)/2)`.
pub fn recovered_direction(p: &PrimalState) -> (f64, f64, f64) {
    let trace = p.l[0] + (p.l[1] + p.l[2]);
    ((p.xi - trace) / p.r, p.rr[0] / p.r, 0.5 * (p.l[1] - p.l[2]))
}
