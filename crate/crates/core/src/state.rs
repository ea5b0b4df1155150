//! State spaces, vector fields, chart changes and conserved quantities.
//!
//! Two charts are used. The primal chart carries `(xi, L1, L2, L3, R1, R2, R3)`
//! with arclength `r` as time; the compact chart carries
//! `(Lcal, X1, X2, X3, Y1, Y2, Y3)` with `s` as time, where `ds = xi dr`.
//!
//! Sums are grouped as `a1 + (a2 + a3)` and the quadratic curvature term is
//! evaluated in factored form, so that swapping indices 2 and 3 commutes with
//! every field bit for bit and large, nearly equal `Y` entries do not cancel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seven components in either chart.
pub type State7 = [f64; 7];

/// Tolerance on the unit-sphere constraint for shooting directions.
pub const SPHERE_TOL: f64 = 1e-12;

/// Launches with `|alpha|` at or below this are run on the Einstein branch.
pub const EINSTEIN_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("non-finite state component")]
    NonFinite,
    #[error("xi = {0} is not positive; the compact chart is undefined there")]
    ChartBoundary(f64),
    #[error("Lcal = {0} is not positive; cannot return to the primal chart")]
    BadLcal(f64),
    #[error("invalid shooting parameters: {0}")]
    BadParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Primal,
    Compact,
}

/// Discrete orbit data and shooting direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootParams {
    pub n: u32,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ShootParams {
    pub fn new(n: u32, alpha: f64, beta: f64, gamma: f64) -> Result<Self, DomainError> {
        let p = ShootParams { n, lambda: 0.0, alpha, beta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn biaxial(n: u32, alpha: f64, beta: f64) -> Result<Self, DomainError> {
        Self::new(n, alpha, beta, 0.0)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self, DomainError> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |m: String| Err(DomainError::BadParams(m));
        if self.n == 0 {
            return bad("n must be a positive integer".into());
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} is not finite"));
            }
        }
        let norm = self.alpha * self.alpha + self.beta * self.beta + self.gamma * self.gamma;
        if (norm - 1.0).abs() > SPHERE_TOL {
            return bad(format!("alpha^2 + beta^2 + gamma^2 = {norm}, expected 1"));
        }
        if self.beta < 0.0 {
            return bad("beta must be non-negative".into());
        }
        if self.alpha < -EINSTEIN_TOL {
            return bad("alpha must be non-negative".into());
        }
        if self.gamma != 0.0 && self.n != 4 {
            return bad(format!("gamma != 0 requires n = 4 (got n = {})", self.n));
        }
        Ok(())
    }

    pub fn is_biaxial(&self) -> bool {
        self.gamma == 0.0
    }

    pub fn is_einstein(&self) -> bool {
        self.alpha.abs() <= EINSTEIN_TOL
    }

    /// The same launch reflected by the (2 3) index swap.
    pub fn mirrored(&self) -> Self {
        ShootParams { gamma: -self.gamma, ..*self }
    }
}

/// First-change variables at arclength `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimalState {
    pub r: f64,
    pub xi: f64,
    pub l: [f64; 3],
    pub rr: [f64; 3],
}

impl PrimalState {
    pub fn from_array(r: f64, v: &State7) -> Self {
        PrimalState { r, xi: v[0], l: [v[1], v[2], v[3]], rr: [v[4], v[5], v[6]] }
    }

    pub fn to_array(&self) -> State7 {
        [self.xi, self.l[0], self.l[1], self.l[2], self.rr[0], self.rr[1], self.rr[2]]
    }

    /// u' = L1 + L2 + L3 - xi.
    pub fn u_prime(&self) -> f64 {
        trace(&self.l) - self.xi
    }

    pub fn is_finite(&self) -> bool {
        self.r.is_finite() && self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Compactified variables at time `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactState {
    pub s: f64,
    pub lcal: f64,
    pub x: [f64; 3],
    pub y: [f64; 3],
}

impl CompactState {
    pub fn from_array(s: f64, v: &State7) -> Self {
        CompactState { s, lcal: v[0], x: [v[1], v[2], v[3]], y: [v[4], v[5], v[6]] }
    }

    pub fn to_array(&self) -> State7 {
        [self.lcal, self.x[0], self.x[1], self.x[2], self.y[0], self.y[1], self.y[2]]
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.to_array().iter().all(|x| x.is_finite())
    }
}

#[inline]
fn trace(a: &[f64; 3]) -> f64 {
    a[0] + (a[1] + a[2])
}

#[inline]
fn sumsq(a: &[f64; 3]) -> f64 {
    a[0] * a[0] + (a[1] * a[1] + a[2] * a[2])
}

/// `a_i^2/2 - (a_j - a_k)^2/2`, factored. Symmetric in `j, k` bit for bit.
#[inline]
pub fn quad(ai: f64, aj: f64, ak: f64) -> f64 {
    0.5 * (((ai - aj) + ak) * ((ai - ak) + aj))
}

const OTHERS: [(usize, usize); 3] = [(1, 2), (0, 2), (0, 1)];

fn check_finite(v: &State7) -> Result<(), DomainError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(DomainError::NonFinite)
    }
}

/// Primal vector field on a raw state vector. No checks.
pub fn primal_field(v: &State7, lambda: f64) -> State7 {
    let xi = v[0];
    let l = [v[1], v[2], v[3]];
    let r = [v[4], v[5], v[6]];
    let mut d = [0.0; 7];
    d[0] = -sumsq(&l) - lambda;
    for (i, &(j, k)) in OTHERS.iter().enumerate() {
        d[1 + i] = -xi * l[i] + quad(r[i], r[j], r[k]) - lambda;
        d[4 + i] = r[i] * (l[i] - (l[j] + l[k]));
    }
    d
}

/// Primal field on the Einstein branch: `xi` is replaced by `L1 + L2 + L3` and
/// `xi'` by the sum of the `L` derivatives, so `xi - sum L` is preserved exactly
/// by any Runge-Kutta step.
pub fn primal_field_einstein(v: &State7, lambda: f64) -> State7 {
    let l = [v[1], v[2], v[3]];
    let r = [v[4], v[5], v[6]];
    let xe = trace(&l);
    let mut d = [0.0; 7];
    for (i, &(j, k)) in OTHERS.iter().enumerate() {
        d[1 + i] = -xe * l[i] + quad(r[i], r[j], r[k]) - lambda;
        d[4 + i] = r[i] * (l[i] - (l[j] + l[k]));
    }
    d[0] = d[1] + (d[2] + d[3]);
    d
}

/// Compact vector field on a raw state vector. No checks.
pub fn compact_field(v: &State7, lambda: f64) -> State7 {
    let lc = v[0];
    let x = [v[1], v[2], v[3]];
    let y = [v[4], v[5], v[6]];
    let ll = lambda * lc * lc;
    let q = sumsq(&x) + ll;
    let mut d = [0.0; 7];
    d[0] = lc * q;
    for (i, &(j, k)) in OTHERS.iter().enumerate() {
        d[1 + i] = quad(y[i], y[j], y[k]) - x[i] - ll + x[i] * q;
        d[4 + i] = y[i] * ((x[i] - (x[j] + x[k])) + q);
    }
    d
}

/// Compact field on the Einstein branch; preserves `X1 + X2 + X3` exactly.
pub fn compact_field_einstein(v: &State7, lambda: f64) -> State7 {
    let lc = v[0];
    let x = [v[1], v[2], v[3]];
    let y = [v[4], v[5], v[6]];
    let ll = lambda * lc * lc;
    let sx = trace(&x);
    let mut w = [0.0; 3];
    for (i, &(j, k)) in OTHERS.iter().enumerate() {
        w[i] = -sx * x[i] + quad(y[i], y[j], y[k]) - ll;
    }
    let sw = trace(&w);
    let mut d = [0.0; 7];
    d[0] = -lc * sw;
    for (i, &(j, k)) in OTHERS.iter().enumerate() {
        d[1 + i] = w[i] - x[i] * (sw / sx);
        d[4 + i] = y[i] * (x[i] - (x[j] + x[k])) - y[i] * sw;
    }
    d
}

/// Biaxial primal field on `(xi, L1, L2, R1, R2)`.
pub fn biaxial_primal_field(v: &[f64; 5], lambda: f64) -> [f64; 5] {
    let [xi, l1, l2, r1, r2] = *v;
    [
        -(l1 * l1 + (l2 * l2 + l2 * l2)) - lambda,
        -xi * l1 + quad(r1, r2, r2) - lambda,
        -xi * l2 + quad(r2, r1, r2) - lambda,
        r1 * (l1 - (l2 + l2)),
        // -R2 L1, in the grouping used by the full field
        r2 * (l2 - (l1 + l2)),
    ]
}

pub fn biaxial_primal_field_einstein(v: &[f64; 5], lambda: f64) -> [f64; 5] {
    let [_, l1, l2, r1, r2] = *v;
    let xe = l1 + (l2 + l2);
    let d1 = -xe * l1 + quad(r1, r2, r2) - lambda;
    let d2 = -xe * l2 + quad(r2, r1, r2) - lambda;
    [d1 + (d2 + d2), d1, d2, r1 * (l1 - (l2 + l2)), r2 * (l2 - (l1 + l2))]
}

/// Biaxial compact field on `(Lcal, X1, X2, Y1, Y2)`.
pub fn biaxial_compact_field(v: &[f64; 5], lambda: f64) -> [f64; 5] {
    let [lc, x1, x2, y1, y2] = *v;
    let ll = lambda * lc * lc;
    let q = (x1 * x1 + (x2 * x2 + x2 * x2)) + ll;
    [
        lc * q,
        quad(y1, y2, y2) - x1 - ll + x1 * q,
        quad(y2, y1, y2) - x2 - ll + x2 * q,
        y1 * ((x1 - (x2 + x2)) + q),
        y2 * ((x2 - (x1 + x2)) + q),
    ]
}

pub fn biaxial_compact_field_einstein(v: &[f64; 5], lambda: f64) -> [f64; 5] {
    let [lc, x1, x2, y1, y2] = *v;
    let ll = lambda * lc * lc;
    let sx = x1 + (x2 + x2);
    let w1 = -sx * x1 + quad(y1, y2, y2) - ll;
    let w2 = -sx * x2 + quad(y2, y1, y2) - ll;
    let sw = w1 + (w2 + w2);
    [
        -lc * sw,
        w1 - x1 * (sw / sx),
        w2 - x2 * (sw / sx),
        y1 * (x1 - (x2 + x2)) - y1 * sw,
        y2 * (x2 - (x1 + x2)) - y2 * sw,
    ]
}

pub fn embed_biaxial(v: &[f64; 5]) -> State7 {
    [v[0], v[1], v[2], v[2], v[3], v[4], v[4]]
}

pub fn project_biaxial(v: &State7) -> [f64; 5] {
    [v[0], v[1], v[2], v[4], v[5]]
}

/// The (2 3) index swap in either chart.
pub fn swap23(v: &State7) -> State7 {
    [v[0], v[1], v[3], v[2], v[4], v[6], v[5]]
}

pub fn rhs_primal(state: &PrimalState, lambda: f64) -> Result<State7, DomainError> {
    let v = state.to_array();
    check_finite(&v)?;
    Ok(primal_field(&v, lambda))
}

pub fn rhs_compact(state: &CompactState, lambda: f64) -> Result<State7, DomainError> {
    let v = state.to_array();
    check_finite(&v)?;
    Ok(compact_field(&v, lambda))
}

pub fn rhs_biaxial_primal(v: &[f64; 5], lambda: f64) -> Result<[f64; 5], DomainError> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(DomainError::NonFinite);
    }
    Ok(biaxial_primal_field(v, lambda))
}

pub fn rhs_biaxial_compact(v: &[f64; 5], lambda: f64) -> Result<[f64; 5], DomainError> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(DomainError::NonFinite);
    }
    Ok(biaxial_compact_field(v, lambda))
}

/// `Lcal = 1/xi`, `X = L/xi`, `Y = R/xi`. The caller supplies the `s` clock.
pub fn primal_to_compact(p: &PrimalState, s: f64) -> Result<CompactState, DomainError> {
    check_finite(&p.to_array())?;
    if p.xi <= 0.0 {
        return Err(DomainError::ChartBoundary(p.xi));
    }
    let lc = 1.0 / p.xi;
    Ok(CompactState {
        s,
        lcal: lc,
        x: p.l.map(|a| a * lc),
        y: p.rr.map(|a| a * lc),
    })
}

pub fn compact_to_primal(c: &CompactState, r: f64) -> Result<PrimalState, DomainError> {
    check_finite(&c.to_array())?;
    if c.lcal <= 0.0 {
        return Err(DomainError::BadLcal(c.lcal));
    }
    let xi = 1.0 / c.lcal;
    Ok(PrimalState {
        r,
        xi,
        l: c.x.map(|a| a * xi),
        rr: c.y.map(|a| a * xi),
    })
}

/// Conserved and residual quantities at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedReport {
    /// Biaxial conserved quantity; `None` off the biaxial subspace.
    pub c: Option<f64>,
    /// Einstein residual.
    pub z: f64,
    /// `Z` divided by `xi^2 + |L|^2 + |R|^2`.
    pub z_scaled: f64,
    /// `xi - (L1 + L2 + L3) = -u'`.
    pub xi_minus_trace: f64,
}

fn biaxial_within(l: &[f64; 3], r: &[f64; 3], scale: f64) -> bool {
    (l[1] - l[2]).abs() + (r[1] - r[2]).abs() < 1e-9 * (1.0 + scale)
}

pub fn conserved_quantities(p: &PrimalState, lambda: f64) -> ConservedReport {
    let (l, r, xi) = (p.l, p.rr, p.xi);
    let norm2 = xi * xi + sumsq(&l) + sumsq(&r);
    let c = biaxial_within(&l, &r, norm2.sqrt()).then(|| {
        2.0 * r[0] * r[1] - 0.5 * r[0] * r[0] + l[0] * l[0] + 2.0 * l[1] * l[1] - xi * xi
    });
    let mut s = 0.0;
    for (i, &(j, k)) in OTHERS.iter().enumerate() {
        s += quad(r[i], r[j], r[k]) + l[i] * l[i];
    }
    let z = s - 2.0 * lambda - xi * xi;
    ConservedReport {
        c,
        z,
        z_scaled: if norm2 > 0.0 { z / norm2 } else { z },
        xi_minus_trace: xi - trace(&l),
    }
}

/// Same quantities from a compact state, in primal units.
pub fn conserved_quantities_compact(cs: &CompactState, lambda: f64) -> ConservedReport {
    let (x, y, lc) = (cs.x, cs.y, cs.lcal);
    let l2 = lc * lc;
    let norm2 = 1.0 + sumsq(&x) + sumsq(&y);
    let c = biaxial_within(&x, &y, norm2.sqrt())
        .then(|| (2.0 * y[0] * y[1] - 0.5 * y[0] * y[0] + x[0] * x[0] + 2.0 * x[1] * x[1] - 1.0) / l2);
    let mut s = 0.0;
    for (i, &(j, k)) in OTHERS.iter().enumerate() {
        s += quad(y[i], y[j], y[k]) + x[i] * x[i];
    }
    let zl = s - 2.0 * lambda * l2 - 1.0;
    ConservedReport {
        c,
        z: zl / l2,
        z_scaled: zl / norm2,
        xi_minus_trace: (1.0 - trace(&x)) / lc,
    }
}

/// `E = max(Y2 - Y1, Y3 - Y1)`; the same sign is obtained from `R`.
pub fn e_value(y: &[f64; 3]) -> f64 {
    (y[1] - y[0]).max(y[2] - y[0])
}
