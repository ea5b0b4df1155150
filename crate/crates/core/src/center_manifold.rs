//! Polynomial approximation of the center manifold `x_i = C_i(y)` of the
//! compact steady system at the origin.
//!
//! Near the origin, with `lambda = 0`,
//!
//! ```text
//! x_i' = -x_i + y_i^2/2 - (y_j - y_k)^2/2 + x_i |x|^2
//! y_i' = y_i (x_i - x_j - x_k + |x|^2)
//! ```
//!
//! Invariance of the graph `x_i = C_i(y)` gives, order by order,
//! `C = [quad] + [C |C|^2] - [grad C . y']`, where everything on the right at
//! degree `m` involves only lower-degree coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::{integrate, Crossing, EventFn, StepControl, Stop};

pub const MIN_DEGREE: u32 = 2;
pub const MAX_DEGREE: u32 = 4;
pub const VALIDITY_RADIUS: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum CenterError {
    #[error("degree {0} outside the supported range {MIN_DEGREE}..={MAX_DEGREE}")]
    Degree(u32),
    #[error("initial point |y0| = {0} outside the validity ball")]
    OutsideBall(f64),
}

/// Polynomial in three variables, keyed by exponents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly3(pub BTreeMap<[u32; 3], f64>);

impl Poly3 {
    pub fn monomial(e: [u32; 3], c: f64) -> Self {
        let mut m = BTreeMap::new();
        m.insert(e, c);
        Poly3(m)
    }

    pub fn degree_of(e: &[u32; 3]) -> u32 {
        e[0] + e[1] + e[2]
    }

    fn add_term(&mut self, e: [u32; 3], c: f64) {
        let v = self.0.entry(e).or_insert(0.0);
        *v += c;
        if *v == 0.0 {
            self.0.remove(&e);
        }
    }

    pub fn add(&self, o: &Poly3) -> Poly3 {
        let mut out = self.clone();
        for (e, c) in &o.0 {
            out.add_term(*e, *c);
        }
        out
    }

    pub fn scale(&self, k: f64) -> Poly3 {
        Poly3(self.0.iter().map(|(e, c)| (*e, c * k)).filter(|(_, c)| *c != 0.0).collect())
    }

    /// Product with terms above `max_deg` dropped.
    pub fn mul(&self, o: &Poly3, max_deg: u32) -> Poly3 {
        let mut out = Poly3::default();
        for (a, ca) in &self.0 {
            for (b, cb) in &o.0 {
                let e = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                if Poly3::degree_of(&e) <= max_deg {
                    out.add_term(e, ca * cb);
                }
            }
        }
        out
    }

    pub fn diff(&self, var: usize) -> Poly3 {
        let mut out = Poly3::default();
        for (e, c) in &self.0 {
            if e[var] > 0 {
                let mut d = *e;
                d[var] -= 1;
                out.add_term(d, c * e[var] as f64);
            }
        }
        out
    }

    pub fn homogeneous(&self, m: u32) -> Poly3 {
        Poly3(self.0.iter().filter(|(e, _)| Poly3::degree_of(e) == m).map(|(e, c)| (*e, *c)).collect())
    }

    /// Substitute `(y1, y2, y3) -> (y_p[0], y_p[1], y_p[2])`.
    pub fn permute(&self, p: [usize; 3]) -> Poly3 {
        let mut out = Poly3::default();
        for (e, c) in &self.0 {
            let mut f = [0; 3];
            for k in 0..3 {
                f[p[k]] += e[k];
            }
            out.add_term(f, *c);
        }
        out
    }

    pub fn eval(&self, y: &[f64; 3]) -> f64 {
        self.0.iter().map(|(e, c)| c * y[0].powi(e[0] as i32) * y[1].powi(e[1] as i32) * y[2].powi(e[2] as i32)).sum()
    }

    pub fn coeff(&self, e: [u32; 3]) -> f64 {
        self.0.get(&e).copied().unwrap_or(0.0)
    }
}

/// Graph of the center manifold to a given degree. `c` is `C_1`; the other
/// two are index permutations of it.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterPoly {
    pub degree: u32,
    pub c: Poly3,
}

#[derive(Serialize, Deserialize)]
struct CenterPolyJson {
    degree: u32,
    coeffs: BTreeMap<String, f64>,
}

pub fn exponent_key(e: &[u32; 3]) -> String {
    format!("{}{}{}", e[0], e[1], e[2])
}

impl Serialize for CenterPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CenterPolyJson { degree: self.degree, coeffs: self.c.0.iter().map(|(e, c)| (exponent_key(e), *c)).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CenterPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let j = CenterPolyJson::deserialize(d)?;
        let mut c = Poly3::default();
        for (k, v) in j.coeffs {
            let digits: Vec<u32> = k.chars().filter_map(|ch| ch.to_digit(10)).collect();
            if digits.len() != 3 || k.len() != 3 {
                return Err(serde::de::Error::custom(format!("bad exponent key {k:?}")));
            }
            c.add_term([digits[0], digits[1], digits[2]], v);
        }
        Ok(CenterPoly { degree: j.degree, c })
    }
}

impl CenterPoly {
    /// `[C_1, C_2, C_3]` with `C_2(y) = C(y2, y3, y1)` and `C_3(y) = C(y3, y1, y2)`.
    pub fn components(&self) -> [Poly3; 3] {
        // variable k of C_1 becomes y_{p[k]}
        [self.c.clone(), self.c.permute([1, 2, 0]), self.c.permute([2, 0, 1])]
    }

    pub fn eval(&self, y: &[f64; 3]) -> [f64; 3] {
        let c = &self.c;
        [c.eval(y), c.eval(&[y[1], y[2], y[0]]), c.eval(&[y[2], y[0], y[1]])]
    }

    /// Coefficient list sorted by degree then exponent.
    pub fn coefficients(&self) -> Vec<([u32; 3], f64)> {
        let mut v: Vec<_> = self.c.0.iter().map(|(e, c)| (*e, *c)).collect();
        v.sort_by_key(|(e, _)| (Poly3::degree_of(e), std::cmp::Reverse(*e)));
        v
    }

    /// Largest coefficient mismatch under `e2 <-> e3`.
    pub fn symmetry_defect(&self) -> f64 {
        self.c.0.iter().map(|(e, c)| (c - self.c.coeff([e[0], e[2], e[1]])).abs()).fold(0.0, f64::max)
    }
}

fn quad_poly(i: usize) -> Poly3 {
    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
    let e = |a: usize, b: usize| {
        let mut x = [0; 3];
        x[a] += 1;
        x[b] += 1;
        x
    };
    let mut p = Poly3::monomial(e(i, i), 0.5);
    p = p.add(&Poly3::monomial(e(j, j), -0.5));
    p = p.add(&Poly3::monomial(e(k, k), -0.5));
    p.add(&Poly3::monomial(e(j, k), 1.0))
}

/// `y_i'` on the graph, as polynomials truncated at `max_deg`.
fn y_dot(cs: &[Poly3; 3], max_deg: u32) -> [Poly3; 3] {
    let sq = cs.iter().fold(Poly3::default(), |acc, c| acc.add(&c.mul(c, max_deg)));
    std::array::from_fn(|i| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let mut yi = [0; 3];
        yi[i] = 1;
        let g = cs[i].add(&cs[j].scale(-1.0)).add(&cs[k].scale(-1.0)).add(&sq);
        Poly3::monomial(yi, 1.0).mul(&g, max_deg)
    })
}

pub fn solve_center_poly(degree: u32) -> Result<CenterPoly, CenterError> {
    if !(MIN_DEGREE..=MAX_DEGREE).contains(&degree) {
        return Err(CenterError::Degree(degree));
    }
    let quad = quad_poly(0);
    let mut cp = CenterPoly { degree, c: Poly3::default() };
    for m in MIN_DEGREE..=degree {
        let cs = cp.components();
        let sq = cs.iter().fold(Poly3::default(), |acc, c| acc.add(&c.mul(c, m)));
        let yd = y_dot(&cs, m);
        let mut grad_dot = Poly3::default();
        for (v, ydv) in yd.iter().enumerate() {
            grad_dot = grad_dot.add(&cs[0].diff(v).mul(ydv, m));
        }
        let rhs = quad.add(&cs[0].mul(&sq, m)).add(&grad_dot.scale(-1.0));
        cp.c = cp.c.add(&rhs.homogeneous(m));
    }
    Ok(cp)
}

/// Full six-dimensional field in `(x, y)` near the origin, `lambda = 0`.
pub fn full_field(x: &[f64; 3], y: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let q = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
    let mut dx = [0.0; 3];
    let mut dy = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        dx[i] = crate::state::quad(y[i], y[j], y[k]) - x[i] + x[i] * q;
        dy[i] = y[i] * ((x[i] - (x[j] + x[k])) + q);
    }
    (dx, dy)
}

/// `y'` restricted to the polynomial graph.
pub fn reduced_field(poly: &CenterPoly, y: &[f64; 3]) -> [f64; 3] {
    full_field(&poly.eval(y), y).1
}

/// `x' - grad C . y'` evaluated on the graph at `y`.
pub fn invariance_defect(poly: &CenterPoly, y: &[f64; 3]) -> f64 {
    let comps = poly.components();
    let x = poly.eval(y);
    let (dx, dy) = full_field(&x, y);
    (0..3)
        .map(|i| {
            let g: f64 = (0..3).map(|v| comps[i].diff(v).eval(y) * dy[v]).sum();
            (dx[i] - g).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedTrajectory {
    pub s: Vec<f64>,
    pub y: Vec<[f64; 3]>,
    /// The run left the validity ball before the horizon.
    pub left_ball: bool,
}

pub fn reduced_flow(poly: &CenterPoly, y0: [f64; 3], horizon: f64, radius: f64) -> Result<ReducedTrajectory, CenterError> {
    let n0 = y0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if n0 > radius {
        return Err(CenterError::OutsideBall(n0));
    }
    let field = |_: f64, y: &[f64; 3]| reduced_field(poly, y);
    let evs = [EventFn {
        g: Box::new(move |_, y: &[f64; 3]| radius - y.iter().fold(0.0f64, |m, v| m.max(v.abs()))),
        crossing: Crossing::Falling,
        terminal: true,
    }];
    let sol = integrate(field, 0.0, y0, horizon, &StepControl::default(), &evs, None);
    Ok(ReducedTrajectory { left_ball: matches!(sol.stop, Stop::Event(_)), s: sol.t, y: sol.y })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiaxialExpansionReport {
    /// Coefficient of `y_i^2` in `C_i` on the slice `y_j = y_k`.
    pub ci_yi2: f64,
    /// Largest deviation of the quadratic part of `C_i(y_i, y_j, y_j)` from `y_i^2/2`.
    pub ci_quadratic_deviation: f64,
    /// Largest deviation of the quadratic part of `C_j(y_i, y_j, y_j)` from `y_i y_j - y_i^2/2`.
    pub cj_quadratic_deviation: f64,
    /// Restrictions to the slice, as `(a, b) -> coeff` of `y_i^a y_j^b`.
    pub ci_slice: Vec<((u32, u32), f64)>,
    pub cj_slice: Vec<((u32, u32), f64)>,
}

/// Restrict to `y_2 = y_3`: `y_1^a y_2^b y_3^c -> y_i^a y_j^(b+c)`.
fn slice(p: &Poly3) -> BTreeMap<(u32, u32), f64> {
    let mut out = BTreeMap::new();
    for (e, c) in &p.0 {
        *out.entry((e[0], e[1] + e[2])).or_insert(0.0) += c;
    }
    out
}

pub fn biaxial_expansion_check(poly: &CenterPoly) -> BiaxialExpansionReport {
    let comps = poly.components();
    let ci = slice(&comps[0]);
    let cj = slice(&comps[1]);
    let g = |m: &BTreeMap<(u32, u32), f64>, k: (u32, u32)| m.get(&k).copied().unwrap_or(0.0);
    let ci_dev = [(g(&ci, (2, 0)) - 0.5).abs(), g(&ci, (1, 1)).abs(), g(&ci, (0, 2)).abs()];
    let cj_dev = [(g(&cj, (2, 0)) + 0.5).abs(), (g(&cj, (1, 1)) - 1.0).abs(), g(&cj, (0, 2)).abs()];
    let list = |m: BTreeMap<(u32, u32), f64>| m.into_iter().filter(|(_, c)| *c != 0.0).collect();
    BiaxialExpansionReport {
        ci_yi2: g(&ci, (2, 0)),
        ci_quadratic_deviation: ci_dev.into_iter().fold(0.0, f64::max),
        cj_quadratic_deviation: cj_dev.into_iter().fold(0.0, f64::max),
        ci_slice: list(ci),
        cj_slice: list(cj),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_coefficients() {
        let p = solve_center_poly(2).unwrap();
        assert_eq!(p.c.coeff([2, 0, 0]), 0.5);
        assert_eq!(p.c.coeff([0, 2, 0]), -0.5);
        assert_eq!(p.c.coeff([0, 0, 2]), -0.5);
        assert_eq!(p.c.coeff([0, 1, 1]), 1.0);
        assert_eq!(p.c.0.len(), 4);
        assert_eq!(p.symmetry_defect(), 0.0);
    }

    #[test]
    fn cubic_terms_vanish() {
        let p = solve_center_poly(3).unwrap();
        assert!(p.c.homogeneous(3).0.is_empty());
    }

    #[test]
    fn quartic_matches_coefficient_matching() {
        let p = solve_center_poly(4).unwrap();
        let expect = [
            ([4, 0, 0], -1.5),
            ([3, 1, 0], 1.0),
            ([3, 0, 1], 1.0),
            ([1, 3, 0], -1.0),
            ([1, 0, 3], -1.0),
            ([1, 2, 1], 1.0),
            ([1, 1, 2], 1.0),
            ([0, 4, 0], 1.5),
            ([0, 0, 4], 1.5),
            ([0, 3, 1], -2.0),
            ([0, 1, 3], -2.0),
            ([0, 2, 2], 1.0),
        ];
        let q = p.c.homogeneous(4);
        assert_eq!(q.0.len(), expect.len());
        for (e, c) in expect {
            assert!((q.coeff(e) - c).abs() < 1e-14, "{e:?}");
        }
        assert_eq!(p.symmetry_defect(), 0.0);
    }

    #[test]
    fn degree_range() {
        assert_eq!(solve_center_poly(1), Err(CenterError::Degree(1)));
        assert_eq!(solve_center_poly(5), Err(CenterError::Degree(5)));
    }

    #[test]
    fn invariance_defect_order() {
        for d in [2, 4] {
            let p = solve_center_poly(d).unwrap();
            let dir = [0.3, -0.7, 0.5];
            let at = |r: f64| invariance_defect(&p, &[r * dir[0], r * dir[1], r * dir[2]]);
            let order = (at(0.02) / at(0.01)).log2();
            // cubic terms vanish, so the quadratic graph is already good to third order
            let expect = if d == 2 { 4.0 } else { (d + 1) as f64 };
            assert!(order > expect - 0.3, "degree {d}: order {order}");
        }
    }

    #[test]
    fn biaxial_slice() {
        let r = biaxial_expansion_check(&solve_center_poly(4).unwrap());
        assert_eq!(r.ci_yi2, 0.5);
        assert_eq!(r.ci_quadratic_deviation, 0.0);
        assert_eq!(r.cj_quadratic_deviation, 0.0);
    }

    #[test]
    fn reduced_flow_properties() {
        let p = solve_center_poly(4).unwrap();
        let t = reduced_flow(&p, [0.0, 0.0, 0.0], 10.0, VALIDITY_RADIUS).unwrap();
        assert!(t.y.iter().all(|y| *y == [0.0; 3]));
        let a = 0.05;
        let t = reduced_flow(&p, [0.02, a, a], 200.0, VALIDITY_RADIUS).unwrap();
        assert!(!t.left_ball);
        for (y, w) in t.y.iter().zip(t.y.windows(2)) {
            assert_eq!(y[1], y[2]);
            assert!(w[1][1] <= w[0][1] + 1e-15);
            assert!(y[1] > 0.0 && y[1] <= a);
        }
        assert!(reduced_flow(&p, [0.2, 0.0, 0.0], 1.0, VALIDITY_RADIUS).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = solve_center_poly(4).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"200\":0.5"));
        let back: CenterPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
