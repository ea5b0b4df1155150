//! Metric profiles `(r, f1, f2, f3, u')`, the closed-form Ricci-flat
//! references, and a finite-difference residual of the second-order soliton
//! equations used as an independent check on the first-order systems.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::Trajectory;
use crate::state::PrimalState;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("R_{index} = {value} <= 0 at sample {sample}: metric not reconstructible")]
    Reconstruction { sample: usize, index: usize, value: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("r = {r} outside the domain of the {what} metric")]
    Domain { what: &'static str, r: f64 },
    #[error("profile has no samples with r below {0}")]
    NoSmallR(f64),
    #[error("sample radii must be strictly increasing")]
    NotIncreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub r: f64,
    pub f: [f64; 3],
    pub u_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricProfile {
    pub samples: Vec<ProfileSample>,
    pub n: u32,
    pub lambda: f64,
}

/// `f_i = (R_j R_k)^(-1/2)`.
pub fn f_from_r(rr: &[f64; 3]) -> [f64; 3] {
    [(rr[1] * rr[2]).sqrt().recip(), (rr[0] * rr[2]).sqrt().recip(), (rr[0] * rr[1]).sqrt().recip()]
}

/// `R_i = f_i / (f_j f_k)`.
pub fn r_from_f(f: &[f64; 3]) -> [f64; 3] {
    [f[0] / (f[1] * f[2]), f[1] / (f[0] * f[2]), f[2] / (f[0] * f[1])]
}

pub fn profile_from_states(states: &[PrimalState], n: u32, lambda: f64) -> Result<MetricProfile, GeometryError> {
    let mut samples = Vec::with_capacity(states.len());
    for (k, p) in states.iter().enumerate() {
        if let Some(i) = (0..3).find(|&i| !(p.rr[i] > 0.0)) {
            return Err(GeometryError::Reconstruction { sample: k, index: i + 1, value: p.rr[i] });
        }
        samples.push(ProfileSample { r: p.r, f: f_from_r(&p.rr), u_prime: p.u_prime() });
    }
    Ok(MetricProfile { samples, n, lambda })
}

/// Profile at every sample of a trajectory that maps back to the primal chart.
pub fn reconstruct_profile(traj: &Trajectory) -> Result<MetricProfile, GeometryError> {
    let states: Vec<PrimalState> = traj.samples.iter().filter_map(|s| s.to_primal()).collect();
    profile_from_states(&states, traj.params.n, traj.params.lambda)
}

/// Finite-difference weights for derivatives `0..=m` at `x0` on nodes `xs`.
pub fn fornberg(x0: f64, xs: &[f64], m: usize) -> Vec<Vec<f64>> {
    let np = xs.len();
    let mut c = vec![vec![0.0; np]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..np {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max: f64,
    /// Max over interior samples for the `u''` equation and the three `f_i`
    /// equations.
    pub per_equation: [f64; 4],
    pub worst_r: f64,
}

const STENCIL: usize = 5;

/// Residuals of the four second-order equations at the interior samples,
/// using five-point stencils (two samples at each end are skipped).
pub fn soliton_residual_report(profile: &MetricProfile, lambda: f64) -> Result<ResidualReport, GeometryError> {
    let s = &profile.samples;
    if s.len() < STENCIL {
        return Err(GeometryError::TooFewSamples { need: STENCIL, got: s.len() });
    }
    if s.windows(2).any(|w| !(w[1].r > w[0].r)) {
        return Err(GeometryError::NotIncreasing);
    }
    let h = STENCIL / 2;
    let mut per = [0.0f64; 4];
    let mut worst = (0.0f64, s[h].r);
    for c in h..s.len() - h {
        let nodes: Vec<f64> = s[c - h..=c + h].iter().map(|p| p.r).collect();
        let w = fornberg(s[c].r, &nodes, 2);
        let d = |vals: &dyn Fn(&ProfileSample) -> f64, k: usize| -> f64 {
            s[c - h..=c + h].iter().zip(&w[k]).map(|(p, wk)| wk * vals(p)).sum()
        };
        let f = s[c].f;
        let f1: [f64; 3] = std::array::from_fn(|i| d(&|p| p.f[i], 1));
        let f2: [f64; 3] = std::array::from_fn(|i| d(&|p| p.f[i], 2));
        let upp = d(&|p| p.u_prime, 1);
        let up = s[c].u_prime;
        let prod2 = (f[0] * f[1] * f[2]).powi(2);
        let mut res = [0.0; 4];
        res[0] = -(f2[0] / f[0] + f2[1] / f[1] + f2[2] / f[2]) + upp - lambda;
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let li = f1[i] / f[i];
            let dd = f[j] * f[j] - f[k] * f[k];
            res[i + 1] = -f2[i] / f[i] + li * (up - f1[j] / f[j] - f1[k] / f[k])
                + (f[i].powi(4) - dd * dd) / (2.0 * prod2)
                - lambda;
        }
        for e in 0..4 {
            per[e] = per[e].max(res[e].abs());
            if res[e].abs() > worst.0 {
                worst = (res[e].abs(), s[c].r);
            }
        }
    }
    Ok(ResidualReport { max: worst.0, per_equation: per, worst_r: worst.1 })
}

pub fn soliton_residual(profile: &MetricProfile, lambda: f64) -> Result<f64, GeometryError> {
    soliton_residual_report(profile, lambda).map(|r| r.max)
}

/// Returns `(g_rr, f1^2, f2^2)` with `f3 = f2`; defined for `r > 2`.
pub fn taub_bolt(r: f64) -> Result<(f64, f64, f64), GeometryError> {
    if !(r > 2.0) {
        return Err(GeometryError::Domain { what: "Taub-Bolt", r });
    }
    let p = r * r - 2.5 * r + 1.0;
    let q = r * r - 1.0;
    Ok((q / p, 4.0 * p / q, q))
}

/// Returns `(g_rr, f1^2, f2^2)` with `f3 = f2`; defined for `r > 0`.
pub fn eguchi_hanson(r: f64) -> Result<(f64, f64, f64), GeometryError> {
    if !(r > 0.0) {
        return Err(GeometryError::Domain { what: "Eguchi-Hanson", r });
    }
    let w = (1.0 + r.powi(4)).sqrt();
    Ok((r * r / w, r.powi(4) / w, w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reference {
    TaubBolt,
    EguchiHanson,
}

impl Reference {
    /// `(g_rr, f1^2, f2^2)` in the frame of the shooting equations. The
    /// Eguchi-Hanson form is written for the frame dual to `u_i`, which is
    /// twice the Milnor frame, so its fibre sizes pick up a factor 1/4.
    pub fn metric(self, r: f64) -> Result<(f64, f64, f64), GeometryError> {
        match self {
            Reference::TaubBolt => taub_bolt(r),
            Reference::EguchiHanson => eguchi_hanson(r).map(|(g, a, b)| (g, 0.25 * a, 0.25 * b)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Reference::TaubBolt => "Taub-Bolt",
            Reference::EguchiHanson => "Eguchi-Hanson",
        }
    }

    /// Bundle degree the reference lives on.
    pub fn n(self) -> u32 {
        match self {
            Reference::TaubBolt => 1,
            Reference::EguchiHanson => 2,
        }
    }
}

const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss8(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * GL8.iter().map(|(x, w)| w * (f(c - h * x) + f(c + h * x))).sum::<f64>()
}

/// Reference metric on a uniform arclength grid: `m` samples spaced `h`,
/// starting at the non-arclength coordinate `r0`. Each step solves
/// `int sqrt(g_rr) dr = h` for the next `r` by Newton iteration on a
/// Gauss-Legendre quadrature.
pub fn reference_profile(kind: Reference, r0: f64, h: f64, m: usize) -> Result<MetricProfile, GeometryError> {
    kind.metric(r0)?;
    let speed = |r: f64| kind.metric(r).map(|(g, _, _)| g.sqrt()).unwrap_or(f64::NAN);
    let mut rs = vec![r0];
    for _ in 1..m {
        let a = *rs.last().unwrap();
        let mut r = a + h / speed(a);
        for _ in 0..60 {
            let dr = (gauss8(&speed, a, r) - h) / speed(r);
            r -= dr;
            if !r.is_finite() {
                return Err(GeometryError::Domain { what: kind.name(), r });
            }
            if dr.abs() <= 4.0 * f64::EPSILON * r.abs() {
                break;
            }
        }
        rs.push(r);
    }
    let mut samples = Vec::with_capacity(m);
    for (k, r) in rs.iter().enumerate() {
        let (_, a, b) = kind.metric(*r)?;
        samples.push(ProfileSample { r: k as f64 * h, f: [a.sqrt(), b.sqrt(), b.sqrt()], u_prime: 0.0 });
    }
    Ok(MetricProfile { samples, n: kind.n(), lambda: 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessReport {
    /// Extrapolated `f1^2 / r^2`, expected `n^2 / 4`.
    pub f1_slope_sq: f64,
    pub expected_f1_slope_sq: f64,
    /// Extrapolated `f2^2 + f3^2`.
    pub fibre_sum: f64,
    /// Largest `|f2^2 - f3^2| / r^(4/n)` over the small-r samples.
    pub squash_ratio: f64,
    pub pass: bool,
}

/// Leading behaviour at the singular orbit from the smallest samples, with a
/// linear Richardson step on the two smallest radii of a geometric pair.
pub fn smoothness_check(profile: &MetricProfile, n: u32, small_r: f64, tol: f64) -> Result<SmoothnessReport, GeometryError> {
    let small: Vec<&ProfileSample> = profile.samples.iter().filter(|p| p.r > 0.0 && p.r <= small_r).collect();
    if small.len() < 2 {
        return Err(GeometryError::NoSmallR(small_r));
    }
    let a = small[0];
    // partner near 2r for the Richardson step
    let b = small.iter().min_by(|x, y| (x.r - 2.0 * a.r).abs().total_cmp(&(y.r - 2.0 * a.r).abs())).unwrap();
    if b.r <= a.r {
        return Err(GeometryError::NoSmallR(small_r));
    }
    let rich = |g: &dyn Fn(&ProfileSample) -> f64| {
        let (ga, gb) = (g(a), g(b));
        ga - (gb - ga) * a.r / (b.r - a.r)
    };
    let f1_slope_sq = rich(&|p| p.f[0] * p.f[0] / (p.r * p.r));
    let fibre_sum = rich(&|p| p.f[1] * p.f[1] + p.f[2] * p.f[2]);
    let squash_ratio = small
        .iter()
        .map(|p| (p.f[1] * p.f[1] - p.f[2] * p.f[2]).abs() / p.r.powf(4.0 / n as f64))
        .fold(0.0f64, f64::max);
    let expected = (n * n) as f64 / 4.0;
    let pass = (f1_slope_sq - expected).abs() <= tol * expected && fibre_sum > 0.0 && squash_ratio.is_finite() && squash_ratio < 1e6;
    Ok(SmoothnessReport { f1_slope_sq, expected_f1_slope_sq: expected, fibre_sum, squash_ratio, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{primal_on_grid, ShootConfig};
    use crate::state::ShootParams;

    fn uniform(f: impl Fn(f64) -> ([f64; 3], f64), r0: f64, h: f64, m: usize) -> MetricProfile {
        let samples = (0..m)
            .map(|k| {
                let r = r0 + k as f64 * h;
                let (f, u) = f(r);
                ProfileSample { r, f, u_prime: u }
            })
            .collect();
        MetricProfile { samples, n: 1, lambda: 0.0 }
    }

    #[test]
    fn constant_profile_residual() {
        let c = 1.7;
        let p = uniform(|_| ([c; 3], 0.0), 0.0, 0.1, 9);
        let rep = soliton_residual_report(&p, 0.0).unwrap();
        assert!(rep.per_equation[0].abs() < 1e-12);
        for e in 1..4 {
            assert!((rep.per_equation[e] - 0.5 / (c * c)).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_f_r() {
        let f = [0.3, 1.7, 2.9];
        let back = f_from_r(&r_from_f(&f));
        for i in 0..3 {
            assert!((back[i] - f[i]).abs() < 1e-14);
        }
        assert_eq!(f_from_r(&[1.0, 1.0, 1.0]), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn reference_values() {
        let (_, f1, f2) = taub_bolt(3.0).unwrap();
        assert!((f2 - 8.0).abs() < 1e-14 && (f1 - 1.25).abs() < 1e-14);
        assert!(taub_bolt(2.0).is_err());
        assert!(taub_bolt(2.0 + 1e-9).unwrap().1 < 1e-8);
        let (_, f1, f2) = eguchi_hanson(1.0).unwrap();
        assert!((f2 - 2f64.sqrt()).abs() < 1e-15 && (f1 - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(eguchi_hanson(0.0).is_err());
    }

    #[test]
    fn references_solve_ricci_flat() {
        for (kind, r0, h) in [(Reference::TaubBolt, 2.02, 0.04), (Reference::EguchiHanson, 0.2, 0.005)] {
            let m = (3.0 / h) as usize;
            let coarse = soliton_residual(&reference_profile(kind, r0, h, m).unwrap(), 0.0).unwrap();
            let fine = soliton_residual(&reference_profile(kind, r0, h / 2.0, 2 * m).unwrap(), 0.0).unwrap();
            assert!(coarse < 1e-6, "{kind:?} {coarse}");
            let ratio = coarse / fine;
            assert!((12.0..20.0).contains(&ratio), "{kind:?} ratio {ratio}");
        }
    }

    fn launch_profile(p: &ShootParams, cfg: &ShootConfig, h: f64) -> MetricProfile {
        let grid: Vec<f64> = (0..=(0.8 / h).round() as usize).map(|k| 0.2 + k as f64 * h).collect();
        let (_, states) = primal_on_grid(p, cfg, &grid).unwrap();
        profile_from_states(&states, p.n, 0.0).unwrap()
    }

    #[test]
    fn launch_profiles_satisfy_second_order_equations() {
        // integration error ~ rtol enters f'' as rtol / h^2, so the grid
        // cannot be refined indefinitely at default tolerances
        for p in [ShootParams::new(4, 0.6, 0.64, 0.48).unwrap(), ShootParams::biaxial(3, 0.6, 0.8).unwrap()] {
            let res = soliton_residual(&launch_profile(&p, &ShootConfig::default(), 0.02), 0.0).unwrap();
            assert!(res < 1e-6, "{p:?} {res}");
            let tight = ShootConfig { rtol: 1e-13, atol: 1e-15, ..Default::default() };
            let ratio = soliton_residual(&launch_profile(&p, &tight, 0.02), 0.0).unwrap()
                / soliton_residual(&launch_profile(&p, &tight, 0.01), 0.0).unwrap();
            assert!((10.0..20.0).contains(&ratio), "{p:?} ratio {ratio}");
        }
    }

    #[test]
    fn launch_profile_is_smooth() {
        let p = ShootParams::new(4, 0.6, 0.64, 0.48).unwrap();
        let grid: Vec<f64> = (1..=100).map(|k| k as f64 * 0.005).collect();
        let (_, states) = primal_on_grid(&p, &ShootConfig::default(), &grid).unwrap();
        let prof = profile_from_states(&states, 4, 0.0).unwrap();
        let rep = smoothness_check(&prof, 4, 0.05, 1e-2).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.f1_slope_sq - 4.0).abs() < 1e-2);
        assert!(!smoothness_check(&prof, 2, 0.05, 1e-2).unwrap().pass);
    }

    #[test]
    fn complete_steady_soliton_has_negative_u_prime() {
        let p = ShootParams::biaxial(3, 0.9, 0.19f64.sqrt()).unwrap();
        let t = crate::integrator::shoot(&p, &ShootConfig::default()).unwrap();
        let prof = reconstruct_profile(&t).unwrap();
        assert!(prof.samples.iter().skip(1).all(|s| s.u_prime < 0.0));
    }

    #[test]
    fn fornberg_matches_centered() {
        let w = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for k in 0..5 {
            assert!((w[2][k] - d2[k]).abs() < 1e-14);
        }
    }
}
