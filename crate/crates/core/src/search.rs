//! Bisection for critical shooting parameters along the arc
//! `alpha^2 + beta^2 = 1 - gamma^2`, `alpha, beta >= 0`.
//!
//! `t = 0` is `(rho, 0)`, the side of the biaxial complete solitons, and
//! `t = 1` is `(0, rho)`, the Ricci-flat end.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{classify, closest_pattern, f_sign, Classification, ClassifyConfig, Pattern, Verdict};
use crate::integrator::{continue_trajectory, shoot, ShootConfig, ShootError, Termination, Trajectory};
use crate::state::{DomainError, ShootParams};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid search input: {0}")]
    BadInput(String),
    #[error("no sign change on the arc: f_sign(0) = {lo}, f_sign(1) = {hi}")]
    NoSignChange { lo: i8, hi: i8 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Shoot(#[from] ShootError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Shot settings; `horizon` is the first horizon of the schedule.
    pub shot: ShootConfig,
    pub horizon_cap: f64,
    pub classify: ClassifyConfig,
    pub max_iter: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            // the launch carries the alpha data at relative size eps^2, so a
            // larger eps resolves the bracket further before roundoff wins
            shot: ShootConfig { epsilon: 1e-2, horizon: 60.0, ..Default::default() },
            horizon_cap: 480.0,
            classify: ClassifyConfig::default(),
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalBracket {
    pub n: u32,
    pub gamma: f64,
    pub lo: f64,
    pub hi: f64,
    pub lo_sign: i8,
    pub hi_sign: i8,
    pub lo_class: Classification,
    pub hi_class: Classification,
    pub width: f64,
    pub iterations: usize,
    /// Widest horizon the schedule needed.
    pub horizon_used: f64,
    /// Bisection stopped on a midpoint whose sign stayed 0.
    pub unresolved: bool,
    /// `(lo, hi)` after every update, starting from `(0, 1)`.
    pub history: Vec<(f64, f64)>,
}

impl CriticalBracket {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn midpoint_params(&self) -> Result<ShootParams, DomainError> {
        arc_point(self.n, self.gamma, self.midpoint())
    }
}

pub fn arc_point(n: u32, gamma: f64, t: f64) -> Result<ShootParams, DomainError> {
    let rho = (1.0 - gamma * gamma).max(0.0).sqrt();
    let (sn, cs) = (FRAC_PI_2 * t).sin_cos();
    // exact endpoints so the Ricci-flat end is recognized as such
    let (a, b) = if t <= 0.0 {
        (rho, 0.0)
    } else if t >= 1.0 {
        (0.0, rho)
    } else {
        (rho * cs, rho * sn)
    };
    ShootParams::new(n, a, b, gamma)
}

struct Probe {
    sign: i8,
    traj: Trajectory,
    horizon: f64,
}

fn probe(n: u32, gamma: f64, t: f64, cfg: &SearchConfig) -> Result<Probe, SearchError> {
    let p = arc_point(n, gamma, t)?;
    let mut traj = shoot(&p, &cfg.shot)?;
    let mut horizon = cfg.shot.horizon;
    let mut sign = f_sign(&traj);
    while sign == 0 && traj.termination == Termination::Horizon && horizon * 2.0 <= cfg.horizon_cap {
        traj = continue_trajectory(&traj, horizon);
        horizon *= 2.0;
        sign = f_sign(&traj);
    }
    Ok(Probe { sign, traj, horizon })
}

fn check_input(n: u32, gamma: f64, tol: f64) -> Result<(), SearchError> {
    if n < 3 {
        return Err(SearchError::BadInput(format!(
            "n = {n}: the arc has no incomplete end below n = 3"
        )));
    }
    if !(tol > 0.0) {
        return Err(SearchError::BadInput("tol must be positive".into()));
    }
    if !(gamma.abs() < 1.0) {
        return Err(SearchError::BadInput("|gamma| must be below 1".into()));
    }
    if gamma != 0.0 && n != 4 {
        return Err(SearchError::BadInput("gamma != 0 requires n = 4".into()));
    }
    Ok(())
}

/// Bisect `f_sign` along the arc until the bracket is narrower than `tol` or
/// can no longer be split in floating point.
pub fn find_critical(n: u32, gamma: f64, tol: f64, cfg: &SearchConfig) -> Result<CriticalBracket, SearchError> {
    check_input(n, gamma, tol)?;
    let a = probe(n, gamma, 0.0, cfg)?;
    let b = probe(n, gamma, 1.0, cfg)?;
    if a.sign != 1 || b.sign != -1 {
        return Err(SearchError::NoSignChange { lo: a.sign, hi: b.sign });
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut lo_traj = a.traj;
    let mut hi_traj = b.traj;
    let mut horizon_used = a.horizon.max(b.horizon);
    let mut unresolved = false;
    let mut iterations = 0;
    let mut history = vec![(lo, hi)];
    while hi - lo >= tol && iterations < cfg.max_iter {
        let m = 0.5 * (lo + hi);
        if !(m > lo && m < hi) {
            break;
        }
        iterations += 1;
        let pm = probe(n, gamma, m, cfg)?;
        horizon_used = horizon_used.max(pm.horizon);
        match pm.sign {
            1 => (lo, lo_traj) = (m, pm.traj),
            -1 => (hi, hi_traj) = (m, pm.traj),
            _ => {
                // shrink from the ends only where the sign is decided
                let q1 = probe(n, gamma, lo + 0.25 * (hi - lo), cfg)?;
                let q3 = probe(n, gamma, hi - 0.25 * (hi - lo), cfg)?;
                let mut moved = false;
                if q1.sign == 1 {
                    (lo, lo_traj) = (lo + 0.25 * (hi - lo), q1.traj);
                    moved = true;
                }
                if q3.sign == -1 {
                    (hi, hi_traj) = (hi - 0.25 * (hi - lo), q3.traj);
                    moved = true;
                }
                if !moved {
                    unresolved = true;
                    break;
                }
            }
        }
        history.push((lo, hi));
    }
    Ok(CriticalBracket {
        n,
        gamma,
        lo,
        hi,
        lo_sign: 1,
        hi_sign: -1,
        lo_class: classify(&lo_traj, &cfg.classify),
        hi_class: classify(&hi_traj, &cfg.classify),
        width: hi - lo,
        iterations,
        horizon_used,
        unresolved,
        history,
    })
}

/// `find_critical` on every gamma slice of `n = 4`; slices run in parallel when
/// the `parallel` feature is on. Results keep the order of `gammas`.
pub fn sweep_gamma(
    n: u32,
    gammas: &[f64],
    tol: f64,
    cfg: &SearchConfig,
) -> Vec<Result<CriticalBracket, SearchError>> {
    let one = |g: &f64| find_critical(n, *g, tol, cfg);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        gammas.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        gammas.iter().map(one).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Horizon for biaxial midpoints; the critical orbit decays like `1/s`.
    pub biaxial_horizon: f64,
    /// Horizon for triaxial midpoints; they separate from the critical
    /// orbit well before this.
    pub triaxial_horizon: f64,
    /// Integrator tolerances are divided by this.
    pub tighten: f64,
    /// Closest approach to a pair pattern is sought for `s` beyond this.
    pub pattern_after: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { biaxial_horizon: 1e5, triaxial_horizon: 2000.0, tighten: 10.0, pattern_after: 20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolitonReport {
    pub params: ShootParams,
    pub classification: Classification,
    pub xi_limit: f64,
    /// `|X|_inf` at the last compact sample.
    pub x_tail_norm: f64,
    pub pattern: Pattern,
    /// `|Y_i - Y_j| + |Y_k|` where it is reported: the tail for biaxial
    /// runs, the closest approach for triaxial ones.
    pub pattern_metric: f64,
    pub pattern_s: f64,
    pub pattern_y: [f64; 3],
    /// Relative `C` drift over the run (biaxial only).
    pub c_drift: Option<f64>,
    pub unresolved: bool,
    pub trajectory: Trajectory,
}

pub fn verify_soliton_candidate(
    bracket: &CriticalBracket,
    search: &SearchConfig,
    cfg: &VerifyConfig,
) -> Result<SolitonReport, SearchError> {
    let params = bracket.midpoint_params()?;
    let mut shot = search.shot.clone();
    shot.rtol /= cfg.tighten;
    shot.atol /= cfg.tighten;
    let biaxial = params.is_biaxial();
    shot.horizon = if biaxial { cfg.biaxial_horizon } else { cfg.triaxial_horizon };
    let traj = shoot(&params, &shot)?;
    let classification = classify(&traj, &search.classify);
    let last_c = traj.last_compact().copied().unwrap_or(*traj.last());
    let x_tail_norm = last_c.x_like().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (pattern, pattern_metric, pattern_s, pattern_y) = if biaxial {
        (classification.pattern, classification.pattern_metric, last_c.s, classification.y_limits)
    } else {
        match closest_pattern(&traj, cfg.pattern_after) {
            Some((p, m, smp)) => (p, m, smp.s, smp.y_like()),
            None => (Pattern::None, f64::INFINITY, f64::NAN, [f64::NAN; 3]),
        }
    };
    let c_drift = if biaxial { traj.c_drift(0.0, f64::INFINITY) } else { None };
    let unresolved = bracket.unresolved || matches!(classification.verdict, Verdict::IncompleteXiNegative { .. }) && biaxial;
    Ok(SolitonReport {
        params,
        xi_limit: classification.xi_limit,
        classification,
        x_tail_norm,
        pattern,
        pattern_metric,
        pattern_s,
        pattern_y,
        c_drift,
        unresolved,
        trajectory: traj,
    })
}
