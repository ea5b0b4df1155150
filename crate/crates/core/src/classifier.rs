//! Trajectory verdicts, asymptotic `Y` patterns and the scalar sign used by
//! the critical-parameter searches.

use serde::{Deserialize, Serialize};

use crate::integrator::{EventKind, Sample, Termination, Trajectory};
use crate::state::{e_value, Chart};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Largest spread of `X` over the tail window still counted as settled.
    pub ball: f64,
    /// The compact horizon must reach at least this `s` before a verdict.
    pub settle_time: f64,
    /// Fraction of compact samples forming the tail window.
    pub tail_fraction: f64,
    /// All tail `Y` below this value is the `AllZero` pattern.
    pub all_zero_threshold: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig { ball: 0.05, settle_time: 30.0, tail_fraction: 0.2, all_zero_threshold: 5e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Complete,
    IncompleteXiNegative { r: f64, s: f64 },
    BlowUp { r: f64, s: f64 },
    Undetermined { horizon: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    /// `Y2 = Y3`, `Y1 -> 0`
    Biaxial23,
    /// `Y1 = Y2`, `Y3 -> 0`
    Pair12,
    /// `Y1 = Y3`, `Y2 -> 0`
    Pair13,
    AllZero,
    None,
}

impl Pattern {
    /// The pattern obtained after swapping indices 2 and 3.
    pub fn swapped23(self) -> Pattern {
        match self {
            Pattern::Pair12 => Pattern::Pair13,
            Pattern::Pair13 => Pattern::Pair12,
            p => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub y_limits: [f64; 3],
    pub xi_limit: f64,
    pub pattern: Pattern,
    /// `|Y_i - Y_j| + |Y_k|` for the reported pair pattern, at the tail limits.
    pub pattern_metric: f64,
    /// Spread of `X` over the tail window (max over components).
    pub x_tail_spread: f64,
    /// `E = max(Y2 - Y1, Y3 - Y1)` at the final state.
    pub e_final: f64,
}

/// Tail window of the compact samples, or the last sample if there are none.
fn tail<'a>(traj: &'a Trajectory, frac: f64) -> Vec<&'a Sample> {
    let cs: Vec<&Sample> = traj.compact_samples().collect();
    if cs.is_empty() {
        return vec![traj.last()];
    }
    let k = ((cs.len() as f64 * frac).ceil() as usize).clamp(1, cs.len());
    cs[cs.len() - k..].to_vec()
}

/// `min |Y_i - Y_j| + |Y_k|` over the three pairings, with the minimizer.
pub fn pair_metric(y: &[f64; 3]) -> (Pattern, f64) {
    let cands = [
        (Pattern::Biaxial23, (y[1] - y[2]).abs() + y[0].abs()),
        (Pattern::Pair13, (y[0] - y[2]).abs() + y[1].abs()),
        (Pattern::Pair12, (y[0] - y[1]).abs() + y[2].abs()),
    ];
    cands.into_iter().fold((Pattern::None, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}

/// Tail-averaged `Y` limits and pattern.
pub fn asymptotic_pattern(traj: &Trajectory, cfg: &ClassifyConfig) -> (Pattern, [f64; 3], f64) {
    let t = tail(traj, cfg.tail_fraction);
    let mut y = [0.0; 3];
    for smp in &t {
        let v = smp.y_like();
        for i in 0..3 {
            y[i] += v[i] / t.len() as f64;
        }
    }
    let (p, m) = pair_metric(&y);
    let all_small = t.iter().all(|smp| smp.y_like().iter().all(|v| v.abs() < cfg.all_zero_threshold));
    if all_small {
        (Pattern::AllZero, y, m)
    } else {
        (p, y, m)
    }
}

/// Compact sample where the trajectory comes closest to a pair pattern.
///
/// Near-critical triaxial orbits follow the critical one for a while and then
/// separate, so the tail carries no pattern; the closest approach does.
pub fn closest_pattern(traj: &Trajectory, after_s: f64) -> Option<(Pattern, f64, Sample)> {
    traj.compact_samples()
        .filter(|s| s.s >= after_s)
        .map(|s| {
            let (p, m) = pair_metric(&s.y_like());
            (p, m, *s)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

pub fn classify(traj: &Trajectory, cfg: &ClassifyConfig) -> Classification {
    let last = traj.last();
    let e_final = last.e_value();
    let t = tail(traj, cfg.tail_fraction);
    let mut spread: f64 = 0.0;
    for i in 0..3 {
        let (lo, hi) = t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            let x = s.x_like()[i];
            (lo.min(x), hi.max(x))
        });
        spread = spread.max(hi - lo);
    }
    let xi_limit = t.iter().map(|s| s.xi()).sum::<f64>() / t.len() as f64;
    let xi_positive = traj.samples.iter().all(|s| s.xi() > 0.0);
    let (pat, y_limits, metric) = asymptotic_pattern(traj, cfg);

    let verdict = if let Some(ev) = traj.event(|k| matches!(k, EventKind::XiZero)) {
        Verdict::IncompleteXiNegative { r: ev.r, s: ev.s }
    } else {
        match traj.termination {
            Termination::BlowUp => Verdict::BlowUp { r: last.r, s: last.s },
            Termination::Horizon
                if last.chart == Chart::Compact
                    && last.s >= cfg.settle_time
                    && spread < cfg.ball
                    && xi_positive
                    && e_final >= -1e-12 =>
            {
                Verdict::Complete
            }
            _ => Verdict::Undetermined { horizon: last.s },
        }
    };
    let pattern = match verdict {
        Verdict::Complete => pat,
        _ if pat == Pattern::AllZero => pat,
        _ => Pattern::None,
    };
    Classification { verdict, y_limits, xi_limit, pattern, pattern_metric: metric, x_tail_spread: spread, e_final }
}

/// Scalar sign driving the bisection.
///
/// The sign of `E = max(Y2 - Y1, Y3 - Y1)` at the end of the run: positive on
/// the side of the biaxial complete solitons (`Y1 -> 0` while `Y2 > 0`),
/// negative where `Y1` dominates, which is where incomplete and blown-up runs
/// with `Y1` leading end. Zero only when `E` is at roundoff level.
pub fn f_sign(traj: &Trajectory) -> i8 {
    let y = traj.last().y_like();
    let e = e_value(&y);
    let scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if e.abs() <= 1e-13 * scale || !e.is_finite() {
        0
    } else if e > 0.0 {
        1
    } else {
        -1
    }
}
