//! Adaptive integration of both charts, events, and the launch-to-tail shot.
//!
//! A shot runs in up to three segments: the primal chart from the launch
//! radius to a handoff radius, the compact chart up to the requested `s`
//! horizon, and, if `X` leaves a large ball (the compact chart is about to
//! fail because `xi -> 0`), the primal chart again until `xi` crosses zero.
//! Both clocks are carried along in every segment.

pub mod dopri;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dopri::{integrate, Crossing, EventFn, Solution, StepControl, Stop};

use crate::startup::{launch, LaunchError, SeriesLaunch};
use crate::state::{
    biaxial_compact_field, biaxial_compact_field_einstein, biaxial_primal_field, biaxial_primal_field_einstein,
    compact_field, compact_field_einstein, compact_to_primal, conserved_quantities, conserved_quantities_compact,
    e_value, embed_biaxial, primal_field, primal_field_einstein, primal_to_compact, Chart, CompactState,
    ConservedReport, PrimalState, ShootParams, State7,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    XiZero,
    StateNormExceeds(f64),
    YNormBelow(f64),
    HorizonReached,
    /// Step size underflow or a non-finite state.
    BlowUpSuspected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub chart: Chart,
    pub r: f64,
    pub s: f64,
    pub state: State7,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub chart: Chart,
    pub r: f64,
    pub s: f64,
    pub state: State7,
}

impl Sample {
    pub fn time(&self) -> f64 {
        match self.chart {
            Chart::Primal => self.r,
            Chart::Compact => self.s,
        }
    }

    pub fn xi(&self) -> f64 {
        match self.chart {
            Chart::Primal => self.state[0],
            Chart::Compact => 1.0 / self.state[0],
        }
    }

    /// `R` in the primal chart, `Y` in the compact one. Comparisons between
    /// entries have the same sign in both while `xi > 0`.
    pub fn y_like(&self) -> [f64; 3] {
        [self.state[4], self.state[5], self.state[6]]
    }

    pub fn x_like(&self) -> [f64; 3] {
        [self.state[1], self.state[2], self.state[3]]
    }

    pub fn to_primal(&self) -> Option<PrimalState> {
        match self.chart {
            Chart::Primal => Some(PrimalState::from_array(self.r, &self.state)),
            Chart::Compact => compact_to_primal(&CompactState::from_array(self.s, &self.state), self.r).ok(),
        }
    }

    pub fn to_compact(&self) -> Option<CompactState> {
        match self.chart {
            Chart::Compact => Some(CompactState::from_array(self.s, &self.state)),
            Chart::Primal => primal_to_compact(&PrimalState::from_array(self.r, &self.state), self.s).ok(),
        }
    }

    pub fn conserved(&self, lambda: f64) -> ConservedReport {
        match self.chart {
            Chart::Primal => conserved_quantities(&PrimalState::from_array(self.r, &self.state), lambda),
            Chart::Compact => conserved_quantities_compact(&CompactState::from_array(self.s, &self.state), lambda),
        }
    }

    pub fn e_value(&self) -> f64 {
        e_value(&self.y_like())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Horizon,
    XiZero,
    BlowUp,
    /// The final primal segment used its whole `r` budget without `xi`
    /// reaching zero.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootConfig {
    pub epsilon: f64,
    /// Arclength at which the primal segment hands over to the compact chart.
    pub handoff_r: f64,
    /// Compact-chart horizon in `s`.
    pub horizon: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Leaving `|X|_inf <= x_bound` switches back to the primal chart.
    pub x_bound: f64,
    /// Primal blow-up guard, applied as `max(primal_bound, 10 |y0|)`.
    pub primal_bound: f64,
    /// `r` budget of the final primal segment, relative to its start.
    pub terminal_r_factor: f64,
    /// Optional non-terminal `|Y|_inf` threshold event.
    pub y_floor: Option<f64>,
    /// Record compact samples on a uniform `s` grid of this spacing instead of
    /// every accepted step.
    pub s_spacing: Option<f64>,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            epsilon: 1e-4,
            handoff_r: 0.5,
            horizon: 60.0,
            rtol: 1e-10,
            atol: 1e-12,
            x_bound: 1e3,
            primal_bound: 1e6,
            terminal_r_factor: 10.0,
            y_floor: None,
            s_spacing: None,
        }
    }
}

impl ShootConfig {
    pub fn control(&self) -> StepControl {
        StepControl { rtol: self.rtol, atol: self.atol, ..Default::default() }
    }
}

#[derive(Debug, Error)]
pub enum ShootError {
    #[error(transparent)]
    Launch(#[from] LaunchError),
    #[error("handoff radius {handoff} must exceed the launch radius {epsilon}")]
    Handoff { handoff: f64, epsilon: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ShootParams,
    pub config: ShootConfig,
    pub launch: SeriesLaunch,
    pub samples: Vec<Sample>,
    pub conserved_log: Vec<ConservedReport>,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    /// Integrated on the reduced five-dimensional system.
    pub reduced: bool,
    /// Integrated with the Einstein-branch fields.
    pub einstein: bool,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has samples")
    }

    pub fn compact_samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.chart == Chart::Compact)
    }

    pub fn primal_samples(&self) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(|s| s.chart == Chart::Primal)
    }

    pub fn last_compact(&self) -> Option<&Sample> {
        self.samples.iter().rev().find(|s| s.chart == Chart::Compact)
    }

    pub fn event(&self, pred: impl Fn(&EventKind) -> bool) -> Option<&EventRecord> {
        self.events.iter().find(|e| pred(&e.kind))
    }

    pub fn has_xi_zero(&self) -> bool {
        self.event(|k| matches!(k, EventKind::XiZero)).is_some()
    }

    /// Largest `s` reached.
    pub fn s_end(&self) -> f64 {
        self.last().s
    }

    /// Relative drift of `C` against its value at the first compact sample,
    /// over compact samples with `s` in `[s0, s1]`.
    pub fn c_drift(&self, s0: f64, s1: f64) -> Option<f64> {
        let mut base = None;
        let mut worst: f64 = 0.0;
        for (smp, rep) in self.samples.iter().zip(&self.conserved_log) {
            if smp.chart != Chart::Compact || smp.s < s0 || smp.s > s1 {
                continue;
            }
            let c = rep.c?;
            match base {
                None => base = Some(c),
                Some(b) => worst = worst.max(((c - b) / b).abs()),
            }
        }
        base.map(|_| worst)
    }
}

enum Phase {
    Primal,
    Compact,
}

struct Segment {
    samples: Vec<Sample>,
    events: Vec<EventRecord>,
    stop: Stop,
    /// Kind of the event that stopped the segment, if any.
    stop_kind: Option<EventKind>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Integrate one segment on the full or reduced system. `start` is
/// `(time, clock, state)` in the segment's chart.
fn run_segment(
    params: &ShootParams,
    cfg: &ShootConfig,
    phase: Phase,
    reduced: bool,
    einstein: bool,
    start: (f64, f64, State7),
    t_end: f64,
    kinds: &[EventKind],
    t_eval: Option<&[f64]>,
) -> Segment {
    let lam = params.lambda;
    let ctl = cfg.control();
    let chart = match phase {
        Phase::Primal => Chart::Primal,
        Phase::Compact => Chart::Compact,
    };
    let (t0, clock0, y7) = start;
    let make = |t: f64, clock: f64, st: State7| match phase {
        Phase::Primal => Sample { chart, r: t, s: clock, state: st },
        Phase::Compact => Sample { chart, r: clock, s: t, state: st },
    };

    macro_rules! go {
        ($n:expr, $field:expr, $pack:expr, $unpack:expr) => {{
            let y0: [f64; $n] = $pack(&y7, clock0);
            let evs: Vec<EventFn<'_, $n>> = kinds
                .iter()
                .map(|k| event_fn::<$n>(*k, &phase, $unpack))
                .collect();
            let sol = integrate($field, t0, y0, t_end, &ctl, &evs, t_eval);
            let samples = sol
                .t
                .iter()
                .zip(&sol.y)
                .map(|(t, y)| {
                    let (st, c) = $unpack(y);
                    make(*t, c, st)
                })
                .collect();
            let events = sol
                .events
                .iter()
                .map(|(k, t, y)| {
                    let (st, c) = $unpack(y);
                    let smp = make(*t, c, st);
                    EventRecord { kind: kinds[*k], chart, r: smp.r, s: smp.s, state: st }
                })
                .collect();
            let stop_kind = match sol.stop {
                Stop::Event(k) => Some(kinds[k]),
                _ => None,
            };
            Segment { samples, events, stop: sol.stop, stop_kind }
        }};
    }

    fn pack8(v: &State7, c: f64) -> [f64; 8] {
        [v[0], v[1], v[2], v[3], v[4], v[5], v[6], c]
    }
    fn unpack8(y: &[f64; 8]) -> (State7, f64) {
        ([y[0], y[1], y[2], y[3], y[4], y[5], y[6]], y[7])
    }
    fn pack6(v: &State7, c: f64) -> [f64; 6] {
        [v[0], v[1], v[2], v[4], v[5], c]
    }
    fn unpack6(y: &[f64; 6]) -> (State7, f64) {
        (embed_biaxial(&[y[0], y[1], y[2], y[3], y[4]]), y[5])
    }

    match (&phase, reduced) {
        (Phase::Primal, false) => {
            let field = move |_: f64, y: &[f64; 8]| {
                let (v, _) = unpack8(y);
                let d = if einstein { primal_field_einstein(&v, lam) } else { primal_field(&v, lam) };
                pack8(&d, v[0])
            };
            go!(8, field, pack8, unpack8)
        }
        (Phase::Compact, false) => {
            let field = move |_: f64, y: &[f64; 8]| {
                let (v, _) = unpack8(y);
                let d = if einstein { compact_field_einstein(&v, lam) } else { compact_field(&v, lam) };
                pack8(&d, v[0])
            };
            go!(8, field, pack8, unpack8)
        }
        (Phase::Primal, true) => {
            let field = move |_: f64, y: &[f64; 6]| {
                let v = [y[0], y[1], y[2], y[3], y[4]];
                let d = if einstein {
                    biaxial_primal_field_einstein(&v, lam)
                } else {
                    biaxial_primal_field(&v, lam)
                };
                [d[0], d[1], d[2], d[3], d[4], y[0]]
            };
            go!(6, field, pack6, unpack6)
        }
        (Phase::Compact, true) => {
            let field = move |_: f64, y: &[f64; 6]| {
                let v = [y[0], y[1], y[2], y[3], y[4]];
                let d = if einstein {
                    biaxial_compact_field_einstein(&v, lam)
                } else {
                    biaxial_compact_field(&v, lam)
                };
                [d[0], d[1], d[2], d[3], d[4], y[0]]
            };
            go!(6, field, pack6, unpack6)
        }
    }
}

fn event_fn<'a, const N: usize>(
    kind: EventKind,
    phase: &Phase,
    unpack: fn(&[f64; N]) -> (State7, f64),
) -> EventFn<'a, N> {
    let primal = matches!(phase, Phase::Primal);
    match kind {
        EventKind::XiZero => EventFn {
            g: Box::new(move |_, y| {
                let (v, _) = unpack(y);
                if primal {
                    v[0]
                } else {
                    1.0 / v[0]
                }
            }),
            crossing: Crossing::Falling,
            terminal: true,
        },
        EventKind::StateNormExceeds(b) => EventFn {
            g: Box::new(move |_, y| {
                let (v, _) = unpack(y);
                // in the compact chart only X is guarded: Lcal and Y may grow
                // without bound on complete Ricci-flat ends
                if primal {
                    b - inf_norm(&v)
                } else {
                    b - inf_norm(&v[1..4])
                }
            }),
            crossing: Crossing::Falling,
            terminal: true,
        },
        EventKind::YNormBelow(th) => EventFn {
            g: Box::new(move |_, y| {
                let (v, _) = unpack(y);
                inf_norm(&v[4..7]) - th
            }),
            crossing: Crossing::Falling,
            terminal: false,
        },
        EventKind::HorizonReached | EventKind::BlowUpSuspected => EventFn {
            g: Box::new(|_, _| 1.0),
            crossing: Crossing::Either,
            terminal: false,
        },
    }
}

/// Launch and integrate one trajectory.
pub fn shoot(params: &ShootParams, cfg: &ShootConfig) -> Result<Trajectory, ShootError> {
    if !(cfg.rtol > 0.0 && cfg.atol > 0.0) {
        return Err(ShootError::Config("rtol and atol must be positive".into()));
    }
    if !(cfg.horizon >= 0.0 && cfg.x_bound > 0.0 && cfg.primal_bound > 0.0) {
        return Err(ShootError::Config("horizon, x_bound and primal_bound must be positive".into()));
    }
    let l = launch(params, cfg.epsilon)?;
    if cfg.handoff_r <= cfg.epsilon {
        return Err(ShootError::Handoff { handoff: cfg.handoff_r, epsilon: cfg.epsilon });
    }
    let reduced = params.is_biaxial();
    let einstein = params.is_einstein();
    let y0 = l.state_at_eps.to_array();
    let guard = cfg.primal_bound.max(10.0 * inf_norm(&y0));

    let mut traj = Trajectory {
        params: *params,
        config: cfg.clone(),
        launch: l.clone(),
        samples: Vec::new(),
        conserved_log: Vec::new(),
        events: Vec::new(),
        termination: Termination::Horizon,
        reduced,
        einstein,
        warnings: Vec::new(),
    };

    let kinds_a = [EventKind::XiZero, EventKind::StateNormExceeds(guard)];
    let mut seg = run_segment(
        params,
        cfg,
        Phase::Primal,
        reduced,
        einstein,
        (cfg.epsilon, 0.0, y0),
        cfg.handoff_r,
        &kinds_a,
        None,
    );
    // s is measured from the handoff
    let s_shift = seg.samples.last().unwrap().s;
    for smp in seg.samples.iter_mut() {
        smp.s -= s_shift;
    }
    for ev in seg.events.iter_mut() {
        ev.s -= s_shift;
    }
    let done = finish_primal(&mut traj, seg);
    if !done {
        let start = *traj.last();
        continue_from(&mut traj, &start, cfg.horizon);
    }
    Ok(traj)
}

/// Append a primal segment; returns `true` if the shot ends with it.
fn finish_primal(traj: &mut Trajectory, seg: Segment) -> bool {
    append(traj, seg.samples);
    traj.events.extend(seg.events);
    match (seg.stop, seg.stop_kind) {
        (Stop::Event(_), Some(EventKind::XiZero)) => {
            traj.termination = Termination::XiZero;
            true
        }
        (Stop::Event(_), Some(_)) => {
            traj.termination = Termination::BlowUp;
            true
        }
        (Stop::Horizon, _) => false,
        _ => {
            blow_up(traj);
            true
        }
    }
}

fn blow_up(traj: &mut Trajectory) {
    let last = *traj.last();
    traj.events.push(EventRecord {
        kind: EventKind::BlowUpSuspected,
        chart: last.chart,
        r: last.r,
        s: last.s,
        state: last.state,
    });
    traj.termination = Termination::BlowUp;
}

fn append(traj: &mut Trajectory, samples: Vec<Sample>) {
    let lam = traj.params.lambda;
    for smp in samples {
        if let Some(prev) = traj.samples.last() {
            if smp.r <= prev.r {
                continue;
            }
        }
        traj.conserved_log.push(smp.conserved(lam));
        traj.samples.push(smp);
    }
}

/// Compact segment from `start` to `horizon`, then the primal tail if the
/// compact chart breaks down.
fn continue_from(traj: &mut Trajectory, start: &Sample, horizon: f64) {
    let cfg = traj.config.clone();
    let params = traj.params;
    let Some(cs) = start.to_compact() else {
        blow_up(traj);
        return;
    };
    let mut kinds_b = vec![EventKind::StateNormExceeds(cfg.x_bound)];
    if let Some(th) = cfg.y_floor {
        kinds_b.push(EventKind::YNormBelow(th));
    }
    let grid: Option<Vec<f64>> = cfg.s_spacing.map(|ds| {
        let k0 = (cs.s / ds).floor() as i64 + 1;
        let k1 = (horizon / ds).floor() as i64;
        let mut g: Vec<f64> = (k0..=k1).map(|k| k as f64 * ds).collect();
        if g.last().map_or(true, |&t| t < horizon) {
            g.push(horizon);
        }
        g
    });
    let seg = run_segment(
        &params,
        &cfg,
        Phase::Compact,
        traj.reduced,
        traj.einstein,
        (cs.s, start.r, cs.to_array()),
        horizon,
        &kinds_b,
        grid.as_deref(),
    );
    // the handoff state is kept once, in the compact chart
    if start.chart == Chart::Primal && traj.samples.last().map(|s| s.r) == Some(start.r) {
        traj.samples.pop();
        traj.conserved_log.pop();
    }
    append(traj, seg.samples);
    traj.events.extend(seg.events);
    match (seg.stop, seg.stop_kind) {
        (Stop::Horizon, _) => {
            let last = *traj.last();
            traj.events.push(EventRecord {
                kind: EventKind::HorizonReached,
                chart: Chart::Compact,
                r: last.r,
                s: last.s,
                state: last.state,
            });
            traj.termination = Termination::Horizon;
        }
        (Stop::Event(_), Some(EventKind::StateNormExceeds(_))) => {
            let last = *traj.last();
            let Some(p) = last.to_primal() else {
                blow_up(traj);
                return;
            };
            let y0 = p.to_array();
            let guard = cfg.primal_bound.max(10.0 * inf_norm(&y0));
            let kinds_c = [EventKind::XiZero, EventKind::StateNormExceeds(guard)];
            let r_end = last.r * (1.0 + cfg.terminal_r_factor);
            let seg = run_segment(
                &params,
                &cfg,
                Phase::Primal,
                traj.reduced,
                traj.einstein,
                (last.r, last.s, y0),
                r_end,
                &kinds_c,
                None,
            );
            if !finish_primal(traj, seg) {
                traj.termination = Termination::Stalled;
            }
        }
        _ => blow_up(traj),
    }
}

/// Extend a trajectory that stopped at its horizon by `extra` in `s`.
pub fn continue_trajectory(traj: &Trajectory, extra: f64) -> Trajectory {
    let mut out = traj.clone();
    if traj.termination != Termination::Horizon {
        out.warnings.push(format!("not extended: trajectory already terminated ({:?})", traj.termination));
        return out;
    }
    if let Some(EventRecord { kind: EventKind::HorizonReached, .. }) = out.events.last() {
        out.events.pop();
    }
    let start = *traj.last();
    let horizon = start.s + extra;
    out.config.horizon = horizon;
    continue_from(&mut out, &start, horizon);
    out
}

/// Integrate in the primal chart only, sampled on an arclength grid; used to
/// build metric profiles near the singular orbit.
pub fn primal_on_grid(
    params: &ShootParams,
    cfg: &ShootConfig,
    r_grid: &[f64],
) -> Result<(SeriesLaunch, Vec<PrimalState>), ShootError> {
    let l = launch(params, cfg.epsilon)?;
    let r_end = *r_grid.last().ok_or_else(|| ShootError::Config("empty grid".into()))?;
    let y0 = l.state_at_eps.to_array();
    let guard = cfg.primal_bound.max(10.0 * inf_norm(&y0));
    let kinds = [EventKind::XiZero, EventKind::StateNormExceeds(guard)];
    let seg = run_segment(
        params,
        cfg,
        Phase::Primal,
        params.is_biaxial(),
        params.is_einstein(),
        (cfg.epsilon, 0.0, y0),
        r_end,
        &kinds,
        Some(r_grid),
    );
    let out = seg
        .samples
        .iter()
        .filter(|s| r_grid.contains(&s.r))
        .map(|s| PrimalState::from_array(s.r, &s.state))
        .collect();
    Ok((l, out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n3_zero_one_hits_xi_zero() {
        let p = ShootParams::biaxial(3, 0.0, 1.0).unwrap();
        let t = shoot(&p, &ShootConfig::default()).unwrap();
        assert_eq!(t.termination, Termination::XiZero);
        let ev = t.event(|k| matches!(k, EventKind::XiZero)).unwrap();
        assert!(ev.r.is_finite() && ev.state[0].abs() < 1e-8);
    }

    #[test]
    fn samples_increase() {
        let p = ShootParams::biaxial(3, 0.6, 0.8).unwrap();
        let t = shoot(&p, &ShootConfig::default()).unwrap();
        for w in t.samples.windows(2) {
            assert!(w[1].r > w[0].r && w[1].s > w[0].s);
        }
        assert_eq!(t.samples.len(), t.conserved_log.len());
    }
}
