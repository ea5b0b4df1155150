//! Dormand-Prince 5(4) with the standard fourth order continuous extension.

use serde::{Deserialize, Serialize};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { rtol: 1e-10, atol: 1e-12, h0: None, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

/// A scalar event function on the raw state.
pub struct EventFn<'a, const N: usize> {
    pub g: Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>,
    pub crossing: Crossing,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stop {
    Horizon,
    Event(usize),
    StepUnderflow,
    NonFinite,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    /// `(event index, time, state)` in order of occurrence.
    pub events: Vec<(usize, f64, [f64; N])>,
    pub stop: Stop,
    pub steps: usize,
    pub rejected: usize,
    /// Last accepted step size, useful to restart.
    pub h_last: f64,
}

impl<const N: usize> Solution<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        (*self.t.last().unwrap(), *self.y.last().unwrap())
    }
}

/// Continuous extension on one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct Dense<const N: usize> {
    pub t0: f64,
    pub h: f64,
    r: [[f64; N]; 5],
}

impl<const N: usize> Dense<N> {
    pub fn eval(&self, t: f64) -> [f64; N] {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let mut out = [0.0; N];
        for i in 0..N {
            out[i] = self.r[0][i]
                + th * (self.r[1][i] + th1 * (self.r[2][i] + th * (self.r[3][i] + th1 * self.r[4][i])));
        }
        out
    }
}

fn err_norm<const N: usize>(e: &[f64; N], y0: &[f64; N], y1: &[f64; N], c: &StepControl) -> f64 {
    // max norm keeps embedded subsystems integrated exactly like their reductions
    let mut m: f64 = 0.0;
    for i in 0..N {
        let sc = c.atol + c.rtol * y0[i].abs().max(y1[i].abs());
        m = m.max((e[i] / sc).abs());
    }
    m
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], k1: &[f64; N], c: &StepControl) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let sc = |y: f64| c.atol + c.rtol * y.abs();
    let mut d0: f64 = 0.0;
    let mut d1: f64 = 0.0;
    for i in 0..N {
        d0 = d0.max((y0[i] / sc(y0[i])).abs());
        d1 = d1.max((k1[i] / sc(y0[i])).abs());
    }
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(c.h_max);
    let mut y1 = [0.0; N];
    for i in 0..N {
        y1[i] = y0[i] + h0 * k1[i];
    }
    let k2 = f(t0 + h0, &y1);
    let mut d2: f64 = 0.0;
    for i in 0..N {
        d2 = d2.max(((k2[i] - k1[i]) / sc(y0[i])).abs() / h0);
    }
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(c.h_max)
}

/// Locate a sign change of `g` inside one step by bisection on the dense output.
fn locate<const N: usize>(
    g: &dyn Fn(f64, &[f64; N]) -> f64,
    dense: &Dense<N>,
    mut a: f64,
    mut ga: f64,
    mut b: f64,
) -> f64 {
    for _ in 0..200 {
        if b - a <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m, &dense.eval(m));
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    b
}

fn crosses(g0: f64, g1: f64, dir: Crossing) -> bool {
    match dir {
        Crossing::Rising => g0 < 0.0 && g1 >= 0.0,
        Crossing::Falling => g0 > 0.0 && g1 <= 0.0,
        Crossing::Either => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
    }
}

/// Integrate `y' = f(t, y)` forward from `t0` to `t_end`.
///
/// With `t_eval` the solution is sampled on that grid (plus event states and
/// the final state); otherwise every accepted step is kept.
pub fn integrate<const N: usize, F>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    events: &[EventFn<'_, N>],
    t_eval: Option<&[f64]>,
) -> Solution<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let mut sol = Solution {
        t: vec![t0],
        y: vec![y0],
        events: Vec::new(),
        stop: Stop::Horizon,
        steps: 0,
        rejected: 0,
        h_last: 0.0,
    };
    if !y0.iter().all(|v| v.is_finite()) {
        sol.stop = Stop::NonFinite;
        return sol;
    }
    if t_end <= t0 {
        return sol;
    }
    let mut eval_idx = 0usize;
    if let Some(te) = t_eval {
        while eval_idx < te.len() && te[eval_idx] <= t0 {
            eval_idx += 1;
        }
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = ctl.h0.unwrap_or_else(|| initial_step(&mut f, t, &y, &k1, ctl));
    let mut gvals: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();
    let mut fac_old: f64 = 1e-4;

    loop {
        if sol.steps >= ctl.max_steps {
            sol.stop = Stop::MaxSteps;
            break;
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1e-300);
        if h < h_min {
            sol.stop = Stop::StepUnderflow;
            break;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let mut yt = [0.0; N];
        for i in 0..N {
            yt[i] = y[i] + h * A21 * k1[i];
        }
        let k2 = f(t + C2 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        let k3 = f(t + C3 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        let k4 = f(t + C4 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        let k5 = f(t + C5 * h, &yt);
        for i in 0..N {
            yt[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let tn = if last { t_end } else { t + h };
        let k6 = f(tn, &yt);
        let mut yn = [0.0; N];
        for i in 0..N {
            yn[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        let k7 = f(tn, &yn);
        let mut e = [0.0; N];
        for i in 0..N {
            e[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let finite = yn.iter().chain(k7.iter()).all(|v| v.is_finite());
        let err = if finite { err_norm(&e, &y, &yn, ctl) } else { f64::INFINITY };

        if err > 1.0 {
            sol.rejected += 1;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.1 };
            h *= fac;
            continue;
        }

        // accepted
        sol.steps += 1;
        let mut r = [[0.0; N]; 5];
        for i in 0..N {
            let dy = yn[i] - y[i];
            let bspl = h * k1[i] - dy;
            r[0][i] = y[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k7[i] - bspl;
            r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        let dense = Dense { t0: t, h, r };

        // events: earliest terminal crossing wins
        let gnew: Vec<f64> = events.iter().map(|ev| (ev.g)(tn, &yn)).collect();
        let mut hits: Vec<(f64, usize)> = Vec::new();
        for (k, ev) in events.iter().enumerate() {
            if crosses(gvals[k], gnew[k], ev.crossing) {
                let te = locate(ev.g.as_ref(), &dense, t, gvals[k], tn);
                hits.push((te, k));
            }
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut term: Option<(f64, usize)> = None;
        for &(te, k) in &hits {
            if let Some((tt, _)) = term {
                if te > tt {
                    break;
                }
            }
            sol.events.push((k, te, dense.eval(te)));
            if events[k].terminal {
                term = Some((te, k));
                break;
            }
        }
        let t_stop = term.map(|x| x.0).unwrap_or(tn);

        if let Some(te) = t_eval {
            while eval_idx < te.len() && te[eval_idx] <= t_stop {
                let tq = te[eval_idx];
                if tq > *sol.t.last().unwrap() {
                    sol.t.push(tq);
                    sol.y.push(if tq == tn { yn } else { dense.eval(tq) });
                }
                eval_idx += 1;
            }
        }

        if let Some((te, k)) = term {
            let ye = dense.eval(te);
            if te > *sol.t.last().unwrap() {
                sol.t.push(te);
                sol.y.push(ye);
            }
            sol.stop = Stop::Event(k);
            sol.h_last = h;
            return sol;
        }

        if t_eval.is_none() || last {
            if tn > *sol.t.last().unwrap() {
                sol.t.push(tn);
                sol.y.push(yn);
            }
        }

        t = tn;
        y = yn;
        k1 = k7;
        gvals = gnew;
        sol.h_last = h;
        if last {
            sol.stop = Stop::Horizon;
            break;
        }
        // PI step size control
        let err_c = err.max(1e-10);
        let mut fac = 0.9 * err_c.powf(-0.17) * fac_old.powf(0.04);
        fac = fac.clamp(0.2, 10.0);
        fac_old = err_c.max(1e-4);
        h = (h * fac).min(ctl.h_max);
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_constant() {
        let s = integrate(|_, _| [0.0; 2], 0.0, [1.0, -2.0], 3.0, &StepControl::default(), &[], None);
        assert_eq!(s.stop, Stop::Horizon);
        assert!(s.y.iter().all(|v| *v == [1.0, -2.0]));
        assert!(s.events.is_empty());
    }

    #[test]
    fn exponential_decay() {
        let c = StepControl::default();
        let s = integrate(|_, y| [-y[0]], 0.0, [1.0], 5.0, &c, &[], None);
        let (t, y) = s.last();
        assert_eq!(t, 5.0);
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-10 * 5.0);
    }

    #[test]
    fn dense_output_order() {
        // harmonic oscillator sampled between steps
        let c = StepControl { rtol: 1e-12, atol: 1e-14, ..Default::default() };
        let grid: Vec<f64> = (1..=50).map(|i| i as f64 * 0.1).collect();
        let s = integrate(|_, y| [y[1], -y[0]], 0.0, [0.0, 1.0], 5.0, &c, &[], Some(&grid));
        for (t, y) in s.t.iter().zip(&s.y) {
            assert!((y[0] - t.sin()).abs() < 1e-9, "t={t}");
        }
        assert_eq!(s.t.len(), 51);
    }

    #[test]
    fn event_location() {
        let c = StepControl::default();
        let ev = [EventFn::<2> { g: Box::new(|_, y| y[0]), crossing: Crossing::Falling, terminal: true }];
        // x = cos t reaches zero at pi/2
        let s = integrate(|_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, &c, &ev, None);
        assert_eq!(s.stop, Stop::Event(0));
        let (t, _) = s.last();
        assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn nonterminal_events_recorded() {
        let c = StepControl::default();
        let ev = [EventFn::<2> { g: Box::new(|_, y| y[0]), crossing: Crossing::Either, terminal: false }];
        let s = integrate(|_, y| [y[1], -y[0]], 0.0, [1.0, 0.0], 10.0, &c, &ev, None);
        assert_eq!(s.stop, Stop::Horizon);
        assert_eq!(s.events.len(), 3);
    }
}
