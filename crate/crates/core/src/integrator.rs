//! Dormand–Prince 5(4) with PI step control, dense output and
//! sign-change event location.

use crate::kinetics::{reaction_rates, KineticParams, SpeciesState};
use crate::vladimirov::{DiffusionOperator, VladimirovError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    pub event_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            h_init: 1e-4,
            h_min: 1e-14,
            h_max: 1.0,
            max_steps: 1_000_000,
            event_tol: 1e-9,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, message: &str| {
            Err(ConfigError {
                field,
                message: message.to_string(),
            })
        };
        for (field, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("h_min", self.h_min),
            ("event_tol", self.event_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(field, "must be positive");
            }
        }
        if !(self.h_min <= self.h_init && self.h_init.is_finite()) {
            return bad("h_init", "must satisfy h_min <= h_init");
        }
        if !(self.h_init <= self.h_max && self.h_max.is_finite()) {
            return bad("h_max", "must satisfy h_init <= h_max");
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be positive");
        }
        Ok(())
    }
}

/// `dy/dt = F(t, y)`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

/// Adapts a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.f)(t, y, dy)
    }
}

/// A scalar event function. It fires when its value goes from positive to
/// non-positive; a value that is already non-positive at the start fires
/// immediately and is marked degenerate.
pub struct Event<'a> {
    pub id: usize,
    pub terminal: bool,
    pub g: EventFn<'a>,
}

pub type EventFn<'a> = Box<dyn Fn(f64, &[f64]) -> f64 + 'a>;

impl<'a> Event<'a> {
    pub fn new(id: usize, terminal: bool, g: impl Fn(f64, &[f64]) -> f64 + 'a) -> Self {
        Self {
            id,
            terminal,
            g: Box::new(g),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventHit {
    pub id: usize,
    pub t: f64,
    pub y: Vec<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl Trajectory {
    fn push(&mut self, t: f64, y: &[f64]) {
        self.t.push(t);
        self.y.push(y.to_vec());
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.t.last()?, self.y.last()?.as_slice()))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Solution {
    /// Initial point, every accepted step, and every located event.
    pub trajectory: Trajectory,
    pub events: Vec<EventHit>,
    /// True when a terminal event stopped the run before `t_end`.
    pub terminated: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Solution {
    pub fn final_time(&self) -> f64 {
        self.trajectory.last().map(|(t, _)| t).unwrap_or(f64::NAN)
    }

    pub fn final_state(&self) -> &[f64] {
        self.trajectory.last().map(|(_, y)| y).unwrap_or(&[])
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverFailure {
    #[error("invalid solver configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("initial state has length {got}, system expects {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    StepBudget {
        max_steps: usize,
        t: f64,
        partial: Box<Solution>,
    },
    #[error("step size {h} fell below h_min at t = {t}")]
    StepUnderflow { h: f64, t: f64, partial: Box<Solution> },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64, partial: Box<Solution> },
}

impl SolverFailure {
    /// Whatever was integrated before the failure.
    pub fn partial(&self) -> Option<&Solution> {
        match self {
            SolverFailure::StepBudget { partial, .. }
            | SolverFailure::StepUnderflow { partial, .. }
            | SolverFailure::NonFinite { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

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

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;

/// Quartic interpolant over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseStep {
    t0: f64,
    h: f64,
    rc: [Vec<f64>; 5],
}

impl DenseStep {
    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.rc;
        for i in 0..out.len() {
            out[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.rc[0].len()];
        self.eval_into(t, &mut out);
        out
    }
}

struct Work {
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
    y1: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Self {
            k: std::array::from_fn(|_| vec![0.0; n]),
            tmp: vec![0.0; n],
            y1: vec![0.0; n],
        }
    }
}

/// Takes one trial step from `(t, y)` of size `h`, with `k[0] = F(t, y)`
/// already filled. Leaves the 5th-order result in `w.y1`, `F(t+h, y1)`
/// in `k[6]`, and returns the scaled error norm.
fn trial_step(sys: &dyn OdeSystem, t: f64, y: &[f64], h: f64, cfg: &SolverConfig, w: &mut Work) -> f64 {
    let n = y.len();
    let Work { k, tmp, y1 } = w;
    let stage = |coef: &[(usize, f64)], k: &[Vec<f64>; 7], tmp: &mut Vec<f64>| {
        for i in 0..n {
            let mut acc = 0.0;
            for &(j, a) in coef {
                acc += a * k[j][i];
            }
            tmp[i] = y[i] + h * acc;
        }
    };
    stage(&[(0, A21)], k, tmp);
    sys.rhs(t + C2 * h, tmp, &mut k[1]);
    stage(&[(0, A31), (1, A32)], k, tmp);
    sys.rhs(t + C3 * h, tmp, &mut k[2]);
    stage(&[(0, A41), (1, A42), (2, A43)], k, tmp);
    sys.rhs(t + C4 * h, tmp, &mut k[3]);
    stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], k, tmp);
    sys.rhs(t + C5 * h, tmp, &mut k[4]);
    stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], k, tmp);
    sys.rhs(t + h, tmp, &mut k[5]);
    stage(&[(0, A71), (2, A73), (3, A74), (4, A75), (5, A76)], k, y1);
    sys.rhs(t + h, y1, &mut k[6]);
    let mut err = 0.0;
    for i in 0..n {
        let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
        let sk = cfg.atol + cfg.rtol * y[i].abs().max(y1[i].abs());
        err += (e / sk) * (e / sk);
    }
    if n == 0 {
        0.0
    } else {
        (err / n as f64).sqrt()
    }
}

fn dense_step(t: f64, y: &[f64], h: f64, w: &Work) -> DenseStep {
    let n = y.len();
    let k = &w.k;
    let mut rc: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        let ydiff = w.y1[i] - y[i];
        let bspl = h * k[0][i] - ydiff;
        rc[0][i] = y[i];
        rc[1][i] = ydiff;
        rc[2][i] = bspl;
        rc[3][i] = ydiff - h * k[6][i] - bspl;
        rc[4][i] = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
    }
    DenseStep { t0: t, h, rc }
}

/// Bisects `g` on the interpolant over `[ta, tb]` with `g(ta) > 0 >= g(tb)`
/// and returns the upper end of the final bracket.
fn locate(ev: &Event, dense: &DenseStep, mut ta: f64, mut tb: f64, tol: f64, buf: &mut [f64]) -> f64 {
    while tb - ta > tol {
        let tm = 0.5 * (ta + tb);
        if tm <= ta || tm >= tb {
            break;
        }
        dense.eval_into(tm, buf);
        if (ev.g)(tm, buf) > 0.0 {
            ta = tm;
        } else {
            tb = tm;
        }
    }
    tb
}

/// Integrates `sys` from `(t0, y0)` to `t_end`, stopping early at the
/// first terminal event.
pub fn integrate(
    sys: &dyn OdeSystem,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    cfg: &SolverConfig,
    events: &[Event],
) -> Result<Solution, SolverFailure> {
    cfg.validate()?;
    let n = sys.dim();
    if y0.len() != n {
        return Err(SolverFailure::Dimension {
            expected: n,
            got: y0.len(),
        });
    }
    let mut sol = Solution::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    sol.trajectory.push(t, &y);

    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();
    let mut armed = vec![true; events.len()];
    for (i, ev) in events.iter().enumerate() {
        if g_prev[i] <= 0.0 {
            armed[i] = false;
            sol.events.push(EventHit {
                id: ev.id,
                t,
                y: y.clone(),
                degenerate: true,
            });
            if ev.terminal {
                sol.terminated = true;
            }
        }
    }
    if sol.terminated || t >= t_end {
        return Ok(sol);
    }

    let mut w = Work::new(n);
    let mut buf = vec![0.0; n];
    sys.rhs(t, &y, &mut w.k[0]);
    let mut h = cfg.h_init.min(cfg.h_max);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;
    let mut attempts = 0usize;

    loop {
        if attempts >= cfg.max_steps {
            return Err(SolverFailure::StepBudget {
                max_steps: cfg.max_steps,
                t,
                partial: Box::new(sol),
            });
        }
        let remaining = t_end - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        } else if h < cfg.h_min {
            return Err(SolverFailure::StepUnderflow {
                h,
                t,
                partial: Box::new(sol),
            });
        }
        attempts += 1;
        let err = trial_step(sys, t, &y, h, cfg, &mut w);
        if !err.is_finite() {
            // shrink hard and retry; persistent blow-up ends in underflow
            sol.rejected_steps += 1;
            h *= FAC_MIN;
            last_rejected = true;
            if h < cfg.h_min {
                return Err(SolverFailure::NonFinite {
                    t,
                    partial: Box::new(sol),
                });
            }
            continue;
        }
        let fac11 = err.powf(EXPO);
        if err <= 1.0 {
            let mut fac = fac11 / fac_old.powf(BETA) / SAFETY;
            fac = fac.clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            if last_rejected {
                fac = fac.max(1.0);
            }
            let h_new = (h / fac).min(cfg.h_max);
            fac_old = err.max(1e-4);

            let t_new = if last { t_end } else { t + h };
            let dense = dense_step(t, &y, h, &w);
            let mut hits: Vec<(f64, usize)> = Vec::new();
            for (i, ev) in events.iter().enumerate() {
                if !armed[i] {
                    continue;
                }
                let g_new = (ev.g)(t_new, &w.y1);
                if g_prev[i] > 0.0 && g_new <= 0.0 {
                    let te = locate(ev, &dense, t, t_new, cfg.event_tol, &mut buf);
                    hits.push((te, i));
                }
                g_prev[i] = g_new;
            }
            hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut stop_at = None;
            for &(te, i) in &hits {
                if let Some(ts) = stop_at {
                    if te > ts {
                        break;
                    }
                }
                let ye = if te >= t_new { w.y1.clone() } else { dense.eval(te) };
                armed[i] = false;
                sol.events.push(EventHit {
                    id: events[i].id,
                    t: te,
                    y: ye.clone(),
                    degenerate: false,
                });
                if sol.trajectory.t.last() != Some(&te) {
                    sol.trajectory.push(te, &ye);
                }
                if events[i].terminal && stop_at.is_none() {
                    stop_at = Some(te);
                }
            }
            sol.accepted_steps += 1;
            if stop_at.is_some() {
                sol.terminated = true;
                return Ok(sol);
            }
            t = t_new;
            std::mem::swap(&mut y, &mut w.y1);
            let (k0, rest) = w.k.split_at_mut(1);
            std::mem::swap(&mut k0[0], &mut rest[5]);
            if sol.trajectory.t.last() != Some(&t) {
                sol.trajectory.push(t, &y);
            }
            if last {
                return Ok(sol);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SolverFailure::NonFinite {
                    t,
                    partial: Box::new(sol),
                });
            }
            h = h_new;
            last_rejected = false;
        } else {
            sol.rejected_steps += 1;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }
}

/// Coupled reaction-diffusion system on `n` compartments with state layout
/// `[u_0..u_n, v_0..v_n, w_0..w_n]`.
///
/// Compartments outside the evolving mask are frozen, and diffusion acts
/// only among evolving compartments as
/// `D(x)_i = m_i (A (m x))_i - m_i x_i (A m)_i`, which keeps the total of
/// each species unchanged.
pub struct CoupledSystem {
    op: Box<dyn DiffusionOperator>,
    kp: KineticParams,
    n: usize,
    mask: Option<(Vec<f64>, Vec<f64>)>,
}

impl CoupledSystem {
    pub fn new(op: Box<dyn DiffusionOperator>, kp: KineticParams) -> Self {
        let n = op.dim();
        Self { op, kp, n, mask: None }
    }

    pub fn compartments(&self) -> usize {
        self.n
    }

    pub fn operator_name(&self) -> &'static str {
        self.op.name()
    }

    /// Restricts evolution to compartments with `evolving[i] == true`.
    pub fn set_evolving(&mut self, evolving: &[bool]) -> Result<(), VladimirovError> {
        if evolving.len() != self.n {
            return Err(VladimirovError::DimensionMismatch {
                expected: self.n,
                got: evolving.len(),
            });
        }
        if evolving.iter().all(|&e| e) {
            self.mask = None;
            return Ok(());
        }
        let m: Vec<f64> = evolving.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
        let am = self.op.apply(&m)?;
        self.mask = Some((m, am));
        Ok(())
    }

    fn diffuse(&self, x: &[f64], scale: f64, out: &mut [f64], scratch: &mut [f64]) {
        match &self.mask {
            None => {
                self.op.apply_into(x, out);
                for o in out.iter_mut() {
                    *o *= scale;
                }
            }
            Some((m, am)) => {
                for i in 0..self.n {
                    scratch[i] = m[i] * x[i];
                }
                self.op.apply_into(scratch, out);
                for i in 0..self.n {
                    out[i] = scale * m[i] * (out[i] - x[i] * am[i]);
                }
            }
        }
    }

    /// Splits a packed state into `(u, v, w)` slices.
    pub fn unpack<'a>(&self, y: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let n = self.n;
        (&y[..n], &y[n..2 * n], &y[2 * n..3 * n])
    }
}

/// Packs per-compartment `(u, v, w)` vectors into one state vector.
pub fn pack(u: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(u.len() * 3);
    y.extend_from_slice(u);
    y.extend_from_slice(v);
    y.extend_from_slice(w);
    y
}

impl OdeSystem for CoupledSystem {
    fn dim(&self) -> usize {
        3 * self.n
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let mut scratch = vec![0.0; n];
        let (du, rest) = dy.split_at_mut(n);
        let (dv, dw) = rest.split_at_mut(n);
        self.diffuse(&y[..n], 1.0, du, &mut scratch);
        self.diffuse(&y[n..2 * n], self.kp.d, dv, &mut scratch);
        for i in 0..n {
            let s = SpeciesState::new(y[i], y[n + i], y[2 * n + i]);
            let (f, g, h) = reaction_rates(&s, &self.kp);
            let m = self.mask.as_ref().map_or(1.0, |(m, _)| m[i]);
            du[i] += m * f;
            dv[i] += m * g;
            dw[i] = m * h;
        }
    }
}

/// `v_i - w_i` on the packed state of `n` compartments.
pub fn crossing_event<'a>(branch: usize, n: usize, terminal: bool) -> Event<'a> {
    Event::new(branch, terminal, move |_, y: &[f64]| y[n + branch] - y[2 * n + branch])
}
