//! Fixed-step integration of delay differential equations whose lag depends
//! on the state.
//!
//! Every accepted step is stored as a node `(t, state, derivative)`; two
//! consecutive nodes define a cubic Hermite segment, so the solution can be
//! evaluated at any time up to `t_final`. That dense record is what serves the
//! delayed lookups `x(t - tau)` while the integration is running.
//!
//! Steps use the classical four-stage Runge-Kutta scheme. When the lag becomes
//! shorter than the step (the lag law can vanish), a stage needs the solution
//! inside the step that is being computed. The step is then solved as a
//! fixed-point problem: the first pass extrapolates the last segment, later
//! passes interpolate on the provisional segment of the previous pass.

use std::cell::Cell;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Phase-space point `(x, y)` with `y = dx/dt`.
pub type State = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdeError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("time {t} is outside the trajectory (t_final = {t_final})")]
    OutOfRange { t: f64, t_final: f64 },
    #[error("solution diverged (non-finite state) at t = {t}")]
    Divergence { t: f64 },
    #[error("invalid trajectory samples: {0}")]
    InvalidSamples(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Fixed step size `h`.
    pub step: f64,
    pub max_fixed_point_iters: usize,
    /// Relative tolerance between successive fixed-point passes.
    pub fixed_point_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_fixed_point_iters: 8,
            fixed_point_tol: 1e-12,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), DdeError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(DdeError::InvalidConfig(format!(
                "step size must be positive, got {}",
                self.step
            )));
        }
        if !(self.fixed_point_tol > 0.0) {
            return Err(DdeError::InvalidConfig(format!(
                "fixed-point tolerance must be positive, got {}",
                self.fixed_point_tol
            )));
        }
        if self.max_fixed_point_iters == 0 {
            return Err(DdeError::InvalidConfig(
                "fixed-point iteration cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One cubic Hermite piece of a dense trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistorySegment {
    pub t_start: f64,
    pub t_end: f64,
    pub state_start: State,
    pub state_end: State,
    pub deriv_start: State,
    pub deriv_end: State,
}

impl HistorySegment {
    /// Evaluates the Hermite cubic. Endpoints are returned exactly; times
    /// outside `[t_start, t_end]` extrapolate the cubic.
    pub fn eval(&self, t: f64) -> State {
        if t == self.t_start {
            return self.state_start;
        }
        if t == self.t_end {
            return self.state_end;
        }
        let h = self.t_end - self.t_start;
        let s = (t - self.t_start) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let mut out = [0.0; 2];
        for (i, v) in out.iter_mut().enumerate() {
            *v = h00 * self.state_start[i]
                + h10 * h * self.deriv_start[i]
                + h01 * self.state_end[i]
                + h11 * h * self.deriv_end[i];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Node {
    t: f64,
    state: State,
    deriv: State,
}

fn segment_between(a: &Node, b: &Node) -> HistorySegment {
    HistorySegment {
        t_start: a.t,
        t_end: b.t,
        state_start: a.state,
        state_end: b.state,
        deriv_start: a.deriv,
        deriv_end: b.deriv,
    }
}

/// Continuously evaluable solution on `[0, t_final]` with a constant
/// pre-history for `t < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectory {
    nodes: Vec<Node>,
    pre_history: State,
    /// Nominal spacing when the nodes sit on a uniform grid `t_i = i * step`
    /// (the last interval may be shorter).
    uniform_step: Option<f64>,
    unconverged_steps: usize,
}

impl DenseTrajectory {
    /// Builds a trajectory from externally supplied samples `(t, state,
    /// derivative)`. Times must start at 0 and increase strictly.
    pub fn from_samples(
        pre_history: State,
        samples: impl IntoIterator<Item = (f64, State, State)>,
    ) -> Result<Self, DdeError> {
        let nodes: Vec<Node> = samples
            .into_iter()
            .map(|(t, state, deriv)| Node { t, state, deriv })
            .collect();
        if nodes.len() < 2 {
            return Err(DdeError::InvalidSamples("need at least two samples".into()));
        }
        if nodes[0].t != 0.0 {
            return Err(DdeError::InvalidSamples(
                "first sample must be at t = 0".into(),
            ));
        }
        if nodes.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(DdeError::InvalidSamples(
                "sample times must increase strictly".into(),
            ));
        }
        Ok(Self {
            nodes,
            pre_history,
            uniform_step: None,
            unconverged_steps: 0,
        })
    }

    /// Samples `f(t) -> (state, derivative)` on a uniform grid over
    /// `[0, t_final]`. Handy for analysing closed-form signals.
    pub fn from_fn(
        pre_history: State,
        t_final: f64,
        step: f64,
        f: impl Fn(f64) -> (State, State),
    ) -> Result<Self, DdeError> {
        let times = grid_times(t_final, step)?;
        let mut traj = Self::from_samples(
            pre_history,
            times.into_iter().map(|t| {
                let (s, d) = f(t);
                (t, s, d)
            }),
        )?;
        traj.uniform_step = Some(step);
        Ok(traj)
    }

    pub fn t_final(&self) -> f64 {
        self.nodes[self.nodes.len() - 1].t
    }

    pub fn pre_history(&self) -> State {
        self.pre_history
    }

    /// Number of stored nodes (accepted steps plus the initial point).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Steps where the in-step fixed-point iteration hit its cap.
    pub fn unconverged_steps(&self) -> usize {
        self.unconverged_steps
    }

    pub fn segment_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn segment(&self, i: usize) -> HistorySegment {
        segment_between(&self.nodes[i], &self.nodes[i + 1])
    }

    pub fn segments(&self) -> impl Iterator<Item = HistorySegment> + '_ {
        self.nodes.windows(2).map(|w| segment_between(&w[0], &w[1]))
    }

    /// Stored node times and states.
    pub fn samples(&self) -> impl Iterator<Item = (f64, State)> + '_ {
        self.nodes.iter().map(|n| (n.t, n.state))
    }

    /// Stored node times, states and derivatives.
    pub fn samples_with_derivs(&self) -> impl Iterator<Item = (f64, State, State)> + '_ {
        self.nodes.iter().map(|n| (n.t, n.state, n.deriv))
    }

    /// Index of the segment `[t_i, t_{i+1}]` containing `t`, assuming
    /// `0 <= t <= t_final`.
    fn locate(&self, t: f64) -> usize {
        let last = self.nodes.len() - 2;
        let mut i = match self.uniform_step {
            Some(h) => ((t / h) as usize).min(last),
            None => self
                .nodes
                .partition_point(|n| n.t <= t)
                .saturating_sub(1)
                .min(last),
        };
        while i > 0 && self.nodes[i].t > t {
            i -= 1;
        }
        while i < last && self.nodes[i + 1].t < t {
            i += 1;
        }
        i
    }

    /// State at time `t`: the constant pre-history for `t < 0`, Hermite
    /// interpolation on `[0, t_final]`.
    pub fn interpolate(&self, t: f64) -> Result<State, DdeError> {
        if t.is_nan() {
            return Err(DdeError::OutOfRange {
                t,
                t_final: self.t_final(),
            });
        }
        if t < 0.0 {
            return Ok(self.pre_history);
        }
        if t > self.t_final() {
            return Err(DdeError::OutOfRange {
                t,
                t_final: self.t_final(),
            });
        }
        Ok(self.segment(self.locate(t)).eval(t))
    }

    /// Writes `t,x,y` rows, one per node, with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y")?;
        for n in &self.nodes {
            writeln!(w, "{:.16e},{:.16e},{:.16e}", n.t, n.state[0], n.state[1])?;
        }
        Ok(())
    }
}

fn grid_times(t_final: f64, step: f64) -> Result<Vec<f64>, DdeError> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(DdeError::InvalidConfig(format!(
            "t_final must be positive, got {t_final}"
        )));
    }
    // Guard against a sliver final step caused by rounding in t_final / step.
    let n = ((t_final / step) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..n).map(|i| i as f64 * step).collect();
    times.push(t_final);
    Ok(times)
}

/// Trajectory under construction plus the provisional end of the step being
/// solved.
struct Builder {
    nodes: Vec<Node>,
    pre_history: State,
    step: f64,
    provisional: Option<Node>,
    in_step_lookup: Cell<bool>,
}

impl Builder {
    fn lookup(&self, t: f64) -> State {
        if t < 0.0 {
            return self.pre_history;
        }
        let n = self.nodes.len();
        let last = &self.nodes[n - 1];
        if t <= last.t {
            if n == 1 {
                return last.state;
            }
            let mut i = ((t / self.step) as usize).min(n - 2);
            while i > 0 && self.nodes[i].t > t {
                i -= 1;
            }
            while i < n - 2 && self.nodes[i + 1].t < t {
                i += 1;
            }
            return segment_between(&self.nodes[i], &self.nodes[i + 1]).eval(t);
        }
        self.in_step_lookup.set(true);
        match (&self.provisional, n) {
            (Some(p), _) => segment_between(last, p).eval(t),
            (None, 1) => {
                // No segment to extrapolate yet: second-order Taylor from the
                // initial point.
                let dt = t - last.t;
                [
                    last.state[0] + dt * last.deriv[0] + 0.5 * dt * dt * last.deriv[1],
                    last.state[1] + dt * last.deriv[1],
                ]
            }
            (None, _) => segment_between(&self.nodes[n - 2], last).eval(t),
        }
    }
}

fn axpy(y: State, a: f64, k: State) -> State {
    [y[0] + a * k[0], y[1] + a * k[1]]
}

fn is_finite(s: State) -> bool {
    s[0].is_finite() && s[1].is_finite()
}

/// Type-erased delayed right-hand side `(t, state, lookup) -> state'`.
type DelayRhs<'a> = dyn Fn(f64, State, &dyn Fn(f64) -> State) -> State + 'a;

/// A breaking point closer than this to a grid time is left inside the step.
const BREAK_MIN_GAP: f64 = 1e-10;

/// One fixed-step RK4 step from the last node to `t_next`, iterating while
/// lookups fall inside the step. Returns the new state, its derivative and
/// whether the iteration converged.
fn solve_step(
    rhs: &DelayRhs<'_>,
    b: &mut Builder,
    t: f64,
    t_next: f64,
    cfg: &IntegratorConfig,
) -> Result<(State, State, bool), DdeError> {
    let h = t_next - t;
    let y = b.nodes[b.nodes.len() - 1].state;
    b.provisional = None;
    let mut previous: Option<(State, State)> = None;
    for _ in 0..cfg.max_fixed_point_iters {
        b.in_step_lookup.set(false);
        let (y_new, d_new) = {
            let lk = |s: f64| b.lookup(s);
            let k1 = rhs(t, y, &lk);
            let k2 = rhs(t + 0.5 * h, axpy(y, 0.5 * h, k1), &lk);
            let k3 = rhs(t + 0.5 * h, axpy(y, 0.5 * h, k2), &lk);
            let k4 = rhs(t_next, axpy(y, h, k3), &lk);
            let y_new = [
                y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            let d_new = rhs(t_next, y_new, &lk);
            (y_new, d_new)
        };
        if !is_finite(y_new) || !is_finite(d_new) {
            return Err(DdeError::Divergence { t: t_next });
        }
        if !b.in_step_lookup.get() {
            return Ok((y_new, d_new, true));
        }
        if let Some((y_prev, d_prev)) = previous {
            let scale = 1.0_f64.max(y_new[0].abs()).max(y_new[1].abs());
            let diff = (0..2)
                .map(|i| {
                    (y_new[i] - y_prev[i])
                        .abs()
                        .max((d_new[i] - d_prev[i]).abs())
                })
                .fold(0.0, f64::max);
            if diff <= cfg.fixed_point_tol * scale {
                return Ok((y_new, d_new, true));
            }
        }
        previous = Some((y_new, d_new));
        b.provisional = Some(Node {
            t: t_next,
            state: y_new,
            deriv: d_new,
        });
    }
    let (y_new, d_new) = previous.expect("at least one pass ran");
    Ok((y_new, d_new, false))
}

/// Earliest time the right-hand side looks up at `(t, state)`, or `None`
/// when it does not look back at all.
fn query_time(rhs: &DelayRhs<'_>, b: &Builder, t: f64, state: State) -> Option<f64> {
    let earliest = Cell::new(f64::INFINITY);
    let lk = |s: f64| {
        earliest.set(earliest.get().min(s));
        b.lookup(s)
    };
    rhs(t, state, &lk);
    let s = earliest.get();
    s.is_finite().then_some(s)
}

/// Bisects for the time in `[t, end.t]` where the delayed argument reaches
/// zero, with states taken from the provisional step.
fn locate_crossing(rhs: &DelayRhs<'_>, b: &Builder, t: f64, end: &Node) -> f64 {
    let seg = segment_between(&b.nodes[b.nodes.len() - 1], end);
    let (mut lo, mut hi) = (t, end.t);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match query_time(rhs, b, mid, seg.eval(mid)) {
            Some(s) if s < 0.0 => lo = mid,
            _ => hi = mid,
        }
    }
    hi
}

fn integrate_impl(
    rhs: &DelayRhs<'_>,
    pre_history: State,
    initial: State,
    t_final: f64,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory, DdeError> {
    cfg.validate()?;
    let times = grid_times(t_final, cfg.step)?;
    let mut b = Builder {
        nodes: Vec::with_capacity(times.len()),
        pre_history,
        step: cfg.step,
        provisional: None,
        in_step_lookup: Cell::new(false),
    };
    let d0 = {
        b.nodes.push(Node {
            t: 0.0,
            state: initial,
            deriv: [0.0; 2],
        });
        let lk = |s: f64| b.lookup(s);
        rhs(0.0, initial, &lk)
    };
    if !is_finite(initial) || !is_finite(d0) {
        return Err(DdeError::Divergence { t: 0.0 });
    }
    b.nodes[0].deriv = d0;

    // The constant history joins the solution with a jump in y'. Where the
    // delayed argument first passes t = 0 the right-hand side loses
    // smoothness, so that step is split at the crossing.
    let mut crossed = query_time(rhs, &b, 0.0, initial).is_none_or(|s| s >= 0.0);
    let mut unconverged = 0usize;
    for w in times.windows(2) {
        let (t, t_next) = (w[0], w[1]);
        let (mut state, mut deriv, mut ok) = solve_step(rhs, &mut b, t, t_next, cfg)?;
        if !crossed {
            let end = Node {
                t: t_next,
                state,
                deriv,
            };
            b.provisional = Some(end);
            if query_time(rhs, &b, t_next, state).is_none_or(|s| s >= 0.0) {
                crossed = true;
                let t_star = locate_crossing(rhs, &b, t, &end);
                if t_star - t > BREAK_MIN_GAP && t_next - t_star > BREAK_MIN_GAP {
                    let (s1, d1, ok1) = solve_step(rhs, &mut b, t, t_star, cfg)?;
                    unconverged += usize::from(!ok1);
                    b.nodes.push(Node {
                        t: t_star,
                        state: s1,
                        deriv: d1,
                    });
                    (state, deriv, ok) = solve_step(rhs, &mut b, t_star, t_next, cfg)?;
                }
            }
        }
        unconverged += usize::from(!ok);
        b.nodes.push(Node {
            t: t_next,
            state,
            deriv,
        });
    }

    Ok(DenseTrajectory {
        nodes: b.nodes,
        pre_history,
        uniform_step: Some(cfg.step),
        unconverged_steps: unconverged,
    })
}

/// Integrates `y' = rhs(t, y, lookup)` where `lookup(s)` returns the solution
/// at any earlier time `s` (or slightly later, inside the current step). The
/// history is the constant state `(x0, 0)` for `t < 0`, and the solution
/// starts from that state at `t = 0`.
pub fn integrate_dde<F>(
    rhs: F,
    x0: f64,
    t_final: f64,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory, DdeError>
where
    F: Fn(f64, State, &dyn Fn(f64) -> State) -> State,
{
    let start = [x0, 0.0];
    integrate_impl(&rhs, start, start, t_final, cfg)
}

/// Integrates the ordinary system `y' = rhs(t, y)` from `initial`.
pub fn integrate_ode<F>(
    rhs: F,
    initial: State,
    t_final: f64,
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory, DdeError>
where
    F: Fn(f64, State) -> State,
{
    integrate_impl(
        &|t, y, _: &dyn Fn(f64) -> State| rhs(t, y),
        initial,
        initial,
        t_final,
        cfg,
    )
}
