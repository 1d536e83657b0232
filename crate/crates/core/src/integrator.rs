//! Fixed-step fourth-order integration of the oscillators together with their companion
//! diagonal solution:
//!
//! ```text
//! x_i' = F(X, x_i) + H_i(X),    μ' = F(X, μ)
//! ```
//!
//! The joint state is stored as `[x_1, …, x_N, μ]`, so one batched field evaluation
//! covers all `N + 1` right-hand sides.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::dispersion::{CurveTag, DispersionCurve};
use crate::error::{invalid, Error, Result};
use crate::hypotheses::HypothesisReport;
use crate::model::{ModelSpec, PerturbationSpec};
use crate::scalar::{spread, Scalar};

/// Tube margins at or below this value count as violations.
pub const MARGIN_TOLERANCE: f64 = 1e-12;
/// Crossing refinement target, relative to `max(1, |level|)`.
pub const CROSSING_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JointState<T: Scalar> {
    pub t: T,
    pub x: Vec<T>,
    pub mu: T,
}

impl<T: Scalar> JointState<T> {
    fn from_packed(t: T, y: &[T]) -> Self {
        let n = y.len() - 1;
        Self {
            t,
            x: y[..n].to_vec(),
            mu: y[n],
        }
    }

    /// `δ = max_i |x_i − μ|`.
    pub fn delta(&self) -> T {
        deviation(&self.x, self.mu)
    }
}

fn deviation<T: Scalar>(x: &[T], mu: T) -> T {
    x.iter().fold(T::zero(), |m, &v| m.max((v - mu).abs()))
}

/// `h = min(0.01/L, 0.001/α)`.
pub fn default_step<T: Scalar>(report: &HypothesisReport<T>) -> T {
    let a = T::lit(0.01) / report.l_total;
    let b = T::lit(0.001) / report.alpha;
    match (a.is_finite() && a > T::zero(), b.is_finite() && b > T::zero()) {
        (true, true) => a.min(b),
        (true, false) => a,
        (false, true) => b,
        (false, false) => T::lit(1e-3),
    }
}

fn check_dims<T: Scalar>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    x: &[T],
) -> Result<()> {
    let n = model.n();
    if perturbation.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: perturbation.n(),
        });
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(())
}

#[inline]
fn packed_rhs<T: Scalar>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    y: &[T],
    out: &mut [T],
) {
    let n = model.n();
    model.eval_batch(&y[..n], y, out);
    perturbation.add_to(&y[..n], &mut out[..n]);
}

/// `(F(X, x_1) + H_1(X), …, F(X, x_N) + H_N(X), F(X, μ))`.
pub fn rhs<T: Scalar>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    state: &JointState<T>,
) -> Result<Vec<T>> {
    check_dims(model, perturbation, &state.x)?;
    let mut y = state.x.clone();
    y.push(state.mu);
    let mut out = vec![T::zero(); y.len()];
    packed_rhs(model, perturbation, &y, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            t: state.t.to_f64_lossy(),
        });
    }
    Ok(out)
}

/// Classic RK4 with reusable stage buffers.
struct Rk4<'a, T: Scalar> {
    model: &'a ModelSpec<T>,
    perturbation: &'a PerturbationSpec<T>,
    stage: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
}

impl<'a, T: Scalar> Rk4<'a, T> {
    fn new(model: &'a ModelSpec<T>, perturbation: &'a PerturbationSpec<T>) -> Self {
        let len = model.n() + 1;
        Self {
            model,
            perturbation,
            stage: vec![T::zero(); len],
            k2: vec![T::zero(); len],
            k3: vec![T::zero(); len],
            k4: vec![T::zero(); len],
        }
    }

    fn deriv(&self, y: &[T], out: &mut [T]) {
        packed_rhs(self.model, self.perturbation, y, out);
    }

    /// Writes the step of size `h` from `y` (with `k1 = f(y)`) into `out`.
    fn step(&mut self, y: &[T], k1: &[T], h: T, out: &mut [T]) {
        let half = h / T::lit(2.0);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y).zip(k1) {
            *s = yi + half * k;
        }
        packed_rhs(self.model, self.perturbation, &self.stage, &mut self.k2);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y).zip(&self.k2) {
            *s = yi + half * k;
        }
        packed_rhs(self.model, self.perturbation, &self.stage, &mut self.k3);
        for ((s, &yi), &k) in self.stage.iter_mut().zip(y).zip(&self.k3) {
            *s = yi + h * k;
        }
        packed_rhs(self.model, self.perturbation, &self.stage, &mut self.k4);
        let sixth = h / T::lit(6.0);
        let two = T::lit(2.0);
        for i in 0..y.len() {
            out[i] = y[i] + sixth * (k1[i] + two * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

/// One accepted step as seen by an observer: packed state and derivative.
#[derive(Clone, Copy, Debug)]
pub struct StepView<'a, T> {
    pub t: T,
    pub state: &'a [T],
    pub deriv: &'a [T],
}

impl<T: Scalar> StepView<'_, T> {
    pub fn x(&self) -> &[T] {
        &self.state[..self.state.len() - 1]
    }

    pub fn mu(&self) -> T {
        self.state[self.state.len() - 1]
    }

    pub fn mu_dot(&self) -> T {
        self.deriv[self.deriv.len() - 1]
    }

    /// `min_i x_i'`.
    pub fn min_velocity(&self) -> T {
        self.deriv[..self.deriv.len() - 1]
            .iter()
            .copied()
            .fold(T::infinity(), T::min)
    }

    pub fn delta(&self) -> T {
        deviation(self.x(), self.mu())
    }
}

/// Integrates from `t = 0` to `t_end` with `ceil(t_end/h)` equal steps, calling `observer`
/// on the initial state and after every step. The observer may stop the run early.
/// Returns the last state reached.
pub fn integrate_with<T: Scalar, O>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    x0: &[T],
    mu0: T,
    t_end: T,
    h: T,
    observer: O,
) -> Result<JointState<T>>
where
    O: FnMut(&StepView<'_, T>) -> Result<ControlFlow<()>>,
{
    if !(h > T::zero() && h.is_finite()) {
        return Err(invalid("h", format!("step must be positive, got {h}")));
    }
    if !(t_end >= T::zero() && t_end.is_finite()) {
        return Err(invalid("t_end", format!("must be nonnegative, got {t_end}")));
    }
    let steps = (t_end / h).ceil().to_usize().unwrap_or(0);
    let dt = if steps == 0 {
        T::zero()
    } else {
        t_end / T::from_usize_lossy(steps)
    };
    run_steps(model, perturbation, x0, mu0, dt, steps, Some(t_end), observer)
}

/// Takes exactly `steps` steps of size `dt`; step `i` is reported at `t = i·dt`.
pub fn integrate_steps<T: Scalar, O>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    x0: &[T],
    mu0: T,
    dt: T,
    steps: usize,
    observer: O,
) -> Result<JointState<T>>
where
    O: FnMut(&StepView<'_, T>) -> Result<ControlFlow<()>>,
{
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(invalid("h", format!("step must be positive, got {dt}")));
    }
    run_steps(model, perturbation, x0, mu0, dt, steps, None, observer)
}

#[allow(clippy::too_many_arguments)]
fn run_steps<T: Scalar, O>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    x0: &[T],
    mu0: T,
    dt: T,
    steps: usize,
    t_last: Option<T>,
    mut observer: O,
) -> Result<JointState<T>>
where
    O: FnMut(&StepView<'_, T>) -> Result<ControlFlow<()>>,
{
    check_dims(model, perturbation, x0)?;
    let mut rk = Rk4::new(model, perturbation);
    let mut y: Vec<T> = x0.iter().copied().chain(std::iter::once(mu0)).collect();
    let mut k1 = vec![T::zero(); y.len()];
    let mut next = vec![T::zero(); y.len()];
    rk.deriv(&y, &mut k1);
    let finite = |y: &[T], k: &[T]| y.iter().chain(k).all(|v| v.is_finite());
    if !finite(&y, &k1) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    let mut t = T::zero();
    if observer(&StepView { t, state: &y, deriv: &k1 })?.is_break() {
        return Ok(JointState::from_packed(t, &y));
    }
    for i in 1..=steps {
        rk.step(&y, &k1, dt, &mut next);
        std::mem::swap(&mut y, &mut next);
        t = match t_last {
            Some(end) if i == steps => end,
            _ => T::from_usize_lossy(i) * dt,
        };
        rk.deriv(&y, &mut k1);
        if !finite(&y, &k1) {
            return Err(Error::NonFinite { t: t.to_f64_lossy() });
        }
        if observer(&StepView { t, state: &y, deriv: &k1 })?.is_break() {
            break;
        }
    }
    Ok(JointState::from_packed(t, &y))
}

/// State at exactly time `t`, reached with steps of size `h` and a final partial step.
pub fn flow<T: Scalar>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    x0: &[T],
    mu0: T,
    t: T,
    h: T,
) -> Result<JointState<T>> {
    check_dims(model, perturbation, x0)?;
    if !(h > T::zero()) || !(t >= T::zero()) {
        return Err(invalid("t", "need t >= 0 and h > 0"));
    }
    let full = (t / h).floor().to_usize().unwrap_or(0);
    let mut rk = Rk4::new(model, perturbation);
    let mut y: Vec<T> = x0.iter().copied().chain(std::iter::once(mu0)).collect();
    let mut k1 = vec![T::zero(); y.len()];
    let mut next = vec![T::zero(); y.len()];
    for i in 0..=full {
        let remaining = t - T::from_usize_lossy(i) * h;
        let dt = if i < full { h } else { remaining };
        if !(dt > T::zero()) {
            break;
        }
        rk.deriv(&y, &mut k1);
        rk.step(&y, &k1, dt, &mut next);
        std::mem::swap(&mut y, &mut next);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: (t - remaining + dt).to_f64_lossy(),
            });
        }
    }
    Ok(JointState::from_packed(t, &y))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IntegrateOptions<T: Scalar> {
    pub t_end: T,
    pub h: T,
    /// Record every `stride`-th step (the first and last are always recorded).
    pub stride: usize,
    /// Stop at the first tube violation.
    pub strict: bool,
}

/// Statistics accumulated over every integration step, recorded or not.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StepExtremes<T: Scalar> {
    pub steps: usize,
    pub min_margin: T,
    pub min_velocity: T,
    pub max_velocity: T,
    pub max_spread: T,
    pub max_delta: T,
    pub min_mu_dot: T,
    pub first_violation: Option<T>,
}

impl<T: Scalar> Default for StepExtremes<T> {
    fn default() -> Self {
        Self {
            steps: 0,
            min_margin: T::infinity(),
            min_velocity: T::infinity(),
            max_velocity: T::neg_infinity(),
            max_spread: T::zero(),
            max_delta: T::zero(),
            min_mu_dot: T::infinity(),
            first_violation: None,
        }
    }
}

impl<T: Scalar> StepExtremes<T> {
    /// Folds in one step; `bound` is `Δ(μ)` when a curve is attached.
    pub fn record(&mut self, view: &StepView<'_, T>, bound: Option<T>) {
        let delta = view.delta();
        self.steps += 1;
        let v = &view.deriv[..view.deriv.len() - 1];
        for &vi in v {
            self.min_velocity = self.min_velocity.min(vi);
            self.max_velocity = self.max_velocity.max(vi);
        }
        self.max_spread = self.max_spread.max(spread(view.x()));
        self.max_delta = self.max_delta.max(delta);
        self.min_mu_dot = self.min_mu_dot.min(view.mu_dot());
        if let Some(b) = bound {
            let margin = b - delta;
            self.min_margin = self.min_margin.min(margin);
            if !(margin > T::lit(MARGIN_TOLERANCE)) && self.first_violation.is_none() {
                self.first_violation = Some(view.t);
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Trajectory<T: Scalar> {
    pub steps: Vec<JointState<T>>,
    pub delta: Vec<T>,
    /// `Δ(μ)` per recorded step; empty when no curve was attached.
    pub bound: Vec<T>,
    /// `min_i x_i'` per recorded step.
    pub velocity: Vec<T>,
    pub mu_dot: Vec<T>,
    pub extremes: StepExtremes<T>,
    pub tag: Option<CurveTag<T>>,
    /// False when a strict run stopped at a violation.
    pub completed: bool,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&JointState<T>> {
        self.steps.last()
    }
}

/// Integrates and records a trajectory. With a curve, every step is checked against the
/// tube `δ < Δ(μ)`; inside the tube a non-increasing companion is an error.
pub fn integrate<T: Scalar>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    curve: Option<&DispersionCurve<T>>,
    x0: &[T],
    nu0: T,
    opts: &IntegrateOptions<T>,
) -> Result<Trajectory<T>> {
    let stride = opts.stride.max(1);
    let total = (opts.t_end / opts.h).ceil().to_usize().unwrap_or(0);
    let mut traj = Trajectory {
        steps: Vec::with_capacity(total / stride + 2),
        delta: Vec::new(),
        bound: Vec::new(),
        velocity: Vec::new(),
        mu_dot: Vec::new(),
        extremes: StepExtremes::default(),
        tag: curve.map(|c| c.tag()),
        completed: true,
    };
    let mut index = 0usize;
    integrate_with(model, perturbation, x0, nu0, opts.t_end, opts.h, |view| {
        let bound = curve.map(|c| c.eval(view.mu()));
        traj.extremes.record(view, bound);
        let delta = view.delta();
        let inside = bound.is_some_and(|b| b - delta > T::lit(MARGIN_TOLERANCE));
        if inside && !(view.mu_dot() > T::zero()) {
            return Err(Error::CompanionNotIncreasing {
                t: view.t.to_f64_lossy(),
                velocity: view.mu_dot().to_f64_lossy(),
            });
        }
        let violated = bound.is_some() && !inside;
        let stop = violated && opts.strict;
        if index.is_multiple_of(stride) || index == total || stop {
            traj.steps.push(JointState::from_packed(view.t, view.state));
            traj.delta.push(delta);
            if let Some(b) = bound {
                traj.bound.push(b);
            }
            traj.velocity.push(view.min_velocity());
            traj.mu_dot.push(view.mu_dot());
        }
        index += 1;
        if stop {
            traj.completed = false;
            Ok(ControlFlow::Break(()))
        } else {
            Ok(ControlFlow::Continue(()))
        }
    })?;
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Crossing<T: Scalar> {
    pub t: T,
    pub state: JointState<T>,
    /// Full steps taken before the final partial step.
    pub steps: usize,
}

/// Integrates from `(x0, mu0)` with steps of size `h` until `μ` reaches `level`, then
/// solves for the partial step `τ` landing exactly on the level.
///
/// `τ` starts from the cubic Hermite estimate on the bracketing step and is polished by
/// safeguarded Newton / bisection on the actual partial RK4 step, so the returned state
/// is the integrator's own state at `t_cross`. `None` if the level is not reached by
/// `t_max`.
pub fn cross_time<T: Scalar>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    x0: &[T],
    mu0: T,
    level: T,
    t_max: T,
    h: T,
) -> Result<Option<Crossing<T>>> {
    check_dims(model, perturbation, x0)?;
    if !(h > T::zero() && h.is_finite()) {
        return Err(invalid("h", format!("step must be positive, got {h}")));
    }
    let n = model.n();
    let mut rk = Rk4::new(model, perturbation);
    let mut y: Vec<T> = x0.iter().copied().chain(std::iter::once(mu0)).collect();
    let mut k1 = vec![T::zero(); y.len()];
    let mut next = vec![T::zero(); y.len()];
    let mut k_next = vec![T::zero(); y.len()];
    rk.deriv(&y, &mut k1);
    if y[n] >= level {
        return Ok(Some(Crossing {
            t: T::zero(),
            state: JointState::from_packed(T::zero(), &y),
            steps: 0,
        }));
    }
    let mut steps = 0usize;
    loop {
        let t = T::from_usize_lossy(steps) * h;
        if t >= t_max {
            return Ok(None);
        }
        if !(k1[n] > T::zero()) {
            return Err(Error::CompanionNotIncreasing {
                t: t.to_f64_lossy(),
                velocity: k1[n].to_f64_lossy(),
            });
        }
        rk.step(&y, &k1, h, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: (t + h).to_f64_lossy(),
            });
        }
        rk.deriv(&next, &mut k_next);
        if next[n] >= level {
            let tau = refine_partial_step(&mut rk, &y, &k1, &next, &k_next, h, level);
            let mut landed = vec![T::zero(); y.len()];
            rk.step(&y, &k1, tau, &mut landed);
            let t_cross = t + tau;
            return Ok(Some(Crossing {
                t: t_cross,
                state: JointState::from_packed(t_cross, &landed),
                steps,
            }));
        }
        std::mem::swap(&mut y, &mut next);
        std::mem::swap(&mut k1, &mut k_next);
        steps += 1;
    }
}

fn refine_partial_step<T: Scalar>(
    rk: &mut Rk4<'_, T>,
    y: &[T],
    k1: &[T],
    y_end: &[T],
    k_end: &[T],
    h: T,
    level: T,
) -> T {
    let n = y.len() - 1;
    let tol = T::lit(CROSSING_TOLERANCE) * T::one().max(level.abs());
    let mut out = vec![T::zero(); y.len()];
    let mut mu_at = |tau: T| {
        rk.step(y, k1, tau, &mut out);
        out[n]
    };
    let (mut lo, mut hi) = (T::zero(), h);
    // Hermite estimate from endpoint values and slopes, solved by bisection.
    let herm = |tau: T| crate::numerics::hermite(y[n], k1[n], y_end[n], k_end[n], h, tau).0 - level;
    let mut tau = crate::numerics::bisect_root(herm, lo, hi, h * T::lit(1e-15));
    for _ in 0..60 {
        let g = mu_at(tau) - level;
        if g.abs() < tol {
            return tau;
        }
        if g > T::zero() {
            hi = tau;
        } else {
            lo = tau;
        }
        let slope = crate::numerics::hermite(y[n], k1[n], y_end[n], k_end[n], h, tau).1;
        let newton = tau - g / slope;
        tau = if slope > T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / T::lit(2.0)
        };
        if hi - lo <= h * T::epsilon() {
            break;
        }
    }
    tau
}
