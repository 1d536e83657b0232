//! Return map on the section `Σ = {X : max_i |x_i| < Δ(0)}`, its fixed point and the
//! periodically locked orbit through it.
//!
//! Starting from `X ∈ Σ` with `μ(0) = 0`, the return time `θ(X)` is the first time
//! `μ = 1` and `P(X) = X(θ) − 1`. A fixed point `X*` gives a solution
//! `x_i(t) = t/θ* + Ψ_i(t)` with `θ*`-periodic `Ψ`.

use std::cell::RefCell;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionCurve;
use crate::error::{invalid, Error, Result};
use crate::hypotheses::HypothesisReport;
use crate::integrator::{cross_time, flow, integrate_steps};
use crate::linalg::lu_solve;
use crate::model::{ModelSpec, PerturbationSpec};
use crate::numerics::hermite;
use crate::scalar::{max_abs, Scalar};

/// Admissible region and time window of the return map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SectionBounds<T: Scalar> {
    /// `Δ(0)`.
    pub radius: T,
    /// `1/L`.
    pub theta_min: T,
    /// `2/α`.
    pub theta_max: T,
    /// `3/α`: the integration is abandoned if `μ` has not reached 1 by then.
    pub t_abort: T,
}

impl<T: Scalar> SectionBounds<T> {
    pub fn new(report: &HypothesisReport<T>, curve: &DispersionCurve<T>) -> Self {
        Self {
            radius: curve.eval(T::zero()),
            theta_min: T::one() / report.l_total,
            theta_max: T::lit(2.0) / report.alpha,
            t_abort: T::lit(3.0) / report.alpha,
        }
    }

    /// Unchecked bounds for running the map outside the hypotheses.
    pub fn unchecked(alpha: T) -> Self {
        Self {
            radius: T::infinity(),
            theta_min: T::zero(),
            theta_max: T::infinity(),
            t_abort: T::lit(3.0) / alpha,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Return<T: Scalar> {
    pub p: Vec<T>,
    pub theta: T,
}

/// `X ↦ (P(X), θ(X))`, recording every return time it produces.
#[derive(Debug)]
pub struct ReturnMap<'a, T: Scalar> {
    model: &'a ModelSpec<T>,
    perturbation: &'a PerturbationSpec<T>,
    bounds: SectionBounds<T>,
    h: T,
    check_bounds: bool,
    thetas: RefCell<Vec<T>>,
}

impl<'a, T: Scalar> ReturnMap<'a, T> {
    /// `check_bounds = false` runs the bare integrator (no section or time-window checks).
    pub fn new(
        model: &'a ModelSpec<T>,
        perturbation: &'a PerturbationSpec<T>,
        bounds: SectionBounds<T>,
        h: T,
        check_bounds: bool,
    ) -> Result<Self> {
        if !perturbation.is_periodic() {
            return Err(Error::NonPeriodicPerturbation);
        }
        if perturbation.n() != model.n() {
            return Err(Error::DimensionMismatch {
                expected: model.n(),
                got: perturbation.n(),
            });
        }
        if !(h > T::zero() && h.is_finite()) {
            return Err(invalid("h", format!("step must be positive, got {h}")));
        }
        Ok(Self {
            model,
            perturbation,
            bounds,
            h,
            check_bounds,
            thetas: RefCell::new(Vec::new()),
        })
    }

    pub fn bounds(&self) -> &SectionBounds<T> {
        &self.bounds
    }

    pub fn step(&self) -> T {
        self.h
    }

    /// Every return time computed so far.
    pub fn return_times(&self) -> Vec<T> {
        self.thetas.borrow().clone()
    }

    fn left(&self, x: &[T]) -> Option<Error> {
        let m = max_abs(x);
        (self.check_bounds && !(m < self.bounds.radius)).then(|| Error::LeftSection {
            max_abs: m.to_f64_lossy(),
            radius: self.bounds.radius.to_f64_lossy(),
        })
    }

    pub fn apply(&self, x: &[T]) -> Result<Return<T>> {
        if let Some(e) = self.left(x) {
            return Err(e);
        }
        let level = T::one();
        let crossing = cross_time(
            self.model,
            self.perturbation,
            x,
            T::zero(),
            level,
            self.bounds.t_abort,
            self.h,
        )?
        .ok_or(Error::LevelNotReached {
            level: 1.0,
            t_max: self.bounds.t_abort.to_f64_lossy(),
        })?;
        let theta = crossing.t;
        self.thetas.borrow_mut().push(theta);
        if self.check_bounds && !(theta > self.bounds.theta_min && theta < self.bounds.theta_max) {
            return Err(Error::ReturnTimeOutOfBounds {
                theta: theta.to_f64_lossy(),
                lower: self.bounds.theta_min.to_f64_lossy(),
                upper: self.bounds.theta_max.to_f64_lossy(),
            });
        }
        let p: Vec<T> = crossing.state.x.iter().map(|&v| v - level).collect();
        if let Some(e) = self.left(&p) {
            return Err(e);
        }
        Ok(Return { p, theta })
    }
}

/// `(P(x), θ(x))` for a single point.
pub fn poincare<T: Scalar>(
    model: &ModelSpec<T>,
    perturbation: &PerturbationSpec<T>,
    x: &[T],
    bounds: SectionBounds<T>,
    h: T,
    check_bounds: bool,
) -> Result<Return<T>> {
    ReturnMap::new(model, perturbation, bounds, h, check_bounds)?.apply(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LockOptions<T: Scalar> {
    pub tol: T,
    pub max_iter: usize,
    pub newton_max_iter: usize,
    /// Samples of `Ψ` per period.
    pub psi_per_period: usize,
}

impl<T: Scalar> Default for LockOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 200,
            newton_max_iter: 50,
            psi_per_period: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LockMethod {
    Picard,
    Newton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LockResult<T: Scalar> {
    pub x_star: Vec<T>,
    pub theta_star: T,
    pub rho: T,
    /// `‖P(X*) − X*‖∞`.
    pub residual: T,
    pub converged: bool,
    pub method: LockMethod,
    pub iterations: usize,
    /// Every return time computed during the search.
    pub return_times: Vec<T>,
    /// Sample times `s_k = k θ*/K` over `[0, 2θ*]`.
    pub psi_times: Vec<T>,
    /// `Ψ(s_k) = X(s_k) − s_k/θ*`, one row per sample.
    pub psi_samples: Vec<Vec<T>>,
    /// `Ψ'(s_k)`.
    pub psi_slopes: Vec<Vec<T>>,
    /// `max_k |Ψ(s_k + θ*) − Ψ(s_k)|`.
    pub periodicity_residual: T,
    /// Integration step used throughout.
    pub h: T,
}

fn sup_diff<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (&u, &v)| m.max((u - v).abs()))
}

/// Fixed point of `P`: Picard iteration from the centre of `Σ`, then damped
/// finite-difference Newton on `P(X) − X` if Picard has not converged.
pub fn find_fixed_point<T: Scalar>(
    map: &ReturnMap<'_, T>,
    opts: &LockOptions<T>,
) -> Result<LockResult<T>> {
    let n = map.model.n();
    let mut x = vec![T::zero(); n];
    let mut current = map.apply(&x)?;
    let mut iterations = 0;
    let mut method = LockMethod::Picard;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let next = map.apply(&current.p)?;
        let step = sup_diff(&next.p, &current.p);
        x = std::mem::replace(&mut current, next).p;
        if step < opts.tol {
            converged = true;
            break;
        }
    }
    // `current` holds P(x) for the latest iterate x.
    let mut residual = sup_diff(&current.p, &x);
    if !converged || residual >= opts.tol {
        method = LockMethod::Newton;
        let (nx, nc, iters) = newton(map, x, current, opts)?;
        x = nx;
        current = nc;
        iterations += iters;
        residual = sup_diff(&current.p, &x);
        converged = residual < opts.tol;
    }
    let theta_star = current.theta;
    let (psi_times, psi_samples, psi_slopes) =
        sample_psi(map, &x, theta_star, opts.psi_per_period)?;
    let k = opts.psi_per_period;
    let periodicity_residual = (0..=k)
        .map(|i| sup_diff(&psi_samples[i + k], &psi_samples[i]))
        .fold(T::zero(), T::max);
    Ok(LockResult {
        x_star: x,
        theta_star,
        rho: T::one() / theta_star,
        residual,
        converged,
        method,
        iterations,
        return_times: map.return_times(),
        psi_times,
        psi_samples,
        psi_slopes,
        periodicity_residual,
        h: map.h,
    })
}

type NewtonState<T> = (Vec<T>, Return<T>, usize);

fn newton<T: Scalar>(
    map: &ReturnMap<'_, T>,
    mut x: Vec<T>,
    mut current: Return<T>,
    opts: &LockOptions<T>,
) -> Result<NewtonState<T>> {
    let n = x.len();
    let fd = T::lit(1e-6).min(T::lit(1e-2) * map.bounds.radius);
    let mut g: Vec<T> = current.p.iter().zip(&x).map(|(&p, &v)| p - v).collect();
    let mut norm = max_abs(&g);
    let mut iters = 0;
    while iters < opts.newton_max_iter && !(norm < opts.tol) {
        iters += 1;
        // Jacobian of G(X) = P(X) − X by forward differences, column by column.
        let mut jac = vec![T::zero(); n * n];
        for col in 0..n {
            let mut xp = x.clone();
            xp[col] += fd;
            let pp = map.apply(&xp)?.p;
            for row in 0..n {
                let gp = pp[row] - xp[row];
                jac[row * n + col] = (gp - g[row]) / fd;
            }
        }
        let dx = lu_solve(jac, g.iter().map(|&v| -v).collect())?;
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<T> = x.iter().zip(&dx).map(|(&v, &d)| v + lambda * d).collect();
            if let Ok(r) = map.apply(&trial) {
                let gt: Vec<T> = r.p.iter().zip(&trial).map(|(&p, &v)| p - v).collect();
                let nt = max_abs(&gt);
                if nt < norm {
                    x = trial;
                    current = r;
                    g = gt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda /= T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    Ok((x, current, iters))
}

type PsiTable<T> = (Vec<T>, Vec<Vec<T>>, Vec<Vec<T>>);

/// `Ψ` and `Ψ'` at `s_k = k θ*/K`, `k = 0..=2K`, integrating with the largest step not
/// exceeding the map's step that divides `θ*/K`.
fn sample_psi<T: Scalar>(
    map: &ReturnMap<'_, T>,
    x_star: &[T],
    theta: T,
    per_period: usize,
) -> Result<PsiTable<T>> {
    let k = per_period.max(2);
    let spacing = theta / T::from_usize_lossy(k);
    let sub = (spacing / map.h).ceil().to_usize().unwrap_or(1).max(1);
    let dt = spacing / T::from_usize_lossy(sub);
    let rho = T::one() / theta;
    let mut times = Vec::with_capacity(2 * k + 1);
    let mut psi = Vec::with_capacity(2 * k + 1);
    let mut slopes = Vec::with_capacity(2 * k + 1);
    let mut index = 0usize;
    integrate_steps(
        map.model,
        map.perturbation,
        x_star,
        T::zero(),
        dt,
        2 * k * sub,
        |view| {
            if index.is_multiple_of(sub) {
                let s = T::from_usize_lossy(index / sub) * spacing;
                times.push(s);
                psi.push(view.x().iter().map(|&v| v - s * rho).collect());
                slopes.push(
                    view.deriv[..view.deriv.len() - 1]
                        .iter()
                        .map(|&v| v - rho)
                        .collect(),
                );
            }
            index += 1;
            Ok(ControlFlow::Continue(()))
        },
    )?;
    Ok((times, psi, slopes))
}

/// `max_{t} ‖Φ^{t+θ*}(X*) − Φ^t(X*) − 1‖∞` over `samples` times spread over `[0, θ*)`.
pub fn translation_defect<T: Scalar>(
    map: &ReturnMap<'_, T>,
    result: &LockResult<T>,
    samples: usize,
) -> Result<T> {
    let mut worst = T::zero();
    for j in 0..samples {
        let t = result.theta_star * T::from_usize_lossy(j) / T::from_usize_lossy(samples.max(1));
        let a = flow(map.model, map.perturbation, &result.x_star, T::zero(), t, map.h)?;
        let b = flow(
            map.model,
            map.perturbation,
            &result.x_star,
            T::zero(),
            t + result.theta_star,
            map.h,
        )?;
        let d = a
            .x
            .iter()
            .zip(&b.x)
            .fold(T::zero(), |m, (&u, &v)| m.max((v - u - T::one()).abs()));
        worst = worst.max(d);
    }
    Ok(worst)
}

/// `max_i |(x_i(T) − x_i(0))/T − ρ|` at `T = periods·θ*`.
pub fn frequency_error<T: Scalar>(
    map: &ReturnMap<'_, T>,
    result: &LockResult<T>,
    periods: usize,
) -> Result<T> {
    let horizon = result.theta_star * T::from_usize_lossy(periods);
    let end = flow(map.model, map.perturbation, &result.x_star, T::zero(), horizon, map.h)?;
    Ok(end
        .x
        .iter()
        .zip(&result.x_star)
        .fold(T::zero(), |m, (&e, &s)| m.max(((e - s) / horizon - result.rho).abs())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LockedState<T: Scalar> {
    pub rho: T,
    pub period: T,
    pub times: Vec<T>,
    /// `Ψ` at `times`, one row per time.
    pub psi: Vec<Vec<T>>,
    /// `max |Ψ(s + θ*) − Ψ(s)|` over the stored grid.
    pub wrap_residual: T,
    /// `max_i (max_s Ψ_i − min_s Ψ_i)`.
    pub amplitude: T,
}

/// `Ψ` on `samples` uniform points of one period, by cubic Hermite interpolation of the
/// stored samples.
pub fn extract_locked_state<T: Scalar>(result: &LockResult<T>, samples: usize) -> LockedState<T> {
    let k = result.psi_samples.len().saturating_sub(1) / 2;
    let n = result.x_star.len();
    let theta = result.theta_star;
    let spacing = theta / T::from_usize_lossy(k.max(1));
    let samples = samples.max(1);
    let mut times = Vec::with_capacity(samples);
    let mut psi = Vec::with_capacity(samples);
    for j in 0..samples {
        let s = theta * T::from_usize_lossy(j) / T::from_usize_lossy(samples);
        let cell = (s / spacing).floor().to_usize().unwrap_or(0).min(k.saturating_sub(1));
        let tau = s - T::from_usize_lossy(cell) * spacing;
        let row = (0..n)
            .map(|i| {
                hermite(
                    result.psi_samples[cell][i],
                    result.psi_slopes[cell][i],
                    result.psi_samples[cell + 1][i],
                    result.psi_slopes[cell + 1][i],
                    spacing,
                    tau,
                )
                .0
            })
            .collect::<Vec<T>>();
        times.push(s);
        psi.push(row);
    }
    let amplitude = (0..n)
        .map(|i| {
            let (lo, hi) = result.psi_samples[..=k]
                .iter()
                .fold((T::infinity(), T::neg_infinity()), |(lo, hi), r| {
                    (lo.min(r[i]), hi.max(r[i]))
                });
            hi - lo
        })
        .fold(T::zero(), T::max);
    LockedState {
        rho: result.rho,
        period: theta,
        times,
        psi,
        wrap_residual: result.periodicity_residual,
        amplitude,
    }
}
