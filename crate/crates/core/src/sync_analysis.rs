//! Verdicts on computed trajectories: tube invariance, dynamical oscillators and the
//! `2D` spread bound.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::dispersion::DispersionCurve;
use crate::error::{Error, Result};
use crate::integrator::{StepExtremes, StepView, Trajectory, MARGIN_TOLERANCE};
use crate::scalar::{spread, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SyncVerdict<T: Scalar> {
    /// `δ(t) < Δ(μ(t))` at every step.
    pub invariant: bool,
    /// `min_t Δ(μ(t)) − δ(t)`.
    pub min_margin: T,
    /// `min_t min_i x_i'(t) > 0`.
    pub dynamical: bool,
    pub min_velocity: T,
    /// `max_t max_{i,j} |x_i − x_j|`.
    pub max_spread: T,
    /// `max_spread < 2D`.
    pub spread_ok: bool,
    pub steps: usize,
}

impl<T: Scalar> SyncVerdict<T> {
    pub fn all_hold(&self) -> bool {
        self.invariant && self.dynamical && self.spread_ok
    }

    fn from_extremes(ext: &StepExtremes<T>, d: T) -> Self {
        Self {
            invariant: ext.steps > 0 && ext.min_margin > T::lit(MARGIN_TOLERANCE),
            min_margin: ext.min_margin,
            dynamical: ext.min_velocity > T::zero(),
            min_velocity: ext.min_velocity,
            max_spread: ext.max_spread,
            spread_ok: ext.max_spread < T::lit(2.0) * d,
            steps: ext.steps,
        }
    }
}

/// Streaming verdict for runs that are not recorded.
#[derive(Clone, Debug)]
pub struct VerdictAccumulator<'a, T: Scalar> {
    curve: &'a DispersionCurve<T>,
    extremes: StepExtremes<T>,
    strict: bool,
}

impl<'a, T: Scalar> VerdictAccumulator<'a, T> {
    pub fn new(curve: &'a DispersionCurve<T>) -> Self {
        Self {
            curve,
            extremes: StepExtremes::default(),
            strict: false,
        }
    }

    /// Requests a stop at the first violation.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Observer for [`crate::integrator::integrate_with`].
    pub fn observe(&mut self, view: &StepView<'_, T>) -> Result<ControlFlow<()>> {
        let bound = self.curve.eval(view.mu());
        self.extremes.record(view, Some(bound));
        if bound - view.delta() > T::lit(MARGIN_TOLERANCE) && !(view.mu_dot() > T::zero()) {
            return Err(Error::CompanionNotIncreasing {
                t: view.t.to_f64_lossy(),
                velocity: view.mu_dot().to_f64_lossy(),
            });
        }
        if self.strict && self.extremes.first_violation.is_some() {
            Ok(ControlFlow::Break(()))
        } else {
            Ok(ControlFlow::Continue(()))
        }
    }

    pub fn extremes(&self) -> &StepExtremes<T> {
        &self.extremes
    }

    pub fn finish(&self) -> SyncVerdict<T> {
        SyncVerdict::from_extremes(&self.extremes, self.curve.params().d)
    }
}

/// Verdict for a trajectory recorded against `curve`. Combines the per-step statistics
/// gathered during integration with the recorded arrays.
pub fn assess<T: Scalar>(
    trajectory: &Trajectory<T>,
    curve: &DispersionCurve<T>,
) -> Result<SyncVerdict<T>> {
    if trajectory.tag != Some(curve.tag()) || trajectory.bound.len() != trajectory.len() {
        return Err(Error::CurveMismatch);
    }
    let mut ext = trajectory.extremes;
    for (i, state) in trajectory.steps.iter().enumerate() {
        ext.min_margin = ext.min_margin.min(trajectory.bound[i] - trajectory.delta[i]);
        ext.min_velocity = ext.min_velocity.min(trajectory.velocity[i]);
        ext.max_spread = ext.max_spread.max(spread(&state.x));
    }
    let mut verdict = SyncVerdict::from_extremes(&ext, curve.params().d);
    verdict.invariant &= trajectory.completed;
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::{build_curve, dispersion_params};
    use crate::hypotheses::{analyze, HypothesisOptions};
    use crate::integrator::{default_step, integrate, integrate_with, IntegrateOptions};
    use crate::model::{builtin_kuramoto, ModelSpec, PerturbationSpec};

    fn kuramoto() -> (ModelSpec<f64>, DispersionCurve<f64>, f64) {
        let m = builtin_kuramoto::<f64>(1.0, 0.2, 5).unwrap();
        let a = analyze(&m, &HypothesisOptions::default());
        let p = dispersion_params(&a.report, None).unwrap();
        let c = build_curve(a.profile.as_ref().unwrap(), &p).unwrap();
        (a.model, c, default_step(&a.report))
    }

    #[test]
    fn diagonal_start_stays_on_diagonal() {
        let (m, c, h) = kuramoto();
        let opts = IntegrateOptions { t_end: 50.0, h, stride: 10, strict: false };
        let tr = integrate(&m, &PerturbationSpec::zero(5), Some(&c), &[0.2; 5], 0.2, &opts).unwrap();
        assert!(tr.delta.iter().all(|&d| d == 0.0));
        let v = assess(&tr, &c).unwrap();
        assert!(v.all_hold());
        assert!((v.min_margin - c.min()).abs() < 1e-10);
    }

    #[test]
    fn streaming_matches_recorded() {
        let (m, c, h) = kuramoto();
        let x0 = [0.0, 0.4e-3, -0.4e-3, 0.2e-3, 0.0];
        let opts = IntegrateOptions { t_end: 20.0, h, stride: 1, strict: false };
        let tr = integrate(&m, &PerturbationSpec::zero(5), Some(&c), &x0, 0.0, &opts).unwrap();
        let recorded = assess(&tr, &c).unwrap();
        let mut acc = VerdictAccumulator::new(&c);
        integrate_with(&m, &PerturbationSpec::zero(5), &x0, 0.0, 20.0, h, |v| acc.observe(v)).unwrap();
        assert_eq!(acc.finish(), recorded);
        assert!(recorded.all_hold());
    }

    #[test]
    fn mismatched_curve_is_rejected() {
        let (m, c, h) = kuramoto();
        let opts = IntegrateOptions { t_end: 1.0, h, stride: 1, strict: false };
        let bare = integrate(&m, &PerturbationSpec::zero(5), None, &[0.0; 5], 0.0, &opts).unwrap();
        assert_eq!(assess(&bare, &c), Err(Error::CurveMismatch));
    }

    #[test]
    fn strict_stops_at_violation() {
        let (m, c, h) = kuramoto();
        let big = PerturbationSpec::constant_detune(vec![0.05, -0.05, 0.0, 0.0, 0.0]).unwrap();
        let opts = IntegrateOptions { t_end: 50.0, h, stride: 1, strict: true };
        let tr = integrate(&m, &big, Some(&c), &[0.0; 5], 0.0, &opts).unwrap();
        assert!(!tr.completed);
        let v = assess(&tr, &c).unwrap();
        assert!(!v.invariant);
        assert!(tr.last().unwrap().t < 50.0);
    }

    #[test]
    fn invariance_implies_spread_bound() {
        let (m, c, h) = kuramoto();
        for scale in [0.1, 0.5, 0.9, 1.5, 3.0] {
            let d0 = c.eval(0.0);
            let x0 = [-scale * d0, 0.0, scale * d0, 0.5 * scale * d0, 0.0];
            let opts = IntegrateOptions { t_end: 5.0, h, stride: 3, strict: false };
            let tr = integrate(&m, &PerturbationSpec::zero(5), Some(&c), &x0, 0.0, &opts).unwrap();
            let v = assess(&tr, &c).unwrap();
            assert!(!v.invariant || v.spread_ok);
        }
    }
}
