//! Mean-field model interface.
//!
//! A model is a coupling field `F(Y, z)` on `R^N x R` driving the system
//! `x_i' = F(X, x_i) + H_i(X)`. All downstream analysis assumes the field has been
//! normalized so that it is invariant under the joint shift `(Y, z) -> (Y + 1, z + 1)`;
//! built-ins are entered in natural (period `2π`) units and normalized on construction.

pub mod builtin;
pub mod custom;
pub mod norms;
pub mod perturbation;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

pub use builtin::{builtin_kuramoto, builtin_winfree};
pub use custom::{custom_trig, Trig, TrigFactor, TrigTerm, ZFactor};
pub use norms::{norm_bounds, norm_h, sampled_norm_bounds, NormGrid, SlabSample};
pub use perturbation::{PerturbationKind, PerturbationSpec};

/// Suprema `(‖F‖_B, ‖dF‖_B, ‖d²F‖_B)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NormBounds<T: Scalar> {
    pub f: T,
    pub df: T,
    pub d2f: T,
}

impl<T: Scalar> NormBounds<T> {
    pub fn new(f: T, df: T, d2f: T) -> Self {
        Self { f, df, d2f }
    }

    /// `L = ‖F‖ + ‖dF‖ + ‖d²F‖`.
    pub fn total(&self) -> T {
        self.f + self.df + self.d2f
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.f, self.df, self.d2f]
    }

    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.df.is_finite() && self.d2f.is_finite()
    }

    /// Bounds of `F̃(U, u) = F(pU, pu) / p` given bounds of `F`.
    fn rescaled(&self, period: T) -> Self {
        Self::new(self.f / period, self.df, self.d2f * period)
    }
}

/// A coupling field `F(Y, z)`. Implementations must be pure.
pub trait CouplingField<T: Scalar>: Send + Sync + fmt::Debug {
    /// Number of oscillators `N`.
    fn dim(&self) -> usize;

    fn eval(&self, y: &[T], z: T) -> T;

    /// `∂_{N+1} F(Y, z)`.
    fn eval_dz(&self, y: &[T], z: T) -> T;

    /// Evaluates `F(Y, z_k)` for every `z_k`. Mean-field implementations override this
    /// to share the `O(N)` population sums across all `z_k`.
    fn eval_batch(&self, y: &[T], zs: &[T], out: &mut [T]) {
        for (o, &z) in out.iter_mut().zip(zs) {
            *o = self.eval(y, z);
        }
    }

    /// Evaluates `F(pY, p z_k) / p` for every `z_k`, the batch form of the period-1
    /// rescaling. Implementations can fold `p` into their arguments instead of copying.
    fn eval_batch_rescaled(&self, y: &[T], zs: &[T], period: T, out: &mut [T]) {
        let ys: Vec<T> = y.iter().map(|&v| v * period).collect();
        let zs: Vec<T> = zs.iter().map(|&v| v * period).collect();
        self.eval_batch(&ys, &zs, out);
        for o in out.iter_mut() {
            *o /= period;
        }
    }

    /// Global suprema of `|F|` and of its first and second partial derivatives over all
    /// of `R^{N+1}`, when known in closed form. These dominate the slab quasi-norms.
    fn global_bounds(&self) -> Option<NormBounds<T>> {
        None
    }
}

/// `F̃(U, u) = F(pU, pu) / p`, the period-1 version of a field with diagonal period `p`.
#[derive(Debug)]
struct Rescaled<T: Scalar> {
    inner: Arc<dyn CouplingField<T>>,
    period: T,
}

impl<T: Scalar> Rescaled<T> {
    fn scaled(&self, y: &[T]) -> Vec<T> {
        y.iter().map(|&v| v * self.period).collect()
    }
}

impl<T: Scalar> CouplingField<T> for Rescaled<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, y: &[T], z: T) -> T {
        self.inner.eval(&self.scaled(y), z * self.period) / self.period
    }

    fn eval_dz(&self, y: &[T], z: T) -> T {
        self.inner.eval_dz(&self.scaled(y), z * self.period)
    }

    fn eval_batch(&self, y: &[T], zs: &[T], out: &mut [T]) {
        self.inner.eval_batch_rescaled(y, zs, self.period, out);
    }

    fn global_bounds(&self) -> Option<NormBounds<T>> {
        self.inner.global_bounds().map(|b| b.rescaled(self.period))
    }
}

/// A mean-field model `F` together with its dimension, diagonal period and norm bounds.
///
/// Cloning is cheap; the field is shared.
#[derive(Clone, Debug)]
pub struct ModelSpec<T: Scalar> {
    n: usize,
    field: Arc<dyn CouplingField<T>>,
    norm_bounds: Option<NormBounds<T>>,
    period: Option<T>,
    label: String,
}

impl<T: Scalar> ModelSpec<T> {
    /// Wraps a field. `period` is the diagonal period in the field's own units, `None`
    /// for fields that are not diagonally periodic.
    pub fn new(
        field: Arc<dyn CouplingField<T>>,
        period: Option<T>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let n = field.dim();
        if n < 2 {
            return Err(invalid("n", format!("need at least 2 oscillators, got {n}")));
        }
        if let Some(p) = period {
            if !(p > T::zero() && p.is_finite()) {
                return Err(invalid("period", format!("must be positive, got {p}")));
            }
        }
        Ok(Self {
            n,
            norm_bounds: field.global_bounds(),
            field,
            period,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn period(&self) -> Option<T> {
        self.period
    }

    /// True when the field is invariant under the joint unit shift of all arguments.
    pub fn period_normalized(&self) -> bool {
        self.period == Some(T::one())
    }

    pub fn norm_bounds(&self) -> Option<NormBounds<T>> {
        self.norm_bounds
    }

    /// Replaces the analytic bounds, e.g. with tighter ones known for a specific model.
    pub fn with_norm_bounds(mut self, bounds: Option<NormBounds<T>>) -> Self {
        self.norm_bounds = bounds;
        self
    }

    pub fn field(&self) -> &Arc<dyn CouplingField<T>> {
        &self.field
    }

    #[inline]
    pub fn eval_f(&self, y: &[T], z: T) -> T {
        self.field.eval(y, z)
    }

    #[inline]
    pub fn eval_df_z(&self, y: &[T], z: T) -> T {
        self.field.eval_dz(y, z)
    }

    #[inline]
    pub fn eval_batch(&self, y: &[T], zs: &[T], out: &mut [T]) {
        self.field.eval_batch(y, zs, out)
    }

    /// `F(s·1, s)`.
    pub fn diag(&self, s: T) -> T {
        self.eval_f(&vec![s; self.n], s)
    }

    /// `∂_{N+1} F(s·1, s)`.
    pub fn diag_dz(&self, s: T) -> T {
        self.eval_df_z(&vec![s; self.n], s)
    }

    /// `Λ(s) = ∂_{N+1}F(s·1, s) / F(s·1, s)`.
    pub fn lambda(&self, s: T) -> T {
        let y = vec![s; self.n];
        self.eval_df_z(&y, s) / self.eval_f(&y, s)
    }
}

/// Rescales a model with diagonal period `T` to period 1:
/// `F̃(U, u) = F(T·U, T·u) / T`. Trajectories map by `u = x / T`, time is unchanged.
pub fn normalize_period<T: Scalar>(model: &ModelSpec<T>) -> Result<ModelSpec<T>> {
    let period = model
        .period
        .ok_or_else(|| invalid("period", "model has no diagonal period"))?;
    if period == T::one() {
        return Ok(model.clone());
    }
    let field: Arc<dyn CouplingField<T>> = Arc::new(Rescaled {
        inner: model.field.clone(),
        period,
    });
    Ok(ModelSpec {
        n: model.n,
        norm_bounds: model.norm_bounds.map(|b| b.rescaled(period)),
        field,
        period: Some(T::one()),
        label: model.label.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[derive(Debug)]
    struct Affine;

    impl CouplingField<f64> for Affine {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, y: &[f64], z: f64) -> f64 {
            2.0 + (y[0] - z).sin() + 0.5 * (y[1] + z).cos()
        }
        fn eval_dz(&self, y: &[f64], z: f64) -> f64 {
            -(y[0] - z).cos() - 0.5 * (y[1] + z).sin()
        }
    }

    #[test]
    fn unit_period_normalization_is_identity() {
        let m = ModelSpec::new(Arc::new(Affine), Some(1.0), "affine").unwrap();
        let u = normalize_period(&m).unwrap();
        assert!(u.period_normalized());
        assert_eq!(u.eval_f(&[0.3, 0.7], 0.1), m.eval_f(&[0.3, 0.7], 0.1));
    }

    #[test]
    fn rescaling_matches_definition() {
        let m = ModelSpec::new(Arc::new(Affine), Some(2.0 * PI), "affine").unwrap();
        let u = normalize_period(&m).unwrap();
        let (y, z) = ([0.1, 0.45], 0.3);
        let raw = m.eval_f(&[2.0 * PI * y[0], 2.0 * PI * y[1]], 2.0 * PI * z);
        assert!((u.eval_f(&y, z) - raw / (2.0 * PI)).abs() < 1e-15);
        let raw_dz = m.eval_df_z(&[2.0 * PI * y[0], 2.0 * PI * y[1]], 2.0 * PI * z);
        assert!((u.eval_df_z(&y, z) - raw_dz).abs() < 1e-15);
        let mut out = [0.0; 3];
        u.eval_batch(&y, &[0.1, 0.2, z], &mut out);
        assert!((out[2] - u.eval_f(&y, z)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_period_and_dimension() {
        assert!(ModelSpec::new(Arc::new(Affine), Some(0.0), "x").is_err());
        assert!(ModelSpec::new(Arc::new(Affine), Some(-1.0), "x").is_err());
        let aperiodic = ModelSpec::new(Arc::new(Affine), None, "x").unwrap();
        assert!(normalize_period(&aperiodic).is_err());
    }
}
