//! Winfree and Kuramoto coupling fields.
//!
//! Both are written in natural phase units (diagonal period `2π`):
//!
//! ```text
//! Win(Y, z) = ω − κ (1/N) Σ_j [1 + cos y_j] sin z
//! Kur(Y, z) = ω + κ (1/N) Σ_j sin(y_j − z)
//! ```
//!
//! Kuramoto uses attractive coupling, so `∂_{N+1} Kur(s1, s) = −κ`.

use std::sync::Arc;

use super::{normalize_period, CouplingField, ModelSpec, NormBounds};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

fn validate<T: Scalar>(omega: T, kappa: T, n: usize) -> Result<()> {
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 oscillators, got {n}")));
    }
    if !(omega > T::zero() && omega.is_finite()) {
        return Err(invalid("omega", format!("must be positive, got {omega}")));
    }
    if !(kappa >= T::zero() && kappa.is_finite()) {
        return Err(invalid("kappa", format!("must be nonnegative, got {kappa}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Winfree<T> {
    pub n: usize,
    pub omega: T,
    pub kappa: T,
}

impl<T: Scalar> Winfree<T> {
    fn mean_influence(&self, y: &[T], scale: T) -> T {
        y.iter().map(|&v| T::one() + (scale * v).cos()).sum::<T>() / T::from_usize_lossy(self.n)
    }

    fn batch(&self, y: &[T], zs: &[T], scale: T, out: &mut [T]) {
        let m = self.kappa * self.mean_influence(y, scale);
        for (o, &z) in out.iter_mut().zip(zs) {
            *o = (self.omega - m * (scale * z).sin()) / scale;
        }
    }
}

impl<T: Scalar> CouplingField<T> for Winfree<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, y: &[T], z: T) -> T {
        self.omega - self.kappa * self.mean_influence(y, T::one()) * z.sin()
    }

    fn eval_dz(&self, y: &[T], z: T) -> T {
        -self.kappa * self.mean_influence(y, T::one()) * z.cos()
    }

    fn eval_batch(&self, y: &[T], zs: &[T], out: &mut [T]) {
        self.batch(y, zs, T::one(), out);
    }

    fn eval_batch_rescaled(&self, y: &[T], zs: &[T], period: T, out: &mut [T]) {
        self.batch(y, zs, period, out);
    }

    fn global_bounds(&self) -> Option<NormBounds<T>> {
        // mean influence ranges over [0, 2]; each y_j-derivative carries a 1/N factor.
        let two_k = T::lit(2.0) * self.kappa;
        Some(NormBounds::new(self.omega + two_k, two_k, two_k))
    }
}

#[derive(Debug, Clone)]
pub struct Kuramoto<T> {
    pub n: usize,
    pub omega: T,
    pub kappa: T,
}

impl<T: Scalar> Kuramoto<T> {
    fn batch(&self, y: &[T], zs: &[T], scale: T, out: &mut [T]) {
        // sin(y - z) = sin y cos z - cos y sin z
        let nf = T::from_usize_lossy(self.n);
        let (mut s, mut c) = (T::zero(), T::zero());
        for &v in y {
            let (sv, cv) = (scale * v).sin_cos();
            s += sv;
            c += cv;
        }
        let (s, c) = (self.kappa * s / nf, self.kappa * c / nf);
        for (o, &z) in out.iter_mut().zip(zs) {
            let (sz, cz) = (scale * z).sin_cos();
            *o = (self.omega + s * cz - c * sz) / scale;
        }
    }
}

impl<T: Scalar> CouplingField<T> for Kuramoto<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, y: &[T], z: T) -> T {
        let s: T = y.iter().map(|&v| (v - z).sin()).sum();
        self.omega + self.kappa * s / T::from_usize_lossy(self.n)
    }

    fn eval_dz(&self, y: &[T], z: T) -> T {
        let c: T = y.iter().map(|&v| (v - z).cos()).sum();
        -self.kappa * c / T::from_usize_lossy(self.n)
    }

    fn eval_batch(&self, y: &[T], zs: &[T], out: &mut [T]) {
        self.batch(y, zs, T::one(), out);
    }

    fn eval_batch_rescaled(&self, y: &[T], zs: &[T], period: T, out: &mut [T]) {
        self.batch(y, zs, period, out);
    }

    fn global_bounds(&self) -> Option<NormBounds<T>> {
        Some(NormBounds::new(self.omega + self.kappa, self.kappa, self.kappa))
    }
}

/// Period-normalized Winfree model.
pub fn builtin_winfree<T: Scalar>(omega: T, kappa: T, n: usize) -> Result<ModelSpec<T>> {
    validate(omega, kappa, n)?;
    let raw = ModelSpec::new(
        Arc::new(Winfree { n, omega, kappa }),
        Some(T::TAU()),
        "winfree",
    )?;
    normalize_period(&raw)
}

/// Period-normalized attractive Kuramoto model.
pub fn builtin_kuramoto<T: Scalar>(omega: T, kappa: T, n: usize) -> Result<ModelSpec<T>> {
    validate(omega, kappa, n)?;
    let raw = ModelSpec::new(
        Arc::new(Kuramoto { n, omega, kappa }),
        Some(T::TAU()),
        "kuramoto",
    )?;
    normalize_period(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn winfree_closed_form_on_diagonal() {
        let w = Winfree { n: 4, omega: 2.0, kappa: 1.0 };
        let s = PI / 3.0;
        let expected = 2.0 - 1.5 * (3f64.sqrt() / 2.0);
        assert!((w.eval(&[s; 4], s) - expected).abs() < 1e-15);
        assert!((expected - 0.70096).abs() < 1e-5);
        // derivative on the diagonal: -κ(1 + cos s) cos s
        let d = w.eval_dz(&[s; 4], s);
        assert!((d + (1.0 + s.cos()) * s.cos()).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_gives_constant_field() {
        let m = builtin_winfree(1.7, 0.0, 3).unwrap();
        let k = builtin_kuramoto(1.7, 0.0, 3).unwrap();
        for (y, z) in [([0.1, 0.9, -3.0], 0.4), ([5.0, 2.0, 1.0], -7.1)] {
            assert!((m.eval_f(&y, z) - 1.7 / TAU).abs() < 1e-16);
            assert!((k.eval_f(&y, z) - 1.7 / TAU).abs() < 1e-16);
        }
    }

    #[test]
    fn kuramoto_diagonal_is_exact() {
        let k = builtin_kuramoto(1.0, 0.2, 5).unwrap();
        for i in 0..50 {
            let s = -3.0 + 0.173 * i as f64;
            assert_eq!(k.diag(s), 1.0 / TAU);
            assert_eq!(k.diag_dz(s), -0.2);
            assert!((k.lambda(s) + TAU * 0.2).abs() < 1e-14);
        }
        assert!((k.lambda(0.3) + 1.25664).abs() < 1e-5);
    }

    #[test]
    fn analytic_bounds_after_normalization() {
        let k = builtin_kuramoto(1.0, 0.2, 5).unwrap();
        let b = k.norm_bounds().unwrap();
        assert!((b.f - 1.2 / TAU).abs() < 1e-15);
        assert!((b.df - 0.2).abs() < 1e-15);
        assert!((b.d2f - 0.2 * TAU).abs() < 1e-15);
        assert!((b.f - 0.19099).abs() < 1e-5 && (b.d2f - 1.25664).abs() < 1e-5);
        let zero = builtin_kuramoto(1.0, 0.0, 5).unwrap().norm_bounds().unwrap();
        assert_eq!((zero.df, zero.d2f), (0.0, 0.0));
        assert!((zero.f - 1.0 / TAU).abs() < 1e-16);
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(builtin_winfree(1.0, 1.0, 1).is_err());
        assert!(builtin_winfree(0.0, 1.0, 3).is_err());
        assert!(builtin_kuramoto(1.0, -0.1, 3).is_err());
        assert!(builtin_kuramoto(f64::NAN, 0.1, 3).is_err());
    }

    fn central_dz(m: &ModelSpec<f64>, y: &[f64], z: f64, h: f64) -> f64 {
        (m.eval_f(y, z + h) - m.eval_f(y, z - h)) / (2.0 * h)
    }

    proptest! {
        #[test]
        fn builtins_are_jointly_periodic(
            y in prop::collection::vec(-5.0f64..5.0, 6),
            z in -5.0f64..5.0,
            omega in 0.1f64..4.0,
            kappa in 0.0f64..2.0,
        ) {
            for m in [builtin_winfree(omega, kappa, 6).unwrap(), builtin_kuramoto(omega, kappa, 6).unwrap()] {
                let shifted: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
                prop_assert!((m.eval_f(&shifted, z + 1.0) - m.eval_f(&y, z)).abs() < 1e-12);
            }
        }

        #[test]
        fn dz_matches_central_difference(
            y in prop::collection::vec(-2.0f64..2.0, 4),
            z in -2.0f64..2.0,
        ) {
            for m in [builtin_winfree(2.0, 1.0, 4).unwrap(), builtin_kuramoto(1.0, 0.7, 4).unwrap()] {
                let fd = central_dz(&m, &y, z, 1e-4);
                prop_assert!((m.eval_df_z(&y, z) - fd).abs() <= 1e-6);
            }
        }

        #[test]
        fn batch_agrees_with_pointwise(
            y in prop::collection::vec(-3.0f64..3.0, 5),
            zs in prop::collection::vec(-3.0f64..3.0, 6),
        ) {
            for m in [builtin_winfree(2.0, 1.0, 5).unwrap(), builtin_kuramoto(1.0, 0.7, 5).unwrap()] {
                let mut out = vec![0.0; zs.len()];
                m.eval_batch(&y, &zs, &mut out);
                for (o, &z) in out.iter().zip(&zs) {
                    prop_assert!((o - m.eval_f(&y, z)).abs() < 1e-14);
                }
            }
        }
    }
}
