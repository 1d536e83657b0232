//! Quasi-norm estimation on the diagonal slab `B = {Y : max|y_i − y_j| ≤ 1}`.
//!
//! For a 1-periodic function the supremum over the unbounded slab equals the supremum
//! over the fundamental domain `{b·1 + w : b ∈ [0,1), w ∈ [0,1]^q}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelSpec, NormBounds, PerturbationKind, PerturbationSpec};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Multiplier applied to sampled suprema.
pub const SAFETY_FACTOR: f64 = 1.05;

const FIRST_DIFF_STEP: f64 = 1e-5;
const SECOND_DIFF_STEP: f64 = 1e-3;

/// A point `base·1 + offsets` of the fundamental slab domain.
#[derive(Clone, Debug, PartialEq)]
pub struct SlabSample<T> {
    pub base: T,
    pub offsets: Vec<T>,
}

impl<T: Scalar> SlabSample<T> {
    pub fn point(&self) -> Vec<T> {
        self.offsets.iter().map(|&o| self.base + o).collect()
    }
}

/// Sampling resolution for slab suprema. A full tensor grid with `points_per_axis`
/// nodes per coordinate is used when it has at most `max_points` nodes; otherwise
/// `max_points` seeded uniform samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormGrid {
    pub points_per_axis: usize,
    pub max_points: usize,
    pub seed: u64,
}

impl Default for NormGrid {
    fn default() -> Self {
        Self {
            points_per_axis: 8,
            max_points: 4096,
            seed: 0x5eed,
        }
    }
}

impl NormGrid {
    /// Fundamental-domain samples in dimension `q`.
    pub fn samples<T: Scalar>(&self, q: usize) -> Vec<SlabSample<T>> {
        let ppa = self.points_per_axis.max(2);
        let full = (ppa as f64).powi(q as i32 + 1);
        if full <= self.max_points as f64 {
            let total = ppa.pow(q as u32 + 1);
            let step = T::one() / T::from_usize_lossy(ppa - 1);
            (0..total)
                .map(|mut idx| {
                    let base = T::from_usize_lossy(idx % ppa) / T::from_usize_lossy(ppa);
                    idx /= ppa;
                    let offsets = (0..q)
                        .map(|_| {
                            let k = idx % ppa;
                            idx /= ppa;
                            T::from_usize_lossy(k) * step
                        })
                        .collect();
                    SlabSample { base, offsets }
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            (0..self.max_points)
                .map(|_| SlabSample {
                    base: T::lit(rng.random_range(0.0..1.0)),
                    offsets: (0..q).map(|_| T::lit(rng.random_range(0.0..=1.0))).collect(),
                })
                .collect()
        }
    }
}

/// Analytic bounds when the model carries them, sampled estimates otherwise.
pub fn norm_bounds<T: Scalar>(model: &ModelSpec<T>, grid: &NormGrid) -> Result<NormBounds<T>> {
    match model.norm_bounds() {
        Some(b) => Ok(b),
        None => sampled_norm_bounds(model, grid),
    }
}

/// Grid-sampled suprema of `|F|`, `|∂_j F|`, `|∂_j ∂_k F|` (central differences),
/// each multiplied by [`SAFETY_FACTOR`].
pub fn sampled_norm_bounds<T: Scalar>(
    model: &ModelSpec<T>,
    grid: &NormGrid,
) -> Result<NormBounds<T>> {
    if !model.period_normalized() {
        return Err(Error::UnboundedModel);
    }
    let n = model.n();
    let q = n + 1;
    let eval = |p: &[T]| model.eval_f(&p[..n], p[n]);
    let h1 = T::lit(FIRST_DIFF_STEP);
    let h2 = T::lit(SECOND_DIFF_STEP);
    let two = T::lit(2.0);
    let four = T::lit(4.0);

    let (mut sup_f, mut sup_df, mut sup_d2f) = (T::zero(), T::zero(), T::zero());
    let mut p = vec![T::zero(); q];
    for sample in grid.samples::<T>(q) {
        p.copy_from_slice(&sample.point());
        let f0 = eval(&p);
        sup_f = sup_f.max(f0.abs());
        for a in 0..q {
            let orig = p[a];
            p[a] = orig + h1;
            let fp = eval(&p);
            p[a] = orig - h1;
            let fm = eval(&p);
            sup_df = sup_df.max(((fp - fm) / (two * h1)).abs());

            p[a] = orig + h2;
            let fpp = eval(&p);
            p[a] = orig - h2;
            let fmm = eval(&p);
            p[a] = orig;
            sup_d2f = sup_d2f.max(((fpp - two * f0 + fmm) / (h2 * h2)).abs());

            for b in (a + 1)..q {
                let orig_b = p[b];
                let mut corner = |da: T, db: T| {
                    p[a] = orig + da;
                    p[b] = orig_b + db;
                    eval(&p)
                };
                let mixed = (corner(h2, h2) - corner(h2, -h2) - corner(-h2, h2)
                    + corner(-h2, -h2))
                    / (four * h2 * h2);
                p[a] = orig;
                p[b] = orig_b;
                sup_d2f = sup_d2f.max(mixed.abs());
            }
        }
    }
    let k = T::lit(SAFETY_FACTOR);
    Ok(NormBounds::new(sup_f * k, sup_df * k, sup_d2f * k))
}

/// Upper estimate of `‖H‖_B`.
pub fn norm_h<T: Scalar>(perturbation: &PerturbationSpec<T>, grid: &NormGrid) -> T {
    match perturbation.kind() {
        PerturbationKind::Zero | PerturbationKind::ConstantDetune { .. } => {
            perturbation.analytic_norm()
        }
        PerturbationKind::TrigMeanField { .. } if !perturbation.is_periodic() => {
            perturbation.analytic_norm()
        }
        PerturbationKind::TrigMeanField { .. } => {
            let sup = grid
                .samples::<T>(perturbation.n())
                .iter()
                .map(|s| crate::scalar::max_abs(&perturbation.eval_h(&s.point())))
                .fold(T::zero(), T::max);
            sup * T::lit(SAFETY_FACTOR)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_kuramoto, builtin_winfree};

    fn unbounded(model: ModelSpec<f64>) -> ModelSpec<f64> {
        model.with_norm_bounds(None)
    }

    #[test]
    fn samples_lie_in_slab() {
        for grid in [NormGrid { points_per_axis: 4, max_points: 10_000, seed: 1 }, NormGrid { points_per_axis: 4, max_points: 50, seed: 1 }] {
            for s in grid.samples::<f64>(4) {
                assert!((0.0..1.0).contains(&s.base));
                assert!(crate::scalar::spread(&s.offsets) <= 1.0);
            }
        }
    }

    #[test]
    fn sampled_kuramoto_close_to_analytic() {
        let model = builtin_kuramoto::<f64>(1.0, 0.2, 2).unwrap();
        let analytic = model.norm_bounds().unwrap();
        let grid = NormGrid { points_per_axis: 9, max_points: 100_000, seed: 3 };
        let sampled = sampled_norm_bounds(&unbounded(model), &grid).unwrap();
        for (s, a) in sampled.as_array().iter().zip(analytic.as_array()) {
            assert!(*s <= a * 1.05 + 1e-6, "{s} vs {a}");
            assert!(*s >= a * 0.9, "{s} vs {a}");
        }
    }

    #[test]
    fn coarse_estimate_dominates_finer_sampling() {
        let model = unbounded(builtin_winfree::<f64>(2.0, 1.0, 2).unwrap());
        let coarse = NormGrid { points_per_axis: 7, max_points: 100_000, seed: 0 };
        let fine = NormGrid { points_per_axis: 13, max_points: 100_000, seed: 0 };
        let c = sampled_norm_bounds(&model, &coarse).unwrap();
        let f = sampled_norm_bounds(&model, &fine).unwrap();
        for (cv, fv) in c.as_array().iter().zip(f.as_array()) {
            assert!(*cv >= fv / 1.05, "coarse {cv} fine raw {}", fv / 1.05);
        }
    }

    #[test]
    fn prefers_analytic_bounds() {
        let model = builtin_kuramoto::<f64>(1.0, 0.0, 3).unwrap();
        let b = norm_bounds(&model, &NormGrid::default()).unwrap();
        assert!((b.f - 1.0 / std::f64::consts::TAU).abs() < 1e-16);
        assert_eq!((b.df, b.d2f), (0.0, 0.0));
    }

    #[test]
    fn non_periodic_without_bounds_is_rejected() {
        let model = builtin_kuramoto::<f64>(1.0, 0.2, 3).unwrap();
        let raw = ModelSpec::new(model.field().clone(), None, "x").unwrap().with_norm_bounds(None);
        assert_eq!(norm_bounds(&raw, &NormGrid::default()), Err(Error::UnboundedModel));
    }

    #[test]
    fn perturbation_norms() {
        let grid = NormGrid::default();
        assert_eq!(norm_h(&PerturbationSpec::<f64>::zero(3), &grid), 0.0);
        let detune = PerturbationSpec::<f64>::constant_detune(vec![0.01, -0.01, 0.0]).unwrap();
        assert!((norm_h(&detune, &grid) - 0.01).abs() < 1e-17);
        for mode in [1.0, 2.0, 3.0] {
            let a = 0.37;
            let trig = PerturbationSpec::<f64>::trig_mean_field(a, mode, vec![0.0, 1.0, 2.5]).unwrap();
            let v = norm_h(&trig, &grid);
            assert!(v >= a * 0.99 && v <= 1.05 * a + 1e-15, "mode {mode}: {v}");
        }
    }
}
