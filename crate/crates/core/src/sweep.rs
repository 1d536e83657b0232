//! Hypothesis classification over a `(κ, ω)` parameter grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::{build_curve, dispersion_params};
use crate::error::{invalid, Result};
use crate::hypotheses::{analyze, HypothesisOptions};
use crate::integrator::{default_step, integrate_with};
use crate::model::{ModelSpec, PerturbationSpec};
use crate::scalar::Scalar;
use crate::sync_analysis::VerdictAccumulator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "H-fail")]
    HFail,
    #[serde(rename = "Hstar-fail")]
    HstarFail,
    #[serde(rename = "both-hold")]
    BothHold,
    /// The cell could not be evaluated (invalid parameters or a numerical failure).
    #[serde(rename = "error")]
    Error,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::HFail => "H-fail",
            Classification::HstarFail => "Hstar-fail",
            Classification::BothHold => "both-hold",
            Classification::Error => "error",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepCell<T: Scalar> {
    pub kappa: T,
    pub omega: T,
    pub classification: Classification,
    pub d_star: Option<T>,
    pub radius: Option<T>,
    pub empirical_sync: Option<bool>,
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Axis<T: Scalar> {
    pub lo: T,
    pub hi: T,
    pub count: usize,
}

impl<T: Scalar> Axis<T> {
    pub fn values(&self) -> Vec<T> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            c => (0..c)
                .map(|i| {
                    self.lo
                        + (self.hi - self.lo) * T::from_usize_lossy(i) / T::from_usize_lossy(c - 1)
                })
                .collect(),
        }
    }
}

/// Short in-tube simulation attached to each both-hold cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmpiricalProbe<T: Scalar> {
    pub t_end: T,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions<T: Scalar> {
    pub kappa: Axis<T>,
    pub omega: Axis<T>,
    pub threads: usize,
    pub empirical: Option<EmpiricalProbe<T>>,
    pub hypotheses: HypothesisOptions,
}

/// Evaluates every cell; rows are ordered by `κ`, then `ω`. `build(omega, kappa)` makes
/// the model for one cell.
pub fn sweep<T, B>(build: B, opts: &SweepOptions<T>) -> Result<Vec<SweepCell<T>>>
where
    T: Scalar,
    B: Fn(T, T) -> Result<ModelSpec<T>> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| invalid("threads", e.to_string()))?;
    let cells: Vec<(usize, T, T)> = opts
        .kappa
        .values()
        .into_iter()
        .flat_map(|k| opts.omega.values().into_iter().map(move |w| (k, w)))
        .enumerate()
        .map(|(i, (k, w))| (i, k, w))
        .collect();
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(index, kappa, omega)| classify(&build, index, kappa, omega, opts))
            .collect()
    }))
}

fn classify<T, B>(build: &B, index: usize, kappa: T, omega: T, opts: &SweepOptions<T>) -> SweepCell<T>
where
    T: Scalar,
    B: Fn(T, T) -> Result<ModelSpec<T>>,
{
    let mut cell = SweepCell {
        kappa,
        omega,
        classification: Classification::Error,
        d_star: None,
        radius: None,
        empirical_sync: None,
    };
    let Ok(model) = build(omega, kappa) else {
        return cell;
    };
    let analysis = analyze(&model, &opts.hypotheses);
    let report = &analysis.report;
    if !report.holds_h {
        cell.classification = Classification::HFail;
        return cell;
    }
    if !report.holds_hstar {
        cell.classification = Classification::HstarFail;
        return cell;
    }
    let (Ok(params), Some(profile)) = (dispersion_params(report, None), analysis.profile.as_ref())
    else {
        return cell;
    };
    cell.classification = Classification::BothHold;
    cell.d_star = Some(params.d_star);
    cell.radius = Some(params.radius);
    if let Some(probe) = opts.empirical {
        cell.empirical_sync = build_curve(profile, &params).ok().and_then(|curve| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                probe.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            let nu = T::lit(rng.random_range(0.0..1.0));
            let half_width = T::lit(0.5) * curve.eval(nu);
            let x0: Vec<T> = (0..model.n())
                .map(|_| nu + half_width * T::lit(rng.random_range(-1.0..1.0)))
                .collect();
            let mut acc = VerdictAccumulator::new(&curve);
            let zero = PerturbationSpec::zero(model.n());
            integrate_with(
                &analysis.model,
                &zero,
                &x0,
                nu,
                probe.t_end,
                default_step(report),
                |v| acc.observe(v),
            )
            .ok()
            .map(|_| acc.finish().all_hold())
        });
    }
    cell
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_kuramoto, builtin_winfree};

    fn opts(kappa: Axis<f64>, omega: Axis<f64>) -> SweepOptions<f64> {
        SweepOptions { kappa, omega, threads: 2, empirical: None, hypotheses: HypothesisOptions::default() }
    }

    #[test]
    fn axis_values() {
        assert_eq!(Axis { lo: 1.0, hi: 2.0, count: 3 }.values(), vec![1.0, 1.5, 2.0]);
        assert_eq!(Axis { lo: 1.0, hi: 2.0, count: 1 }.values(), vec![1.0]);
        assert!(Axis { lo: 1.0, hi: 2.0, count: 0 }.values().is_empty());
    }

    #[test]
    fn winfree_row_boundary() {
        let o = opts(Axis { lo: 1.0, hi: 1.0, count: 1 }, Axis { lo: 1.0, hi: 1.6, count: 13 });
        let cells = sweep(|w, k| builtin_winfree(w, k, 3), &o).unwrap();
        for c in &cells {
            let expected = if c.omega < 1.299 { Classification::HFail } else { Classification::BothHold };
            if (c.omega - 1.299_038).abs() > 0.05 {
                assert_eq!(c.classification, expected, "ω = {}", c.omega);
            }
            assert_eq!(c.d_star.is_some(), c.classification == Classification::BothHold);
        }
    }

    #[test]
    fn kuramoto_zero_coupling_column() {
        let o = opts(Axis { lo: 0.0, hi: 1.0, count: 3 }, Axis { lo: 0.5, hi: 2.0, count: 3 });
        let cells = sweep(|w, k| builtin_kuramoto(w, k, 3), &o).unwrap();
        for c in cells {
            if c.kappa == 0.0 {
                assert_eq!(c.classification, Classification::HstarFail);
            } else {
                assert_eq!(c.classification, Classification::BothHold);
            }
        }
    }

    #[test]
    fn invalid_cells_are_marked() {
        let o = opts(Axis { lo: 0.5, hi: 0.5, count: 1 }, Axis { lo: 0.0, hi: 1.0, count: 2 });
        let cells = sweep(|w, k| builtin_kuramoto(w, k, 3), &o).unwrap();
        assert_eq!(cells[0].classification, Classification::Error);
        assert_eq!(cells[1].classification, Classification::BothHold);
    }

    #[test]
    fn empirical_probe_is_reproducible() {
        let mut o = opts(Axis { lo: 0.2, hi: 0.4, count: 2 }, Axis { lo: 1.0, hi: 1.5, count: 2 });
        o.empirical = Some(EmpiricalProbe { t_end: 5.0, seed: 42 });
        let a = sweep(|w, k| builtin_kuramoto(w, k, 3), &o).unwrap();
        o.threads = 1;
        let b = sweep(|w, k| builtin_kuramoto(w, k, 3), &o).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.empirical_sync == Some(true)));
    }

    #[test]
    fn classification_serializes_to_labels() {
        let s = serde_json::to_string(&[Classification::HFail, Classification::HstarFail, Classification::BothHold]).unwrap();
        assert_eq!(s, r#"["H-fail","Hstar-fail","both-hold"]"#);
    }
}
