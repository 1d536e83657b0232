//! Diagonal constants and the regularity / synchronization hypotheses.
//!
//! On the diagonal `s ↦ (s·1, s)` the model reduces to the scalar profile
//! `Λ(s) = ∂_{N+1}F(s·1, s) / F(s·1, s)`. The synchronization condition is
//! `∫₀¹ Λ < 0`, and the dispersion construction needs
//! `λ₁ = −∫₀¹ Λ` and `λ₂ = max_{0≤s,t≤1} ∫_t^{1+s} Λ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{norm_bounds, normalize_period, ModelSpec, NormGrid};
use crate::numerics::{bisect_root, cumulative_simpson, gauss_legendre5, golden_section_min, hermite};
use crate::scalar::Scalar;

/// `∫₀¹ Λ` must be below `-SIGN_TOLERANCE` for (H*) to be declared.
pub const SIGN_TOLERANCE: f64 = 1e-10;
/// Abscissa tolerance of every golden-section / bisection refinement.
pub const REFINE_TOLERANCE: f64 = 1e-10;
/// Relative tolerance of the sampled joint-periodicity check, raised to `1000 ε` for
/// scalars too coarse to resolve it.
pub const PERIODICITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HypothesisReport<T: Scalar> {
    pub alpha: T,
    pub l_components: [T; 3],
    pub l_total: T,
    pub lambda_integral: Option<T>,
    pub lambda1: Option<T>,
    pub lambda2: Option<T>,
    pub holds_h: bool,
    pub holds_hstar: bool,
}

impl<T: Scalar> HypothesisReport<T> {
    pub fn both_hold(&self) -> bool {
        self.holds_h && self.holds_hstar
    }
}

/// `min` (or `max`) of `F(s·1, s)` over one period with its location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiagonalExtremum<T> {
    pub value: T,
    pub at: T,
}

fn diagonal_extremum<T: Scalar>(model: &ModelSpec<T>, grid: usize, sign: T) -> DiagonalExtremum<T> {
    let grid = grid.max(4);
    let step = T::one() / T::from_usize_lossy(grid);
    let f = |s: T| sign * model.diag(s);
    let (best, _) = (0..grid)
        .map(|i| (i, f(T::from_usize_lossy(i) * step)))
        .fold((0, T::infinity()), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let centre = T::from_usize_lossy(best) * step;
    let (at, value) = golden_section_min(f, centre - step, centre + step, T::lit(REFINE_TOLERANCE));
    DiagonalExtremum {
        value: sign * value,
        at: at - at.floor(),
    }
}

/// `α = min_{s∈[0,1]} F(s·1, s)` by grid scan and golden-section refinement.
pub fn compute_alpha<T: Scalar>(model: &ModelSpec<T>, grid: usize) -> DiagonalExtremum<T> {
    diagonal_extremum(model, grid, T::one())
}

/// `max_{s∈[0,1]} F(s·1, s)`, the diagonal speed limit.
pub fn diagonal_max<T: Scalar>(model: &ModelSpec<T>, grid: usize) -> DiagonalExtremum<T> {
    diagonal_extremum(model, grid, -T::one())
}

/// Uniform samples of `Λ` on `[0, 1]` with the running integral `I(s) = ∫₀^s Λ`.
#[derive(Clone, Debug)]
pub struct LambdaProfile<T: Scalar> {
    model: ModelSpec<T>,
    values: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Scalar> LambdaProfile<T> {
    pub fn panels(&self) -> usize {
        self.values.len() - 1
    }

    pub fn step(&self) -> T {
        T::one() / T::from_usize_lossy(self.panels())
    }

    pub fn node(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.step()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    pub fn model(&self) -> &ModelSpec<T> {
        &self.model
    }

    /// `I(1) = ∫₀¹ Λ`.
    pub fn integral(&self) -> T {
        self.cumulative[self.panels()]
    }

    /// `Λ(s)` evaluated from the model.
    pub fn lambda_at(&self, s: T) -> T {
        self.model.lambda(s)
    }

    /// `I(s)` for any real `s`, using `I(k + s) = k·I(1) + I(s)` and cubic Hermite
    /// interpolation with slopes `Λ` between nodes.
    pub fn cumulative_at(&self, s: T) -> T {
        let k = s.floor();
        let frac = s - k;
        let m = self.panels();
        let h = self.step();
        let cell = (frac / h).floor().to_usize().unwrap_or(0).min(m - 1);
        let tau = frac - T::from_usize_lossy(cell) * h;
        let (v, _) = hermite(
            self.cumulative[cell],
            self.values[cell],
            self.cumulative[cell + 1],
            self.values[cell + 1],
            h,
            tau,
        );
        k * self.integral() + v
    }
}

/// Samples `Λ` on `m` uniform panels (`m` even) and integrates it with cumulative Simpson.
pub fn build_lambda_profile<T: Scalar>(model: &ModelSpec<T>, m: usize) -> Result<LambdaProfile<T>> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(invalid("panels", format!("must be even and >= 2, got {m}")));
    }
    let h = T::one() / T::from_usize_lossy(m);
    let mut values = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let s = T::from_usize_lossy(i) * h;
        let y = vec![s; model.n()];
        let f = model.eval_f(&y, s);
        if !(f > T::zero()) {
            return Err(Error::DiagonalNotPositive {
                at: s.to_f64_lossy(),
                value: f.to_f64_lossy(),
            });
        }
        values.push(model.eval_df_z(&y, s) / f);
    }
    let cumulative = cumulative_simpson(&values, h);
    Ok(LambdaProfile {
        model: model.clone(),
        values,
        cumulative,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Lambdas<T: Scalar> {
    pub lambda1: T,
    pub lambda2: T,
}

/// Refines the extremum of `I` around node `k`. `sign = 1` for a maximum, `-1` for a minimum.
fn refined_extremum<T: Scalar>(profile: &LambdaProfile<T>, k: usize, sign: T) -> T {
    let m = profile.panels();
    let mut best = sign * profile.cumulative[k];
    let cells = [(k > 0).then(|| k - 1), (k < m).then_some(k)];
    for lo in cells.into_iter().flatten() {
        let hi = lo + 1;
        // I has a local max where Λ goes from + to −, a local min where it goes − to +.
        let (la, lb) = (sign * profile.values[lo], sign * profile.values[hi]);
        if la > T::zero() && lb < T::zero() {
            let root = bisect_root(
                |s| profile.lambda_at(s),
                profile.node(lo),
                profile.node(hi),
                T::lit(1e-15),
            );
            let anchor = profile.node(k);
            let value = profile.cumulative[k]
                + gauss_legendre5(|s| profile.lambda_at(s), anchor, root);
            best = best.max(sign * value);
        }
    }
    sign * best
}

/// `λ₁ = −I(1)` and `λ₂ = I(1) + max_s I(s) − min_t I(t)`.
pub fn compute_lambdas<T: Scalar>(profile: &LambdaProfile<T>) -> Lambdas<T> {
    let cum = &profile.cumulative;
    let arg = |better: fn(T, T) -> bool| {
        (1..cum.len()).fold(0, |best, i| if better(cum[i], cum[best]) { i } else { best })
    };
    let k_max = arg(|a, b| a > b);
    let k_min = arg(|a, b| a < b);
    let max_i = refined_extremum(profile, k_max, T::one());
    let min_i = refined_extremum(profile, k_min, -T::one());
    let total = profile.integral();
    Lambdas {
        lambda1: -total,
        lambda2: (total + max_i - min_i).max(T::zero()),
    }
}

/// Largest sampled `|F(Y + 1, z + 1) − F(Y, z)| / (1 + |F(Y, z)|)`.
pub fn periodicity_defect<T: Scalar>(model: &ModelSpec<T>, samples: usize, seed: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n();
    let mut worst = T::zero();
    for _ in 0..samples {
        let y: Vec<T> = (0..n).map(|_| T::lit(rng.random_range(-2.0..2.0))).collect();
        let z = T::lit(rng.random_range(-2.0..2.0));
        let shifted: Vec<T> = y.iter().map(|&v| v + T::one()).collect();
        let f = model.eval_f(&y, z);
        let g = model.eval_f(&shifted, z + T::one());
        let d = (g - f).abs() / (T::one() + f.abs());
        worst = if d.is_nan() { T::infinity() } else { worst.max(d) };
    }
    worst
}

#[derive(Clone, Copy, Debug)]
pub struct HypothesisOptions {
    pub alpha_grid: usize,
    pub panels: usize,
    pub norm_grid: NormGrid,
    pub periodicity_samples: usize,
}

impl Default for HypothesisOptions {
    fn default() -> Self {
        Self {
            alpha_grid: 4096,
            panels: 2048,
            norm_grid: NormGrid::default(),
            periodicity_samples: 100,
        }
    }
}

/// Everything the downstream stages need from the hypothesis check.
#[derive(Clone, Debug)]
pub struct Analysis<T: Scalar> {
    /// The period-normalized model the report refers to.
    pub model: ModelSpec<T>,
    pub report: HypothesisReport<T>,
    pub profile: Option<LambdaProfile<T>>,
    pub alpha_at: T,
    pub diagonal_max: T,
}

pub fn check_hypotheses<T: Scalar>(model: &ModelSpec<T>) -> HypothesisReport<T> {
    analyze(model, &HypothesisOptions::default()).report
}

/// Runs every diagonal computation and collects verdicts. Failures are verdicts,
/// never errors.
pub fn analyze<T: Scalar>(model: &ModelSpec<T>, opts: &HypothesisOptions) -> Analysis<T> {
    let model = match model.period() {
        Some(p) if p != T::one() => normalize_period(model).unwrap_or_else(|_| model.clone()),
        _ => model.clone(),
    };
    let alpha = compute_alpha(&model, opts.alpha_grid);
    let diag_max = diagonal_max(&model, opts.alpha_grid);
    let bounds = norm_bounds(&model, &opts.norm_grid).ok();
    let periodic = model.period_normalized()
        && periodicity_defect(&model, opts.periodicity_samples, 0x9e37)
            <= T::lit(PERIODICITY_TOLERANCE).max(T::lit(1000.0) * T::epsilon());
    let l_components = bounds.map_or([T::infinity(); 3], |b| b.as_array());
    let holds_h = alpha.value > T::zero()
        && bounds.is_some_and(|b| b.is_finite())
        && periodic;

    let profile = if alpha.value > T::zero() {
        build_lambda_profile(&model, opts.panels).ok()
    } else {
        None
    };
    let lambdas = profile.as_ref().map(compute_lambdas);
    let lambda_integral = profile.as_ref().map(|p| p.integral());
    let holds_hstar = lambda_integral.is_some_and(|i| i < -T::lit(SIGN_TOLERANCE));

    let report = HypothesisReport {
        alpha: alpha.value,
        l_components,
        l_total: l_components.iter().copied().sum(),
        lambda_integral,
        lambda1: lambdas.map(|l| l.lambda1),
        lambda2: lambdas.map(|l| l.lambda2),
        holds_h,
        holds_hstar,
    };
    Analysis {
        model,
        report,
        profile,
        alpha_at: alpha.at,
        diagonal_max: diag_max.value,
    }
}
