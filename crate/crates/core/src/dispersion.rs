//! Dispersion bound, perturbation radius and the periodic dispersion curve.
//!
//! For `0 < D ≤ D*` the curve `Δ` is the positive 1-periodic solution of
//! `Δ'(s) = c + Λ(s) Δ(s)`, and the synchronization set is the tube
//! `C_r = {X : ∃ν, max_i |x_i − ν| < Δ(ν)}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypotheses::{HypothesisReport, LambdaProfile};
use crate::numerics::{cumulative_simpson, golden_section_min, hermite};
use crate::scalar::Scalar;

/// Number of ν candidates scanned by [`membership`] before refinement.
pub const MEMBERSHIP_SCAN: usize = 256;

/// `η = (1/L, 2 + L/α, α/L)`.
pub fn compute_eta<T: Scalar>(report: &HypothesisReport<T>) -> Result<[T; 3]> {
    if !report.both_hold() {
        return Err(Error::HypothesesFailed {
            holds_h: report.holds_h,
            holds_hstar: report.holds_hstar,
        });
    }
    let (l, a) = (report.l_total, report.alpha);
    Ok([T::one() / l, T::lit(2.0) + l / a, a / l])
}

/// `q·e^{−λ₂}` with `q = 1 − e^{−λ₁}`.
fn contraction<T: Scalar>(lambda1: T, lambda2: T) -> T {
    -(-lambda1).exp_m1() * (-lambda2).exp()
}

/// Largest admissible dispersion bound, `(η₃/2)·q / (q + η₂ e^{λ₂})`.
pub fn compute_dstar<T: Scalar>(eta: [T; 3], lambda1: T, lambda2: T) -> Result<T> {
    if !(lambda1 > T::zero()) {
        return Err(Error::HypothesesFailed {
            holds_h: true,
            holds_hstar: false,
        });
    }
    let k = contraction(lambda1, lambda2);
    Ok(eta[2] / T::lit(2.0) * k / (k + eta[1]))
}

/// `r = (D/η₁)·[η₃ q e^{−λ₂} − (q e^{−λ₂} + η₂) D]`, for `D ∈ (0, D*]`.
pub fn compute_radius<T: Scalar>(eta: [T; 3], lambda1: T, lambda2: T, d: T) -> Result<T> {
    let d_star = compute_dstar(eta, lambda1, lambda2)?;
    // D* itself is computed in floating point; accept a rounding-level overshoot.
    if !(d > T::zero() && d <= d_star * (T::one() + T::lit(4.0) * T::epsilon())) {
        return Err(Error::DispersionOutOfRange {
            d: d.to_f64_lossy(),
            d_star: d_star.to_f64_lossy(),
        });
    }
    Ok(radius_unchecked(eta, lambda1, lambda2, d))
}

fn radius_unchecked<T: Scalar>(eta: [T; 3], lambda1: T, lambda2: T, d: T) -> T {
    let k = contraction(lambda1, lambda2);
    d / eta[0] * (eta[2] * k - (k + eta[1]) * d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DispersionParams<T: Scalar> {
    pub eta: [T; 3],
    pub lambda1: T,
    pub lambda2: T,
    pub d_star: T,
    pub d: T,
    pub radius: T,
    /// Inhomogeneous coefficient `(η₁ r + η₂ D²)/(η₃ − D)`.
    pub c: T,
}

impl<T: Scalar> DispersionParams<T> {
    /// `|c e^{λ₂}/(1 − e^{−λ₁}) − D|`; vanishes up to rounding.
    pub fn balance_defect(&self) -> T {
        let q = -(-self.lambda1).exp_m1();
        (self.c * self.lambda2.exp() / q - self.d).abs()
    }
}

/// Parameters for a chosen `D` (default `D*`).
pub fn dispersion_params<T: Scalar>(
    report: &HypothesisReport<T>,
    d: Option<T>,
) -> Result<DispersionParams<T>> {
    let eta = compute_eta(report)?;
    let (l1, l2) = match (report.lambda1, report.lambda2) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::HypothesesFailed {
                holds_h: report.holds_h,
                holds_hstar: report.holds_hstar,
            })
        }
    };
    let d_star = compute_dstar(eta, l1, l2)?;
    let d = d.unwrap_or(d_star);
    let radius = compute_radius(eta, l1, l2, d)?;
    let c = (eta[0] * radius + eta[1] * d * d) / (eta[2] - d);
    Ok(DispersionParams {
        eta,
        lambda1: l1,
        lambda2: l2,
        d_star,
        d,
        radius,
        c,
    })
}

/// Picks `D ∈ (0, D*]` maximizing `r(D)` by golden section, never doing worse than `D*`.
pub fn optimize_radius<T: Scalar>(report: &HypothesisReport<T>) -> Result<DispersionParams<T>> {
    let base = dispersion_params(report, None)?;
    let (l1, l2, eta) = (base.lambda1, base.lambda2, base.eta);
    let (d, neg_r) = golden_section_min(
        |d| -radius_unchecked(eta, l1, l2, d),
        base.d_star * T::lit(1e-6),
        base.d_star,
        base.d_star * T::lit(1e-12),
    );
    if -neg_r > base.radius && d <= base.d_star {
        dispersion_params(report, Some(d))
    } else {
        Ok(base)
    }
}

/// Identifies the curve a trajectory was recorded against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CurveTag<T: Scalar> {
    pub d: T,
    pub radius: T,
    pub panels: usize,
}

/// Samples of `Δ` on `M + 1` uniform nodes of `[0, 1]`, with `C¹` Hermite interpolation.
#[derive(Clone, Debug)]
pub struct DispersionCurve<T: Scalar> {
    params: DispersionParams<T>,
    lambda: Vec<T>,
    samples: Vec<T>,
    slopes: Vec<T>,
    gap: T,
}

/// `Δ(s) = K e^{I(s)} (G(1) + (e^{−I(1)} − 1) G(s))` with `G(s) = ∫₀^s e^{−I}` and
/// `K = c e^{I(1)}/(1 − e^{I(1)})`, which is `c·e^{I(1)+I(s)}·∫_s^{1+s} e^{−I}/(1 − e^{I(1)})`
/// after splitting the integral at 1.
pub fn build_curve<T: Scalar>(
    profile: &LambdaProfile<T>,
    params: &DispersionParams<T>,
) -> Result<DispersionCurve<T>> {
    let h = profile.step();
    let cum = profile.cumulative();
    let i1 = profile.integral();
    let weights: Vec<T> = cum.iter().map(|&v| (-v).exp()).collect();
    let g = cumulative_simpson(&weights, h);
    let g1 = g[g.len() - 1];
    let k = -params.c * i1.exp() / i1.exp_m1();
    let wrap = (-i1).exp_m1();
    let mut samples: Vec<T> = cum
        .iter()
        .zip(&g)
        .map(|(&ii, &gi)| k * ii.exp() * (g1 + wrap * gi))
        .collect();
    // Δ(1) equals Δ(0) analytically; pin it so interpolation is exactly periodic.
    let m = samples.len() - 1;
    let gap = (samples[m] - samples[0]).abs();
    samples[m] = samples[0];
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > T::zero()))
    {
        return Err(Error::NonPositiveCurve {
            index,
            value: value.to_f64_lossy(),
        });
    }
    let lambda = profile.values().to_vec();
    let slopes = samples
        .iter()
        .zip(&lambda)
        .map(|(&d, &l)| params.c + l * d)
        .collect();
    Ok(DispersionCurve {
        params: *params,
        lambda,
        samples,
        slopes,
        gap,
    })
}

impl<T: Scalar> DispersionCurve<T> {
    pub fn params(&self) -> &DispersionParams<T> {
        &self.params
    }

    pub fn panels(&self) -> usize {
        self.samples.len() - 1
    }

    pub fn step(&self) -> T {
        T::one() / T::from_usize_lossy(self.panels())
    }

    pub fn node(&self, i: usize) -> T {
        T::from_usize_lossy(i) * self.step()
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    /// `Λ` at the nodes.
    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn tag(&self) -> CurveTag<T> {
        CurveTag {
            d: self.params.d,
            radius: self.params.radius,
            panels: self.panels(),
        }
    }

    fn locate(&self, s: T) -> (usize, T) {
        let frac = s - s.floor();
        let h = self.step();
        let cell = (frac / h)
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(self.panels() - 1);
        (cell, frac - T::from_usize_lossy(cell) * h)
    }

    fn interpolate(&self, s: T) -> (T, T) {
        let (i, tau) = self.locate(s);
        hermite(
            self.samples[i],
            self.slopes[i],
            self.samples[i + 1],
            self.slopes[i + 1],
            self.step(),
            tau,
        )
    }

    /// `Δ(s)` for any real `s` (periodic extension).
    pub fn eval(&self, s: T) -> T {
        self.interpolate(s).0
    }

    /// `Δ'(s)` of the interpolant.
    pub fn slope(&self, s: T) -> T {
        self.interpolate(s).1
    }

    pub fn max(&self) -> T {
        self.samples.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.samples.iter().copied().fold(T::infinity(), T::min)
    }

    /// `max_i |Δ'(s_i) − c − Λ(s_i) Δ(s_i)|`, with `Δ'` from a periodic fourth-order
    /// central difference of the samples (independent of the ODE).
    pub fn ode_residual_max(&self) -> T {
        let m = self.panels();
        let at = |i: isize| self.samples[i.rem_euclid(m as isize) as usize];
        let twelve_h = T::lit(12.0) * self.step();
        let eight = T::lit(8.0);
        (0..m)
            .map(|i| {
                let i = i as isize;
                let fd = (at(i - 2) - eight * at(i - 1) + eight * at(i + 1) - at(i + 2)) / twelve_h;
                (fd - self.params.c - self.lambda[i as usize] * at(i)).abs()
            })
            .fold(T::zero(), T::max)
    }

    /// `|Δ(1) − Δ(0)|` from the unpinned closed form, i.e. before periodic pinning.
    pub fn periodicity_gap(&self) -> T {
        self.gap
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Membership<T: Scalar> {
    pub nu: T,
    pub margin: T,
}

/// Finds `ν` maximizing `Δ(ν) − max_i |x_i − ν|`; `Some` iff the margin is positive.
pub fn membership<T: Scalar>(x: &[T], curve: &DispersionCurve<T>) -> Option<Membership<T>> {
    let (lo, hi) = crate::scalar::min_max(x);
    let d = curve.params.d;
    let (a, b) = (hi - d, lo + d);
    if !(a <= b) {
        return None;
    }
    let g = |nu: T| {
        let dev = x.iter().fold(T::zero(), |m, &v| m.max((v - nu).abs()));
        curve.eval(nu) - dev
    };
    let steps = MEMBERSHIP_SCAN - 1;
    let width = (b - a) / T::from_usize_lossy(steps);
    let (best, best_g) = (0..=steps)
        .map(|k| a + T::from_usize_lossy(k) * width)
        .map(|nu| (nu, g(nu)))
        .fold((a, T::neg_infinity()), |acc, cand| if cand.1 > acc.1 { cand } else { acc });
    let (nu, neg) = golden_section_min(
        |nu| -g(nu),
        (best - width).max(a),
        (best + width).min(b),
        T::lit(1e-14).max(width * T::lit(1e-9)),
    );
    let (nu, margin) = if -neg > best_g { (nu, -neg) } else { (best, best_g) };
    (margin > T::zero()).then_some(Membership { nu, margin })
}
