//! Perturbations `H: R^N -> R^N`, expressed in normalized (period-1) units.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "")]
pub enum PerturbationKind<T: Scalar> {
    Zero,
    /// Constant per-oscillator detuning, mean removed.
    ConstantDetune { values: Vec<T> },
    /// `H_i(Y) = amplitude · sin(2π · mode · mean(Y) + phase_i)`.
    /// 1-periodic exactly when `mode` is an integer.
    TrigMeanField {
        amplitude: T,
        mode: T,
        phases: Vec<T>,
    },
}

#[derive(Clone, Debug)]
pub struct PerturbationSpec<T: Scalar> {
    n: usize,
    kind: PerturbationKind<T>,
    phase_sin_cos: Vec<(T, T)>,
}

impl<T: Scalar> PerturbationSpec<T> {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            kind: PerturbationKind::Zero,
            phase_sin_cos: Vec::new(),
        }
    }

    /// Removes the mean of `values` so the detuning does not shift the common frequency.
    pub fn constant_detune(values: Vec<T>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("detune", "need finite values"));
        }
        let mean = values.iter().copied().sum::<T>() / T::from_usize_lossy(values.len());
        let values: Vec<T> = values.into_iter().map(|v| v - mean).collect();
        Ok(Self {
            n: values.len(),
            kind: PerturbationKind::ConstantDetune { values },
            phase_sin_cos: Vec::new(),
        })
    }

    pub fn trig_mean_field(amplitude: T, mode: T, phases: Vec<T>) -> Result<Self> {
        if !amplitude.is_finite() || !mode.is_finite() || phases.iter().any(|p| !p.is_finite())
        {
            return Err(invalid("trig", "need finite amplitude, mode and phases"));
        }
        if phases.is_empty() {
            return Err(invalid("trig", "need one phase per oscillator"));
        }
        let phase_sin_cos = phases.iter().map(|p| p.sin_cos()).collect();
        Ok(Self {
            n: phases.len(),
            kind: PerturbationKind::TrigMeanField {
                amplitude,
                mode,
                phases,
            },
            phase_sin_cos,
        })
    }

    /// Random 1-periodic trigonometric perturbation with integer mode in `1..=3`
    /// and uniform phases, whose quasi-norm is exactly `amplitude`.
    pub fn random_trig<R: Rng + ?Sized>(n: usize, amplitude: T, rng: &mut R) -> Self {
        let mode = T::from_i32(rng.random_range(1..=3)).unwrap();
        let phases = (0..n)
            .map(|_| T::lit(rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        Self::trig_mean_field(amplitude, mode, phases).expect("finite parameters")
    }

    pub fn from_kind(n: usize, kind: PerturbationKind<T>) -> Result<Self> {
        let p = match kind {
            PerturbationKind::Zero => Self::zero(n),
            PerturbationKind::ConstantDetune { values } => Self::constant_detune(values)?,
            PerturbationKind::TrigMeanField {
                amplitude,
                mode,
                phases,
            } => Self::trig_mean_field(amplitude, mode, phases)?,
        };
        if p.n != n {
            return Err(invalid(
                "perturbation",
                format!("has {} components, model has {n}", p.n),
            ));
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &PerturbationKind<T> {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PerturbationKind::Zero)
    }

    /// `H(Y + 1) = H(Y)` for all `Y`.
    pub fn is_periodic(&self) -> bool {
        match &self.kind {
            PerturbationKind::TrigMeanField { mode, .. } => mode.fract() == T::zero(),
            _ => true,
        }
    }

    /// Adds `H(Y)` to `out[..N]`.
    pub fn add_to(&self, y: &[T], out: &mut [T]) {
        match &self.kind {
            PerturbationKind::Zero => {}
            PerturbationKind::ConstantDetune { values } => {
                for (o, &v) in out.iter_mut().zip(values) {
                    *o += v;
                }
            }
            PerturbationKind::TrigMeanField {
                amplitude, mode, ..
            } => {
                let mean = y.iter().copied().sum::<T>() / T::from_usize_lossy(self.n);
                let (sa, ca) = (T::TAU() * *mode * mean).sin_cos();
                for (o, &(sp, cp)) in out.iter_mut().zip(&self.phase_sin_cos) {
                    *o += *amplitude * (sa * cp + ca * sp);
                }
            }
        }
    }

    pub fn eval_h(&self, y: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n];
        self.add_to(y, &mut out);
        out
    }

    /// Closed-form `‖H‖_B`.
    pub fn analytic_norm(&self) -> T {
        match &self.kind {
            PerturbationKind::Zero => T::zero(),
            PerturbationKind::ConstantDetune { values } => crate::scalar::max_abs(values),
            PerturbationKind::TrigMeanField {
                amplitude,
                mode,
                phases,
            } => {
                if *mode == T::zero() {
                    amplitude.abs() * phases.iter().fold(T::zero(), |m, p| m.max(p.sin().abs()))
                } else {
                    amplitude.abs()
                }
            }
        }
    }

    /// The same perturbation with every value scaled by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        let kind = match &self.kind {
            PerturbationKind::Zero => PerturbationKind::Zero,
            PerturbationKind::ConstantDetune { values } => PerturbationKind::ConstantDetune {
                values: values.iter().map(|&v| v * factor).collect(),
            },
            PerturbationKind::TrigMeanField {
                amplitude,
                mode,
                phases,
            } => PerturbationKind::TrigMeanField {
                amplitude: *amplitude * factor,
                mode: *mode,
                phases: phases.clone(),
            },
        };
        Self {
            n: self.n,
            kind,
            phase_sin_cos: self.phase_sin_cos.clone(),
        }
    }
}
