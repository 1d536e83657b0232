//! Trigonometric-polynomial coupling fields,
//! `F(Y, z) = Σ_t c_t · Π_i trig(m_{t,i} y_i) · trig(k_t z)`, with integer modes and
//! natural period `2π`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{normalize_period, CouplingField, ModelSpec, NormBounds};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Trig {
    Sin,
    Cos,
}

impl Trig {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Trig::Sin => x.sin(),
            Trig::Cos => x.cos(),
        }
    }

    /// `d/dx trig(m x)`.
    #[inline]
    fn slope<T: Scalar>(self, mode: T, x: T) -> T {
        match self {
            Trig::Sin => mode * (mode * x).cos(),
            Trig::Cos => -mode * (mode * x).sin(),
        }
    }
}

/// `trig(mode · y_index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrigFactor {
    pub index: usize,
    pub trig: Trig,
    pub mode: i32,
}

/// `trig(mode · z)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZFactor {
    pub trig: Trig,
    pub mode: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrigTerm<T: Scalar> {
    pub coef: T,
    #[serde(default)]
    pub factors: Vec<TrigFactor>,
    /// Absent means the term does not depend on `z`.
    #[serde(default)]
    pub z: Option<ZFactor>,
}

impl<T: Scalar> TrigTerm<T> {
    fn y_part(&self, y: &[T]) -> T {
        self.factors.iter().fold(T::one(), |acc, f| {
            acc * f.trig.apply(T::from_i32(f.mode).unwrap() * y[f.index])
        })
    }

    fn mode_of(&self, var: usize, n: usize) -> T {
        let m = if var == n {
            self.z.map_or(0, |z| z.mode)
        } else {
            self.factors
                .iter()
                .find(|f| f.index == var)
                .map_or(0, |f| f.mode)
        };
        T::from_i32(m.abs()).unwrap()
    }
}

#[derive(Clone, Debug)]
pub struct TrigPolynomial<T: Scalar> {
    n: usize,
    terms: Vec<TrigTerm<T>>,
}

impl<T: Scalar> TrigPolynomial<T> {
    pub fn new(n: usize, terms: Vec<TrigTerm<T>>) -> Result<Self> {
        for (t, term) in terms.iter().enumerate() {
            if !term.coef.is_finite() {
                return Err(invalid("terms", format!("term {t} has non-finite coefficient")));
            }
            let mut seen = vec![false; n];
            for f in &term.factors {
                if f.index >= n {
                    return Err(invalid(
                        "terms",
                        format!("term {t} references oscillator {} of {n}", f.index),
                    ));
                }
                if std::mem::replace(&mut seen[f.index], true) {
                    return Err(invalid(
                        "terms",
                        format!("term {t} has two factors on oscillator {}", f.index),
                    ));
                }
            }
        }
        Ok(Self { n, terms })
    }
}

impl<T: Scalar> CouplingField<T> for TrigPolynomial<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, y: &[T], z: T) -> T {
        self.terms
            .iter()
            .map(|t| {
                let zf = t
                    .z
                    .map_or(T::one(), |f| f.trig.apply(T::from_i32(f.mode).unwrap() * z));
                t.coef * t.y_part(y) * zf
            })
            .sum()
    }

    fn eval_dz(&self, y: &[T], z: T) -> T {
        self.terms
            .iter()
            .filter_map(|t| {
                t.z.map(|f| t.coef * t.y_part(y) * f.trig.slope(T::from_i32(f.mode).unwrap(), z))
            })
            .sum()
    }

    fn eval_batch(&self, y: &[T], zs: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for t in &self.terms {
            let w = t.coef * t.y_part(y);
            for (o, &z) in out.iter_mut().zip(zs) {
                *o += match t.z {
                    Some(f) => w * f.trig.apply(T::from_i32(f.mode).unwrap() * z),
                    None => w,
                };
            }
        }
    }

    /// Term-wise triangle bounds: every trig factor is bounded by 1 and each
    /// differentiation in a variable pulls out that variable's mode.
    fn global_bounds(&self) -> Option<NormBounds<T>> {
        let vars = self.n + 1;
        let f = self.terms.iter().map(|t| t.coef.abs()).sum();
        let mut df = T::zero();
        let mut d2f = T::zero();
        for a in 0..vars {
            let first: T = self
                .terms
                .iter()
                .map(|t| t.coef.abs() * t.mode_of(a, self.n))
                .sum();
            df = df.max(first);
            for b in a..vars {
                let second: T = self
                    .terms
                    .iter()
                    .map(|t| t.coef.abs() * t.mode_of(a, self.n) * t.mode_of(b, self.n))
                    .sum();
                d2f = d2f.max(second);
            }
        }
        Some(NormBounds::new(f, df, d2f))
    }
}

/// Period-normalized custom trigonometric-polynomial model.
pub fn custom_trig<T: Scalar>(n: usize, terms: Vec<TrigTerm<T>>) -> Result<ModelSpec<T>> {
    let field = TrigPolynomial::new(n, terms)?;
    let raw = ModelSpec::new(Arc::new(field), Some(T::TAU()), "custom")?;
    normalize_period(&raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin::Kuramoto;
    use std::f64::consts::TAU;

    /// Kuramoto written out term by term: (κ/N) Σ_j [sin y_j cos z − cos y_j sin z].
    pub(crate) fn kuramoto_terms(n: usize, omega: f64, kappa: f64) -> Vec<TrigTerm<f64>> {
        let mut terms = vec![TrigTerm { coef: omega, factors: vec![], z: None }];
        for j in 0..n {
            let c = kappa / n as f64;
            terms.push(TrigTerm {
                coef: c,
                factors: vec![TrigFactor { index: j, trig: Trig::Sin, mode: 1 }],
                z: Some(ZFactor { trig: Trig::Cos, mode: 1 }),
            });
            terms.push(TrigTerm {
                coef: -c,
                factors: vec![TrigFactor { index: j, trig: Trig::Cos, mode: 1 }],
                z: Some(ZFactor { trig: Trig::Sin, mode: 1 }),
            });
        }
        terms
    }

    #[test]
    fn reproduces_kuramoto() {
        let poly = TrigPolynomial::new(3, kuramoto_terms(3, 1.0, 0.4)).unwrap();
        let kur = Kuramoto { n: 3, omega: 1.0, kappa: 0.4 };
        let y = [0.3, -1.2, 2.5];
        for z in [-1.0, 0.0, 0.7, 3.1] {
            assert!((poly.eval(&y, z) - kur.eval(&y, z)).abs() < 1e-14);
            assert!((poly.eval_dz(&y, z) - kur.eval_dz(&y, z)).abs() < 1e-14);
        }
        let mut out = [0.0; 2];
        poly.eval_batch(&y, &[0.5, 1.5], &mut out);
        assert!((out[1] - kur.eval(&y, 1.5)).abs() < 1e-14);
    }

    #[test]
    fn triangle_bounds() {
        let model = custom_trig(3, kuramoto_terms(3, 1.0, 0.3)).unwrap();
        let b = model.norm_bounds().unwrap();
        // |F| <= ω + 2κ, |∂_z F| <= 2κ, |∂_z² F| <= 2κ in natural units
        assert!((b.f - 1.6 / TAU).abs() < 1e-15);
        assert!((b.df - 0.6).abs() < 1e-15);
        assert!((b.d2f - 0.6 * TAU).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_terms() {
        let bad_index = vec![TrigTerm {
            coef: 1.0,
            factors: vec![TrigFactor { index: 3, trig: Trig::Sin, mode: 1 }],
            z: None,
        }];
        assert!(custom_trig(3, bad_index).is_err());
        let dup = vec![TrigTerm {
            coef: 1.0,
            factors: vec![
                TrigFactor { index: 0, trig: Trig::Sin, mode: 1 },
                TrigFactor { index: 0, trig: Trig::Cos, mode: 2 },
            ],
            z: None,
        }];
        assert!(custom_trig(3, dup).is_err());
    }

    #[test]
    fn deserializes_from_json() {
        let json = r#"[{"coef": 1.5}, {"coef": 0.5, "z": {"trig": "cos", "mode": 1}},
                       {"coef": -0.1, "factors": [{"index": 1, "trig": "sin", "mode": 2}]}]"#;
        let terms: Vec<TrigTerm<f64>> = serde_json::from_str(json).unwrap();
        let m = custom_trig(2, terms).unwrap();
        assert!((m.diag(0.0) - (1.5 + 0.5) / TAU).abs() < 1e-15);
    }
}
