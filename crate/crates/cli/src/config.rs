//! Run configuration: an optional JSON file merged with command-line flags.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use meanfield_sync::model::TrigTerm;
use meanfield_sync::{
    builtin_kuramoto, builtin_winfree, custom_trig, Axis, HypothesisOptions, Model,
    PerturbationKind,
};
use serde::{Deserialize, Serialize};

use crate::args::{Cli, Command, ModelKind, PerturbKind};
use crate::Usage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelType {
    Kuramoto,
    Winfree,
    Custom,
}

impl From<ModelKind> for ModelType {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::Kuramoto => ModelType::Kuramoto,
            ModelKind::Winfree => ModelType::Winfree,
            ModelKind::Custom => ModelType::Custom,
        }
    }
}

/// Perturbation as written in a config file. Amplitudes are in normalized (period-1)
/// units; `random-trig` is sized relative to the radius r.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationConfig {
    Zero,
    ConstantDetune { values: Vec<f64> },
    TrigMeanField { amplitude: f64, mode: f64, phases: Vec<f64> },
    RandomTrig { fraction: f64 },
}

impl PerturbationConfig {
    /// The explicit kind, or `None` for the seeded random family.
    pub fn explicit(&self) -> Option<PerturbationKind<f64>> {
        match self {
            PerturbationConfig::Zero => Some(PerturbationKind::Zero),
            PerturbationConfig::ConstantDetune { values } => {
                Some(PerturbationKind::ConstantDetune { values: values.clone() })
            }
            PerturbationConfig::TrigMeanField { amplitude, mode, phases } => {
                Some(PerturbationKind::TrigMeanField {
                    amplitude: *amplitude,
                    mode: *mode,
                    phases: phases.clone(),
                })
            }
            PerturbationConfig::RandomTrig { .. } => None,
        }
    }
}

/// Config file layout; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(rename = "type")]
    model: Option<ModelType>,
    omega: Option<f64>,
    kappa: Option<f64>,
    n: Option<usize>,
    terms: Option<Vec<TrigTerm<f64>>>,
    perturbation: Option<PerturbationConfig>,
    seed: Option<u64>,
    grid: Option<usize>,
    h: Option<f64>,
    tmax: Option<f64>,
    #[serde(rename = "D")]
    d: Option<f64>,
    optimize_radius: Option<bool>,
    strict: Option<bool>,
    empirical: Option<bool>,
    stride: Option<usize>,
    spread: Option<f64>,
    nu: Option<f64>,
    x0: Option<Vec<f64>>,
    kappa_range: Option<Axis<f64>>,
    omega_range: Option<Axis<f64>>,
}

/// Fully resolved configuration, echoed into every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(rename = "type")]
    pub model: ModelType,
    pub omega: Option<f64>,
    pub kappa: Option<f64>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terms: Option<Vec<TrigTerm<f64>>>,
    /// Period of the model in its own coordinates.
    pub original_period: f64,
    pub perturbation: PerturbationConfig,
    pub seed: u64,
    pub grid: usize,
    pub h: Option<f64>,
    pub tmax: f64,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub optimize_radius: bool,
    pub strict: bool,
    pub empirical: bool,
    pub stride: Option<usize>,
    pub spread: f64,
    pub nu: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub kappa_range: Axis<f64>,
    pub omega_range: Axis<f64>,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub plots: bool,
}

pub const DEFAULT_N: usize = 5;
pub const DEFAULT_GRID: usize = 2048;
pub const DEFAULT_TMAX: f64 = 100.0;
/// Horizon of the per-cell empirical probe in a sweep.
pub const DEFAULT_PROBE_TMAX: f64 = 20.0;
pub const DEFAULT_SPREAD: f64 = 0.5;
pub const DEFAULT_PERTURB_SCALE: f64 = 0.9;

fn parse_axis(s: &str) -> Result<Axis<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err(Usage(format!("axis `{s}` is not LO:HI:COUNT")).into());
    };
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|_| Usage(format!("bad number `{v}` in `{s}`")));
    Ok(Axis {
        lo: parse(lo)?,
        hi: parse(hi)?,
        count: count
            .trim()
            .parse()
            .map_err(|_| Usage(format!("bad count `{count}` in `{s}`")))?,
    })
}

impl RunConfig {
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let file: FileConfig = match &cli.common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(|e| Usage(format!("{e:#}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| Usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };
        let c = &cli.common;
        let model = c
            .model
            .map(ModelType::from)
            .or(file.model)
            .ok_or_else(|| Usage("no model given: pass --model or a config with \"type\"".into()))?;
        let perturbation = match (c.perturb, c.perturb_scale, file.perturbation) {
            (Some(PerturbKind::Zero), _, _) => PerturbationConfig::Zero,
            (Some(PerturbKind::Random), scale, _) => PerturbationConfig::RandomTrig {
                fraction: scale.unwrap_or(DEFAULT_PERTURB_SCALE),
            },
            (None, Some(fraction), Some(PerturbationConfig::RandomTrig { .. }) | None) => {
                PerturbationConfig::RandomTrig { fraction }
            }
            (None, _, Some(p)) => p,
            (None, _, None) => PerturbationConfig::Zero,
        };
        let (mut stride, mut spread, mut nu) = (file.stride, file.spread, file.nu);
        let (mut kappa_range, mut omega_range) = (file.kappa_range, file.omega_range);
        match &cli.command {
            Command::Simulate(s) => {
                stride = s.stride.or(stride);
                spread = s.spread.or(spread);
                nu = s.nu.or(nu);
            }
            Command::Sweep(s) => {
                if let Some(r) = &s.kappa_range {
                    kappa_range = Some(parse_axis(r)?);
                }
                if let Some(r) = &s.omega_range {
                    omega_range = Some(parse_axis(r)?);
                }
            }
            _ => {}
        }
        let cfg = RunConfig {
            model,
            omega: c.omega.or(file.omega),
            kappa: c.kappa.or(file.kappa),
            n: c.n.or(file.n).unwrap_or(DEFAULT_N),
            terms: file.terms,
            original_period: std::f64::consts::TAU,
            perturbation,
            seed: c.seed.or(file.seed).unwrap_or(0),
            grid: c.grid.or(file.grid).unwrap_or(DEFAULT_GRID),
            h: c.h.or(file.h),
            tmax: c.tmax.or(file.tmax).unwrap_or(match cli.command {
                Command::Sweep(_) => DEFAULT_PROBE_TMAX,
                _ => DEFAULT_TMAX,
            }),
            d: c.d.or(file.d),
            optimize_radius: c.optimize_radius || file.optimize_radius.unwrap_or(false),
            strict: c.strict || file.strict.unwrap_or(false),
            empirical: c.empirical || file.empirical.unwrap_or(false),
            stride,
            spread: spread.unwrap_or(DEFAULT_SPREAD),
            nu,
            x0: file.x0,
            kappa_range: kappa_range.unwrap_or(Axis { lo: 0.1, hi: 2.0, count: 20 }),
            omega_range: omega_range.unwrap_or(Axis { lo: 0.1, hi: 4.0, count: 20 }),
            out: c.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            plots: !c.no_plots,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.grid < 2 || !self.grid.is_multiple_of(2) {
            bail!(Usage(format!("--grid must be even and at least 2, got {}", self.grid)));
        }
        if self.h.is_some_and(|h| !(h > 0.0 && h.is_finite())) {
            bail!(Usage("--h must be positive".into()));
        }
        if !(self.tmax >= 0.0 && self.tmax.is_finite()) {
            bail!(Usage("--tmax must be nonnegative".into()));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            bail!(Usage("--spread must be nonnegative".into()));
        }
        if self.stride == Some(0) {
            bail!(Usage("--stride must be positive".into()));
        }
        if let PerturbationConfig::RandomTrig { fraction } = self.perturbation {
            if !(fraction >= 0.0 && fraction.is_finite()) {
                bail!(Usage("perturbation fraction must be nonnegative".into()));
            }
        }
        if self.model == ModelType::Custom && self.terms.is_none() {
            bail!(Usage("custom model needs \"terms\" in the config file".into()));
        }
        Ok(())
    }

    /// The configured model at explicit `(omega, kappa)`.
    pub fn model_at(&self, omega: f64, kappa: f64) -> meanfield_sync::Result<Model> {
        match self.model {
            ModelType::Kuramoto => builtin_kuramoto(omega, kappa, self.n),
            ModelType::Winfree => builtin_winfree(omega, kappa, self.n),
            ModelType::Custom => custom_trig(self.n, self.terms.clone().unwrap_or_default()),
        }
    }

    pub fn build_model(&self) -> Result<Model> {
        let (omega, kappa) = match self.model {
            ModelType::Custom => (0.0, 0.0),
            _ => (
                self.omega.ok_or_else(|| Usage("--omega is required".into()))?,
                self.kappa.ok_or_else(|| Usage("--kappa is required".into()))?,
            ),
        };
        Ok(self.model_at(omega, kappa)?)
    }

    pub fn hypothesis_options(&self) -> HypothesisOptions {
        HypothesisOptions { panels: self.grid, ..HypothesisOptions::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    fn resolve(args: &[&str]) -> Result<RunConfig> {
        let mut argv = vec!["meanfield-sync"];
        argv.extend_from_slice(args);
        RunConfig::resolve(&Cli::try_parse_from(argv).unwrap())
    }

    #[test]
    fn flags_fill_defaults() {
        let c = resolve(&["check", "--model", "winfree", "--omega", "2", "--kappa", "1"]).unwrap();
        assert_eq!(c.model, ModelType::Winfree);
        assert_eq!((c.n, c.grid, c.seed), (DEFAULT_N, DEFAULT_GRID, 0));
        assert_eq!(c.perturbation, PerturbationConfig::Zero);
        assert_eq!(c.tmax, DEFAULT_TMAX);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(
            &path,
            r#"{"type":"kuramoto","omega":1,"kappa":0.2,"n":3,"seed":7,"D":0.001,
                "perturbation":{"kind":"constant-detune","values":[0.001,0,-0.001]}}"#,
        )
        .unwrap();
        let p = path.to_str().unwrap();
        let c = resolve(&["simulate", "--config", p, "--kappa", "0.3", "--stride", "4"]).unwrap();
        assert_eq!((c.omega, c.kappa, c.n, c.seed), (Some(1.0), Some(0.3), 3, 7));
        assert_eq!((c.d, c.stride), (Some(0.001), Some(4)));
        assert!(matches!(c.perturbation, PerturbationConfig::ConstantDetune { .. }));
        let r = resolve(&["simulate", "--config", p, "--perturb", "random"]).unwrap();
        assert_eq!(r.perturbation, PerturbationConfig::RandomTrig { fraction: DEFAULT_PERTURB_SCALE });
    }

    #[test]
    fn sweep_axes_and_probe_horizon() {
        let c = resolve(&["sweep", "--model", "kuramoto", "--kappa-range", "0:1:3"]).unwrap();
        assert_eq!(c.kappa_range, Axis { lo: 0.0, hi: 1.0, count: 3 });
        assert_eq!(c.tmax, DEFAULT_PROBE_TMAX);
        assert!(resolve(&["sweep", "--model", "kuramoto", "--kappa-range", "0:1"]).is_err());
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        for args in [
            &["check", "--model", "kuramoto", "--grid", "7"][..],
            &["check", "--model", "kuramoto", "--h", "-1"],
            &["check", "--model", "custom"],
            &["check", "--omega", "1"],
        ] {
            let e = resolve(args).unwrap_err();
            assert!(e.downcast_ref::<Usage>().is_some(), "{args:?}");
        }
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"type":"kuramoto","omegga":1}"#).unwrap();
        assert!(resolve(&["check", "--config", path.to_str().unwrap()]).is_err());
    }
}
