//! One function per subcommand. Each returns the process exit code for a completed run;
//! errors are mapped to exit codes in `main`.

use anyhow::Result;
use meanfield_sync::{
    analyze, assess, build_curve, default_step, dispersion_params, extract_locked_state,
    find_fixed_point, frequency_error, integrate, membership, optimize_radius, sweep,
    translation_defect, Analysis, Classification, Curve, EmpiricalProbe, Error, IntegrateOptions,
    LockOptions, Params, Perturbation, ReturnMap, SectionBounds, SweepOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ModelType, PerturbationConfig, RunConfig};
use crate::output::{num, opt_num, prepare_dir, write_json, write_plot, Csv, Series};
use crate::Usage;

pub const THREADS_ENV: &str = "MEANFIELD_SYNC_THREADS";
const TRANSLATION_SAMPLES: usize = 10;
const FREQUENCY_PERIODS: usize = 100;
const TARGET_ROWS: usize = 10_000;

pub fn check(cfg: &RunConfig) -> Result<u8> {
    let model = cfg.build_model()?;
    let a = analyze(&model, &cfg.hypothesis_options());
    let out = prepare_dir(&cfg.out)?;
    let doc = json!({
        "config": cfg,
        "report": a.report,
        "alpha_at": a.alpha_at,
        "diagonal_max": a.diagonal_max,
    });
    write_json(&out.join("check.json"), &doc)?;
    println!("{}", serde_json::to_string_pretty(&a.report)?);
    Ok(if a.report.both_hold() { 0 } else { 2 })
}

struct Prepared {
    analysis: Analysis<f64>,
    params: Params,
    curve: Curve,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let model = cfg.build_model()?;
    let analysis = analyze(&model, &cfg.hypothesis_options());
    let report = &analysis.report;
    if !report.both_hold() {
        return Err(Error::HypothesesFailed {
            holds_h: report.holds_h,
            holds_hstar: report.holds_hstar,
        }
        .into());
    }
    let params = match (cfg.optimize_radius, cfg.d) {
        (true, Some(_)) => return Err(Usage("--D and --optimize-radius are exclusive".into()).into()),
        (true, None) => optimize_radius(report)?,
        (false, d) => dispersion_params(report, d)?,
    };
    let profile = analysis.profile.as_ref().expect("profile exists when both hypotheses hold");
    let curve = build_curve(profile, &params)?;
    Ok(Prepared { analysis, params, curve })
}

pub fn dispersion(cfg: &RunConfig) -> Result<u8> {
    let p = prepare(cfg)?;
    let out = prepare_dir(&cfg.out)?;
    let mut csv = Csv::new(&["s", "Delta(s)", "Lambda(s)"]);
    for (i, (&d, &l)) in p.curve.samples().iter().zip(p.curve.lambda()).enumerate() {
        csv.numbers([p.curve.node(i), d, l]);
    }
    csv.write(&out.join("dispersion.csv"))?;
    let at_d_star = dispersion_params(&p.analysis.report, None)?;
    let doc = json!({
        "config": cfg,
        "params": p.params,
        "radius_at_d_star": at_d_star.radius,
        "balance_defect": p.params.balance_defect(),
        "curve": {
            "panels": p.curve.panels(),
            "max": p.curve.max(),
            "min": p.curve.min(),
            "ode_residual_max": p.curve.ode_residual_max(),
            "periodicity_gap": p.curve.periodicity_gap(),
        },
    });
    write_json(&out.join("dispersion.json"), &doc)?;
    if cfg.plots {
        let pts = |v: &[f64]| v.iter().enumerate().map(|(i, &y)| (p.curve.node(i), y)).collect();
        write_plot(
            &out.join("dispersion.svg"),
            "dispersion curve Delta(s)",
            &[Series { label: "Delta", points: pts(p.curve.samples()) }],
        )?;
    }
    println!(
        "D = {}  D* = {}  r = {}  (r at D* = {})  c = {}  max Delta = {}",
        num(p.params.d),
        num(p.params.d_star),
        num(p.params.radius),
        num(at_d_star.radius),
        num(p.params.c),
        num(p.curve.max())
    );
    Ok(0)
}

/// The configured perturbation; random families draw from `rng`.
fn perturbation(cfg: &RunConfig, radius: f64, rng: &mut ChaCha8Rng) -> Result<Perturbation> {
    Ok(match (&cfg.perturbation, cfg.perturbation.explicit()) {
        (_, Some(kind)) => Perturbation::from_kind(cfg.n, kind)?,
        (PerturbationConfig::RandomTrig { fraction }, None) => {
            Perturbation::random_trig(cfg.n, fraction * radius, rng)
        }
        (other, None) => unreachable!("{other:?} is explicit"),
    })
}

/// Rejects a non-periodic explicit perturbation before any computation.
fn require_periodic(cfg: &RunConfig) -> Result<()> {
    if let Some(kind) = cfg.perturbation.explicit() {
        if !Perturbation::from_kind(cfg.n, kind)?.is_periodic() {
            return Err(Error::NonPeriodicPerturbation.into());
        }
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<u8> {
    let p = prepare(cfg)?;
    let model = &p.analysis.model;
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pert = perturbation(cfg, p.params.radius, &mut rng)?;
    let (x0, nu0) = match &cfg.x0 {
        Some(x) => {
            if x.len() != n {
                return Err(Usage(format!("x0 has {} entries, model has {n}", x.len())).into());
            }
            let nu = cfg
                .nu
                .or_else(|| membership(x, &p.curve).map(|m| m.nu))
                .unwrap_or_else(|| x.iter().sum::<f64>() / n as f64);
            (x.clone(), nu)
        }
        None => {
            let nu = cfg.nu.unwrap_or_else(|| rng.random_range(0.0..1.0));
            let w = cfg.spread * p.curve.eval(nu);
            ((0..n).map(|_| nu + w * rng.random_range(-1.0..1.0)).collect(), nu)
        }
    };
    let h = cfg.h.unwrap_or_else(|| default_step(&p.analysis.report));
    let steps = (cfg.tmax / h).ceil() as usize;
    let stride = cfg.stride.unwrap_or_else(|| steps.div_ceil(TARGET_ROWS).max(1));
    let opts = IntegrateOptions { t_end: cfg.tmax, h, stride, strict: cfg.strict };
    let traj = integrate(model, &pert, Some(&p.curve), &x0, nu0, &opts)?;
    let verdict = assess(&traj, &p.curve)?;

    let norm_h = pert.analytic_norm();
    let start_margin = p.curve.eval(nu0) - traj.delta.first().copied().unwrap_or(f64::INFINITY);
    let applies = norm_h < p.params.radius && start_margin > 0.0;

    let out = prepare_dir(&cfg.out)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend(["mu", "delta", "Delta_of_mu", "min_velocity"].map(String::from));
    let mut csv = Csv::new(&header);
    for (k, s) in traj.steps.iter().enumerate() {
        let row = std::iter::once(s.t)
            .chain(s.x.iter().copied())
            .chain([s.mu, traj.delta[k], traj.bound[k], traj.velocity[k]]);
        csv.numbers(row);
    }
    csv.write(&out.join("simulate.csv"))?;
    let doc = json!({
        "config": cfg,
        "params": p.params,
        "perturbation": pert.kind(),
        "perturbation_norm": norm_h,
        "x0": x0,
        "nu0": nu0,
        "h": h,
        "stride": stride,
        "theorem_applies": applies,
        "completed": traj.completed,
        "verdict": verdict,
        "extremes": traj.extremes,
    });
    write_json(&out.join("simulate.json"), &doc)?;
    if cfg.plots {
        let delta = traj.steps.iter().zip(&traj.delta).map(|(s, &d)| (s.t, d)).collect();
        let bound = traj.steps.iter().zip(&traj.bound).map(|(s, &b)| (s.t, b)).collect();
        write_plot(
            &out.join("simulate.svg"),
            "dispersion delta(t) against the tube Delta(mu(t))",
            &[Series { label: "delta", points: delta }, Series { label: "Delta(mu)", points: bound }],
        )?;
    }
    println!(
        "invariant = {}  dynamical = {}  spread_ok = {}  min margin = {}  max spread = {}  (2D = {})",
        verdict.invariant,
        verdict.dynamical,
        verdict.spread_ok,
        num(verdict.min_margin),
        num(verdict.max_spread),
        num(2.0 * p.params.d)
    );
    if !applies {
        println!("note: ||H|| >= r or the start lies outside the tube; verdicts are informational");
    }
    Ok(if applies && !verdict.all_hold() { 3 } else { 0 })
}

pub fn lock(cfg: &RunConfig) -> Result<u8> {
    require_periodic(cfg)?;
    let p = prepare(cfg)?;
    let model = &p.analysis.model;
    let n = model.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pert = perturbation(cfg, p.params.radius, &mut rng)?;
    let h = cfg.h.unwrap_or_else(|| default_step(&p.analysis.report));
    let bounds = SectionBounds::new(&p.analysis.report, &p.curve);
    let map = ReturnMap::new(model, &pert, bounds, h, true)?;
    let result = find_fixed_point(&map, &LockOptions::default())?;
    let (translation, freq) = if result.converged {
        (
            Some(translation_defect(&map, &result, TRANSLATION_SAMPLES)?),
            Some(frequency_error(&map, &result, FREQUENCY_PERIODS)?),
        )
    } else {
        (None, None)
    };
    let locked = extract_locked_state(&result, 256);
    let omega_original = result.rho * cfg.original_period;

    let out = prepare_dir(&cfg.out)?;
    let mut header = vec!["s".to_string()];
    header.extend((1..=n).map(|i| format!("Psi_{i}")));
    let mut csv = Csv::new(&header);
    for (s, row) in result.psi_times.iter().zip(&result.psi_samples) {
        csv.numbers(std::iter::once(*s).chain(row.iter().copied()));
    }
    csv.write(&out.join("psi.csv"))?;
    let doc = json!({
        "config": cfg,
        "params": p.params,
        "perturbation": pert.kind(),
        "perturbation_norm": pert.analytic_norm(),
        "section": bounds,
        "lock": result,
        "translation_defect": translation,
        "frequency_error": freq,
        "psi_amplitude": locked.amplitude,
        "psi_wrap_residual": locked.wrap_residual,
        "original_units": {
            "period": cfg.original_period,
            "angular_frequency": omega_original,
        },
    });
    write_json(&out.join("lock.json"), &doc)?;
    if cfg.plots {
        let labels: Vec<String> = (1..=n).map(|i| format!("Psi_{i}")).collect();
        let series: Vec<Series<'_>> = labels
            .iter()
            .enumerate()
            .map(|(i, label)| Series {
                label,
                points: result.psi_times.iter().zip(&result.psi_samples).map(|(&s, r)| (s, r[i])).collect(),
            })
            .collect();
        write_plot(&out.join("lock.svg"), "locked profile Psi(s) over two periods", &series)?;
    }
    println!(
        "converged = {} ({:?}, {} iterations)  residual = {}",
        result.converged,
        result.method,
        result.iterations,
        num(result.residual)
    );
    println!("theta* = {}  rho = {}", num(result.theta_star), num(result.rho));
    println!(
        "original-units angular frequency = rho * T_original = {} (T_original = {})",
        num(omega_original),
        num(cfg.original_period)
    );
    if let (Some(t), Some(f)) = (translation, freq) {
        println!("translation defect = {}  frequency error = {}", num(t), num(f));
    }
    Ok(if result.converged { 0 } else { 4 })
}

/// Worker count: the available parallelism, capped by `MEANFIELD_SYNC_THREADS`.
pub fn thread_count(cap: Option<&str>) -> Result<usize> {
    let avail = std::thread::available_parallelism().map_or(1, |n| n.get());
    match cap {
        None => Ok(avail),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(avail.min(k)),
            _ => Err(Usage(format!("{THREADS_ENV} must be a positive integer, got `{v}`")).into()),
        },
    }
}

pub fn sweep_cmd(cfg: &RunConfig) -> Result<u8> {
    if cfg.model == ModelType::Custom {
        return Err(Usage("sweep needs --model kuramoto or winfree".into()).into());
    }
    for (name, axis) in [("kappa", cfg.kappa_range), ("omega", cfg.omega_range)] {
        if axis.count == 0 || !(axis.lo.is_finite() && axis.hi.is_finite()) || axis.lo > axis.hi || axis.lo < 0.0 {
            return Err(Usage(format!("{name} range must satisfy 0 <= lo <= hi with count >= 1")).into());
        }
    }
    let threads = thread_count(std::env::var(THREADS_ENV).ok().as_deref())?;
    let opts = SweepOptions {
        kappa: cfg.kappa_range,
        omega: cfg.omega_range,
        threads,
        empirical: cfg.empirical.then_some(EmpiricalProbe { t_end: cfg.tmax, seed: cfg.seed }),
        hypotheses: cfg.hypothesis_options(),
    };
    let cells = sweep(|w, k| cfg.model_at(w, k), &opts)?;

    let out = prepare_dir(&cfg.out)?;
    let mut csv = Csv::new(&["kappa", "omega", "classification", "d_star", "radius", "empirical_sync"]);
    for c in &cells {
        csv.row(&[
            num(c.kappa),
            num(c.omega),
            c.classification.as_str().to_string(),
            opt_num(c.d_star),
            opt_num(c.radius),
            c.empirical_sync.map(|b| b.to_string()).unwrap_or_default(),
        ]);
    }
    csv.write(&out.join("sweep.csv"))?;
    let count = |k: Classification| cells.iter().filter(|c| c.classification == k).count();
    let counts = json!({
        "H-fail": count(Classification::HFail),
        "Hstar-fail": count(Classification::HstarFail),
        "both-hold": count(Classification::BothHold),
        "error": count(Classification::Error),
    });
    write_json(&out.join("sweep.json"), &json!({ "config": cfg, "counts": counts }))?;
    println!("{} cells: {}", cells.len(), serde_json::to_string(&counts)?);
    Ok(0)
}

/// Exit code for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(
            Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonPeriodicPerturbation
            | Error::DispersionOutOfRange { .. },
        ) => 1,
        Some(Error::UnboundedModel | Error::DiagonalNotPositive { .. } | Error::HypothesesFailed { .. }) => 2,
        Some(
            Error::CompanionNotIncreasing { .. }
            | Error::ReturnTimeOutOfBounds { .. }
            | Error::LeftSection { .. },
        ) => 3,
        Some(_) => 4,
        None => 1,
    }
}
