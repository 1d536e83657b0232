//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with its
//! measured value and runtime; the test fails if any criterion fails.
//!
//! Run with `cargo test -p meanfield-sync --test acceptance -- --nocapture`.

use std::f64::consts::TAU;
use std::time::Instant;

use meanfield_sync::{
    analyze, build_curve, builtin_kuramoto, builtin_winfree, compute_alpha, default_step,
    dispersion_params, find_fixed_point, flow, frequency_error, integrate_with, normalize_period,
    sweep, translation_defect, Analysis, Axis, Classification, Curve, HypothesisOptions,
    LockOptions, Model, Perturbation, ReturnMap, SectionBounds, SweepOptions, VerdictAccumulator,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INTEGRAL_TOL: f64 = 1e-8;
const BOUNDARY_TOL: f64 = 1e-4;
const WINFREE_BOUNDARY: f64 = 1.29904;
const ODE_RESIDUAL_TOL: f64 = 1e-8;
const GAP_TOL: f64 = 1e-10;
const BALANCE_TOL: f64 = 1e-12;
const CONSTANT_CURVE_TOL: f64 = 1e-10;
const SIM_HORIZON: f64 = 1000.0;
const PERTURBATION_FRACTION: f64 = 0.9;
const IC_FRACTION: f64 = 0.9;
const LOCK_RESIDUAL_TOL: f64 = 1e-10;
const TRANSLATION_TOL: f64 = 1e-8;
const TRANSLATION_SAMPLES: usize = 10;
const PSI_PERIODICITY_TOL: f64 = 1e-7;
const FREQUENCY_TOL: f64 = 1e-6;
const FREQUENCY_PERIODS: usize = 100;
const RICHARDSON_RANGE: (f64, f64) = (12.0, 20.0);
const SWEEP_THREADS: usize = 4;
const SEED: u64 = 20_240_611;

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    seconds: f64,
}

fn run(id: usize, name: &'static str, check: impl FnOnce() -> (bool, String)) -> Outcome {
    let start = Instant::now();
    let (pass, detail) = check();
    let seconds = start.elapsed().as_secs_f64();
    let o = Outcome { id, name, pass, detail, seconds };
    println!(
        "{} criterion {}: {} [{}] ({:.2} s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.name,
        o.detail,
        o.seconds
    );
    o
}

struct Setup {
    label: String,
    analysis: Analysis<f64>,
    curve: Curve,
    h: f64,
}

fn setup(label: &str, model: Model) -> Setup {
    let analysis = analyze(&model, &HypothesisOptions::default());
    assert!(analysis.report.both_hold(), "{label}: hypotheses fail");
    let params = dispersion_params(&analysis.report, None).unwrap();
    let curve = build_curve(analysis.profile.as_ref().unwrap(), &params).unwrap();
    let h = default_step(&analysis.report);
    Setup { label: label.to_string(), analysis, curve, h }
}

fn simulation_configs() -> Vec<Setup> {
    let mut out: Vec<Setup> = [2, 5, 20]
        .into_iter()
        .map(|n| setup(&format!("kuramoto(1, 0.2) N={n}"), builtin_kuramoto(1.0, 0.2, n).unwrap()))
        .collect();
    out.push(setup("winfree(2, 1) N=10", builtin_winfree(2.0, 1.0, 10).unwrap()));
    out
}

/// `H = 0` followed by five seeded random periodic perturbations at `0.9 r`.
fn perturbations(s: &Setup, rng: &mut ChaCha8Rng) -> Vec<Perturbation> {
    let n = s.analysis.model.n();
    let amplitude = PERTURBATION_FRACTION * s.curve.params().radius;
    std::iter::once(Perturbation::zero(n))
        .chain((0..5).map(|_| Perturbation::random_trig(n, amplitude, rng)))
        .collect()
}

/// A point of the tube over a random base `ν`.
fn tube_point(curve: &Curve, n: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let nu: f64 = rng.random_range(0.0..1.0);
    let w = IC_FRACTION * curve.eval(nu);
    let x = (0..n).map(|_| nu + w * rng.random_range(-1.0..1.0)).collect();
    (x, nu)
}

fn kuramoto_integral() -> (bool, String) {
    let mut worst = 0.0f64;
    for (w, k) in [(1.0, 0.2), (2.0, 1.0), (0.5, 0.3)] {
        let a = analyze(&builtin_kuramoto(w, k, 3).unwrap(), &HypothesisOptions::default());
        let integral = a.report.lambda_integral.unwrap();
        worst = worst.max((integral + TAU * k / w).abs());
    }
    (worst < INTEGRAL_TOL, format!("max |∫Λ + 2πκ/ω| = {worst:.3e}"))
}

fn winfree_boundary() -> (bool, String) {
    let mut worst = 0.0f64;
    for kappa in [0.5, 1.0, 2.0] {
        let alpha = |omega: f64| {
            let m = normalize_period(&builtin_winfree(omega, kappa, 3).unwrap()).unwrap();
            compute_alpha(&m, 4096).value
        };
        let (mut lo, mut hi) = (1.2 * kappa, 1.4 * kappa);
        if !(alpha(lo) < 0.0 && alpha(hi) > 0.0) {
            return (false, format!("no sign change bracket at κ = {kappa}"));
        }
        while hi - lo > 1e-10 * kappa {
            let mid = 0.5 * (lo + hi);
            if alpha(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        worst = worst.max((0.5 * (lo + hi) / kappa - WINFREE_BOUNDARY).abs());
    }
    (worst < BOUNDARY_TOL, format!("max |ω*/κ − 1.29904| = {worst:.3e}"))
}

fn curve_correctness() -> (bool, String) {
    let mut models: Vec<(Model, bool)> = Vec::new();
    for (w, k) in [(1.0, 0.2), (2.0, 1.0), (0.5, 0.3)] {
        models.push((builtin_kuramoto(w, k, 4).unwrap(), true));
    }
    for (w, k) in [(2.0, 1.0), (3.0, 2.0), (1.0, 0.5)] {
        models.push((builtin_winfree(w, k, 4).unwrap(), false));
    }
    let (mut res, mut over, mut gap, mut bal, mut konst) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (m, constant) in models {
        let a = analyze(&m, &HypothesisOptions::default());
        let p = dispersion_params(&a.report, None).unwrap();
        let c = build_curve(a.profile.as_ref().unwrap(), &p).unwrap();
        res = res.max(c.ode_residual_max());
        over = over.max(c.max() - p.d);
        gap = gap.max(c.periodicity_gap());
        bal = bal.max(p.balance_defect());
        if constant {
            let expected = p.d * -(-p.lambda1).exp_m1() / p.lambda1;
            for &v in c.samples() {
                konst = konst.max((v - expected).abs());
            }
        }
    }
    let pass = res < ODE_RESIDUAL_TOL
        && over <= 0.0
        && gap < GAP_TOL
        && bal < BALANCE_TOL
        && konst < CONSTANT_CURVE_TOL;
    (
        pass,
        format!(
            "residual {res:.2e}, max Δ − D {over:.2e}, gap {gap:.2e}, balance {bal:.2e}, constant {konst:.2e}"
        ),
    )
}

fn main_result_one(configs: &[Setup]) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut runs, mut failures) = (0usize, Vec::new());
    let mut min_margin = f64::INFINITY;
    let mut min_velocity = f64::INFINITY;
    let mut spread_ratio = 0.0f64;
    for s in configs {
        let n = s.analysis.model.n();
        for (j, pert) in perturbations(s, &mut rng).iter().enumerate() {
            for ic in 0..5 {
                let (x0, nu) = tube_point(&s.curve, n, &mut rng);
                let mut acc = VerdictAccumulator::new(&s.curve);
                let end = integrate_with(&s.analysis.model, pert, &x0, nu, SIM_HORIZON, s.h, |v| {
                    acc.observe(v)
                });
                let v = acc.finish();
                runs += 1;
                if end.is_err() || !v.all_hold() {
                    failures.push(format!("{} H#{j} IC#{ic}", s.label));
                }
                min_margin = min_margin.min(v.min_margin / s.curve.min());
                min_velocity = min_velocity.min(v.min_velocity);
                spread_ratio = spread_ratio.max(v.max_spread / (2.0 * s.curve.params().d));
            }
        }
    }
    (
        failures.is_empty(),
        format!(
            "{runs} runs, {} violations; min margin/minΔ {min_margin:.3}, min ẋ {min_velocity:.4}, max spread/2D {spread_ratio:.3}{}",
            failures.len(),
            if failures.is_empty() { String::new() } else { format!(": {}", failures.join(", ")) }
        ),
    )
}

struct LockStats {
    return_times: usize,
    theta_outside: usize,
    theta_range: (f64, f64),
    failures: Vec<String>,
    worst: [f64; 4],
}

fn locked_orbits(configs: &[Setup]) -> LockStats {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 0x5eed);
    let mut stats = LockStats {
        return_times: 0,
        theta_outside: 0,
        theta_range: (f64::INFINITY, 0.0),
        failures: Vec::new(),
        worst: [0.0; 4],
    };
    for s in configs {
        let bounds = SectionBounds::new(&s.analysis.report, &s.curve);
        for (j, pert) in perturbations(s, &mut rng).iter().enumerate() {
            let map = ReturnMap::new(&s.analysis.model, pert, bounds, s.h, true).unwrap();
            let label = format!("{} H#{j}", s.label);
            let lock = match find_fixed_point(&map, &LockOptions::default()) {
                Ok(l) => l,
                Err(e) => {
                    stats.failures.push(format!("{label}: {e}"));
                    continue;
                }
            };
            let translation = translation_defect(&map, &lock, TRANSLATION_SAMPLES).unwrap();
            let freq = frequency_error(&map, &lock, FREQUENCY_PERIODS).unwrap();
            let values = [lock.residual, translation, lock.periodicity_residual, freq];
            let tols = [LOCK_RESIDUAL_TOL, TRANSLATION_TOL, PSI_PERIODICITY_TOL, FREQUENCY_TOL];
            for (worst, v) in stats.worst.iter_mut().zip(values) {
                *worst = worst.max(v);
            }
            let within = values.iter().zip(tols).all(|(v, t)| *v < t);
            if !lock.converged || !within {
                stats.failures.push(format!("{label}: {values:?}"));
            }
            for theta in map.return_times() {
                stats.return_times += 1;
                stats.theta_range.0 = stats.theta_range.0.min(theta);
                stats.theta_range.1 = stats.theta_range.1.max(theta);
                if !(bounds.theta_min < theta && theta < bounds.theta_max) {
                    stats.theta_outside += 1;
                }
            }
        }
    }
    stats
}

fn richardson() -> (bool, String) {
    let model = normalize_period(&builtin_kuramoto(1.0, 0.2, 5).unwrap()).unwrap();
    let pert = Perturbation::constant_detune(vec![0.02, -0.01, 0.0, 0.015, -0.025]).unwrap();
    let x0 = [0.0, 0.1, -0.05, 0.2, -0.15];
    let t = 10.0;
    let h = 0.2;
    let end = |h: f64| flow(&model, &pert, &x0, 0.0, t, h).unwrap();
    let (a, b, c) = (end(h), end(h / 2.0), end(h / 4.0));
    let diff = |u: &meanfield_sync::State, v: &meanfield_sync::State| {
        u.x.iter()
            .chain([&u.mu])
            .zip(v.x.iter().chain([&v.mu]))
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
    };
    let ratio = diff(&a, &b) / diff(&b, &c);
    (
        RICHARDSON_RANGE.0 <= ratio && ratio <= RICHARDSON_RANGE.1,
        format!("ratio {ratio:.3} (h = {h}, {h}/2, {h}/4)"),
    )
}

fn sweep_reproduction() -> (bool, String) {
    let winfree = SweepOptions {
        kappa: Axis { lo: 0.1, hi: 2.0, count: 20 },
        omega: Axis { lo: 0.1, hi: 4.0, count: 20 },
        threads: SWEEP_THREADS,
        empirical: None,
        hypotheses: HypothesisOptions::default(),
    };
    let cells = sweep(|w, k| builtin_winfree(w, k, 3), &winfree).unwrap();
    let below = cells
        .iter()
        .filter(|c| c.omega < WINFREE_BOUNDARY * c.kappa)
        .filter(|c| c.classification == Classification::BothHold)
        .count();
    let above_fail = cells
        .iter()
        .filter(|c| c.omega > 1.01 * WINFREE_BOUNDARY * c.kappa)
        .filter(|c| c.classification != Classification::BothHold)
        .count();
    let kuramoto = SweepOptions {
        kappa: Axis { lo: 0.1, hi: 2.0, count: 20 },
        omega: Axis { lo: 0.1, hi: 2.0, count: 20 },
        ..winfree
    };
    let kcells = sweep(|w, k| builtin_kuramoto(w, k, 3), &kuramoto).unwrap();
    let k_fail = kcells.iter().filter(|c| c.classification != Classification::BothHold).count();
    (
        below == 0 && above_fail == 0 && k_fail == 0,
        format!(
            "winfree: {below} both-hold below boundary, {above_fail} non-both-hold above; kuramoto: {k_fail}/{} not both-hold",
            kcells.len()
        ),
    )
}

#[test]
fn acceptance() {
    let mut outcomes = vec![
        run(1, "Kuramoto Λ integral", kuramoto_integral),
        run(2, "Winfree (H) boundary", winfree_boundary),
        run(3, "dispersion curve correctness", curve_correctness),
    ];
    let configs = simulation_configs();
    outcomes.push(run(4, "tube invariance and synchronization", || main_result_one(&configs)));
    let start = Instant::now();
    let stats = locked_orbits(&configs);
    let lock_seconds = start.elapsed().as_secs_f64();
    outcomes.push(run(5, "return-time bounds", || {
        (
            stats.return_times > 0 && stats.theta_outside == 0,
            format!(
                "{} return times in [{:.5}, {:.5}], {} outside (1/L, 2/α)",
                stats.return_times, stats.theta_range.0, stats.theta_range.1, stats.theta_outside
            ),
        )
    }));
    let mut locking = run(6, "locked orbit", || {
        let [r, t, p, f] = stats.worst;
        (
            stats.failures.is_empty(),
            format!(
                "residual {r:.2e}, translation {t:.2e}, Ψ periodicity {p:.2e}, frequency {f:.2e}{}",
                if stats.failures.is_empty() {
                    String::new()
                } else {
                    format!("; failures: {}", stats.failures.join("; "))
                }
            ),
        )
    });
    locking.seconds += lock_seconds;
    println!("      criteria 5 and 6 shared {lock_seconds:.2} s of fixed-point searches");
    outcomes.push(locking);
    outcomes.push(run(7, "RK4 convergence order", richardson));
    outcomes.push(run(8, "parameter sweep", sweep_reproduction));

    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.pass)
        .map(|o| format!("{} ({})", o.id, o.name))
        .collect();
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
