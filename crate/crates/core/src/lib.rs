//! Synchronization analysis for abstract mean-field oscillator systems
//! `x_i' = F(X, x_i) + H_i(X)`.
//!
//! The pipeline checks the regularity and synchronization hypotheses on the diagonal,
//! builds the periodic dispersion curve and its invariant tube, integrates trajectories
//! together with their companion diagonal solution, and locates the periodically locked
//! orbit through the return map.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`.

// `!(x > 0)` is used on purpose throughout so that NaN lands on the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod error;
pub mod hypotheses;
pub mod integrator;
mod linalg;
pub mod locking;
pub mod model;
pub mod numerics;
pub mod scalar;
pub mod sweep;
pub mod sync_analysis;

pub use dispersion::{
    build_curve, compute_dstar, compute_eta, compute_radius, dispersion_params, membership,
    optimize_radius, CurveTag, DispersionCurve, DispersionParams, Membership,
};
pub use error::{Error, Result};
pub use hypotheses::{
    analyze, build_lambda_profile, check_hypotheses, compute_alpha, compute_lambdas,
    diagonal_max, Analysis, HypothesisOptions, HypothesisReport, LambdaProfile, Lambdas,
};
pub use integrator::{
    cross_time, default_step, flow, integrate, integrate_steps, integrate_with, rhs, Crossing,
    IntegrateOptions, JointState, StepExtremes, StepView, Trajectory,
};
pub use locking::{
    extract_locked_state, find_fixed_point, frequency_error, poincare, translation_defect,
    LockMethod, LockOptions, LockResult, LockedState, Return, ReturnMap, SectionBounds,
};
pub use model::{
    builtin_kuramoto, builtin_winfree, custom_trig, norm_bounds, norm_h, normalize_period,
    CouplingField, ModelSpec, NormBounds, NormGrid, PerturbationKind, PerturbationSpec,
};
pub use scalar::Scalar;
pub use sweep::{sweep, Axis, Classification, EmpiricalProbe, SweepCell, SweepOptions};
pub use sync_analysis::{assess, SyncVerdict, VerdictAccumulator};

pub type Model = ModelSpec<f64>;
pub type Perturbation = PerturbationSpec<f64>;
pub type Report = HypothesisReport<f64>;
pub type Params = DispersionParams<f64>;
pub type Curve = DispersionCurve<f64>;
pub type State = JointState<f64>;
pub type Path = Trajectory<f64>;
pub type Verdict = SyncVerdict<f64>;
pub type Lock = LockResult<f64>;
pub type Cell = SweepCell<f64>;

pub type ModelF32 = ModelSpec<f32>;
pub type ReportF32 = HypothesisReport<f32>;
pub type CurveF32 = DispersionCurve<f32>;
