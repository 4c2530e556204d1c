//! Regularized deautoconvolution and phase retrieval with kernel-weighted
//! autoconvolution operators.
//!
//! The unknown `f: [0, 1] → ℂ` is parameterized as a NURBS curve and fitted
//! to amplitude data on `[0, 1]` together with either the phase or the full
//! complex values of its kernel autoconvolution on `[0, 2]`. The objective is
//! minimized by BFGS under a continuation in the discrepancy weight `β`.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, with `…32` variants for `f32`.
//!
//! ```no_run
//! use autoconv::datagen::{make_data, make_kernel, make_target, KernelKind, KernelParams, NoiseLevels, TargetKind};
//! use autoconv::{default_initial_design, tigra_solve, DataTerm, Problem, Schedule, Weights};
//!
//! let kernel = make_kernel(KernelKind::GaussPhase, &KernelParams::default(), 200)?;
//! let target = make_target(TargetKind::GaussChirp, 200)?;
//! let data = make_data(&kernel, &target, &NoiseLevels::uniform(0.01), 7)?;
//! let prob = Problem::new(kernel, data.amp.clone(), DataTerm::Phase(data.phase), Weights::default())?;
//! let x0 = default_initial_design(&data.amp, 20, 2, 10.0)?;
//! let report = tigra_solve(&prob, &Schedule::default(), &x0)?;
//! println!("β* = {:e}, e² = {:e}", report.beta_star(), report.best().metrics.e2);
//! # Ok::<(), autoconv::Error>(())
//! ```

// `!(x > 0)` style tests are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod functionals;
pub mod io;
pub mod nurbs;
pub mod operator;
pub mod optimizer;
pub mod scalar;
pub mod signal;
pub mod verify;

pub use error::{Error, Result};
pub use functionals::{
    combined_error, objective_gradient, objective_value, DataMode, DataTerm, ErrorMetrics, Evaluator, FitProblem,
    PhaseFidelity, Weights,
};
pub use nurbs::{open_uniform_knots, synthesize, KnotVector, NurbsDesign};
pub use operator::{forward, frechet_adjoint_apply, frechet_apply, KernelGrid};
pub use optimizer::{default_initial_design, tigra_solve, ContinuationSchedule, SolveReport};
pub use scalar::Real;
pub use signal::{inner_product, modulus, norm, phase, ComplexSignal, RealSignal, SampleGrid};

pub type Grid = SampleGrid<f64>;
pub type Signal = ComplexSignal<f64>;
pub type RealData = RealSignal<f64>;
pub type Kernel = KernelGrid<f64>;
pub type Knots = KnotVector<f64>;
pub type Design = NurbsDesign<f64>;
pub type Problem = FitProblem<f64>;
pub type Schedule = ContinuationSchedule<f64>;
pub type Report = SolveReport<f64>;

pub type Grid32 = SampleGrid<f32>;
pub type Signal32 = ComplexSignal<f32>;
pub type RealData32 = RealSignal<f32>;
pub type Kernel32 = KernelGrid<f32>;
pub type Knots32 = KnotVector<f32>;
pub type Design32 = NurbsDesign<f32>;
pub type Problem32 = FitProblem<f32>;
pub type Schedule32 = ContinuationSchedule<f32>;
pub type Report32 = SolveReport<f32>;
