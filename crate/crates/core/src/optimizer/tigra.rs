//! Continuation in the discrepancy weight `β`.
//!
//! Step `k` minimizes the objective with `β_k = q^k β_0`, warm-started from
//! step `k − 1`, to gradient tolerance `max(β_k / tol_scale, tol_floor)`.
//! The design with the smallest `e² = 2d² + r²` is returned.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::functionals::{ErrorMetrics, Evaluator, FitProblem};
use crate::nurbs::{open_uniform_knots, NurbsDesign};
use crate::operator::forward;
use crate::scalar::Real;
use crate::signal::{ComplexSignal, RealSignal};

use super::bfgs::{bfgs_minimize, BfgsOptions, BfgsStatus};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuationSchedule<T> {
    pub beta0: T,
    pub q: T,
    pub beta_min: T,
    pub max_it: usize,
    pub tol_floor: T,
    pub tol_scale: T,
}

impl<T: Real> Default for ContinuationSchedule<T> {
    fn default() -> Self {
        Self {
            beta0: T::lit(100.0),
            q: T::lit(0.25),
            beta_min: T::lit(1e-6),
            max_it: 10_000,
            tol_floor: T::lit(1e-9),
            tol_scale: T::lit(2000.0),
        }
    }
}

impl<T: Real> ContinuationSchedule<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > T::zero() && self.beta0.is_finite()) {
            return Err(Error::arg("beta0 must be positive"));
        }
        if !(self.q > T::zero() && self.q < T::one()) {
            return Err(Error::arg(format!("q must lie in (0, 1), got {}", self.q)));
        }
        if !(self.beta_min > T::zero() && self.beta_min < self.beta0) {
            return Err(Error::arg("need 0 < beta_min < beta0"));
        }
        if !(self.tol_floor >= T::zero()) || !(self.tol_scale > T::zero()) {
            return Err(Error::arg("tolerance floor must be ≥ 0 and scale > 0"));
        }
        Ok(())
    }

    /// `β_k = q^k β_0`.
    pub fn beta(&self, k: usize) -> T {
        self.beta0 * self.q.powi(k as i32)
    }

    /// Gradient tolerance of step `k`.
    pub fn tolerance(&self, k: usize) -> T {
        (self.beta(k) / self.tol_scale).max(self.tol_floor)
    }
}

/// Outcome of one continuation step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord<T> {
    pub beta: T,
    pub iterations: usize,
    pub initial_objective: T,
    pub final_objective: T,
    pub metrics: ErrorMetrics<T>,
    pub status: BfgsStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub steps: Vec<StepRecord<T>>,
    pub best_step: usize,
    pub best_design: NurbsDesign<T>,
    /// `γ[x*]` on the X grid.
    pub best_signal: ComplexSignal<T>,
    /// `F(γ[x*])` on the Y grid.
    pub best_image: ComplexSignal<T>,
    pub total_iterations: usize,
    pub wall_seconds: f64,
}

impl<T: Real> SolveReport<T> {
    pub fn best(&self) -> &StepRecord<T> {
        &self.steps[self.best_step]
    }

    pub fn beta_star(&self) -> T {
        self.best().beta
    }
}

/// Runs the β-continuation from `x_init`.
pub fn tigra_solve<T: Real>(
    prob: &FitProblem<T>,
    schedule: &ContinuationSchedule<T>,
    x_init: &NurbsDesign<T>,
) -> Result<SolveReport<T>> {
    schedule.validate()?;
    let start = Instant::now();
    let knots = x_init.knots().clone();
    let mut ev = Evaluator::new(prob, &knots)?;
    let mut x = x_init.params();
    ev.set_beta(schedule.beta0);
    if !ev.value(&x).is_finite() {
        return Err(Error::arg("initial design is infeasible (infinite objective)"));
    }

    let mut steps: Vec<StepRecord<T>> = Vec::new();
    let mut best: Option<(usize, Vec<T>)> = None;
    let mut rises = 0;
    for k in 0.. {
        let beta = schedule.beta(k);
        if beta < schedule.beta_min {
            break;
        }
        ev.set_beta(beta);
        let opts = BfgsOptions { grad_tol: schedule.tolerance(k), max_iter: schedule.max_it, ..BfgsOptions::default() };
        let out = bfgs_minimize(|p, g| ev.value_and_gradient(p, g), &x, &opts)?;
        x = out.x;
        let metrics = ev.metrics(&x)?;
        let record = StepRecord {
            beta,
            iterations: out.iterations,
            initial_objective: out.history[0],
            final_objective: out.value,
            metrics,
            status: out.status,
        };
        if let Some(prev) = steps.last() {
            rises = if metrics.e2 > prev.metrics.e2 { rises + 1 } else { 0 };
        }
        let improved = match &best {
            Some((i, _)) => metrics.e2 < steps[*i].metrics.e2,
            None => true,
        };
        if improved {
            best = Some((k, x.clone()));
        }
        steps.push(record);
        if rises >= 2 {
            break;
        }
    }

    let total_iterations = steps.iter().map(|s| s.iterations).sum();
    if total_iterations == 0 && steps.iter().all(|s| matches!(s.status, BfgsStatus::LineSearchFailed(_))) {
        let diag = steps.iter().map(|s| format!("β = {}: {:?}", s.beta, s.status)).collect::<Vec<_>>().join("; ");
        return Err(Error::LineSearch(format!("every continuation step failed: {diag}")));
    }
    let (best_step, best_x) = best.ok_or_else(|| Error::arg("schedule has no steps above beta_min"))?;
    let best_design = NurbsDesign::from_params(&best_x, knots)?;
    let best_signal = ev.curve(&best_x);
    let best_image = forward(prob.kernel(), &best_signal)?;
    Ok(SolveReport {
        steps,
        best_step,
        best_design,
        best_signal,
        best_image,
        total_iterations,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Constant weights `w0` and control points `u_j = v_j = a((j − 1)/(n − 1))/√2`,
/// read at the nearest X-grid node, so that `|P_j| = a`.
pub fn default_initial_design<T: Real>(amp: &RealSignal<T>, n: usize, p: usize, w0: T) -> Result<NurbsDesign<T>> {
    let knots = open_uniform_knots(n, p)?;
    if !(w0 > T::zero()) {
        return Err(Error::arg("w0 must be positive"));
    }
    let grid = amp.grid();
    let denom = T::from_count(n.max(2) - 1);
    let u: Vec<T> = (0..n)
        .map(|j| {
            let t = if n == 1 { T::zero() } else { T::from_count(j) / denom };
            amp.values()[grid.nearest(t)] * T::FRAC_1_SQRT_2()
        })
        .collect();
    NurbsDesign::new(u.clone(), u, vec![w0; n], knots)
}
