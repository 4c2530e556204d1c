use crate::error::{Error, Result};
use crate::scalar::Real;

use super::line_search::{wolfe_line_search, WolfeConditions};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BfgsOptions<T> {
    /// Stop once `‖∇f‖₂ ≤ grad_tol`.
    pub grad_tol: T,
    pub max_iter: usize,
    pub wolfe: WolfeConditions<T>,
}

impl<T: Real> Default for BfgsOptions<T> {
    fn default() -> Self {
        Self { grad_tol: T::lit(1e-9), max_iter: 10_000, wolfe: WolfeConditions::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BfgsStatus {
    Converged,
    MaxIterations,
    LineSearchFailed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsOutcome<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: BfgsStatus,
    /// Objective after each accepted iteration, starting with `f(x0)`.
    pub history: Vec<T>,
}

impl<T> BfgsOutcome<T> {
    pub fn converged(&self) -> bool {
        self.status == BfgsStatus::Converged
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Dense inverse-Hessian approximation, row-major.
struct InverseHessian<T> {
    dim: usize,
    data: Vec<T>,
    scaled: bool,
}

impl<T: Real> InverseHessian<T> {
    fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self { dim, data, scaled: false }
    }

    fn apply(&self, v: &[T], out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[i * self.dim..(i + 1) * self.dim], v);
        }
    }

    /// BFGS update; skipped when the curvature `yᵀs` is not safely positive.
    fn update(&mut self, s: &[T], y: &[T]) -> bool {
        let sy = dot(s, y);
        let guard = T::lit(1e-12) * dot(s, s).sqrt() * dot(y, y).sqrt();
        if !(sy > guard) {
            return false;
        }
        if !self.scaled {
            let gamma = sy / dot(y, y);
            self.data.iter_mut().for_each(|h| *h = *h * gamma);
            self.scaled = true;
        }
        let n = self.dim;
        let mut hy = vec![T::zero(); n];
        self.apply(y, &mut hy);
        let yhy = dot(y, &hy);
        let a = (sy + yhy) / (sy * sy);
        for i in 0..n {
            for j in 0..n {
                let idx = i * n + j;
                self.data[idx] = self.data[idx] + a * s[i] * s[j] - (hy[i] * s[j] + s[i] * hy[j]) / sy;
            }
        }
        true
    }
}

/// Minimizes `f` with BFGS steps `x ← x − ρ H ∇f` along strong-Wolfe step sizes.
///
/// `f(x, grad)` returns the value and writes the gradient; it may return `+∞`
/// for infeasible points, in which case the gradient is ignored.
pub fn bfgs_minimize<T: Real>(
    mut f: impl FnMut(&[T], &mut [T]) -> T,
    x0: &[T],
    opts: &BfgsOptions<T>,
) -> Result<BfgsOutcome<T>> {
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut grad = vec![T::zero(); dim];
    let mut value = f(&x, &mut grad);
    let mut evaluations = 1;
    if !value.is_finite() {
        return Err(Error::Infeasible);
    }
    let mut history = vec![value];
    let mut h = InverseHessian::identity(dim);
    let mut dir = vec![T::zero(); dim];
    let mut trial = vec![T::zero(); dim];
    let mut trial_grad = vec![T::zero(); dim];
    let mut iterations = 0;

    let status = loop {
        if dot(&grad, &grad).sqrt() <= opts.grad_tol {
            break BfgsStatus::Converged;
        }
        if iterations >= opts.max_iter {
            break BfgsStatus::MaxIterations;
        }
        h.apply(&grad, &mut dir);
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&grad, &dir);
        if !(slope < T::zero()) {
            h = InverseHessian::identity(dim);
            dir.iter_mut().zip(&grad).for_each(|(d, &g)| *d = -g);
            slope = dot(&grad, &dir);
        }
        let rho_init = if h.scaled { T::one() } else { T::one().min(T::one() / dot(&grad, &grad).sqrt()) };

        let search = wolfe_line_search(
            |rho| {
                for ((t, &xi), &di) in trial.iter_mut().zip(&x).zip(&dir) {
                    *t = xi + rho * di;
                }
                let v = f(&trial, &mut trial_grad);
                evaluations += 1;
                let d = if v.is_finite() { dot(&trial_grad, &dir) } else { T::nan() };
                (v, d)
            },
            value,
            slope,
            rho_init,
            &opts.wolfe,
        );
        let step = match search {
            Ok(s) => s,
            Err(e) => break BfgsStatus::LineSearchFailed(e.to_string()),
        };
        // trial / trial_grad hold the accepted point: it is the last evaluation.
        let s: Vec<T> = dir.iter().map(|&d| step.step * d).collect();
        let y: Vec<T> = trial_grad.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        x.copy_from_slice(&trial);
        grad.copy_from_slice(&trial_grad);
        value = step.value;
        history.push(value);
        iterations += 1;
        h.update(&s, &y);
    };

    Ok(BfgsOutcome { x, value, grad, iterations, evaluations, status, history })
}
