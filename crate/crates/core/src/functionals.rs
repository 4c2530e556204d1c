//! Discrepancy terms, NURBS penalties and the Tikhonov-type objective.
//!
//! Gradients with respect to a complex signal `g` are represented by the
//! element `G` with `δJ = Re⟨δg, G⟩` in the trapezoidal inner product of the
//! signal's grid, so they can be pulled back through the Fréchet adjoint and
//! the design Jacobian transpose without extra weighting.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::nurbs::{BasisCache, KnotVector, NurbsDesign};
use crate::operator::{forward, frechet_adjoint_apply, KernelGrid};
use crate::scalar::Real;
use crate::signal::{self, norm, ComplexSignal, RealSignal, SampleGrid};

/// Moduli below this are treated as zeros when differentiating `|·|`.
pub const MODULUS_FLOOR: f64 = 1e-12;

/// Default approximation level for the `‖F(f)‖ ≥ ε` guard.
pub const DEFAULT_EPS: f64 = 1e-10;

/// Which data set the solver fits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DataMode {
    /// Complex data `y^δ` on the Y grid.
    FullData,
    /// Phase data `ψ^δ` on the Y grid.
    PhaseOnly,
}

/// Phase discrepancy used in [`DataMode::PhaseOnly`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhaseFidelity {
    /// `‖F − |F| e^{iψ}‖² / ‖F‖²`, with `+∞` below the guard.
    #[default]
    Relative,
    /// `½ ‖Sign_ε(F) − e^{iψ}‖²`.
    SignEps,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DataTerm<T> {
    Full(ComplexSignal<T>),
    Phase(RealSignal<T>),
}

/// Scalar weights of the objective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights<T> {
    pub alpha: T,
    pub beta: T,
    pub beta_p: T,
    pub beta_w: T,
    pub w0: T,
    pub eps: T,
}

impl<T: Real> Default for Weights<T> {
    fn default() -> Self {
        Self {
            alpha: T::lit(1e-6),
            beta: T::lit(100.0),
            beta_p: T::one(),
            beta_w: T::one(),
            w0: T::lit(10.0),
            eps: T::lit(DEFAULT_EPS),
        }
    }
}

impl<T: Real> Weights<T> {
    fn validate(&self) -> Result<()> {
        let nonneg = |v: T| v >= T::zero() && v.is_finite();
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !nonneg(self.alpha) {
            return Err(Error::arg("alpha must be ≥ 0"));
        }
        if !pos(self.beta) {
            return Err(Error::arg("beta must be > 0"));
        }
        if !nonneg(self.beta_p) || !nonneg(self.beta_w) {
            return Err(Error::arg("beta_P and beta_w must be ≥ 0"));
        }
        if !pos(self.w0) {
            return Err(Error::arg("w0 must be > 0"));
        }
        if !pos(self.eps) {
            return Err(Error::arg("eps must be > 0"));
        }
        Ok(())
    }
}

/// Data, kernel and weights of one fitting problem.
#[derive(Clone, Debug)]
pub struct FitProblem<T> {
    kernel: KernelGrid<T>,
    amp: RealSignal<T>,
    data: DataTerm<T>,
    fidelity: PhaseFidelity,
    weights: Weights<T>,
}

impl<T: Real> FitProblem<T> {
    pub fn new(kernel: KernelGrid<T>, amp: RealSignal<T>, data: DataTerm<T>, weights: Weights<T>) -> Result<Self> {
        weights.validate()?;
        kernel.x_grid().ensure_same(amp.grid(), "amplitude data")?;
        match &data {
            DataTerm::Full(y) => {
                kernel.y_grid().ensure_same(y.grid(), "full data")?;
                if !(norm(y) > T::zero()) {
                    return Err(Error::InvalidData("full data has zero norm".into()));
                }
            }
            DataTerm::Phase(psi) => kernel.y_grid().ensure_same(psi.grid(), "phase data")?,
        }
        Ok(Self { kernel, amp, data, fidelity: PhaseFidelity::Relative, weights })
    }

    pub fn with_fidelity(mut self, fidelity: PhaseFidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    pub fn with_beta(mut self, beta: T) -> Result<Self> {
        self.weights.beta = beta;
        self.weights.validate()?;
        Ok(self)
    }

    pub fn mode(&self) -> DataMode {
        match self.data {
            DataTerm::Full(_) => DataMode::FullData,
            DataTerm::Phase(_) => DataMode::PhaseOnly,
        }
    }

    pub fn kernel(&self) -> &KernelGrid<T> {
        &self.kernel
    }

    pub fn amp(&self) -> &RealSignal<T> {
        &self.amp
    }

    pub fn data(&self) -> &DataTerm<T> {
        &self.data
    }

    pub fn fidelity(&self) -> PhaseFidelity {
        self.fidelity
    }

    pub fn weights(&self) -> &Weights<T> {
        &self.weights
    }

    pub fn x_grid(&self) -> SampleGrid<T> {
        self.kernel.x_grid()
    }
}

/// `g/|g|`, and `0` where `g = 0`.
pub fn sign_op<T: Real>(g: &ComplexSignal<T>) -> ComplexSignal<T> {
    let v = g
        .values()
        .iter()
        .map(|&z| {
            let r = z.norm();
            if r == T::zero() {
                Complex::new(T::zero(), T::zero())
            } else {
                z / r
            }
        })
        .collect();
    ComplexSignal::from_parts(*g.grid(), v)
}

/// `g / max(ε, |g|)`.
pub fn sign_eps<T: Real>(g: &ComplexSignal<T>, eps: T) -> Result<ComplexSignal<T>> {
    if !(eps > T::zero()) {
        return Err(Error::arg(format!("sign_eps needs ε > 0, got {eps}")));
    }
    let v = g.values().iter().map(|&z| z / eps.max(z.norm())).collect();
    Ok(ComplexSignal::from_parts(*g.grid(), v))
}

/// `‖e^{iψ₁} − e^{iψ₂}‖_Y`.
pub fn phase_pseudometric<T: Real>(psi1: &RealSignal<T>, psi2: &RealSignal<T>) -> Result<T> {
    psi1.grid().ensure_same(psi2.grid(), "phase_pseudometric")?;
    let unit = |p: &RealSignal<T>| {
        ComplexSignal::from_parts(*p.grid(), p.values().iter().map(|&a| Complex::from_polar(T::one(), a)).collect())
    };
    Ok(norm(&unit(psi1).sub(&unit(psi2))?))
}

fn unit_phasors<T: Real>(psi: &RealSignal<T>) -> Vec<Complex<T>> {
    psi.values().iter().map(|&a| Complex::from_polar(T::one(), a)).collect()
}

/// `d² = ‖g − |g| e^{iψ}‖² / ‖g‖²`; [`Error::Infeasible`] when `‖g‖ < ε`.
pub fn rel_phase_discrepancy<T: Real>(g: &ComplexSignal<T>, psi: &RealSignal<T>, eps: T) -> Result<T> {
    g.grid().ensure_same(psi.grid(), "rel_phase_discrepancy")?;
    let e = unit_phasors(psi);
    let (value, _) = relative_phase_term(g.grid(), g.values(), &e, eps, false).ok_or(Error::Infeasible)?;
    Ok(value)
}

/// `‖g − y‖² / ‖y‖²`.
pub fn full_data_discrepancy<T: Real>(g: &ComplexSignal<T>, y: &ComplexSignal<T>) -> Result<T> {
    let ny = norm(y);
    if !(ny > T::zero()) {
        return Err(Error::InvalidData("full data has zero norm".into()));
    }
    Ok((norm(&g.sub(y)?) / ny).powi(2))
}

/// `‖ |f| − a ‖²_X` (unnormalized).
pub fn amp_discrepancy<T: Real>(f: &ComplexSignal<T>, amp: &RealSignal<T>) -> Result<T> {
    f.grid().ensure_same(amp.grid(), "amp_discrepancy")?;
    Ok(signal::modulus(f).distance(amp)?.powi(2))
}

/// `(1/2n) Σ (u_{j+1} − u_j)² + (v_{j+1} − v_j)²`.
pub fn penalty_p<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::dim(format!("penalty_p: {} real vs {} imaginary parts", u.len(), v.len())));
    }
    if u.len() < 2 {
        return Err(Error::arg("penalty_p needs at least two control points"));
    }
    Ok(penalty_p_raw(u, v))
}

fn penalty_p_raw<T: Real>(u: &[T], v: &[T]) -> T {
    let n = T::from_count(u.len());
    let s: T = u.windows(2).zip(v.windows(2)).map(|(a, b)| (a[1] - a[0]).powi(2) + (b[1] - b[0]).powi(2)).sum();
    s / (n + n)
}

/// Weight barrier `f_{w0}`: `+∞` for `w ≤ 0`, `w⁻²` below `w0/2`, `(w0/2)⁻⁴ (w − w0)²` above.
pub fn weight_barrier<T: Real>(w: T, w0: T) -> T {
    let half = w0 * T::lit(0.5);
    if !(w > T::zero()) {
        T::infinity()
    } else if w < half {
        w.powi(-2)
    } else {
        half.powi(-4) * (w - w0).powi(2)
    }
}

/// Derivative of [`weight_barrier`] for `w > 0`.
pub fn weight_barrier_derivative<T: Real>(w: T, w0: T) -> T {
    let half = w0 * T::lit(0.5);
    if w < half {
        -T::lit(2.0) * w.powi(-3)
    } else {
        T::lit(2.0) * half.powi(-4) * (w - w0)
    }
}

/// `(1/2n) Σ f_{w0}(w_j)`.
pub fn penalty_w<T: Real>(w: &[T], w0: T) -> T {
    let n = T::from_count(w.len().max(1));
    let s: T = w.iter().map(|&wj| weight_barrier(wj, w0)).sum();
    s / (n + n)
}

/// `β_P R_P(u, v) + β_w R_{w0}(w)`.
pub fn nurbs_penalty<T: Real>(x: &NurbsDesign<T>, beta_p: T, beta_w: T, w0: T) -> T {
    penalty_raw(x.u(), x.v(), x.w(), beta_p, beta_w, w0)
}

fn penalty_raw<T: Real>(u: &[T], v: &[T], w: &[T], beta_p: T, beta_w: T, w0: T) -> T {
    let rw = penalty_w(w, w0);
    if rw.is_infinite() {
        return T::infinity();
    }
    let rp = if u.len() >= 2 { penalty_p_raw(u, v) } else { T::zero() };
    beta_p * rp + beta_w * rw
}

/// Adds `scale · ∇(β_P R_P + β_w R_{w0})` to `grad`.
fn penalty_gradient_add<T: Real>(u: &[T], v: &[T], w: &[T], weights: &Weights<T>, scale: T, grad: &mut [T]) {
    let n = u.len();
    let nn = T::from_count(n);
    let cp = scale * weights.beta_p / nn;
    for j in 0..n {
        let mut gu = T::zero();
        let mut gv = T::zero();
        if j > 0 {
            gu = gu + (u[j] - u[j - 1]);
            gv = gv + (v[j] - v[j - 1]);
        }
        if j + 1 < n {
            gu = gu - (u[j + 1] - u[j]);
            gv = gv - (v[j + 1] - v[j]);
        }
        grad[j] = grad[j] + cp * gu;
        grad[n + j] = grad[n + j] + cp * gv;
    }
    let cw = scale * weights.beta_w / (nn + nn);
    for j in 0..n {
        grad[2 * n + j] = grad[2 * n + j] + cw * weight_barrier_derivative(w[j], weights.w0);
    }
}

/// Relative phase term value and, if requested, its `g`-gradient.
/// `None` when `‖g‖ < ε`.
fn relative_phase_term<T: Real>(
    grid: &SampleGrid<T>,
    g: &[Complex<T>],
    e: &[Complex<T>],
    eps: T,
    want_grad: bool,
) -> Option<(T, Vec<Complex<T>>)> {
    let floor = T::lit(MODULUS_FLOOR);
    let mut num = T::zero();
    let mut den = T::zero();
    for (k, (&z, &ek)) in g.iter().zip(e).enumerate() {
        let wk = grid.weight(k);
        num = num + wk * (z - ek * z.norm()).norm_sqr();
        den = den + wk * z.norm_sqr();
    }
    if !(den.sqrt() >= eps) || den == T::zero() {
        return None;
    }
    let d2 = num / den;
    if !want_grad {
        return Some((d2, Vec::new()));
    }
    let two = T::lit(2.0);
    let grad = g
        .iter()
        .zip(e)
        .map(|(&z, &ek)| {
            let r = z.norm();
            let proj = if r < floor { Complex::new(T::zero(), T::zero()) } else { z * ((z * ek.conj()).re / r) };
            let gn = (z * two - proj - ek * r) * two;
            (gn - z * (two * d2)) / den
        })
        .collect();
    Some((d2, grad))
}

/// `½‖Sign_ε(g) − e^{iψ}‖²` and its `g`-gradient.
fn sign_eps_term<T: Real>(grid: &SampleGrid<T>, g: &[Complex<T>], e: &[Complex<T>], eps: T) -> (T, Vec<Complex<T>>) {
    let half = T::lit(0.5);
    let mut value = T::zero();
    let grad = g
        .iter()
        .zip(e)
        .enumerate()
        .map(|(k, (&z, &ek))| {
            let r = z.norm();
            let denom = eps.max(r);
            let s = z / denom;
            let diff = s - ek;
            value = value + grid.weight(k) * diff.norm_sqr() * half;
            if r > eps {
                diff / r - z * ((diff.conj() * z).re / (r * r * r))
            } else {
                diff / eps
            }
        })
        .collect();
    (value, grad)
}

/// `d`, `r` and `e² = 2d² + r²` of a design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorMetrics<T> {
    pub d: T,
    pub r: T,
    pub e2: T,
}

impl<T: Real> ErrorMetrics<T> {
    /// Builds the triple from `d` and `r`.
    pub fn from_parts(d: T, r: T) -> Self {
        Self { d, r, e2: T::lit(2.0) * d * d + r * r }
    }
}

/// Reusable evaluation context for one problem and knot vector.
///
/// Holds the tabulated basis and scratch buffers; the objective weight `β`
/// can be changed between evaluations for continuation.
#[derive(Clone, Debug)]
pub struct Evaluator<'a, T> {
    prob: &'a FitProblem<T>,
    cache: BasisCache<T>,
    knots: KnotVector<T>,
    beta: T,
    curve: Vec<Complex<T>>,
    denom: Vec<T>,
    phasors: Vec<Complex<T>>,
    amp_norm_sq: T,
}

/// Intermediate quantities of one evaluation.
struct Parts<T> {
    image: ComplexSignal<T>,
    data: T,
    amp: T,
    penalty: T,
}

impl<'a, T: Real> Evaluator<'a, T> {
    pub fn new(prob: &'a FitProblem<T>, knots: &KnotVector<T>) -> Result<Self> {
        let grid = prob.x_grid();
        let cache = BasisCache::new(knots, &grid)?;
        let phasors = match &prob.data {
            DataTerm::Phase(psi) => unit_phasors(psi),
            DataTerm::Full(_) => Vec::new(),
        };
        let amp_norm_sq = prob.amp.norm().powi(2);
        Ok(Self {
            prob,
            cache,
            knots: knots.clone(),
            beta: prob.weights.beta,
            curve: vec![Complex::new(T::zero(), T::zero()); grid.len()],
            denom: vec![T::zero(); grid.len()],
            phasors,
            amp_norm_sq,
        })
    }

    pub fn problem(&self) -> &FitProblem<T> {
        self.prob
    }

    pub fn knots(&self) -> &KnotVector<T> {
        &self.knots
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn set_beta(&mut self, beta: T) {
        self.beta = beta;
    }

    pub fn dimension(&self) -> usize {
        3 * self.cache.count()
    }

    fn split<'x>(&self, x: &'x [T]) -> (&'x [T], &'x [T], &'x [T]) {
        let n = self.cache.count();
        (&x[..n], &x[n..2 * n], &x[2 * n..3 * n])
    }

    /// Samples `γ[x]` (weights must be positive).
    pub fn curve(&mut self, x: &[T]) -> ComplexSignal<T> {
        let (u, v, w) = self.split(x);
        self.cache.curve_into(u, v, w, &mut self.curve, &mut self.denom);
        ComplexSignal::from_parts(*self.cache.grid(), self.curve.clone())
    }

    fn parts(&mut self, x: &[T]) -> Option<Parts<T>> {
        assert_eq!(x.len(), self.dimension(), "design vector length");
        let (u, v, w) = self.split(x);
        let wts = self.prob.weights;
        let penalty = penalty_raw(u, v, w, wts.beta_p, wts.beta_w, wts.w0);
        if penalty.is_infinite() || x.iter().any(|c| !c.is_finite()) {
            return None;
        }
        let f = self.curve(x);
        let image = forward(&self.prob.kernel, &f).expect("grids fixed by the problem");
        let data = match (&self.prob.data, self.prob.fidelity) {
            (DataTerm::Full(y), _) => full_data_discrepancy(&image, y).expect("validated data"),
            (DataTerm::Phase(_), PhaseFidelity::Relative) => {
                relative_phase_term(image.grid(), image.values(), &self.phasors, wts.eps, false)?.0
            }
            (DataTerm::Phase(_), PhaseFidelity::SignEps) => {
                sign_eps_term(image.grid(), image.values(), &self.phasors, wts.eps).0
            }
        };
        let amp = amp_discrepancy(&f, &self.prob.amp).expect("grids fixed by the problem");
        Some(Parts { image, data, amp, penalty })
    }

    /// Objective value; `+∞` when infeasible.
    pub fn value(&mut self, x: &[T]) -> T {
        match self.parts(x) {
            Some(p) => p.data + self.beta * T::lit(0.5) * p.amp + self.prob.weights.alpha * p.penalty,
            None => T::infinity(),
        }
    }

    /// Objective value and gradient. `grad` is left untouched when the value is `+∞`.
    pub fn value_and_gradient(&mut self, x: &[T], grad: &mut [T]) -> T {
        assert_eq!(grad.len(), self.dimension(), "gradient length");
        let Some(parts) = self.parts(x) else {
            return T::infinity();
        };
        let wts = self.prob.weights;
        let value = parts.data + self.beta * T::lit(0.5) * parts.amp + wts.alpha * parts.penalty;

        // Y-gradient of the data term.
        let gy = match (&self.prob.data, self.prob.fidelity) {
            (DataTerm::Full(y), _) => {
                let ny2 = norm(y).powi(2);
                let two = T::lit(2.0);
                parts.image.values().iter().zip(y.values()).map(|(&g, &yy)| (g - yy) * (two / ny2)).collect()
            }
            (DataTerm::Phase(_), PhaseFidelity::Relative) => {
                relative_phase_term(parts.image.grid(), parts.image.values(), &self.phasors, wts.eps, true)
                    .expect("guard checked in parts")
                    .1
            }
            (DataTerm::Phase(_), PhaseFidelity::SignEps) => {
                sign_eps_term(parts.image.grid(), parts.image.values(), &self.phasors, wts.eps).1
            }
        };
        let gy = ComplexSignal::from_parts(*parts.image.grid(), gy);
        let f = ComplexSignal::from_parts(*self.cache.grid(), self.curve.clone());
        let mut z = frechet_adjoint_apply(&self.prob.kernel, &f, &gy).expect("grids fixed by the problem");

        // X-gradient of (β/2)‖|f| − a‖².
        let floor = T::lit(MODULUS_FLOOR);
        for ((zk, &fk), &ak) in z.values_mut().iter_mut().zip(&self.curve).zip(self.prob.amp.values()) {
            let r = fk.norm();
            if r >= floor {
                *zk = *zk + fk * (self.beta * (r - ak) / r);
            }
        }

        grad.iter_mut().for_each(|g| *g = T::zero());
        let (u, v, w) = self.split(x);
        self.cache.jacobian_adjoint_add(u, v, w, &self.curve, &self.denom, z.values(), grad);
        if wts.alpha > T::zero() {
            penalty_gradient_add(u, v, w, &wts, wts.alpha, grad);
        }
        value
    }

    /// `(d, r, e²)` of a design.
    pub fn metrics(&mut self, x: &[T]) -> Result<ErrorMetrics<T>> {
        if !(self.amp_norm_sq > T::zero()) {
            return Err(Error::InvalidData("amplitude data has zero norm".into()));
        }
        let f = self.curve(x);
        let image = forward(&self.prob.kernel, &f)?;
        let d2 = match &self.prob.data {
            DataTerm::Full(y) => full_data_discrepancy(&image, y)?,
            DataTerm::Phase(psi) => rel_phase_discrepancy(&image, psi, self.prob.weights.eps)?,
        };
        let r2 = amp_discrepancy(&f, &self.prob.amp)? / self.amp_norm_sq;
        Ok(ErrorMetrics { d: d2.sqrt(), r: r2.sqrt(), e2: T::lit(2.0) * d2 + r2 })
    }
}

/// Objective value at the problem's current `β`; `+∞` when infeasible.
pub fn objective_value<T: Real>(x: &NurbsDesign<T>, prob: &FitProblem<T>) -> T {
    match Evaluator::new(prob, x.knots()) {
        Ok(mut ev) => ev.value(&x.params()),
        Err(_) => T::infinity(),
    }
}

/// Analytic objective gradient with respect to `(u, v, w)`.
pub fn objective_gradient<T: Real>(x: &NurbsDesign<T>, prob: &FitProblem<T>) -> Result<Vec<T>> {
    let mut ev = Evaluator::new(prob, x.knots())?;
    let mut grad = vec![T::zero(); 3 * x.len()];
    let v = ev.value_and_gradient(&x.params(), &mut grad);
    if v.is_infinite() {
        return Err(Error::Infeasible);
    }
    Ok(grad)
}

/// `(d, r, e²)` with `e² = 2d² + r²` and `r² = ‖|γ| − a‖² / ‖a‖²`.
pub fn combined_error<T: Real>(x: &NurbsDesign<T>, prob: &FitProblem<T>) -> Result<ErrorMetrics<T>> {
    Evaluator::new(prob, x.knots())?.metrics(&x.params())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nurbs::{open_uniform_knots, synthesize};
    use crate::operator::symmetrize_kernel;
    use crate::signal::phase;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    type C = Complex<f64>;

    fn ygrid(n: usize) -> SampleGrid<f64> {
        SampleGrid::image(n).unwrap()
    }

    #[test]
    fn sign_examples() {
        let g = ygrid(10);
        let z = ComplexSignal::zeros(g);
        assert_eq!(sign_op(&z), z);
        let s = sign_op(&ComplexSignal::from_fn(g, |_| C::new(3.0, 4.0)));
        assert!(s.values().iter().all(|v| (v - C::new(0.6, 0.8)).norm() < 1e-16));
        let u = ComplexSignal::from_fn(g, |t: f64| C::from_polar(1.0, 3.0 * t));
        for (a, b) in sign_op(&u).values().iter().zip(u.values()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn sign_eps_examples() {
        let g = ygrid(10);
        let eps = 1e-3;
        let big = ComplexSignal::from_fn(g, |t: f64| C::new(1.0 + t, -t));
        assert_eq!(sign_eps(&big, eps).unwrap(), sign_op(&big));
        let small = ComplexSignal::from_fn(g, |_| C::new(eps / 2.0, 0.0));
        assert!(sign_eps(&small, eps).unwrap().values().iter().all(|v| (v - C::new(0.5, 0.0)).norm() < 1e-15));
        let z = ComplexSignal::zeros(g);
        assert_eq!(sign_eps(&z, eps).unwrap(), z);
        assert!(sign_eps(&z, 0.0).is_err());
    }

    #[test]
    fn sign_eps_converges_to_sign() {
        let g = ygrid(40);
        let s = ComplexSignal::from_fn(g, |t: f64| C::new((5.0 * t).cos(), t - 0.3) * 1e-3);
        let exact = sign_op(&s);
        for eps in [1e-2, 1e-6, 1e-10] {
            let approx = sign_eps(&s, eps).unwrap();
            let err = approx.values().iter().zip(exact.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            if eps < 1e-4 {
                assert!(err < 1e-15);
            } else {
                assert!(err > 0.0);
            }
        }
    }

    #[test]
    fn pseudometric_examples() {
        let g = ygrid(300);
        let p1 = RealSignal::from_fn(g, |s: f64| (3.0 * s).sin() + s * s);
        assert_eq!(phase_pseudometric(&p1, &p1).unwrap(), 0.0);
        let shift = |c: f64| RealSignal::from_fn(g, |s: f64| (3.0 * s).sin() + s * s + c);
        assert!(phase_pseudometric(&p1, &shift(2.0 * PI)).unwrap() < 1e-13);
        let d = phase_pseudometric(&p1, &shift(PI)).unwrap();
        assert!((d - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rel_phase_examples() {
        let g = ygrid(100);
        let model = ComplexSignal::from_fn(g, |s: f64| C::from_polar(1.0 + s, 2.0 * s * s - 1.0));
        let psi = phase(&model);
        assert!(rel_phase_discrepancy(&model, &psi, 1e-10).unwrap() < 1e-28);
        let shifted = RealSignal::from_fn(g, |s| 0.0 * s);
        let shifted =
            RealSignal::new(g, psi.values().iter().zip(shifted.values()).map(|(a, _)| a + PI).collect()).unwrap();
        assert!((rel_phase_discrepancy(&model, &shifted, 1e-10).unwrap() - 4.0).abs() < 1e-12);
        let unit = ComplexSignal::from_fn(g, |s: f64| C::from_polar(1.0, s));
        let quarter = RealSignal::new(g, phase(&unit).values().iter().map(|a| a + PI / 2.0).collect()).unwrap();
        assert!((rel_phase_discrepancy(&unit, &quarter, 1e-10).unwrap() - 2.0).abs() < 1e-12);
        let tiny = ComplexSignal::from_fn(g, |_| C::new(1e-12, 0.0));
        assert!(matches!(rel_phase_discrepancy(&tiny, &psi, 1e-10), Err(Error::Infeasible)));
    }

    #[test]
    fn full_discrepancy_examples() {
        let g = ygrid(30);
        let y = ComplexSignal::from_fn(g, |s: f64| C::new(s.cos(), s));
        assert_eq!(full_data_discrepancy(&y, &y).unwrap(), 0.0);
        assert!((full_data_discrepancy(&ComplexSignal::zeros(g), &y).unwrap() - 1.0).abs() < 1e-15);
        assert!((full_data_discrepancy(&y.scale(C::new(2.0, 0.0)), &y).unwrap() - 1.0).abs() < 1e-15);
        assert!(full_data_discrepancy(&y, &ComplexSignal::zeros(g)).is_err());
    }

    #[test]
    fn amp_discrepancy_examples() {
        let g = SampleGrid::unit(64).unwrap();
        let f = ComplexSignal::from_fn(g, |t: f64| C::from_polar(1.0 + t, 4.0 * t));
        let a = crate::signal::modulus(&f);
        assert!(amp_discrepancy(&f, &a).unwrap() < 1e-30);
        let ones = RealSignal::from_fn(g, |_| 1.0);
        assert!((amp_discrepancy(&ComplexSignal::zeros(g), &ones).unwrap() - 1.0).abs() < 1e-14);
        let rot = f.scale(C::from_polar(1.0, 0.9));
        assert!((amp_discrepancy(&rot, &ones).unwrap() - amp_discrepancy(&f, &ones).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty_p(&[0.3; 5], &[-1.0; 5]).unwrap(), 0.0);
        assert_eq!(penalty_p(&[0.0, 1.0], &[0.0, 0.0]).unwrap(), 0.25);
        let u = [0.1, 0.5, -0.2, 0.9];
        let v = [1.0, 0.0, 0.3, 0.3];
        let shifted_u: Vec<f64> = u.iter().map(|x| x + 7.0).collect();
        let shifted_v: Vec<f64> = v.iter().map(|x| x - 3.0).collect();
        assert!((penalty_p(&u, &v).unwrap() - penalty_p(&shifted_u, &shifted_v).unwrap()).abs() < 1e-14);
        assert!(penalty_p(&u, &v[..3]).is_err());

        assert_eq!(penalty_w(&[10.0; 4], 10.0), 0.0);
        assert!((weight_barrier(5.0f64, 10.0) - 0.04).abs() < 1e-16);
        assert!((weight_barrier(5.0f64 - 1e-15, 10.0) - 0.04).abs() < 1e-12);
        assert!(penalty_w(&[10.0f64, -1.0], 10.0).is_infinite());
        assert!(penalty_w(&[10.0f64, 0.0], 10.0).is_infinite());
    }

    #[test]
    fn barrier_branches_join_smoothly() {
        let w0 = 10.0f64;
        let h = w0 / 2.0;
        let left = h.powi(-2);
        let right = (h).powi(-4) * (h - w0).powi(2);
        assert!((left - right).abs() < 1e-12);
        let dl = -2.0 * h.powi(-3);
        let dr = 2.0 * h.powi(-4) * (h - w0);
        assert!((dl - dr).abs() < 1e-12);
        assert!((weight_barrier_derivative(h, w0) - dl).abs() < 1e-12);
        assert!((weight_barrier_derivative(h * (1.0 - 1e-14), w0) - dl).abs() < 1e-12);
    }

    #[test]
    fn nurbs_penalty_examples() {
        let knots = open_uniform_knots::<f64>(2, 1).unwrap();
        let d = NurbsDesign::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![10.0, 10.0], knots.clone()).unwrap();
        assert!((nurbs_penalty(&d, 1.0, 1.0, 10.0) - 0.25).abs() < 1e-15);
        let flat = NurbsDesign::new(vec![0.5, 0.5], vec![1.0, 1.0], vec![10.0, 10.0], knots.clone()).unwrap();
        assert_eq!(nurbs_penalty(&flat, 1.0, 1.0, 10.0), 0.0);
        let w = NurbsDesign::new(vec![0.0, 1.0], vec![0.0, 0.0], vec![3.0, 12.0], knots).unwrap();
        assert_eq!(nurbs_penalty(&w, 0.0, 2.0, 10.0), 2.0 * penalty_w(&[3.0, 12.0], 10.0));
    }

    // Small synthetic problem shared by the gradient checks.
    fn toy_problem(mode: DataMode, rng: &mut ChaCha8Rng, n_grid: usize) -> (FitProblem<f64>, KnotVector<f64>) {
        let kernel = symmetrize_kernel(
            &KernelGrid::from_fn(n_grid, |s: f64, t: f64| C::from_polar(1.0 + 0.3 * (s * t).cos(), 1.5 * s - t))
                .unwrap(),
        );
        let x = kernel.x_grid();
        let target = ComplexSignal::from_fn(x, |t: f64| C::from_polar((-(t - 0.5).powi(2) / 0.05).exp(), 2.0 * t * t));
        let amp = RealSignal::new(
            x,
            crate::signal::modulus(&target)
                .values()
                .iter()
                .map(|a| a * (1.0 + 0.05 * rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let y = forward(&kernel, &target).unwrap();
        let data = match mode {
            DataMode::FullData => DataTerm::Full(y),
            DataMode::PhaseOnly => DataTerm::Phase(phase(&y)),
        };
        let weights = Weights { alpha: 1e-2, beta: 0.7, ..Weights::default() };
        (FitProblem::new(kernel, amp, data, weights).unwrap(), open_uniform_knots(12, 2).unwrap())
    }

    fn random_params(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut x: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        x.extend((0..n).map(|_| rng.random_range(1.0..20.0)));
        x
    }

    fn check_gradient(prob: &FitProblem<f64>, knots: &KnotVector<f64>, rng: &mut ChaCha8Rng) {
        let mut ev = Evaluator::new(prob, knots).unwrap();
        let x = random_params(knots.count(), rng);
        let mut g = vec![0.0; x.len()];
        let v = ev.value_and_gradient(&x, &mut g);
        assert!(v.is_finite());
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (ev.value(&xp) - ev.value(&xm)) / (2.0 * h);
            let scale = g[i].abs().max(1e-6 * g.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            assert!((fd - g[i]).abs() <= 1e-5 * scale.max(1e-10), "component {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for mode in [DataMode::FullData, DataMode::PhaseOnly] {
            let (prob, knots) = toy_problem(mode, &mut rng, 60);
            check_gradient(&prob, &knots, &mut rng);
        }
        let (prob, knots) = toy_problem(DataMode::PhaseOnly, &mut rng, 60);
        let prob = prob.with_fidelity(PhaseFidelity::SignEps);
        check_gradient(&prob, &knots, &mut rng);
    }

    #[test]
    fn penalty_only_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (prob, knots) = toy_problem(DataMode::FullData, &mut rng, 20);
        let x = random_params(knots.count(), &mut rng);
        let n = knots.count();
        let mut g = vec![0.0; 3 * n];
        let w = prob.weights;
        penalty_gradient_add(&x[..n], &x[n..2 * n], &x[2 * n..], &w, 1.0, &mut g);
        assert!((g[0] - w.beta_p * (x[0] - x[1]) / n as f64).abs() < 1e-15);
    }

    #[test]
    fn exact_fit_has_zero_full_data_gradient() {
        let kernel = KernelGrid::from_fn(40, |_, _| C::new(1.0, 0.0)).unwrap();
        let knots = open_uniform_knots::<f64>(6, 2).unwrap();
        let design = NurbsDesign::new(
            vec![0.1, 0.5, 0.8, 0.4, 0.2, 0.1],
            vec![0.0, 0.3, -0.2, 0.1, 0.0, 0.2],
            vec![10.0; 6],
            knots,
        )
        .unwrap();
        let f = synthesize(&design, &kernel.x_grid()).unwrap();
        let y = forward(&kernel, &f).unwrap();
        let amp = crate::signal::modulus(&f);
        let weights = Weights { alpha: 0.0, beta: 1.0, ..Weights::default() };
        let prob = FitProblem::new(kernel, amp, DataTerm::Full(y), weights).unwrap();
        assert!(objective_value(&design, &prob) < 1e-28);
        let g = objective_gradient(&design, &prob).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-13));
        let m = combined_error(&design, &prob).unwrap();
        assert!(m.d < 1e-14 && m.r < 1e-14 && m.e2 < 1e-28);
    }

    #[test]
    fn objective_recomposes_from_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (prob, knots) = toy_problem(DataMode::PhaseOnly, &mut rng, 40);
        let prob = FitProblem { weights: Weights { alpha: 0.0, beta: 2.0, ..prob.weights }, ..prob };
        let x = random_params(knots.count(), &mut rng);
        let design = NurbsDesign::from_params(&x, knots).unwrap();
        let f = synthesize(&design, &prob.x_grid()).unwrap();
        let DataTerm::Phase(psi) = prob.data() else { unreachable!() };
        let d2 = rel_phase_discrepancy(&forward(prob.kernel(), &f).unwrap(), psi, 1e-10).unwrap();
        let q = amp_discrepancy(&f, prob.amp()).unwrap();
        assert!((objective_value(&design, &prob) - (d2 + q)).abs() < 1e-13);
    }

    #[test]
    fn guard_makes_objective_infinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (prob, knots) = toy_problem(DataMode::PhaseOnly, &mut rng, 30);
        let n = knots.count();
        let mut x = vec![0.0; 2 * n];
        x.extend(vec![10.0; n]);
        let design = NurbsDesign::from_params(&x, knots).unwrap();
        assert!(objective_value(&design, &prob).is_infinite());
        assert!(matches!(objective_gradient(&design, &prob), Err(Error::Infeasible)));
    }

    #[test]
    fn infeasible_weights_are_infinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (prob, knots) = toy_problem(DataMode::FullData, &mut rng, 30);
        let mut ev = Evaluator::new(&prob, &knots).unwrap();
        let mut x = random_params(knots.count(), &mut rng);
        x[2 * knots.count() + 3] = -0.5;
        assert!(ev.value(&x).is_infinite());
    }

    #[test]
    fn sign_flip_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for mode in [DataMode::FullData, DataMode::PhaseOnly] {
            let (prob, knots) = toy_problem(mode, &mut rng, 40);
            let n = knots.count();
            let mut ev = Evaluator::new(&prob, &knots).unwrap();
            let x = random_params(n, &mut rng);
            let mut flipped = x.clone();
            flipped[..2 * n].iter_mut().for_each(|c| *c = -*c);
            let (a, b) = (ev.value(&x), ev.value(&flipped));
            assert!((a - b).abs() <= 1e-13 * a.abs());
        }
    }

    #[test]
    fn e2_identity_and_table_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (prob, knots) = toy_problem(DataMode::PhaseOnly, &mut rng, 40);
        let mut ev = Evaluator::new(&prob, &knots).unwrap();
        for _ in 0..5 {
            let m = ev.metrics(&random_params(knots.count(), &mut rng)).unwrap();
            assert!((m.e2 - (2.0 * m.d * m.d + m.r * m.r)).abs() <= 1e-14 * m.e2);
        }
        // Table values carry three digits: allow the rounding of d, r and e² to propagate.
        for (d, r, e2) in [(1.39e-2f64, 1.68e-2, 6.69e-4), (1.02e-2, 1.55e-2, 4.47e-4)] {
            let m = ErrorMetrics::from_parts(d, r);
            let slack = 4.0 * d * 0.005e-2 + 2.0 * r * 0.005e-2 + 0.005e-4;
            assert!((m.e2 - e2).abs() <= slack);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn pseudometric_never_exceeds_l2(vals in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 41)) {
            let g = ygrid(21);
            let a = RealSignal::new(g, vals.iter().map(|p| p.0).collect()).unwrap();
            let b = RealSignal::new(g, vals.iter().map(|p| p.1).collect()).unwrap();
            prop_assert!(phase_pseudometric(&a, &b).unwrap() <= a.distance(&b).unwrap() * (1.0 + 1e-14));
        }

        #[test]
        fn rel_phase_scale_invariant(c in 1e-3..1e3f64, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = ygrid(25);
            let model = ComplexSignal::from_fn(g, |_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let psi = RealSignal::from_fn(g, |_| rng.random_range(-PI..PI));
            let a = rel_phase_discrepancy(&model, &psi, 1e-10).unwrap();
            let b = rel_phase_discrepancy(&model.scale(C::new(c, 0.0)), &psi, 1e-10).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
            prop_assert!((0.0..=4.0 + 1e-12).contains(&a));
        }
    }
}
