//! Planar NURBS curves with complex control points `P_j = u_j + i·v_j`.
//!
//! The curve `γ[x](τ) = Σ_j P_j R_j(τ)` with rational basis
//! `R_j = w_j N_j / Σ_l w_l N_l` is the parameterization of the unknown
//! signal; design vectors are packed as `x = (u, v, w) ∈ ℝ^{3n}`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{ComplexSignal, SampleGrid};

/// Open knot vector `η` of length `n + p + 1` normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnotVector<T> {
    knots: Vec<T>,
    degree: usize,
    count: usize,
}

impl<T: Real> KnotVector<T> {
    pub fn new(knots: Vec<T>, degree: usize, count: usize) -> Result<Self> {
        if count < degree + 1 {
            return Err(Error::arg(format!("need n ≥ p + 1, got n = {count}, p = {degree}")));
        }
        if knots.len() != count + degree + 1 {
            return Err(Error::dim(format!(
                "knot vector has {} entries, expected n + p + 1 = {}",
                knots.len(),
                count + degree + 1
            )));
        }
        if knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::arg("knot vector must be non-decreasing"));
        }
        let open_start = knots[..=degree].iter().all(|&t| t == T::zero());
        let open_end = knots[count..].iter().all(|&t| t == T::one());
        if !open_start || !open_end {
            return Err(Error::arg("knot vector must be open on [0, 1]"));
        }
        Ok(Self { knots, degree, count })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of control points `n`.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Knot span `μ` with `η_μ ≤ τ < η_{μ+1}`; `τ = 1` maps to the last
    /// nonempty span, which is treated as closed on the right.
    fn span(&self, tau: T) -> usize {
        let p = self.degree;
        let n = self.count;
        if tau >= self.knots[n] {
            return n - 1;
        }
        // open knots: spans of interest are p..n
        let (mut lo, mut hi) = (p, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if tau < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }
}

/// `p + 1` zeros, interior knots `(j − p − 1)/(n − p)` (1-based `j`), `p + 1` ones.
pub fn open_uniform_knots<T: Real>(n: usize, p: usize) -> Result<KnotVector<T>> {
    if n < p + 1 {
        return Err(Error::arg(format!("open_uniform_knots: n = {n} < p + 1 = {}", p + 1)));
    }
    let mut knots = vec![T::zero(); p + 1];
    let denom = T::from_count(n - p);
    knots.extend((p + 2..=n).map(|j| T::from_count(j - p - 1) / denom));
    knots.extend(std::iter::repeat_n(T::one(), p + 1));
    KnotVector::new(knots, p, n)
}

fn check_param<T: Real>(tau: T) -> Result<()> {
    if !(tau >= T::zero() && tau <= T::one()) {
        return Err(Error::arg(format!("curve parameter {tau} outside [0, 1]")));
    }
    Ok(())
}

/// `a / b` with `0/0 := 0` (any zero denominator yields zero).
#[inline]
fn ratio<T: Real>(a: T, b: T) -> T {
    if b == T::zero() {
        T::zero()
    } else {
        a / b
    }
}

/// All `n` B-spline basis values `N_{j,p}(τ)` by the Cox–de Boor recursion.
pub fn bspline_basis<T: Real>(knots: &KnotVector<T>, tau: T) -> Result<Vec<T>> {
    check_param(tau)?;
    let eta = &knots.knots;
    let p = knots.degree;
    let n = knots.count;
    let mut basis = vec![T::zero(); n + p];
    basis[knots.span(tau)] = T::one();
    for d in 1..=p {
        for j in 0..n + p - d {
            let left = ratio(tau - eta[j], eta[j + d] - eta[j]) * basis[j];
            let right = ratio(eta[j + d + 1] - tau, eta[j + d + 1] - eta[j + 1]) * basis[j + 1];
            basis[j] = left + right;
        }
    }
    basis.truncate(n);
    Ok(basis)
}

/// Control net and weights of a NURBS curve.
#[derive(Clone, Debug, PartialEq)]
pub struct NurbsDesign<T> {
    u: Vec<T>,
    v: Vec<T>,
    w: Vec<T>,
    knots: KnotVector<T>,
}

impl<T: Real> NurbsDesign<T> {
    pub fn new(u: Vec<T>, v: Vec<T>, w: Vec<T>, knots: KnotVector<T>) -> Result<Self> {
        let n = knots.count();
        if u.len() != n || v.len() != n || w.len() != n {
            return Err(Error::dim(format!(
                "design arrays have lengths ({}, {}, {}), knot vector expects {n}",
                u.len(),
                v.len(),
                w.len()
            )));
        }
        if let Some(j) = w.iter().position(|&wj| !(wj > T::zero()) || !wj.is_finite()) {
            return Err(Error::arg(format!("weight w[{j}] = {} is not positive", w[j])));
        }
        if u.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::arg("control points must be finite"));
        }
        Ok(Self { u, v, w, knots })
    }

    /// Unpacks `x = (u, v, w)`.
    pub fn from_params(x: &[T], knots: KnotVector<T>) -> Result<Self> {
        let n = knots.count();
        if x.len() != 3 * n {
            return Err(Error::dim(format!("parameter vector has {} entries, expected {}", x.len(), 3 * n)));
        }
        Self::new(x[..n].to_vec(), x[n..2 * n].to_vec(), x[2 * n..].to_vec(), knots)
    }

    pub fn params(&self) -> Vec<T> {
        let mut x = Vec::with_capacity(3 * self.len());
        x.extend_from_slice(&self.u);
        x.extend_from_slice(&self.v);
        x.extend_from_slice(&self.w);
        x
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn knots(&self) -> &KnotVector<T> {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree()
    }

    pub fn control_point(&self, j: usize) -> Complex<T> {
        Complex::new(self.u[j], self.v[j])
    }
}

/// Rational basis `R_j(τ) = w_j N_j(τ) / Σ_l w_l N_l(τ)`.
pub fn rational_basis<T: Real>(design: &NurbsDesign<T>, tau: T) -> Result<Vec<T>> {
    let mut basis = bspline_basis(&design.knots, tau)?;
    let denom: T = basis.iter().zip(&design.w).map(|(&b, &w)| b * w).sum();
    if !(denom > T::zero()) {
        return Err(Error::InvalidData(format!("rational basis denominator vanishes at τ = {tau}")));
    }
    for (b, &w) in basis.iter_mut().zip(&design.w) {
        *b = *b * w / denom;
    }
    Ok(basis)
}

/// B-spline basis tabulated on a fixed grid: for node `k`, the `p + 1`
/// possibly nonzero values `N_{start_k + i}(τ_k)`.
#[derive(Clone, Debug)]
pub struct BasisCache<T> {
    grid: SampleGrid<T>,
    count: usize,
    width: usize,
    start: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> BasisCache<T> {
    pub fn new(knots: &KnotVector<T>, grid: &SampleGrid<T>) -> Result<Self> {
        if grid.length() != T::one() {
            return Err(Error::arg("NURBS curves are sampled on a grid over [0, 1]"));
        }
        let p = knots.degree();
        let width = p + 1;
        let mut start = Vec::with_capacity(grid.len());
        let mut values = Vec::with_capacity(grid.len() * width);
        for tau in grid.nodes() {
            let full = bspline_basis(knots, tau)?;
            let s = knots.span(tau) - p;
            start.push(s);
            values.extend_from_slice(&full[s..s + width]);
        }
        Ok(Self { grid: *grid, count: knots.count(), width, start, values })
    }

    pub fn grid(&self) -> &SampleGrid<T> {
        &self.grid
    }

    /// Number of control points the cache was built for.
    pub fn count(&self) -> usize {
        self.count
    }

    #[inline]
    fn node(&self, k: usize) -> (usize, &[T]) {
        (self.start[k], &self.values[k * self.width..(k + 1) * self.width])
    }

    /// Writes `γ(τ_k)` into `curve` and `Σ_l w_l N_l(τ_k)` into `denom`.
    pub fn curve_into(&self, u: &[T], v: &[T], w: &[T], curve: &mut [Complex<T>], denom: &mut [T]) {
        for k in 0..self.grid.len() {
            let (s, nb) = self.node(k);
            let den = nb.iter().enumerate().fold(T::zero(), |acc, (i, &b)| acc + w[s + i] * b);
            // Summing P_j R_j keeps endpoint interpolation exact (R = 1 there).
            let mut acc = Complex::new(T::zero(), T::zero());
            for (i, &b) in nb.iter().enumerate() {
                let j = s + i;
                acc = acc + Complex::new(u[j], v[j]) * (w[j] * b / den);
            }
            curve[k] = acc;
            denom[k] = den;
        }
    }

    /// Directional derivative of the sampled curve along `(δu, δv, δw)`.
    #[allow(clippy::too_many_arguments)]
    pub fn jacobian_apply_into(
        &self,
        u: &[T],
        v: &[T],
        w: &[T],
        curve: &[Complex<T>],
        denom: &[T],
        direction: &[T],
        out: &mut [Complex<T>],
    ) {
        let n = self.count;
        let (du, rest) = direction.split_at(n);
        let (dv, dw) = rest.split_at(n);
        for k in 0..self.grid.len() {
            let (s, nb) = self.node(k);
            let mut acc = Complex::new(T::zero(), T::zero());
            for (i, &b) in nb.iter().enumerate() {
                let j = s + i;
                let r = w[j] * b / denom[k];
                acc = acc + Complex::new(du[j], dv[j]) * r;
                acc = acc + (Complex::new(u[j], v[j]) - curve[k]) * (dw[j] * b / denom[k]);
            }
            out[k] = acc;
        }
    }

    /// Transpose of [`BasisCache::jacobian_apply_into`] for the real pairing
    /// `Re⟨J d, z⟩_X`; accumulates into `grad` (length `3n`).
    #[allow(clippy::too_many_arguments)]
    pub fn jacobian_adjoint_add(
        &self,
        u: &[T],
        v: &[T],
        w: &[T],
        curve: &[Complex<T>],
        denom: &[T],
        z: &[Complex<T>],
        grad: &mut [T],
    ) {
        let n = self.count;
        for k in 0..self.grid.len() {
            let (s, nb) = self.node(k);
            let zk = z[k] * self.grid.weight(k);
            for (i, &b) in nb.iter().enumerate() {
                let j = s + i;
                let r = w[j] * b / denom[k];
                grad[j] = grad[j] + r * zk.re;
                grad[n + j] = grad[n + j] + r * zk.im;
                let diff = Complex::new(u[j], v[j]) - curve[k];
                grad[2 * n + j] = grad[2 * n + j] + b / denom[k] * (diff * zk.conj()).re;
            }
        }
    }
}

type CurveParts<T> = (BasisCache<T>, Vec<Complex<T>>, Vec<T>);

fn curve_parts<T: Real>(design: &NurbsDesign<T>, grid: &SampleGrid<T>) -> Result<CurveParts<T>> {
    let cache = BasisCache::new(&design.knots, grid)?;
    let mut curve = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    let mut denom = vec![T::zero(); grid.len()];
    cache.curve_into(&design.u, &design.v, &design.w, &mut curve, &mut denom);
    Ok((cache, curve, denom))
}

/// Samples `γ[x]` on every node of an X grid.
pub fn synthesize<T: Real>(design: &NurbsDesign<T>, grid: &SampleGrid<T>) -> Result<ComplexSignal<T>> {
    let (_, curve, _) = curve_parts(design, grid)?;
    Ok(ComplexSignal::from_parts(*grid, curve))
}

/// `J·d` where `J` is the Jacobian of the sampled curve w.r.t. `(u, v, w)`.
pub fn design_jacobian_apply<T: Real>(
    design: &NurbsDesign<T>,
    grid: &SampleGrid<T>,
    direction: &[T],
) -> Result<ComplexSignal<T>> {
    if direction.len() != 3 * design.len() {
        return Err(Error::dim(format!("direction has {} entries, expected {}", direction.len(), 3 * design.len())));
    }
    let (cache, curve, denom) = curve_parts(design, grid)?;
    let mut out = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    cache.jacobian_apply_into(&design.u, &design.v, &design.w, &curve, &denom, direction, &mut out);
    Ok(ComplexSignal::from_parts(*grid, out))
}

/// `g` with `g·d = Re⟨J d, residual⟩_X` for every direction `d`.
pub fn design_jacobian_adjoint<T: Real>(
    design: &NurbsDesign<T>,
    grid: &SampleGrid<T>,
    residual: &ComplexSignal<T>,
) -> Result<Vec<T>> {
    grid.ensure_same(residual.grid(), "design_jacobian_adjoint")?;
    let (cache, curve, denom) = curve_parts(design, grid)?;
    let mut grad = vec![T::zero(); 3 * design.len()];
    cache.jacobian_adjoint_add(&design.u, &design.v, &design.w, &curve, &denom, residual.values(), &mut grad);
    Ok(grad)
}
