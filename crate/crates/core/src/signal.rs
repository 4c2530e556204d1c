//! Uniform sample grids, sampled signals and the discretized `L²` geometry.
//!
//! The solution space lives on `[0, 1]` with `N` nodes and the data space on
//! `[0, 2]` with `2N − 1` nodes, so both grids share the spacing `1/(N − 1)`.
//! Integrals use the composite trapezoidal rule on the grid.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform grid `t_i = i·length/(count − 1)`, `i = 0..count`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleGrid<T> {
    count: usize,
    length: T,
}

impl<T: Real> SampleGrid<T> {
    pub fn new(count: usize, length: T) -> Result<Self> {
        if count < 2 {
            return Err(Error::arg(format!("grid needs at least 2 nodes, got {count}")));
        }
        if !(length > T::zero()) || !length.is_finite() {
            return Err(Error::arg("grid length must be positive and finite"));
        }
        Ok(Self { count, length })
    }

    /// Solution-space grid over `[0, 1]` with `n` nodes.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, T::one())
    }

    /// Data-space grid over `[0, 2]` with `2n − 1` nodes, matching [`SampleGrid::unit`]`(n)`.
    pub fn image(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg(format!("grid needs at least 2 nodes, got {n}")));
        }
        Self::new(2 * n - 1, T::lit(2.0))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn spacing(&self) -> T {
        self.length / T::from_count(self.count - 1)
    }

    pub fn node(&self, i: usize) -> T {
        T::from_count(i) * self.length / T::from_count(self.count - 1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.count).map(move |i| self.node(i))
    }

    /// Trapezoidal quadrature weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> T {
        let h = self.spacing();
        if i == 0 || i + 1 == self.count {
            h * T::lit(0.5)
        } else {
            h
        }
    }

    pub fn weights(&self) -> Vec<T> {
        (0..self.count).map(|i| self.weight(i)).collect()
    }

    /// Index of the node closest to `t`, clamped to the grid.
    pub fn nearest(&self, t: T) -> usize {
        let pos = (t / self.spacing()).round();
        if pos <= T::zero() {
            return 0;
        }
        pos.to_usize().unwrap_or(usize::MAX).min(self.count - 1)
    }

    pub(crate) fn ensure_same(&self, other: &Self, what: &str) -> Result<()> {
        if self.count != other.count || self.length != other.length {
            return Err(Error::dim(format!(
                "{what}: grid with {} nodes on [0, {}] vs {} nodes on [0, {}]",
                self.count, self.length, other.count, other.length
            )));
        }
        Ok(())
    }
}

/// Complex samples on a [`SampleGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSignal<T> {
    grid: SampleGrid<T>,
    values: Vec<Complex<T>>,
}

/// Real samples on a [`SampleGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct RealSignal<T> {
    grid: SampleGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ComplexSignal<T> {
    pub fn new(grid: SampleGrid<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dim(format!("signal has {} values for a {}-node grid", values.len(), grid.len())));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidData("signal contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: SampleGrid<T>, values: Vec<Complex<T>>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn zeros(grid: SampleGrid<T>) -> Self {
        Self { values: vec![Complex::new(T::zero(), T::zero()); grid.len()], grid }
    }

    pub fn from_fn(grid: SampleGrid<T>, mut f: impl FnMut(T) -> Complex<T>) -> Self {
        let values = grid.nodes().map(&mut f).collect();
        Self { grid, values }
    }

    /// Builds `a·e^{iφ}` from sampled modulus and phase.
    pub fn from_polar(amp: &RealSignal<T>, phase: &RealSignal<T>) -> Result<Self> {
        amp.grid.ensure_same(&phase.grid, "from_polar")?;
        let values = amp.values.iter().zip(&phase.values).map(|(&a, &p)| Complex::from_polar(a, p)).collect();
        Ok(Self::from_parts(amp.grid, values))
    }

    pub fn grid(&self) -> &SampleGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex<T>> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|&z| z * c).collect())
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: Complex<T>, other: &Self) -> Result<Self> {
        self.grid.ensure_same(&other.grid, "add_scaled")?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| a + b * c).collect();
        Ok(Self::from_parts(self.grid, values))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(Complex::new(-T::one(), T::zero()), other)
    }
}

impl<T: Real> RealSignal<T> {
    pub fn new(grid: SampleGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dim(format!("signal has {} values for a {}-node grid", values.len(), grid.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("signal contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_parts(grid: SampleGrid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }

    pub fn from_fn(grid: SampleGrid<T>, mut f: impl FnMut(T) -> T) -> Self {
        let values = grid.nodes().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SampleGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_complex(&self) -> ComplexSignal<T> {
        ComplexSignal::from_parts(self.grid, self.values.iter().map(|&v| Complex::new(v, T::zero())).collect())
    }

    /// Trapezoidal `L²` norm.
    pub fn norm(&self) -> T {
        weighted_sum_sq(&self.grid, self.values.iter().map(|v| *v * *v)).sqrt()
    }

    /// `L²` distance to another real signal on the same grid.
    pub fn distance(&self, other: &Self) -> Result<T> {
        self.grid.ensure_same(&other.grid, "distance")?;
        let sq = self.values.iter().zip(&other.values).map(|(&a, &b)| (a - b) * (a - b));
        Ok(weighted_sum_sq(&self.grid, sq).sqrt())
    }
}

fn weighted_sum_sq<T: Real>(grid: &SampleGrid<T>, sq: impl Iterator<Item = T>) -> T {
    sq.enumerate().map(|(i, v)| grid.weight(i) * v).sum()
}

/// Trapezoidal approximation of `∫ f(t)·conj(g(t)) dt`.
pub fn inner_product<T: Real>(f: &ComplexSignal<T>, g: &ComplexSignal<T>) -> Result<Complex<T>> {
    f.grid.ensure_same(&g.grid, "inner_product")?;
    Ok(f.values
        .iter()
        .zip(&g.values)
        .enumerate()
        .fold(Complex::new(T::zero(), T::zero()), |acc, (i, (&a, &b))| acc + a * b.conj() * f.grid.weight(i)))
}

pub fn norm<T: Real>(f: &ComplexSignal<T>) -> T {
    weighted_sum_sq(&f.grid, f.values.iter().map(|z| z.norm_sqr())).sqrt()
}

pub fn modulus<T: Real>(f: &ComplexSignal<T>) -> RealSignal<T> {
    RealSignal::from_parts(f.grid, f.values.iter().map(|z| z.norm()).collect())
}

/// Principal argument in `(−π, π]`, with `arg 0 := 0`.
pub fn phase<T: Real>(f: &ComplexSignal<T>) -> RealSignal<T> {
    RealSignal::from_parts(f.grid, f.values.iter().map(|&z| principal_arg(z)).collect())
}

pub(crate) fn principal_arg<T: Real>(z: Complex<T>) -> T {
    if z.re == T::zero() && z.im == T::zero() {
        return T::zero();
    }
    let a = z.im.atan2(z.re);
    // atan2(−0, x<0) lands on −π; fold it onto the closed end of the branch.
    if a <= -T::PI() {
        T::PI()
    } else {
        a
    }
}
