//! Kernel-based autoconvolution on the shared grid pair.
//!
//! With `h = 1/(N − 1)`, node `s_m = m·h` integrates over `τ_k` for
//! `k ∈ [max(m − N + 1, 0), min(m, N − 1)]`; the mirror point `s_m − τ_k` is
//! the node `τ_{m−k}`, so no interpolation is ever needed. Each output node is
//! a trapezoidal sum over that index range.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::signal::{ComplexSignal, SampleGrid};

/// Below this many kernel entries the loops run on the calling thread.
const PAR_THRESHOLD: usize = 1 << 17;

/// Complex kernel `k(s_m, τ_k)` on the `(2N − 1) × N` grid, zero outside the
/// parallelogram `{0 ≤ τ ≤ 1, τ ≤ s ≤ τ + 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelGrid<T> {
    n: usize,
    values: Vec<Complex<T>>,
}

/// Whether `(s_m, τ_k)` lies in the kernel support for an `n`-node X grid.
#[inline]
pub fn in_support(n: usize, m: usize, k: usize) -> bool {
    k < n && m >= k && m - k < n
}

#[inline]
fn row_range(n: usize, m: usize) -> (usize, usize) {
    (m.saturating_sub(n - 1), m.min(n - 1))
}

/// Trapezoid coefficient of `τ_k` in the integral for `s_m`.
#[inline]
fn quad_coeff<T: Real>(h: T, lo: usize, hi: usize, k: usize) -> T {
    if lo == hi {
        T::zero()
    } else if k == lo || k == hi {
        h * T::lit(0.5)
    } else {
        h
    }
}

impl<T: Real> KernelGrid<T> {
    /// Wraps row-major values (row `m` ↔ `s_m`, column `k` ↔ `τ_k`).
    ///
    /// Entries outside the support must be exactly zero.
    pub fn new(n: usize, values: Vec<Complex<T>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::arg(format!("kernel grid needs N ≥ 2, got {n}")));
        }
        if values.len() != (2 * n - 1) * n {
            return Err(Error::dim(format!("kernel has {} entries, expected (2·{n} − 1)·{n}", values.len())));
        }
        for m in 0..2 * n - 1 {
            for k in 0..n {
                let z = values[m * n + k];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::InvalidData(format!("kernel entry ({m}, {k}) is not finite")));
                }
                if !in_support(n, m, k) && z != Complex::new(T::zero(), T::zero()) {
                    return Err(Error::InvalidData(format!(
                        "kernel entry ({m}, {k}) lies outside the support but is nonzero"
                    )));
                }
            }
        }
        Ok(Self { n, values })
    }

    /// Samples `k(s, τ)` on the support; entries outside are zero. Not symmetrized.
    pub fn from_fn(n: usize, mut k: impl FnMut(T, T) -> Complex<T>) -> Result<Self> {
        let x = SampleGrid::<T>::unit(n)?;
        let y = SampleGrid::<T>::image(n)?;
        let mut values = vec![Complex::new(T::zero(), T::zero()); (2 * n - 1) * n];
        for m in 0..2 * n - 1 {
            let (lo, hi) = row_range(n, m);
            for kk in lo..=hi {
                values[m * n + kk] = k(y.node(m), x.node(kk));
            }
        }
        Self::new(n, values)
    }

    /// Number of X-grid nodes `N`.
    pub fn grid_count(&self) -> usize {
        self.n
    }

    pub fn x_grid(&self) -> SampleGrid<T> {
        SampleGrid::unit(self.n).expect("validated at construction")
    }

    pub fn y_grid(&self) -> SampleGrid<T> {
        SampleGrid::image(self.n).expect("validated at construction")
    }

    #[inline]
    pub fn at(&self, m: usize, k: usize) -> Complex<T> {
        self.values[m * self.n + k]
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    fn check_x(&self, f: &ComplexSignal<T>, what: &str) -> Result<()> {
        self.x_grid().ensure_same(f.grid(), what)
    }
}

/// `(k(s, τ) + k(s, s − τ))/2` on the grid. Idempotent.
pub fn symmetrize_kernel<T: Real>(k: &KernelGrid<T>) -> KernelGrid<T> {
    let n = k.n;
    let half = T::lit(0.5);
    let mut values = k.values.clone();
    for m in 0..2 * n - 1 {
        let (lo, hi) = row_range(n, m);
        for kk in lo..=hi {
            values[m * n + kk] = (k.at(m, kk) + k.at(m, m - kk)) * half;
        }
    }
    KernelGrid { n, values }
}

/// `max |k(s, τ)|` over the support.
pub fn kernel_sup<T: Real>(k: &KernelGrid<T>) -> T {
    k.values.iter().fold(T::zero(), |acc, z| acc.max(z.norm()))
}

/// `Σ_k c_{mk} k(s_m, τ_k) a(s_m − τ_k) b(τ_k)` for every `m`.
fn bilinear<T: Real>(kernel: &KernelGrid<T>, a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    let n = kernel.n;
    let h = kernel.x_grid().spacing();
    let row = |m: usize| {
        let (lo, hi) = row_range(n, m);
        let base = &kernel.values[m * n..(m + 1) * n];
        let mut acc = Complex::new(T::zero(), T::zero());
        for k in lo..=hi {
            acc = acc + base[k] * a[m - k] * b[k] * quad_coeff(h, lo, hi, k);
        }
        acc
    };
    if kernel.values.len() >= PAR_THRESHOLD {
        (0..2 * n - 1).into_par_iter().map(row).collect()
    } else {
        (0..2 * n - 1).map(row).collect()
    }
}

/// Discrete autoconvolution `F(f)` on the Y grid.
pub fn forward<T: Real>(k: &KernelGrid<T>, f: &ComplexSignal<T>) -> Result<ComplexSignal<T>> {
    k.check_x(f, "forward")?;
    let v = bilinear(k, f.values(), f.values());
    Ok(ComplexSignal::from_parts(k.y_grid(), v))
}

/// Fréchet derivative `F′(f)h = 2∫ k(s, τ) f(s − τ) h(τ) dτ`.
pub fn frechet_apply<T: Real>(
    k: &KernelGrid<T>,
    f: &ComplexSignal<T>,
    h: &ComplexSignal<T>,
) -> Result<ComplexSignal<T>> {
    k.check_x(f, "frechet_apply")?;
    k.check_x(h, "frechet_apply")?;
    let two = T::lit(2.0);
    let v = bilinear(k, f.values(), h.values()).into_iter().map(|z| z * two).collect();
    Ok(ComplexSignal::from_parts(k.y_grid(), v))
}

/// Adjoint of [`frechet_apply`] with respect to the trapezoidal inner products.
///
/// This is the conjugate transpose of the discrete derivative, weighted by the
/// Y quadrature and divided by the X quadrature, so
/// `⟨F′(f)h, r⟩_Y = ⟨h, F′(f)*r⟩_X` holds to rounding.
pub fn frechet_adjoint_apply<T: Real>(
    k: &KernelGrid<T>,
    f: &ComplexSignal<T>,
    r: &ComplexSignal<T>,
) -> Result<ComplexSignal<T>> {
    k.check_x(f, "frechet_adjoint_apply")?;
    k.y_grid().ensure_same(r.grid(), "frechet_adjoint_apply")?;
    let n = k.n;
    let x = k.x_grid();
    let y = k.y_grid();
    let h = x.spacing();
    let two = T::lit(2.0);
    let fv = f.values();
    let rv = r.values();
    let col = |kk: usize| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for m in kk..kk + n {
            let (lo, hi) = row_range(n, m);
            let c = quad_coeff(h, lo, hi, kk);
            acc = acc + (k.at(m, kk) * fv[m - kk]).conj() * rv[m] * (c * y.weight(m));
        }
        acc * (two / x.weight(kk))
    };
    let v = if k.values.len() >= PAR_THRESHOLD {
        (0..n).into_par_iter().map(col).collect()
    } else {
        (0..n).map(col).collect()
    };
    Ok(ComplexSignal::from_parts(x, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{inner_product, norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn random_signal(grid: SampleGrid<f64>, rng: &mut ChaCha8Rng) -> ComplexSignal<f64> {
        ComplexSignal::from_fn(grid, |_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_symmetric_kernel(n: usize, rng: &mut ChaCha8Rng) -> KernelGrid<f64> {
        let k =
            KernelGrid::from_fn(n, |_, _| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap();
        symmetrize_kernel(&k)
    }

    #[test]
    fn kernel_rejects_values_outside_support() {
        let mut v = vec![C::new(0.0, 0.0); 5 * 3];
        v[1] = C::new(1.0, 0.0); // s = 0, τ = 0.5
        assert!(matches!(KernelGrid::new(3, v), Err(Error::InvalidData(_))));
        assert!(matches!(KernelGrid::<f64>::new(3, vec![C::new(0.0, 0.0); 14]), Err(Error::Dimension(_))));
    }

    #[test]
    fn symmetrize_examples() {
        let zero = KernelGrid::from_fn(7, |_, _| C::new(0.0, 0.0)).unwrap();
        assert_eq!(symmetrize_kernel(&zero), zero);

        let n = 11;
        let k = KernelGrid::from_fn(n, |_, t| C::new(t, 0.0)).unwrap();
        let ks = symmetrize_kernel(&k);
        let y = ks.y_grid();
        for m in 0..2 * n - 1 {
            for kk in 0..n {
                if in_support(n, m, kk) {
                    assert!((ks.at(m, kk).re - y.node(m) / 2.0).abs() < 1e-15);
                } else {
                    assert_eq!(ks.at(m, kk), C::new(0.0, 0.0));
                }
            }
        }
        assert_eq!(symmetrize_kernel(&ks), ks);
    }

    #[test]
    fn kernel_sup_examples() {
        let one = KernelGrid::from_fn(9, |_, _| C::new(1.0, 0.0)).unwrap();
        assert_eq!(kernel_sup(&one), 1.0);
        let zero = KernelGrid::from_fn(9, |_, _| C::new(0.0, 0.0)).unwrap();
        assert_eq!(kernel_sup(&zero), 0.0);
        let lin = KernelGrid::from_fn(9, |s, _| C::new(0.0, 2.0 - s)).unwrap();
        assert_eq!(kernel_sup(&lin), 2.0);
    }

    #[test]
    fn triangle_from_unit_kernel() {
        let n = 1000;
        let k = KernelGrid::from_fn(n, |_, _| C::new(1.0, 0.0)).unwrap();
        let f = ComplexSignal::from_fn(k.x_grid(), |_| C::new(1.0, 0.0));
        let g = forward(&k, &f).unwrap();
        let y = k.y_grid();
        for (m, z) in g.values().iter().enumerate() {
            let s = y.node(m);
            let exact = s.min(1.0) - (s - 1.0).max(0.0);
            assert!((z.re - exact).abs() <= 1e-10 && z.im == 0.0, "m = {m}");
        }
        assert!((g.values()[499].re - 0.5).abs() < 1e-3);
        assert!((g.values()[999].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_inputs_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = random_symmetric_kernel(20, &mut rng);
        let zero = ComplexSignal::zeros(k.x_grid());
        let h = random_signal(k.x_grid(), &mut rng);
        assert_eq!(norm(&forward(&k, &zero).unwrap()), 0.0);
        assert_eq!(norm(&frechet_apply(&k, &zero, &h).unwrap()), 0.0);
        let r0 = ComplexSignal::zeros(k.y_grid());
        assert_eq!(norm(&frechet_adjoint_apply(&k, &h, &r0).unwrap()), 0.0);
    }

    #[test]
    fn frechet_at_self_doubles_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = random_symmetric_kernel(30, &mut rng);
        let f = random_signal(k.x_grid(), &mut rng);
        let lhs = frechet_apply(&k, &f, &f).unwrap();
        let rhs = forward(&k, &f).unwrap().scale(C::new(2.0, 0.0));
        assert!(norm(&lhs.sub(&rhs).unwrap()) <= 1e-14 * norm(&rhs));
    }

    #[test]
    fn frechet_matches_difference_quotient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = random_symmetric_kernel(40, &mut rng);
        let f = random_signal(k.x_grid(), &mut rng);
        let h = random_signal(k.x_grid(), &mut rng);
        let d = frechet_apply(&k, &f, &h).unwrap();
        let g0 = forward(&k, &f).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let g1 = forward(&k, &f.add_scaled(C::new(eps, 0.0), &h).unwrap()).unwrap();
            let fd = g1.sub(&g0).unwrap().scale(C::new(1.0 / eps, 0.0));
            let err = norm(&fd.sub(&d).unwrap());
            // exact error is eps·F(h)
            let expected = eps * norm(&forward(&k, &h).unwrap());
            assert!((err - expected).abs() <= 1e-8 * (1.0 + expected));
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn adjoint_of_unit_problem_is_two_inside() {
        let n = 50;
        let k = KernelGrid::from_fn(n, |_, _| C::new(1.0, 0.0)).unwrap();
        let f = ComplexSignal::from_fn(k.x_grid(), |_| C::new(1.0, 0.0));
        let r = ComplexSignal::from_fn(k.y_grid(), |_| C::new(1.0, 0.0));
        let a = frechet_adjoint_apply(&k, &f, &r).unwrap();
        for z in &a.values()[1..n - 1] {
            assert!((z - C::new(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let k = random_symmetric_kernel(33, &mut rng);
            let f = random_signal(k.x_grid(), &mut rng);
            let h = random_signal(k.x_grid(), &mut rng);
            let r = random_signal(k.y_grid(), &mut rng);
            let lhs = inner_product(&frechet_apply(&k, &f, &h).unwrap(), &r).unwrap();
            let rhs = inner_product(&h, &frechet_adjoint_apply(&k, &f, &r).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn scaling_and_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = random_symmetric_kernel(25, &mut rng);
        let f = random_signal(k.x_grid(), &mut rng);
        let g = forward(&k, &f).unwrap();
        assert_eq!(forward(&k, &f.scale(C::new(-1.0, 0.0))).unwrap(), g);
        let c = C::new(0.7, -1.3);
        let gc = forward(&k, &f.scale(c)).unwrap();
        assert!(norm(&gc.sub(&g.scale(c * c)).unwrap()) <= 1e-12 * norm(&gc));
    }

    #[test]
    fn parallel_and_serial_paths_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 300; // above PAR_THRESHOLD
        let k = random_symmetric_kernel(n, &mut rng);
        let f = random_signal(k.x_grid(), &mut rng);
        let par = forward(&k, &f).unwrap();
        let serial = bilinear_serial(&k, f.values());
        assert_eq!(par.values(), &serial[..]);
    }

    fn bilinear_serial(k: &KernelGrid<f64>, f: &[C]) -> Vec<C> {
        let n = k.grid_count();
        let h = k.x_grid().spacing();
        (0..2 * n - 1)
            .map(|m| {
                let (lo, hi) = row_range(n, m);
                let mut acc = C::new(0.0, 0.0);
                for kk in lo..=hi {
                    acc += k.at(m, kk) * f[m - kk] * f[kk] * quad_coeff(h, lo, hi, kk);
                }
                acc
            })
            .collect()
    }

    #[test]
    fn dimension_errors() {
        let k = KernelGrid::from_fn(10, |_, _| C::new(1.0, 0.0)).unwrap();
        let f = ComplexSignal::zeros(SampleGrid::unit(11).unwrap());
        assert!(forward(&k, &f).is_err());
        let f = ComplexSignal::zeros(k.x_grid());
        assert!(frechet_adjoint_apply(&k, &f, &f).is_err());
    }
}
