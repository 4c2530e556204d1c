//! Synthetic kernels, target pulses, noise and frequency-axis helpers.
//!
//! Randomness comes from `ChaCha8Rng` (the `rand_chacha` crate), seeded with a
//! `u64`, so perturbations are reproducible across platforms and scalar types:
//! samples are drawn in `f64` and converted afterwards.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::functionals::MODULUS_FLOOR;
use crate::operator::{forward, symmetrize_kernel, KernelGrid};
use crate::scalar::Real;
use crate::signal::{norm, phase, ComplexSignal, RealSignal, SampleGrid};

/// Kernel families available from [`make_kernel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KernelKind {
    /// `k ≡ 1`: plain autoconvolution.
    Unit,
    /// `k(s, τ) = κ(τ) κ(s − τ)`.
    Separable,
    /// Smooth non-separable complex surrogate.
    #[default]
    GaussPhase,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Unit, KernelKind::Separable, KernelKind::GaussPhase];
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Unit => "unit",
            KernelKind::Separable => "separable",
            KernelKind::GaussPhase => "gauss-phase",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unit" => Ok(KernelKind::Unit),
            "separable" => Ok(KernelKind::Separable),
            "gauss-phase" | "gaussphase" | "gauss_phase" => Ok(KernelKind::GaussPhase),
            other => Err(Error::arg(format!("unknown kernel kind `{other}`"))),
        }
    }
}

/// Parameters of the built-in kernels.
///
/// The separable profile is `κ(τ) = exp(−(τ − kappa_center)² / kappa_spread)`;
/// the Gaussian-phase kernel is
/// `A exp(−((s − s₀)² + (τ − τ₀)²)/σ²) exp(i(c₁ s + c₂ τ (s − τ)))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams<T> {
    pub kappa_center: T,
    pub kappa_spread: T,
    pub amplitude: T,
    pub s0: T,
    pub tau0: T,
    pub sigma: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> Default for KernelParams<T> {
    fn default() -> Self {
        Self {
            kappa_center: T::lit(0.5),
            kappa_spread: T::lit(0.08),
            amplitude: T::one(),
            s0: T::one(),
            tau0: T::lit(0.5),
            sigma: T::lit(0.35),
            c1: T::lit(2.0),
            c2: T::lit(4.0),
        }
    }
}

impl<T: Real> KernelParams<T> {
    fn validate(&self) -> Result<()> {
        let all =
            [self.kappa_center, self.kappa_spread, self.amplitude, self.s0, self.tau0, self.sigma, self.c1, self.c2];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("kernel parameters must be finite"));
        }
        if !(self.kappa_spread > T::zero()) || !(self.sigma > T::zero()) {
            return Err(Error::arg("kernel spreads must be positive"));
        }
        Ok(())
    }
}

/// Samples a built-in kernel on the `(2N − 1) × N` grid, symmetrized.
pub fn make_kernel<T: Real>(kind: KernelKind, params: &KernelParams<T>, n: usize) -> Result<KernelGrid<T>> {
    params.validate()?;
    let raw = match kind {
        KernelKind::Unit => KernelGrid::from_fn(n, |_, _| Complex::new(T::one(), T::zero()))?,
        KernelKind::Separable => {
            let (c, w) = (params.kappa_center, params.kappa_spread);
            return separable_kernel(n, |t: T| Complex::new((-(t - c).powi(2) / w).exp(), T::zero()));
        }
        KernelKind::GaussPhase => {
            let p = *params;
            let s2 = p.sigma * p.sigma;
            KernelGrid::from_fn(n, |s: T, t: T| {
                let env = p.amplitude * (-((s - p.s0).powi(2) + (t - p.tau0).powi(2)) / s2).exp();
                Complex::from_polar(env, p.c1 * s + p.c2 * t * (s - t))
            })?
        }
    };
    Ok(symmetrize_kernel(&raw))
}

/// `k(s, τ) = κ(τ) κ(s − τ)` for an arbitrary profile on `[0, 1]`.
pub fn separable_kernel<T: Real>(n: usize, kappa: impl Fn(T) -> Complex<T>) -> Result<KernelGrid<T>> {
    let raw = KernelGrid::from_fn(n, |s, t| kappa(t) * kappa((s - t).max(T::zero()).min(T::one())))?;
    Ok(symmetrize_kernel(&raw))
}

/// Target pulse families available from [`make_target`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TargetKind {
    /// Gaussian amplitude with cubic phase.
    #[default]
    GaussChirp,
    /// Gaussian amplitude with quintic phase.
    Polyphase,
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::GaussChirp => "gauss-chirp",
            TargetKind::Polyphase => "polyphase",
        })
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gauss-chirp" | "gausschirp" | "gauss_chirp" => Ok(TargetKind::GaussChirp),
            "polyphase" => Ok(TargetKind::Polyphase),
            other => Err(Error::arg(format!("unknown target kind `{other}`"))),
        }
    }
}

/// Width of the Gaussian amplitude `exp(−(τ − ½)²/(2 w²))`; gives `a(0) = a(1) ≈ 3.3e−9`.
pub const TARGET_WIDTH: f64 = 0.08;

/// Phase coefficients in powers of `(τ − ½)`, constant term first.
pub const GAUSS_CHIRP_PHASE: [f64; 4] = [0.0, 0.0, 20.0, 40.0];
pub const POLYPHASE_PHASE: [f64; 6] = [0.0, 1.0, 15.0, -30.0, -200.0, 800.0];

/// Amplitude and phase of the target as functions of `τ`.
pub fn target_profile(kind: TargetKind, tau: f64) -> (f64, f64) {
    let x = tau - 0.5;
    let a = (-x * x / (2.0 * TARGET_WIDTH * TARGET_WIDTH)).exp();
    let coeffs: &[f64] = match kind {
        TargetKind::GaussChirp => &GAUSS_CHIRP_PHASE,
        TargetKind::Polyphase => &POLYPHASE_PHASE,
    };
    let phi = coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    (a, phi)
}

/// Samples the target `f†(τ) = a(τ) e^{iφ(τ)}` on the `N`-node X grid.
pub fn make_target<T: Real>(kind: TargetKind, n: usize) -> Result<ComplexSignal<T>> {
    let grid = SampleGrid::unit(n)?;
    Ok(ComplexSignal::from_fn(grid, |t| {
        let (a, phi) = target_profile(kind, t.as_f64());
        Complex::from_polar(T::lit(a), T::lit(phi))
    }))
}

fn gaussian_draws(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

fn check_level<T: Real>(level: T) -> Result<()> {
    if !(level >= T::zero()) || !level.is_finite() {
        return Err(Error::arg(format!("noise level must be finite and ≥ 0, got {level}")));
    }
    Ok(())
}

/// Seeded complex Gaussian perturbation with `L²` norm `target_norm`.
pub fn complex_noise<T: Real>(grid: SampleGrid<T>, target_norm: T, seed: u64) -> ComplexSignal<T> {
    let draws = gaussian_draws(2 * grid.len(), seed);
    let raw = ComplexSignal::from_parts(
        grid,
        draws.chunks_exact(2).map(|c| Complex::new(T::lit(c[0]), T::lit(c[1]))).collect(),
    );
    let nr = norm(&raw);
    if nr > T::zero() {
        raw.scale(Complex::new(target_norm / nr, T::zero()))
    } else {
        raw
    }
}

/// Seeded real Gaussian perturbation with `L²` norm `target_norm`.
pub fn real_noise<T: Real>(grid: SampleGrid<T>, target_norm: T, seed: u64) -> RealSignal<T> {
    let draws = gaussian_draws(grid.len(), seed);
    let raw = RealSignal::from_parts(grid, draws.into_iter().map(T::lit).collect());
    let nr = raw.norm();
    let c = if nr > T::zero() { target_norm / nr } else { T::zero() };
    RealSignal::from_parts(grid, raw.values().iter().map(|&v| v * c).collect())
}

/// `signal + ϑ` with `‖ϑ‖ = level·‖signal‖` exactly.
pub fn add_relative_noise<T: Real>(signal: &ComplexSignal<T>, level: T, seed: u64) -> Result<ComplexSignal<T>> {
    check_level(level)?;
    if level == T::zero() {
        return Ok(signal.clone());
    }
    let noise = complex_noise(*signal.grid(), level * norm(signal), seed);
    signal.add_scaled(Complex::new(T::one(), T::zero()), &noise)
}

/// Real-valued counterpart of [`add_relative_noise`].
pub fn add_relative_noise_real<T: Real>(signal: &RealSignal<T>, level: T, seed: u64) -> Result<RealSignal<T>> {
    check_level(level)?;
    if level == T::zero() {
        return Ok(signal.clone());
    }
    let noise = real_noise(*signal.grid(), level * signal.norm(), seed);
    let values = signal.values().iter().zip(noise.values()).map(|(&a, &b)| a + b).collect();
    RealSignal::new(*signal.grid(), values)
}

/// Phase of `y`, zeroed where `|y| < 1e−12`.
pub fn clean_phase<T: Real>(y: &ComplexSignal<T>) -> RealSignal<T> {
    let floor = T::lit(MODULUS_FLOOR);
    let ph = phase(y);
    let values =
        y.values().iter().zip(ph.values()).map(|(z, &p)| if z.norm() < floor { T::zero() } else { p }).collect();
    RealSignal::from_parts(*y.grid(), values)
}

/// `ψδ = arg y + ϑ` with `‖ϑ‖ = noise_level·‖arg y‖`.
pub fn make_phase_data<T: Real>(y: &ComplexSignal<T>, noise_level: T, seed: u64) -> Result<RealSignal<T>> {
    add_relative_noise_real(&clean_phase(y), noise_level, seed)
}

/// Relative noise levels per data channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseLevels<T> {
    /// Noise on the full data `y = F(f†)`; the phase data is read off the noisy `y`.
    pub data: T,
    /// Noise on the measured amplitude `a`.
    pub amp: T,
    /// Additional additive noise on the phase data.
    pub phase: T,
}

impl<T: Real> NoiseLevels<T> {
    pub fn none() -> Self {
        Self { data: T::zero(), amp: T::zero(), phase: T::zero() }
    }

    /// `level` on `y` and `a`, none added to the phase directly.
    pub fn uniform(level: T) -> Self {
        Self { data: level, amp: level, phase: T::zero() }
    }
}

/// A synthetic experiment: exact target plus the (possibly noisy) data derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData<T> {
    pub target: ComplexSignal<T>,
    pub exact_image: ComplexSignal<T>,
    pub image: ComplexSignal<T>,
    pub amp: RealSignal<T>,
    pub phase: RealSignal<T>,
}

/// Builds all data channels for `target` under `kernel`.
///
/// Channel seeds are `seed`, `seed + 1` and `seed + 2` for `y`, `a` and `ψ`.
pub fn make_data<T: Real>(
    kernel: &KernelGrid<T>,
    target: &ComplexSignal<T>,
    noise: &NoiseLevels<T>,
    seed: u64,
) -> Result<SyntheticData<T>> {
    let exact_image = forward(kernel, target)?;
    let image = add_relative_noise(&exact_image, noise.data, seed)?;
    let exact_amp = RealSignal::from_parts(*target.grid(), target.values().iter().map(|z| z.norm()).collect());
    let amp = add_relative_noise_real(&exact_amp, noise.amp, seed.wrapping_add(1))?;
    let phase = make_phase_data(&image, noise.phase, seed.wrapping_add(2))?;
    Ok(SyntheticData { target: target.clone(), exact_image, image, amp, phase })
}

/// `h_n(τ) = exp(i n² τ²)` on `N` nodes; requires `N ≥ 10 n²`.
pub fn oscillation_probe<T: Real>(n: usize, big_n: usize) -> Result<ComplexSignal<T>> {
    if n == 0 {
        return Err(Error::arg("probe index n must be ≥ 1"));
    }
    if big_n < 10 * n * n {
        return Err(Error::arg(format!("N = {big_n} under-resolves the probe with n = {n}; need N ≥ {}", 10 * n * n)));
    }
    let grid = SampleGrid::unit(big_n)?;
    let n2 = T::from_count(n * n);
    Ok(ComplexSignal::from_fn(grid, |t| Complex::from_polar(T::one(), n2 * t * t)))
}

/// One row of the ill-posedness experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeRow<T> {
    pub n: usize,
    /// `‖r h_n‖_X`.
    pub perturbation: T,
    /// `‖F(f + r h_n) − F(f)‖_Y`.
    pub image_change: T,
}

/// Perturbs `f` by `r h_n` for each `n` and records the image change.
pub fn illposedness_probe<T: Real>(
    kernel: &KernelGrid<T>,
    f: &ComplexSignal<T>,
    r: T,
    ns: &[usize],
) -> Result<Vec<ProbeRow<T>>> {
    let base = forward(kernel, f)?;
    ns.iter()
        .map(|&n| {
            let h = oscillation_probe(n, f.len())?;
            let pert = f.add_scaled(Complex::new(r, T::zero()), &h)?;
            let img = forward(kernel, &pert)?;
            Ok(ProbeRow { n, perturbation: r.abs() * norm(&h), image_change: norm(&img.sub(&base)?) })
        })
        .collect()
}

/// Which normalized axis a physical frequency is mapped to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    X,
    Y,
}

/// Physical frequency band of the measurement, in Hz.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyBand<T> {
    pub omega_low: T,
    pub omega_up: T,
    pub omega_cw: T,
}

impl<T: Real> Default for FrequencyBand<T> {
    fn default() -> Self {
        Self { omega_low: T::lit(3.5e15), omega_up: T::lit(4.1e15), omega_cw: T::lit(3.86e15) }
    }
}

impl<T: Real> FrequencyBand<T> {
    pub fn new(omega_low: T, omega_up: T, omega_cw: T) -> Result<Self> {
        if !(omega_low < omega_up) || !omega_low.is_finite() || !omega_up.is_finite() || !omega_cw.is_finite() {
            return Err(Error::arg("frequency band needs finite omega_low < omega_up"));
        }
        Ok(Self { omega_low, omega_up, omega_cw })
    }
}

/// Maps `ω` to `τ ∈ [0, 1]` (X) or the shifted sum frequency `ω_SD` to `s ∈ [0, 2]` (Y).
pub fn normalize_frequency_axis<T: Real>(band: &FrequencyBand<T>, omega: T, space: Space) -> Result<T> {
    let width = band.omega_up - band.omega_low;
    let (value, upper) = match space {
        Space::X => ((omega - band.omega_low) / width, T::one()),
        Space::Y => ((omega + band.omega_cw - T::lit(2.0) * band.omega_low) / width, T::lit(2.0)),
    };
    // Allow a few ulps of slack from the subtraction of nearly equal numbers.
    let slack = T::lit(8.0) * T::epsilon() * upper;
    if !(value >= -slack && value <= upper + slack) {
        return Err(Error::arg(format!("frequency {omega} lies outside the band for {space:?}")));
    }
    Ok(value.max(T::zero()).min(upper))
}
