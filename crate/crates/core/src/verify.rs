//! Self-checks of the numerical building blocks.
//!
//! Each check exercises one identity or invariant on seeded random inputs
//! and reports the worst observed deviation against its tolerance.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datagen::{
    add_relative_noise, illposedness_probe, make_kernel, make_target, KernelKind, KernelParams, TargetKind,
};
use crate::error::Result;
use crate::functionals::{
    phase_pseudometric, weight_barrier, weight_barrier_derivative, DataTerm, ErrorMetrics, Evaluator, FitProblem,
    PhaseFidelity, Weights,
};
use crate::nurbs::{
    bspline_basis, design_jacobian_adjoint, design_jacobian_apply, open_uniform_knots, rational_basis, synthesize,
    KnotVector, NurbsDesign,
};
use crate::operator::{
    forward, frechet_adjoint_apply, frechet_apply, in_support, kernel_sup, symmetrize_kernel, KernelGrid,
};
use crate::optimizer::ContinuationSchedule;
use crate::signal::{inner_product, modulus, norm, phase, ComplexSignal, RealSignal, SampleGrid};

type C = Complex<f64>;

/// Outcome of one named check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Sizes and seed for [`run_checks`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub seed: u64,
    /// X-grid size for operator checks.
    pub grid: usize,
    /// Random trials per check.
    pub trials: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { seed: 2024, grid: 200, trials: 20 }
    }
}

type CheckFn = fn(&CheckOptions, &mut ChaCha8Rng) -> Result<(bool, String)>;

const CHECKS: [(&str, CheckFn); 21] = [
    ("inner-product-norm", inner_product_norm),
    ("cauchy-schwarz", cauchy_schwarz),
    ("polar-reconstruction", polar_reconstruction),
    ("kernel-symmetry-support", kernel_symmetry),
    ("triangle-oracle", triangle_oracle),
    ("remainder-identity", remainder_identity),
    ("adjoint-identity", adjoint_identity),
    ("frechet-derivative", frechet_derivative),
    ("nonlinearity-bound", nonlinearity_bound),
    ("partition-of-unity", partition_of_unity),
    ("endpoint-interpolation", endpoint_interpolation),
    ("weight-rescaling", weight_rescaling),
    ("quarter-circle", quarter_circle),
    ("design-jacobian", design_jacobian),
    ("gradient-full-data", gradient_full),
    ("gradient-phase-only", gradient_phase),
    ("barrier-regularity", barrier_regularity),
    ("pseudometric-bound", pseudometric_bound),
    ("error-metric-schedule", metric_schedule),
    ("noise-ratio", noise_ratio),
    ("illposedness-probe", probe_decay),
];

/// Names of all checks in execution order.
pub fn check_names() -> Vec<&'static str> {
    CHECKS.iter().map(|(n, _)| *n).collect()
}

/// Runs the named checks (all when `only` is empty). Unknown names are an error.
pub fn run_checks(opts: &CheckOptions, only: &[String]) -> Result<Vec<CheckResult>> {
    for name in only {
        if !CHECKS.iter().any(|(n, _)| n == name) {
            return Err(crate::error::Error::arg(format!("unknown check `{name}`")));
        }
    }
    let mut out = Vec::new();
    for (i, (name, check)) in CHECKS.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
        let (passed, detail) = match check(opts, &mut rng) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        out.push(CheckResult { name, passed, detail });
    }
    Ok(out)
}

fn verdict(worst: f64, tol: f64) -> (bool, String) {
    (worst <= tol, format!("worst {worst:.3e} (tolerance {tol:.1e})"))
}

fn random_signal(grid: SampleGrid<f64>, rng: &mut ChaCha8Rng) -> ComplexSignal<f64> {
    ComplexSignal::from_fn(grid, |_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn kernels(n: usize) -> Result<Vec<KernelGrid<f64>>> {
    KernelKind::ALL.iter().map(|&k| make_kernel(k, &KernelParams::default(), n)).collect()
}

fn inner_product_norm(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for grid in [SampleGrid::unit(o.grid)?, SampleGrid::image(o.grid)?] {
        for _ in 0..o.trials {
            let f = random_signal(grid, rng);
            let n2 = norm(&f).powi(2);
            worst = worst.max((n2 - inner_product(&f, &f)?.re).abs() / n2);
        }
    }
    Ok(verdict(worst, 1e-14))
}

fn cauchy_schwarz(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = SampleGrid::unit(o.grid)?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..5 * o.trials {
        let (f, g) = (random_signal(grid, rng), random_signal(grid, rng));
        let c = rng.random_range(0.1..3.0) * C::from_polar(1.0, rng.random_range(-PI..PI));
        worst = worst.max(inner_product(&f, &g)?.norm() - norm(&f) * norm(&g) * (1.0 + 1e-14));
        let lhs = modulus(&f.scale(c));
        let rhs = modulus(&f);
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            worst = worst.max((a - c.norm() * b).abs() - 1e-14 * a.max(1.0));
        }
    }
    Ok((worst <= 0.0, format!("max excess {worst:.3e} (must be ≤ 0)")))
}

fn polar_reconstruction(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = SampleGrid::unit(o.grid)?;
    let mut worst = 0.0f64;
    for _ in 0..o.trials {
        let f = random_signal(grid, rng);
        let g = ComplexSignal::from_polar(&modulus(&f), &phase(&f))?;
        for (a, b) in f.values().iter().zip(g.values()) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok(verdict(worst, 1e-12))
}

fn kernel_symmetry(o: &CheckOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let n = o.grid.min(120);
    let mut worst = 0.0f64;
    for k in kernels(n)? {
        for m in 0..2 * n - 1 {
            for j in 0..n {
                if !in_support(n, m, j) {
                    if k.at(m, j) != C::new(0.0, 0.0) {
                        worst = f64::INFINITY;
                    }
                } else if m >= j && in_support(n, m, m - j) {
                    worst = worst.max((k.at(m, j) - k.at(m, m - j)).norm());
                }
            }
        }
        worst = worst.max(
            symmetrize_kernel(&k).values().iter().zip(k.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max),
        );
    }
    Ok(verdict(worst, 1e-15))
}

fn triangle_oracle(_: &CheckOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let n = 1000;
    let k = make_kernel(KernelKind::Unit, &KernelParams::default(), n)?;
    let one = ComplexSignal::from_fn(k.x_grid(), |_| C::new(1.0, 0.0));
    let g = forward(&k, &one)?;
    let worst = g
        .grid()
        .nodes()
        .zip(g.values())
        .map(|(s, v)| (v - C::new(s.min(1.0) - (s - 1.0).max(0.0), 0.0)).norm())
        .fold(0.0, f64::max);
    Ok(verdict(worst, 1e-10))
}

fn remainder_identity(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in kernels(o.grid)? {
        for _ in 0..o.trials {
            let (f, h) = (random_signal(k.x_grid(), rng), random_signal(k.x_grid(), rng));
            let fh = forward(&k, &h)?;
            let lhs = forward(&k, &f.add_scaled(C::new(1.0, 0.0), &h)?)?
                .sub(&forward(&k, &f)?)?
                .sub(&frechet_apply(&k, &f, &h)?)?
                .sub(&fh)?;
            worst = worst.max(norm(&lhs) / (1.0 + norm(&fh)));
        }
    }
    Ok(verdict(worst, 1e-12))
}

fn adjoint_identity(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in kernels(o.grid)? {
        for _ in 0..o.trials {
            let (f, h) = (random_signal(k.x_grid(), rng), random_signal(k.x_grid(), rng));
            let r = random_signal(k.y_grid(), rng);
            let jh = frechet_apply(&k, &f, &h)?;
            let js = frechet_adjoint_apply(&k, &f, &r)?;
            let lhs = inner_product(&jh, &r)?;
            let rhs = inner_product(&h, &js)?;
            let scale = norm(&jh) * norm(&r) + norm(&h) * norm(&js);
            worst = worst.max((lhs - rhs).norm() / scale.max(f64::MIN_POSITIVE));
        }
    }
    Ok(verdict(worst, 1e-12))
}

fn frechet_derivative(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    // F is quadratic, so the central difference is exact up to rounding.
    let mut worst = 0.0f64;
    for k in kernels(o.grid.min(100))? {
        let (f, h) = (random_signal(k.x_grid(), rng), random_signal(k.x_grid(), rng));
        let t = 1e-3;
        let fp = forward(&k, &f.add_scaled(C::new(t, 0.0), &h)?)?;
        let fm = forward(&k, &f.add_scaled(C::new(-t, 0.0), &h)?)?;
        let fd = fp.sub(&fm)?.scale(C::new(0.5 / t, 0.0));
        let an = frechet_apply(&k, &f, &h)?;
        worst = worst.max(norm(&fd.sub(&an)?) / norm(&an));
    }
    Ok(verdict(worst, 1e-8))
}

fn nonlinearity_bound(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in kernels(o.grid)? {
        let kbar = kernel_sup(&k);
        for _ in 0..o.trials {
            let h = random_signal(k.x_grid(), rng);
            worst = worst.max(norm(&forward(&k, &h)?) / (kbar * norm(&h).powi(2)));
        }
    }
    Ok((worst <= 1.05, format!("max ‖F(h)‖ / (k̄‖h‖²) = {worst:.4} (limit 1.05)")))
}

fn partition_of_unity(_: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for (n, p) in [(5, 2), (12, 3), (150, 2), (4, 1)] {
        let knots = open_uniform_knots::<f64>(n, p)?;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
        let d = NurbsDesign::new(vec![0.0; n], vec![0.0; n], w, knots.clone())?;
        for i in 0..1000 {
            let t = i as f64 / 999.0;
            let b: f64 = bspline_basis(&knots, t)?.iter().sum();
            let r: f64 = rational_basis(&d, t)?.iter().sum();
            worst = worst.max((b - 1.0).abs()).max((r - 1.0).abs());
        }
    }
    Ok(verdict(worst, 1e-12))
}

fn random_design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> Result<NurbsDesign<f64>> {
    let u = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w = (0..n).map(|_| rng.random_range(1.0..15.0)).collect();
    NurbsDesign::new(u, v, w, open_uniform_knots(n, p)?)
}

fn endpoint_interpolation(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for _ in 0..o.trials {
        let d = random_design(9, 2, rng)?;
        let f = synthesize(&d, &SampleGrid::unit(50)?)?;
        worst =
            worst.max((f.values()[0] - d.control_point(0)).norm()).max((f.values()[49] - d.control_point(8)).norm());
    }
    Ok(verdict(worst, 0.0))
}

fn weight_rescaling(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = SampleGrid::unit(400)?;
    let mut worst = 0.0f64;
    for _ in 0..o.trials {
        let d = random_design(15, 3, rng)?;
        let c = rng.random_range(0.1..10.0);
        let scaled =
            NurbsDesign::new(d.u().to_vec(), d.v().to_vec(), d.w().iter().map(|w| c * w).collect(), d.knots().clone())?;
        let (a, b) = (synthesize(&d, &grid)?, synthesize(&scaled, &grid)?);
        worst = worst.max(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max));
    }
    Ok(verdict(worst, 1e-12))
}

fn quarter_circle(_: &CheckOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let knots = KnotVector::new(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], 2, 3)?;
    let d = NurbsDesign::new(vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0 / SQRT_2, 1.0], knots)?;
    let f = synthesize(&d, &SampleGrid::unit(1000)?)?;
    let worst = f.values().iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    Ok(verdict(worst, 1e-12))
}

fn design_jacobian(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = SampleGrid::unit(300)?;
    let mut worst = 0.0f64;
    for _ in 0..o.trials.min(10) {
        let d = random_design(12, 2, rng)?;
        let x = d.params();
        let dx: Vec<f64> = (0..x.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = 1e-5;
        let at = |s: f64| -> Result<ComplexSignal<f64>> {
            let y: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + s * b).collect();
            synthesize(&NurbsDesign::from_params(&y, d.knots().clone())?, &grid)
        };
        let fd = at(t)?.sub(&at(-t)?)?.scale(C::new(0.5 / t, 0.0));
        let an = design_jacobian_apply(&d, &grid, &dx)?;
        worst = worst.max(norm(&fd.sub(&an)?) / norm(&an));

        // Adjoint consistency in the real inner product.
        let z = random_signal(grid, rng);
        let jt = design_jacobian_adjoint(&d, &grid, &z)?;
        let lhs = inner_product(&an, &z)?.re;
        let rhs: f64 = jt.iter().zip(&dx).map(|(a, b)| a * b).sum();
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Ok(verdict(worst, 1e-6))
}

fn gradient_problem(full: bool, big_n: usize) -> Result<FitProblem<f64>> {
    let kernel = make_kernel(KernelKind::GaussPhase, &KernelParams::default(), big_n)?;
    let target = make_target(TargetKind::GaussChirp, big_n)?;
    let y = forward(&kernel, &target)?;
    let amp = modulus(&target);
    let data = if full { DataTerm::Full(y) } else { DataTerm::Phase(phase(&y)) };
    FitProblem::new(kernel, amp, data, Weights { beta: 0.5, alpha: 1e-3, ..Weights::default() })
}

fn gradient_check(prob: &FitProblem<f64>, o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let n = 20;
    let knots = open_uniform_knots(n, 2)?;
    let mut ev = Evaluator::new(prob, &knots)?;
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..o.trials.min(5) {
        let x = random_design(n, 2, rng)?.params();
        let mut g = vec![0.0; x.len()];
        if !ev.value_and_gradient(&x, &mut g).is_finite() {
            continue;
        }
        let gmax = g.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        for i in 0..x.len() {
            let h = 1e-4 * (1.0 + x[i].abs());
            let mut at = |t: f64| {
                let mut y = x.clone();
                y[i] += t;
                ev.value(&y)
            };
            // Fourth-order central difference.
            let fd = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
            // Components negligible against the gradient scale carry only rounding noise.
            if g[i].abs() < 1e-6 * gmax {
                continue;
            }
            worst = worst.max((fd - g[i]).abs() / g[i].abs());
            checked += 1;
        }
    }
    let (ok, detail) = verdict(worst, 1e-5);
    Ok((ok && checked > 0, format!("{detail}, {checked} components")))
}

fn gradient_full(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    gradient_check(&gradient_problem(true, o.grid)?, o, rng)
}

fn gradient_phase(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let prob = gradient_problem(false, o.grid)?;
    let (a, da) = gradient_check(&prob, o, rng)?;
    let (b, db) = gradient_check(&prob.with_fidelity(PhaseFidelity::SignEps), o, rng)?;
    Ok((a && b, format!("relative: {da}; sign_eps: {db}")))
}

fn barrier_regularity(_: &CheckOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for w0 in [1.0f64, 10.0, 37.5] {
        let h = w0 / 2.0;
        let below = h * (1.0 - 1e-15);
        worst = worst
            .max((weight_barrier(below, w0) - h.powi(-2)).abs() / h.powi(-2))
            .max((weight_barrier(h, w0) - h.powi(-2)).abs() / h.powi(-2))
            .max((weight_barrier_derivative(below, w0) + 2.0 * h.powi(-3)).abs() / h.powi(-3))
            .max((weight_barrier_derivative(h, w0) + 2.0 * h.powi(-3)).abs() / h.powi(-3));
    }
    Ok(verdict(worst, 1e-12))
}

fn pseudometric_bound(o: &CheckOptions, rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let grid = SampleGrid::image(o.grid)?;
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..5 * o.trials {
        let a = RealSignal::from_fn(grid, |_| rng.random_range(-4.0..4.0));
        let b = RealSignal::from_fn(grid, |_| rng.random_range(-4.0..4.0));
        excess = excess.max(phase_pseudometric(&a, &b)? - a.distance(&b)? * (1.0 + 1e-14));
    }
    let base = RealSignal::from_fn(grid, |s| (2.0 * s).sin());
    let shifted = RealSignal::from_fn(grid, |s| (2.0 * s).sin() + PI);
    let shift_err = (phase_pseudometric(&base, &shifted)? - 2.0 * SQRT_2).abs();
    let ok = excess <= 0.0 && shift_err <= 1e-12;
    Ok((ok, format!("max excess {excess:.3e}, π-shift error {shift_err:.3e}")))
}

fn metric_schedule(_: &CheckOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    // Reference (d, r, e²) triples, each rounded to three digits, and their half-unit.
    let rows = [(1.39e-2, 1.68e-2, 6.69e-4), (1.02e-2, 1.55e-2, 4.47e-4)];
    let (half_dr, half_e2) = (5e-5, 5e-7);
    let mut ok = true;
    let mut detail = Vec::new();
    for (d, r, e2) in rows {
        let lo = ErrorMetrics::from_parts(d - half_dr, r - half_dr).e2;
        let hi = ErrorMetrics::from_parts(d + half_dr, r + half_dr).e2;
        ok &= lo <= e2 + half_e2 && e2 - half_e2 <= hi;
        detail.push(format!("e²({d:.2e}, {r:.2e}) = {:.3e} vs {e2:.2e}", ErrorMetrics::from_parts(d, r).e2));
    }
    let s = ContinuationSchedule::<f64>::default();
    ok &= (s.beta(9) - 3.81e-4).abs() <= 5e-7 && (s.beta(10) - 9.54e-5).abs() <= 5e-8;
    detail.push(format!("β₉ = {:.3e}, β₁₀ = {:.3e}", s.beta(9), s.beta(10)));
    Ok((ok, detail.join("; ")))
}

fn noise_ratio(o: &CheckOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let f = make_target::<f64>(TargetKind::GaussChirp, o.grid)?;
    let mut worst = 0.0f64;
    for seed in 0..o.trials as u64 {
        let g = add_relative_noise(&f, 0.01, seed)?;
        worst = worst.max((norm(&g.sub(&f)?) / norm(&f) - 0.01).abs());
    }
    Ok(verdict(worst, 1e-12))
}

fn probe_decay(_: &CheckOptions, _: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let n = 2600;
    let k = make_kernel(KernelKind::Unit, &KernelParams::default(), n)?;
    let f = make_target(TargetKind::GaussChirp, n)?;
    let rows = illposedness_probe(&k, &f, 0.1f64, &[4, 8, 16])?;
    let decreasing = rows.windows(2).all(|w| w[1].image_change < w[0].image_change);
    let constant = rows.iter().all(|r| (r.perturbation - 0.1).abs() < 1e-12);
    let detail = rows.iter().map(|r| format!("n={}: {:.3e}", r.n, r.image_change)).collect::<Vec<_>>().join(", ");
    Ok((decreasing && constant, detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass_on_defaults() {
        let opts = CheckOptions { grid: 80, trials: 4, ..CheckOptions::default() };
        let results = run_checks(&opts, &[]).unwrap();
        assert_eq!(results.len(), check_names().len());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn selection_and_unknown_names() {
        let opts = CheckOptions { grid: 40, trials: 2, ..CheckOptions::default() };
        let r = run_checks(&opts, &["quarter-circle".to_string()]).unwrap();
        assert_eq!(r.len(), 1);
        assert!(run_checks(&opts, &["nope".to_string()]).is_err());
    }
}
