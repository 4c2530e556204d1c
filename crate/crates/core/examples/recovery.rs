//! Recovers the Gauss-chirp target from amplitude and phase data.
//!
//! `cargo run --release --example recovery -- [noise] [control points]`

use autoconv::datagen::{make_data, make_kernel, make_target, KernelKind, KernelParams, NoiseLevels, TargetKind};
use autoconv::{default_initial_design, norm, tigra_solve, DataTerm, Problem, Schedule, Weights};
use num_complex::Complex;

fn main() -> autoconv::Result<()> {
    let mut args = std::env::args().skip(1);
    let level: f64 = args.next().map_or(Ok(0.0), |s| s.parse()).expect("noise level must be a number");
    let n_ctrl: usize = args.next().map_or(Ok(20), |s| s.parse()).expect("control points must be an integer");
    let big_n = 200;

    let kernel = make_kernel(KernelKind::GaussPhase, &KernelParams::default(), big_n)?;
    let target = make_target(TargetKind::GaussChirp, big_n)?;
    let data = make_data(&kernel, &target, &NoiseLevels::uniform(level), 11)?;
    let prob = Problem::new(kernel, data.amp.clone(), DataTerm::Phase(data.phase), Weights::default())?;
    let x0 = default_initial_design(&data.amp, n_ctrl, 2, 10.0)?;
    let rep = tigra_solve(&prob, &Schedule::default(), &x0)?;

    for s in &rep.steps {
        println!(
            "β = {:.3e}  iters {:>4}  d = {:.3e}  r = {:.3e}  e² = {:.3e}",
            s.beta, s.iterations, s.metrics.d, s.metrics.r, s.metrics.e2
        );
    }
    // The data cannot distinguish f from −f.
    let f = &rep.best_signal;
    let nt = norm(&target);
    let minus = norm(&f.sub(&target)?) / nt;
    let plus = norm(&f.add_scaled(Complex::new(1.0, 0.0), &target)?) / nt;
    println!(
        "β* = {:.3e}  e² = {:.3e}  relative error {:.3e}  ({:.2}s)",
        rep.beta_star(),
        rep.best().metrics.e2,
        minus.min(plus),
        rep.wall_seconds
    );
    Ok(())
}
