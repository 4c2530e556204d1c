use crate::error::{Error, Result};
use crate::scalar::Real;

/// Constants of the strong Wolfe conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WolfeConditions<T> {
    /// Sufficient-decrease constant.
    pub c1: T,
    /// Curvature constant.
    pub c2: T,
    pub max_evaluations: usize,
    pub max_step: T,
}

impl<T: Real> Default for WolfeConditions<T> {
    fn default() -> Self {
        Self { c1: T::lit(1e-4), c2: T::lit(0.9), max_evaluations: 60, max_step: T::lit(1e10) }
    }
}

/// Accepted step. The point `ρ = step` is always the last one evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearchResult<T> {
    pub step: T,
    pub value: T,
    pub slope: T,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Sample<T> {
    step: T,
    value: T,
    slope: T,
}

/// Finds `ρ > 0` satisfying the strong Wolfe conditions for `φ(ρ) = (value, slope)`.
///
/// Non-finite values of `φ` reject the trial step and shrink the bracket, so
/// barrier-type objectives returning `+∞` are handled.
pub fn wolfe_line_search<T: Real>(
    mut phi: impl FnMut(T) -> (T, T),
    phi0: T,
    dphi0: T,
    rho_init: T,
    cond: &WolfeConditions<T>,
) -> Result<LineSearchResult<T>> {
    if !(dphi0 < T::zero()) {
        return Err(Error::NotDescent(dphi0.as_f64()));
    }
    if !phi0.is_finite() {
        return Err(Error::LineSearch("initial value is not finite".into()));
    }
    let mut evals = 0;
    let mut eval = |rho: T, evals: &mut usize| {
        *evals += 1;
        let (value, slope) = phi(rho);
        Sample { step: rho, value, slope }
    };
    let armijo = |s: &Sample<T>| s.value <= phi0 + cond.c1 * s.step * dphi0;
    let curvature = |s: &Sample<T>| s.slope.abs() <= -cond.c2 * dphi0;

    let mut prev = Sample { step: T::zero(), value: phi0, slope: dphi0 };
    let mut rho = rho_init.min(cond.max_step).max(T::min_positive_value());
    let mut first = true;
    while evals < cond.max_evaluations {
        let cur = eval(rho, &mut evals);
        if !cur.value.is_finite() || !armijo(&cur) || (!first && cur.value >= prev.value) {
            return zoom(&mut eval, &mut evals, prev, cur, phi0, dphi0, cond);
        }
        if curvature(&cur) {
            return Ok(LineSearchResult { step: cur.step, value: cur.value, slope: cur.slope, evaluations: evals });
        }
        if cur.slope >= T::zero() {
            return zoom(&mut eval, &mut evals, cur, prev, phi0, dphi0, cond);
        }
        if rho >= cond.max_step {
            return Err(Error::LineSearch("step grew past the maximum without meeting the curvature condition".into()));
        }
        prev = cur;
        rho = (rho + rho).min(cond.max_step);
        first = false;
    }
    Err(Error::LineSearch(format!("no acceptable step after {evals} evaluations")))
}

/// Minimizer of the cubic interpolating two samples, if it is well defined.
fn cubic_min<T: Real>(a: &Sample<T>, b: &Sample<T>) -> Option<T> {
    let three = T::lit(3.0);
    let d1 = a.slope + b.slope - three * (a.value - b.value) / (a.step - b.step);
    let disc = d1 * d1 - a.slope * b.slope;
    if !(disc >= T::zero()) {
        return None;
    }
    let d2 = (b.step - a.step).signum() * disc.sqrt();
    let t = b.step - (b.step - a.step) * (b.slope + d2 - d1) / (b.slope - a.slope + d2 + d2);
    t.is_finite().then_some(t)
}

fn zoom<T: Real>(
    eval: &mut impl FnMut(T, &mut usize) -> Sample<T>,
    evals: &mut usize,
    mut lo: Sample<T>,
    mut hi: Sample<T>,
    phi0: T,
    dphi0: T,
    cond: &WolfeConditions<T>,
) -> Result<LineSearchResult<T>> {
    let tenth = T::lit(0.1);
    let half = T::lit(0.5);
    while *evals < cond.max_evaluations {
        let (left, right) = if lo.step < hi.step { (lo.step, hi.step) } else { (hi.step, lo.step) };
        let width = right - left;
        if !(width > T::epsilon() * right.max(T::min_positive_value())) {
            break;
        }
        let mid = left + half * width;
        let trial = if hi.value.is_finite() && hi.slope.is_finite() {
            cubic_min(&lo, &hi).filter(|&t| t >= left + tenth * width && t <= right - tenth * width).unwrap_or(mid)
        } else {
            mid
        };
        let cur = eval(trial, evals);
        let armijo = cur.value <= phi0 + cond.c1 * cur.step * dphi0;
        if !cur.value.is_finite() || !armijo || cur.value >= lo.value {
            hi = cur;
        } else {
            if cur.slope.abs() <= -cond.c2 * dphi0 {
                return Ok(LineSearchResult {
                    step: cur.step,
                    value: cur.value,
                    slope: cur.slope,
                    evaluations: *evals,
                });
            }
            if cur.slope * (hi.step - lo.step) >= T::zero() {
                hi = lo;
            }
            lo = cur;
        }
    }
    Err(Error::LineSearch(format!(
        "bracket [{}, {}] collapsed after {} evaluations",
        lo.step.min(hi.step),
        lo.step.max(hi.step),
        evals
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strong_wolfe_holds(phi: impl Fn(f64) -> (f64, f64), rho: f64, c1: f64, c2: f64) -> bool {
        let (p0, d0) = phi(0.0);
        let (p, d) = phi(rho);
        p <= p0 + c1 * rho * d0 && d.abs() <= c2 * d0.abs()
    }

    #[test]
    fn unit_step_on_parabola() {
        let phi = |r: f64| ((r - 1.0).powi(2) - 1.0, 2.0 * (r - 1.0));
        assert!(strong_wolfe_holds(phi, 1.0, 1e-4, 0.9));
        let res = wolfe_line_search(phi, 0.0, -2.0, 1.0, &WolfeConditions::default()).unwrap();
        assert_eq!(res.step, 1.0);
        assert_eq!(res.evaluations, 1);
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let phi = |r: f64| (r, 1.0);
        assert!(matches!(
            wolfe_line_search(phi, 0.0, 1.0, 1.0, &WolfeConditions::default()),
            Err(Error::NotDescent(_))
        ));
    }

    #[test]
    fn barrier_steps_are_rejected() {
        let phi = |r: f64| {
            if r >= 0.5 {
                (f64::INFINITY, f64::NAN)
            } else {
                ((r - 1.0).powi(2) - 1.0, 2.0 * (r - 1.0))
            }
        };
        let res = wolfe_line_search(phi, 0.0, -2.0, 1.0, &WolfeConditions::default()).unwrap();
        assert!(res.step < 0.5 && res.step > 0.0);
        assert!(strong_wolfe_holds(phi, res.step, 1e-4, 0.9));
    }

    #[test]
    fn expands_short_initial_step() {
        let phi = |r: f64| ((r - 10.0).powi(2), 2.0 * (r - 10.0));
        let cond = WolfeConditions { c2: 0.1, ..WolfeConditions::default() };
        let res = wolfe_line_search(phi, 100.0, -20.0, 0.01, &cond).unwrap();
        assert!(strong_wolfe_holds(phi, res.step, 1e-4, 0.1));
    }

    #[test]
    fn zooms_on_overshoot() {
        // minimum at 0.3, initial step far beyond
        let phi = |r: f64| ((r - 0.3).powi(2) + 0.1 * (r - 0.3).powi(4), 2.0 * (r - 0.3) + 0.4 * (r - 0.3).powi(3));
        let (p0, d0) = phi(0.0);
        let cond = WolfeConditions { c2: 0.1, ..WolfeConditions::default() };
        let res = wolfe_line_search(phi, p0, d0, 5.0, &cond).unwrap();
        assert!(strong_wolfe_holds(phi, res.step, 1e-4, 0.1));
    }
}
