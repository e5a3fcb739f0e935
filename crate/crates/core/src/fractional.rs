//! Dinkelbach's method for concave-over-convex ratios.

use crate::convex::{solve_parametric, BarrierOptions, ConvexProgram};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachResult {
    pub x: Vec<f64>,
    /// `Num(x) / Den(x)` at the returned point.
    pub lambda: f64,
    /// Ratio after each parametric solve.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub newton_steps: usize,
    pub degraded: bool,
}

/// Maximizes `Num(x)/Den(x)` over the program's feasible set.
///
/// Each parametric problem `max Num - lambda Den` is solved from the program's
/// start point; the loop ends once `Num - lambda Den <= tol * |lambda| * Den`.
pub fn dinkelbach(
    program: &ConvexProgram,
    lambda0: f64,
    tol: f64,
    max_iter: usize,
    opts: &BarrierOptions,
) -> Result<DinkelbachResult> {
    let mut lambda = lambda0;
    let mut history = Vec::new();
    let mut x = program.start.clone();
    let mut steps = 0;
    let mut degraded = false;
    let mut iterations = 0;
    let mut ratio = program.numerator_value(&x) / program.denominator_value(&x);
    for _ in 0..max_iter {
        iterations += 1;
        let sol = solve_parametric(program, lambda, opts)?;
        steps += sol.newton_steps;
        degraded |= sol.degraded;
        let f = sol.numerator - lambda * sol.denominator;
        let next = sol.numerator / sol.denominator;
        x = sol.x;
        ratio = next;
        history.push(next);
        if f <= tol * lambda.abs().max(f64::MIN_POSITIVE) * sol.denominator {
            break;
        }
        lambda = next;
    }
    Ok(DinkelbachResult {
        x,
        lambda: ratio,
        history,
        iterations,
        newton_steps: steps,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::Term;

    fn harness() -> ConvexProgram {
        ConvexProgram {
            dim: 1,
            numerator: vec![Term::affine(vec![0], vec![2.0], 0.0)],
            denominator: vec![Term::affine(vec![0], vec![], 1.0).with_quad(vec![1.0])],
            constraints: vec![Term::affine(vec![0], vec![-1.0], 0.0), Term::affine(vec![0], vec![1.0], -3.0)],
            start: vec![0.5],
        }
    }

    #[test]
    fn scalar_ratio() {
        let p = harness();
        let r = dinkelbach(&p, 0.8, 1e-10, 20, &BarrierOptions::default()).unwrap();
        assert!((r.lambda - 1.0).abs() < 1e-6);
        assert!((r.x[0] - 1.0).abs() < 1e-3);
        assert!(r.iterations <= 20);
        for w in r.history.windows(2) {
            assert!(w[1] >= w[0] - 1e-12);
        }
    }
}
