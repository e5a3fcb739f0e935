//! Log-barrier interior-point solver for the small structured programs built
//! by the trajectory block.
//!
//! A program is `max Num(x) - lambda Den(x)` subject to `c_i(x) <= 0`, with
//! `Num` concave, `Den` convex and every `c_i` convex. Each function is a sum
//! of [`Term`]s acting on a few variables, so the Newton system is banded when
//! variables are ordered along time; it is factored with a banded Cholesky.

use crate::error::{Error, Result};

/// Nonlinear convex pieces a [`Term`] may contain.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// `coef / x[at]`, for `x[at] > 0`.
    Recip { at: usize, coef: f64 },
    /// `coef / x[at]^2`, for `x[at] > 0`.
    InvSquare { at: usize, coef: f64 },
    /// `coef * ||B x + offset||^3` with a 2-row `B`.
    NormCube { rows: [Vec<f64>; 2], offset: [f64; 2], coef: f64 },
}

/// `constant + linear . x + x^T quad x + sum(atoms)` over `x = X[vars]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Term {
    pub vars: Vec<usize>,
    pub constant: f64,
    /// Empty or one coefficient per variable.
    pub linear: Vec<f64>,
    /// Empty or a symmetric `k x k` row-major matrix.
    pub quad: Vec<f64>,
    pub atoms: Vec<Atom>,
}

impl Term {
    pub fn new(vars: Vec<usize>) -> Self {
        Self {
            vars,
            ..Self::default()
        }
    }

    pub fn affine(vars: Vec<usize>, linear: Vec<f64>, constant: f64) -> Self {
        Self {
            vars,
            constant,
            linear,
            ..Self::default()
        }
    }

    pub fn with_quad(mut self, quad: Vec<f64>) -> Self {
        self.quad = quad;
        self
    }

    pub fn with_atom(mut self, atom: Atom) -> Self {
        self.atoms.push(atom);
        self
    }

    fn local(&self, x: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&i| x[i]).collect()
    }

    /// Value at the global point `x`; `+inf` outside the domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        let xl = self.local(x);
        let k = xl.len();
        let mut v = self.constant;
        for (c, xi) in self.linear.iter().zip(&xl) {
            v += c * xi;
        }
        if !self.quad.is_empty() {
            for i in 0..k {
                for j in 0..k {
                    v += xl[i] * self.quad[i * k + j] * xl[j];
                }
            }
        }
        for a in &self.atoms {
            match a {
                Atom::Recip { at, coef } => {
                    let t = xl[*at];
                    if !(t > 0.0) {
                        return f64::INFINITY;
                    }
                    v += coef / t;
                }
                Atom::InvSquare { at, coef } => {
                    let t = xl[*at];
                    if !(t > 0.0) {
                        return f64::INFINITY;
                    }
                    v += coef / (t * t);
                }
                Atom::NormCube { rows, offset, coef } => {
                    let d = cube_arg(rows, offset, &xl);
                    let n = d[0].hypot(d[1]);
                    v += coef * n * n * n;
                }
            }
        }
        v
    }

    /// Value, local gradient and local row-major Hessian.
    pub fn derivatives(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let xl = self.local(x);
        let k = xl.len();
        let mut g = vec![0.0; k];
        let mut h = vec![0.0; k * k];
        let mut v = self.constant;
        for (i, c) in self.linear.iter().enumerate() {
            v += c * xl[i];
            g[i] += c;
        }
        if !self.quad.is_empty() {
            for i in 0..k {
                let mut row = 0.0;
                for j in 0..k {
                    let q = self.quad[i * k + j];
                    row += q * xl[j];
                    h[i * k + j] += 2.0 * q;
                }
                v += xl[i] * row;
                g[i] += 2.0 * row;
            }
        }
        for a in &self.atoms {
            match a {
                Atom::Recip { at, coef } => {
                    let t = xl[*at];
                    if !(t > 0.0) {
                        return (f64::INFINITY, g, h);
                    }
                    v += coef / t;
                    g[*at] -= coef / (t * t);
                    h[*at * k + *at] += 2.0 * coef / (t * t * t);
                }
                Atom::InvSquare { at, coef } => {
                    let t = xl[*at];
                    if !(t > 0.0) {
                        return (f64::INFINITY, g, h);
                    }
                    let t2 = t * t;
                    v += coef / t2;
                    g[*at] -= 2.0 * coef / (t2 * t);
                    h[*at * k + *at] += 6.0 * coef / (t2 * t2);
                }
                Atom::NormCube { rows, offset, coef } => {
                    let d = cube_arg(rows, offset, &xl);
                    let n = d[0].hypot(d[1]);
                    v += coef * n * n * n;
                    if n == 0.0 {
                        continue;
                    }
                    // d/dd ||d||^3 = 3||d|| d ; d2 = 3||d|| I + 3 d d^T / ||d||
                    let gd = [3.0 * n * d[0], 3.0 * n * d[1]];
                    let hd = [
                        3.0 * n + 3.0 * d[0] * d[0] / n,
                        3.0 * d[0] * d[1] / n,
                        3.0 * n + 3.0 * d[1] * d[1] / n,
                    ];
                    for i in 0..k {
                        let (b0i, b1i) = (rows[0][i], rows[1][i]);
                        g[i] += coef * (b0i * gd[0] + b1i * gd[1]);
                        if b0i == 0.0 && b1i == 0.0 {
                            continue;
                        }
                        for j in 0..k {
                            let (b0j, b1j) = (rows[0][j], rows[1][j]);
                            let val = b0i * (hd[0] * b0j + hd[1] * b1j) + b1i * (hd[1] * b0j + hd[2] * b1j);
                            h[i * k + j] += coef * val;
                        }
                    }
                }
            }
        }
        (v, g, h)
    }

    fn span(&self) -> usize {
        match (self.vars.iter().min(), self.vars.iter().max()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0,
        }
    }
}

fn cube_arg(rows: &[Vec<f64>; 2], offset: &[f64; 2], xl: &[f64]) -> [f64; 2] {
    let mut d = *offset;
    for (i, xi) in xl.iter().enumerate() {
        d[0] += rows[0][i] * xi;
        d[1] += rows[1][i] * xi;
    }
    d
}

fn sum_terms(terms: &[Term], x: &[f64]) -> f64 {
    terms.iter().map(|t| t.value(x)).sum()
}

/// `max Num(x) - lambda Den(x)` over `{c_i(x) <= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexProgram {
    pub dim: usize,
    pub numerator: Vec<Term>,
    pub denominator: Vec<Term>,
    pub constraints: Vec<Term>,
    /// Strictly feasible starting point.
    pub start: Vec<f64>,
}

impl ConvexProgram {
    pub fn numerator_value(&self, x: &[f64]) -> f64 {
        sum_terms(&self.numerator, x)
    }

    pub fn denominator_value(&self, x: &[f64]) -> f64 {
        sum_terms(&self.denominator, x)
    }

    /// Largest constraint value (negative when strictly feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn strictly_feasible(&self, x: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.value(x) < 0.0)
    }

    fn bandwidth(&self) -> usize {
        self.numerator
            .iter()
            .chain(&self.denominator)
            .chain(&self.constraints)
            .map(Term::span)
            .max()
            .unwrap_or(0)
            .min(self.dim.saturating_sub(1))
    }
}

/// Symmetric banded matrix, lower band stored row by row.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        if a - b > self.bw {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `v` to entry `(i, j)` with `i >= j`.
    pub fn add_lower(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn add_diag(&mut self, shift: f64) {
        for i in 0..self.n {
            let k = self.idx(i, i);
            self.data[k] += shift;
        }
    }

    pub fn max_diag(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// In-place Cholesky `A = L L^T`; fails on a non-positive pivot.
    pub fn cholesky(&mut self) -> Option<()> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo_i = i.saturating_sub(bw);
            for j in lo_i..=i {
                let lo = lo_i.max(j.saturating_sub(bw));
                let mut sum = self.data[self.idx(i, j)];
                for k in lo..j {
                    sum -= self.data[self.idx(i, k)] * self.data[self.idx(j, k)];
                }
                let at = self.idx(i, j);
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return None;
                    }
                    self.data[at] = sum.sqrt();
                } else {
                    self.data[at] = sum / self.data[self.idx(j, j)];
                }
            }
        }
        Some(())
    }

    /// Solves `L L^T x = b` after [`cholesky`](Self::cholesky).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.data[self.idx(i, k)] * y[k];
            }
            y[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n.min(i + bw + 1) {
                s -= self.data[self.idx(k, i)] * y[k];
            }
            y[i] = s / self.data[self.idx(i, i)];
        }
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptions {
    /// Target duality gap on the scaled objective.
    pub gap_tol: f64,
    pub mu: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-9,
            mu: 20.0,
            newton_tol: 1e-11,
            max_newton: 3000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolution {
    pub x: Vec<f64>,
    pub numerator: f64,
    pub denominator: f64,
    pub newton_steps: usize,
    /// Iteration budget ran out before the gap target was met.
    pub degraded: bool,
}

struct Barrier<'a> {
    prog: &'a ConvexProgram,
    lambda: f64,
    scale: f64,
    bw: usize,
}

impl Barrier<'_> {
    fn objective(&self, x: &[f64]) -> f64 {
        self.scale * (self.lambda * self.prog.denominator_value(x) - self.prog.numerator_value(x))
    }

    /// `t f0(x) - sum log(-c_i(x))`; `+inf` outside the interior.
    fn value(&self, x: &[f64], t: f64) -> f64 {
        let mut v = t * self.objective(x);
        for c in &self.prog.constraints {
            let ci = c.value(x);
            if !(ci < 0.0) {
                return f64::INFINITY;
            }
            v -= (-ci).ln();
        }
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    }

    fn scatter(h: &mut BandedSym, g: &mut [f64], term: &Term, tg: &[f64], th: &[f64], wg: f64, wh: f64, outer: f64) {
        let k = term.vars.len();
        for a in 0..k {
            let ia = term.vars[a];
            g[ia] += wg * tg[a];
            for b in 0..k {
                let ib = term.vars[b];
                if ia < ib {
                    continue;
                }
                let mut v = wh * th[a * k + b];
                if outer != 0.0 {
                    v += outer * tg[a] * tg[b];
                }
                if v != 0.0 {
                    h.add_lower(ia, ib, v);
                }
            }
        }
    }

    fn newton_system(&self, x: &[f64], t: f64) -> (Vec<f64>, BandedSym) {
        let n = self.prog.dim;
        let mut g = vec![0.0; n];
        let mut h = BandedSym::zeros(n, self.bw);
        let w = t * self.scale;
        for term in &self.prog.numerator {
            let (_, tg, th) = term.derivatives(x);
            Self::scatter(&mut h, &mut g, term, &tg, &th, -w, -w, 0.0);
        }
        for term in &self.prog.denominator {
            let (_, tg, th) = term.derivatives(x);
            Self::scatter(&mut h, &mut g, term, &tg, &th, w * self.lambda, w * self.lambda, 0.0);
        }
        for term in &self.prog.constraints {
            let (c, tg, th) = term.derivatives(x);
            let s = -c;
            Self::scatter(&mut h, &mut g, term, &tg, &th, 1.0 / s, 1.0 / s, 1.0 / (s * s));
        }
        (g, h)
    }
}

/// Solves `H dx = -g` with symmetric diagonal scaling and a small shift
/// that grows until the factorization succeeds.
fn newton_direction(h: &BandedSym, g: &[f64]) -> Option<Vec<f64>> {
    let d: Vec<f64> = (0..h.n)
        .map(|i| {
            let v = h.get(i, i);
            if v > 0.0 && v.is_finite() {
                1.0 / v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = h.clone();
    for i in 0..h.n {
        for j in i.saturating_sub(h.bw)..=i {
            let k = scaled.idx(i, j);
            scaled.data[k] *= d[i] * d[j];
        }
    }
    let rhs: Vec<f64> = g.iter().zip(&d).map(|(gi, di)| -gi * di).collect();
    let mut shift = 1e-13;
    while shift < 1e6 {
        let mut f = scaled.clone();
        f.add_diag(shift);
        if f.cholesky().is_some() {
            return Some(f.solve(&rhs).into_iter().zip(&d).map(|(y, di)| y * di).collect());
        }
        shift *= 100.0;
    }
    None
}

/// Solves the parametric program for a fixed `lambda` from `program.start`.
pub fn solve_parametric(program: &ConvexProgram, lambda: f64, opts: &BarrierOptions) -> Result<ConvexSolution> {
    let n = program.dim;
    if program.start.len() != n {
        return Err(Error::DimensionMismatch(format!("start has {} entries, dim {n}", program.start.len())));
    }
    if !program.strictly_feasible(&program.start) {
        return Err(Error::InfeasibleExpansion(format!(
            "start point is not strictly feasible (max constraint {:.3e})",
            program.max_violation(&program.start)
        )));
    }
    let mut x = program.start.clone();
    let num0 = program.numerator_value(&x).abs();
    let den0 = (lambda * program.denominator_value(&x)).abs();
    let scale = 1.0 / num0.max(den0).max(f64::MIN_POSITIVE);
    let barrier = Barrier {
        prog: program,
        lambda,
        scale,
        bw: program.bandwidth(),
    };
    let m = program.constraints.len().max(1) as f64;
    let mut t = m;
    let mut steps = 0;
    let mut degraded = false;
    if n == 0 {
        return Ok(ConvexSolution {
            numerator: program.numerator_value(&x),
            denominator: program.denominator_value(&x),
            x,
            newton_steps: 0,
            degraded: false,
        });
    }
    'outer: loop {
        loop {
            if steps >= opts.max_newton {
                degraded = true;
                break 'outer;
            }
            steps += 1;
            let (g, h) = barrier.newton_system(&x, t);
            let dx = match newton_direction(&h, &g) {
                Some(dx) => dx,
                None => return Err(Error::Solver("Newton system could not be factored".into())),
            };
            let slope: f64 = g.iter().zip(&dx).map(|(a, b)| a * b).sum();
            if !slope.is_finite() {
                return Err(Error::Solver("non-finite Newton direction".into()));
            }
            let f0 = barrier.value(&x, t);
            // The decrement over t bounds the objective error of the centering
            // step; past the floor the barrier value cannot resolve progress.
            let floor = opts.newton_tol.max(1e-14 * f0.abs()).max(1e-3 * opts.gap_tol * t);
            if -slope / 2.0 <= floor {
                break;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + step * b).collect();
                let ft = barrier.value(&trial, t);
                if ft.is_finite() && ft <= f0 + 0.25 * step * slope {
                    x = trial;
                    accepted = f0 - ft > 1e-13 * (1.0 + f0.abs());
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // Progress is at rounding level for this stage.
                break;
            }
        }
        if m / t <= opts.gap_tol {
            break;
        }
        t *= opts.mu;
    }
    Ok(ConvexSolution {
        numerator: program.numerator_value(&x),
        denominator: program.denominator_value(&x),
        x,
        newton_steps: steps,
        degraded,
    })
}
