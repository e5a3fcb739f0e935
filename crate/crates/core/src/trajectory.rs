//! Trajectory block: successive convex approximation around the current
//! path, each step a concave-over-convex program solved by Dinkelbach.
//!
//! With powers, schedule and phases fixed, slot rates are bounded below by a
//! linear function of two slacks per slot, `S` (inverse received power) and
//! `G` (jamming plus noise). Inverse UAV-node distances enter through slack
//! variables bounded on the side that keeps the rate bound valid, and the
//! induced-power factor gets its own slack `e`. Variables are normalized so
//! every slack equals 1 at the expansion point.
//!
//! Program variables are laid out along time, which keeps the Newton systems
//! banded: `eps_0 | r_1, slot_1, eps_1 | r_2, slot_2, eps_2 | ...`.

use std::collections::BTreeMap;
use std::f64::consts::LOG2_E;

use num_complex::Complex64;

use crate::channel::{composite, phase_vector, slot_channels};
use crate::convex::{Atom, BarrierOptions, ConvexProgram, Term};
use crate::energy::{induced_factor, speed_profile};
use crate::error::{Error, Result};
use crate::fractional::dinkelbach;
use crate::metrics::{evaluate, slot_gains, PhasePlan, ResourcePlan};
use crate::scenario::{Scenario, Trajectory, Vec3, STEP_SLACK};

/// Unnormalized slack values that make every relaxed constraint tight at a
/// given trajectory. Matrices are indexed by plan column (slot `n` -> `n-1`).
#[derive(Debug, Clone, PartialEq)]
pub struct SlackState {
    /// `1/(p_k g_k)`; `f64::MAX` where the device does not transmit.
    pub s: Vec<Vec<f64>>,
    /// `p_j g_j + sigma2`.
    pub g: Vec<f64>,
    /// Induced-power factor per step.
    pub e: Vec<f64>,
    /// `1/d_ku`.
    pub xi1: Vec<Vec<f64>>,
    /// `1/d_ru` (desired side).
    pub xi2: Vec<f64>,
    /// `1/d_ju`.
    pub xi3: Vec<f64>,
    /// `1/d_ru` (jamming side).
    pub xi4: Vec<f64>,
}

pub fn init_slacks(s: &Scenario, traj: &Trajectory, phases: &PhasePlan, plan: &ResourcePlan) -> Result<SlackState> {
    let gains = slot_gains(s, traj, phases)?;
    let k = s.num_devices();
    let n = s.num_slots;
    let mut out = SlackState {
        s: vec![vec![f64::MAX; n]; k],
        g: Vec::with_capacity(n),
        e: speed_profile(traj, s.dt).into_iter().map(|v| induced_factor(v, s.energy.v0)).collect(),
        xi1: vec![vec![0.0; n]; k],
        xi2: Vec::with_capacity(n),
        xi3: Vec::with_capacity(n),
        xi4: Vec::with_capacity(n),
    };
    for col in 0..n {
        let q = traj.points[col + 1];
        let g = &gains[col];
        for dev in 0..k {
            let pg = plan.power[dev][col] * g.g_k[dev];
            if pg > 0.0 {
                out.s[dev][col] = 1.0 / pg;
            }
            out.xi1[dev][col] = 1.0 / q.dist(s.device_positions[dev]);
        }
        out.g.push(s.p_jam * g.g_j + s.sigma2);
        let inv_ru = 1.0 / q.dist(s.irs_position);
        out.xi2.push(inv_ru);
        out.xi3.push(1.0 / q.dist(s.jammer_position));
        out.xi4.push(inv_ru);
    }
    Ok(out)
}

/// Rate bound (bits/s/Hz) linearized at `(s0, g0)`:
/// `log2(1 + 1/(s0 g0)) - log2(e) (s - s0)/(s0 + s0^2 g0) - log2(e) (g - g0)/(g0 + g0^2 s0)`.
pub fn rate_lower_bound(s: f64, g: f64, s0: f64, g0: f64) -> Result<f64> {
    for (name, v) in [("S", s), ("G", g), ("S0", s0), ("G0", g0)] {
        if !(v > 0.0) {
            return Err(Error::NonPositive(name));
        }
    }
    let z1 = -LOG2_E / (s0 + s0 * s0 * g0);
    let z2 = -LOG2_E / (g0 + g0 * g0 * s0);
    Ok((1.0 + 1.0 / (s0 * g0)).log2() + z1 * (s - s0) + z2 * (g - g0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Device(usize),
    Irs,
    Jammer,
}

/// Side on which an inverse-distance slack bounds `1/d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Side {
    /// `xi <= 1/d`
    Below,
    /// `xi >= 1/d`
    Above,
}

/// One path of a composite channel: amplitude at unit distance and the
/// inverse distance at the expansion point.
#[derive(Debug, Clone, Copy)]
struct Path {
    node: Node,
    h: Complex64,
    w: f64,
}

/// Frozen per-slot quantities at the expansion point.
#[derive(Debug, Clone)]
struct SlotExpansion {
    col: usize,
    power: f64,
    desired: Vec<Path>,
    jamming: Vec<Path>,
    g0: f64,
    big_g0: f64,
}

/// Expansion point of one SCA step.
#[derive(Debug, Clone)]
pub struct ScaPoint {
    pub trajectory: Trajectory,
    slots: Vec<SlotExpansion>,
    /// Bits from slots whose UAV position is fixed (the last one).
    fixed_bits: f64,
    /// Induced-power factor per step.
    e0: Vec<f64>,
    pub throughput: f64,
    pub energy: f64,
    pub ee: f64,
}

impl ScaPoint {
    pub fn new(s: &Scenario, traj: &Trajectory, phases: &PhasePlan, plan: &ResourcePlan) -> Result<ScaPoint> {
        let eval = evaluate(s, traj, phases, plan)?;
        let n = s.num_slots;
        let mut slots = Vec::new();
        let mut fixed_bits = 0.0;
        for slot in 1..=n {
            let col = slot - 1;
            let Some(k) = plan.scheduled(col) else { continue };
            let power = plan.power[k][col];
            if !(power > 0.0) {
                continue;
            }
            if slot == n {
                fixed_bits += eval.slots[col].rate_bits;
                continue;
            }
            let q = traj.points[slot];
            let ch = slot_channels(s, q)?;
            let mut desired = vec![Path {
                node: Node::Device(k),
                h: ch.h_ku[k] * ch.d_ku[k],
                w: 1.0 / ch.d_ku[k],
            }];
            let mut jamming = vec![Path {
                node: Node::Jammer,
                h: ch.h_ju * ch.d_ju,
                w: 1.0 / ch.d_ju,
            }];
            if s.irs_enabled {
                let v = phase_vector(&phases.phases[col]);
                let zero = Complex64::new(0.0, 0.0);
                desired.push(Path {
                    node: Node::Irs,
                    h: composite(zero, &ch.h_kr[k], &ch.h_ru, &v) * ch.d_ru,
                    w: 1.0 / ch.d_ru,
                });
                jamming.push(Path {
                    node: Node::Irs,
                    h: composite(zero, &ch.h_jr, &ch.h_ru, &v) * ch.d_ru,
                    w: 1.0 / ch.d_ru,
                });
            }
            let g0 = gain(&desired);
            if !(g0 > 0.0) {
                continue;
            }
            let big_g0 = s.p_jam * gain(&jamming) + s.sigma2;
            slots.push(SlotExpansion {
                col,
                power,
                desired,
                jamming,
                g0,
                big_g0,
            });
        }
        let e0 = speed_profile(traj, s.dt).into_iter().map(|v| induced_factor(v, s.energy.v0)).collect();
        Ok(ScaPoint {
            trajectory: traj.clone(),
            slots,
            fixed_bits,
            e0,
            throughput: eval.throughput,
            energy: eval.energy,
            ee: eval.ee,
        })
    }
}

fn gain(paths: &[Path]) -> f64 {
    paths.iter().map(|p| p.h * p.w).sum::<Complex64>().norm_sqr()
}

/// Convex program of one SCA step plus the variable layout needed to read
/// a trajectory back out of a solution vector.
#[derive(Debug, Clone)]
pub struct ScaProgram {
    pub program: ConvexProgram,
    /// Point where every relaxation is tight (not strictly interior).
    pub expansion: Vec<f64>,
    /// `x` offset of waypoint `n`, `None` for the fixed endpoints.
    pos: Vec<Option<usize>>,
    base: Vec<Vec3>,
    start_point: Vec3,
    end_point: Vec3,
}

impl ScaProgram {
    pub fn trajectory_from(&self, x: &[f64]) -> Trajectory {
        let last = self.base.len() - 1;
        let points = self
            .base
            .iter()
            .enumerate()
            .map(|(n, q)| match (n, self.pos[n]) {
                (0, _) => self.start_point,
                (n, _) if n == last => self.end_point,
                (_, Some(i)) => Vec3::new(q.x + x[i], q.y + x[i + 1], q.z),
                _ => *q,
            })
            .collect();
        Trajectory { points }
    }
}

struct Builder {
    dim: usize,
    start: Vec<f64>,
    expansion: Vec<f64>,
    numerator: Vec<Term>,
    denominator: Vec<Term>,
    constraints: Vec<Term>,
}

impl Builder {
    fn var(&mut self, expansion: f64, start: f64) -> usize {
        self.dim += 1;
        self.expansion.push(expansion);
        self.start.push(start);
        self.dim - 1
    }
}

/// Step displacement `q[n+1] - q[n]` as an affine map of the free offsets.
struct Step {
    vars: Vec<usize>,
    /// Rows of the 2 x k map (x and y components).
    rows: [Vec<f64>; 2],
    delta0: [f64; 2],
}

impl Step {
    fn new(pos: &[Option<usize>], base: &[Vec3], n: usize) -> Step {
        let mut vars = Vec::new();
        let mut rows = [Vec::new(), Vec::new()];
        for (idx, sign) in [(n, -1.0), (n + 1, 1.0)] {
            if let Some(i) = pos[idx] {
                vars.extend([i, i + 1]);
                rows[0].extend([sign, 0.0]);
                rows[1].extend([0.0, sign]);
            }
        }
        let d = base[n + 1] - base[n];
        Step {
            vars,
            rows,
            delta0: [d.x, d.y],
        }
    }

    /// `||delta||^2` as `(quad, linear, constant)` over `vars`.
    fn squared_norm(&self) -> (Vec<f64>, Vec<f64>, f64) {
        let k = self.vars.len();
        let mut quad = vec![0.0; k * k];
        let mut lin = vec![0.0; k];
        for r in 0..2 {
            for i in 0..k {
                lin[i] += 2.0 * self.delta0[r] * self.rows[r][i];
                for j in 0..k {
                    quad[i * k + j] += self.rows[r][i] * self.rows[r][j];
                }
            }
        }
        (quad, lin, self.delta0[0].powi(2) + self.delta0[1].powi(2))
    }
}

/// Gap kept between the start point and every tight relaxation.
const INTERIOR: f64 = 1e-3;

/// Builds the convex program of one SCA step at `point`.
pub fn build_program(s: &Scenario, point: &ScaPoint) -> Result<ScaProgram> {
    let n = s.num_slots;
    let base = &point.trajectory.points;
    let dt = s.dt;
    let en = &s.energy;
    let dtb = dt * s.bandwidth;
    let mut b = Builder {
        dim: 0,
        start: Vec::new(),
        expansion: Vec::new(),
        numerator: Vec::new(),
        denominator: Vec::new(),
        constraints: Vec::new(),
    };
    let mut pos: Vec<Option<usize>> = vec![None; n + 1];
    let mut eps: Vec<usize> = Vec::with_capacity(n);
    let slot_at: BTreeMap<usize, &SlotExpansion> = point.slots.iter().map(|e| (e.col + 1, e)).collect();

    b.numerator.push(Term::affine(vec![], vec![], point.fixed_bits));

    for t in 0..=n {
        if t >= 1 && t < n {
            let i = b.var(0.0, 0.0);
            b.var(0.0, 0.0);
            pos[t] = Some(i);
            if let Some(exp) = slot_at.get(&t) {
                add_slot(&mut b, s, exp, i, base[t], dtb)?;
            }
        }
        if t < n {
            eps.push(b.var(1.0, 1.0 + INTERIOR));
        }
    }

    let kappa = en.parasite_coeff();
    for t in 0..n {
        let step = Step::new(&pos, base, t);
        let e0 = point.e0[t];
        let ei = eps[t];
        let (quad, lin, c0) = step.squared_norm();
        let k = step.vars.len();

        // Propulsion energy of step t.
        let a = dt * en.p0 * 3.0 / (en.u_tip * en.u_tip * dt * dt);
        let mut vars = step.vars.clone();
        vars.push(ei);
        let mut q = vec![0.0; (k + 1) * (k + 1)];
        for i in 0..k {
            for j in 0..k {
                q[i * (k + 1) + j] = a * quad[i * k + j];
            }
        }
        let mut l: Vec<f64> = lin.iter().map(|v| a * v).collect();
        l.push(dt * en.p1 * e0);
        let mut rows = step.rows.clone();
        rows[0].push(0.0);
        rows[1].push(0.0);
        b.denominator.push(
            Term::affine(vars.clone(), l, dt * en.p0 + a * c0)
                .with_quad(q)
                .with_atom(Atom::NormCube {
                    rows,
                    offset: step.delta0,
                    coef: kappa / (dt * dt),
                }),
        );

        // 1/eps^2 - 2 e0^4 eps + e0^4 - e0^2 u0 - 2 e0^2 delta0.(delta - delta0)/(v0 dt)^2 <= 0
        let vdt2 = (en.v0 * dt).powi(2);
        let u0 = c0 / vdt2;
        let e2 = e0 * e0;
        let e4 = e2 * e2;
        let mut l: Vec<f64> = (0..k)
            .map(|i| -2.0 * e2 * (step.delta0[0] * step.rows[0][i] + step.delta0[1] * step.rows[1][i]) / vdt2)
            .collect();
        l.push(-2.0 * e4);
        b.constraints.push(
            Term::affine(vars.clone(), l, e4 - e2 * u0).with_atom(Atom::InvSquare { at: k, coef: 1.0 }),
        );
        // The induced factor never exceeds 1, so e <= 2 loses nothing.
        b.constraints.push(Term::affine(vec![ei], vec![1.0], -2.0 / e0));

        if k > 0 {
            let dmax2 = s.d_max * s.d_max;
            b.constraints.push(
                Term::affine(step.vars.clone(), lin.iter().map(|v| v / dmax2).collect(), c0 / dmax2 - 1.0)
                    .with_quad(quad.iter().map(|v| v / dmax2).collect()),
            );
        }
    }

    let program = ConvexProgram {
        dim: b.dim,
        numerator: b.numerator,
        denominator: b.denominator,
        constraints: b.constraints,
        start: b.start,
    };
    if !program.strictly_feasible(&program.start) {
        return Err(Error::InfeasibleExpansion(format!(
            "no strictly feasible start (max constraint {:.3e})",
            program.max_violation(&program.start)
        )));
    }
    Ok(ScaProgram {
        program,
        expansion: b.expansion,
        pos,
        base: base.clone(),
        start_point: s.uav_start,
        end_point: s.uav_end,
    })
}

fn node_position(s: &Scenario, node: Node) -> Vec3 {
    match node {
        Node::Device(k) => s.device_positions[k],
        Node::Irs => s.irs_position,
        Node::Jammer => s.jammer_position,
    }
}

/// Slack for `1/d` to `node`, created on first use, with its linking constraint.
fn distance_slack(
    b: &mut Builder,
    slacks: &mut BTreeMap<(Node, Side), usize>,
    s: &Scenario,
    node: Node,
    side: Side,
    pos_var: usize,
    q0: Vec3,
) -> usize {
    if let Some(&i) = slacks.get(&(node, side)) {
        return i;
    }
    let p = node_position(s, node);
    let d0sq = (q0 - p).norm().powi(2);
    let hx = 2.0 * (q0.x - p.x) / d0sq;
    let hy = 2.0 * (q0.y - p.y) / d0sq;
    let i = match side {
        Side::Below => {
            let i = b.var(1.0, 1.0 - INTERIOR);
            // F(q)/d0^2 - 3 + 2 z <= 0 : linearized z^-2 from above
            b.constraints.push(
                Term::affine(vec![pos_var, pos_var + 1, i], vec![hx, hy, 2.0], -2.0)
                    .with_quad(vec![1.0 / d0sq, 0.0, 0.0, 0.0, 1.0 / d0sq, 0.0, 0.0, 0.0, 0.0]),
            );
            b.constraints.push(Term::affine(vec![i], vec![-1.0], 0.0));
            i
        }
        Side::Above => {
            let i = b.var(1.0, 1.0 + INTERIOR);
            // z^-2 - F~(q)/d0^2 <= 0 with F~ the tangent of F
            b.constraints.push(
                Term::affine(vec![pos_var, pos_var + 1, i], vec![-hx, -hy, 0.0], -1.0)
                    .with_atom(Atom::InvSquare { at: 2, coef: 1.0 }),
            );
            i
        }
    };
    slacks.insert((node, side), i);
    i
}

fn add_slot(b: &mut Builder, s: &Scenario, exp: &SlotExpansion, pos_var: usize, q0: Vec3, dtb: f64) -> Result<()> {
    let mut slacks = BTreeMap::new();
    let sum: Complex64 = exp.desired.iter().map(|p| p.h * p.w).sum();
    let coef: Vec<f64> = exp
        .desired
        .iter()
        .map(|p| 2.0 * (p.h.conj() * sum).re * p.w / exp.g0)
        .collect();

    // Desired side: 1/s - (c . z - 1) <= 0.
    let mut dvars = Vec::new();
    let mut dstart = 0.0;
    for (path, &c) in exp.desired.iter().zip(&coef) {
        let side = if c >= 0.0 { Side::Below } else { Side::Above };
        let z = distance_slack(b, &mut slacks, s, path.node, side, pos_var, q0);
        dvars.push((z, c));
        dstart += c * b.start[z];
    }
    if !(dstart > 1.0) {
        return Err(Error::InfeasibleExpansion(format!("slot {} desired-signal bound has no interior", exp.col + 1)));
    }
    let s_var = b.var(1.0, (1.0 + INTERIOR) / (dstart - 1.0));
    let mut vars = vec![s_var];
    let mut lin = vec![0.0];
    for (z, c) in &dvars {
        vars.push(*z);
        lin.push(-c);
    }
    b.constraints.push(Term::affine(vars, lin, 1.0).with_atom(Atom::Recip { at: 0, coef: 1.0 }));

    let gamma0 = exp.power * exp.g0 / exp.big_g0;
    let beta = LOG2_E * gamma0 / (1.0 + gamma0);
    let r0 = (1.0 + gamma0).log2();

    if s.p_jam > 0.0 {
        let scale = s.p_jam / exp.big_g0;
        // quadratic form of the jamming gain in normalized inverse distances
        let (mut vars, mut quad_entries): (Vec<usize>, Vec<(usize, usize, f64)>) = (Vec::new(), Vec::new());
        let local = |v: usize, vars: &mut Vec<usize>| match vars.iter().position(|&x| x == v) {
            Some(i) => i,
            None => {
                vars.push(v);
                vars.len() - 1
            }
        };
        let paths = &exp.jamming;
        let cross = if paths.len() == 2 { (paths[0].h.conj() * paths[1].h).re } else { 0.0 };
        let above: Vec<usize> = paths
            .iter()
            .map(|p| distance_slack(b, &mut slacks, s, p.node, Side::Above, pos_var, q0))
            .collect();
        for (i, p) in paths.iter().enumerate() {
            let li = local(above[i], &mut vars);
            quad_entries.push((li, li, scale * p.h.norm_sqr() * p.w * p.w));
        }
        if paths.len() == 2 {
            let ww = paths[0].w * paths[1].w;
            if cross >= 0.0 {
                let (a0, a1) = (local(above[0], &mut vars), local(above[1], &mut vars));
                quad_entries.push((a0, a1, scale * cross * ww));
                quad_entries.push((a1, a0, scale * cross * ww));
            } else {
                // -y1 y2 <= ((y1 - y2)^2 - 4 (y1 + y2) + 4) / 4 for slacks below 1/d
                let below: Vec<usize> = paths
                    .iter()
                    .map(|p| distance_slack(b, &mut slacks, s, p.node, Side::Below, pos_var, q0))
                    .collect();
                let (b0, b1) = (local(below[0], &mut vars), local(below[1], &mut vars));
                let c = scale * cross.abs() * ww / 2.0;
                quad_entries.extend([(b0, b0, c), (b1, b1, c), (b0, b1, -c), (b1, b0, -c)]);
                let lin_below = [(b0, -4.0 * c), (b1, -4.0 * c)];
                let g_var = b.var(1.0, 0.0);
                let gl = local(g_var, &mut vars);
                let k = vars.len();
                let mut quad = vec![0.0; k * k];
                for (i, j, v) in &quad_entries {
                    quad[i * k + j] += v;
                }
                let mut lin = vec![0.0; k];
                for (i, v) in lin_below {
                    lin[i] += v;
                }
                lin[gl] = -1.0;
                let term = Term::affine(vars.clone(), lin, s.sigma2 / exp.big_g0 + 4.0 * c).with_quad(quad);
                finish_jamming(b, term, g_var)?;
                add_rate(b, s_var, Some(g_var), dtb, r0, beta);
                return Ok(());
            }
        }
        let g_var = b.var(1.0, 0.0);
        let gl = local(g_var, &mut vars);
        let k = vars.len();
        let mut quad = vec![0.0; k * k];
        for (i, j, v) in &quad_entries {
            quad[i * k + j] += v;
        }
        let mut lin = vec![0.0; k];
        lin[gl] = -1.0;
        let term = Term::affine(vars.clone(), lin, s.sigma2 / exp.big_g0).with_quad(quad);
        finish_jamming(b, term, g_var)?;
        add_rate(b, s_var, Some(g_var), dtb, r0, beta);
    } else {
        add_rate(b, s_var, None, dtb, r0, beta);
    }
    Ok(())
}

/// Sets the start of `g` strictly above the jamming bound and records the constraint.
fn finish_jamming(b: &mut Builder, term: Term, g_var: usize) -> Result<()> {
    b.start[g_var] = 0.0;
    let bound = term.value(&b.start);
    let g_start = bound + INTERIOR * bound.abs().max(1.0);
    if !(g_start > 0.0) {
        return Err(Error::InfeasibleExpansion("jamming bound is not positive".into()));
    }
    b.start[g_var] = g_start;
    b.constraints.push(term);
    b.constraints.push(Term::affine(vec![g_var], vec![-1.0], 0.0));
    Ok(())
}

/// `dt B (log2(1 + gamma0) - beta (s - 1) - beta (g - 1))`.
fn add_rate(b: &mut Builder, s_var: usize, g_var: Option<usize>, dtb: f64, r0: f64, beta: f64) {
    match g_var {
        Some(g) => b.numerator.push(Term::affine(vec![s_var, g], vec![-dtb * beta, -dtb * beta], dtb * (r0 + 2.0 * beta))),
        None => b.numerator.push(Term::affine(vec![s_var], vec![-dtb * beta], dtb * (r0 + beta))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOptions {
    pub max_sca: usize,
    /// Relative EE gain below which the SCA loop stops.
    pub tol: f64,
    pub dinkelbach_tol: f64,
    pub max_dinkelbach: usize,
    /// Step halvings tried before a candidate is rejected.
    pub halvings: usize,
    pub barrier: BarrierOptions,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            max_sca: 10,
            tol: 1e-5,
            dinkelbach_tol: 1e-7,
            max_dinkelbach: 20,
            halvings: 10,
            barrier: BarrierOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachOutcome {
    pub trajectory: Trajectory,
    /// Approximate-ratio history.
    pub lambdas: Vec<f64>,
    pub iterations: usize,
    pub degraded: bool,
}

/// Dinkelbach over one SCA program, starting from the true EE at the point.
pub fn dinkelbach_loop(s: &Scenario, point: &ScaPoint, tol: f64, max_iter: usize, barrier: &BarrierOptions) -> Result<DinkelbachOutcome> {
    let prog = build_program(s, point)?;
    let res = dinkelbach(&prog.program, point.ee, tol, max_iter, barrier)?;
    Ok(DinkelbachOutcome {
        trajectory: prog.trajectory_from(&res.x),
        lambdas: res.history,
        iterations: res.iterations,
        degraded: res.degraded,
    })
}

/// Moves a path with saturated steps slightly toward the straight line so
/// that the step constraints have an interior.
pub fn interior_expansion(s: &Scenario, traj: &Trajectory) -> Trajectory {
    let tight = traj
        .points
        .windows(2)
        .any(|w| w[1].dist(w[0]) >= s.d_max * (1.0 - 1e-9));
    if !tight {
        return traj.clone();
    }
    let line = crate::scenario::initial_trajectory(s);
    blend(s, traj, &line, 1e-3)
}

/// `(1 - a) from + a to` with exact endpoints.
pub fn blend(s: &Scenario, from: &Trajectory, to: &Trajectory, a: f64) -> Trajectory {
    let n = from.points.len() - 1;
    let points = from
        .points
        .iter()
        .zip(&to.points)
        .enumerate()
        .map(|(i, (p, q))| {
            if i == 0 {
                s.uav_start
            } else if i == n {
                s.uav_end
            } else {
                Vec3::new(p.x + a * (q.x - p.x), p.y + a * (q.y - p.y), s.altitude)
            }
        })
        .collect();
    Trajectory { points }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutcome {
    pub trajectory: Trajectory,
    /// True EE after each accepted SCA step, starting with the input's.
    pub ee_history: Vec<f64>,
    pub sca_iterations: usize,
    pub dinkelbach_iterations: usize,
    pub degraded: bool,
    pub note: Option<String>,
}

fn true_ee(s: &Scenario, traj: &Trajectory, phases: &PhasePlan, plan: &ResourcePlan) -> Result<f64> {
    evaluate(s, traj, phases, plan).map(|e| e.ee)
}

fn steps_ok(s: &Scenario, traj: &Trajectory) -> bool {
    traj.points.windows(2).all(|w| w[1].dist(w[0]) <= s.d_max * (1.0 + STEP_SLACK))
}

/// Trajectory block. Never returns a path with lower true EE than the input.
pub fn optimize_trajectory(
    s: &Scenario,
    traj_in: &Trajectory,
    phases: &PhasePlan,
    plan: &ResourcePlan,
    opts: &TrajectoryOptions,
) -> Result<TrajectoryOutcome> {
    let mut current = traj_in.clone();
    let mut ee = true_ee(s, &current, phases, plan)?;
    let mut out = TrajectoryOutcome {
        trajectory: current.clone(),
        ee_history: vec![ee],
        sca_iterations: 0,
        dinkelbach_iterations: 0,
        degraded: false,
        note: None,
    };
    if s.num_slots < 2 {
        return Ok(out);
    }
    for _ in 0..opts.max_sca {
        out.sca_iterations += 1;
        let expansion = interior_expansion(s, &current);
        let step = ScaPoint::new(s, &expansion, phases, plan)
            .and_then(|p| dinkelbach_loop(s, &p, opts.dinkelbach_tol, opts.max_dinkelbach, &opts.barrier));
        let cand = match step {
            Ok(d) => {
                out.dinkelbach_iterations += d.iterations;
                out.degraded |= d.degraded;
                d.trajectory
            }
            Err(e) => {
                out.note = Some(e.to_string());
                break;
            }
        };
        let mut accepted = None;
        let mut a = 1.0;
        for _ in 0..=opts.halvings {
            let trial = blend(s, &current, &cand, a);
            if steps_ok(s, &trial) {
                let t_ee = true_ee(s, &trial, phases, plan)?;
                if t_ee >= ee {
                    accepted = Some((trial, t_ee));
                    break;
                }
            }
            a *= 0.5;
        }
        let Some((next, next_ee)) = accepted else { break };
        let gain = (next_ee - ee) / ee.abs().max(f64::MIN_POSITIVE);
        current = next;
        ee = next_ee;
        out.ee_history.push(ee);
        if gain < opts.tol {
            break;
        }
    }
    out.trajectory = current;
    Ok(out)
}
