//! Shared oracles and criterion checks for the integration tests.
//!
//! Every check returns `Ok(detail)` or `Err(detail)` so the acceptance
//! report can print one line per criterion while the focused test files
//! assert on the same functions.
#![allow(dead_code)]

use std::f64::consts::{LOG2_E, PI};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jamguard::channel::{cascade_gain, cascade_vectors, effective_gains, phase_vector, slot_channels};
use jamguard::convex::{ConvexProgram, Term};
use jamguard::energy::{induced_factor, propulsion_power};
use jamguard::fractional::dinkelbach;
use jamguard::irs::{lambda_max, solve_slot, PhaseOptions, SlotPhaseProblem};
use jamguard::metrics::{evaluate, PhasePlan, ResourcePlan, SolutionTrace};
use jamguard::orchestrator::{run_bcd, run_benchmark_no_irs, run_sweep, BcdOptions, SweepAxis, SweepRow};
use jamguard::power::{allocate, objective};
use jamguard::scenario::{initial_trajectory, EnergyParams, ScenarioConfig, UavConfig};
use jamguard::schedule::{optimize_schedule, scheduled_total};
use jamguard::trajectory::{optimize_trajectory, rate_lower_bound, TrajectoryOptions};
use jamguard::{Scenario, Setup, Trajectory, Vec3};

pub type Check = std::result::Result<String, String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Desk-scale profile used by the slower checks: 20 one-second slots and a
/// 8 x 4 surface.
pub fn ci_scenario(setup: Setup) -> Scenario {
    let mut cfg = Scenario::preset(setup, 1).unwrap().to_config();
    cfg.uav.duration = 20.0;
    cfg.uav.dt = 1.0;
    cfg.irs.mx = 8;
    cfg.irs.mz = 4;
    cfg.build().unwrap()
}

fn within(budget: Duration, started: Instant) -> std::result::Result<(), String> {
    let used = started.elapsed();
    if used <= budget {
        Ok(())
    } else {
        Err(format!("took {used:.2?}, budget {budget:.0?}"))
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rand_c(r: &mut ChaCha8Rng) -> Complex64 {
    c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

// ---------------------------------------------------------------- energy

pub fn energy_model() -> Check {
    let t0 = Instant::now();
    let p = EnergyParams::default();
    let at = |v: f64| propulsion_power(v, &p).unwrap();
    let (p0, p10, p60) = (at(0.0), at(10.0), at(60.0));
    if (p0 - 168.484).abs() > 0.01 {
        return Err(format!("P(0) = {p0}"));
    }
    if (p10 - 126.03).abs() > 0.05 {
        return Err(format!("P(10) = {p10}"));
    }
    if !(p10 < p0 && p0 < p60) {
        return Err(format!("not U-shaped: {p10} {p0} {p60}"));
    }
    within(Duration::from_secs(1), t0)?;
    Ok(format!("P(0)={p0:.3} W, P(10)={p10:.3} W, P(60)={p60:.1} W"))
}

// ---------------------------------------------------------------- channel

/// `|h_ku + h_kr^H Gamma h_ru|^2` assembled with dense linear algebra.
pub fn direct_gain(h_ku: Complex64, h_kr: &[Complex64], h_ru: &[Complex64], theta: &[f64]) -> f64 {
    let m = theta.len();
    let gamma = DMatrix::from_fn(m, m, |i, j| if i == j { Complex64::from_polar(1.0, theta[i]) } else { c(0.0, 0.0) });
    let hkr = DVector::from_column_slice(h_kr);
    let hru = DVector::from_column_slice(h_ru);
    let reflected = (hkr.adjoint() * gamma * hru)[(0, 0)];
    (h_ku + reflected).norm_sqr()
}

pub fn channel_identity() -> Check {
    let t0 = Instant::now();
    let mut r = rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut s = Scenario::preset(Setup::A, 1).unwrap();
        s.irs_mx = r.gen_range(1..6);
        s.irs_mz = r.gen_range(1..5);
        s.irs_position = Vec3::new(r.gen_range(0.0..400.0), r.gen_range(0.0..200.0), r.gen_range(0.0..20.0));
        s.device_positions = (0..3)
            .map(|_| Vec3::new(r.gen_range(0.0..400.0), r.gen_range(0.0..200.0), 0.0))
            .collect();
        s.jammer_position = Vec3::new(r.gen_range(0.0..400.0), r.gen_range(0.0..200.0), 0.0);
        let uav = Vec3::new(r.gen_range(-50.0..450.0), r.gen_range(-50.0..250.0), 100.0);
        let ch = slot_channels(&s, uav).map_err(|e| e.to_string())?;
        let theta: Vec<f64> = (0..s.irs_elements()).map(|_| r.gen_range(0.0..2.0 * PI)).collect();
        let v = phase_vector(&theta);
        let (g_k, g_j) = effective_gains(&ch, &v).map_err(|e| e.to_string())?;
        for k in 0..s.num_devices() {
            let cv = cascade_vectors(&ch, k).map_err(|e| e.to_string())?;
            let oracle = direct_gain(ch.h_ku[k], &ch.h_kr[k], &ch.h_ru, &theta);
            let cascade = cascade_gain(&v, &cv.a_k, cv.a_tilde_k);
            worst = worst.max((cascade - oracle).abs() / oracle).max((g_k[k] - oracle).abs() / oracle);
            if k == 0 {
                let oj = direct_gain(ch.h_ju, &ch.h_jr, &ch.h_ru, &theta);
                let cj = cascade_gain(&v, &cv.a_j, cv.a_tilde_j);
                worst = worst.max((cj - oj).abs() / oj).max((g_j - oj).abs() / oj);
            }
        }
    }
    if worst > 1e-10 {
        return Err(format!("max relative gap {worst:.2e}"));
    }
    within(Duration::from_secs(5), t0)?;
    Ok(format!("1000 geometries, max relative gap {worst:.1e}"))
}

// ---------------------------------------------------------------- IRS

pub fn random_phase_problem(r: &mut ChaCha8Rng, m: usize) -> SlotPhaseProblem {
    SlotPhaseProblem {
        a_k: (0..m).map(|_| rand_c(r)).collect(),
        a_tilde_k: rand_c(r),
        a_j: (0..m).map(|_| rand_c(r)).collect(),
        a_tilde_j: rand_c(r),
        sigma2: r.gen_range(0.01..1.0),
    }
}

/// Best SINR over the 32-level phase grid per element.
pub fn grid_sinr(prob: &SlotPhaseProblem) -> f64 {
    let m = prob.a_k.len();
    let levels = 32usize;
    let mut best = 0.0f64;
    let mut idx = vec![0usize; m];
    loop {
        let theta: Vec<f64> = idx.iter().map(|&i| 2.0 * PI * i as f64 / levels as f64).collect();
        best = best.max(prob.sinr(&phase_vector(&theta)));
        let mut d = 0;
        while d < m {
            idx[d] += 1;
            if idx[d] < levels {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == m {
            return best;
        }
    }
}

/// Largest eigenvalue of `a_j a_j^H - eta a_k a_k^H` from a dense solver.
pub fn dense_lambda_max(a_j: &[Complex64], a_k: &[Complex64], eta: f64) -> f64 {
    let aj = DVector::from_column_slice(a_j);
    let ak = DVector::from_column_slice(a_k);
    let phi = &aj * aj.adjoint() - (&ak * ak.adjoint()) * c(eta, 0.0);
    phi.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn irs_mm() -> Check {
    let t0 = Instant::now();
    let mut r = rng(21);
    let mut worst_ratio = f64::INFINITY;
    for i in 0..100 {
        let m = 1 + i % 2;
        let prob = random_phase_problem(&mut r, m);
        let (v, _) = solve_slot(&prob, None, PhaseOptions::default()).map_err(|e| e.to_string())?;
        worst_ratio = worst_ratio.min(prob.sinr(&v) / grid_sinr(&prob));
    }
    if worst_ratio < 0.99 {
        return Err(format!("worst SINR / grid optimum = {worst_ratio:.4}"));
    }
    let mut worst_eig: f64 = 0.0;
    for m in 1..=5 {
        for _ in 0..20 {
            let prob = random_phase_problem(&mut r, m);
            let eta = r.gen_range(0.0..5.0);
            let ours = lambda_max(&prob.a_j, &prob.a_k, eta);
            let dense = dense_lambda_max(&prob.a_j, &prob.a_k, eta);
            worst_eig = worst_eig.max((ours - dense).abs() / dense.abs().max(1.0));
        }
    }
    if worst_eig > 1e-9 {
        return Err(format!("lambda_max gap {worst_eig:.2e}"));
    }
    within(Duration::from_secs(30), t0)?;
    Ok(format!("worst SINR ratio {worst_ratio:.5}, eigen gap {worst_eig:.1e}"))
}

// ---------------------------------------------------------------- power

/// Grid search over allocations that spend the budget: every slot but one
/// takes a level from `{0, u, 2u, ..., cap}` with `u = cap / 1000`, and the
/// remaining slot absorbs what is left of the budget (clipped to the cap).
/// All choices of the absorbing slot are tried; dynamic programming over
/// budget units replaces explicit enumeration.
pub fn grid_waterfill(cvals: &[f64], budget: f64, cap: f64) -> f64 {
    let levels = 1000usize;
    let u = cap / levels as f64;
    let n = cvals.len();
    if budget >= cap * n as f64 {
        return cvals.iter().map(|&ci| (1.0 + ci * cap).log2()).sum();
    }
    let units = ((budget / u) + 1e-9).floor() as usize;
    let mut best_total = f64::NEG_INFINITY;
    for absorb in 0..n {
        // exact[b]: best sum over the other slots using exactly b units.
        let mut exact = vec![f64::NEG_INFINITY; units + 1];
        exact[0] = 0.0;
        for (i, &ci) in cvals.iter().enumerate() {
            if i == absorb {
                continue;
            }
            let gain: Vec<f64> = (0..=levels).map(|l| (1.0 + ci * l as f64 * u).log2()).collect();
            let mut next = vec![f64::NEG_INFINITY; units + 1];
            for b in 0..=units {
                for l in 0..=levels.min(b) {
                    let v = exact[b - l] + gain[l];
                    if v > next[b] {
                        next[b] = v;
                    }
                }
            }
            exact = next;
        }
        for (b, &v) in exact.iter().enumerate() {
            if v == f64::NEG_INFINITY {
                continue;
            }
            let rest = (budget - b as f64 * u).clamp(0.0, cap);
            best_total = best_total.max(v + (1.0 + cvals[absorb] * rest).log2());
        }
    }
    best_total
}

pub fn waterfilling() -> Check {
    let t0 = Instant::now();
    let mut r = rng(31);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = r.gen_range(1..=6);
        let cvals: Vec<f64> = (0..n).map(|_| 10f64.powf(r.gen_range(-1.0..2.5))).collect();
        let cap = r.gen_range(0.1..1.0);
        let budget = cap * r.gen_range(0.2..(n as f64 + 0.5));
        let p = allocate(&cvals, budget, cap);
        let ours = objective(&cvals, &p);
        let grid = grid_waterfill(&cvals, budget, cap);
        if p.iter().sum::<f64>() > budget * (1.0 + 1e-9) || p.iter().any(|&x| x < 0.0 || x > cap) {
            return Err(format!("infeasible allocation {p:?}"));
        }
        // The bisection may leave a 1e-9 share of the budget unspent.
        if ours < grid - 1e-6 {
            return Err(format!("below grid optimum: {ours} < {grid}"));
        }
        worst = worst.max((ours - grid).abs());
    }
    if worst > 1e-4 {
        return Err(format!("gap to grid {worst:.2e}"));
    }
    within(Duration::from_secs(10), t0)?;
    Ok(format!("20 instances, max gap to grid {worst:.1e} bits/s/Hz"))
}

// ---------------------------------------------------------------- scheduling

/// Best total over every assignment of one device per slot.
pub fn enumerate_schedules(rates: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let k = rates.len();
    let n = rates[0].len();
    let mut idx = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, idx.clone());
    loop {
        let total: f64 = idx.iter().enumerate().map(|(col, &dev)| rates[dev][col]).sum();
        if total > best.0 {
            best = (total, idx.clone());
        }
        let mut d = 0;
        while d < n {
            idx[d] += 1;
            if idx[d] < k {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == n {
            return best;
        }
    }
}

pub fn scheduling() -> Check {
    let t0 = Instant::now();
    let mut r = rng(41);
    let mut cases = vec![(5usize, 10usize)];
    for _ in 0..40 {
        cases.push((r.gen_range(1..=5), r.gen_range(1..=7)));
    }
    for (k, n) in cases {
        let rates: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| r.gen_range(0.0..10.0)).collect()).collect();
        let sched = optimize_schedule(&rates);
        let (best, assign) = enumerate_schedules(&rates);
        let picked: Vec<usize> = (0..n).map(|col| (0..k).find(|&d| sched[d][col]).unwrap()).collect();
        if picked != assign || (scheduled_total(&rates, &sched) - best).abs() > 1e-12 * best.max(1.0) {
            return Err(format!("K={k} N={n}: {picked:?} vs {assign:?}"));
        }
    }
    within(Duration::from_secs(5), t0)?;
    Ok("41 instances match enumeration, largest K=5 N=10".into())
}

// ---------------------------------------------------------------- bounds

pub fn lemma_and_taylor() -> Check {
    let t0 = Instant::now();
    let mut r = rng(51);
    let logu = |r: &mut ChaCha8Rng| 10f64.powf(r.gen_range(-3.0..3.0));
    for _ in 0..10_000 {
        let (s, g, s0, g0) = (logu(&mut r), logu(&mut r), logu(&mut r), logu(&mut r));
        let lb = rate_lower_bound(s, g, s0, g0).unwrap();
        let exact = (1.0 + 1.0 / (s * g)).log2();
        if lb > exact + 1e-12 * exact.abs().max(1.0) {
            return Err(format!("rate bound above rate at S={s} G={g} S0={s0} G0={g0}"));
        }
        let at = rate_lower_bound(s0, g0, s0, g0).unwrap();
        let e0 = (1.0 + 1.0 / (s0 * g0)).log2();
        if (at - e0).abs() > 1e-9 * e0.max(1.0) {
            return Err(format!("rate bound not tight at S0={s0} G0={g0}"));
        }
        // x^2 >= 2 x0 x - x0^2
        let (x, x0) = (r.gen_range(-50.0..50.0), r.gen_range(-50.0..50.0));
        if x * x < 2.0 * x0 * x - x0 * x0 - 1e-9 {
            return Err(format!("square bound fails at x={x} x0={x0}"));
        }
        // 1/z^2 >= 3 - 2 z (tangent at 1)
        let z = logu(&mut r);
        if 1.0 / (z * z) < 3.0 - 2.0 * z - 1e-12 {
            return Err(format!("inverse-square tangent fails at {z}"));
        }
        // ||q - p||^2 >= d0^2 + 2 (q0 - p).(q - q0)
        let p = Vec3::new(r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0), 0.0);
        let q0 = Vec3::new(r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0), 100.0);
        let q = Vec3::new(r.gen_range(-100.0..100.0), r.gen_range(-100.0..100.0), 100.0);
        let lin = (q0 - p).norm().powi(2)
            + 2.0 * ((q0.x - p.x) * (q.x - q0.x) + (q0.y - p.y) * (q.y - q0.y));
        if (q - p).norm().powi(2) < lin - 1e-9 {
            return Err("distance tangent fails".into());
        }
        // -y1 y2 <= ((y1 - y2)^2 - 4 (y1 + y2) + 4) / 4
        let (y1, y2) = (logu(&mut r), logu(&mut r));
        if -y1 * y2 > ((y1 - y2).powi(2) - 4.0 * (y1 + y2) + 4.0) / 4.0 + 1e-9 * (y1 * y2).max(1.0) {
            return Err(format!("cross-term bound fails at {y1}, {y2}"));
        }
        // induced-factor slack: e^-2 - e^2 = u at the true factor
        let v = r.gen_range(0.0..40.0);
        let e = induced_factor(v, 4.03);
        let u = v * v / (4.03 * 4.03);
        if (1.0 / (e * e) - e * e - u).abs() > 1e-9 * u.max(1.0) {
            return Err(format!("induced-factor identity fails at v={v}"));
        }
    }
    within(Duration::from_secs(5), t0)?;
    Ok("10^4 samples, all bounds hold and are tight at expansion".into())
}

// ---------------------------------------------------------------- Dinkelbach

/// `max 2x / (x^2 + 1)` over `[0, 3]`; optimum ratio 1 at `x = 1`.
pub fn scalar_harness() -> ConvexProgram {
    ConvexProgram {
        dim: 1,
        numerator: vec![Term::affine(vec![0], vec![2.0], 0.0)],
        denominator: vec![Term::affine(vec![0], vec![], 1.0).with_quad(vec![1.0])],
        constraints: vec![Term::affine(vec![0], vec![-1.0], 0.0), Term::affine(vec![0], vec![1.0], -3.0)],
        start: vec![0.5],
    }
}

pub fn dinkelbach_sanity() -> Check {
    let res = dinkelbach(&scalar_harness(), 0.8, 1e-10, 20, &Default::default()).map_err(|e| e.to_string())?;
    if (res.lambda - 1.0).abs() > 1e-6 || res.iterations > 20 {
        return Err(format!("lambda={} after {} iterations", res.lambda, res.iterations));
    }
    Ok(format!("lambda={:.9} in {} iterations", res.lambda, res.iterations))
}

// ---------------------------------------------------------------- trajectory

/// Two slots with one free waypoint; a single device served in both.
pub fn toy_scenario(irs: bool) -> Scenario {
    let cfg = ScenarioConfig {
        setup: Setup::A,
        uav: UavConfig {
            start: Some(Vec3::new(0.0, 0.0, 100.0)),
            end: Some(Vec3::new(300.0, 0.0, 100.0)),
            duration: 20.0,
            dt: 10.0,
            v_max: 30.0,
            ..UavConfig::default()
        },
        devices: Some(jamguard::scenario::DevicesConfig::Explicit {
            positions: vec![Vec3::new(120.0, 60.0, 0.0)],
        }),
        ..ScenarioConfig::default()
    };
    let mut cfg = cfg;
    cfg.jammer.position = Some(Vec3::new(200.0, -80.0, 0.0));
    cfg.irs.position = Some(Vec3::new(150.0, 100.0, 3.0));
    cfg.irs.mx = 4;
    cfg.irs.mz = 2;
    cfg.irs.enabled = irs;
    cfg.build().unwrap()
}

pub fn toy_plans(s: &Scenario) -> (PhasePlan, ResourcePlan) {
    let m = if s.irs_enabled { s.irs_elements() } else { 0 };
    let phases = PhasePlan {
        phases: (0..s.num_slots).map(|n| (0..m).map(|i| 0.7 * (i + n) as f64).collect()).collect(),
    };
    let plan = ResourcePlan {
        power: vec![vec![s.p_bar; s.num_slots]],
        schedule: vec![vec![true; s.num_slots]],
    };
    (phases, plan)
}

/// Best EE over the 1 m grid of feasible middle waypoints.
pub fn toy_grid_optimum(s: &Scenario, phases: &PhasePlan, plan: &ResourcePlan) -> (f64, Vec3) {
    let (a, b) = (s.uav_start, s.uav_end);
    let mut best = (f64::NEG_INFINITY, a);
    let lim = s.d_max;
    let (x_lo, x_hi) = ((b.x - lim).floor() as i64, (a.x + lim).ceil() as i64);
    let (y_lo, y_hi) = ((-lim).floor() as i64, lim.ceil() as i64);
    for xi in x_lo..=x_hi {
        for yi in y_lo..=y_hi {
            let q = Vec3::new(xi as f64, yi as f64, s.altitude);
            if q.dist(a) > lim || q.dist(b) > lim {
                continue;
            }
            let t = Trajectory { points: vec![a, q, b] };
            let ee = evaluate(s, &t, phases, plan).unwrap().ee;
            if ee > best.0 {
                best = (ee, q);
            }
        }
    }
    best
}

pub fn trajectory_toy() -> Check {
    let t0 = Instant::now();
    let mut details = Vec::new();
    for irs in [false, true] {
        let s = toy_scenario(irs);
        let (phases, plan) = toy_plans(&s);
        let (grid, at) = toy_grid_optimum(&s, &phases, &plan);
        let out = optimize_trajectory(&s, &initial_trajectory(&s), &phases, &plan, &TrajectoryOptions::default())
            .map_err(|e| e.to_string())?;
        let ee = *out.ee_history.last().unwrap();
        let ratio = ee / grid;
        details.push(format!(
            "irs={irs}: {ratio:.5} of grid optimum at ({:.0}, {:.0})",
            at.x, at.y
        ));
        if ratio < 0.99 {
            return Err(details.join("; "));
        }
    }
    within(Duration::from_secs(60), t0)?;
    Ok(details.join("; "))
}

// ---------------------------------------------------------------- BCD

pub fn monotone(trace: &SolutionTrace) -> std::result::Result<(), String> {
    for w in trace.entries.windows(2) {
        if w[1].ee < w[0].ee * (1.0 - 1e-6) {
            return Err(format!(
                "EE {} -> {} at iteration {} block {}",
                w[0].ee, w[1].ee, w[1].iter, w[1].block
            ));
        }
    }
    Ok(())
}

pub fn bcd_monotonicity() -> Check {
    let t0 = Instant::now();
    let opts = BcdOptions {
        mu2: 0.0,
        i_max: 30,
        ..BcdOptions::default()
    };
    let mut details = Vec::new();
    for setup in [Setup::A, Setup::B] {
        let s = ci_scenario(setup);
        let (sol, trace) = run_bcd(&s, &opts).map_err(|e| e.to_string())?;
        monotone(&trace).map_err(|e| format!("setup {}: {e}", setup.label()))?;
        details.push(format!(
            "setup {}: {} blocks, EE {:.1} -> {:.1}",
            setup.label(),
            trace.entries.len() - 1,
            trace.entries[0].ee,
            sol.evaluation.ee
        ));
    }
    within(Duration::from_secs(600), t0)?;
    Ok(details.join("; "))
}

pub const STRAIGHT_LENGTH: f64 = 447.213_595_499_958;

pub fn qualitative_paths() -> Check {
    let opts = BcdOptions::default();
    let b = ci_scenario(Setup::B);
    let (sol_b, _) = run_bcd(&b, &opts).map_err(|e| e.to_string())?;
    let len = sol_b.trajectory.length();
    let a = ci_scenario(Setup::A);
    let (sol_a, _) = run_benchmark_no_irs(&a, &opts).map_err(|e| e.to_string())?;
    let jam = a.jammer_position;
    let ours = sol_a.trajectory.min_distance_to(jam);
    let line = initial_trajectory(&a).min_distance_to(jam);
    let detail = format!(
        "setup b with IRS length {len:.2} m (limit {:.2}); setup a without IRS min jammer distance {ours:.2} m vs straight {line:.2} m",
        1.02 * STRAIGHT_LENGTH
    );
    if len <= 1.02 * STRAIGHT_LENGTH && ours > line {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn nondecreasing(rows: &[&SweepRow]) -> bool {
    rows.windows(2).all(|w| w[1].ee >= w[0].ee * (1.0 - 1e-6))
}

pub fn qualitative_sweeps() -> Check {
    let t0 = Instant::now();
    let opts = BcdOptions::default();
    let mut details = Vec::new();
    let mut ok = true;
    for setup in [Setup::A, Setup::B] {
        let s = ci_scenario(setup);
        let base = run_sweep(&s, SweepAxis::M, &[32.0], &opts, true).map_err(|e| e.to_string())?;
        let (irs, no) = (base[0].ee, base[1].ee);
        ok &= irs > no;
        details.push(format!("{}: EE {irs:.1} vs {no:.1} w/o IRS", setup.label()));

        let m = run_sweep(&s, SweepAxis::M, &[50.0, 100.0, 150.0], &opts, false).map_err(|e| e.to_string())?;
        let m_rows: Vec<&SweepRow> = m.iter().collect();
        ok &= nondecreasing(&m_rows) && m.iter().all(|r| r.error.is_none());
        details.push(format!(
            "{} M: {}",
            setup.label(),
            m.iter().map(|r| format!("{:.0}", r.ee)).collect::<Vec<_>>().join("/")
        ));

        let values: Vec<f64> = (14..=26).step_by(2).map(f64::from).collect();
        let p = run_sweep(&s, SweepAxis::PbarDbm, &values, &opts, true).map_err(|e| e.to_string())?;
        for variant in ["irs", "no_irs"] {
            let rows: Vec<&SweepRow> = p.iter().filter(|r| r.variant == variant).collect();
            ok &= nondecreasing(&rows) && rows.iter().all(|r| r.error.is_none());
            details.push(format!(
                "{} pbar {variant}: {}",
                setup.label(),
                rows.iter().map(|r| format!("{:.0}", r.ee)).collect::<Vec<_>>().join("/")
            ));
        }
    }
    within(Duration::from_secs(1800), t0)?;
    let d = details.join("; ");
    if ok {
        Ok(d)
    } else {
        Err(d)
    }
}

/// Rate of a scheduled slot straight from the SINR definition.
pub fn rate_bits(s: &Scenario, p: f64, g_k: f64, g_j: f64) -> f64 {
    s.dt * s.bandwidth * (1.0 + p * g_k / (s.p_jam * g_j + s.sigma2)).ln() * LOG2_E
}
