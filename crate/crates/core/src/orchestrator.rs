//! Alternating optimization over power, scheduling, IRS phases and
//! trajectory, plus the no-IRS benchmark and parameter sweeps.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irs::{optimize_phases_all, PhaseOptions};
use crate::metrics::{
    evaluate, rate_matrix, slot_gains, Evaluation, PhasePlan, ResourcePlan, SolutionTrace, TraceEntry,
};
use crate::power::optimize_power_plan;
use crate::scenario::{dbm_to_watts, initial_trajectory, Scenario, Trajectory};
use crate::schedule::{optimize_schedule, optimize_schedule_plan};
use crate::trajectory::{optimize_trajectory, TrajectoryOptions};

/// Blocks that take part in the alternation; a disabled block is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSet {
    pub power: bool,
    pub schedule: bool,
    pub phases: bool,
    pub trajectory: bool,
}

impl BlockSet {
    pub const ALL: BlockSet = BlockSet {
        power: true,
        schedule: true,
        phases: true,
        trajectory: true,
    };
    pub const NONE: BlockSet = BlockSet {
        power: false,
        schedule: false,
        phases: false,
        trajectory: false,
    };
}

impl Default for BlockSet {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdOptions {
    /// Relative EE gain per outer iteration below which the loop stops.
    pub mu2: f64,
    pub i_max: usize,
    pub blocks: BlockSet,
    pub phase: PhaseOptions,
    pub trajectory: TrajectoryOptions,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            mu2: 1e-4,
            i_max: 30,
            blocks: BlockSet::ALL,
            phase: PhaseOptions::default(),
            trajectory: TrajectoryOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub trajectory: Trajectory,
    pub phase_plan: PhasePlan,
    pub resource_plan: ResourcePlan,
    pub evaluation: Evaluation,
}

/// Straight line, uniform power `min(p_bar, p_max)`, zero phases and the
/// schedule that is best for that configuration.
pub fn initial_solution(s: &Scenario) -> Result<(Trajectory, PhasePlan, ResourcePlan)> {
    let traj = initial_trajectory(s);
    let phases = PhasePlan::zeros(s.num_slots, if s.irs_enabled { s.irs_elements() } else { 0 });
    let power = vec![vec![s.p_bar.min(s.p_max); s.num_slots]; s.num_devices()];
    let gains = slot_gains(s, &traj, &phases)?;
    let schedule = optimize_schedule(&rate_matrix(s, &gains, &power));
    Ok((traj, phases, ResourcePlan { power, schedule }))
}

struct State {
    traj: Trajectory,
    phases: PhasePlan,
    plan: ResourcePlan,
    eval: Evaluation,
}

struct BlockOutcome {
    traj: Option<Trajectory>,
    phases: Option<PhasePlan>,
    plan: Option<ResourcePlan>,
    inner_iters: usize,
    degraded: bool,
    note: Option<String>,
}

impl BlockOutcome {
    fn plan(plan: ResourcePlan, inner_iters: usize) -> Self {
        Self {
            traj: None,
            phases: None,
            plan: Some(plan),
            inner_iters,
            degraded: false,
            note: None,
        }
    }
}

fn run_block(s: &Scenario, st: &State, block: &str, opts: &BcdOptions) -> Result<BlockOutcome> {
    match block {
        "P" => {
            let gains = slot_gains(s, &st.traj, &st.phases)?;
            Ok(BlockOutcome::plan(optimize_power_plan(s, &gains, &st.plan), 1))
        }
        "U" => {
            let gains = slot_gains(s, &st.traj, &st.phases)?;
            Ok(BlockOutcome::plan(optimize_schedule_plan(s, &gains, &st.plan), 1))
        }
        "Gamma" => {
            let (phases, iters) = optimize_phases_all(s, &st.traj, &st.plan, &st.phases, opts.phase)?;
            Ok(BlockOutcome {
                traj: None,
                phases: Some(phases),
                plan: None,
                inner_iters: iters,
                degraded: false,
                note: None,
            })
        }
        "Q" => {
            let out = optimize_trajectory(s, &st.traj, &st.phases, &st.plan, &opts.trajectory)?;
            Ok(BlockOutcome {
                traj: Some(out.trajectory),
                phases: None,
                plan: None,
                inner_iters: out.dinkelbach_iterations,
                degraded: out.degraded,
                note: out.note,
            })
        }
        _ => unreachable!("unknown block {block}"),
    }
}

fn entry(iter: usize, block: &str, eval: &Evaluation, delta: f64, inner_iters: usize, t0: Instant) -> TraceEntry {
    TraceEntry {
        iter,
        block: block.into(),
        throughput: eval.throughput,
        energy: eval.energy,
        ee: eval.ee,
        delta,
        inner_iters,
        wall_time_s: t0.elapsed().as_secs_f64(),
        note: None,
    }
}

/// Block coordinate ascent on EE in the order power, schedule, phases,
/// trajectory. A block whose output would lower EE, or that fails, leaves
/// the solution unchanged and notes why in the trace.
pub fn run_bcd(s: &Scenario, opts: &BcdOptions) -> Result<(Solution, SolutionTrace)> {
    let (traj, phases, plan) = initial_solution(s)?;
    let eval = evaluate(s, &traj, &phases, &plan)?;
    let mut st = State {
        traj,
        phases,
        plan,
        eval,
    };
    let mut trace = SolutionTrace {
        entries: vec![entry(0, "init", &st.eval, 0.0, 0, Instant::now())],
        outer_iterations: 0,
        converged: false,
        degraded: false,
    };
    let blocks: Vec<&str> = [
        ("P", opts.blocks.power),
        ("U", opts.blocks.schedule),
        ("Gamma", opts.blocks.phases && s.irs_enabled),
        ("Q", opts.blocks.trajectory),
    ]
    .into_iter()
    .filter_map(|(b, on)| on.then_some(b))
    .collect();

    for iter in 1..=opts.i_max {
        trace.outer_iterations = iter;
        let ee_start = st.eval.ee;
        for &block in &blocks {
            let t0 = Instant::now();
            let before = st.eval.ee;
            let (mut e, note) = match run_block(s, &st, block, opts) {
                Ok(out) => {
                    trace.degraded |= out.degraded;
                    let traj = out.traj.unwrap_or_else(|| st.traj.clone());
                    let phases = out.phases.unwrap_or_else(|| st.phases.clone());
                    let plan = out.plan.unwrap_or_else(|| st.plan.clone());
                    match evaluate(s, &traj, &phases, &plan) {
                        Ok(eval) if eval.ee >= before => {
                            st = State {
                                traj,
                                phases,
                                plan,
                                eval,
                            };
                            (entry(iter, block, &st.eval, st.eval.ee - before, out.inner_iters, t0), out.note)
                        }
                        Ok(eval) => (
                            entry(iter, block, &st.eval, 0.0, out.inner_iters, t0),
                            Some(format!("rejected: EE would drop to {:.6e}", eval.ee)),
                        ),
                        Err(err) => (entry(iter, block, &st.eval, 0.0, out.inner_iters, t0), Some(err.to_string())),
                    }
                }
                Err(err) => (entry(iter, block, &st.eval, 0.0, 0, t0), Some(err.to_string())),
            };
            e.note = note;
            trace.entries.push(e);
        }
        let gain = (st.eval.ee - ee_start) / ee_start.abs().max(f64::MIN_POSITIVE);
        if gain < opts.mu2 {
            trace.converged = true;
            break;
        }
    }
    Ok((
        Solution {
            trajectory: st.traj,
            phase_plan: st.phases,
            resource_plan: st.plan,
            evaluation: st.eval,
        },
        trace,
    ))
}

/// The same alternation with the IRS switched off.
pub fn run_benchmark_no_irs(s: &Scenario, opts: &BcdOptions) -> Result<(Solution, SolutionTrace)> {
    run_bcd(&s.without_irs(), opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "pj_dbm")]
    PjDbm,
    M,
    #[serde(rename = "pbar_dbm")]
    PbarDbm,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PjDbm => "pj_dbm",
            SweepAxis::M => "M",
            SweepAxis::PbarDbm => "pbar_dbm",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(v: &str) -> Result<Self> {
        match v {
            "pj_dbm" => Ok(SweepAxis::PjDbm),
            "M" | "m" => Ok(SweepAxis::M),
            "pbar_dbm" => Ok(SweepAxis::PbarDbm),
            _ => Err(Error::Config {
                field: "axis".into(),
                message: format!("unknown sweep axis `{v}` (pj_dbm, M, pbar_dbm)"),
            }),
        }
    }
}

/// Array shape for `m` elements: the current row count is kept when it
/// divides `m`, otherwise the most nearly square factorization is used.
pub fn irs_shape(m: usize, mz: usize) -> (usize, usize) {
    if mz > 0 && m % mz == 0 {
        return (m / mz, mz);
    }
    let mut best = (m, 1);
    for z in 1..=m {
        if z * z > m {
            break;
        }
        if m % z == 0 {
            best = (m / z, z);
        }
    }
    best
}

/// Copy of `s` with the swept parameter set to `value`.
pub fn apply_axis(s: &Scenario, axis: SweepAxis, value: f64) -> Result<Scenario> {
    let mut out = s.clone();
    match axis {
        SweepAxis::PjDbm => out.p_jam = dbm_to_watts(value),
        SweepAxis::PbarDbm => out.p_bar = dbm_to_watts(value),
        SweepAxis::M => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::Config {
                    field: "values".into(),
                    message: format!("IRS element count must be a positive integer, got {value}"),
                });
            }
            let (mx, mz) = irs_shape(value as usize, s.irs_mz);
            out.irs_mx = mx;
            out.irs_mz = mz;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    /// `irs` or `no_irs`.
    pub variant: String,
    pub throughput: f64,
    pub energy: f64,
    pub ee: f64,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One alternation run per value (and a no-IRS run when `benchmark`),
/// evaluated in parallel; rows come back in value order, IRS variant first.
/// A failing point yields a row with NaN metrics and the error message.
pub fn run_sweep(
    s: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    opts: &BcdOptions,
    benchmark: bool,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Config {
            field: "values".into(),
            message: "sweep needs at least one value".into(),
        });
    }
    let mut jobs = Vec::new();
    for &v in values {
        if s.irs_enabled {
            jobs.push((v, true));
        }
        if benchmark || !s.irs_enabled {
            jobs.push((v, false));
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(value, irs)| {
            let variant = if irs { "irs" } else { "no_irs" }.to_string();
            let run = apply_axis(s, axis, value).and_then(|p| {
                if irs {
                    run_bcd(&p, opts)
                } else {
                    run_benchmark_no_irs(&p, opts)
                }
            });
            match run {
                Ok((sol, trace)) => SweepRow {
                    axis_value: value,
                    variant,
                    throughput: sol.evaluation.throughput,
                    energy: sol.evaluation.energy,
                    ee: sol.evaluation.ee,
                    degraded: trace.degraded,
                    error: None,
                },
                Err(e) => SweepRow {
                    axis_value: value,
                    variant,
                    throughput: f64::NAN,
                    energy: f64::NAN,
                    ee: f64::NAN,
                    degraded: true,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}
