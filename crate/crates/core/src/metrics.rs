//! Rates, throughput and the energy-efficiency objective.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::channel::{effective_gains, phase_vector, slot_channels};
use crate::energy::{speed_profile, step_energies};
use crate::error::{Error, Result};
use crate::scenario::{Scenario, Trajectory};

/// Per-device transmit powers and the TDMA schedule, both `K x N`.
/// Column `n - 1` belongs to slot `n`, served from waypoint `points[n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourcePlan {
    pub power: Vec<Vec<f64>>,
    pub schedule: Vec<Vec<bool>>,
}

impl ResourcePlan {
    pub fn num_devices(&self) -> usize {
        self.power.len()
    }

    pub fn num_slots(&self) -> usize {
        self.power.first().map_or(0, Vec::len)
    }

    /// Device scheduled in slot column `n`, if any.
    pub fn scheduled(&self, n: usize) -> Option<usize> {
        self.schedule.iter().position(|row| row[n])
    }

    /// Lists every violated constraint (empty when feasible).
    pub fn violations(&self, s: &Scenario) -> Vec<String> {
        let mut out = Vec::new();
        let (k, n) = (s.num_devices(), s.num_slots);
        if self.power.len() != k || self.schedule.len() != k {
            out.push(format!("plan has {} rows, expected {k}", self.power.len()));
            return out;
        }
        if self.power.iter().any(|r| r.len() != n) || self.schedule.iter().any(|r| r.len() != n) {
            out.push(format!("plan rows must have {n} columns"));
            return out;
        }
        for col in 0..n {
            let count = self.schedule.iter().filter(|r| r[col]).count();
            if count > 1 {
                out.push(format!("slot {} schedules {count} devices", col + 1));
            }
        }
        for (dev, row) in self.power.iter().enumerate() {
            let avg = row.iter().sum::<f64>() / n as f64;
            if avg > s.p_bar * (1.0 + 1e-9) {
                out.push(format!("device {dev} average power {avg} exceeds p_bar {}", s.p_bar));
            }
            for (col, &p) in row.iter().enumerate() {
                if !(p >= 0.0 && p <= s.p_max * (1.0 + 1e-9)) {
                    out.push(format!("device {dev} slot {} power {p} outside [0, p_max]", col + 1));
                }
            }
        }
        out
    }
}

/// Reflection angles `theta_i[n]` in `[0, 2 pi)`, one row of `M` per slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<Vec<f64>>,
}

impl PhasePlan {
    pub fn zeros(num_slots: usize, elements: usize) -> Self {
        Self {
            phases: vec![vec![0.0; elements]; num_slots],
        }
    }

    /// Wraps an angle into `[0, 2 pi)`.
    pub fn wrap(theta: f64) -> f64 {
        let w = theta.rem_euclid(TAU);
        if w >= TAU {
            0.0
        } else {
            w
        }
    }
}

/// Bits delivered in one slot: `dt B log2(1 + p_k g_k / (p_j g_j + sigma2))`.
pub fn slot_rate(p_k: f64, g_k: f64, p_j: f64, g_j: f64, sigma2: f64, bandwidth: f64, dt: f64) -> f64 {
    dt * bandwidth * (1.0 + sinr(p_k, g_k, p_j, g_j, sigma2)).log2()
}

pub fn sinr(p_k: f64, g_k: f64, p_j: f64, g_j: f64, sigma2: f64) -> f64 {
    p_k * g_k / (p_j * g_j + sigma2)
}

/// Effective gains for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotGains {
    pub g_k: Vec<f64>,
    pub g_j: f64,
}

/// Gains for slots `1..=N`, evaluated at `points[1..=N]` with the plan's phases.
pub fn slot_gains(s: &Scenario, traj: &Trajectory, phases: &PhasePlan) -> Result<Vec<SlotGains>> {
    check_dims(s, traj, phases, None)?;
    (1..=s.num_slots)
        .map(|n| {
            let ch = slot_channels(s, traj.points[n])?;
            let v = if s.irs_enabled { phase_vector(&phases.phases[n - 1]) } else { Vec::new() };
            let (g_k, g_j) = effective_gains(&ch, &v)?;
            Ok(SlotGains { g_k, g_j })
        })
        .collect()
}

/// `K x N` rates (bits) each device would achieve in each slot at its planned power.
pub fn rate_matrix(s: &Scenario, gains: &[SlotGains], power: &[Vec<f64>]) -> Vec<Vec<f64>> {
    power
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .zip(gains)
                .map(|(&p, g)| slot_rate(p, g.g_k[k], s.p_jam, g.g_j, s.sigma2, s.bandwidth, s.dt))
                .collect()
        })
        .collect()
}

fn check_dims(s: &Scenario, traj: &Trajectory, phases: &PhasePlan, plan: Option<&ResourcePlan>) -> Result<()> {
    let n = s.num_slots;
    if traj.points.len() != n + 1 {
        return Err(Error::DimensionMismatch(format!("trajectory has {} points, expected {}", traj.points.len(), n + 1)));
    }
    if s.irs_enabled {
        let m = s.irs_elements();
        if phases.phases.len() != n || phases.phases.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch(format!("phase plan must be {n} x {m}")));
        }
    }
    if let Some(plan) = plan {
        let k = s.num_devices();
        let bad = plan.power.len() != k
            || plan.schedule.len() != k
            || plan.power.iter().any(|r| r.len() != n)
            || plan.schedule.iter().any(|r| r.len() != n);
        if bad {
            return Err(Error::DimensionMismatch(format!("resource plan must be {k} x {n}")));
        }
    }
    Ok(())
}

/// Per-slot breakdown; row `n` pairs slot `n`'s rate with step `n - 1`'s energy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotReport {
    pub n: usize,
    pub scheduled: Option<usize>,
    pub power_w: f64,
    pub g_k: f64,
    pub g_j: f64,
    pub sinr: f64,
    pub rate_bits: f64,
    pub speed_mps: f64,
    pub propulsion_w: f64,
    pub energy_j: f64,
}

/// Totals of one complete solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub throughput: f64,
    pub energy: f64,
    pub ee: f64,
    pub slots: Vec<SlotReport>,
}

pub fn evaluate(s: &Scenario, traj: &Trajectory, phases: &PhasePlan, plan: &ResourcePlan) -> Result<Evaluation> {
    check_dims(s, traj, phases, Some(plan))?;
    let gains = slot_gains(s, traj, phases)?;
    let speeds = speed_profile(traj, s.dt);
    let energies = step_energies(traj, s.dt, &s.energy);
    let mut slots = Vec::with_capacity(s.num_slots);
    let mut throughput = 0.0;
    for n in 1..=s.num_slots {
        let col = n - 1;
        let g = &gains[col];
        let mut rate_bits = 0.0;
        for k in 0..s.num_devices() {
            if plan.schedule[k][col] {
                rate_bits += slot_rate(plan.power[k][col], g.g_k[k], s.p_jam, g.g_j, s.sigma2, s.bandwidth, s.dt);
            }
        }
        throughput += rate_bits;
        let scheduled = plan.scheduled(col);
        let (power_w, g_k) = scheduled.map_or((0.0, 0.0), |k| (plan.power[k][col], g.g_k[k]));
        slots.push(SlotReport {
            n,
            scheduled,
            power_w,
            g_k,
            g_j: g.g_j,
            sinr: sinr(power_w, g_k, s.p_jam, g.g_j, s.sigma2),
            rate_bits,
            speed_mps: speeds[col],
            propulsion_w: energies[col] / s.dt,
            energy_j: energies[col],
        });
    }
    let energy: f64 = energies.iter().sum();
    Ok(Evaluation {
        throughput,
        energy,
        ee: throughput / energy,
        slots,
    })
}

/// Total collected bits.
pub fn total_throughput(s: &Scenario, traj: &Trajectory, phases: &PhasePlan, plan: &ResourcePlan) -> Result<f64> {
    evaluate(s, traj, phases, plan).map(|e| e.throughput)
}

/// Collected bits per joule of propulsion energy.
pub fn energy_efficiency(s: &Scenario, traj: &Trajectory, phases: &PhasePlan, plan: &ResourcePlan) -> Result<f64> {
    evaluate(s, traj, phases, plan).map(|e| e.ee)
}

/// One row of the optimization trace, recorded after each block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub block: String,
    pub throughput: f64,
    pub energy: f64,
    pub ee: f64,
    /// EE change caused by this block.
    pub delta: f64,
    /// Inner iterations spent by the block.
    pub inner_iters: usize,
    pub wall_time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolutionTrace {
    pub entries: Vec<TraceEntry>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub degraded: bool,
}

impl SolutionTrace {
    pub fn final_ee(&self) -> Option<f64> {
        self.entries.last().map(|e| e.ee)
    }
}
