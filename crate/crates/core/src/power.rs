//! Transmit-power block: capped water-filling per device.
//!
//! For a fixed schedule each device maximizes `sum log2(1 + c[n] p[n])` over
//! its scheduled slots under `sum p <= N p_bar` and `0 <= p <= p_max`. The KKT
//! solution is `p[n] = clamp(1/nu - 1/c[n], 0, p_max)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{ResourcePlan, SlotGains};
use crate::scenario::Scenario;

const NU_RTOL: f64 = 1e-12;
const BUDGET_RTOL: f64 = 1e-9;
const MAX_BISECT: usize = 200;

/// One device's power problem over its scheduled slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSubproblem {
    /// Plan columns the device is scheduled in.
    pub slots: Vec<usize>,
    /// `g_k / (p_j g_j + sigma2)` per scheduled slot, 1/W.
    pub c: Vec<f64>,
    pub budget: f64,
    pub cap: f64,
}

fn fill(c: &[f64], nu: f64, cap: f64) -> impl Iterator<Item = f64> + '_ {
    c.iter().map(move |&ci| if ci > 0.0 { (1.0 / nu - 1.0 / ci).clamp(0.0, cap) } else { 0.0 })
}

/// Water level `nu` such that the capped allocation spends `budget`.
///
/// Requires `budget < cap * #{c > 0}`; otherwise every slot sits at the cap
/// and no interior level exists.
pub fn waterfill_level(c: &[f64], budget: f64, cap: f64) -> Result<f64> {
    let active: Vec<f64> = c.iter().copied().filter(|&x| x > 0.0).collect();
    if active.is_empty() || !(budget > 0.0) || budget >= cap * active.len() as f64 {
        return Err(Error::NonBracketing);
    }
    let c_min = active.iter().copied().fold(f64::INFINITY, f64::min);
    let c_max = active.iter().copied().fold(0.0, f64::max);
    let spent = |nu: f64| fill(&active, nu, cap).sum::<f64>();

    // At `lo` every slot is capped, at `hi` every slot is empty.
    let mut lo = 1.0 / (cap + 1.0 / c_min);
    let mut hi = c_max;
    if !(spent(lo) > budget && spent(hi) <= budget) {
        return Err(Error::NonBracketing);
    }
    for _ in 0..MAX_BISECT {
        let mid = (lo * hi).sqrt();
        if spent(mid) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if budget - spent(hi) <= BUDGET_RTOL * budget || (hi - lo) <= NU_RTOL * hi {
            break;
        }
    }
    Ok(hi)
}

/// Optimal powers for one device, aligned with `c`.
pub fn allocate(c: &[f64], budget: f64, cap: f64) -> Vec<f64> {
    let active = c.iter().filter(|&&x| x > 0.0).count();
    if active == 0 {
        return vec![0.0; c.len()];
    }
    if cap * active as f64 <= budget {
        return c.iter().map(|&x| if x > 0.0 { cap } else { 0.0 }).collect();
    }
    match waterfill_level(c, budget, cap) {
        Ok(nu) => fill(c, nu, cap).collect(),
        Err(_) => vec![0.0; c.len()],
    }
}

/// `sum log2(1 + c p)`.
pub fn objective(c: &[f64], p: &[f64]) -> f64 {
    c.iter().zip(p).map(|(&ci, &pi)| (1.0 + ci * pi).log2()).sum()
}

/// Builds every device's subproblem from the current gains and schedule.
pub fn power_subproblems(s: &Scenario, gains: &[SlotGains], schedule: &[Vec<bool>]) -> Vec<PowerSubproblem> {
    let budget = s.num_slots as f64 * s.p_bar;
    schedule
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let slots: Vec<usize> = row.iter().enumerate().filter(|(_, &on)| on).map(|(n, _)| n).collect();
            let c = slots
                .iter()
                .map(|&n| gains[n].g_k[k] / (s.p_jam * gains[n].g_j + s.sigma2))
                .collect();
            PowerSubproblem {
                slots,
                c,
                budget,
                cap: s.p_max,
            }
        })
        .collect()
}

/// Solves all devices; unscheduled slots get zero power.
pub fn optimize_power(subproblems: &[PowerSubproblem], num_slots: usize) -> Vec<Vec<f64>> {
    subproblems
        .par_iter()
        .map(|sp| {
            let mut row = vec![0.0; num_slots];
            for (&n, p) in sp.slots.iter().zip(allocate(&sp.c, sp.budget, sp.cap)) {
                row[n] = p;
            }
            row
        })
        .collect()
}

/// Power block: returns the plan with optimal powers for its schedule.
pub fn optimize_power_plan(s: &Scenario, gains: &[SlotGains], plan: &ResourcePlan) -> ResourcePlan {
    let subs = power_subproblems(s, gains, &plan.schedule);
    ResourcePlan {
        power: optimize_power(&subs, s.num_slots),
        schedule: plan.schedule.clone(),
    }
}
