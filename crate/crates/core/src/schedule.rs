//! Scheduling block. The relaxed assignment problem decouples per slot into a
//! linear objective over a simplex, so the column argmax is optimal.

use crate::metrics::{rate_matrix, ResourcePlan, SlotGains};
use crate::scenario::Scenario;

/// One device per slot: the highest rate, lowest index on ties.
pub fn optimize_schedule(rates: &[Vec<f64>]) -> Vec<Vec<bool>> {
    let k = rates.len();
    let n = rates.first().map_or(0, Vec::len);
    let mut out = vec![vec![false; n]; k];
    for col in 0..n {
        let mut best = 0;
        for dev in 1..k {
            if rates[dev][col] > rates[best][col] {
                best = dev;
            }
        }
        if k > 0 {
            out[best][col] = true;
        }
    }
    out
}

/// `sum_n max_k rate[k][n]` for a schedule.
pub fn scheduled_total(rates: &[Vec<f64>], schedule: &[Vec<bool>]) -> f64 {
    let n = rates.first().map_or(0, Vec::len);
    (0..n)
        .map(|col| {
            rates
                .iter()
                .zip(schedule)
                .filter(|(_, s)| s[col])
                .map(|(r, _)| r[col])
                .sum::<f64>()
        })
        .sum()
}

/// Scheduling block with rates evaluated at the plan's current powers.
pub fn optimize_schedule_plan(s: &Scenario, gains: &[SlotGains], plan: &ResourcePlan) -> ResourcePlan {
    let rates = rate_matrix(s, gains, &plan.power);
    ResourcePlan {
        power: plan.power.clone(),
        schedule: optimize_schedule(&rates),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_column_max() {
        let s = optimize_schedule(&[vec![1.0], vec![2.0], vec![0.5]]);
        assert_eq!(s, vec![vec![false], vec![true], vec![false]]);
    }

    #[test]
    fn zero_column_picks_first() {
        let s = optimize_schedule(&[vec![0.0, 1.0], vec![0.0, 1.0]]);
        assert_eq!(s, vec![vec![true, true], vec![false, false]]);
    }

    #[test]
    fn one_per_slot() {
        let rates = vec![vec![3.0, 1.0, 2.0], vec![1.0, 5.0, 2.0], vec![0.0, 0.0, 7.0]];
        let s = optimize_schedule(&rates);
        for col in 0..3 {
            assert_eq!(s.iter().filter(|r| r[col]).count(), 1);
        }
        assert_eq!(scheduled_total(&rates, &s), 15.0);
    }
}
