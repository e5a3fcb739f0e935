//! Rotary-wing propulsion power and flight energy.

use crate::error::{Error, Result};
use crate::scenario::{EnergyParams, Trajectory};

/// Horizontal speed over step `n` (points `n -> n+1`).
pub fn slot_speed(traj: &Trajectory, n: usize, dt: f64) -> Result<f64> {
    let len = traj.num_slots();
    if n >= len {
        return Err(Error::IndexOutOfRange { index: n, len });
    }
    Ok(traj.points[n + 1].dist(traj.points[n]) / dt)
}

/// All `N` step speeds.
pub fn speed_profile(traj: &Trajectory, dt: f64) -> Vec<f64> {
    traj.points.windows(2).map(|w| w[1].dist(w[0]) / dt).collect()
}

/// Induced-power factor `(sqrt(1 + v^4/(4 v0^4)) - v^2/(2 v0^2))^(1/2)`.
///
/// Evaluated through the conjugate form `1/(sqrt(1 + u^2/4) + u/2)` with
/// `u = v^2/v0^2`, which does not cancel at high speed.
pub fn induced_factor(v: f64, v0: f64) -> f64 {
    let u = v * v / (v0 * v0);
    (1.0 / ((1.0 + 0.25 * u * u).sqrt() + 0.5 * u)).sqrt()
}

fn power_unchecked(v: f64, p: &EnergyParams) -> f64 {
    let blade = p.p0 * (1.0 + 3.0 * v * v / (p.u_tip * p.u_tip));
    let induced = p.p1 * induced_factor(v, p.v0);
    let parasite = p.parasite_coeff() * v * v * v;
    blade + induced + parasite
}

/// Propulsion power in watts at horizontal speed `v`.
pub fn propulsion_power(v: f64, p: &EnergyParams) -> Result<f64> {
    if v < 0.0 || v.is_nan() {
        return Err(Error::NegativeSpeed(v));
    }
    Ok(power_unchecked(v, p))
}

/// Per-step propulsion energy `dt * P(v[n])`, n = 0..N-1.
pub fn step_energies(traj: &Trajectory, dt: f64, p: &EnergyParams) -> Vec<f64> {
    speed_profile(traj, dt)
        .into_iter()
        .map(|v| dt * power_unchecked(v, p))
        .collect()
}

/// Total flight energy in joules.
pub fn trajectory_energy(traj: &Trajectory, dt: f64, p: &EnergyParams) -> f64 {
    step_energies(traj, dt, p).iter().sum()
}
