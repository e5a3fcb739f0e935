//! IRS phase block.
//!
//! Each slot minimizes the inverse SINR
//! `eta(v) = (|v^H a_j + a~_j|^2 + sigma2) / |v^H a_k + a~_k|^2`
//! over unit-modulus `v`. A Dinkelbach parameter `eta` turns the ratio into
//! `f(v) = v^H Phi v + 2 Re{v^H (a~_j^* a_j - eta a~_k^* a_k)} + const`, with
//! `Phi = a_j a_j^H - eta a_k a_k^H`, which is majorized at `v~` by
//! `lambda_max ||v||^2 - 2 Re{v^H omega} + c`. The surrogate is minimized in
//! closed form by aligning every entry with `omega`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{cascade_gain, cascade_vectors, phase_vector, slot_channels, CascadeVectors};
use crate::error::{Error, Result};
use crate::metrics::{PhasePlan, ResourcePlan};
use crate::scenario::{Scenario, Trajectory};

/// Per-slot phase problem. Vectors already carry the `sqrt(p)` factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPhaseProblem {
    pub a_k: Vec<Complex64>,
    pub a_tilde_k: Complex64,
    pub a_j: Vec<Complex64>,
    pub a_tilde_j: Complex64,
    pub sigma2: f64,
}

impl SlotPhaseProblem {
    pub fn from_cascade(c: &CascadeVectors, p_k: f64, p_j: f64, sigma2: f64) -> Self {
        let (sk, sj) = (p_k.sqrt(), p_j.sqrt());
        Self {
            a_k: c.a_k.iter().map(|x| x * sk).collect(),
            a_tilde_k: c.a_tilde_k * sk,
            a_j: c.a_j.iter().map(|x| x * sj).collect(),
            a_tilde_j: c.a_tilde_j * sj,
            sigma2,
        }
    }

    pub fn elements(&self) -> usize {
        self.a_k.len()
    }

    pub fn signal(&self, v: &[Complex64]) -> f64 {
        cascade_gain(v, &self.a_k, self.a_tilde_k)
    }

    pub fn interference(&self, v: &[Complex64]) -> f64 {
        cascade_gain(v, &self.a_j, self.a_tilde_j) + self.sigma2
    }

    pub fn sinr(&self, v: &[Complex64]) -> f64 {
        self.signal(v) / self.interference(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-6 }
    }
}

/// Current inverse SINR.
pub fn dinkelbach_ratio(v: &[Complex64], prob: &SlotPhaseProblem) -> Result<f64> {
    let den = prob.signal(v);
    if !(den > 0.0) {
        return Err(Error::ZeroDesiredSignal);
    }
    Ok(prob.interference(v) / den)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// Largest eigenvalue of `a_j a_j^H - eta a_k a_k^H`.
///
/// The nonzero spectrum equals that of the 2x2 matrix `D G`, where `G` is the
/// Gram matrix of `(a_j, a_k)` and `D = diag(1, -eta)`.
pub fn lambda_max(a_j: &[Complex64], a_k: &[Complex64], eta: f64) -> f64 {
    let nj = norm_sqr(a_j);
    let nk = norm_sqr(a_k);
    if a_j.len() == 1 {
        return nj - eta * nk;
    }
    let gram_det = (nj * nk - dot(a_j, a_k).norm_sqr()).max(0.0);
    let tau = nj - eta * nk;
    0.5 * tau + (0.25 * tau * tau + eta * gram_det).sqrt()
}

fn phi_times(prob: &SlotPhaseProblem, eta: f64, v: &[Complex64]) -> Vec<Complex64> {
    let cj = dot(&prob.a_j, v);
    let ck = dot(&prob.a_k, v);
    prob.a_j
        .iter()
        .zip(&prob.a_k)
        .map(|(aj, ak)| aj * cj - ak * ck * eta)
        .collect()
}

/// `(omega, lambda_max)` of the majorizer at `v_prev`.
pub fn majorizer_omega(v_prev: &[Complex64], eta: f64, prob: &SlotPhaseProblem) -> (Vec<Complex64>, f64) {
    let lam = lambda_max(&prob.a_j, &prob.a_k, eta);
    let phi_v = phi_times(prob, eta, v_prev);
    let wk = prob.a_tilde_k.conj() * eta;
    let wj = prob.a_tilde_j.conj();
    let omega = (0..prob.elements())
        .map(|i| v_prev[i] * lam - phi_v[i] + prob.a_k[i] * wk - prob.a_j[i] * wj)
        .collect();
    (omega, lam)
}

/// Parametric objective `|v^H a_j + a~_j|^2 + sigma2 - eta |v^H a_k + a~_k|^2`.
pub fn parametric_objective(v: &[Complex64], eta: f64, prob: &SlotPhaseProblem) -> f64 {
    prob.interference(v) - eta * prob.signal(v)
}

/// Majorizer built at `v_prev`, evaluated at `v`.
pub fn surrogate(v: &[Complex64], v_prev: &[Complex64], eta: f64, prob: &SlotPhaseProblem) -> f64 {
    let (omega, lam) = majorizer_omega(v_prev, eta, prob);
    let phi_v = phi_times(prob, eta, v_prev);
    let quad = lam * norm_sqr(v_prev) - dot(v_prev, &phi_v).re;
    let c = quad + prob.a_tilde_j.norm_sqr() + prob.sigma2 - eta * prob.a_tilde_k.norm_sqr();
    lam * norm_sqr(v) - 2.0 * dot(v, &omega).re + c
}

/// Unit-modulus maximizer of `Re{v^H omega}`: `v_i = exp(j arg omega_i)`.
pub fn unit_modulus_argmax(omega: &[Complex64]) -> Vec<Complex64> {
    omega
        .iter()
        .map(|w| {
            let m = w.norm();
            if m > 0.0 {
                w / m
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect()
}

/// Alternates the ratio update and the closed-form MM step from `v_init`.
/// Returns the best iterate and the inverse-SINR history.
pub fn optimize_phases_slot(
    prob: &SlotPhaseProblem,
    v_init: &[Complex64],
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if v_init.len() != prob.elements() {
        return Err(Error::DimensionMismatch(format!(
            "{} initial phases for {} elements",
            v_init.len(),
            prob.elements()
        )));
    }
    let mut v = v_init.to_vec();
    let mut eta = dinkelbach_ratio(&v, prob)?;
    let mut history = vec![eta];
    let mut best = (v.clone(), eta);
    for _ in 0..max_iter {
        let (omega, _) = majorizer_omega(&v, eta, prob);
        let next = unit_modulus_argmax(&omega);
        let next_eta = match dinkelbach_ratio(&next, prob) {
            Ok(e) => e,
            Err(_) => break,
        };
        history.push(next_eta);
        if next_eta < best.1 {
            best = (next.clone(), next_eta);
        }
        let gain = (eta - next_eta) / eta;
        v = next;
        eta = next_eta;
        if gain < tol {
            break;
        }
    }
    Ok((best.0, history))
}

/// Entry-wise alignment of the reflected desired paths with the direct one.
pub fn co_phasing_start(prob: &SlotPhaseProblem) -> Vec<Complex64> {
    // v^H a_k + a~_k is maximal in modulus when every conj(v_i) a_k,i has the phase of a~_k.
    let target = prob.a_tilde_k.arg();
    prob.a_k
        .iter()
        .map(|a| {
            if a.norm() > 0.0 {
                Complex64::from_polar(1.0, a.arg() - target)
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect()
}

/// Projection onto unit modulus of the SINR maximizer without the modulus
/// constraint. With `u = [v; 1]` and `b = [a; a~]` the relaxed problem is
/// `max |u^H b_k|^2 / (|u^H b_j|^2 + sigma2 ||u||^2 / (M + 1))`, solved by
/// `u ~ (b_j b_j^H + c I)^-1 b_k` (Sherman-Morrison).
pub fn relaxed_start(prob: &SlotPhaseProblem) -> Vec<Complex64> {
    let m = prob.elements();
    let c = prob.sigma2 / (m + 1) as f64;
    let bk: Vec<Complex64> = prob.a_k.iter().copied().chain([prob.a_tilde_k]).collect();
    let bj: Vec<Complex64> = prob.a_j.iter().copied().chain([prob.a_tilde_j]).collect();
    let coef = dot(&bj, &bk) / (c + norm_sqr(&bj));
    let u: Vec<Complex64> = bk.iter().zip(&bj).map(|(k, j)| k - j * coef).collect();
    let anchor = u[m];
    unit_modulus_argmax(&u[..m].iter().map(|x| x * anchor.conj()).collect::<Vec<_>>())
}

/// Runs the MM loop from the given start, all-ones, the co-phasing start and
/// the relaxed start, keeping the highest SINR.
pub fn solve_slot(prob: &SlotPhaseProblem, v_prev: Option<&[Complex64]>, opts: PhaseOptions) -> Result<(Vec<Complex64>, usize)> {
    let m = prob.elements();
    let mut starts = Vec::with_capacity(4);
    if let Some(v) = v_prev {
        starts.push(v.to_vec());
    }
    starts.push(vec![Complex64::new(1.0, 0.0); m]);
    starts.push(co_phasing_start(prob));
    starts.push(relaxed_start(prob));
    let mut best: Option<(Vec<Complex64>, f64)> = None;
    let mut iters = 0;
    for start in &starts {
        let (v, hist) = match optimize_phases_slot(prob, start, opts.max_iter, opts.tol) {
            Ok(r) => r,
            Err(_) => continue,
        };
        iters += hist.len() - 1;
        let eta = dinkelbach_ratio(&v, prob)?;
        if best.as_ref().is_none_or(|b| eta < b.1) {
            best = Some((v, eta));
        }
    }
    best.map(|b| (b.0, iters)).ok_or(Error::ZeroDesiredSignal)
}

fn angles(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|x| PhasePlan::wrap(x.arg())).collect()
}

/// Phase block: every slot with a transmitting device is re-optimized; a slot
/// keeps its previous phases unless the new ones raise its SINR.
/// Returns the plan and the number of MM iterations spent.
pub fn optimize_phases_all(
    s: &Scenario,
    traj: &Trajectory,
    plan: &ResourcePlan,
    prev: &PhasePlan,
    opts: PhaseOptions,
) -> Result<(PhasePlan, usize)> {
    if !s.irs_enabled {
        return Ok((prev.clone(), 0));
    }
    let m = s.irs_elements();
    if prev.phases.len() != s.num_slots || prev.phases.iter().any(|r| r.len() != m) {
        return Err(Error::DimensionMismatch(format!("phase plan must be {} x {m}", s.num_slots)));
    }
    let rows: Vec<Result<(Vec<f64>, usize)>> = (0..s.num_slots)
        .into_par_iter()
        .map(|col| {
            let keep = prev.phases[col].clone();
            let Some(k) = plan.scheduled(col) else {
                return Ok((keep, 0));
            };
            let p_k = plan.power[k][col];
            if !(p_k > 0.0) {
                return Ok((keep, 0));
            }
            let ch = slot_channels(s, traj.points[col + 1])?;
            let prob = SlotPhaseProblem::from_cascade(&cascade_vectors(&ch, k)?, p_k, s.p_jam, s.sigma2);
            let v_prev = phase_vector(&keep);
            let (v, iters) = match solve_slot(&prob, Some(&v_prev), opts) {
                Ok(r) => r,
                Err(_) => return Ok((keep, 0)),
            };
            if prob.sinr(&v) > prob.sinr(&v_prev) {
                Ok((angles(&v), iters))
            } else {
                Ok((keep, iters))
            }
        })
        .collect();
    let mut phases = Vec::with_capacity(s.num_slots);
    let mut total = 0;
    for r in rows {
        let (row, it) = r?;
        phases.push(row);
        total += it;
    }
    Ok((PhasePlan { phases }, total))
}
