//! Line-of-sight channel model: direct links, UPA steering at the IRS,
//! reflected links and the cascade vectors used by the phase solver.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::{Scenario, Vec3};

/// Relative modulus tolerance accepted for IRS reflection coefficients.
pub const UNIT_TOL: f64 = 1e-9;

/// `sqrt(rho)/d * exp(-j 2 pi d / lambda)`.
pub fn los_scalar_channel(tx: Vec3, rx: Vec3, rho: f64, lambda: f64) -> Result<Complex64> {
    let d = rx.dist(tx);
    if d == 0.0 {
        return Err(Error::SingularDistance);
    }
    Ok(Complex64::from_polar(rho.sqrt() / d, -2.0 * PI * d / lambda))
}

/// Unit-modulus UPA response of an `mx x mz` array at `irs` toward `target`.
///
/// Entry `mx_i * mz + mz_i` carries the phase
/// `-2 pi (d/lambda) (mx_i phi_x + mz_i phi_z)` on top of the common
/// propagation phase `-2 pi d_ru / lambda`.
pub fn upa_steering(
    irs: Vec3,
    target: Vec3,
    mx: usize,
    mz: usize,
    spacing: f64,
    lambda: f64,
) -> Result<Vec<Complex64>> {
    let dist = target.dist(irs);
    if dist == 0.0 {
        return Err(Error::SingularDistance);
    }
    let phi_x = (target.x - irs.x) / dist;
    let phi_z = (target.z - irs.z) / dist;
    let k = 2.0 * PI * spacing / lambda;
    let common = -2.0 * PI * dist / lambda;
    let mut out = Vec::with_capacity(mx * mz);
    for ix in 0..mx {
        for iz in 0..mz {
            let phase = common - k * (ix as f64 * phi_x + iz as f64 * phi_z);
            out.push(Complex64::from_polar(1.0, phase));
        }
    }
    Ok(out)
}

/// Every channel seen in one slot with the UAV at a given position.
#[derive(Debug, Clone)]
pub struct SlotChannels {
    pub h_ku: Vec<Complex64>,
    pub h_ju: Complex64,
    /// Device-IRS links, one M-vector per device. Empty when the IRS is off.
    pub h_kr: Vec<Vec<Complex64>>,
    pub h_jr: Vec<Complex64>,
    pub h_ru: Vec<Complex64>,
    pub d_ku: Vec<f64>,
    pub d_ju: f64,
    pub d_kr: Vec<f64>,
    pub d_jr: f64,
    pub d_ru: f64,
    pub irs_enabled: bool,
}

fn reflected(s: &Scenario, node: Vec3) -> Result<(Vec<Complex64>, f64)> {
    let d = node.dist(s.irs_position);
    if d == 0.0 {
        return Err(Error::SingularDistance);
    }
    let amp = s.rho.sqrt() / d;
    let steer = upa_steering(s.irs_position, node, s.irs_mx, s.irs_mz, s.element_spacing, s.wavelength)?;
    Ok((steer.into_iter().map(|e| e * amp).collect(), d))
}

/// Assembles all links for the UAV at `uav`.
pub fn slot_channels(s: &Scenario, uav: Vec3) -> Result<SlotChannels> {
    let mut h_ku = Vec::with_capacity(s.num_devices());
    let mut d_ku = Vec::with_capacity(s.num_devices());
    for &dev in &s.device_positions {
        h_ku.push(los_scalar_channel(dev, uav, s.rho, s.wavelength)?);
        d_ku.push(uav.dist(dev));
    }
    let h_ju = los_scalar_channel(s.jammer_position, uav, s.rho, s.wavelength)?;
    let d_ju = uav.dist(s.jammer_position);
    let d_ru = uav.dist(s.irs_position);
    if !s.irs_enabled {
        return Ok(SlotChannels {
            h_ku,
            h_ju,
            h_kr: Vec::new(),
            h_jr: Vec::new(),
            h_ru: Vec::new(),
            d_ku,
            d_ju,
            d_kr: Vec::new(),
            d_jr: s.jammer_position.dist(s.irs_position),
            d_ru,
            irs_enabled: false,
        });
    }
    let mut h_kr = Vec::with_capacity(s.num_devices());
    let mut d_kr = Vec::with_capacity(s.num_devices());
    for &dev in &s.device_positions {
        let (h, d) = reflected(s, dev)?;
        h_kr.push(h);
        d_kr.push(d);
    }
    let (h_jr, d_jr) = reflected(s, s.jammer_position)?;
    let (h_ru, _) = reflected(s, uav)?;
    Ok(SlotChannels {
        h_ku,
        h_ju,
        h_kr,
        h_jr,
        h_ru,
        d_ku,
        d_ju,
        d_kr,
        d_jr,
        d_ru,
        irs_enabled: true,
    })
}

/// Phase-domain form of one device/jammer pair:
/// `|v^H a + a_tilde|^2` equals the effective gain for `v_i = exp(j theta_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeVectors {
    pub a_k: Vec<Complex64>,
    pub a_tilde_k: Complex64,
    pub a_j: Vec<Complex64>,
    pub a_tilde_j: Complex64,
}

fn cascade(h_xr: &[Complex64], h_ru: &[Complex64]) -> Vec<Complex64> {
    h_xr.iter().zip(h_ru).map(|(a, b)| a * b.conj()).collect()
}

pub fn cascade_vectors(ch: &SlotChannels, device: usize) -> Result<CascadeVectors> {
    let len = ch.h_ku.len();
    if device >= len {
        return Err(Error::IndexOutOfRange { index: device, len });
    }
    let (a_k, a_j) = if ch.irs_enabled {
        (cascade(&ch.h_kr[device], &ch.h_ru), cascade(&ch.h_jr, &ch.h_ru))
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(CascadeVectors {
        a_k,
        a_tilde_k: ch.h_ku[device].conj(),
        a_j,
        a_tilde_j: ch.h_ju.conj(),
    })
}

/// Reflection coefficients `exp(j theta_i)`.
pub fn phase_vector(angles: &[f64]) -> Vec<Complex64> {
    angles.iter().map(|&t| Complex64::from_polar(1.0, t)).collect()
}

/// `h_direct + h_xr^H diag(v) h_ru`.
pub fn composite(direct: Complex64, h_xr: &[Complex64], h_ru: &[Complex64], v: &[Complex64]) -> Complex64 {
    let mut acc = direct;
    for ((a, b), p) in h_xr.iter().zip(h_ru).zip(v) {
        acc += a.conj() * p * b;
    }
    acc
}

/// Effective power gains `(g_k for every device, g_j)`.
pub fn effective_gains(ch: &SlotChannels, phases: &[Complex64]) -> Result<(Vec<f64>, f64)> {
    if !ch.irs_enabled {
        let gk = ch.h_ku.iter().map(|h| h.norm_sqr()).collect();
        return Ok((gk, ch.h_ju.norm_sqr()));
    }
    if phases.len() != ch.h_ru.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} phases for {} IRS elements",
            phases.len(),
            ch.h_ru.len()
        )));
    }
    for (index, p) in phases.iter().enumerate() {
        let modulus = p.norm();
        if (modulus - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitPhase { index, modulus });
        }
    }
    let gk = ch
        .h_ku
        .iter()
        .zip(&ch.h_kr)
        .map(|(&h, hr)| composite(h, hr, &ch.h_ru, phases).norm_sqr().max(0.0))
        .collect();
    let gj = composite(ch.h_ju, &ch.h_jr, &ch.h_ru, phases).norm_sqr().max(0.0);
    Ok((gk, gj))
}

/// `|v^H a + a_tilde|^2`.
pub fn cascade_gain(v: &[Complex64], a: &[Complex64], a_tilde: Complex64) -> f64 {
    let mut acc = a_tilde;
    for (p, x) in v.iter().zip(a) {
        acc += p.conj() * x;
    }
    acc.norm_sqr()
}
