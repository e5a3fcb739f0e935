//! Simulation world: node geometry, radio and propulsion constants, and the
//! time grid, together with the JSON configuration format that produces it.
//!
//! All quantities held by [`Scenario`] are linear SI values. Logarithmic
//! inputs (dBm, dB) are converted once, when the configuration is loaded.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed on the per-step flying-length bound.
pub const STEP_SLACK: f64 = 1e-9;

/// Point in the 3-D Cartesian frame, meters. Serialized as `[x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dist(self, other: Vec3) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// `(1 - t) * self + t * other`; exact at both `t = 0` and `t = 1`.
    pub fn lerp(self, other: Vec3, t: f64) -> Vec3 {
        self * (1.0 - t) + other * t
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// Rotary-wing propulsion constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Blade profile power in hover, W.
    #[serde(rename = "P0")]
    pub p0: f64,
    /// Induced power in hover, W.
    #[serde(rename = "P1")]
    pub p1: f64,
    /// Rotor blade tip speed, m/s.
    #[serde(rename = "U_tip")]
    pub u_tip: f64,
    /// Mean rotor induced velocity in hover, m/s.
    pub v0: f64,
    /// Fuselage drag ratio.
    pub d_ratio: f64,
    /// Air density, kg/m^3.
    pub rho_air: f64,
    /// Rotor solidity.
    pub solidity: f64,
    /// Rotor disc area, m^2.
    pub rotor_area: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            p0: 79.8563,
            p1: 88.6279,
            u_tip: 120.0,
            v0: 4.03,
            d_ratio: 0.6,
            rho_air: 1.225,
            solidity: 0.05,
            rotor_area: 0.503,
        }
    }
}

impl EnergyParams {
    /// Coefficient of the cubic parasite term, `d' rho' s' A / 2`.
    pub fn parasite_coeff(&self) -> f64 {
        0.5 * self.d_ratio * self.rho_air * self.solidity * self.rotor_area
    }

    fn fields(&self) -> [(&'static str, f64); 8] {
        [
            ("energy.P0", self.p0),
            ("energy.P1", self.p1),
            ("energy.U_tip", self.u_tip),
            ("energy.v0", self.v0),
            ("energy.d_ratio", self.d_ratio),
            ("energy.rho_air", self.rho_air),
            ("energy.solidity", self.solidity),
            ("energy.rotor_area", self.rotor_area),
        ]
    }
}

/// Named jammer placement presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setup {
    /// Remote jammer at (250, 50, 0).
    #[default]
    A,
    /// Local jammer at (210, 100, 0), next to the device cluster.
    B,
    /// Every position supplied explicitly.
    Custom,
}

impl Setup {
    pub fn jammer_position(self) -> Option<Vec3> {
        match self {
            Setup::A => Some(Vec3::new(250.0, 50.0, 0.0)),
            Setup::B => Some(Vec3::new(210.0, 100.0, 0.0)),
            Setup::Custom => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Setup::A => "a",
            Setup::B => "b",
            Setup::Custom => "custom",
        }
    }
}

impl std::str::FromStr for Setup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(Setup::A),
            "b" | "B" => Ok(Setup::B),
            "custom" => Ok(Setup::Custom),
            other => Err(Error::Config {
                field: "setup".into(),
                message: format!("unknown setup `{other}`"),
            }),
        }
    }
}

pub const PRESET_IRS: Vec3 = Vec3::new(205.0, 100.0, 3.0);
pub const PRESET_START: Vec3 = Vec3::new(0.0, 0.0, 100.0);
pub const PRESET_END: Vec3 = Vec3::new(400.0, 200.0, 100.0);
pub const DEFAULT_CLUSTER_CENTER: Vec3 = Vec3::new(200.0, 100.0, 0.0);

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Immutable description of one simulation instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub setup: Setup,
    pub device_positions: Vec<Vec3>,
    pub jammer_position: Vec3,
    pub irs_position: Vec3,
    pub uav_start: Vec3,
    pub uav_end: Vec3,
    /// Flight altitude `H_u`, m.
    pub altitude: f64,
    /// Flight duration, s.
    pub duration: f64,
    pub num_slots: usize,
    /// Slot length, s.
    pub dt: f64,
    pub v_max: f64,
    /// Maximum flying length per slot, `v_max * dt`.
    pub d_max: f64,
    pub irs_mx: usize,
    pub irs_mz: usize,
    /// IRS element spacing, m.
    pub element_spacing: f64,
    pub wavelength: f64,
    /// Channel power gain at 1 m (linear).
    pub rho: f64,
    /// Receiver noise power, W.
    pub sigma2: f64,
    /// Average device transmit power, W.
    pub p_bar: f64,
    /// Peak device transmit power, W.
    pub p_max: f64,
    /// Jammer transmit power, W.
    pub p_jam: f64,
    pub bandwidth: f64,
    pub energy: EnergyParams,
    pub irs_enabled: bool,
    /// Minimum UAV clearance above every ground node, m.
    pub min_sep: f64,
}

impl Scenario {
    pub fn num_devices(&self) -> usize {
        self.device_positions.len()
    }

    /// Number of IRS elements `M = M_x * M_z`.
    pub fn irs_elements(&self) -> usize {
        self.irs_mx * self.irs_mz
    }

    /// Copy with the IRS switched off (benchmark without IRS).
    pub fn without_irs(&self) -> Scenario {
        Scenario {
            irs_enabled: false,
            ..self.clone()
        }
    }

    /// Table I parameters with the given jammer preset and a seeded device cluster.
    pub fn preset(setup: Setup, seed: u64) -> Result<Scenario> {
        let config = ScenarioConfig {
            setup,
            devices: Some(DevicesConfig::Cluster {
                center: DEFAULT_CLUSTER_CENTER,
                radius: 20.0,
                count: 5,
                seed,
            }),
            ..ScenarioConfig::default()
        };
        config.build()
    }

    /// Serializes to a configuration that loads back to an identical scenario.
    pub fn to_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            setup: self.setup,
            uav: UavConfig {
                start: Some(self.uav_start),
                end: Some(self.uav_end),
                altitude: self.altitude,
                v_max: self.v_max,
                duration: self.duration,
                dt: self.dt,
            },
            irs: IrsConfig {
                position: Some(self.irs_position),
                mx: self.irs_mx,
                mz: self.irs_mz,
                spacing: self.element_spacing,
                enabled: self.irs_enabled,
            },
            devices: Some(DevicesConfig::Explicit {
                positions: self.device_positions.clone(),
            }),
            jammer: JammerConfig {
                position: Some(self.jammer_position),
                power_dbm: None,
                power_w: Some(self.p_jam),
            },
            radio: RadioConfig {
                bandwidth_hz: self.bandwidth,
                noise_dbm: None,
                noise_w: Some(self.sigma2),
                rho_db: None,
                rho_linear: Some(self.rho),
                p_bar_dbm: None,
                p_bar_w: Some(self.p_bar),
                p_max_dbm: None,
                p_max_w: Some(self.p_max),
                wavelength: self.wavelength,
            },
            energy: self.energy,
            min_sep: self.min_sep,
        }
    }

    pub fn to_config_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_config()).expect("scenario config serializes")
    }
}

/// A single invariant violation found by [`validate_scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Exhaustive invariant report; an empty list means the scenario is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut bad = |field: &'static str, message: String| out.push(Violation { field, message });

    let points = [
        ("jammer.position", s.jammer_position),
        ("irs.position", s.irs_position),
        ("uav.start", s.uav_start),
        ("uav.end", s.uav_end),
    ];
    for (field, p) in points {
        if !p.is_finite() {
            bad(field, format!("non-finite coordinate {p}"));
        }
    }
    if s.device_positions.is_empty() {
        bad("devices", "at least one device is required".into());
    }
    for (k, p) in s.device_positions.iter().enumerate() {
        if !p.is_finite() {
            bad("devices", format!("device {k} has a non-finite coordinate"));
        } else if p.z != 0.0 {
            bad("devices", format!("device {k} must lie on the ground (z = 0), got z = {}", p.z));
        }
    }
    let positive = [
        ("uav.altitude", s.altitude),
        ("uav.T", s.duration),
        ("uav.dt", s.dt),
        ("uav.v_max", s.v_max),
        ("radio.wavelength", s.wavelength),
        ("radio.rho", s.rho),
        ("radio.noise", s.sigma2),
        ("radio.p_bar", s.p_bar),
        ("radio.p_max", s.p_max),
        ("radio.bandwidth_hz", s.bandwidth),
        ("irs.spacing", s.element_spacing),
        ("min_sep", s.min_sep),
    ];
    for (field, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            bad(field, format!("must be finite and > 0, got {v}"));
        }
    }
    for (field, v) in s.energy.fields() {
        if !(v.is_finite() && v > 0.0) {
            bad(field, format!("must be finite and > 0, got {v}"));
        }
    }
    if !(s.p_jam.is_finite() && s.p_jam >= 0.0) {
        bad("jammer.power", format!("must be finite and >= 0, got {}", s.p_jam));
    }
    if s.p_bar > s.p_max {
        bad("radio.p_bar", format!("p_bar <= p_max violated ({} > {})", s.p_bar, s.p_max));
    }
    if s.num_slots < 1 {
        bad("uav.dt", "slot count N must be >= 1".into());
    } else if (s.dt * s.num_slots as f64 - s.duration).abs() > 1e-9 * s.duration.abs().max(1.0) {
        bad("uav.dt", format!("dt * N = {} differs from T = {}", s.dt * s.num_slots as f64, s.duration));
    }
    if !(s.d_max > 0.0) {
        bad("uav.v_max", "d_max = v_max * dt must be > 0".into());
    }
    if s.uav_start.z != s.altitude {
        bad("uav.start", format!("z = {} differs from altitude {}", s.uav_start.z, s.altitude));
    }
    if s.uav_end.z != s.altitude {
        bad("uav.end", format!("z = {} differs from altitude {}", s.uav_end.z, s.altitude));
    }
    if s.irs_enabled && (s.irs_mx == 0 || s.irs_mz == 0) {
        bad("irs.mx", format!("IRS enabled with M = {} x {} elements", s.irs_mx, s.irs_mz));
    }
    let highest = s
        .device_positions
        .iter()
        .map(|p| p.z)
        .chain([s.jammer_position.z, s.irs_position.z])
        .fold(f64::NEG_INFINITY, f64::max);
    if s.altitude - highest < s.min_sep {
        bad("uav.altitude", format!("clearance {} m above the highest node is below min_sep {}", s.altitude - highest, s.min_sep));
    }
    if s.num_slots >= 1 && s.d_max > 0.0 {
        let distance = s.uav_end.dist(s.uav_start);
        let limit = s.num_slots as f64 * s.d_max;
        if distance > limit * (1.0 + STEP_SLACK) {
            bad("uav.end", format!("unreachable: {distance:.4} m > N*d_max = {limit:.4} m"));
        }
    }
    out
}

/// `K` points sampled uniformly in the disc of `radius` around `center`, on the ground.
pub fn generate_device_cluster(center: Vec3, radius: f64, count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let u: f64 = rng.gen();
            let phi: f64 = rng.gen::<f64>() * 2.0 * PI;
            let r = radius * u.sqrt();
            Vec3::new(center.x + r * phi.cos(), center.y + r * phi.sin(), 0.0)
        })
        .collect()
}

/// Ordered UAV waypoints `q[0..=N]` at fixed altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Vec3>,
}

impl Trajectory {
    pub fn num_slots(&self) -> usize {
        self.points.len().saturating_sub(1)
    }

    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| w[1].dist(w[0])).sum()
    }

    /// Checks endpoints, altitude and the per-step length bound.
    pub fn validate(&self, s: &Scenario) -> Result<()> {
        let n = s.num_slots;
        if self.points.len() != n + 1 {
            return Err(Error::DimensionMismatch(format!(
                "trajectory has {} points, expected {}",
                self.points.len(),
                n + 1
            )));
        }
        if self.points[0] != s.uav_start || self.points[n] != s.uav_end {
            return Err(Error::Invalid("trajectory endpoints differ from start/end".into()));
        }
        for (i, p) in self.points.iter().enumerate() {
            if !p.is_finite() || p.z != s.altitude {
                return Err(Error::Invalid(format!("waypoint {i} = {p} is off the flight plane")));
            }
        }
        for (i, w) in self.points.windows(2).enumerate() {
            let step = w[1].dist(w[0]);
            if step > s.d_max * (1.0 + STEP_SLACK) {
                return Err(Error::Invalid(format!(
                    "step {} has length {step} > d_max {}",
                    i + 1,
                    s.d_max
                )));
            }
        }
        Ok(())
    }

    /// Horizontal distance of the closest approach of the polyline to `p`,
    /// combined with the vertical offset (3-D minimum distance).
    pub fn min_distance_to(&self, p: Vec3) -> f64 {
        self.points
            .windows(2)
            .map(|w| segment_distance(w[0], w[1], p))
            .fold(f64::INFINITY, f64::min)
    }
}

fn segment_distance(a: Vec3, b: Vec3, p: Vec3) -> f64 {
    let ab = b - a;
    let len2 = ab.x * ab.x + ab.y * ab.y + ab.z * ab.z;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let ap = p - a;
    let t = ((ap.x * ab.x + ap.y * ab.y + ap.z * ab.z) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Straight line from start to end at constant speed.
pub fn initial_trajectory(s: &Scenario) -> Trajectory {
    let n = s.num_slots;
    let points = (0..=n)
        .map(|i| s.uav_start.lerp(s.uav_end, i as f64 / n as f64))
        .collect();
    Trajectory { points }
}

// ---------------------------------------------------------------------------
// JSON configuration
// ---------------------------------------------------------------------------

fn default_altitude() -> f64 {
    100.0
}
fn default_v_max() -> f64 {
    60.0
}
fn default_duration() -> f64 {
    20.0
}
fn default_dt() -> f64 {
    0.5
}
fn default_mx() -> usize {
    15
}
fn default_mz() -> usize {
    10
}
fn default_spacing() -> f64 {
    0.1
}
fn default_true() -> bool {
    true
}
fn default_bandwidth() -> f64 {
    1e6
}
fn default_wavelength() -> f64 {
    0.2
}
fn default_min_sep() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<Vec3>,
    #[serde(default = "default_altitude")]
    pub altitude: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(rename = "T", default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

impl Default for UavConfig {
    fn default() -> Self {
        Self {
            start: None,
            end: None,
            altitude: default_altitude(),
            v_max: default_v_max(),
            duration: default_duration(),
            dt: default_dt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default = "default_mx")]
    pub mx: usize,
    #[serde(default = "default_mz")]
    pub mz: usize,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_true")]
    pub enabled: bool,
}

impl Default for IrsConfig {
    fn default() -> Self {
        Self {
            position: None,
            mx: default_mx(),
            mz: default_mz(),
            spacing: default_spacing(),
            enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum DevicesConfig {
    Explicit {
        positions: Vec<Vec3>,
    },
    Cluster {
        center: Vec3,
        radius: f64,
        count: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JammerConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_w: Option<f64>,
}

/// Radio constants. Each power-like quantity may be given either on a log
/// scale (`*_dbm`, `*_db`) or linearly (`*_w`, `*_linear`), not both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_linear: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_bar_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_bar_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_dbm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max_w: Option<f64>,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: default_bandwidth(),
            noise_dbm: None,
            noise_w: None,
            rho_db: None,
            rho_linear: None,
            p_bar_dbm: None,
            p_bar_w: None,
            p_max_dbm: None,
            p_max_w: None,
            wavelength: default_wavelength(),
        }
    }
}

/// Top-level JSON configuration. Missing sections fall back to Table I
/// defaults; the `setup` preset supplies any positions left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub setup: Setup,
    #[serde(default)]
    pub uav: UavConfig,
    #[serde(default)]
    pub irs: IrsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub devices: Option<DevicesConfig>,
    #[serde(default)]
    pub jammer: JammerConfig,
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub energy: EnergyParams,
    #[serde(default = "default_min_sep")]
    pub min_sep: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            setup: Setup::A,
            uav: UavConfig::default(),
            irs: IrsConfig::default(),
            devices: None,
            jammer: JammerConfig::default(),
            radio: RadioConfig::default(),
            energy: EnergyParams::default(),
            min_sep: default_min_sep(),
        }
    }
}

fn pick(
    field: &str,
    log_value: Option<f64>,
    linear_value: Option<f64>,
    to_linear: fn(f64) -> f64,
    default_log: f64,
) -> Result<f64> {
    match (log_value, linear_value) {
        (Some(_), Some(_)) => Err(Error::Config {
            field: field.into(),
            message: "give either the logarithmic or the linear value, not both".into(),
        }),
        (Some(l), None) => Ok(to_linear(l)),
        (None, Some(w)) => Ok(w),
        (None, None) => Ok(to_linear(default_log)),
    }
}

fn required(field: &str, v: Option<Vec3>, preset: Option<Vec3>) -> Result<Vec3> {
    v.or(preset).ok_or_else(|| Error::Config {
        field: field.into(),
        message: "required when setup is `custom`".into(),
    })
}

impl ScenarioConfig {
    /// Materializes and validates the scenario.
    pub fn build(&self) -> Result<Scenario> {
        let preset = self.setup != Setup::Custom;
        let irs_position = required("irs.position", self.irs.position, preset.then_some(PRESET_IRS))?;
        let uav_start = required("uav.start", self.uav.start, preset.then_some(PRESET_START))?;
        let uav_end = required("uav.end", self.uav.end, preset.then_some(PRESET_END))?;
        let jammer_position = required("jammer.position", self.jammer.position, self.setup.jammer_position())?;

        let device_positions = match &self.devices {
            Some(DevicesConfig::Explicit { positions }) => positions.clone(),
            Some(DevicesConfig::Cluster { center, radius, count, seed }) => {
                if !(*radius >= 0.0) || *count == 0 {
                    return Err(Error::Config {
                        field: "devices".into(),
                        message: "cluster needs radius >= 0 and count >= 1".into(),
                    });
                }
                generate_device_cluster(*center, *radius, *count, *seed)
            }
            None => generate_device_cluster(DEFAULT_CLUSTER_CENTER, 20.0, 5, 1),
        };

        let r = &self.radio;
        let sigma2 = pick("radio.noise", r.noise_dbm, r.noise_w, dbm_to_watts, -80.0)?;
        let rho = pick("radio.rho", r.rho_db, r.rho_linear, db_to_linear, -30.0)?;
        let p_bar = pick("radio.p_bar", r.p_bar_dbm, r.p_bar_w, dbm_to_watts, 20.0)?;
        let p_max = pick("radio.p_max", r.p_max_dbm, r.p_max_w, dbm_to_watts, 26.0)?;
        let p_jam = pick("jammer.power", self.jammer.power_dbm, self.jammer.power_w, dbm_to_watts, 30.0)?;

        let u = &self.uav;
        if !(u.dt > 0.0 && u.duration > 0.0) {
            return Err(Error::Config {
                field: "uav.dt".into(),
                message: format!("T = {} and dt = {} must be positive", u.duration, u.dt),
            });
        }
        let ratio = u.duration / u.dt;
        let num_slots = ratio.round();
        if num_slots < 1.0 || (ratio - num_slots).abs() > 1e-9 * ratio {
            return Err(Error::Config {
                field: "uav.dt".into(),
                message: format!("T / dt = {ratio} is not a positive integer"),
            });
        }

        let scenario = Scenario {
            setup: self.setup,
            device_positions,
            jammer_position,
            irs_position,
            uav_start,
            uav_end,
            altitude: u.altitude,
            duration: u.duration,
            num_slots: num_slots as usize,
            dt: u.dt,
            v_max: u.v_max,
            d_max: u.v_max * u.dt,
            irs_mx: self.irs.mx,
            irs_mz: self.irs.mz,
            element_spacing: self.irs.spacing,
            wavelength: r.wavelength,
            rho,
            sigma2,
            p_bar,
            p_max,
            p_jam,
            bandwidth: r.bandwidth_hz,
            energy: self.energy,
            irs_enabled: self.irs.enabled,
            min_sep: self.min_sep,
        };

        let violations = validate_scenario(&scenario);
        if violations.iter().any(|v| v.message.starts_with("unreachable")) {
            return Err(Error::Unreachable {
                distance: scenario.uav_end.dist(scenario.uav_start),
                limit: scenario.num_slots as f64 * scenario.d_max,
            });
        }
        if let Some(v) = violations.first() {
            return Err(Error::Config {
                field: v.field.into(),
                message: v.message.clone(),
            });
        }
        Ok(scenario)
    }
}

/// Parses a JSON configuration and materializes the scenario.
pub fn load_scenario(config_text: &str) -> Result<Scenario> {
    let config: ScenarioConfig = serde_json::from_str(config_text)?;
    config.build()
}
