//! Problem instances: loading, validation, defaults and the time grid.
//!
//! All values held by [`Scenario`] are SI (watts, meters, seconds, radians,
//! newtons, linear ratios). Configuration files are TOML; each quantity may
//! be a bare SI number or a unit-tagged string such as `"-36 dBm"` or
//! `"20 km"` (see [`crate::units`]).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{dbm_to_watts, db_to_linear, Dim, Quantity, STANDARD_GRAVITY};

/// Ground location; `z = 0` is implied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    pub x: f64,
    pub y: f64,
}

impl GroundPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn centroid(points: &[GroundPoint]) -> GroundPoint {
        let n = points.len().max(1) as f64;
        let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
        GroundPoint::new(sx / n, sy / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlightLimits {
    #[serde(rename = "H_min")]
    pub h_min: f64,
    #[serde(rename = "H_max")]
    pub h_max: f64,
    #[serde(rename = "V_xy_max")]
    pub v_xy_max: f64,
    #[serde(rename = "V_z_max")]
    pub v_z_max: f64,
    /// Bank angle of the steady circular flight, radians.
    pub bank_angle: f64,
    /// SAR observation angle, radians.
    pub obs_angle: f64,
}

impl FlightLimits {
    /// Combined airspeed bound `sqrt(V_xy_max^2 + V_z_max^2)`.
    pub fn v_max(&self) -> f64 {
        self.v_xy_max.hypot(self.v_z_max)
    }
}

impl Default for FlightLimits {
    fn default() -> Self {
        Self {
            h_min: 20_000.0,
            h_max: 30_000.0,
            v_xy_max: 40.0,
            v_z_max: 30.0,
            bank_angle: 10f64.to_radians(),
            obs_angle: 45f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SarParams {
    #[serde(rename = "G_t")]
    pub g_t: f64,
    #[serde(rename = "G_r")]
    pub g_r: f64,
    pub sigma0: f64,
    pub tau_p: f64,
    #[serde(rename = "PRF")]
    pub prf: f64,
    #[serde(rename = "T_o")]
    pub t_o: f64,
    #[serde(rename = "NF")]
    pub nf: f64,
    #[serde(rename = "B_r")]
    pub b_r: f64,
    #[serde(rename = "L_tot")]
    pub l_tot: f64,
    pub kappa: f64,
    pub c: f64,
}

impl Default for SarParams {
    fn default() -> Self {
        Self {
            g_t: db_to_linear(35.0),
            g_r: db_to_linear(35.0),
            sigma0: 1.0,
            tau_p: 10e-6,
            prf: 2.0,
            t_o: 290.0,
            nf: db_to_linear(6.0),
            b_r: 200e6,
            l_tot: db_to_linear(10.0),
            kappa: 1.380649e-23,
            c: 299_792_458.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AeroParams {
    #[serde(rename = "C_D0")]
    pub c_d0: f64,
    #[serde(rename = "S")]
    pub s: f64,
    pub f_p: f64,
    pub f_e: f64,
    pub e_o: f64,
    #[serde(rename = "AR_w")]
    pub ar_w: f64,
    /// Weight force, newtons.
    #[serde(rename = "F_w")]
    pub f_w: f64,
}

impl AeroParams {
    /// Induced-drag factor `1/(pi e_o AR_w)`.
    pub fn induced_factor(&self) -> f64 {
        1.0 / (std::f64::consts::PI * self.e_o * self.ar_w)
    }
}

impl Default for AeroParams {
    fn default() -> Self {
        Self {
            c_d0: 0.015,
            s: 143.0,
            f_p: 0.85,
            f_e: 0.90,
            e_o: 0.6385,
            ar_w: 30.0,
            f_w: 165.0 * STANDARD_GRAVITY,
        }
    }
}

/// Horizontal grid used by the quasi-stationary placement search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub altitude_step: f64,
    /// `[x_min, x_max, y_min, y_max]`; defaults to the bounding box of all
    /// users and targets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area: Option<[f64; 4]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 5,
            ny: 5,
            altitude_step: 1000.0,
            area: None,
        }
    }
}

/// Iteration controls shared by the solvers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmParams {
    /// Fractional-increase threshold of the beamforming SCA loop.
    pub sca_epsilon: f64,
    pub sca_max_iter: usize,
    /// Fractional-increase threshold of the alternating (outer) loop.
    pub outer_epsilon: f64,
    pub outer_max_iter: usize,
    /// Trust-region radius below which the trajectory loop stops, meters.
    pub trust_epsilon: f64,
    /// Initial trust radius, meters; `V_xy_max * dt / 2` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trust_init: Option<f64>,
    pub trust_max_iter: usize,
    /// Share of `P_max` given to the communication beams at initialization.
    pub init_comm_share: f64,
    /// Duality-gap tolerance of every convex solve.
    pub solver_tol: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            sca_epsilon: 1e-3,
            sca_max_iter: 50,
            outer_epsilon: 1e-3,
            outer_max_iter: 20,
            trust_epsilon: 1.0,
            trust_init: None,
            trust_max_iter: 200,
            init_comm_share: 0.5,
            solver_tol: default_solver_tol(),
        }
    }
}

/// Environment variable overriding the default convex-solver tolerance.
pub const SOLVER_TOL_ENV: &str = "HAPS_ISAC_TOL";

pub fn default_solver_tol() -> f64 {
    std::env::var(SOLVER_TOL_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite() && *v > 0.0)
        .unwrap_or(1e-8)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub users: Vec<GroundPoint>,
    pub targets: Vec<GroundPoint>,
    pub weights: Vec<f64>,
    #[serde(rename = "M")]
    pub antennas: usize,
    pub wavelength: f64,
    pub ref_gain: f64,
    /// Per-user noise power, watts.
    pub noise_power: Vec<f64>,
    pub rician_k: f64,
    /// Drop the NLOS term of every channel.
    pub los_only: bool,
    pub flight: FlightLimits,
    pub sar: SarParams,
    pub aero: AeroParams,
    pub power_max: f64,
    /// Beampattern threshold; the constraint right side is `bp_threshold * d^2`.
    pub bp_threshold: f64,
    pub snr_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_start: Option<f64>,
    pub horizon: f64,
    pub slots: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disc_accuracy: Option<f64>,
    pub rng_seed: u64,
    pub grid: GridSpec,
    pub algorithm: AlgorithmParams,
}

// ---------------------------------------------------------------------------
// Raw (file) representation
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawPoint {
    Pair([Quantity; 2]),
    Named { x: Quantity, y: Quantity },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Quantity),
    Many(Vec<Quantity>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFlight {
    #[serde(rename = "H_min")]
    h_min: Option<Quantity>,
    #[serde(rename = "H_max")]
    h_max: Option<Quantity>,
    #[serde(rename = "V_xy_max")]
    v_xy_max: Option<Quantity>,
    #[serde(rename = "V_z_max")]
    v_z_max: Option<Quantity>,
    bank_angle: Option<Quantity>,
    obs_angle: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSar {
    #[serde(rename = "G_t")]
    g_t: Option<Quantity>,
    #[serde(rename = "G_r")]
    g_r: Option<Quantity>,
    sigma0: Option<Quantity>,
    tau_p: Option<Quantity>,
    #[serde(rename = "PRF")]
    prf: Option<Quantity>,
    #[serde(rename = "T_o")]
    t_o: Option<Quantity>,
    #[serde(rename = "NF")]
    nf: Option<Quantity>,
    #[serde(rename = "B_r")]
    b_r: Option<Quantity>,
    #[serde(rename = "L_tot")]
    l_tot: Option<Quantity>,
    kappa: Option<Quantity>,
    c: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAero {
    #[serde(rename = "C_D0")]
    c_d0: Option<Quantity>,
    #[serde(rename = "S")]
    s: Option<Quantity>,
    f_p: Option<Quantity>,
    f_e: Option<Quantity>,
    e_o: Option<Quantity>,
    #[serde(rename = "AR_w")]
    ar_w: Option<Quantity>,
    #[serde(rename = "F_w")]
    f_w: Option<Quantity>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    nx: Option<usize>,
    ny: Option<usize>,
    altitude_step: Option<Quantity>,
    area: Option<[Quantity; 4]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithm {
    sca_epsilon: Option<f64>,
    sca_max_iter: Option<usize>,
    outer_epsilon: Option<f64>,
    outer_max_iter: Option<usize>,
    trust_epsilon: Option<Quantity>,
    trust_init: Option<Quantity>,
    trust_max_iter: Option<usize>,
    init_comm_share: Option<f64>,
    solver_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    users: Vec<RawPoint>,
    targets: Vec<RawPoint>,
    weights: Option<Vec<f64>>,
    #[serde(rename = "M", alias = "antennas")]
    antennas: usize,
    wavelength: Quantity,
    ref_gain: Option<Quantity>,
    noise_power: Option<OneOrMany>,
    rician_k: Option<Quantity>,
    los_only: Option<bool>,
    #[serde(alias = "FlightLimits")]
    flight: Option<RawFlight>,
    #[serde(alias = "SarParams")]
    sar: Option<RawSar>,
    #[serde(alias = "AeroParams")]
    aero: Option<RawAero>,
    power_max: Option<Quantity>,
    bp_threshold: Option<Quantity>,
    snr_min: Option<Quantity>,
    e_start: Option<Quantity>,
    horizon: Option<Quantity>,
    slots: Option<usize>,
    disc_accuracy: Option<f64>,
    rng_seed: Option<u64>,
    #[serde(alias = "GridSpec")]
    grid: Option<RawGrid>,
    #[serde(alias = "AlgorithmParams")]
    algorithm: Option<RawAlgorithm>,
}

/// Collects unit-conversion failures with their field paths.
struct Converter {
    errors: Vec<(String, String)>,
}

impl Converter {
    fn req(&mut self, path: &str, q: &Quantity, dim: Dim) -> f64 {
        match q.to_si(dim) {
            Ok(v) => v,
            Err(e) => {
                self.errors.push((path.to_string(), e));
                f64::NAN
            }
        }
    }

    fn opt(&mut self, path: &str, q: &Option<Quantity>, dim: Dim, default: f64) -> f64 {
        match q {
            Some(q) => self.req(path, q, dim),
            None => default,
        }
    }

    fn point(&mut self, path: &str, p: &RawPoint) -> GroundPoint {
        let (x, y) = match p {
            RawPoint::Pair([x, y]) | RawPoint::Named { x, y } => (x, y),
        };
        GroundPoint::new(
            self.req(&format!("{path}.x"), x, Dim::Length),
            self.req(&format!("{path}.y"), y, Dim::Length),
        )
    }
}

impl RawScenario {
    fn into_scenario(self) -> Result<Scenario> {
        let mut cv = Converter { errors: Vec::new() };
        let users: Vec<GroundPoint> = self
            .users
            .iter()
            .enumerate()
            .map(|(i, p)| cv.point(&format!("users[{i}]"), p))
            .collect();
        let targets: Vec<GroundPoint> = self
            .targets
            .iter()
            .enumerate()
            .map(|(i, p)| cv.point(&format!("targets[{i}]"), p))
            .collect();
        let k = users.len();
        let weights = self.weights.unwrap_or_else(|| vec![1.0; k]);
        let noise_power = match &self.noise_power {
            None => vec![dbm_to_watts(-60.0); k],
            Some(OneOrMany::One(q)) => vec![cv.req("noise_power", q, Dim::Power); k],
            Some(OneOrMany::Many(qs)) => qs
                .iter()
                .enumerate()
                .map(|(i, q)| cv.req(&format!("noise_power[{i}]"), q, Dim::Power))
                .collect(),
        };

        let fd = FlightLimits::default();
        let rf = self.flight.unwrap_or_default();
        let flight = FlightLimits {
            h_min: cv.opt("flight.H_min", &rf.h_min, Dim::Length, fd.h_min),
            h_max: cv.opt("flight.H_max", &rf.h_max, Dim::Length, fd.h_max),
            v_xy_max: cv.opt("flight.V_xy_max", &rf.v_xy_max, Dim::Speed, fd.v_xy_max),
            v_z_max: cv.opt("flight.V_z_max", &rf.v_z_max, Dim::Speed, fd.v_z_max),
            bank_angle: cv.opt("flight.bank_angle", &rf.bank_angle, Dim::Angle, fd.bank_angle),
            obs_angle: cv.opt("flight.obs_angle", &rf.obs_angle, Dim::Angle, fd.obs_angle),
        };

        let sd = SarParams::default();
        let rs = self.sar.unwrap_or_default();
        let sar = SarParams {
            g_t: cv.opt("sar.G_t", &rs.g_t, Dim::Ratio, sd.g_t),
            g_r: cv.opt("sar.G_r", &rs.g_r, Dim::Ratio, sd.g_r),
            sigma0: cv.opt("sar.sigma0", &rs.sigma0, Dim::Ratio, sd.sigma0),
            tau_p: cv.opt("sar.tau_p", &rs.tau_p, Dim::Time, sd.tau_p),
            prf: cv.opt("sar.PRF", &rs.prf, Dim::Frequency, sd.prf),
            t_o: cv.opt("sar.T_o", &rs.t_o, Dim::Temperature, sd.t_o),
            nf: cv.opt("sar.NF", &rs.nf, Dim::Ratio, sd.nf),
            b_r: cv.opt("sar.B_r", &rs.b_r, Dim::Frequency, sd.b_r),
            l_tot: cv.opt("sar.L_tot", &rs.l_tot, Dim::Ratio, sd.l_tot),
            kappa: cv.opt("sar.kappa", &rs.kappa, Dim::Plain, sd.kappa),
            c: cv.opt("sar.c", &rs.c, Dim::Speed, sd.c),
        };

        let ad = AeroParams::default();
        let ra = self.aero.unwrap_or_default();
        let aero = AeroParams {
            c_d0: cv.opt("aero.C_D0", &ra.c_d0, Dim::Plain, ad.c_d0),
            s: cv.opt("aero.S", &ra.s, Dim::Area, ad.s),
            f_p: cv.opt("aero.f_p", &ra.f_p, Dim::Plain, ad.f_p),
            f_e: cv.opt("aero.f_e", &ra.f_e, Dim::Plain, ad.f_e),
            e_o: cv.opt("aero.e_o", &ra.e_o, Dim::Plain, ad.e_o),
            ar_w: cv.opt("aero.AR_w", &ra.ar_w, Dim::Plain, ad.ar_w),
            f_w: cv.opt("aero.F_w", &ra.f_w, Dim::Force, ad.f_w),
        };

        let gd = GridSpec::default();
        let rg = self.grid.unwrap_or_default();
        let area = rg.area.as_ref().map(|a| {
            let mut out = [0.0; 4];
            for (i, q) in a.iter().enumerate() {
                out[i] = cv.req(&format!("grid.area[{i}]"), q, Dim::Length);
            }
            out
        });
        let grid = GridSpec {
            nx: rg.nx.unwrap_or(gd.nx),
            ny: rg.ny.unwrap_or(gd.ny),
            altitude_step: cv.opt("grid.altitude_step", &rg.altitude_step, Dim::Length, gd.altitude_step),
            area,
        };

        let al = AlgorithmParams::default();
        let ra = self.algorithm.unwrap_or_default();
        let trust_init = ra
            .trust_init
            .as_ref()
            .map(|q| cv.req("algorithm.trust_init", q, Dim::Length));
        let algorithm = AlgorithmParams {
            sca_epsilon: ra.sca_epsilon.unwrap_or(al.sca_epsilon),
            sca_max_iter: ra.sca_max_iter.unwrap_or(al.sca_max_iter),
            outer_epsilon: ra.outer_epsilon.unwrap_or(al.outer_epsilon),
            outer_max_iter: ra.outer_max_iter.unwrap_or(al.outer_max_iter),
            trust_epsilon: cv.opt("algorithm.trust_epsilon", &ra.trust_epsilon, Dim::Length, al.trust_epsilon),
            trust_init,
            trust_max_iter: ra.trust_max_iter.unwrap_or(al.trust_max_iter),
            init_comm_share: ra.init_comm_share.unwrap_or(al.init_comm_share),
            solver_tol: ra.solver_tol.unwrap_or(al.solver_tol),
        };

        let e_start = self.e_start.as_ref().map(|q| cv.req("e_start", q, Dim::Energy));
        let scenario = Scenario {
            users,
            targets,
            weights,
            antennas: self.antennas,
            wavelength: cv.req("wavelength", &self.wavelength, Dim::Length),
            ref_gain: cv.opt("ref_gain", &self.ref_gain, Dim::Ratio, 1000.0),
            noise_power,
            rician_k: cv.opt("rician_k", &self.rician_k, Dim::Ratio, 10.0),
            los_only: self.los_only.unwrap_or(false),
            flight,
            sar,
            aero,
            power_max: cv.opt("power_max", &self.power_max, Dim::Power, 10.0),
            bp_threshold: cv.opt("bp_threshold", &self.bp_threshold, Dim::Power, dbm_to_watts(-36.0)),
            snr_min: cv.opt("snr_min", &self.snr_min, Dim::Ratio, 0.0),
            e_start,
            horizon: cv.opt("horizon", &self.horizon, Dim::Time, 350.0),
            slots: self.slots.unwrap_or(35),
            disc_accuracy: self.disc_accuracy,
            rng_seed: self.rng_seed.unwrap_or(0),
            grid,
            algorithm,
        };

        if let Some((path, message)) = cv.errors.into_iter().next() {
            return Err(Error::Config { path, message });
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

fn deserialize_raw<'de, D>(d: D) -> Result<RawScenario>
where
    D: serde::Deserializer<'de>,
    D::Error: std::fmt::Display,
{
    serde_path_to_error::deserialize(d).map_err(|e| Error::Config {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

impl Scenario {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(s).map_err(|e| Error::Config {
            path: ".".into(),
            message: e.to_string(),
        })?;
        deserialize_raw(de)?.into_scenario()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(s);
        deserialize_raw(&mut de)?.into_scenario()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn k(&self) -> usize {
        self.users.len()
    }

    pub fn q(&self) -> usize {
        self.targets.len()
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.slots as f64
    }

    /// Every invariant violation, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut pos = |ok: bool, msg: &str| {
            if !ok {
                v.push(msg.to_string());
            }
        };
        pos(!self.users.is_empty(), "users: at least one user is required");
        pos(!self.targets.is_empty(), "targets: at least one target is required");
        pos(
            self.users.iter().chain(&self.targets).all(|p| p.x.is_finite() && p.y.is_finite()),
            "users/targets: coordinates must be finite",
        );
        pos(
            self.weights.len() == self.users.len(),
            "weights: one weight per user is required",
        );
        pos(
            self.weights.iter().all(|&b| b > 0.0 && b.is_finite()),
            "weights: every weight must be positive",
        );
        pos(
            self.noise_power.len() == self.users.len(),
            "noise_power: one value per user (or a single scalar) is required",
        );
        pos(
            self.noise_power.iter().all(|&s| s > 0.0 && s.is_finite()),
            "noise_power: must be positive",
        );
        pos(self.antennas >= 1, "M: at least one antenna is required");
        pos(self.wavelength > 0.0 && self.wavelength.is_finite(), "wavelength: must be positive");
        pos(self.ref_gain > 0.0 && self.ref_gain.is_finite(), "ref_gain: must be positive");
        pos(self.rician_k >= 0.0, "rician_k: must be non-negative");
        let f = &self.flight;
        pos(f.h_min > 0.0, "flight.H_min: must be positive");
        pos(f.h_min < f.h_max, "flight: H_min must be strictly below H_max");
        pos(f.v_xy_max > 0.0, "flight.V_xy_max: must be positive");
        pos(f.v_z_max > 0.0, "flight.V_z_max: must be positive");
        pos(
            f.obs_angle > 0.0 && f.obs_angle < std::f64::consts::FRAC_PI_2,
            "flight.obs_angle: must lie in (0, pi/2)",
        );
        pos(
            f.bank_angle >= 0.0 && f.bank_angle < std::f64::consts::FRAC_PI_2,
            "flight.bank_angle: must lie in [0, pi/2)",
        );
        let s = &self.sar;
        pos(
            [s.g_t, s.g_r, s.sigma0, s.tau_p, s.prf, s.t_o, s.nf, s.b_r, s.l_tot, s.kappa, s.c]
                .iter()
                .all(|&x| x > 0.0 && x.is_finite()),
            "sar: every parameter must be strictly positive",
        );
        let a = &self.aero;
        pos(
            [a.c_d0, a.s, a.e_o, a.ar_w, a.f_w].iter().all(|&x| x > 0.0 && x.is_finite()),
            "aero: C_D0, S, e_o, AR_w, F_w must be strictly positive",
        );
        pos(
            a.f_p > 0.0 && a.f_p <= 1.0 && a.f_e > 0.0 && a.f_e <= 1.0,
            "aero: efficiencies f_p, f_e must lie in (0, 1]",
        );
        pos(self.power_max > 0.0 && self.power_max.is_finite(), "power_max: must be positive");
        pos(self.bp_threshold >= 0.0, "bp_threshold: must be non-negative");
        pos(self.snr_min >= 0.0, "snr_min: must be non-negative");
        if let Some(e) = self.e_start {
            pos(e > 0.0, "e_start: must be positive when set");
        }
        pos(self.slots >= 1, "slots: N must be at least 1");
        pos(self.horizon > 0.0 && self.horizon.is_finite(), "horizon: T must be positive");
        if let Some(eps) = self.disc_accuracy {
            pos(eps > 0.0, "disc_accuracy: must be positive");
            if eps > 0.0 && f.h_min > 0.0 {
                let n_min = f.v_xy_max * self.horizon / (f.h_min * eps);
                pos(
                    self.slots as f64 >= n_min,
                    &format!("slots: N={} is below the discretization minimum {:.3}", self.slots, n_min),
                );
            }
        }
        pos(self.grid.nx >= 1 && self.grid.ny >= 1, "grid: nx and ny must be at least 1");
        pos(self.grid.altitude_step > 0.0, "grid.altitude_step: must be positive");
        if let Some(a) = self.grid.area {
            pos(a[0] <= a[1] && a[2] <= a[3], "grid.area: expected [x_min, x_max, y_min, y_max]");
        }
        let al = &self.algorithm;
        pos(al.sca_epsilon > 0.0 && al.outer_epsilon > 0.0, "algorithm: epsilons must be positive");
        pos(al.trust_epsilon > 0.0, "algorithm.trust_epsilon: must be positive");
        pos(
            al.init_comm_share > 0.0 && al.init_comm_share < 1.0,
            "algorithm.init_comm_share: must lie in (0, 1)",
        );
        pos(al.solver_tol > 0.0, "algorithm.solver_tol: must be positive");
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Horizontal bounding box `[x_min, x_max, y_min, y_max]` for the grid.
    pub fn area(&self) -> [f64; 4] {
        if let Some(a) = self.grid.area {
            return a;
        }
        let pts = self.users.iter().chain(&self.targets);
        let mut a = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in pts {
            a[0] = a[0].min(p.x);
            a[1] = a[1].max(p.x);
            a[2] = a[2].min(p.y);
            a[3] = a[3].max(p.y);
        }
        a
    }

    /// Desk-scale instance: `M = 4`, two users west of the origin, two
    /// targets east of it, eight slots of ten seconds.
    pub fn desk() -> Scenario {
        Scenario {
            users: vec![GroundPoint::new(-2_000.0, 1_000.0), GroundPoint::new(-20_000.0, -4_000.0)],
            targets: vec![GroundPoint::new(14_000.0, 5_000.0), GroundPoint::new(16_000.0, -5_000.0)],
            weights: vec![1.0, 1.0],
            antennas: 4,
            wavelength: 0.15,
            ref_gain: 1000.0,
            noise_power: vec![dbm_to_watts(-40.0); 2],
            rician_k: 10.0,
            los_only: true,
            flight: FlightLimits::default(),
            sar: SarParams::default(),
            aero: AeroParams::default(),
            power_max: 10.0,
            bp_threshold: dbm_to_watts(-50.0),
            snr_min: 0.5,
            e_start: None,
            horizon: 80.0,
            slots: 8,
            disc_accuracy: None,
            rng_seed: 7,
            grid: GridSpec {
                nx: 5,
                ny: 5,
                altitude_step: 1000.0,
                area: None,
            },
            algorithm: AlgorithmParams::default(),
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Scenario::from_json_str(&text),
        _ => Scenario::from_toml_str(&text),
    }
}

/// Uniform slot grid of the dynamic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub slots: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, slots: usize) -> Result<Self> {
        if slots == 0 {
            return Err(Error::InvalidInput("time grid needs N >= 1 slots".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidInput("time grid needs T > 0".into()));
        }
        Ok(Self {
            slots,
            dt: horizon / slots as f64,
        })
    }

    /// Grid with a prescribed slot length; `horizon` must be a whole
    /// multiple of `dt`.
    pub fn from_step(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("slot length must be positive".into()));
        }
        let n = (horizon / dt).round();
        if n < 1.0 || ((n * dt - horizon).abs() > 1e-9 * horizon) {
            return Err(Error::InvalidInput(format!(
                "horizon {horizon} s is not a whole number of {dt} s slots"
            )));
        }
        Self::new(horizon, n as usize)
    }

    /// Slot boundary instants `n * dt` for `n = 0..=N`.
    pub fn instants(&self) -> Vec<f64> {
        (0..=self.slots).map(|n| n as f64 * self.dt).collect()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.slots).map(|n| (n as f64 + 0.5) * self.dt).collect()
    }
}

pub fn time_grid(scenario: &Scenario) -> Result<TimeGrid> {
    TimeGrid::new(scenario.horizon, scenario.slots)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        users = [[-1000.0, 0.0], { x = "1 km", y = 0 }]
        targets = [[0.0, 2000.0]]
        M = 4
        wavelength = "0.15 m"
    "#;

    #[test]
    fn defaults_applied() {
        let s = Scenario::from_toml_str(MINIMAL).unwrap();
        assert_eq!(s.aero.c_d0, 0.015);
        assert_eq!(s.aero.s, 143.0);
        assert_eq!(s.users[1], GroundPoint::new(1000.0, 0.0));
        assert_eq!(s.weights, vec![1.0, 1.0]);
        assert_eq!(s.ref_gain, 1000.0);
        assert_eq!(s.noise_power, vec![1e-9; 2]);
        assert!((s.sar.g_t - 3162.2776601683795).abs() < 1e-9);
        assert!((s.aero.f_w - 1618.09725).abs() < 1e-9);
        assert_eq!(s.sar.tau_p, 1e-5);
    }

    #[test]
    fn gamma_dbm_converted() {
        let s = Scenario::from_toml_str(&format!("{MINIMAL}\nbp_threshold = \"-36 dBm\"")).unwrap();
        assert_eq!(s.bp_threshold, 10f64.powf(-6.6));
    }

    #[test]
    fn equal_altitude_bounds_rejected() {
        let text = format!("{MINIMAL}\n[flight]\nH_min = \"25 km\"\nH_max = \"25 km\"\n");
        match Scenario::from_toml_str(&text) {
            Err(Error::Validation(v)) => assert!(v.iter().any(|m| m.contains("H_min"))),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn all_violations_listed() {
        let text = r#"
            users = [[0.0, 0.0]]
            targets = [[0.0, 0.0]]
            weights = [-1.0]
            M = 4
            wavelength = 0.15
            power_max = -1.0
            slots = 0
        "#;
        match Scenario::from_toml_str(text) {
            Err(Error::Validation(v)) => assert!(v.len() >= 3, "{v:?}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn schema_error_carries_field_path() {
        let text = format!("{MINIMAL}\n[aero]\nC_D0 = \"fast\"\n");
        match Scenario::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "aero.C_D0"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = format!("{MINIMAL}\n[aero]\nbogus = 1\n");
        match Scenario::from_toml_str(&text) {
            Err(Error::Config { path, .. }) => assert!(path.contains("aero"), "{path}"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn toml_round_trip_is_identical() {
        let s = Scenario::desk();
        let back = Scenario::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(s, back);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(Scenario::from_json_str(&json).unwrap(), s);
    }

    #[test]
    fn db_and_linear_forms_bitwise_equal() {
        let db = format!("{MINIMAL}\nref_gain = \"30 dB\"\nnoise_power = \"-60 dBm\"\n");
        let lin = format!(
            "{MINIMAL}\nref_gain = {:?}\nnoise_power = {:?}\n",
            db_to_linear(30.0),
            dbm_to_watts(-60.0)
        );
        assert_eq!(Scenario::from_toml_str(&db).unwrap(), Scenario::from_toml_str(&lin).unwrap());
    }

    #[test]
    fn discretization_bound_enforced() {
        let mut s = Scenario::desk();
        s.disc_accuracy = Some(1e-3);
        // 40 * 80 / (20000 * 1e-3) = 160 slots needed.
        assert!(s.validate().is_err());
        s.slots = 160;
        s.horizon = 80.0;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn time_grid_cases() {
        let g = TimeGrid::from_step(350.0, 10.0).unwrap();
        assert_eq!(g.slots, 35);
        let g = TimeGrid::new(10.0, 1).unwrap();
        assert_eq!(g.dt, 10.0);
        assert_eq!(g.instants(), vec![0.0, 10.0]);
        assert!(TimeGrid::new(10.0, 0).is_err());
    }
}
