//! WebAssembly bindings for the static page in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs nothing beyond `JSON.parse`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use haps_isac::aero::{air_density, scf_power};
use haps_isac::geometry::distance;
use haps_isac::placement::{solve_static_on, StaticMode};
use haps_isac::radar::{beampattern_gain, sar_snr};
use haps_isac::scenario::GroundPoint;
use haps_isac::units::{dbm_to_watts, watts_to_dbm};
use haps_isac::{Placement3D, Scenario};

/// Radial samples of the beampattern curve.
const PATTERN_SAMPLES: usize = 121;
/// Horizontal reach of the beampattern curve, meters.
const PATTERN_REACH: f64 = 25_000.0;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("plain data serializes")
}

#[derive(Serialize)]
struct PointInfo {
    x: f64,
    y: f64,
    /// Horizontal offset from the platform, meters.
    offset: f64,
}

#[derive(Serialize)]
struct DeskInfo {
    users: Vec<PointInfo>,
    targets: Vec<PointInfo>,
    antennas: usize,
    power_max: f64,
    gamma_dbm: f64,
    area: [f64; 4],
}

fn points(ps: &[GroundPoint], p: &Placement3D) -> Vec<PointInfo> {
    ps.iter()
        .map(|g| PointInfo {
            x: g.x,
            y: g.y,
            offset: p.horizontal_sq(g).sqrt(),
        })
        .collect()
}

/// Layout and defaults of the built-in scenario.
#[wasm_bindgen]
pub fn desk_info() -> String {
    let s = Scenario::desk();
    let origin = Placement3D::new(0.0, 0.0, 0.0);
    to_json(&DeskInfo {
        users: points(&s.users, &origin),
        targets: points(&s.targets, &origin),
        antennas: s.antennas,
        power_max: s.power_max,
        gamma_dbm: watts_to_dbm(s.bp_threshold),
        area: s.area(),
    })
}

#[derive(Serialize)]
struct PlacementResult {
    objective: f64,
    /// Worst-target normalized beampattern, dBm.
    beampattern_dbm: f64,
    power_comm: f64,
    power_sensing: f64,
    iterations: usize,
    sar_snr: f64,
    users: Vec<PointInfo>,
    targets: Vec<PointInfo>,
    /// `(offset m, dBm)` samples of `a^H H a / d^2` along +x.
    pattern: Vec<[f64; 2]>,
}

/// ISAC beamforming at one fixed placement of the built-in scenario.
///
/// `x`, `y` in meters, `z_km` in kilometers, `p_max` in watts and `gamma_dbm`
/// the beampattern threshold.
#[wasm_bindgen]
pub fn solve_placement(x: f64, y: f64, z_km: f64, p_max: f64, gamma_dbm: f64) -> Result<String, JsError> {
    let mut s = Scenario::desk();
    s.power_max = p_max;
    s.bp_threshold = dbm_to_watts(gamma_dbm);
    s.validate().map_err(|e| JsError::new(&e.to_string()))?;
    let p = Placement3D::new(x, y, z_km * 1000.0);
    let d = solve_static_on(&s, &[p], StaticMode::Isac).map_err(|e| JsError::new(&e.to_string()))?;
    let bf = &d.solution.slots[0];
    let h = bf.total();

    let pattern = (0..PATTERN_SAMPLES)
        .map(|i| {
            let r = PATTERN_REACH * i as f64 / (PATTERN_SAMPLES - 1) as f64;
            let g = GroundPoint::new(x + r, y);
            let dist = distance(&p, &g);
            [r, watts_to_dbm(beampattern_gain(&p, &g, &h) / (dist * dist))]
        })
        .collect();

    let power_comm: f64 = bf.w.iter().map(|w| w.trace()).sum();
    Ok(to_json(&PlacementResult {
        objective: d.objective,
        beampattern_dbm: watts_to_dbm(d.beampattern),
        power_comm,
        power_sensing: bf.r.trace(),
        iterations: d.trace.iterations(),
        sar_snr: sar_snr(p.z, s.flight.v_max(), bf.power(), &s.sar, s.wavelength, s.flight.obs_angle),
        users: points(&s.users, &p),
        targets: points(&s.targets, &p),
        pattern,
    }))
}

#[derive(Serialize)]
struct FlightRow {
    z_km: f64,
    rho: f64,
    /// Propulsion power in a steady coordinated turn, watts.
    flight_power: f64,
    /// SAR SNR at the full power cap, linear.
    sar_snr: f64,
}

/// Air density, flight power and SAR SNR across the allowed altitude band
/// at airspeed `v` (m/s).
#[wasm_bindgen]
pub fn flight_profile(v: f64) -> Result<String, JsError> {
    let s = Scenario::desk();
    if !(v.is_finite() && v > 0.0) {
        return Err(JsError::new("airspeed must be positive"));
    }
    let (lo, hi) = (s.flight.h_min, s.flight.h_max);
    let rows = (0..=20)
        .map(|i| {
            let z = lo + (hi - lo) * i as f64 / 20.0;
            let rho = air_density(z).map_err(|e| JsError::new(&e.to_string()))?;
            Ok(FlightRow {
                z_km: z / 1000.0,
                rho,
                flight_power: scf_power(rho, v, &s.aero, s.flight.bank_angle),
                sar_snr: sar_snr(z, v, s.power_max, &s.sar, s.wavelength, s.flight.obs_angle),
            })
        })
        .collect::<Result<Vec<_>, JsError>>()?;
    Ok(to_json(&rows))
}
