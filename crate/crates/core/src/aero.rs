//! Air density, thrust, propulsion power and the flight energy budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{AeroParams, Scenario};

/// Altitude window (meters) over which the density fit is trusted.
pub const DENSITY_FIT_RANGE: (f64, f64) = (18_000.0, 32_000.0);

/// Quadratic density fit coefficients in `z` (km), result in kg/m^3 after
/// scaling by `1e-3`.
const RHO_A: f64 = 0.95162;
const RHO_B: f64 = -52.29356;
const RHO_C: f64 = 753.39927;

/// Density fit evaluated without the validity check.
pub fn air_density_unchecked(z: f64) -> f64 {
    let k = z / 1000.0;
    (RHO_A * k * k + RHO_B * k + RHO_C) * 1e-3
}

/// Air density in kg/m^3 at altitude `z` (meters).
pub fn air_density(z: f64) -> Result<f64> {
    let (lo, hi) = DENSITY_FIT_RANGE;
    if !(lo..=hi).contains(&z) {
        return Err(Error::InvalidInput(format!(
            "altitude {z} m is outside the density fit window [{lo}, {hi}] m"
        )));
    }
    Ok(air_density_unchecked(z))
}

/// The density fit as `a (z - z0)^2 + c` in meters; used to express the
/// energy constraint as a convex quadratic.
pub fn density_vertex_form() -> (f64, f64, f64) {
    let a = RHO_A * 1e-3 / 1e6;
    let z0 = -RHO_B / (2.0 * RHO_A) * 1000.0;
    let c = (RHO_C - RHO_B * RHO_B / (4.0 * RHO_A)) * 1e-3;
    (a, z0, c)
}

/// Full thrust `1/2 rho V^2 S C_D0 + 2 eps F_w^2 / (rho S V^2)`.
pub fn thrust(rho: f64, v: f64, aero: &AeroParams) -> f64 {
    thrust_approx(rho, v, aero) + 2.0 * aero.induced_factor() * aero.f_w.powi(2) / (rho * aero.s * v * v)
}

/// Parasitic-drag-only thrust `1/2 rho V^2 S C_D0`.
pub fn thrust_approx(rho: f64, v: f64, aero: &AeroParams) -> f64 {
    0.5 * rho * v * v * aero.s * aero.c_d0
}

/// Steady horizontal flight power for a thrust value.
pub fn shf_power(thrust: f64, v: f64, aero: &AeroParams) -> f64 {
    thrust * v / (aero.f_p * aero.f_e)
}

/// Steady circular flight power (approximate thrust) at bank angle `bank`.
pub fn scf_power(rho: f64, v: f64, aero: &AeroParams, bank: f64) -> f64 {
    shf_power(thrust_approx(rho, v, aero), v, aero) / bank.cos().powi(2)
}

/// Steady circular flight power with the induced-drag term kept.
pub fn scf_power_full(rho: f64, v: f64, aero: &AeroParams, bank: f64) -> f64 {
    shf_power(thrust(rho, v, aero), v, aero) / bank.cos().powi(2)
}

/// Per-slot energy bound `(P_max + V_max^3 S C_D0 rho(z) / (2 cos^2 bank f_p f_e)) dt`.
pub fn slot_energy_bound(s: &Scenario, z: f64) -> f64 {
    let v = s.flight.v_max();
    (s.power_max + scf_power(air_density_unchecked(z), v, &s.aero, s.flight.bank_angle)) * s.dt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub per_slot: Vec<f64>,
    pub cumulative: f64,
    /// `None` means the budget is unconstrained.
    pub budget: Option<f64>,
    pub feasible: bool,
}

impl EnergyLedger {
    pub fn new(per_slot: Vec<f64>, budget: Option<f64>) -> Self {
        let cumulative = per_slot.iter().sum();
        let feasible = budget.is_none_or(|b| cumulative <= b * (1.0 + 1e-9));
        Self {
            per_slot,
            cumulative,
            budget,
            feasible,
        }
    }
}

/// Energy of each slot `(P_ave[n] + P_SCF[n]) dt` for positions
/// `positions[0..=N]` (closed loop) and per-slot transmit powers.
///
/// Flight power uses the approximate thrust at the slot's actual speed
/// `|p[n] - p[n-1]| / dt` and the density at `z[n]`.
pub fn energy_ledger(positions: &[[f64; 3]], p_ave: &[f64], s: &Scenario) -> Result<EnergyLedger> {
    let n = p_ave.len();
    if positions.len() != n + 1 {
        return Err(Error::InvalidInput(format!(
            "energy ledger needs N+1 = {} positions, got {}",
            n + 1,
            positions.len()
        )));
    }
    let dt = s.dt();
    let mut per_slot = Vec::with_capacity(n);
    for i in 1..=n {
        let (a, b) = (positions[i - 1], positions[i]);
        let v = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt() / dt;
        let rho = air_density(b[2])?;
        let fly = scf_power(rho, v, &s.aero, s.flight.bank_angle);
        per_slot.push((p_ave[i - 1] + fly) * dt);
    }
    Ok(EnergyLedger::new(per_slot, s.e_start))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_spot_values() {
        assert!((air_density(20_000.0).unwrap() - 0.0882).abs() < 5e-5);
        assert!((air_density(30_000.0).unwrap() - 0.0411).abs() < 5e-5);
        // The fit is not monotone on its window: its minimum sits near
        // 27.5 km, so 25 km lies below the 20 km value but also below 30 km.
        let (_, z0, _) = density_vertex_form();
        assert!((z0 - 27_475.9).abs() < 1.0);
        let mid = air_density(25_000.0).unwrap();
        assert!(mid < air_density(20_000.0).unwrap());
        assert!(air_density(10_000.0).is_err());
        assert!(air_density(35_000.0).is_err());
    }

    #[test]
    fn vertex_form_matches_fit() {
        let (a, z0, c) = density_vertex_form();
        for z in [18_000.0, 21_500.0, 27_000.0, 32_000.0] {
            let v = a * (z - z0).powi(2) + c;
            assert!((v - air_density_unchecked(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn thrust_and_power() {
        let aero = AeroParams::default();
        let approx = thrust_approx(0.0882, 50.0, &aero);
        assert!((approx - 236.5).abs() < 0.1);
        let full = thrust(0.0882, 50.0, &aero);
        let induced = 2.0 * aero.induced_factor() * aero.f_w.powi(2) / (0.0882 * aero.s * 2500.0);
        assert!((full - approx - induced).abs() < 1e-9);
        let p = scf_power(0.0882, 50.0, &aero, 0.0);
        assert!((p - 15_460.0).abs() / 15_460.0 < 5e-3);
        assert_eq!(p, shf_power(approx, 50.0, &aero));
        assert!((scf_power(0.0882, 100.0, &aero, 0.0) / p - 8.0).abs() < 1e-9);
    }

    #[test]
    fn unlimited_budget_always_feasible() {
        let l = EnergyLedger::new(vec![1e12; 4], None);
        assert!(l.feasible);
        assert!(!EnergyLedger::new(vec![1.0, 2.0], Some(2.5)).feasible);
    }
}
