//! Sensing metrics: transmit beampattern toward a target and the SAR SNR.

use std::f64::consts::PI;

use crate::geometry::{distance, steering_vector, Placement3D};
use crate::hermitian::HermitianMatrix;
use crate::scenario::{GroundPoint, SarParams, Scenario};

/// Relative slack granted to the beampattern check.
pub const BP_REL_TOL: f64 = 1e-7;

/// `B = a^H H a` with `a` steered from `p` toward `t`.
pub fn beampattern_gain(p: &Placement3D, t: &GroundPoint, h: &HermitianMatrix) -> f64 {
    h.quad_form(&steering_vector(p, t, h.dim()))
}

/// Checks `B >= gamma d^2` up to [`BP_REL_TOL`].
pub fn bp_constraint_ok(p: &Placement3D, t: &GroundPoint, h: &HermitianMatrix, gamma: f64) -> bool {
    let d = distance(p, t);
    let rhs = gamma * d * d;
    beampattern_gain(p, t, h) >= rhs - BP_REL_TOL * rhs
}

/// Constant `c0` with `SNR = c0 P / (z^3 V)`.
pub fn sar_constant(sar: &SarParams, wavelength: f64, obs_angle: f64) -> f64 {
    let num = sar.g_t * sar.g_r * wavelength.powi(3) * sar.sigma0 * sar.c * sar.tau_p * sar.prf * obs_angle.sin().powi(2);
    let den = 256.0 * PI.powi(3) * sar.kappa * sar.t_o * sar.nf * sar.b_r * sar.l_tot;
    num / den
}

pub fn scenario_sar_constant(s: &Scenario) -> f64 {
    sar_constant(&s.sar, s.wavelength, s.flight.obs_angle)
}

/// SAR imaging SNR at altitude `z`, speed `v` and total transmit power.
pub fn sar_snr(z: f64, v: f64, p_total: f64, sar: &SarParams, wavelength: f64, obs_angle: f64) -> f64 {
    sar_constant(sar, wavelength, obs_angle) * p_total / (z.powi(3) * v)
}

/// Smallest total power meeting `snr_min` at altitude `z` and speed `v`.
pub fn snr_power_floor(snr_min: f64, z: f64, v: f64, c0: f64) -> f64 {
    snr_min * z.powi(3) * v / c0
}
