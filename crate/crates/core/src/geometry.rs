//! Platform-to-ground geometry, ULA steering vectors and channel synthesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::hermitian::{cvec_serde, CVector};
use crate::scenario::{GroundPoint, Scenario};

/// Platform position: horizontal `h = (x, y)` and altitude `z`, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement3D {
    pub h: [f64; 2],
    pub z: f64,
}

impl Placement3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { h: [x, y], z }
    }

    /// Squared horizontal offset `||h - g||^2`.
    pub fn horizontal_sq(&self, g: &GroundPoint) -> f64 {
        let dx = self.h[0] - g.x;
        let dy = self.h[1] - g.y;
        dx * dx + dy * dy
    }
}

/// Per-antenna complex gains toward one ground point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelVector {
    #[serde(with = "cvec_serde")]
    pub gains: CVector,
    pub los_only: bool,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.gains.norm_squared()
    }
}

pub fn distance(p: &Placement3D, g: &GroundPoint) -> f64 {
    (p.horizontal_sq(g) + p.z * p.z).sqrt()
}

/// `cos(theta) = z / d`.
pub fn aod_cosine(p: &Placement3D, g: &GroundPoint) -> f64 {
    p.z / distance(p, g)
}

/// Half-wavelength ULA response for a given direction cosine.
pub fn steering_from_cosine(cos_theta: f64, m: usize) -> CVector {
    CVector::from_iterator(
        m,
        (0..m).map(|i| Complex64::from_polar(1.0, PI * i as f64 * cos_theta)),
    )
}

/// `a_m = exp(j pi (m-1) cos(theta))`, `m = 1..M`.
pub fn steering_vector(p: &Placement3D, g: &GroundPoint, m: usize) -> CVector {
    steering_from_cosine(aod_cosine(p, g), m)
}

/// Free-space power gain `rho0 / d^2`.
pub fn path_gain(d: f64, ref_gain: f64) -> f64 {
    ref_gain / (d * d)
}

/// Identifies one NLOS realization: the same key always yields the same
/// draw, independent of evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelKey {
    pub seed: u64,
    pub user: u32,
    pub slot: u32,
}

/// Unit-variance circularly-symmetric Gaussian vector for `key`.
pub fn nlos_draw(key: ChannelKey, m: usize) -> CVector {
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed);
    rng.set_stream(((key.user as u64) << 32) | key.slot as u64);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_iterator(
        m,
        (0..m).map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(s * re, s * im)
        }),
    )
}

/// Parameters of the Rician channel model shared by all links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub antennas: usize,
    pub ref_gain: f64,
    pub rician_k: f64,
    pub los_only: bool,
}

impl ChannelModel {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            antennas: s.antennas,
            ref_gain: s.ref_gain,
            rician_k: s.rician_k,
            los_only: s.los_only,
        }
    }

    /// Same model with the NLOS component removed.
    pub fn los(mut self) -> Self {
        self.los_only = true;
        self
    }
}

/// `g = sqrt(rho0)/d (sqrt(K/(K+1)) a + sqrt(1/(K+1)) g_nlos)`.
///
/// With `los_only` (or `K = inf`) the scattered part vanishes and the
/// result is `sqrt(rho0)/d a`.
pub fn rician_channel(p: &Placement3D, g: &GroundPoint, model: &ChannelModel, key: ChannelKey) -> ChannelVector {
    let m = model.antennas;
    let d = distance(p, g);
    let amp = path_gain(d, model.ref_gain).sqrt();
    let a = steering_vector(p, g, m);
    let k = model.rician_k;
    let gains = if model.los_only || k.is_infinite() {
        a * Complex64::new(amp, 0.0)
    } else {
        let los = (k / (k + 1.0)).sqrt();
        let nlos = (1.0 / (k + 1.0)).sqrt();
        let n = nlos_draw(key, m);
        (a * Complex64::new(los, 0.0) + n * Complex64::new(nlos, 0.0)) * Complex64::new(amp, 0.0)
    };
    ChannelVector {
        gains,
        los_only: model.los_only,
    }
}

/// Channels of every user at one placement; `slot` selects the NLOS draw.
pub fn user_channels(s: &Scenario, model: &ChannelModel, p: &Placement3D, slot: u32) -> Vec<ChannelVector> {
    s.users
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let key = ChannelKey {
                seed: s.rng_seed,
                user: k as u32,
                slot,
            };
            rician_channel(p, u, model, key)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(k: f64, los: bool) -> ChannelModel {
        ChannelModel {
            antennas: 4,
            ref_gain: 1000.0,
            rician_k: k,
            los_only: los,
        }
    }

    #[test]
    fn distance_cases() {
        let g = GroundPoint::new(0.0, 0.0);
        assert_eq!(distance(&Placement3D::new(0.0, 0.0, 20_000.0), &g), 20_000.0);
        let d = distance(&Placement3D::new(0.0, 0.0, 1000.0), &GroundPoint::new(1000.0, 0.0));
        assert!((d - 1414.2136).abs() < 1e-4);
        assert!((aod_cosine(&Placement3D::new(0.0, 0.0, 1000.0), &GroundPoint::new(1000.0, 0.0)) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-5);
    }

    #[test]
    fn steering_limits() {
        let over = steering_vector(&Placement3D::new(0.0, 0.0, 20_000.0), &GroundPoint::new(0.0, 0.0), 4);
        for (i, want) in [1.0, -1.0, 1.0, -1.0].iter().enumerate() {
            assert!((over[i] - Complex64::new(*want, 0.0)).norm() < 1e-12);
        }
        let flat = steering_vector(&Placement3D::new(0.0, 0.0, 1e-9), &GroundPoint::new(1e6, 0.0), 4);
        for c in flat.iter() {
            assert!((c - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn path_gain_cases() {
        assert!((path_gain(20_000.0, 1000.0) - 2.5e-6).abs() < 1e-18);
        assert!((path_gain(1.0, 1000.0) - 1000.0).abs() < 1e-12);
        assert!((path_gain(10.0, 7.0) / path_gain(20.0, 7.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn los_limit_and_determinism() {
        let p = Placement3D::new(100.0, -300.0, 21_000.0);
        let g = GroundPoint::new(5_000.0, 2_000.0);
        let key = ChannelKey { seed: 3, user: 1, slot: 2 };
        let los = rician_channel(&p, &g, &model(10.0, true), key);
        let inf = rician_channel(&p, &g, &model(f64::INFINITY, false), key);
        assert_eq!(los.gains, inf.gains);
        let expect = distance(&p, &g);
        assert!((los.norm_squared() - 4.0 * 1000.0 / (expect * expect)).abs() < 1e-18);
        let a = rician_channel(&p, &g, &model(10.0, false), key);
        let b = rician_channel(&p, &g, &model(10.0, false), key);
        assert_eq!(a, b);
        let other = rician_channel(&p, &g, &model(10.0, false), ChannelKey { slot: 3, ..key });
        assert_ne!(a, other);
    }

    #[test]
    fn rician_mean_power() {
        let p = Placement3D::new(0.0, 0.0, 20_000.0);
        let g = GroundPoint::new(3_000.0, 0.0);
        let m = model(2.0, false);
        let n = 100_000u32;
        let mut acc = 0.0;
        for s in 0..n {
            let key = ChannelKey { seed: s as u64, user: 0, slot: 0 };
            acc += rician_channel(&p, &g, &m, key).norm_squared();
        }
        let d = distance(&p, &g);
        let want = 4.0 * 1000.0 / (d * d);
        assert!(((acc / n as f64) - want).abs() / want < 0.02);
    }
}
