//! Position dependence of quadratic forms `a(p)^H W a(p)` and their
//! first-order expansions.
//!
//! With `a_m = exp(j pi (m-1) c)` and `c = z / d`, the form reads
//! `tr(W) + 2 sum_{i<j} |W_ij| cos(theta_ij + pi (j-i) c)`, which depends
//! on the position only through `c`. Since `dc/dh = -z (h - m) / d^3` and
//! `dc/dz = |h - m|^2 / d^3`, every gradient is `df/dc` times one of these.

use serde::{Deserialize, Serialize};

use crate::geometry::Placement3D;
use crate::hermitian::HermitianMatrix;
use crate::scenario::GroundPoint;

const LOG2_E: f64 = std::f64::consts::LOG2_E;
const PI: f64 = std::f64::consts::PI;

/// Cached magnitudes and phases of the strictly upper triangle of a
/// Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairTerms {
    trace: f64,
    /// `(j - i, |W_ij|, arg W_ij)`.
    pairs: Vec<(f64, f64, f64)>,
}

impl PairTerms {
    pub fn new(w: &HermitianMatrix) -> Self {
        let m = w.dim();
        let mut pairs = Vec::with_capacity(m * (m.saturating_sub(1)) / 2);
        for i in 0..m {
            for j in (i + 1)..m {
                let e = w.get(i, j);
                pairs.push(((j - i) as f64, e.norm(), e.arg()));
            }
        }
        Self {
            trace: w.trace(),
            pairs,
        }
    }

    /// `tr(W) + 2 sum |W_ij| cos(theta_ij + pi (j-i) c)`.
    pub fn value(&self, c: f64) -> f64 {
        self.trace
            + self
                .pairs
                .iter()
                .map(|&(k, mag, th)| 2.0 * mag * (th + PI * k * c).cos())
                .sum::<f64>()
    }

    /// Derivative of [`Self::value`] with respect to `c`.
    pub fn slope(&self, c: f64) -> f64 {
        -self
            .pairs
            .iter()
            .map(|&(k, mag, th)| 2.0 * PI * k * mag * (th + PI * k * c).sin())
            .sum::<f64>()
    }
}

/// Geometry of one link at a placement.
#[derive(Debug, Clone, Copy)]
struct Link {
    /// `h - m`.
    dh: [f64; 2],
    z: f64,
    d: f64,
}

impl Link {
    fn new(p: &Placement3D, g: &GroundPoint) -> Self {
        let dh = [p.h[0] - g.x, p.h[1] - g.y];
        let d = (dh[0] * dh[0] + dh[1] * dh[1] + p.z * p.z).sqrt();
        Self { dh, z: p.z, d }
    }

    fn cosine(&self) -> f64 {
        self.z / self.d
    }

    fn d2(&self) -> f64 {
        self.d * self.d
    }

    /// `(dc/dh, dc/dz)`.
    fn cosine_gradient(&self) -> ([f64; 2], f64) {
        let d3 = self.d.powi(3);
        let horiz = self.dh[0] * self.dh[0] + self.dh[1] * self.dh[1];
        ([-self.z * self.dh[0] / d3, -self.z * self.dh[1] / d3], horiz / d3)
    }

    /// Value and `(d/dh, d/dz)` of a quadratic form.
    fn form(&self, t: &PairTerms) -> (f64, [f64; 2], f64) {
        let c = self.cosine();
        let s = t.slope(c);
        let (gh, gz) = self.cosine_gradient();
        (t.value(c), [s * gh[0], s * gh[1]], s * gz)
    }
}

/// `f(W_p, d)` for every user covariance and `g(R, d)` for user `user`.
pub fn exact_rate_terms(p: &Placement3D, w: &[HermitianMatrix], r: &HermitianMatrix, user: &GroundPoint) -> (Vec<f64>, f64) {
    let c = Link::new(p, user).cosine();
    let f = w.iter().map(|w| PairTerms::new(w).value(c)).collect();
    (f, PairTerms::new(r).value(c))
}

/// Per-slot covariances with their cached pair terms.
#[derive(Debug, Clone)]
pub struct SlotTerms {
    pub w: Vec<PairTerms>,
    pub r: PairTerms,
    pub h: PairTerms,
}

impl SlotTerms {
    pub fn new(w: &[HermitianMatrix], r: &HermitianMatrix) -> Self {
        let total = HermitianMatrix::sum(r.dim(), w.iter()).add(r);
        Self {
            w: w.iter().map(PairTerms::new).collect(),
            r: PairTerms::new(r),
            h: PairTerms::new(&total),
        }
    }
}

/// First-order model `c + v . (h - h0) + b (z - z0)` of a user's rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTaylor {
    pub c: f64,
    pub v: [f64; 2],
    pub b: f64,
    /// Signal-plus-interference-plus-scaled-noise at the expansion point.
    pub eta: f64,
    /// Interference-plus-scaled-noise at the expansion point.
    pub mu: f64,
}

impl RateTaylor {
    pub fn eval(&self, p0: &Placement3D, p: &Placement3D) -> f64 {
        self.c + self.v[0] * (p.h[0] - p0.h[0]) + self.v[1] * (p.h[1] - p0.h[1]) + self.b * (p.z - p0.z)
    }
}

/// `log2(eta) - log2(mu)` with `eta = sum_p f_p + g + sigma^2 d^2 / rho0`
/// and `mu` the same sum without user `k`'s own term.
pub fn exact_rate_hat(p: &Placement3D, terms: &SlotTerms, k: usize, user: &GroundPoint, noise: f64, ref_gain: f64) -> f64 {
    let link = Link::new(p, user);
    let c = link.cosine();
    let scaled_noise = noise * link.d2() / ref_gain;
    let g = terms.r.value(c);
    let mut eta = g + scaled_noise;
    let mut mu = g + scaled_noise;
    for (i, w) in terms.w.iter().enumerate() {
        let f = w.value(c);
        eta += f;
        if i != k {
            mu += f;
        }
    }
    eta.log2() - mu.log2()
}

pub fn rate_taylor(p: &Placement3D, terms: &SlotTerms, k: usize, user: &GroundPoint, noise: f64, ref_gain: f64) -> RateTaylor {
    let link = Link::new(p, user);
    let (g, g_h, g_z) = link.form(&terms.r);
    let n = noise / ref_gain;
    let noise_val = n * link.d2();
    let noise_h = [2.0 * n * link.dh[0], 2.0 * n * link.dh[1]];
    let noise_z = 2.0 * n * link.z;
    let (mut eta, mut eta_h, mut eta_z) = (g + noise_val, [g_h[0] + noise_h[0], g_h[1] + noise_h[1]], g_z + noise_z);
    let (mut mu, mut mu_h, mut mu_z) = (eta, eta_h, eta_z);
    for (i, w) in terms.w.iter().enumerate() {
        let (f, f_h, f_z) = link.form(w);
        eta += f;
        eta_h = [eta_h[0] + f_h[0], eta_h[1] + f_h[1]];
        eta_z += f_z;
        if i != k {
            mu += f;
            mu_h = [mu_h[0] + f_h[0], mu_h[1] + f_h[1]];
            mu_z += f_z;
        }
    }
    RateTaylor {
        c: eta.log2() - mu.log2(),
        v: [
            LOG2_E * (eta_h[0] / eta - mu_h[0] / mu),
            LOG2_E * (eta_h[1] / eta - mu_h[1] / mu),
        ],
        b: LOG2_E * (eta_z / eta - mu_z / mu),
        eta,
        mu,
    }
}

/// First-order model `xi + nu . (h - h0) + zeta (z - z0)` of `a^H H a`
/// toward one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeampatternTaylor {
    pub xi: f64,
    pub nu: [f64; 2],
    pub zeta: f64,
}

pub fn beampattern_taylor(p: &Placement3D, h: &PairTerms, target: &GroundPoint) -> BeampatternTaylor {
    let (xi, nu, zeta) = Link::new(p, target).form(h);
    BeampatternTaylor { xi, nu, zeta }
}

/// Exact `a^H H a` toward `target`.
pub fn beampattern_value(p: &Placement3D, h: &PairTerms, target: &GroundPoint) -> f64 {
    h.value(Link::new(p, target).cosine())
}

/// First-order model of the normalized gain `a^H H a / d^2`.
pub fn normalized_beampattern_taylor(p: &Placement3D, h: &PairTerms, target: &GroundPoint) -> BeampatternTaylor {
    let link = Link::new(p, target);
    let (f, f_h, f_z) = link.form(h);
    let d2 = link.d2();
    let d4 = d2 * d2;
    BeampatternTaylor {
        xi: f / d2,
        nu: [
            f_h[0] / d2 - f * 2.0 * link.dh[0] / d4,
            f_h[1] / d2 - f * 2.0 * link.dh[1] / d4,
        ],
        zeta: f_z / d2 - f * 2.0 * link.z / d4,
    }
}
