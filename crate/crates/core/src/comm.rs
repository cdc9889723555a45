//! Communication metrics: SINR, achievable rate and weighted sum-rate.

use serde::{Deserialize, Serialize};

use crate::geometry::ChannelVector;
use crate::hermitian::{opt_cvecs_serde, CVector, HermitianMatrix};

/// Covariances transmitted during one slot (or at one fixed placement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotBeamforming {
    /// Per-user covariance `W_k`.
    pub w: Vec<HermitianMatrix>,
    /// Rank-one beamformers `w_k` with `W_k = w_k w_k^H`, once extracted.
    #[serde(with = "opt_cvecs_serde", default)]
    pub vectors: Option<Vec<CVector>>,
    /// Dedicated sensing covariance `R_s`.
    pub r: HermitianMatrix,
}

impl SlotBeamforming {
    pub fn dim(&self) -> usize {
        self.r.dim()
    }

    /// `H = sum_k W_k + R_s`.
    pub fn total(&self) -> HermitianMatrix {
        HermitianMatrix::sum(self.dim(), self.w.iter()).add(&self.r)
    }

    /// `sum_k tr(W_k) + tr(R_s)`.
    pub fn power(&self) -> f64 {
        self.w.iter().map(|w| w.trace()).sum::<f64>() + self.r.trace()
    }

    pub fn is_psd(&self) -> bool {
        self.r.is_psd() && self.w.iter().all(|w| w.is_psd())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformingSolution {
    pub slots: Vec<SlotBeamforming>,
    /// Power ledger `P_ave[n]`.
    pub power: Vec<f64>,
}

impl BeamformingSolution {
    pub fn new(slots: Vec<SlotBeamforming>) -> Self {
        let power = slots.iter().map(|s| s.power()).collect();
        Self { slots, power }
    }

    pub fn single(slot: SlotBeamforming) -> Self {
        Self::new(vec![slot])
    }

    pub fn power_ok(&self, p_max: f64) -> bool {
        self.power.iter().all(|&p| p <= p_max + 1e-7 * p_max)
    }
}

/// Received powers of user `k`: `(signal, interference)` where the
/// interference includes the sensing beam but not the noise.
pub fn received_powers(k: usize, channels: &[ChannelVector], bf: &SlotBeamforming) -> (f64, f64) {
    let g = &channels[k].gains;
    let signal = bf.w[k].quad_form(g);
    let mut interference = bf.r.quad_form(g);
    for (p, w) in bf.w.iter().enumerate() {
        if p != k {
            interference += w.quad_form(g);
        }
    }
    (signal, interference)
}

pub fn sinr(k: usize, channels: &[ChannelVector], bf: &SlotBeamforming, noise: f64) -> f64 {
    let (s, i) = received_powers(k, channels, bf);
    (s / (i + noise)).max(0.0)
}

/// `log2(1 + gamma)` in bps/Hz.
pub fn rate_from_sinr(gamma: f64) -> f64 {
    (1.0 + gamma).log2()
}

pub fn rate(k: usize, channels: &[ChannelVector], bf: &SlotBeamforming, noise: f64) -> f64 {
    rate_from_sinr(sinr(k, channels, bf, noise))
}

/// `sum_k beta_k R_k` for one slot.
pub fn slot_weighted_rate(channels: &[ChannelVector], bf: &SlotBeamforming, weights: &[f64], noise: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(k, b)| b * rate(k, channels, bf, noise[k]))
        .sum()
}

/// `(1/N) sum_n sum_k beta_k R_k[n]`; `channels[n]` holds slot `n`'s channels.
pub fn weighted_sum_rate(
    solution: &BeamformingSolution,
    channels: &[Vec<ChannelVector>],
    weights: &[f64],
    noise: &[f64],
) -> f64 {
    let n = solution.slots.len().max(1) as f64;
    solution
        .slots
        .iter()
        .zip(channels)
        .map(|(bf, ch)| slot_weighted_rate(ch, bf, weights, noise))
        .sum::<f64>()
        / n
}
