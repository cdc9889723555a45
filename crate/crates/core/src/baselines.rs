//! Comparison schemes: single-purpose beamforming, isotropic transmission
//! and a random circular flight.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{scenario_grid, solve_static_on, StaticDesign, StaticMode};
use crate::scenario::{GroundPoint, Scenario};
use crate::trajectory::{circle, max_circle_radius, solve_dynamic_with, DynamicDesign, DynamicMode, DynamicOptions, Trajectory};

/// Redraws allowed before a circle flight gives up.
pub const CIRCLE_DRAWS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    CommOnlyStatic,
    SarOnlyStatic,
    CommOnlyDynamic,
    SarOnlyDynamic,
    IsotropicDynamic,
    CircleFlight,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::CommOnlyStatic,
        BaselineKind::SarOnlyStatic,
        BaselineKind::CommOnlyDynamic,
        BaselineKind::SarOnlyDynamic,
        BaselineKind::IsotropicDynamic,
        BaselineKind::CircleFlight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::CommOnlyStatic => "comm_only_static",
            BaselineKind::SarOnlyStatic => "sar_only_static",
            BaselineKind::CommOnlyDynamic => "comm_only_dynamic",
            BaselineKind::SarOnlyDynamic => "sar_only_dynamic",
            BaselineKind::IsotropicDynamic => "isotropic_dynamic",
            BaselineKind::CircleFlight => "circle_flight",
        }
    }

    pub fn is_static(self) -> bool {
        matches!(self, BaselineKind::CommOnlyStatic | BaselineKind::SarOnlyStatic)
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        BaselineKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = BaselineKind::ALL.iter().map(|k| k.name()).collect();
                Error::InvalidInput(format!("unknown baseline `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Either kind of design, so callers can treat all schemes alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum Design {
    Static(StaticDesign),
    Dynamic(DynamicDesign),
}

impl Design {
    /// Weighted sum-rate, or the normalized beampattern for sensing-only
    /// dynamic designs.
    pub fn objective(&self) -> f64 {
        match self {
            Design::Static(d) => d.objective,
            Design::Dynamic(d) => d.objective,
        }
    }
}

pub fn solve_baseline(kind: BaselineKind, s: &Scenario) -> Result<Design> {
    let dynamic = |mode| {
        solve_dynamic_with(
            s,
            &DynamicOptions {
                mode,
                ..Default::default()
            },
        )
        .map(Design::Dynamic)
    };
    match kind {
        BaselineKind::CommOnlyStatic => solve_static_on(s, &scenario_grid(s), StaticMode::CommOnly).map(Design::Static),
        BaselineKind::SarOnlyStatic => solve_static_on(s, &scenario_grid(s), StaticMode::SarOnly).map(Design::Static),
        BaselineKind::CommOnlyDynamic => dynamic(DynamicMode::CommOnly),
        BaselineKind::SarOnlyDynamic => dynamic(DynamicMode::SarOnly),
        BaselineKind::IsotropicDynamic => dynamic(DynamicMode::Isotropic),
        BaselineKind::CircleFlight => circle_flight_design(s, s.rng_seed).map(Design::Dynamic),
    }
}

/// Random closed circle: center uniform over the ground-point box, radius
/// between half and all of the speed-limited maximum, and a sinusoidal
/// altitude profile whose slope respects the vertical speed limit.
pub fn circle_flight(s: &Scenario, rng: &mut impl Rng) -> Trajectory {
    let area = s.area();
    let center = GroundPoint::new(rng.random_range(area[0]..=area[1]), rng.random_range(area[2]..=area[3]));
    let n = s.slots.max(1);
    let r_max = if n >= 2 { max_circle_radius(s) } else { 0.0 };
    let radius = r_max * rng.random_range(0.5..=1.0);
    // |z[n] - z[n-1]| <= 2 A sin(pi / N) for z = zc + A sin(2 pi n / N + phase).
    let chord = 2.0 * (std::f64::consts::PI / n as f64).sin();
    let (lo, hi) = (s.flight.h_min, s.flight.h_max);
    let amp_speed = if chord > 0.0 { 0.999 * s.flight.v_z_max * s.dt() / chord } else { 0.0 };
    let amp = amp_speed.min(0.5 * (hi - lo)) * rng.random_range(0.0..=1.0);
    let zc = rng.random_range((lo + amp)..=(hi - amp));
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut t = circle(
        center,
        radius,
        |k| (zc + amp * (std::f64::consts::TAU * k as f64 / n as f64 + phase).sin()).clamp(lo, hi),
        n,
    );
    let last = t.slots();
    t.h[last] = t.h[0];
    t.z[last] = t.z[0];
    t
}

/// Beamforming along a random circle; the circle is redrawn while the
/// per-slot problems are infeasible.
pub fn circle_flight_design(s: &Scenario, seed: u64) -> Result<DynamicDesign> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..CIRCLE_DRAWS {
        let opts = DynamicOptions {
            mode: DynamicMode::Isac,
            init: Some(circle_flight(s, &mut rng)),
            optimize_trajectory: false,
        };
        match solve_dynamic_with(s, &opts) {
            Ok(d) => return Ok(d),
            Err(e) if e.is_infeasible() => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Solver("no circle drawn".into())))
}
