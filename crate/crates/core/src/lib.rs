//! Joint 3D transmit beamforming and deployment optimization for an
//! ISAC-enabled high-altitude platform.
//!
//! The crate covers the whole pipeline: physical models ([`geometry`],
//! [`radar`], [`aero`], [`comm`]), a small interior-point conic solver
//! ([`conic`]), fixed-placement beamforming by SCA over a semidefinite
//! relaxation ([`beamforming`]), grid-search placement ([`placement`]),
//! trust-region trajectory design ([`trajectory`]) and the comparison
//! schemes ([`baselines`]).
//!
//! ```no_run
//! use haps_isac::{placement, scenario::Scenario};
//!
//! let scenario = Scenario::desk();
//! let design = placement::solve_static(&scenario).unwrap();
//! println!("{:?} -> {:.3} bps/Hz", design.placement, design.objective);
//! ```

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aero;
pub mod audit;
pub mod baselines;
pub mod beamforming;
pub mod comm;
pub mod conic;
pub mod error;
pub mod geometry;
pub mod hermitian;
pub mod placement;
pub mod radar;
pub mod scenario;
pub mod sweep;
pub mod trajectory;
pub mod units;

pub use error::{ConstraintClass, Error, Result};
pub use geometry::Placement3D;
pub use hermitian::HermitianMatrix;
pub use scenario::Scenario;

/// Runs `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always follows input order.
pub(crate) fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Wall-clock timer for trace rows. Reads zero on `wasm32-unknown-unknown`,
/// where `std::time::Instant` is unavailable.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    start: std::time::Instant,
}

impl Stopwatch {
    pub(crate) fn start() -> Self {
        Self {
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            start: std::time::Instant::now(),
        }
    }

    pub(crate) fn secs(&self) -> f64 {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        {
            0.0
        }
    }
}
