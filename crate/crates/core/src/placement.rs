//! Quasi-stationary design: evaluate beamforming on a 3D grid and keep the
//! best placement.


use serde::{Deserialize, Serialize};

use crate::beamforming::{
    extract_rank_one, max_min_beampattern, solve_beamforming, BeamformingTask, ConvergenceTrace, ExtractionMethod,
    ScaParams,
};
use crate::comm::{BeamformingSolution, SlotBeamforming};
use crate::error::{ConstraintClass, Error, Result};
use crate::geometry::{user_channels, ChannelModel, Placement3D};
use crate::hermitian::HermitianMatrix;
use crate::scenario::Scenario;

/// Objectives within this relative distance of the best count as ties.
pub const TIE_REL_TOL: f64 = 1e-9;

/// Evenly spaced coordinates over `[lo, hi]`; the midpoint when `n == 1`.
fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Altitude levels `H_min, H_min + step, ...` not exceeding `H_max`.
pub fn altitude_levels(h_min: f64, h_max: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || h_max <= h_min {
        return vec![h_min];
    }
    let count = ((h_max - h_min) / step * (1.0 + 1e-12)).floor() as usize + 1;
    (0..count).map(|i| h_min + step * i as f64).collect()
}

/// All candidate placements, ordered by altitude, then `x`, then `y`.
pub fn enumerate_grid(area: [f64; 4], nx: usize, ny: usize, levels: &[f64]) -> Vec<Placement3D> {
    let xs = axis(area[0], area[1], nx);
    let ys = axis(area[2], area[3], ny);
    let mut out = Vec::with_capacity(xs.len() * ys.len() * levels.len());
    for &z in levels {
        for &x in &xs {
            for &y in &ys {
                out.push(Placement3D::new(x, y, z));
            }
        }
    }
    out
}

/// The scenario's grid.
pub fn scenario_grid(s: &Scenario) -> Vec<Placement3D> {
    let levels = altitude_levels(s.flight.h_min, s.flight.h_max, s.grid.altitude_step);
    enumerate_grid(s.area(), s.grid.nx, s.grid.ny, &levels)
}

/// Which problem is solved at every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StaticMode {
    /// Weighted sum-rate under the sensing constraints.
    #[default]
    Isac,
    /// Weighted sum-rate with no sensing covariance or constraints.
    CommOnly,
    /// Max-min normalized beampattern with no communication beams.
    SarOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub feasible: bool,
    /// Weighted sum-rate, bps/Hz; `None` when infeasible.
    pub objective: Option<f64>,
    /// Min-over-targets `a^H H a / d^2`, watts.
    pub beampattern: Option<f64>,
    pub iterations: usize,
    pub status: String,
    /// Wall time, seconds. Not part of the serialized design.
    #[serde(skip, default)]
    pub time: f64,
}

impl GridRow {
    pub const CSV_HEADER: &'static str = "x,y,z,feasible,objective,beampattern,iterations,status";

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.x,
            self.y,
            self.z,
            self.feasible,
            opt(self.objective),
            opt(self.beampattern),
            self.iterations,
            self.status
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticDesign {
    pub mode: StaticMode,
    pub placement: Placement3D,
    pub solution: BeamformingSolution,
    /// Weighted sum-rate at the selected placement, bps/Hz.
    pub objective: f64,
    /// Min-over-targets normalized beampattern at the selected placement.
    pub beampattern: f64,
    pub extraction: ExtractionMethod,
    /// SCA trace at the selected placement.
    pub trace: ConvergenceTrace,
    pub table: Vec<GridRow>,
}

impl StaticDesign {
    pub fn table_csv(&self) -> String {
        let mut s = String::from(GridRow::CSV_HEADER);
        s.push('\n');
        for r in &self.table {
            s.push_str(&r.csv());
            s.push('\n');
        }
        s
    }
}

/// Task for `mode` at placement `p`.
pub fn static_task(s: &Scenario, model: &ChannelModel, p: &Placement3D, mode: StaticMode) -> BeamformingTask {
    let task = BeamformingTask::isac(s, p, user_channels(s, model, p, 0), p.z);
    match mode {
        StaticMode::CommOnly => task.comm_only(),
        _ => task,
    }
}

fn min_beampattern(task: &BeamformingTask, bf: &SlotBeamforming) -> f64 {
    let h = bf.total();
    task.targets
        .iter()
        .map(|t| t.gain(&h) / t.dist_sq)
        .fold(f64::INFINITY, f64::min)
}

struct PointResult {
    row: GridRow,
    design: Option<(SlotBeamforming, ExtractionMethod, ConvergenceTrace)>,
    error: Option<Error>,
}

fn evaluate(s: &Scenario, model: &ChannelModel, p: &Placement3D, mode: StaticMode, params: &ScaParams) -> PointResult {
    let start = crate::Stopwatch::start();
    let task = static_task(s, model, p, mode);
    let outcome = match mode {
        StaticMode::SarOnly => max_min_beampattern(&task, params).map(|(r, _)| {
            let bf = SlotBeamforming {
                w: vec![HermitianMatrix::zeros(s.antennas); s.k()],
                vectors: None,
                r,
            };
            (bf, ExtractionMethod::AlreadyRankOne, ConvergenceTrace::default())
        }),
        _ => solve_beamforming(&task, None, params).map(|(bf, trace)| {
            let (bf, method) = extract_rank_one(&task, &bf);
            (bf, method, trace)
        }),
    };
    let mut row = GridRow {
        x: p.h[0],
        y: p.h[1],
        z: p.z,
        feasible: false,
        objective: None,
        beampattern: None,
        iterations: 0,
        status: String::new(),
        time: 0.0,
    };
    let result = match outcome {
        Ok((bf, method, trace)) => {
            row.feasible = true;
            row.objective = Some(task.objective(&bf));
            row.beampattern = (!task.targets.is_empty()).then(|| min_beampattern(&task, &bf));
            row.iterations = trace.iterations();
            row.status = "optimal".into();
            PointResult {
                row,
                design: Some((bf, method, trace)),
                error: None,
            }
        }
        Err(e) => {
            row.status = match e.infeasible_class() {
                Some(c) => format!("infeasible:{c}"),
                None => "solver_failure".into(),
            };
            PointResult {
                row,
                design: None,
                error: Some(e),
            }
        }
    };
    PointResult {
        row: GridRow {
            time: start.secs(),
            ..result.row
        },
        ..result
    }
}

/// Selection metric of a row: the rate, or the beampattern for sensing-only.
fn metric(row: &GridRow, mode: StaticMode) -> Option<f64> {
    match mode {
        StaticMode::SarOnly => row.beampattern,
        _ => row.objective,
    }
}

/// Index of the best row; ties go to the lowest `z`, then `x`, then `y`.
pub fn select_best(rows: &[GridRow], mode: StaticMode) -> Option<usize> {
    let best = rows
        .iter()
        .filter(|r| r.feasible)
        .filter_map(|r| metric(r, mode))
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    let cut = best - TIE_REL_TOL * best.abs().max(f64::MIN_POSITIVE);
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.feasible && metric(r, mode).is_some_and(|v| v >= cut))
        .min_by(|(_, a), (_, b)| {
            a.z.total_cmp(&b.z)
                .then(a.x.total_cmp(&b.x))
                .then(a.y.total_cmp(&b.y))
        })
        .map(|(i, _)| i)
}

/// Solve at every grid point and keep the best.
pub fn solve_static(s: &Scenario) -> Result<StaticDesign> {
    solve_static_on(s, &scenario_grid(s), StaticMode::Isac)
}

pub fn solve_static_on(s: &Scenario, grid: &[Placement3D], mode: StaticMode) -> Result<StaticDesign> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("placement grid is empty".into()));
    }
    let model = ChannelModel::from_scenario(s);
    let params = ScaParams::from_scenario(s);
    let mut results = crate::par_map(grid, |_, p| evaluate(s, &model, p, mode, &params));
    let table: Vec<GridRow> = results.iter().map(|r| r.row.clone()).collect();
    let Some(best) = select_best(&table, mode) else {
        return Err(all_failed(&mut results));
    };
    let (bf, extraction, trace) = results[best].design.take().expect("feasible row has a design");
    let row = &table[best];
    Ok(StaticDesign {
        mode,
        placement: grid[best],
        objective: row.objective.unwrap_or(0.0),
        beampattern: row.beampattern.unwrap_or(f64::NAN),
        solution: BeamformingSolution::single(bf),
        extraction,
        trace,
        table,
    })
}

/// Summarizes why no grid point produced a design.
fn all_failed(results: &mut [PointResult]) -> Error {
    let mut counts: Vec<(ConstraintClass, usize)> = Vec::new();
    let mut solver = None;
    for r in results.iter_mut() {
        let Some(e) = r.error.take() else { continue };
        match e.infeasible_class() {
            Some(c) => match counts.iter_mut().find(|(k, _)| *k == c) {
                Some(entry) => entry.1 += 1,
                None => counts.push((c, 1)),
            },
            None => solver = solver.or(Some(e)),
        }
    }
    if let Some((class, n)) = counts.iter().max_by_key(|(_, n)| *n) {
        return Error::infeasible(
            *class,
            format!("no feasible grid point ({n} of {} blocked by {class})", results.len()),
        );
    }
    solver.unwrap_or_else(|| Error::Solver("no grid point could be evaluated".into()))
}
