//! Dynamic design: trajectory optimization by trust-region SCA, alternated
//! with per-slot beamforming.

pub mod taylor;

use serde::{Deserialize, Serialize};

use crate::aero::{density_vertex_form, energy_ledger, scf_power, EnergyLedger};
use crate::beamforming::{
    extract_rank_one, max_min_beampattern, solve_beamforming, BeamformingTask, ExtractionMethod, ScaParams,
};
use crate::comm::{slot_weighted_rate, BeamformingSolution, SlotBeamforming};
use crate::conic::{Affine, ConicProgram, RealVar, SolveStatus, SolverOptions};
use crate::error::{ConstraintClass, Error, Result};
use crate::geometry::{user_channels, ChannelModel, Placement3D};
use crate::hermitian::HermitianMatrix;
use crate::radar::beampattern_gain;
use crate::scenario::{GroundPoint, Scenario};

pub use taylor::{
    beampattern_taylor, exact_rate_hat, exact_rate_terms, normalized_beampattern_taylor, rate_taylor,
    BeampatternTaylor, PairTerms, RateTaylor, SlotTerms,
};

/// Relative slack allowed on norm constraints (speed limits).
pub const NORM_REL_TOL: f64 = 1e-9;
/// Relative slack on the beampattern when accepting a trajectory step.
const STEP_BP_TOL: f64 = 1e-8;

/// Closed trajectory sampled at `n = 0..=N`; slot `n >= 1` uses point `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub h: Vec<[f64; 2]>,
    pub z: Vec<f64>,
}

impl Trajectory {
    pub fn new(h: Vec<[f64; 2]>, z: Vec<f64>) -> Result<Self> {
        if h.len() != z.len() || h.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "trajectory needs matching h/z of length >= 2, got {} and {}",
                h.len(),
                z.len()
            )));
        }
        Ok(Self { h, z })
    }

    pub fn slots(&self) -> usize {
        self.z.len() - 1
    }

    pub fn point(&self, n: usize) -> Placement3D {
        Placement3D::new(self.h[n][0], self.h[n][1], self.z[n])
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.z.len()).map(|n| [self.h[n][0], self.h[n][1], self.z[n]]).collect()
    }

    /// Horizontal and vertical displacement of slot `n` (from `n-1` to `n`).
    pub fn step(&self, n: usize) -> (f64, f64) {
        let (a, b) = (self.h[n - 1], self.h[n]);
        ((b[0] - a[0]).hypot(b[1] - a[1]), (self.z[n] - self.z[n - 1]).abs())
    }

    /// Violated flight constraints, empty when the trajectory is valid.
    pub fn violations(&self, s: &Scenario) -> Vec<(ConstraintClass, String)> {
        let mut out = Vec::new();
        let last = self.slots();
        if self.h[0] != self.h[last] || self.z[0] != self.z[last] {
            out.push((ConstraintClass::Closure, "first and last points differ".into()));
        }
        let (vxy, vz) = (s.flight.v_xy_max * s.dt(), s.flight.v_z_max * s.dt());
        for n in 1..=last {
            let (dh, dz) = self.step(n);
            if dh > vxy * (1.0 + NORM_REL_TOL) {
                out.push((ConstraintClass::SpeedXy, format!("slot {n}: {dh} m > {vxy} m")));
            }
            if dz > vz * (1.0 + NORM_REL_TOL) {
                out.push((ConstraintClass::SpeedZ, format!("slot {n}: {dz} m > {vz} m")));
            }
        }
        for (n, &z) in self.z.iter().enumerate() {
            if z < s.flight.h_min || z > s.flight.h_max {
                out.push((ConstraintClass::Altitude, format!("point {n}: z = {z} m")));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,x,y,z\n");
        for n in 0..self.z.len() {
            s.push_str(&format!("{},{},{},{}\n", n, self.h[n][0], self.h[n][1], self.z[n]));
        }
        s
    }
}

/// Closed horizontal circle at constant or varying altitude.
///
/// Point `n` sits at azimuth `2 pi n / N` measured from the `+y` axis.
pub fn circle(center: GroundPoint, radius: f64, z: impl Fn(usize) -> f64, slots: usize) -> Trajectory {
    let mut h = Vec::with_capacity(slots + 1);
    let mut zs = Vec::with_capacity(slots + 1);
    for n in 0..=slots {
        let phi = std::f64::consts::TAU * (n % slots) as f64 / slots as f64;
        h.push([center.x + radius * phi.sin(), center.y + radius * phi.cos()]);
        zs.push(z(n % slots));
    }
    Trajectory { h, z: zs }
}

/// Largest radius whose chord `2 R sin(pi / N)` fits the horizontal speed
/// limit, with a hair of margin so the start point is strictly feasible.
pub fn max_circle_radius(s: &Scenario) -> f64 {
    let n = s.slots.max(1) as f64;
    let chord = (std::f64::consts::PI / n).sin() * 2.0;
    0.999 * s.flight.v_xy_max * s.dt() / chord
}

/// Circular start at `H_min` around the centroid of all ground points.
///
/// The nominal radius is `H_min tan(alpha)`; it is shrunk until every
/// chord respects the horizontal speed limit.
pub fn circular_init(s: &Scenario) -> Trajectory {
    let pts: Vec<GroundPoint> = s.users.iter().chain(&s.targets).copied().collect();
    circular_init_at(s, GroundPoint::centroid(&pts))
}

/// Circle center for the alternation.
///
/// Candidates are the centroid of all ground points and the horizontal
/// grid at `H_min`; the best one is then refined by a compass search on
/// the single-placement objective of `mode`. The trajectory step only
/// moves the orbit by a trust radius at a time, so a good start keeps the
/// outer loop short.
pub fn initial_center(s: &Scenario, mode: DynamicMode) -> Result<GroundPoint> {
    let z = s.flight.h_min;
    let model = los_model(s);
    let params = ScaParams::from_scenario(s);
    let score = |c: &GroundPoint| -> Option<f64> {
        let p = Placement3D::new(c.x, c.y, z);
        let task = BeamformingTask::isac(s, &p, user_channels(s, &model, &p, 0), s.flight.h_max);
        match mode {
            DynamicMode::Isac => solve_beamforming(&task, None, &params).ok().map(|(bf, _)| task.objective(&bf)),
            DynamicMode::CommOnly => {
                let task = task.comm_only();
                solve_beamforming(&task, None, &params).ok().map(|(bf, _)| task.objective(&bf))
            }
            DynamicMode::SarOnly => max_min_beampattern(&task, &params).ok().map(|(_, v)| v),
            DynamicMode::Isotropic => {
                // Isotropic beams cannot steer, so the whole orbit has to clear
                // the beampattern threshold, not just its center.
                let orbit = circular_init_at(s, *c);
                let slots = vec![isotropic_slot(s, 0.0); s.slots];
                step_violation(s, mode, &orbit, &slots)
                    .is_none()
                    .then(|| true_objective(s, mode, &orbit, &slots))
            }
        }
    };
    let pts: Vec<GroundPoint> = s.users.iter().chain(&s.targets).copied().collect();
    let mut candidates = vec![GroundPoint::centroid(&pts)];
    candidates.extend(
        crate::placement::enumerate_grid(s.area(), s.grid.nx, s.grid.ny, &[z])
            .iter()
            .map(|p| GroundPoint::new(p.h[0], p.h[1])),
    );
    let pick = |cands: &[GroundPoint], scores: Vec<Option<f64>>| -> Option<(GroundPoint, f64)> {
        let mut best: Option<(GroundPoint, f64)> = None;
        for (c, v) in cands.iter().zip(scores) {
            if let Some(v) = v {
                if best.is_none_or(|(_, b)| v > b + 1e-9 * b.abs()) {
                    best = Some((*c, v));
                }
            }
        }
        best
    };
    let scores = crate::par_map(&candidates, |_, c| score(c));
    let Some((mut center, mut value)) = pick(&candidates, scores) else {
        // Nothing feasible at H_min; let the per-slot solves report why.
        return Ok(candidates[0]);
    };
    let area = s.area();
    let mut step = ((area[1] - area[0]).max(area[3] - area[2]) / 8.0).max(100.0);
    let mut rounds = 0;
    while step >= 50.0 && rounds < 60 {
        rounds += 1;
        let moves = [
            GroundPoint::new(center.x + step, center.y),
            GroundPoint::new(center.x - step, center.y),
            GroundPoint::new(center.x, center.y + step),
            GroundPoint::new(center.x, center.y - step),
        ];
        let scores = crate::par_map(&moves, |_, c| score(c));
        match pick(&moves, scores) {
            Some((c, v)) if v > value + 1e-9 * value.abs() => {
                center = c;
                value = v;
            }
            _ => step *= 0.5,
        }
    }
    Ok(center)
}

pub fn circular_init_at(s: &Scenario, center: GroundPoint) -> Trajectory {
    let z = s.flight.h_min;
    let nominal = z * s.flight.obs_angle.tan();
    let radius = if s.slots >= 2 { nominal.min(max_circle_radius(s)) } else { 0.0 };
    circle(center, radius, |_| z, s.slots)
}

/// Which problem the dynamic machinery solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DynamicMode {
    #[default]
    Isac,
    CommOnly,
    /// Average over slots of the min-over-targets normalized beampattern.
    SarOnly,
    /// Scaled-identity covariances; only the power split is optimized.
    Isotropic,
}

impl DynamicMode {
    fn rate_objective(self) -> bool {
        self != DynamicMode::SarOnly
    }

    fn beampattern_constrained(self) -> bool {
        matches!(self, DynamicMode::Isac | DynamicMode::Isotropic)
    }
}

fn los_model(s: &Scenario) -> ChannelModel {
    ChannelModel::from_scenario(s).los()
}

fn min_normalized_beampattern(p: &Placement3D, h: &HermitianMatrix, targets: &[GroundPoint]) -> f64 {
    targets
        .iter()
        .map(|t| beampattern_gain(p, t, h) / crate::geometry::distance(p, t).powi(2))
        .fold(f64::INFINITY, f64::min)
}

/// True (non-surrogate) objective: average weighted sum-rate, or the
/// average min-over-targets normalized beampattern for `SarOnly`.
pub fn true_objective(s: &Scenario, mode: DynamicMode, traj: &Trajectory, slots: &[SlotBeamforming]) -> f64 {
    let model = los_model(s);
    let n = traj.slots();
    let total: f64 = (1..=n)
        .map(|i| {
            let p = traj.point(i);
            let bf = &slots[i - 1];
            if mode.rate_objective() {
                slot_weighted_rate(&user_channels(s, &model, &p, i as u32), bf, &s.weights, &s.noise_power)
            } else {
                min_normalized_beampattern(&p, &bf.total(), &s.targets)
            }
        })
        .sum();
    total / n as f64
}

/// Convex upper bound on the flight energy used inside the subproblem.
fn energy_bound(s: &Scenario, traj: &Trajectory, p_ave: &[f64]) -> f64 {
    let v = s.flight.v_max();
    (1..=traj.slots())
        .map(|n| {
            let rho = crate::aero::air_density_unchecked(traj.z[n]);
            (p_ave[n - 1] + scf_power(rho, v, &s.aero, s.flight.bank_angle)) * s.dt()
        })
        .sum()
}

/// First violated trajectory-step constraint at `traj` with the covariances fixed.
fn step_violation(s: &Scenario, mode: DynamicMode, traj: &Trajectory, slots: &[SlotBeamforming]) -> Option<ConstraintClass> {
    if let Some((c, _)) = traj.violations(s).into_iter().next() {
        return Some(c);
    }
    if mode.beampattern_constrained() {
        for n in 1..=traj.slots() {
            let p = traj.point(n);
            let h = slots[n - 1].total();
            for t in &s.targets {
                let rhs = s.bp_threshold * crate::geometry::distance(&p, t).powi(2);
                if beampattern_gain(&p, t, &h) < rhs * (1.0 - STEP_BP_TOL) {
                    return Some(ConstraintClass::Beampattern);
                }
            }
        }
    }
    if let Some(budget) = s.e_start {
        let p_ave: Vec<f64> = slots.iter().map(|b| b.power()).collect();
        if energy_bound(s, traj, &p_ave) > budget {
            return Some(ConstraintClass::Energy);
        }
    }
    None
}

/// Decision variables of the trajectory subproblem: scaled displacements
/// `delta = (p - p_l) / radius` for every point `n = 0..=N`.
#[derive(Debug, Clone)]
pub struct TrajVars {
    pub x: Vec<RealVar>,
    pub y: Vec<RealVar>,
    pub z: Vec<RealVar>,
    /// Per-slot epigraph variables (sensing-only objective).
    pub tau: Vec<RealVar>,
}

/// Fixed data of one trajectory step.
#[derive(Debug, Clone)]
pub struct TrajContext<'a> {
    pub scenario: &'a Scenario,
    pub mode: DynamicMode,
    pub slots: &'a [SlotBeamforming],
    terms: Vec<SlotTerms>,
}

impl<'a> TrajContext<'a> {
    pub fn new(scenario: &'a Scenario, mode: DynamicMode, slots: &'a [SlotBeamforming]) -> Self {
        let terms = slots.iter().map(|b| SlotTerms::new(&b.w, &b.r)).collect();
        Self {
            scenario,
            mode,
            slots,
            terms,
        }
    }

    pub fn terms(&self, n: usize) -> &SlotTerms {
        &self.terms[n - 1]
    }
}

/// The convex trajectory subproblem around `expansion` with trust radius
/// `radius` (meters).
pub fn build_traj_subproblem(ctx: &TrajContext, expansion: &Trajectory, radius: f64) -> (ConicProgram, TrajVars) {
    let s = ctx.scenario;
    let n_slots = expansion.slots();
    let phi = radius;
    let mut prog = ConicProgram::new();
    let x: Vec<RealVar> = (0..=n_slots).map(|_| prog.add_real()).collect();
    let y: Vec<RealVar> = (0..=n_slots).map(|_| prog.add_real()).collect();
    let z: Vec<RealVar> = (0..=n_slots).map(|_| prog.add_real()).collect();
    let mut tau = Vec::new();

    // Position coordinate `p_l + phi delta` as an affine expression.
    let coord = |v: RealVar, base: f64| Affine::constant(base).with_real(v, phi);

    let mut objective = Affine::default();
    let inv_n = 1.0 / n_slots as f64;
    for n in 1..=n_slots {
        let p = expansion.point(n);
        let terms = ctx.terms(n);
        if ctx.mode.rate_objective() {
            for (k, u) in s.users.iter().enumerate() {
                let t = rate_taylor(&p, terms, k, u, s.noise_power[k], s.ref_gain);
                let w = s.weights[k] * inv_n * phi;
                objective = objective
                    .with_real(x[n], w * t.v[0])
                    .with_real(y[n], w * t.v[1])
                    .with_real(z[n], w * t.b)
                    .with_constant(s.weights[k] * inv_n * t.c);
            }
        } else {
            // Epigraph of the min over targets, scaled by its current value.
            let models: Vec<BeampatternTaylor> = s
                .targets
                .iter()
                .map(|t| normalized_beampattern_taylor(&p, &terms.h, t))
                .collect();
            let scale = models.iter().map(|m| m.xi).fold(f64::INFINITY, f64::min).max(f64::MIN_POSITIVE);
            let t_var = prog.add_real();
            tau.push(t_var);
            for m in &models {
                prog.add_ge(
                    Affine::constant(m.xi / scale)
                        .with_real(x[n], phi * m.nu[0] / scale)
                        .with_real(y[n], phi * m.nu[1] / scale)
                        .with_real(z[n], phi * m.zeta / scale)
                        .with_real(t_var, -1.0),
                    ConstraintClass::Epigraph,
                );
            }
            objective = objective.with_real(t_var, inv_n * scale);
        }

        if ctx.mode.beampattern_constrained() {
            for t in &s.targets {
                let m = beampattern_taylor(&p, &terms.h, t);
                let g = s.bp_threshold;
                prog.add_concave_quadratic(
                    Affine::constant(m.xi)
                        .with_real(x[n], phi * m.nu[0])
                        .with_real(y[n], phi * m.nu[1])
                        .with_real(z[n], phi * m.zeta),
                    vec![
                        (g, coord(z[n], p.z)),
                        (g, coord(x[n], p.h[0] - t.x)),
                        (g, coord(y[n], p.h[1] - t.y)),
                    ],
                    ConstraintClass::Beampattern,
                );
            }
        }
    }
    prog.add_linear(&objective);

    // Trust region on every slot point (point 0 follows through closure).
    for n in 1..=n_slots {
        prog.add_soc(
            Affine::constant(1.0),
            vec![Affine::var(x[n], 1.0), Affine::var(y[n], 1.0)],
            ConstraintClass::TrustRegion,
        );
        prog.add_concave_quadratic(Affine::constant(1.0), vec![(1.0, Affine::var(z[n], 1.0))], ConstraintClass::TrustRegion);
    }

    // Altitude window as (z - mid)^2 <= half^2, normalized.
    let mid = 0.5 * (s.flight.h_min + s.flight.h_max);
    let half = 0.5 * (s.flight.h_max - s.flight.h_min);
    for (&z0, &var) in expansion.z.iter().zip(&z) {
        let e = Affine::constant((z0 - mid) / half).with_real(var, phi / half);
        prog.add_concave_quadratic(Affine::constant(1.0), vec![(1.0, e)], ConstraintClass::Altitude);
    }

    let dt = s.dt();
    let vxy = s.flight.v_xy_max * dt;
    let vz = s.flight.v_z_max * dt;
    for n in 1..=n_slots {
        let dx = Affine::constant(expansion.h[n][0] - expansion.h[n - 1][0])
            .with_real(x[n], phi)
            .with_real(x[n - 1], -phi);
        let dy = Affine::constant(expansion.h[n][1] - expansion.h[n - 1][1])
            .with_real(y[n], phi)
            .with_real(y[n - 1], -phi);
        prog.add_soc(Affine::constant(vxy), vec![dx.scaled(1.0), dy.scaled(1.0)], ConstraintClass::SpeedXy);
    }
    for n in 1..=n_slots {
        let dz = Affine::constant((expansion.z[n] - expansion.z[n - 1]) / vz)
            .with_real(z[n], phi / vz)
            .with_real(z[n - 1], -phi / vz);
        prog.add_concave_quadratic(Affine::constant(1.0), vec![(1.0, dz)], ConstraintClass::SpeedZ);
    }

    if let Some(budget) = s.e_start {
        let (a, z0, c) = density_vertex_form();
        let v = s.flight.v_max();
        // P_scf is linear in density: k * rho.
        let k = scf_power(1.0, v, &s.aero, s.flight.bank_angle) * dt;
        let p_ave: f64 = ctx.slots.iter().map(|b| b.power()).sum::<f64>() * dt;
        let scale = budget.abs().max(1.0);
        let constant = (budget - p_ave - k * c * n_slots as f64) / scale;
        let squares = (1..=n_slots)
            .map(|n| (k * a / scale, coord(z[n], expansion.z[n] - z0)))
            .collect();
        prog.add_concave_quadratic(Affine::constant(constant), squares, ConstraintClass::Energy);
    }

    for v in [&x, &y, &z] {
        prog.add_eq(Affine::var(v[0], 1.0).with_real(v[n_slots], -1.0), ConstraintClass::Closure);
    }
    (prog, TrajVars { x, y, z, tau })
}

/// One row of the trust-region log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRow {
    pub outer: usize,
    pub step: usize,
    pub radius: f64,
    pub accepted: bool,
    /// True objective after the step (the incumbent's when rejected).
    pub objective: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustParams {
    pub init_radius: f64,
    pub min_radius: f64,
    pub max_steps: usize,
    pub tol: f64,
}

impl TrustParams {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            init_radius: s
                .algorithm
                .trust_init
                .unwrap_or(0.5 * s.flight.v_xy_max * s.dt()),
            min_radius: s.algorithm.trust_epsilon,
            max_steps: s.algorithm.trust_max_iter,
            tol: s.algorithm.solver_tol,
        }
    }
}

fn candidate_from(expansion: &Trajectory, vars: &TrajVars, real: &[f64], radius: f64, s: &Scenario) -> Trajectory {
    let n_slots = expansion.slots();
    let mut h = Vec::with_capacity(n_slots + 1);
    let mut z = Vec::with_capacity(n_slots + 1);
    for n in 0..=n_slots {
        h.push([
            expansion.h[n][0] + radius * real[vars.x[n].0],
            expansion.h[n][1] + radius * real[vars.y[n].0],
        ]);
        z.push((expansion.z[n] + radius * real[vars.z[n].0]).clamp(s.flight.h_min, s.flight.h_max));
    }
    h[0] = h[n_slots];
    z[0] = z[n_slots];
    Trajectory { h, z }
}

/// Trust-region SCA over the trajectory with the covariances fixed.
///
/// A step is kept only if the true objective strictly increases and every
/// constraint holds at the new point; otherwise the radius is halved. The
/// loop ends once the radius drops below `min_radius`.
pub fn solve_trajectory(
    ctx: &TrajContext,
    init: &Trajectory,
    params: &TrustParams,
    outer: usize,
) -> (Trajectory, Vec<TrustRow>) {
    let s = ctx.scenario;
    let mut current = init.clone();
    let mut objective = true_objective(s, ctx.mode, &current, ctx.slots);
    let mut radius = params.init_radius;
    let mut rows = Vec::new();
    let opts = SolverOptions::with_tol(params.tol);
    let mut step = 0;
    while radius >= params.min_radius && step < params.max_steps {
        step += 1;
        let (prog, vars) = build_traj_subproblem(ctx, &current, radius);
        let res = prog.solve(&opts);
        let mut row = TrustRow {
            outer,
            step,
            radius,
            accepted: false,
            objective,
            status: String::new(),
        };
        match (res.status, res.assignment) {
            (st, Some(a)) if st.has_solution() => {
                let cand = candidate_from(&current, &vars, &a.real, radius, s);
                if let Some(c) = step_violation(s, ctx.mode, &cand, ctx.slots) {
                    row.status = format!("rejected:{c}");
                } else {
                    let value = true_objective(s, ctx.mode, &cand, ctx.slots);
                    if value > objective {
                        current = cand;
                        objective = value;
                        row.accepted = true;
                        row.objective = value;
                        row.status = "accepted".into();
                    } else {
                        row.status = "rejected:no_increase".into();
                    }
                }
            }
            (SolveStatus::Infeasible, _) => {
                row.status = format!(
                    "subproblem_infeasible:{}",
                    res.infeasible_class.unwrap_or(ConstraintClass::Other)
                );
            }
            _ => row.status = "subproblem_failed".into(),
        }
        if !row.accepted {
            radius *= 0.5;
        }
        rows.push(row);
    }
    (current, rows)
}

/// Per-slot covariances for `mode` at every point of `traj`.
fn slot_beamforming(
    s: &Scenario,
    mode: DynamicMode,
    traj: &Trajectory,
    warm: Option<&[SlotBeamforming]>,
    iso_split: f64,
) -> Result<(Vec<SlotBeamforming>, Vec<ExtractionMethod>, usize)> {
    let model = los_model(s);
    let params = ScaParams::from_scenario(s);
    let idx: Vec<usize> = (1..=traj.slots()).collect();
    let results = crate::par_map(&idx, |_, &n| -> Result<(SlotBeamforming, ExtractionMethod, usize)> {
        let p = traj.point(n);
        let task = BeamformingTask::isac(s, &p, user_channels(s, &model, &p, n as u32), s.flight.h_max);
        match mode {
            DynamicMode::Isac | DynamicMode::CommOnly => {
                let task = if mode == DynamicMode::CommOnly { task.comm_only() } else { task };
                let init = warm.map(|w| w[n - 1].clone());
                let (bf, trace) = solve_beamforming(&task, init, &params)?;
                let (bf, method) = extract_rank_one(&task, &bf);
                Ok((bf, method, trace.iterations()))
            }
            DynamicMode::SarOnly => {
                let (r, _) = max_min_beampattern(&task, &params)?;
                let bf = SlotBeamforming {
                    w: vec![HermitianMatrix::zeros(s.antennas); s.k()],
                    vectors: None,
                    r,
                };
                Ok((bf, ExtractionMethod::AlreadyRankOne, 0))
            }
            DynamicMode::Isotropic => {
                let bf = isotropic_slot(s, iso_split);
                let (worst, class) = task.violation(&bf);
                if worst > STEP_BP_TOL {
                    let c = class.unwrap_or(ConstraintClass::Other);
                    return Err(Error::infeasible(c, format!("isotropic transmission violates {c} in slot {n}")));
                }
                Ok((bf, ExtractionMethod::AlreadyRankOne, 0))
            }
        }
    });
    let mut slots = Vec::with_capacity(results.len());
    let mut methods = Vec::with_capacity(results.len());
    let mut iters = 0;
    for r in results {
        let (b, m, i) = r?;
        slots.push(b);
        methods.push(m);
        iters = iters.max(i);
    }
    Ok((slots, methods, iters))
}

/// Isotropic covariances: `W_k = (P_max - P_t)/(K M) I`, `R = P_t / M I`.
pub fn isotropic_slot(s: &Scenario, p_t: f64) -> SlotBeamforming {
    let m = s.antennas as f64;
    let k = s.k().max(1) as f64;
    let p_c = (s.power_max - p_t).max(0.0);
    SlotBeamforming {
        w: vec![HermitianMatrix::scaled_identity(s.antennas, p_c / (k * m)); s.k()],
        vectors: None,
        r: HermitianMatrix::scaled_identity(s.antennas, p_t / m),
    }
}

/// Best sensing share for isotropic transmission along `traj`, by
/// golden-section search over `P_t in [0, P_max]` plus the endpoints.
pub fn isotropic_split(s: &Scenario, traj: &Trajectory) -> f64 {
    let eval = |p_t: f64| {
        let slots = vec![isotropic_slot(s, p_t); traj.slots()];
        true_objective(s, DynamicMode::Isotropic, traj, &slots)
    };
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, s.power_max);
    let mut a = hi - golden * (hi - lo);
    let mut b = lo + golden * (hi - lo);
    let (mut fa, mut fb) = (eval(a), eval(b));
    for _ in 0..60 {
        if fa >= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - golden * (hi - lo);
            fa = eval(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + golden * (hi - lo);
            fb = eval(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    [0.0, mid, s.power_max]
        .into_iter()
        .map(|p| (p, eval(p)))
        .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
        .0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRow {
    pub iteration: usize,
    pub objective: f64,
    /// Most SCA iterations used by any slot in this round.
    pub sca_iterations: usize,
    pub trust_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicDesign {
    pub mode: DynamicMode,
    pub trajectory: Trajectory,
    pub solution: BeamformingSolution,
    /// Average weighted sum-rate, bps/Hz (normalized beampattern for `SarOnly`).
    pub objective: f64,
    pub outer_trace: Vec<OuterRow>,
    pub inner_trace: Vec<TrustRow>,
    pub energy: EnergyLedger,
    pub extraction: Vec<ExtractionMethod>,
    /// Sensing power of the isotropic design.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub isotropic_sensing_power: Option<f64>,
}

impl DynamicDesign {
    pub fn outer_iterations(&self) -> usize {
        self.outer_trace.len().saturating_sub(1)
    }

    pub fn outer_csv(&self) -> String {
        let mut s = String::from("iteration,objective,sca_iterations,trust_steps\n");
        for r in &self.outer_trace {
            s.push_str(&format!("{},{},{},{}\n", r.iteration, r.objective, r.sca_iterations, r.trust_steps));
        }
        s
    }

    pub fn inner_csv(&self) -> String {
        let mut s = String::from("outer,step,radius,accepted,objective,status\n");
        for r in &self.inner_trace {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.outer, r.step, r.radius, r.accepted, r.objective, r.status
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicOptions {
    pub mode: DynamicMode,
    /// Starting trajectory; a circle around [`initial_center`] when absent.
    pub init: Option<Trajectory>,
    /// When false the trajectory stays fixed and only beamforming runs.
    pub optimize_trajectory: bool,
}

impl Default for DynamicOptions {
    fn default() -> Self {
        Self {
            mode: DynamicMode::Isac,
            init: None,
            optimize_trajectory: true,
        }
    }
}

/// Alternate per-slot beamforming and trust-region trajectory
/// steps until the fractional objective increase falls below the outer
/// threshold.
pub fn solve_dynamic(s: &Scenario) -> Result<DynamicDesign> {
    solve_dynamic_with(s, &DynamicOptions::default())
}

pub fn solve_dynamic_with(s: &Scenario, opts: &DynamicOptions) -> Result<DynamicDesign> {
    let mode = opts.mode;
    let mut traj = match &opts.init {
        Some(t) => t.clone(),
        None => circular_init_at(s, initial_center(s, mode)?),
    };
    if traj.slots() != s.slots {
        return Err(Error::InvalidInput(format!(
            "trajectory has {} slots, scenario has {}",
            traj.slots(),
            s.slots
        )));
    }
    if let Some((c, why)) = traj.violations(s).into_iter().next() {
        return Err(Error::infeasible(c, format!("initial trajectory: {why}")));
    }
    let trust = TrustParams::from_scenario(s);
    let mut split = if mode == DynamicMode::Isotropic { isotropic_split(s, &traj) } else { 0.0 };
    let (mut slots, mut methods, iters) = slot_beamforming(s, mode, &traj, None, split)?;
    let mut objective = true_objective(s, mode, &traj, &slots);
    let mut outer_trace = vec![OuterRow {
        iteration: 0,
        objective,
        sca_iterations: iters,
        trust_steps: 0,
    }];
    let mut inner = Vec::new();

    if opts.optimize_trajectory {
        for it in 1..=s.algorithm.outer_max_iter {
            let ctx = TrajContext::new(s, mode, &slots);
            let (next_traj, rows) = solve_trajectory(&ctx, &traj, &trust, it);
            let steps = rows.len();
            inner.extend(rows);
            let next_split = if mode == DynamicMode::Isotropic { isotropic_split(s, &next_traj) } else { 0.0 };
            let (next_slots, next_methods, iters) = slot_beamforming(s, mode, &next_traj, Some(&slots), next_split)?;
            let next_obj = true_objective(s, mode, &next_traj, &next_slots);
            if next_obj < objective - 1e-9 * objective.abs().max(1e-12) {
                // Extraction slack can cost a hair; keep the incumbent.
                break;
            }
            let prev = objective;
            traj = next_traj;
            slots = next_slots;
            methods = next_methods;
            split = next_split;
            objective = next_obj;
            outer_trace.push(OuterRow {
                iteration: it,
                objective,
                sca_iterations: iters,
                trust_steps: steps,
            });
            if (objective - prev) / prev.abs().max(1e-300) < s.algorithm.outer_epsilon {
                break;
            }
        }
    }

    let power: Vec<f64> = slots.iter().map(|b| b.power()).collect();
    let energy = energy_ledger(&traj.positions(), &power, s)?;
    if !energy.feasible {
        return Err(Error::infeasible(
            ConstraintClass::Energy,
            format!(
                "flight needs {:.4e} J but only {:.4e} J are available",
                energy.cumulative,
                energy.budget.unwrap_or(f64::INFINITY)
            ),
        ));
    }
    Ok(DynamicDesign {
        mode,
        trajectory: traj,
        solution: BeamformingSolution::new(slots),
        objective,
        outer_trace,
        inner_trace: inner,
        energy,
        extraction: methods,
        isotropic_sensing_power: (mode == DynamicMode::Isotropic).then_some(split),
    })
}

#[cfg(test)]
mod tests;
