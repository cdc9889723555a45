//! Fixed-placement beamforming by successive convex approximation over a
//! semidefinite relaxation.
//!
//! Each user's rate `log2(noise + sum_p g^H W_p g + g^H R g) - log2(noise +
//! sum_{p != k} g^H W_p g + g^H R g)` is a difference of concave functions.
//! The second log is replaced by its tangent plane at the current iterate,
//! giving a concave lower bound that touches the rate at the iterate; the
//! resulting program is solved with the rank constraints dropped, and the
//! procedure repeats until the fractional objective increase falls below
//! `epsilon`. Rank-one beamformers are recovered afterwards.


use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::comm::{received_powers, slot_weighted_rate, SlotBeamforming};
use crate::conic::{Affine, ConicProgram, Lowering, PsdVar, RealVar, SolveStatus, SolverOptions};
use crate::error::{ConstraintClass, Error, Result};
use crate::geometry::{distance, steering_vector, ChannelVector, Placement3D};
use crate::hermitian::{CMatrix, CVector, HermitianMatrix};
use crate::radar::{scenario_sar_constant, snr_power_floor};
use crate::scenario::Scenario;

const LOG2_E: f64 = std::f64::consts::LOG2_E;

/// One sensing direction: steering vector toward a target and `d^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingTarget {
    pub steering: CVector,
    pub dist_sq: f64,
}

impl SensingTarget {
    pub fn toward(p: &Placement3D, t: &crate::scenario::GroundPoint, m: usize) -> Self {
        let d = distance(p, t);
        Self {
            steering: steering_vector(p, t, m),
            dist_sq: d * d,
        }
    }

    pub fn gain(&self, h: &HermitianMatrix) -> f64 {
        h.quad_form(&self.steering)
    }
}

/// Everything a single beamforming problem needs, independent of how the
/// placement was chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingTask {
    pub antennas: usize,
    pub channels: Vec<ChannelVector>,
    pub noise: Vec<f64>,
    pub weights: Vec<f64>,
    pub targets: Vec<SensingTarget>,
    /// Beampattern threshold `Gamma`; constraint is `a^H H a >= Gamma d^2`.
    pub gamma: f64,
    /// Minimum total transmit power implied by the SAR SNR floor.
    pub power_floor: f64,
    pub power_max: f64,
    /// Whether a dedicated sensing covariance is optimized. Without it the
    /// task is communication-only: no sensing constraints at all.
    pub sensing: bool,
}

impl BeamformingTask {
    /// ISAC task at placement `p`. `snr_altitude` is the altitude used in
    /// the SNR floor (the placement altitude for the static design, the
    /// altitude ceiling for the dynamic one).
    pub fn isac(s: &Scenario, p: &Placement3D, channels: Vec<ChannelVector>, snr_altitude: f64) -> Self {
        let floor = snr_power_floor(s.snr_min, snr_altitude, s.flight.v_max(), scenario_sar_constant(s));
        Self {
            antennas: s.antennas,
            channels,
            noise: s.noise_power.clone(),
            weights: s.weights.clone(),
            targets: s.targets.iter().map(|t| SensingTarget::toward(p, t, s.antennas)).collect(),
            gamma: s.bp_threshold,
            power_floor: floor,
            power_max: s.power_max,
            sensing: true,
        }
    }

    /// Communication-only variant of `self`.
    pub fn comm_only(mut self) -> Self {
        self.sensing = false;
        self.gamma = 0.0;
        self.power_floor = 0.0;
        self
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    pub fn objective(&self, bf: &SlotBeamforming) -> f64 {
        slot_weighted_rate(&self.channels, bf, &self.weights, &self.noise)
    }

    /// Worst relative violation of the task's constraints (0 when feasible).
    pub fn violation(&self, bf: &SlotBeamforming) -> (f64, Option<ConstraintClass>) {
        let mut worst = (0.0, None);
        let mut note = |v: f64, c: ConstraintClass| {
            if v > worst.0 {
                worst = (v, Some(c));
            }
        };
        let p = bf.power();
        note((p - self.power_max) / self.power_max, ConstraintClass::Power);
        if self.sensing {
            if self.power_floor > 0.0 {
                note((self.power_floor - p) / self.power_floor, ConstraintClass::SarSnr);
            }
            let h = bf.total();
            for t in &self.targets {
                let rhs = self.gamma * t.dist_sq;
                if rhs > 0.0 {
                    note((rhs - t.gain(&h)) / rhs, ConstraintClass::Beampattern);
                }
            }
        }
        let neg = bf
            .w
            .iter()
            .chain(std::iter::once(&bf.r))
            .map(|m| -m.min_eigenvalue() / m.trace().abs().max(f64::MIN_POSITIVE))
            .fold(0.0f64, f64::max);
        note(neg, ConstraintClass::Other);
        worst
    }

    pub fn is_feasible(&self, bf: &SlotBeamforming, rel_tol: f64) -> bool {
        self.violation(bf).0 <= rel_tol
    }
}

/// Tangent data of the SCA surrogate at `(W^(o), R^(o))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePoint {
    pub w0: Vec<HermitianMatrix>,
    pub r0: HermitianMatrix,
    /// `a_k = log2(interference + noise)` at the expansion point.
    pub a_bar: Vec<f64>,
    /// `B_k = log2(e) g g^H / (interference + noise)`.
    pub b_bar: Vec<HermitianMatrix>,
}

pub fn build_surrogate(channels: &[ChannelVector], noise: &[f64], point: &SlotBeamforming) -> SurrogatePoint {
    let mut a_bar = Vec::with_capacity(channels.len());
    let mut b_bar = Vec::with_capacity(channels.len());
    for k in 0..channels.len() {
        let (_, interference) = received_powers(k, channels, point);
        let denom = interference + noise[k];
        a_bar.push(denom.log2());
        b_bar.push(HermitianMatrix::outer(&channels[k].gains, LOG2_E / denom));
    }
    SurrogatePoint {
        w0: point.w.clone(),
        r0: point.r.clone(),
        a_bar,
        b_bar,
    }
}

impl SurrogatePoint {
    /// Surrogate rate of user `k` at `bf`.
    pub fn rate(&self, k: usize, channels: &[ChannelVector], noise: &[f64], bf: &SlotBeamforming) -> f64 {
        let g = &channels[k].gains;
        let total = bf.total().quad_form(g) + noise[k];
        let mut lin = self.a_bar[k] + self.b_bar[k].inner(&bf.r.sub(&self.r0));
        for (p, w) in bf.w.iter().enumerate() {
            if p != k {
                lin += self.b_bar[k].inner(&w.sub(&self.w0[p]));
            }
        }
        total.log2() - lin
    }
}

/// Program variables of an SDR instance.
#[derive(Debug, Clone)]
pub struct SdrVars {
    pub w: Vec<PsdVar>,
    pub r: Option<PsdVar>,
}

/// The relaxed convex subproblem around `surrogate`.
///
/// Channels are divided by the noise amplitude inside the program so that
/// every log argument reads `1 + ...`; this only shifts each log by a
/// constant.
pub fn build_sdr(task: &BeamformingTask, surrogate: &SurrogatePoint) -> (ConicProgram, SdrVars) {
    let m = task.antennas;
    let k = task.k();
    let mut prog = ConicProgram::new();
    let w: Vec<PsdVar> = (0..k).map(|_| prog.add_psd(m)).collect();
    let r = task.sensing.then(|| prog.add_psd(m));
    let id = HermitianMatrix::scaled_identity(m, 1.0);

    let total_of = |c: &HermitianMatrix, scale: f64| -> Affine {
        let mut e = Affine::default();
        for &wv in &w {
            e = e.with_trace(wv, c, scale);
        }
        if let Some(rv) = r {
            e = e.with_trace(rv, c, scale);
        }
        e
    };

    for u in 0..k {
        let sigma2 = task.noise[u];
        let gg = HermitianMatrix::outer(&task.channels[u].gains, 1.0 / sigma2);
        let beta = task.weights[u];
        prog.add_log(beta, total_of(&gg, 1.0).with_constant(1.0));
        // Linearized interference log, sign flipped into the objective.
        let b = &surrogate.b_bar[u];
        let mut lin = Affine::constant(-beta * surrogate.a_bar[u]);
        for (p, &wv) in w.iter().enumerate() {
            if p != u {
                lin = lin.with_trace(wv, b, -beta).with_constant(beta * b.inner(&surrogate.w0[p]));
            }
        }
        if let Some(rv) = r {
            lin = lin.with_trace(rv, b, -beta).with_constant(beta * b.inner(&surrogate.r0));
        }
        // log2(1 + x/sigma2) = log2(sigma2 + x) - log2(sigma2).
        lin = lin.with_constant(beta * sigma2.log2());
        prog.add_linear(&lin);
    }

    if task.sensing {
        for t in &task.targets {
            let aa = HermitianMatrix::outer(&t.steering, 1.0);
            prog.add_ge(
                total_of(&aa, 1.0).with_constant(-task.gamma * t.dist_sq),
                ConstraintClass::Beampattern,
            );
        }
        prog.add_ge(total_of(&id, 1.0).with_constant(-task.power_floor), ConstraintClass::SarSnr);
    }
    prog.add_ge(total_of(&id, -1.0).with_constant(task.power_max), ConstraintClass::Power);
    (prog, SdrVars { w, r })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub status: String,
    /// Wall time of the iteration in seconds; not serialized.
    #[serde(skip, default)]
    pub time: f64,
}

/// Per-iteration objective values of an SCA run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// Number of SCA iterations (row 0 is the initial point).
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].objective >= w[0].objective - slack)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,objective,status\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.iteration, r.objective, r.status));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaParams {
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub lowering: Lowering,
    pub init_comm_share: f64,
}

impl ScaParams {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            epsilon: s.algorithm.sca_epsilon,
            max_iter: s.algorithm.sca_max_iter,
            tol: s.algorithm.solver_tol,
            lowering: Lowering::default(),
            init_comm_share: s.algorithm.init_comm_share,
        }
    }

    fn solver(&self, initial: Option<crate::conic::Assignment>) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            lowering: self.lowering,
            initial,
            ..SolverOptions::default()
        }
    }
}

/// `W_k = (rho P/(K M)) g g^H / |g|^2`, `R = ((1 - rho) P / M) I`.
pub fn default_init(task: &BeamformingTask, comm_share: f64) -> SlotBeamforming {
    let m = task.antennas;
    let k = task.k().max(1) as f64;
    let p = task.power_max;
    let share = if task.sensing { comm_share } else { 1.0 };
    let w = task
        .channels
        .iter()
        .map(|g| {
            let n2 = g.norm_squared();
            if n2 > 0.0 {
                HermitianMatrix::outer(&g.gains, share * p / (k * m as f64) / n2)
            } else {
                HermitianMatrix::scaled_identity(m, share * p / (k * m as f64 * m as f64))
            }
        })
        .collect();
    let r = if task.sensing {
        HermitianMatrix::scaled_identity(m, (1.0 - share) * p / m as f64)
    } else {
        HermitianMatrix::zeros(m)
    };
    SlotBeamforming { w, vectors: None, r }
}

/// Max-min normalized beampattern `max min_q a_q^H R a_q / d_q^2` under the
/// power cap and the power floor. Returns the covariance and the achieved
/// minimum.
pub fn max_min_beampattern(task: &BeamformingTask, params: &ScaParams) -> Result<(HermitianMatrix, f64)> {
    if task.power_floor > task.power_max * (1.0 + 1e-12) {
        return Err(Error::infeasible(
            ConstraintClass::SarSnr,
            format!(
                "SNR floor needs {:.4e} W but the power cap is {:.4e} W",
                task.power_floor, task.power_max
            ),
        ));
    }
    let m = task.antennas;
    let d_ref = task.targets.iter().map(|t| t.dist_sq).fold(f64::INFINITY, f64::min);
    let mut prog = ConicProgram::new();
    let r = prog.add_psd(m);
    let tau: RealVar = prog.add_real();
    let id = HermitianMatrix::scaled_identity(m, 1.0);
    for t in &task.targets {
        let aa = HermitianMatrix::outer(&t.steering, d_ref / t.dist_sq);
        prog.add_ge(Affine::trace(r, &aa).with_real(tau, -1.0), ConstraintClass::Epigraph);
    }
    // tau is bounded below by the value at R = 0.
    prog.add_ge(Affine::var(tau, 1.0).with_constant(task.power_max), ConstraintClass::Other);
    prog.add_ge(Affine::trace(r, &id).with_constant(-task.power_floor), ConstraintClass::SarSnr);
    prog.add_ge(Affine::trace(r, &id).scaled(-1.0).with_constant(task.power_max), ConstraintClass::Power);
    prog.add_linear(&Affine::var(tau, 1.0));
    let res = prog.solve(&params.solver(None));
    match res.status {
        s if s.has_solution() => {
            let a = res.assignment.expect("solution present");
            let r = a.psd[0].clone();
            let min = task
                .targets
                .iter()
                .map(|t| t.gain(&r) / t.dist_sq)
                .fold(f64::INFINITY, f64::min);
            Ok((r, min))
        }
        SolveStatus::Infeasible => Err(Error::infeasible(
            res.infeasible_class.unwrap_or(ConstraintClass::Other),
            res.message,
        )),
        _ => Err(Error::Solver(format!("max-min beampattern solve failed: {}", res.message))),
    }
}

/// Makes `init` feasible for the sensing constraints by blending it with
/// the max-min beampattern covariance, using the smallest blend weight
/// that satisfies every target.
pub fn repair_init(task: &BeamformingTask, init: SlotBeamforming, params: &ScaParams) -> Result<SlotBeamforming> {
    if !task.sensing || task.is_feasible(&init, 1e-9) {
        return Ok(init);
    }
    let (h_star, min_gain) = max_min_beampattern(task, params)?;
    if min_gain < task.gamma * (1.0 - 1e-7) {
        return Err(Error::infeasible(
            ConstraintClass::Beampattern,
            format!(
                "best achievable normalized beampattern {:.4e} W is below the threshold {:.4e} W",
                min_gain, task.gamma
            ),
        ));
    }
    let h0 = init.total();
    let mut lambda = 0.0f64;
    let mut check = |v0: f64, v1: f64| {
        if v0 < 0.0 {
            lambda = lambda.max(if v1 > v0 { v0 / (v0 - v1) } else { 1.0 });
        }
    };
    for t in &task.targets {
        let rhs = task.gamma * t.dist_sq;
        check(t.gain(&h0) - rhs, t.gain(&h_star) - rhs);
    }
    check(h0.trace() - task.power_floor, h_star.trace() - task.power_floor);
    let lambda = (lambda * (1.0 + 1e-9) + 1e-12).min(1.0);
    let keep = 1.0 - lambda;
    Ok(SlotBeamforming {
        w: init.w.iter().map(|w| w.scale(keep)).collect(),
        vectors: None,
        r: init.r.scale(keep).add(&h_star.scale(lambda)),
    })
}

/// SCA beamforming loop at a fixed placement.
pub fn solve_beamforming(
    task: &BeamformingTask,
    init: Option<SlotBeamforming>,
    params: &ScaParams,
) -> Result<(SlotBeamforming, ConvergenceTrace)> {
    if task.sensing && task.power_floor > task.power_max * (1.0 + 1e-12) {
        return Err(Error::infeasible(
            ConstraintClass::SarSnr,
            format!(
                "SNR floor needs {:.4e} W but the power cap is {:.4e} W",
                task.power_floor, task.power_max
            ),
        ));
    }
    let start = crate::Stopwatch::start();
    let init = init.unwrap_or_else(|| default_init(task, params.init_comm_share));
    let mut current = repair_init(task, init, params)?;
    let mut objective = task.objective(&current);
    let mut trace = ConvergenceTrace::default();
    trace.rows.push(TraceRow {
        iteration: 0,
        objective,
        status: "init".into(),
        time: start.secs(),
    });

    for it in 1..=params.max_iter {
        let t0 = crate::Stopwatch::start();
        let sur = build_surrogate(&task.channels, &task.noise, &current);
        let (prog, vars) = build_sdr(task, &sur);
        let warm = to_assignment(&current, &vars);
        let res = prog.solve(&params.solver(Some(warm)));
        let status = match res.status {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Inaccurate => "inaccurate",
            SolveStatus::Infeasible => {
                return Err(Error::infeasible(
                    res.infeasible_class.unwrap_or(ConstraintClass::Other),
                    res.message,
                ))
            }
            SolveStatus::Failed => return Err(Error::Solver(res.message)),
        };
        let a = res.assignment.expect("solution present");
        let next = SlotBeamforming {
            w: vars.w.iter().map(|v| a.psd[v.0].clone()).collect(),
            vectors: None,
            r: vars
                .r
                .map(|v| a.psd[v.0].clone())
                .unwrap_or_else(|| HermitianMatrix::zeros(task.antennas)),
        };
        let next_obj = task.objective(&next);
        if next_obj < objective - 1e-9 * objective.abs().max(1.0) {
            // Solver slack made things worse; keep the incumbent.
            trace.rows.push(TraceRow {
                iteration: it,
                objective,
                status: format!("{status}-rejected"),
                time: t0.secs(),
            });
            break;
        }
        let gain = next_obj - objective;
        let tie = gain.abs() <= 1e-12 * objective.abs().max(1.0);
        if !tie || next.power() < current.power() {
            current = next;
        }
        let prev = objective;
        objective = objective.max(next_obj);
        trace.rows.push(TraceRow {
            iteration: it,
            objective,
            status: status.into(),
            time: t0.secs(),
        });
        let frac = (objective - prev) / prev.abs().max(1e-12);
        if frac < params.epsilon {
            break;
        }
    }
    Ok((current, trace))
}

fn to_assignment(bf: &SlotBeamforming, vars: &SdrVars) -> crate::conic::Assignment {
    let mut psd = bf.w.clone();
    if vars.r.is_some() {
        psd.push(bf.r.clone());
    }
    crate::conic::Assignment { real: Vec::new(), psd }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    /// Input covariances were already rank one.
    AlreadyRankOne,
    /// `w_k = W_k g_k / sqrt(g_k^H W_k g_k)` with the remainder moved into `R`.
    Reconstruction,
    /// Gaussian randomization fallback.
    Randomization,
    /// No feasible rank-one point found; covariances kept.
    Failed,
}

/// Number of Gaussian draws in the randomization fallback.
pub const RANDOMIZATION_DRAWS: usize = 200;

/// Recovers rank-one beamformers from a relaxed solution.
pub fn extract_rank_one(task: &BeamformingTask, bf: &SlotBeamforming) -> (SlotBeamforming, ExtractionMethod) {
    let m = task.antennas;
    let total = bf.total();
    let mut vectors = Vec::with_capacity(bf.w.len());
    let mut all_rank_one = true;
    for (k, w) in bf.w.iter().enumerate() {
        let g = &task.channels[k].gains;
        let q = w.quad_form(g);
        all_rank_one &= w.rank(1e-7) <= 1;
        if q > 0.0 {
            let wg = w.as_matrix() * g;
            vectors.push(wg / Complex64::new(q.sqrt(), 0.0));
        } else {
            vectors.push(CVector::zeros(m));
        }
    }
    let mut sum = CMatrix::zeros(m, m);
    for v in &vectors {
        sum += v * v.adjoint();
    }
    let r_new = HermitianMatrix::from_matrix(total.as_matrix() - &sum);
    let candidate = SlotBeamforming {
        w: vectors.iter().map(|v| HermitianMatrix::outer(v, 1.0)).collect(),
        vectors: Some(vectors),
        r: if task.sensing { r_new } else { HermitianMatrix::zeros(m) },
    };
    let ok = candidate.r.is_psd() && (task.sensing || candidate.r.trace().abs() <= 1e-9 * total.trace().max(1e-300));
    if ok || (!task.sensing && all_rank_one) {
        let method = if all_rank_one {
            ExtractionMethod::AlreadyRankOne
        } else {
            ExtractionMethod::Reconstruction
        };
        let mut c = candidate;
        if !task.sensing {
            c.r = HermitianMatrix::zeros(m);
        }
        return (c, method);
    }
    randomize(task, bf)
}

fn randomize(task: &BeamformingTask, bf: &SlotBeamforming) -> (SlotBeamforming, ExtractionMethod) {
    let m = task.antennas;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let factors: Vec<CMatrix> = bf.w.iter().map(sqrt_psd).collect();
    let mut best: Option<(f64, SlotBeamforming)> = None;
    for _ in 0..RANDOMIZATION_DRAWS {
        let vectors: Vec<CVector> = factors
            .iter()
            .zip(&bf.w)
            .map(|(f, w)| {
                let xi = CVector::from_fn(m, |_, _| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
                });
                let v = f * xi;
                let n2 = v.norm_squared();
                if n2 > 0.0 {
                    v * Complex64::new((w.trace() / n2).sqrt(), 0.0)
                } else {
                    v
                }
            })
            .collect();
        let mut cand = SlotBeamforming {
            w: vectors.iter().map(|v| HermitianMatrix::outer(v, 1.0)).collect(),
            vectors: Some(vectors),
            r: bf.r.clone(),
        };
        let p = cand.power();
        if p > task.power_max {
            let s = task.power_max / p;
            cand.w = cand.w.iter().map(|w| w.scale(s)).collect();
            cand.r = cand.r.scale(s);
            cand.vectors = cand
                .vectors
                .map(|vs| vs.into_iter().map(|v| v * Complex64::new(s.sqrt(), 0.0)).collect());
        }
        if !task.is_feasible(&cand, 1e-6) {
            continue;
        }
        let obj = task.objective(&cand);
        if best.as_ref().is_none_or(|(b, _)| obj > *b) {
            best = Some((obj, cand));
        }
    }
    match best {
        Some((_, c)) => (c, ExtractionMethod::Randomization),
        None => (bf.clone(), ExtractionMethod::Failed),
    }
}

/// Hermitian square root of a PSD matrix (negative eigenvalues clipped).
fn sqrt_psd(w: &HermitianMatrix) -> CMatrix {
    let eig = nalgebra::SymmetricEigen::new(w.as_matrix().clone());
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(l.max(0.0).sqrt(), 0.0)));
    &eig.eigenvectors * d * eig.eigenvectors.adjoint()
}
