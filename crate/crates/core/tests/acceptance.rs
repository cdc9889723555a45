//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use haps_isac::aero::{air_density, scf_power, slot_energy_bound};
use haps_isac::audit::audit;
use haps_isac::baselines::{circle_flight_design, solve_baseline, BaselineKind, Design};
use haps_isac::beamforming::{max_min_beampattern, solve_beamforming, BeamformingTask, ScaParams};
use haps_isac::geometry::{user_channels, ChannelModel, Placement3D};
use haps_isac::hermitian::{CVector, HermitianMatrix};
use haps_isac::placement::{scenario_grid, solve_static, StaticDesign};
use haps_isac::scenario::{AeroParams, GroundPoint, Scenario};
use haps_isac::sweep::{sweep, SweepDesign, SweepOptions, SweepParam};
use haps_isac::trajectory::taylor::beampattern_value;
use haps_isac::trajectory::{
    beampattern_taylor, exact_rate_hat, rate_taylor, solve_dynamic, solve_dynamic_with, DynamicDesign, DynamicMode,
    DynamicOptions, PairTerms, SlotTerms,
};
use haps_isac::units::dbm_to_watts;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Designs produced along the way, re-verified by criterion 9.
#[derive(Default)]
struct Collected {
    designs: Vec<(String, Scenario, Design)>,
}

impl Collected {
    fn add(&mut self, label: impl Into<String>, s: &Scenario, d: Design) {
        self.designs.push((label.into(), s.clone(), d));
    }
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

fn random_psd(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> HermitianMatrix {
    let mut acc = HermitianMatrix::zeros(m);
    for _ in 0..2 {
        let v = CVector::from_fn(m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        acc = acc.add(&HermitianMatrix::outer(&v, scale));
    }
    acc
}

fn ground(rng: &mut ChaCha8Rng, x: std::ops::Range<f64>) -> GroundPoint {
    GroundPoint::new(rng.random_range(x), rng.random_range(-8_000.0..8_000.0))
}

/// Desk-scale scenario with users drawn west and targets east of the origin.
fn random_desk(rng: &mut ChaCha8Rng) -> Scenario {
    let mut s = Scenario::desk();
    s.users = (0..2).map(|_| ground(rng, -20_000.0..0.0)).collect();
    s.targets = (0..2).map(|_| ground(rng, 5_000.0..20_000.0)).collect();
    s.rng_seed = rng.random();
    s
}

fn centroid(pts: &[GroundPoint]) -> [f64; 2] {
    let n = pts.len() as f64;
    [pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n]
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

fn shifted(p: &Placement3D, axis: usize, h: f64) -> Placement3D {
    let mut q = *p;
    match axis {
        0 => q.h[0] += h,
        1 => q.h[1] += h,
        _ => q.z += h,
    }
    q
}

fn vec_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

fn c1_gradients() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (noise, ref_gain, step) = (1e-7, 1e3, 1e-2);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let w: Vec<HermitianMatrix> = (0..2).map(|_| random_psd(&mut rng, 4, 1.0)).collect();
        let r = random_psd(&mut rng, 4, 0.5);
        let terms = SlotTerms::new(&w, &r);
        let p = Placement3D::new(
            rng.random_range(-20_000.0..20_000.0),
            rng.random_range(-20_000.0..20_000.0),
            rng.random_range(20_500.0..29_500.0),
        );
        let u = ground(&mut rng, -20_000.0..20_000.0);
        let t = ground(&mut rng, -20_000.0..20_000.0);
        let k = case % 2;

        let model = rate_taylor(&p, &terms, k, &u, noise, ref_gain);
        let rate = |q: &Placement3D| exact_rate_hat(q, &terms, k, &u, noise, ref_gain);
        let fd: Vec<f64> = (0..3)
            .map(|a| (rate(&shifted(&p, a, step)) - rate(&shifted(&p, a, -step))) / (2.0 * step))
            .collect();
        worst = worst.max(vec_rel_err(&[model.v[0], model.v[1], model.b], &fd));

        let h = PairTerms::new(&w[0].add(&w[1]).add(&r));
        let bp = beampattern_taylor(&p, &h, &t);
        let lhs = |q: &Placement3D| beampattern_value(q, &h, &t);
        let fd: Vec<f64> = (0..3)
            .map(|a| (lhs(&shifted(&p, a, step)) - lhs(&shifted(&p, a, -step))) / (2.0 * step))
            .collect();
        worst = worst.max(vec_rel_err(&[bp.nu[0], bp.nu[1], bp.zeta], &fd));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-4, || format!("worst relative error {worst:.3e}"))?;
    ensure(secs <= 30.0, || format!("took {secs:.1} s"))?;
    Ok(format!("worst rel err {worst:.2e} over 100 instances in {secs:.2} s"))
}

fn c2_sca(nominal: &StaticDesign) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut most = 0;
    for case in 0..20 {
        let s = random_desk(&mut rng);
        let grid = scenario_grid(&s);
        let p = grid[rng.random_range(0..grid.len())];
        let task = BeamformingTask::isac(&s, &p, user_channels(&s, &ChannelModel::from_scenario(&s), &p, 0), p.z);
        let (_, trace) = solve_beamforming(&task, None, &ScaParams::from_scenario(&s))
            .map_err(|e| format!("instance {case}: {e}"))?;
        ensure(trace.is_monotone(1e-6), || format!("instance {case}: trace {:?}", trace.objectives()))?;
        ensure(trace.iterations() <= 50, || format!("instance {case}: {} iterations", trace.iterations()))?;
        most = most.max(trace.iterations());
    }
    let nominal_iters = nominal.trace.iterations();
    ensure(nominal.trace.is_monotone(1e-6), || "nominal trace not monotone".into())?;
    ensure(nominal_iters <= 10, || format!("nominal instance took {nominal_iters} iterations"))?;
    Ok(format!("20 instances monotone, max {most} iterations; nominal {nominal_iters}"))
}

fn c3_single_user() -> Check {
    let mut s = Scenario::desk();
    s.users.truncate(1);
    s.weights.truncate(1);
    s.noise_power.truncate(1);
    s.bp_threshold = 0.0;
    s.snr_min = 0.0;
    let model = ChannelModel::from_scenario(&s);
    let mut worst = 0.0f64;
    for p in [
        Placement3D::new(0.0, 0.0, 20_000.0),
        Placement3D::new(-6_000.0, 3_000.0, 24_000.0),
        Placement3D::new(12_000.0, -7_000.0, 30_000.0),
    ] {
        let ch = user_channels(&s, &model, &p, 0);
        let g2 = ch[0].norm_squared();
        let task = BeamformingTask::isac(&s, &p, ch, p.z);
        let (bf, _) = solve_beamforming(&task, None, &ScaParams::from_scenario(&s)).map_err(|e| e.to_string())?;
        let oracle = (1.0 + s.power_max * g2 / s.noise_power[0]).log2();
        worst = worst.max(rel(task.objective(&bf), oracle));
    }
    ensure(worst <= 5e-3, || format!("worst gap {:.3}%", 100.0 * worst))?;
    Ok(format!("worst gap {:.4}% of the matched-filter rate", 100.0 * worst))
}

/// Unit vectors of C^2 up to a global phase, on a 0.01 rad grid.
fn directions() -> Vec<CVector> {
    let step = 1e-2;
    let nt = (std::f64::consts::FRAC_PI_2 / step).ceil() as usize;
    let np = (std::f64::consts::TAU / step).ceil() as usize;
    let mut v = Vec::with_capacity((nt + 1) * np);
    for i in 0..=nt {
        let th = (i as f64 * step).min(std::f64::consts::FRAC_PI_2);
        for j in 0..np {
            v.push(CVector::from_vec(vec![
                Complex64::new(th.cos(), 0.0),
                Complex64::from_polar(th.sin(), j as f64 * step),
            ]));
        }
    }
    v
}

/// Best rate over rank-one `W = p u u^H`, `R = (P - p) v v^H` meeting the
/// beampattern threshold with full power.
fn exhaustive_m2(task: &BeamformingTask) -> f64 {
    let g = &task.channels[0].gains;
    let a = &task.targets[0].steering;
    let proj = |u: &CVector, x: &CVector| (u.adjoint() * x)[(0, 0)].norm_sqr();
    let pairs: Vec<(f64, f64)> = directions().iter().map(|u| (proj(u, a), proj(u, g))).collect();
    // Sensing directions: only those not dominated in (more target gain,
    // less user leakage) can be optimal.
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&i, &j| pairs[j].0.total_cmp(&pairs[i].0));
    let mut frontier: Vec<(f64, f64)> = Vec::new();
    for i in order {
        if frontier.last().is_none_or(|&(_, leak)| pairs[i].1 < leak) {
            frontier.push(pairs[i]);
        }
    }
    let need = task.gamma * task.targets[0].dist_sq;
    let pm = task.power_max;
    let mut best = f64::NEG_INFINITY;
    for &(aw, gw) in &pairs {
        for &(ar, gr) in &frontier {
            // Largest communication power that still meets the threshold.
            let p = if pm * aw >= need {
                pm
            } else if ar > aw && pm * ar >= need {
                (pm * ar - need) / (ar - aw)
            } else {
                continue;
            };
            best = best.max((1.0 + p * gw / ((pm - p) * gr + task.noise[0])).log2());
        }
    }
    best
}

fn c4_brute_force() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for case in 0..3 {
        let mut s = random_desk(&mut rng);
        s.antennas = 2;
        s.users.truncate(1);
        s.weights.truncate(1);
        s.noise_power.truncate(1);
        s.targets.truncate(1);
        s.snr_min = 0.0;
        let p = Placement3D::new(rng.random_range(-5_000.0..5_000.0), rng.random_range(-5_000.0..5_000.0), 20_000.0);
        let mut task = BeamformingTask::isac(&s, &p, user_channels(&s, &ChannelModel::from_scenario(&s), &p, 0), p.z);
        let params = ScaParams::from_scenario(&s);
        // Put the threshold where it binds: part way to the largest gain.
        let (_, best_bp) = max_min_beampattern(&task, &params).map_err(|e| e.to_string())?;
        task.gamma = 0.6 * best_bp;
        let (bf, _) = solve_beamforming(&task, None, &params).map_err(|e| format!("case {case}: {e}"))?;
        let got = task.objective(&bf);
        let brute = exhaustive_m2(&task);
        ensure(task.is_feasible(&bf, 1e-6), || format!("case {case}: SDR point infeasible"))?;
        let gap = rel(got, brute);
        ensure(gap <= 0.01, || format!("case {case}: SDR {got} vs grid {brute}"))?;
        worst = worst.max(gap);
    }
    Ok(format!("worst gap {:.4}% over 3 instances", 100.0 * worst))
}

fn c5_power_sweep() -> Check {
    let s = Scenario::desk();
    let values = [2.0, 4.0, 6.0, 8.0, 10.0];
    let mut out = Vec::new();
    for design in [SweepDesign::Static, SweepDesign::Dynamic] {
        let rows = sweep(
            &s,
            SweepParam::PMax,
            &values,
            SweepOptions {
                design,
                compare_comm_only: false,
            },
        )
        .map_err(|e| e.to_string())?;
        let objs: Vec<f64> = rows
            .iter()
            .map(|r| r.objective.ok_or_else(|| format!("{} P_max={} {}", design.name(), r.value, r.status)))
            .collect::<Result<_, _>>()?;
        ensure(objs.windows(2).all(|w| w[1] >= w[0]), || format!("{}: {objs:?}", design.name()))?;
        out.push(format!(
            "{} {}",
            design.name(),
            objs.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join("<=")
        ));
    }
    Ok(out.join("; "))
}

fn c6_gamma() -> Check {
    let s = Scenario::desk();
    // Tightest first.
    let dbm = [-44.0, -48.0, -52.0];
    let values: Vec<f64> = dbm.iter().map(|&d| dbm_to_watts(d)).collect();
    let rows = sweep(
        &s,
        SweepParam::Gamma,
        &values,
        SweepOptions {
            design: SweepDesign::Static,
            compare_comm_only: true,
        },
    )
    .map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = rows
        .iter()
        .map(|r| r.gap.ok_or_else(|| format!("Γ = {} W: {}", r.value, r.status)))
        .collect::<Result<_, _>>()?;
    ensure(gaps.windows(2).all(|w| w[1] <= w[0]), || format!("gaps {gaps:?}"))?;
    let loosest = *gaps.last().unwrap();
    ensure(loosest <= 0.02, || format!("gap at the loosest setting {:.3}%", 100.0 * loosest))?;
    Ok(format!(
        "gaps at {dbm:?} dBm: {}",
        gaps.iter().map(|g| format!("{:.3}%", 100.0 * g)).collect::<Vec<_>>().join(", ")
    ))
}

fn c7_altitude(s: &Scenario, d: &StaticDesign) -> Check {
    let p = d.placement;
    ensure(p.z == s.flight.h_min, || format!("selected z = {} m", p.z))?;
    let u = centroid(&s.users);
    let t = centroid(&s.targets);
    let axis = [t[0] - u[0], t[1] - u[1]];
    let len2 = axis[0] * axis[0] + axis[1] * axis[1];
    let frac = ((p.h[0] - u[0]) * axis[0] + (p.h[1] - u[1]) * axis[1]) / len2;
    ensure(frac > 0.0 && frac < 1.0, || format!("placement projects to {frac:.3} of the centroid segment"))?;
    Ok(format!(
        "z = {} m, ({}, {}) sits at {:.2} of the user-to-target centroid segment",
        p.z, p.h[0], p.h[1], frac
    ))
}

fn c8_dominance(collected: &mut Collected) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let slack = 1e-6;
    let mut margins = (f64::INFINITY, f64::INFINITY);
    for case in 0..10 {
        let s = random_desk(&mut rng);
        let isac = solve_dynamic(&s).map_err(|e| format!("instance {case}: {e}"))?;
        let circle = circle_flight_design(&s, s.rng_seed).map_err(|e| format!("instance {case}: circle: {e}"))?;
        let iso = solve_dynamic_with(
            &s,
            &DynamicOptions {
                mode: DynamicMode::Isotropic,
                ..Default::default()
            },
        )
        .map_err(|e| format!("instance {case}: isotropic: {e}"))?;
        ensure(isac.objective >= circle.objective * (1.0 - slack), || {
            format!("instance {case}: ISAC {} < circle {}", isac.objective, circle.objective)
        })?;
        ensure(isac.objective >= iso.objective * (1.0 - slack), || {
            format!("instance {case}: ISAC {} < isotropic {}", isac.objective, iso.objective)
        })?;
        margins.0 = margins.0.min(isac.objective - circle.objective);
        margins.1 = margins.1.min(isac.objective - iso.objective);
        for (name, d) in [("isac", isac), ("circle", circle), ("isotropic", iso)] {
            collected.add(format!("random {case} {name}"), &s, Design::Dynamic(d));
        }
    }
    Ok(format!(
        "10 instances; smallest lead over circle {:.3}, over isotropic {:.3} bps/Hz",
        margins.0, margins.1
    ))
}

fn c9_audit(collected: &mut Collected) -> Check {
    let s = Scenario::desk();
    for kind in BaselineKind::ALL {
        let d = solve_baseline(kind, &s).map_err(|e| format!("{kind}: {e}"))?;
        collected.add(kind.name(), &s, d);
    }
    // Budget just above the conservative in-solver bound of the free flight,
    // so the energy constraint is present in every trajectory step.
    let free = solve_dynamic(&s).map_err(|e| e.to_string())?;
    let bound: f64 = free.trajectory.z[1..].iter().map(|&z| slot_energy_bound(&s, z)).sum();
    let mut budgeted = s.clone();
    budgeted.e_start = Some(bound * 1.001);
    let d = solve_dynamic(&budgeted).map_err(|e| format!("energy-limited run: {e}"))?;
    collected.add("dynamic with energy budget", &budgeted, Design::Dynamic(d));
    collected.add("dynamic", &s, Design::Dynamic(free));

    let mut failures = Vec::new();
    for (label, s, d) in &collected.designs {
        let report = audit(s, d);
        for c in report.failures() {
            failures.push(format!("{label}: {} ({}, margin {:.3e})", c.name, c.detail, c.margin));
        }
    }
    ensure(failures.is_empty(), || failures.join("; "))?;
    Ok(format!("{} designs re-verified", collected.designs.len()))
}

fn c10_physics() -> Check {
    let r20 = air_density(20_000.0).map_err(|e| e.to_string())?;
    let r30 = air_density(30_000.0).map_err(|e| e.to_string())?;
    let four = |x: f64| format!("{x:.4}");
    ensure(four(r20) == "0.0882", || format!("rho(20 km) = {r20}"))?;
    ensure(four(r30) == "0.0411", || format!("rho(30 km) = {r30}"))?;
    let p = scf_power(0.0882, 50.0, &AeroParams::default(), 0.0);
    ensure(rel(p, 15_460.0) <= 5e-3, || format!("SCF power {p} W"))?;
    Ok(format!("rho(20 km) = {r20:.5}, rho(30 km) = {r30:.5}, SCF power {:.2} kW", p / 1e3))
}

fn c11_determinism(first_static: &StaticDesign) -> Check {
    let s = Scenario::desk();
    let again = solve_static(&s).map_err(|e| e.to_string())?;
    let a = serde_json::to_string(&Design::Static(first_static.clone())).map_err(|e| e.to_string())?;
    let b = serde_json::to_string(&Design::Static(again)).map_err(|e| e.to_string())?;
    ensure(a == b, || "static solution JSON differs".into())?;
    let json = |d: DynamicDesign| serde_json::to_string(&Design::Dynamic(d)).map_err(|e| e.to_string());
    let c = json(circle_flight_design(&s, 5).map_err(|e| e.to_string())?)?;
    let d = json(circle_flight_design(&s, 5).map_err(|e| e.to_string())?)?;
    ensure(c == d, || "circle-flight JSON differs".into())?;
    let e = json(solve_dynamic(&s).map_err(|e| e.to_string())?)?;
    let f = json(solve_dynamic(&s).map_err(|e| e.to_string())?)?;
    ensure(e == f, || "dynamic solution JSON differs".into())?;
    Ok(format!("static {} B, dynamic {} B, circle {} B identical", a.len(), e.len(), c.len()))
}

// ---------------------------------------------------------------------------

fn run(id: usize, name: &str, f: impl FnOnce() -> Check) -> (usize, String, bool) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        Err(format!("panicked: {msg}"))
    });
    let secs = start.elapsed().as_secs_f64();
    let (tag, detail, ok) = match outcome {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    let line = format!("{tag} [{id:>2}] {name}: {detail} ({secs:.1} s)");
    eprintln!("{line}");
    (id, line, ok)
}

fn main() {
    let desk = Scenario::desk();
    let mut collected = Collected::default();
    let mut results = Vec::new();

    let nominal = solve_static(&desk);
    if let Ok(d) = &nominal {
        collected.add("static", &desk, Design::Static(d.clone()));
    }
    let with_nominal = |f: &dyn Fn(&StaticDesign) -> Check| match &nominal {
        Ok(d) => f(d),
        Err(e) => Err(format!("desk static design failed: {e}")),
    };

    results.push(run(1, "gradient oracle", c1_gradients));
    results.push(run(2, "SCA monotonicity", || with_nominal(&c2_sca)));
    results.push(run(3, "single-user analytic oracle", c3_single_user));
    results.push(run(4, "brute-force SDR oracle", c4_brute_force));
    results.push(run(5, "power-sweep monotonicity", c5_power_sweep));
    results.push(run(6, "beampattern-threshold relaxation", c6_gamma));
    results.push(run(7, "deployment altitude", || with_nominal(&|d| c7_altitude(&desk, d))));
    results.push(run(8, "dominance", || c8_dominance(&mut collected)));
    results.push(run(10, "physics spot checks", c10_physics));
    results.push(run(11, "determinism", || with_nominal(&c11_determinism)));
    results.push(run(9, "feasibility audit", || c9_audit(&mut collected)));

    results.sort_by_key(|r| r.0);
    println!();
    for (_, line, _) in &results {
        println!("{line}");
    }
    let failed = results.iter().filter(|r| !r.2).count();
    println!("\n{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
