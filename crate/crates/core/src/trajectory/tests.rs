use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::taylor::beampattern_value;
use super::*;
use crate::hermitian::{CMatrix, CVector};

fn random_psd(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> HermitianMatrix {
    let mut acc = HermitianMatrix::zeros(m);
    for _ in 0..2 {
        let v = CVector::from_fn(m, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        acc = acc.add(&HermitianMatrix::outer(&v, scale));
    }
    acc
}

fn random_point(rng: &mut ChaCha8Rng) -> Placement3D {
    Placement3D::new(
        rng.random_range(-20_000.0..20_000.0),
        rng.random_range(-20_000.0..20_000.0),
        rng.random_range(20_500.0..29_500.0),
    )
}

fn ground(rng: &mut ChaCha8Rng) -> GroundPoint {
    GroundPoint::new(rng.random_range(-20_000.0..20_000.0), rng.random_range(-20_000.0..20_000.0))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

fn shifted(p: &Placement3D, axis: usize, h: f64) -> Placement3D {
    let mut q = *p;
    match axis {
        0 => q.h[0] += h,
        1 => q.h[1] += h,
        _ => q.z += h,
    }
    q
}

#[test]
fn pair_expansion_matches_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let w = random_psd(&mut rng, 4, 1.0);
        let p = random_point(&mut rng);
        let u = ground(&mut rng);
        let (f, g) = exact_rate_terms(&p, std::slice::from_ref(&w), &w, &u);
        let direct = beampattern_gain(&p, &u, &w);
        assert!((f[0] - direct).abs() <= 1e-10 * direct.abs());
        assert_eq!(f[0], g);
    }
    let diag = HermitianMatrix::from_matrix(CMatrix::from_diagonal(&CVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(2.0, 0.0),
    ])));
    let p = Placement3D::new(100.0, 0.0, 20_000.0);
    let (f, _) = exact_rate_terms(&p, std::slice::from_ref(&diag), &diag, &GroundPoint::new(0.0, 0.0));
    assert!((f[0] - 3.0).abs() < 1e-14);
}

#[test]
fn two_by_two_hand_expansion() {
    let phi: f64 = 0.7;
    let w = HermitianMatrix::from_matrix(CMatrix::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, -phi),
            Complex64::from_polar(1.0, phi),
            Complex64::new(1.0, 0.0),
        ],
    ));
    let p = Placement3D::new(3000.0, -4000.0, 21_000.0);
    let u = GroundPoint::new(0.0, 0.0);
    let c = p.z / crate::geometry::distance(&p, &u);
    let (f, _) = exact_rate_terms(&p, std::slice::from_ref(&w), &w, &u);
    // W_12 = e^{-j phi}, so the cosine argument is -phi + pi c.
    let expect = 2.0 + 2.0 * (-phi + std::f64::consts::PI * c).cos();
    assert!((f[0] - expect).abs() < 1e-12);
}

#[test]
fn rate_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (noise, ref_gain) = (1e-7, 1e3);
    for case in 0..100 {
        let k = 2;
        let w: Vec<HermitianMatrix> = (0..k).map(|_| random_psd(&mut rng, 4, 1.0)).collect();
        let r = random_psd(&mut rng, 4, 0.5);
        let terms = SlotTerms::new(&w, &r);
        let p = random_point(&mut rng);
        let u = ground(&mut rng);
        let user = case % k;
        let t = rate_taylor(&p, &terms, user, &u, noise, ref_gain);
        let exact = exact_rate_hat(&p, &terms, user, &u, noise, ref_gain);
        assert!((t.c - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        let step = 1e-2;
        let fd: Vec<f64> = (0..3)
            .map(|a| {
                (exact_rate_hat(&shifted(&p, a, step), &terms, user, &u, noise, ref_gain)
                    - exact_rate_hat(&shifted(&p, a, -step), &terms, user, &u, noise, ref_gain))
                    / (2.0 * step)
            })
            .collect();
        let err = rel_err(&[t.v[0], t.v[1], t.b], &fd);
        assert!(err <= 1e-4, "case {case}: {err}");
    }
}

#[test]
fn beampattern_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..100 {
        let h = PairTerms::new(&random_psd(&mut rng, 4, 1.0));
        let p = random_point(&mut rng);
        let t = ground(&mut rng);
        let m = beampattern_taylor(&p, &h, &t);
        assert_eq!(m.xi, beampattern_value(&p, &h, &t));
        let step = 1e-2;
        let fd: Vec<f64> = (0..3)
            .map(|a| {
                (beampattern_value(&shifted(&p, a, step), &h, &t) - beampattern_value(&shifted(&p, a, -step), &h, &t))
                    / (2.0 * step)
            })
            .collect();
        let err = rel_err(&[m.nu[0], m.nu[1], m.zeta], &fd);
        assert!(err <= 1e-4, "case {case}: {err}");

        let n = normalized_beampattern_taylor(&p, &h, &t);
        let norm = |q: &Placement3D| beampattern_value(q, &h, &t) / crate::geometry::distance(q, &t).powi(2);
        let fd: Vec<f64> = (0..3)
            .map(|a| (norm(&shifted(&p, a, step)) - norm(&shifted(&p, a, -step))) / (2.0 * step))
            .collect();
        assert!(rel_err(&[n.nu[0], n.nu[1], n.zeta], &fd) <= 1e-4, "case {case} normalized");
    }
}

#[test]
fn diagonal_covariances_have_no_steering_dependence() {
    let d = HermitianMatrix::scaled_identity(3, 2.0);
    let h = PairTerms::new(&d);
    let p = Placement3D::new(1000.0, 2000.0, 22_000.0);
    let t = GroundPoint::new(-5000.0, 0.0);
    let m = beampattern_taylor(&p, &h, &t);
    assert_eq!((m.nu, m.zeta), ([0.0, 0.0], 0.0));
    assert!((m.xi - 6.0).abs() < 1e-12);
    let terms = SlotTerms::new(std::slice::from_ref(&d), &d);
    let (noise, rho0) = (1e-7, 1e3);
    let r = rate_taylor(&p, &terms, 0, &t, noise, rho0);
    // Only the scaled-noise term moves: d(eta)/dh = d(mu)/dh = 2 sigma^2 (h - m) / rho0.
    let g = 2.0 * noise / rho0 * (p.h[0] - t.x);
    let expect = std::f64::consts::LOG2_E * (g / r.eta - g / r.mu);
    assert!((r.v[0] - expect).abs() <= 1e-12 * expect.abs());
}

#[test]
fn boresight_gain_is_m_squared() {
    let p = Placement3D::new(2000.0, -1000.0, 20_000.0);
    let t = GroundPoint::new(5000.0, 3000.0);
    let a = crate::geometry::steering_vector(&p, &t, 4);
    let h = PairTerms::new(&HermitianMatrix::outer(&a, 0.5));
    let m = beampattern_taylor(&p, &h, &t);
    assert!((m.xi - 0.5 * 16.0).abs() < 1e-10);
}

#[test]
fn circular_init_properties() {
    let mut s = Scenario::desk();
    s.slots = 35;
    s.horizon = 350.0;
    let t = circular_init(&s);
    assert_eq!(t.h[0], t.h[35]);
    assert_eq!(t.z[0], t.z[35]);
    assert!(t.violations(&s).is_empty());
    // The nominal 20 km radius breaks the speed limit and is shrunk.
    let (dh, _) = t.step(1);
    assert!(dh <= s.flight.v_xy_max * s.dt());
    s.flight.v_xy_max = 1e6;
    let wide = circular_init(&s);
    let c = GroundPoint::centroid(&s.users.iter().chain(&s.targets).copied().collect::<Vec<_>>());
    let r = (wide.h[3][0] - c.x).hypot(wide.h[3][1] - c.y);
    assert!((r - 20_000.0).abs() < 1e-6);
}

fn desk_slots(s: &Scenario, traj: &Trajectory) -> Vec<SlotBeamforming> {
    slot_beamforming(s, DynamicMode::Isac, traj, None, 0.0).unwrap().0
}

#[test]
fn subproblem_shape() {
    let mut s = Scenario::desk();
    s.e_start = Some(1e12);
    let traj = circular_init(&s);
    let slots = desk_slots(&s, &traj);
    let ctx = TrajContext::new(&s, DynamicMode::Isac, &slots);
    let (prog, _) = build_traj_subproblem(&ctx, &traj, 10.0);
    let n = s.slots;
    assert_eq!(prog.real_vars, 3 * (n + 1));
    assert_eq!(prog.count(ConstraintClass::Beampattern), s.q() * n);
    assert_eq!(prog.count(ConstraintClass::TrustRegion), 2 * n);
    assert_eq!(prog.count(ConstraintClass::Altitude), n + 1);
    assert_eq!(prog.count(ConstraintClass::SpeedXy), n);
    assert_eq!(prog.count(ConstraintClass::SpeedZ), n);
    assert_eq!(prog.count(ConstraintClass::Energy), 1);
    assert_eq!(prog.count(ConstraintClass::Closure), 3);
}

#[test]
fn zero_radius_keeps_expansion_point() {
    let s = Scenario::desk();
    let traj = circular_init(&s);
    let slots = desk_slots(&s, &traj);
    let ctx = TrajContext::new(&s, DynamicMode::Isac, &slots);
    let (prog, vars) = build_traj_subproblem(&ctx, &traj, 0.0);
    let any = vec![0.3; prog.real_vars];
    assert_eq!(candidate_from(&traj, &vars, &any, 0.0, &s), traj);
}

#[test]
fn surrogate_optimum_beats_expansion_value() {
    let mut s = Scenario::desk();
    s.bp_threshold = 0.0;
    let traj = circular_init(&s);
    let slots = desk_slots(&s, &traj);
    let ctx = TrajContext::new(&s, DynamicMode::Isac, &slots);
    let (prog, _) = build_traj_subproblem(&ctx, &traj, 50.0);
    let res = prog.solve(&SolverOptions::with_tol(1e-9));
    assert!(res.status.has_solution());
    let at_expansion = true_objective(&s, DynamicMode::Isac, &traj, &slots);
    assert!(res.value >= at_expansion - 1e-9);
}

#[test]
fn trust_region_steps_are_monotone_and_halve() {
    let s = Scenario::desk();
    let traj = circular_init(&s);
    let slots = desk_slots(&s, &traj);
    let ctx = TrajContext::new(&s, DynamicMode::Isac, &slots);
    let params = TrustParams::from_scenario(&s);
    let (out, rows) = solve_trajectory(&ctx, &traj, &params, 1);
    assert!(out.violations(&s).is_empty());
    let mut last = true_objective(&s, DynamicMode::Isac, &traj, &slots);
    for w in rows.windows(2) {
        if !w[0].accepted {
            assert_eq!(w[1].radius, w[0].radius / 2.0);
        }
    }
    for r in rows.iter().filter(|r| r.accepted) {
        assert!(r.objective > last);
        last = r.objective;
    }
    assert!(rows.last().unwrap().radius < 2.0 * params.min_radius);
}

#[test]
fn stationary_point_is_returned_unchanged() {
    let s = Scenario::desk();
    let traj = circular_init(&s);
    let slots = desk_slots(&s, &traj);
    let ctx = TrajContext::new(&s, DynamicMode::Isac, &slots);
    let params = TrustParams::from_scenario(&s);
    let (opt, _) = solve_trajectory(&ctx, &traj, &params, 1);
    let (again, rows) = solve_trajectory(&ctx, &opt, &TrustParams { init_radius: 1.5, ..params }, 2);
    if rows.iter().all(|r| !r.accepted) {
        assert_eq!(again, opt);
    }
}

#[test]
fn desk_dynamic_design() {
    let s = Scenario::desk();
    let d = solve_dynamic(&s).unwrap();
    assert!(d.trajectory.violations(&s).is_empty());
    assert!(d.outer_iterations() <= 3, "{:?}", d.outer_trace);
    let objs: Vec<f64> = d.outer_trace.iter().map(|r| r.objective).collect();
    assert!(objs.windows(2).all(|w| w[1] >= w[0] - 1e-6), "{objs:?}");
    assert_eq!(d.solution.slots.len(), s.slots);
    assert!(d.solution.power_ok(s.power_max));
}

#[test]
fn vanishing_sensing_matches_comm_only() {
    let mut s = Scenario::desk();
    s.bp_threshold = 0.0;
    s.snr_min = 0.0;
    let isac = solve_dynamic(&s).unwrap();
    let comm = solve_dynamic_with(
        &s,
        &DynamicOptions {
            mode: DynamicMode::CommOnly,
            ..Default::default()
        },
    )
    .unwrap();
    let gap = (isac.objective - comm.objective).abs() / comm.objective;
    assert!(gap <= 0.01, "{} vs {}", isac.objective, comm.objective);
}
