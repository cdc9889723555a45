use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hermitian::CVector;

const C: ConstraintClass = ConstraintClass::Other;

fn opts(lowering: Lowering) -> SolverOptions {
    SolverOptions {
        tol: 1e-9,
        lowering,
        ..SolverOptions::default()
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    HermitianMatrix::from_matrix(m)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

#[test]
fn trace_maximization() {
    for lowering in [Lowering::Native, Lowering::RealEmbedding] {
        let mut p = ConicProgram::new();
        let x = p.add_psd(2);
        let id = HermitianMatrix::scaled_identity(2, 1.0);
        p.add_ge(Affine::constant(1.0).with_trace(x, &id, -1.0), C);
        p.add_linear(&Affine::trace(x, &id));
        let r = p.solve(&opts(lowering));
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.value - 1.0).abs() < 1e-7, "{lowering:?}: {}", r.value);
    }
}

#[test]
fn log_of_bounded_scalar() {
    let mut p = ConicProgram::new();
    let x = p.add_real();
    p.add_ge(Affine::var(x, 1.0), C);
    p.add_ge(Affine::constant(3.0).with_real(x, -1.0), C);
    p.add_log(1.0, Affine::constant(1.0).with_real(x, 1.0));
    let r = p.solve(&opts(Lowering::Native));
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.value - 2.0).abs() < 1e-7);
    assert!((r.assignment.unwrap().real[0] - 3.0).abs() < 1e-6);
}

#[test]
fn largest_eigenvalue_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let c = random_hermitian(&mut rng, 3);
        let mut p = ConicProgram::new();
        let x = p.add_psd(3);
        let id = HermitianMatrix::scaled_identity(3, 1.0);
        p.add_ge(Affine::constant(1.0).with_trace(x, &id, -1.0), C);
        p.add_linear(&Affine::trace(x, &c));
        let r = p.solve(&opts(Lowering::RealEmbedding));
        let lmax = c.eigenvalues()[2];
        assert!((r.value - lmax).abs() < 1e-6, "{} vs {lmax}", r.value);
    }
}

#[test]
fn second_order_cone() {
    let mut p = ConicProgram::new();
    let x = p.add_real();
    let y = p.add_real();
    p.add_soc(Affine::constant(1.0), vec![Affine::var(x, 1.0), Affine::var(y, 1.0)], C);
    p.add_linear(&Affine::var(x, 1.0).with_real(y, 1.0));
    let r = p.solve(&opts(Lowering::Native));
    assert!((r.value - 2f64.sqrt()).abs() < 1e-7);
}

#[test]
fn concave_quadratic_and_equality() {
    let mut p = ConicProgram::new();
    let x = p.add_real();
    let y = p.add_real();
    p.add_concave_quadratic(Affine::constant(4.0), vec![(1.0, Affine::var(x, 1.0))], C);
    p.add_eq(Affine::var(x, 1.0).with_real(y, -1.0), ConstraintClass::Closure);
    p.add_ge(Affine::constant(5.0).with_real(y, -1.0), C);
    p.add_linear(&Affine::var(x, 1.0).with_real(y, 1.0));
    let r = p.solve(&opts(Lowering::Native));
    assert_eq!(r.status, SolveStatus::Optimal);
    let a = r.assignment.unwrap();
    assert!((a.real[0] - 2.0).abs() < 1e-6 && (a.real[1] - 2.0).abs() < 1e-6);
    assert!((a.real[0] - a.real[1]).abs() < 1e-12);
}

#[test]
fn infeasibility_is_attributed() {
    let mut p = ConicProgram::new();
    let x = p.add_real();
    p.add_ge(Affine::var(x, 1.0).with_constant(-1.0), ConstraintClass::Beampattern);
    p.add_ge(Affine::var(x, -1.0), ConstraintClass::Power);
    p.add_linear(&Affine::var(x, 1.0));
    let r = p.solve(&opts(Lowering::Native));
    assert_eq!(r.status, SolveStatus::Infeasible);
    assert!(r.assignment.is_none());
    assert!(r.infeasible_class.is_some());
}

#[test]
fn inconsistent_equalities_are_infeasible() {
    let mut p = ConicProgram::new();
    let x = p.add_real();
    p.add_eq(Affine::var(x, 1.0), ConstraintClass::Closure);
    p.add_eq(Affine::var(x, 1.0).with_constant(-1.0), ConstraintClass::Closure);
    let r = p.solve(&opts(Lowering::Native));
    assert_eq!(r.status, SolveStatus::Infeasible);
    assert_eq!(r.infeasible_class, Some(ConstraintClass::Closure));
}

#[test]
fn undeclared_variable_rejected() {
    let mut p = ConicProgram::new();
    p.add_linear(&Affine::var(RealVar(3), 1.0));
    assert!(p.well_formed().is_err());
    assert_eq!(p.solve(&SolverOptions::default()).status, SolveStatus::Failed);
}

/// Random two-block programs solved through both PSD lowerings.
#[test]
fn lowerings_agree_on_random_programs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..20 {
        let m = 2 + case % 3;
        let g = random_vec(&mut rng, m);
        let c = random_hermitian(&mut rng, m);
        let d = HermitianMatrix::outer(&random_vec(&mut rng, m), 1.0);
        let id = HermitianMatrix::scaled_identity(m, 1.0);
        let mut p = ConicProgram::new();
        let x1 = p.add_psd(m);
        let x2 = p.add_psd(m);
        let cap = rng.random_range(1.0..3.0);
        p.add_ge(
            Affine::constant(cap).with_trace(x1, &id, -1.0).with_trace(x2, &id, -1.0),
            ConstraintClass::Power,
        );
        let floor = 0.05 * cap * d.trace();
        p.add_ge(Affine::trace(x2, &d).with_constant(-floor), ConstraintClass::Beampattern);
        p.add_log(1.0, Affine::constant(1.0).with_trace(x1, &HermitianMatrix::outer(&g, 1.0), 1.0));
        p.add_linear(&Affine::trace(x2, &c).scaled(0.3));
        let a = p.solve(&opts(Lowering::Native));
        let b = p.solve(&opts(Lowering::RealEmbedding));
        assert_eq!(a.status, SolveStatus::Optimal, "case {case}: {}", a.message);
        assert_eq!(b.status, SolveStatus::Optimal, "case {case}: {}", b.message);
        assert!((a.value - b.value).abs() < 1e-6, "case {case}: {} vs {}", a.value, b.value);
        let (aa, ba) = (a.assignment.unwrap(), b.assignment.unwrap());
        for k in 0..2 {
            assert!((aa.psd[k].trace() - ba.psd[k].trace()).abs() < 1e-4, "case {case} block {k}");
        }
    }
}

#[test]
fn dump_lists_everything() {
    let mut p = ConicProgram::new();
    let x = p.add_psd(2);
    let r = p.add_real();
    let id = HermitianMatrix::scaled_identity(2, 1.0);
    p.add_ge(Affine::constant(1.0).with_trace(x, &id, -1.0), ConstraintClass::Power);
    p.add_soc(Affine::constant(1.0), vec![Affine::var(r, 1.0)], ConstraintClass::TrustRegion);
    p.add_log(2.0, Affine::constant(1.0).with_trace(x, &id, 1.0));
    let text = dump_program(&p);
    assert!(text.starts_with("conic-program v1"));
    assert!(text.contains("variables real 1 psd 2"));
    assert!(text.contains("power ge"));
    assert!(text.contains("trust_region soc"));
    assert!(text.contains("log 2 :"));
    assert!(text.contains("C0 2 :"));
}
