//! A small convex-program description and its interior-point solver.
//!
//! Programs have real scalar variables and complex Hermitian PSD matrix
//! variables. The objective is a weighted sum of `log2(affine)` terms plus
//! a linear part, maximized. Constraints are affine inequalities and
//! equalities, second-order cones and convex quadratic upper bounds.
//!
//! The solver is a primal log-barrier method with Newton centering. PSD
//! variables are handled either natively (complex Cholesky) or through the
//! real-symmetric embedding `[Re, -Im; Im, Re]` of doubled dimension; the
//! two routes must agree and are cross-checked by the test-suite.
//!
//! ```
//! use haps_isac::conic::{Affine, ConicProgram, SolverOptions};
//! use haps_isac::ConstraintClass;
//!
//! // maximize log2(1 + x)  s.t.  0 <= x <= 3
//! let mut p = ConicProgram::new();
//! let x = p.add_real();
//! p.add_ge(Affine::var(x, 1.0), ConstraintClass::Other);
//! p.add_ge(Affine::constant(3.0).with_real(x, -1.0), ConstraintClass::Other);
//! p.add_log(1.0, Affine::constant(1.0).with_real(x, 1.0));
//! let r = p.solve(&SolverOptions::default());
//! assert!((r.value - 2.0).abs() < 1e-6);
//! ```

mod barrier;
mod dump;

use serde::{Deserialize, Serialize};

use crate::error::ConstraintClass;
use crate::hermitian::{CMatrix, HermitianMatrix};

pub use dump::dump_program;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RealVar(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PsdVar(pub usize);

/// `constant + sum c_i x_i + sum Re tr(C_b X_b)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub real: Vec<(usize, f64)>,
    pub psd: Vec<(usize, CMatrix)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    pub fn var(v: RealVar, coef: f64) -> Self {
        Self::default().with_real(v, coef)
    }

    /// `Re tr(C X)` for Hermitian `C`.
    pub fn trace(x: PsdVar, c: &HermitianMatrix) -> Self {
        Self::default().with_trace(x, c, 1.0)
    }

    pub fn with_real(mut self, v: RealVar, coef: f64) -> Self {
        self.real.push((v.0, coef));
        self
    }

    pub fn with_trace(mut self, x: PsdVar, c: &HermitianMatrix, scale: f64) -> Self {
        self.psd.push((x.0, c.as_matrix() * num_complex::Complex64::new(scale, 0.0)));
        self
    }

    pub fn with_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus(mut self, other: &Affine) -> Self {
        self.constant += other.constant;
        self.real.extend(other.real.iter().cloned());
        self.psd.extend(other.psd.iter().cloned());
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.constant *= s;
        for (_, c) in &mut self.real {
            *c *= s;
        }
        for (_, m) in &mut self.psd {
            *m *= num_complex::Complex64::new(s, 0.0);
        }
        self
    }

    /// Value at an assignment.
    pub fn eval(&self, a: &Assignment) -> f64 {
        let mut v = self.constant;
        for (i, c) in &self.real {
            v += c * a.real[*i];
        }
        for (b, m) in &self.psd {
            let x = a.psd[*b].as_matrix();
            let n = x.nrows();
            for i in 0..n {
                for j in 0..n {
                    v += (m[(j, i)] * x[(i, j)]).re;
                }
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind {
    /// `expr >= 0`.
    Ge(Affine),
    /// `expr = 0`.
    Eq(Affine),
    /// `||tail|| <= head`.
    Soc { head: Affine, tail: Vec<Affine> },
    /// `expr - sum w_i q_i^2 >= 0` with `w_i >= 0`.
    ConcaveQuadratic { expr: Affine, squares: Vec<(f64, Affine)> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub class: ConstraintClass,
}

impl Constraint {
    /// Signed slack at an assignment: non-negative iff satisfied (for
    /// equalities, minus the absolute residual).
    pub fn slack(&self, a: &Assignment) -> f64 {
        match &self.kind {
            ConstraintKind::Ge(e) => e.eval(a),
            ConstraintKind::Eq(e) => -e.eval(a).abs(),
            ConstraintKind::Soc { head, tail } => {
                head.eval(a) - tail.iter().map(|t| t.eval(a).powi(2)).sum::<f64>().sqrt()
            }
            ConstraintKind::ConcaveQuadratic { expr, squares } => {
                expr.eval(a) - squares.iter().map(|(w, q)| w * q.eval(a).powi(2)).sum::<f64>()
            }
        }
    }
}

/// `weight * log2(expr)` objective term.
#[derive(Debug, Clone, PartialEq)]
pub struct LogTerm {
    pub weight: f64,
    pub expr: Affine,
}

/// A convex maximization problem.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProgram {
    pub real_vars: usize,
    pub psd_dims: Vec<usize>,
    pub log_terms: Vec<LogTerm>,
    pub linear: Affine,
    pub constraints: Vec<Constraint>,
}

/// How PSD variables are presented to the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Lowering {
    /// Complex Hermitian blocks, complex Cholesky.
    Native,
    /// Real-symmetric embedding of doubled dimension.
    #[default]
    RealEmbedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Absolute duality-gap target.
    pub tol: f64,
    pub lowering: Lowering,
    /// Newton iterations allowed per solve (both phases).
    pub max_newton: usize,
    /// Starting point; need not be feasible.
    pub initial: Option<Assignment>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: crate::scenario::default_solver_tol(),
            lowering: Lowering::default(),
            max_newton: 2000,
            initial: None,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// Values of every variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub real: Vec<f64>,
    pub psd: Vec<HermitianMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Stopped short of the gap target but at a strictly feasible point.
    Inaccurate,
    Failed,
}

impl SolveStatus {
    /// Whether an assignment is available.
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::Inaccurate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective value (NaN without a solution).
    pub value: f64,
    pub assignment: Option<Assignment>,
    /// Largest relative constraint violation at the returned point.
    pub residual: f64,
    /// Duality-gap bound at termination.
    pub gap: f64,
    pub newton_steps: usize,
    /// Constraint family judged responsible when infeasible.
    pub infeasible_class: Option<ConstraintClass>,
    pub message: String,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_real(&mut self) -> RealVar {
        self.real_vars += 1;
        RealVar(self.real_vars - 1)
    }

    pub fn add_psd(&mut self, dim: usize) -> PsdVar {
        self.psd_dims.push(dim);
        PsdVar(self.psd_dims.len() - 1)
    }

    pub fn add_ge(&mut self, expr: Affine, class: ConstraintClass) {
        self.push(ConstraintKind::Ge(expr), class);
    }

    pub fn add_eq(&mut self, expr: Affine, class: ConstraintClass) {
        self.push(ConstraintKind::Eq(expr), class);
    }

    pub fn add_soc(&mut self, head: Affine, tail: Vec<Affine>, class: ConstraintClass) {
        self.push(ConstraintKind::Soc { head, tail }, class);
    }

    pub fn add_concave_quadratic(&mut self, expr: Affine, squares: Vec<(f64, Affine)>, class: ConstraintClass) {
        debug_assert!(squares.iter().all(|(w, _)| *w >= 0.0));
        self.push(ConstraintKind::ConcaveQuadratic { expr, squares }, class);
    }

    fn push(&mut self, kind: ConstraintKind, class: ConstraintClass) {
        self.constraints.push(Constraint { kind, class });
    }

    pub fn add_log(&mut self, weight: f64, expr: Affine) {
        self.log_terms.push(LogTerm { weight, expr });
    }

    pub fn add_linear(&mut self, expr: &Affine) {
        self.linear = std::mem::take(&mut self.linear).plus(expr);
    }

    pub fn count(&self, class: ConstraintClass) -> usize {
        self.constraints.iter().filter(|c| c.class == class).count()
    }

    /// Checks that every referenced variable is declared and every matrix
    /// coefficient has the right shape.
    pub fn well_formed(&self) -> Result<(), String> {
        let check = |e: &Affine| -> Result<(), String> {
            for (i, _) in &e.real {
                if *i >= self.real_vars {
                    return Err(format!("real variable {i} is not declared"));
                }
            }
            for (b, m) in &e.psd {
                let d = *self
                    .psd_dims
                    .get(*b)
                    .ok_or_else(|| format!("psd variable {b} is not declared"))?;
                if m.nrows() != d || m.ncols() != d {
                    return Err(format!("coefficient of psd variable {b} must be {d}x{d}"));
                }
            }
            Ok(())
        };
        check(&self.linear)?;
        for t in &self.log_terms {
            check(&t.expr)?;
            if !(t.weight >= 0.0) {
                return Err("log term weights must be non-negative".into());
            }
        }
        for c in &self.constraints {
            match &c.kind {
                ConstraintKind::Ge(e) | ConstraintKind::Eq(e) => check(e)?,
                ConstraintKind::Soc { head, tail } => {
                    check(head)?;
                    tail.iter().try_for_each(check)?;
                }
                ConstraintKind::ConcaveQuadratic { expr, squares } => {
                    check(expr)?;
                    for (w, q) in squares {
                        if !(*w >= 0.0) {
                            return Err("quadratic weights must be non-negative".into());
                        }
                        check(q)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Objective value at an assignment.
    pub fn objective(&self, a: &Assignment) -> f64 {
        self.log_terms
            .iter()
            .map(|t| t.weight * t.expr.eval(a).log2())
            .sum::<f64>()
            + self.linear.eval(a)
    }

    pub fn solve(&self, opts: &SolverOptions) -> SolveResult {
        barrier::solve(self, opts)
    }
}

#[cfg(test)]
mod tests;
