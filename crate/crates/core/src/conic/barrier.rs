//! Log-barrier interior-point engine behind [`ConicProgram::solve`].
//!
//! The program is flattened onto one real vector `x`: real variables first,
//! then `dim^2` parameters per PSD block (diagonal entries, then the real
//! and imaginary parts of each upper-triangle entry). Equalities are
//! eliminated through a null-space basis, so Newton steps run in the
//! reduced space `x = x0 + Z y`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{
    Affine, Assignment, ConicProgram, ConstraintKind, Lowering, SolveResult, SolveStatus, SolverOptions,
};
use crate::error::ConstraintClass;
use crate::hermitian::{CMatrix, HermitianMatrix};

const LN2: f64 = std::f64::consts::LN_2;
/// Barrier-parameter growth per outer iteration.
const MU: f64 = 20.0;
/// Centering stops once half the squared Newton decrement falls below this.
const NEWTON_TOL: f64 = 1e-9;

/// Dense affine form `c0 + a . x`.
#[derive(Debug, Clone)]
struct LinForm {
    c0: f64,
    a: DVector<f64>,
}

impl LinForm {
    fn eval(&self, x: &DVector<f64>) -> f64 {
        self.c0 + self.a.dot(x)
    }

    fn scale(&mut self, s: f64) {
        self.c0 *= s;
        self.a *= s;
    }

    fn extend(&mut self, n: usize, shift: f64) {
        let old = self.a.len();
        self.a = self.a.clone().resize_vertically(n, 0.0);
        if shift != 0.0 {
            self.a[old] = shift;
        }
    }
}

/// Sparse generator entry `(row, col, value)` of a block parameter.
type Entry = (usize, usize, Complex64);

#[derive(Debug, Clone)]
struct Block {
    /// Complex dimension.
    dim: usize,
    /// Parameters: flattened index and the matrix entries it generates
    /// in the chosen lowering.
    params: Vec<(usize, Vec<Entry>)>,
    lowering: Lowering,
}

impl Block {
    fn new(offset: usize, dim: usize, lowering: Lowering) -> Self {
        let mut params = Vec::with_capacity(dim * dim);
        let one = Complex64::new(1.0, 0.0);
        let i1 = Complex64::new(0.0, 1.0);
        let mut idx = offset;
        for i in 0..dim {
            let e = match lowering {
                Lowering::Native => vec![(i, i, one)],
                Lowering::RealEmbedding => vec![(i, i, one), (i + dim, i + dim, one)],
            };
            params.push((idx, e));
            idx += 1;
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let re = match lowering {
                    Lowering::Native => vec![(i, j, one), (j, i, one)],
                    Lowering::RealEmbedding => vec![
                        (i, j, one),
                        (j, i, one),
                        (i + dim, j + dim, one),
                        (j + dim, i + dim, one),
                    ],
                };
                // X_ij = re + i im, X_ji = re - i im; the embedding stores
                // Im in the lower-left block and -Im in the upper-right.
                let im = match lowering {
                    Lowering::Native => vec![(i, j, i1), (j, i, -i1)],
                    Lowering::RealEmbedding => vec![
                        (i + dim, j, one),
                        (j + dim, i, -one),
                        (i, j + dim, -one),
                        (j, i + dim, one),
                    ],
                };
                params.push((idx, re));
                params.push((idx + 1, im));
                idx += 2;
            }
        }
        Self { dim, params, lowering }
    }

    fn size(&self) -> usize {
        match self.lowering {
            Lowering::Native => self.dim,
            Lowering::RealEmbedding => 2 * self.dim,
        }
    }

    /// Barrier weight: `-log det X` natively, `-1/2 log det` of the embedding.
    fn weight(&self) -> f64 {
        match self.lowering {
            Lowering::Native => 1.0,
            Lowering::RealEmbedding => 0.5,
        }
    }

    fn matrix(&self, x: &DVector<f64>, shift: Option<usize>) -> CMatrix {
        let n = self.size();
        let mut m = CMatrix::zeros(n, n);
        for (k, entries) in &self.params {
            let v = x[*k];
            if v != 0.0 {
                for &(a, b, c) in entries {
                    m[(a, b)] += c * v;
                }
            }
        }
        if let Some(s) = shift {
            for i in 0..n {
                m[(i, i)] += Complex64::new(x[s], 0.0);
            }
        }
        m
    }
}

/// Factorization of a block matrix: log-determinant and inverse.
fn factor(block: &Block, m: CMatrix) -> Option<(f64, CMatrix)> {
    match block.lowering {
        Lowering::Native => {
            let ch = Cholesky::new(m)?;
            let l = ch.l_dirty();
            let mut logdet = 0.0;
            for i in 0..l.nrows() {
                let d = l[(i, i)].re;
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                logdet += 2.0 * d.ln();
            }
            Some((logdet, ch.inverse()))
        }
        Lowering::RealEmbedding => {
            let r: DMatrix<f64> = m.map(|c| c.re);
            let ch = Cholesky::new(r)?;
            let l = ch.l_dirty();
            let mut logdet = 0.0;
            for i in 0..l.nrows() {
                let d = l[(i, i)];
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                logdet += 2.0 * d.ln();
            }
            Some((logdet, ch.inverse().map(|v| Complex64::new(v, 0.0))))
        }
    }
}

#[derive(Debug, Clone)]
enum Cons {
    Lin(LinForm),
    Soc { head: LinForm, tail: Vec<LinForm> },
    Quad { expr: LinForm, squares: Vec<(f64, LinForm)> },
}

impl Cons {
    fn theta(&self) -> f64 {
        match self {
            Cons::Soc { .. } => 2.0,
            _ => 1.0,
        }
    }

    /// Barrier argument; the constraint holds strictly iff it is positive.
    fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Cons::Lin(f) => f.eval(x),
            Cons::Soc { head, tail } => {
                let h = head.eval(x);
                if h <= 0.0 {
                    return -1.0;
                }
                h * h - tail.iter().map(|t| t.eval(x).powi(2)).sum::<f64>()
            }
            Cons::Quad { expr, squares } => {
                expr.eval(x) - squares.iter().map(|(w, q)| w * q.eval(x).powi(2)).sum::<f64>()
            }
        }
    }

    /// Slack in the constraint's own units (SOC: head minus tail norm).
    fn slack(&self, x: &DVector<f64>) -> f64 {
        match self {
            Cons::Soc { head, tail } => {
                head.eval(x) - tail.iter().map(|t| t.eval(x).powi(2)).sum::<f64>().sqrt()
            }
            other => other.value(x),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            Cons::Lin(f) => f.scale(s),
            Cons::Soc { head, tail } => {
                head.scale(s);
                tail.iter_mut().for_each(|t| t.scale(s));
            }
            Cons::Quad { expr, squares } => {
                expr.scale(s);
                // w q^2 scales by s when w does.
                squares.iter_mut().for_each(|(w, _)| *w *= s);
            }
        }
    }

    fn magnitude(&self) -> f64 {
        match self {
            Cons::Lin(f) => f.a.norm(),
            Cons::Soc { head, tail } => {
                (head.a.norm_squared() + tail.iter().map(|t| t.a.norm_squared()).sum::<f64>()).sqrt()
            }
            Cons::Quad { expr, squares } => {
                expr.a.norm().max(squares.iter().map(|(w, q)| w * q.a.norm_squared()).sum::<f64>())
            }
        }
    }

    /// Adds the phase-I shift variable at index `s` (appended column).
    fn extend(&mut self, n: usize) {
        match self {
            Cons::Lin(f) => f.extend(n, 1.0),
            Cons::Soc { head, tail } => {
                head.extend(n, 1.0);
                tail.iter_mut().for_each(|t| t.extend(n, 0.0));
            }
            Cons::Quad { expr, squares } => {
                expr.extend(n, 1.0);
                squares.iter_mut().for_each(|(_, q)| q.extend(n, 0.0));
            }
        }
    }

    /// Adds `-log(value)` derivatives into `g`, `h`; returns the value.
    fn accumulate(&self, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>) {
        match self {
            Cons::Lin(f) => {
                let v = f.eval(x);
                g.axpy(-1.0 / v, &f.a, 1.0);
                h.ger(1.0 / (v * v), &f.a, &f.a, 1.0);
            }
            Cons::Soc { head, tail } => {
                let hv = head.eval(x);
                let mut grad_u = &head.a * (2.0 * hv);
                let mut u = hv * hv;
                for t in tail {
                    let q = t.eval(x);
                    u -= q * q;
                    grad_u.axpy(-2.0 * q, &t.a, 1.0);
                }
                g.axpy(-1.0 / u, &grad_u, 1.0);
                h.ger(1.0 / (u * u), &grad_u, &grad_u, 1.0);
                h.ger(-2.0 / u, &head.a, &head.a, 1.0);
                for t in tail {
                    h.ger(2.0 / u, &t.a, &t.a, 1.0);
                }
            }
            Cons::Quad { expr, squares } => {
                let mut v = expr.eval(x);
                let mut grad = expr.a.clone();
                for (w, q) in squares {
                    let qv = q.eval(x);
                    v -= w * qv * qv;
                    grad.axpy(-2.0 * w * qv, &q.a, 1.0);
                }
                g.axpy(-1.0 / v, &grad, 1.0);
                h.ger(1.0 / (v * v), &grad, &grad, 1.0);
                for (w, q) in squares {
                    h.ger(2.0 * w / v, &q.a, &q.a, 1.0);
                }
            }
        }
    }
}

/// The flattened problem handed to the Newton engine.
#[derive(Debug, Clone)]
struct Lowered {
    n: usize,
    cons: Vec<Cons>,
    classes: Vec<ConstraintClass>,
    blocks: Vec<Block>,
    /// Phase-I shift variable applied to the blocks.
    block_shift: Option<usize>,
    logs: Vec<(f64, LinForm)>,
    linear: LinForm,
    /// Null-space parameterization of the equalities.
    z: Option<DMatrix<f64>>,
}

struct Layout {
    real: usize,
    offsets: Vec<usize>,
    n: usize,
}

impl Layout {
    fn new(p: &ConicProgram) -> Self {
        let mut offsets = Vec::with_capacity(p.psd_dims.len());
        let mut n = p.real_vars;
        for &d in &p.psd_dims {
            offsets.push(n);
            n += d * d;
        }
        Self {
            real: p.real_vars,
            offsets,
            n,
        }
    }

    fn lower(&self, e: &Affine) -> LinForm {
        let mut a = DVector::zeros(self.n);
        for &(i, c) in &e.real {
            a[i] += c;
        }
        for (b, m) in &e.psd {
            let off = self.offsets[*b];
            let d = m.nrows();
            for i in 0..d {
                a[off + i] += m[(i, i)].re;
            }
            let mut idx = off + d;
            for i in 0..d {
                for j in (i + 1)..d {
                    a[idx] += 2.0 * m[(i, j)].re;
                    a[idx + 1] += 2.0 * m[(i, j)].im;
                    idx += 2;
                }
            }
        }
        LinForm { c0: e.constant, a }
    }

    fn flatten(&self, a: &Assignment, dims: &[usize]) -> DVector<f64> {
        let mut x = DVector::zeros(self.n);
        for i in 0..self.real {
            x[i] = a.real.get(i).copied().unwrap_or(0.0);
        }
        for (b, &d) in dims.iter().enumerate() {
            let off = self.offsets[b];
            let Some(m) = a.psd.get(b) else { continue };
            if m.dim() != d {
                continue;
            }
            let mut idx = off + d;
            for i in 0..d {
                x[off + i] = m.get(i, i).re;
                for j in (i + 1)..d {
                    let c = m.get(i, j);
                    x[idx] = c.re;
                    x[idx + 1] = c.im;
                    idx += 2;
                }
            }
        }
        x
    }

    fn unflatten(&self, x: &DVector<f64>, dims: &[usize]) -> Assignment {
        let real = (0..self.real).map(|i| x[i]).collect();
        let psd = dims
            .iter()
            .enumerate()
            .map(|(b, &d)| {
                let off = self.offsets[b];
                let mut m = CMatrix::zeros(d, d);
                let mut idx = off + d;
                for i in 0..d {
                    m[(i, i)] = Complex64::new(x[off + i], 0.0);
                    for j in (i + 1)..d {
                        m[(i, j)] = Complex64::new(x[idx], x[idx + 1]);
                        m[(j, i)] = Complex64::new(x[idx], -x[idx + 1]);
                        idx += 2;
                    }
                }
                HermitianMatrix::from_matrix(m)
            })
            .collect();
        Assignment { real, psd }
    }
}

enum Centering {
    Converged,
    /// Line search or linear algebra stalled.
    Stalled,
    /// Iteration budget exhausted.
    Budget,
}

impl Lowered {
    fn theta(&self) -> f64 {
        self.cons.iter().map(|c| c.theta()).sum::<f64>() + self.blocks.iter().map(|b| b.dim as f64).sum::<f64>()
    }

    /// `t f0 + phi` at `x`, or `None` outside the domain.
    fn merit(&self, t: f64, x: &DVector<f64>) -> Option<f64> {
        let mut f = -t * self.linear.eval(x);
        for (w, l) in &self.logs {
            let v = l.eval(x);
            if !(v > 0.0) {
                return None;
            }
            f -= t * w * v.ln() / LN2;
        }
        for c in &self.cons {
            let v = c.value(x);
            if !(v > 0.0) || !v.is_finite() {
                return None;
            }
            f -= v.ln();
        }
        for b in &self.blocks {
            let (logdet, _) = factor(b, b.matrix(x, self.block_shift))?;
            f -= b.weight() * logdet;
        }
        f.is_finite().then_some(f)
    }

    fn derivatives(&self, t: f64, x: &DVector<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n;
        let mut g = -&self.linear.a * t;
        let mut h = DMatrix::zeros(n, n);
        for (w, l) in &self.logs {
            let v = l.eval(x);
            let s = t * w / LN2;
            g.axpy(-s / v, &l.a, 1.0);
            h.ger(s / (v * v), &l.a, &l.a, 1.0);
        }
        for c in &self.cons {
            c.accumulate(x, &mut g, &mut h);
        }
        for b in &self.blocks {
            let (_, y) = factor(b, b.matrix(x, self.block_shift))?;
            let w = b.weight();
            let mut params: Vec<(usize, Vec<Entry>)> = b.params.clone();
            if let Some(s) = self.block_shift {
                let one = Complex64::new(1.0, 0.0);
                params.push((s, (0..b.size()).map(|i| (i, i, one)).collect()));
            }
            // grad_k = -w Re tr(Y E_k); hess_kl = w Re tr(Y E_k Y E_l), expanded
            // over the sparse generator entries.
            for (pk, (k, ek)) in params.iter().enumerate() {
                let tr: Complex64 = ek.iter().map(|&(a, bb, c)| y[(bb, a)] * c).sum();
                g[*k] -= w * tr.re;
                for (l, el) in params.iter().skip(pk).map(|(l, el)| (l, el)) {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for &(a, bb, c) in ek {
                        for &(d, e, c2) in el {
                            acc += c * c2 * y[(e, a)] * y[(bb, d)];
                        }
                    }
                    h[(*k, *l)] += w * acc.re;
                    if k != l {
                        h[(*l, *k)] += w * acc.re;
                    }
                }
            }
        }
        if g.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((g, h))
    }

    /// Newton centering at parameter `t`, starting from `x`.
    fn center(
        &self,
        t: f64,
        x: &mut DVector<f64>,
        budget: &mut usize,
        mut early_exit: impl FnMut(&DVector<f64>) -> bool,
    ) -> Centering {
        loop {
            if *budget == 0 {
                return Centering::Budget;
            }
            *budget -= 1;
            let Some((gx, hx)) = self.derivatives(t, x) else {
                return Centering::Stalled;
            };
            let (g, h) = match &self.z {
                Some(z) => (z.transpose() * &gx, z.transpose() * &hx * z),
                None => (gx, hx),
            };
            if g.is_empty() {
                return Centering::Converged;
            }
            let Some(dy) = newton_direction(&h, &g) else {
                return Centering::Stalled;
            };
            let decrement = -g.dot(&dy);
            if decrement / 2.0 <= NEWTON_TOL {
                return Centering::Converged;
            }
            let dx = match &self.z {
                Some(z) => z * &dy,
                None => dy,
            };
            let Some(f0) = self.merit(t, x) else {
                return Centering::Stalled;
            };
            let slope = -decrement;
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-14 {
                let cand = &*x + &dx * step;
                if let Some(f1) = self.merit(t, &cand) {
                    let armijo = f1 <= f0 + 0.25 * step * slope;
                    let roundoff = step == 1.0 && (f0 - f1).abs() <= 1e-13 * f0.abs().max(1.0);
                    if armijo || roundoff {
                        *x = cand;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                return Centering::Stalled;
            }
            if early_exit(x) {
                return Centering::Converged;
            }
        }
    }

    /// Barrier path from `t0` until `theta / t <= tol`.
    fn path(
        &self,
        x: &mut DVector<f64>,
        tol: f64,
        budget: &mut usize,
        mut stop: impl FnMut(&DVector<f64>) -> bool,
    ) -> (bool, f64) {
        let theta = self.theta().max(1.0);
        let mut t = 1.0;
        loop {
            let r = self.center(t, x, budget, &mut stop);
            if stop(x) {
                return (true, theta / t);
            }
            match r {
                Centering::Converged => {}
                Centering::Stalled | Centering::Budget => return (false, theta / t),
            }
            if theta / t <= tol {
                return (true, theta / t);
            }
            t *= MU;
        }
    }
}

/// Solves `H d = -g`, regularizing `H` if it is not numerically positive
/// definite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = h.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = h.clone();
        if reg > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += reg;
            }
        }
        if let Some(ch) = Cholesky::new(m) {
            let d = ch.solve(&(-g));
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
    None
}

struct Equalities {
    x_particular: DVector<f64>,
    z: DMatrix<f64>,
}

fn eliminate(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Equalities, String> {
    let n = a.ncols();
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let eps = 1e-12 * smax.max(1.0);
    let xp = svd.solve(b, eps).map_err(|e| e.to_string())?;
    let res = (a * &xp - b).norm();
    if res > 1e-8 * (1.0 + b.norm()) {
        return Err(format!("equality constraints are inconsistent (residual {res:.3e})"));
    }
    let ata = a.transpose() * a;
    let eig = SymmetricEigen::new(ata);
    let cutoff = 1e-12 * eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v)).max(1.0);
    let cols: Vec<DVector<f64>> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() <= cutoff)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    let z = if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok(Equalities { x_particular: xp, z })
}

fn failure(status: SolveStatus, msg: impl Into<String>, class: Option<ConstraintClass>, steps: usize) -> SolveResult {
    SolveResult {
        status,
        value: f64::NAN,
        assignment: None,
        residual: f64::NAN,
        gap: f64::NAN,
        newton_steps: steps,
        infeasible_class: class,
        message: msg.into(),
    }
}

pub(super) fn solve(p: &ConicProgram, opts: &SolverOptions) -> SolveResult {
    if let Err(e) = p.well_formed() {
        return failure(SolveStatus::Failed, format!("malformed program: {e}"), None, 0);
    }
    let layout = Layout::new(p);
    let n = layout.n;

    let mut cons = Vec::new();
    let mut classes = Vec::new();
    let mut eq_rows: Vec<LinForm> = Vec::new();
    for c in &p.constraints {
        let lowered = match &c.kind {
            ConstraintKind::Eq(e) => {
                eq_rows.push(layout.lower(e));
                continue;
            }
            ConstraintKind::Ge(e) => Cons::Lin(layout.lower(e)),
            ConstraintKind::Soc { head, tail } => Cons::Soc {
                head: layout.lower(head),
                tail: tail.iter().map(|t| layout.lower(t)).collect(),
            },
            ConstraintKind::ConcaveQuadratic { expr, squares } => Cons::Quad {
                expr: layout.lower(expr),
                squares: squares.iter().map(|(w, q)| (*w, layout.lower(q))).collect(),
            },
        };
        let mut lowered = lowered;
        let mag = lowered.magnitude();
        if mag > 0.0 && mag.is_finite() {
            lowered.scale(1.0 / mag);
        }
        cons.push(lowered);
        classes.push(c.class);
    }

    let blocks: Vec<Block> = p
        .psd_dims
        .iter()
        .enumerate()
        .map(|(b, &d)| Block::new(layout.offsets[b], d, opts.lowering))
        .collect();

    let eqs = if eq_rows.is_empty() {
        None
    } else {
        let a = DMatrix::from_fn(eq_rows.len(), n, |i, j| eq_rows[i].a[j]);
        let b = DVector::from_iterator(eq_rows.len(), eq_rows.iter().map(|r| -r.c0));
        match eliminate(&a, &b) {
            Ok(e) => Some(e),
            Err(msg) => {
                let class = p
                    .constraints
                    .iter()
                    .find(|c| matches!(c.kind, ConstraintKind::Eq(_)))
                    .map(|c| c.class);
                return failure(SolveStatus::Infeasible, msg, class, 0);
            }
        }
    };

    let mut x = match &opts.initial {
        Some(a) => layout.flatten(a, &p.psd_dims),
        None => DVector::zeros(n),
    };
    if let Some(e) = &eqs {
        x = &e.x_particular + &e.z * (e.z.transpose() * (&x - &e.x_particular));
    }

    let logs: Vec<(f64, LinForm)> = p.log_terms.iter().map(|t| (t.weight, layout.lower(&t.expr))).collect();
    let phase2 = Lowered {
        n,
        cons,
        classes,
        blocks,
        block_shift: None,
        logs,
        linear: layout.lower(&p.linear),
        z: eqs.as_ref().map(|e| e.z.clone()),
    };

    let mut budget = opts.max_newton;
    if phase2.merit(1.0, &x).is_none() {
        match phase_one(&phase2, &mut x, &mut budget) {
            Ok(()) => {}
            Err((status, msg, class)) => {
                return failure(status, msg, class, opts.max_newton - budget);
            }
        }
    }

    let (ok, gap) = phase2.path(&mut x, opts.tol, &mut budget, |_| false);
    let steps = opts.max_newton - budget;
    let assignment = layout.unflatten(&x, &p.psd_dims);
    let residual = residual(p, &assignment);
    let status = if ok {
        SolveStatus::Optimal
    } else if phase2.merit(1.0, &x).is_some() {
        SolveStatus::Inaccurate
    } else {
        return failure(SolveStatus::Failed, "iterate left the domain", None, steps);
    };
    SolveResult {
        status,
        value: p.objective(&assignment),
        assignment: Some(assignment),
        residual,
        gap,
        newton_steps: steps,
        infeasible_class: None,
        message: if ok {
            String::new()
        } else {
            format!("stopped with gap bound {gap:.3e}")
        },
    }
}

/// Largest relative violation over all constraints and PSD blocks.
fn residual(p: &ConicProgram, a: &Assignment) -> f64 {
    let mut worst = 0.0f64;
    for c in &p.constraints {
        let s = c.slack(a);
        let scale = match &c.kind {
            ConstraintKind::Ge(e) | ConstraintKind::Eq(e) => e.constant.abs().max(1.0),
            ConstraintKind::Soc { head, .. } => head.eval(a).abs().max(1.0),
            ConstraintKind::ConcaveQuadratic { expr, .. } => expr.eval(a).abs().max(1.0),
        };
        worst = worst.max(-s / scale);
    }
    for m in &a.psd {
        let tr = m.trace().abs().max(1.0);
        worst = worst.max(-m.min_eigenvalue() / tr);
    }
    worst.max(0.0)
}

type PhaseOneError = (SolveStatus, String, Option<ConstraintClass>);

/// Finds a strictly feasible point by minimizing a common shift `s`
/// added to every inequality (and `s I` to every block), stopping as soon
/// as `s < 0`.
fn phase_one(p2: &Lowered, x: &mut DVector<f64>, budget: &mut usize) -> Result<(), PhaseOneError> {
    let n = p2.n + 1;
    let s_idx = p2.n;
    let mut cons: Vec<Cons> = p2.cons.clone();
    cons.iter_mut().for_each(|c| c.extend(n));
    let mut classes = p2.classes.clone();
    for (_, l) in &p2.logs {
        let mut l = l.clone();
        let mag = l.a.norm();
        if mag > 0.0 {
            l.scale(1.0 / mag);
        }
        l.extend(n, 1.0);
        cons.push(Cons::Lin(l));
        classes.push(ConstraintClass::Other);
    }
    // Keeps the shift bounded below: s >= -1.
    let mut floor = LinForm {
        c0: 1.0,
        a: DVector::zeros(n),
    };
    floor.a[s_idx] = 1.0;
    cons.push(Cons::Lin(floor));
    classes.push(ConstraintClass::Other);

    let mut linear = LinForm {
        c0: 0.0,
        a: DVector::zeros(n),
    };
    linear.a[s_idx] = -1.0;
    let z = p2.z.as_ref().map(|z| {
        let mut ze = DMatrix::zeros(n, z.ncols() + 1);
        ze.view_mut((0, 0), (z.nrows(), z.ncols())).copy_from(z);
        ze[(s_idx, z.ncols())] = 1.0;
        ze
    });
    let p1 = Lowered {
        n,
        cons,
        classes,
        blocks: p2.blocks.clone(),
        block_shift: Some(s_idx),
        logs: Vec::new(),
        linear,
        z,
    };

    let mut xe = x.clone().resize_vertically(n, 0.0);
    let base = p1
        .cons
        .iter()
        .take(p2.cons.len() + p2.logs.len())
        .map(|c| {
            let mut probe = xe.clone();
            probe[s_idx] = 0.0;
            -c.slack(&probe)
        })
        .fold(0.0f64, f64::max);
    let mut s0 = base + 1.0;
    xe[s_idx] = s0;
    let mut tries = 0;
    while p1.merit(1.0, &xe).is_none() {
        s0 = s0 * 2.0 + 1.0;
        xe[s_idx] = s0;
        tries += 1;
        if tries > 200 {
            return Err((SolveStatus::Failed, "phase I could not bracket a start".into(), None));
        }
    }

    let (_, _) = p1.path(&mut xe, 1e-10, budget, |x| x[s_idx] < 0.0);
    if xe[s_idx] < 0.0 {
        x.copy_from(&xe.rows(0, p2.n));
        return Ok(());
    }
    // Attribute infeasibility to the constraint with the least slack.
    let mut probe = xe.clone();
    probe[s_idx] = 0.0;
    let mut worst: Option<(f64, ConstraintClass)> = None;
    for (c, class) in p2.cons.iter().zip(&p2.classes) {
        let s = c.slack(&probe.rows(0, p2.n).into_owned());
        if worst.is_none_or(|(w, _)| s < w) {
            worst = Some((s, *class));
        }
    }
    let class = worst.map(|(_, c)| c);
    Err((
        SolveStatus::Infeasible,
        format!("no strictly feasible point (minimum common shift {:.3e})", xe[s_idx]),
        class,
    ))
}
