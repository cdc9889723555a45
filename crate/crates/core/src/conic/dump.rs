//! Plain-text rendering of a [`ConicProgram`] for offline inspection.
//!
//! ```text
//! conic-program v1
//! variables real 2 psd 4 4
//! maximize
//!   log 1 : 1 + 2.5*x0 + tr(C0*X1)
//!   linear : -0.3*x1
//! subject to
//!   c0 beampattern ge : -40 + tr(C1*X0) + tr(C1*X1) >= 0
//! coefficients
//!   C0 4 : (re,im) (re,im) ... row-major
//! ```
//!
//! Matrix coefficients are listed once in the trailing `coefficients`
//! section and referenced as `C<i>` in the expressions.

use std::fmt::Write;

use super::{Affine, ConicProgram, ConstraintKind};
use crate::hermitian::CMatrix;

struct Pool {
    mats: Vec<CMatrix>,
}

impl Pool {
    fn id(&mut self, m: &CMatrix) -> usize {
        if let Some(i) = self.mats.iter().position(|x| x == m) {
            return i;
        }
        self.mats.push(m.clone());
        self.mats.len() - 1
    }

    fn expr(&mut self, e: &Affine) -> String {
        let mut s = format!("{}", e.constant);
        for (i, c) in &e.real {
            let _ = write!(s, " + {c}*x{i}");
        }
        for (b, m) in &e.psd {
            let id = self.id(m);
            let _ = write!(s, " + tr(C{id}*X{b})");
        }
        s
    }
}

pub fn dump_program(p: &ConicProgram) -> String {
    let mut pool = Pool { mats: Vec::new() };
    let mut out = String::from("conic-program v1\n");
    let dims: Vec<String> = p.psd_dims.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "variables real {} psd {}", p.real_vars, dims.join(" "));
    out.push_str("maximize\n");
    for t in &p.log_terms {
        let e = pool.expr(&t.expr);
        let _ = writeln!(out, "  log {} : {e}", t.weight);
    }
    let lin = pool.expr(&p.linear);
    let _ = writeln!(out, "  linear : {lin}");
    out.push_str("subject to\n");
    for (i, c) in p.constraints.iter().enumerate() {
        let body = match &c.kind {
            ConstraintKind::Ge(e) => format!("ge : {} >= 0", pool.expr(e)),
            ConstraintKind::Eq(e) => format!("eq : {} = 0", pool.expr(e)),
            ConstraintKind::Soc { head, tail } => {
                let t: Vec<String> = tail.iter().map(|t| pool.expr(t)).collect();
                format!("soc : || {} || <= {}", t.join(" ; "), pool.expr(head))
            }
            ConstraintKind::ConcaveQuadratic { expr, squares } => {
                let q: Vec<String> = squares
                    .iter()
                    .map(|(w, q)| format!("{w}*({})^2", pool.expr(q)))
                    .collect();
                format!("quad : {} - [{}] >= 0", pool.expr(expr), q.join(" + "))
            }
        };
        let _ = writeln!(out, "  c{i} {} {body}", c.class);
    }
    out.push_str("coefficients\n");
    for (i, m) in pool.mats.iter().enumerate() {
        let entries: Vec<String> = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| (r, c)))
            .map(|(r, c)| format!("({},{})", m[(r, c)].re, m[(r, c)].im))
            .collect();
        let _ = writeln!(out, "  C{i} {} : {}", m.nrows(), entries.join(" "));
    }
    out
}
