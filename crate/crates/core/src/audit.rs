//! Independent re-verification of returned designs.
//!
//! Every check is recomputed from the scenario and the stored covariances
//! alone; nothing is taken from solver internals.

use serde::{Deserialize, Serialize};

use crate::aero::energy_ledger;
use crate::baselines::Design;
use crate::comm::SlotBeamforming;
use crate::geometry::{distance, steering_vector, Placement3D};
use crate::placement::{StaticDesign, StaticMode};
use crate::radar::sar_snr;
use crate::scenario::Scenario;
use crate::trajectory::{DynamicDesign, DynamicMode, NORM_REL_TOL};

/// Relative slack on the power cap.
pub const POWER_REL_TOL: f64 = 1e-7;
/// Relative slack on the beampattern constraint.
pub const BEAMPATTERN_REL_TOL: f64 = 1e-6;
/// Relative slack on the SAR SNR floor.
pub const SNR_REL_TOL: f64 = 1e-6;
/// Relative slack on positive semidefiniteness, against the trace.
pub const PSD_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub passed: bool,
    /// Worst signed margin, relative where a tolerance is relative;
    /// negative means violated.
    pub margin: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AuditCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, margin: f64, passed: bool, detail: String) {
        self.checks.push(AuditCheck {
            name: name.into(),
            passed,
            margin,
            detail,
        });
    }
}

/// Tracks the worst relative margin of a family of inequalities.
struct Worst {
    margin: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            at: String::new(),
        }
    }

    fn note(&mut self, margin: f64, at: impl FnOnce() -> String) {
        if margin < self.margin {
            self.margin = margin;
            self.at = at();
        }
    }

    fn finish(self, report: &mut AuditReport, name: &str, tol: f64) {
        let margin = if self.margin.is_finite() { self.margin } else { 0.0 };
        report.push(name, margin, margin >= -tol, self.at);
    }
}

/// Power, PSD, beampattern and SNR checks of one slot at placement `p`.
fn audit_slot(
    s: &Scenario,
    p: &Placement3D,
    bf: &SlotBeamforming,
    sensing_bp: bool,
    sensing_snr: bool,
    label: &str,
    acc: &mut [Worst; 4],
) {
    let power: f64 = bf.w.iter().map(|w| w.trace()).sum::<f64>() + bf.r.trace();
    acc[0].note((s.power_max - power) / s.power_max, || format!("{label}: power {power} W"));

    for (i, m) in bf.w.iter().chain(std::iter::once(&bf.r)).enumerate() {
        let scale = m.trace().abs().max(f64::MIN_POSITIVE);
        acc[1].note(m.min_eigenvalue() / scale, || format!("{label}: matrix {i}"));
    }

    if sensing_bp {
        let h = bf.total();
        for (q, t) in s.targets.iter().enumerate() {
            let d = distance(p, t);
            let rhs = s.bp_threshold * d * d;
            if rhs > 0.0 {
                let gain = h.quad_form(&steering_vector(p, t, s.antennas));
                acc[2].note((gain - rhs) / rhs, || format!("{label}: target {q} gain {gain} vs {rhs}"));
            }
        }
    }

    if sensing_snr && s.snr_min > 0.0 {
        let snr = sar_snr(p.z, s.flight.v_max(), power, &s.sar, s.wavelength, s.flight.obs_angle);
        acc[3].note((snr - s.snr_min) / s.snr_min, || format!("{label}: SNR {snr}"));
    }
}

fn slot_checks(report: &mut AuditReport, acc: [Worst; 4]) {
    let [power, psd, bp, snr] = acc;
    power.finish(report, "power", POWER_REL_TOL);
    psd.finish(report, "psd", PSD_REL_TOL);
    bp.finish(report, "beampattern", BEAMPATTERN_REL_TOL);
    snr.finish(report, "sar_snr", SNR_REL_TOL);
}

fn new_acc() -> [Worst; 4] {
    [Worst::new(), Worst::new(), Worst::new(), Worst::new()]
}

pub fn audit_static(s: &Scenario, d: &StaticDesign) -> AuditReport {
    let mut report = AuditReport::default();
    let p = d.placement;
    let in_bounds = p.z >= s.flight.h_min && p.z <= s.flight.h_max;
    report.push("altitude", 0.0, in_bounds, format!("z = {}", p.z));
    let Some(bf) = d.solution.slots.first() else {
        report.push("solution", -1.0, false, "no covariances".into());
        return report;
    };
    let sensing = d.mode != StaticMode::CommOnly;
    let mut acc = new_acc();
    audit_slot(s, &p, bf, d.mode == StaticMode::Isac, sensing, "placement", &mut acc);
    slot_checks(&mut report, acc);
    report
}

pub fn audit_dynamic(s: &Scenario, d: &DynamicDesign) -> AuditReport {
    let mut report = AuditReport::default();
    let t = &d.trajectory;
    let n = t.slots();

    report.push("slots", 0.0, n == s.slots && d.solution.slots.len() == n, format!("{n} slots"));
    if d.solution.slots.len() != n {
        return report;
    }

    let closed = t.h[0] == t.h[n] && t.z[0] == t.z[n];
    report.push("closure", 0.0, closed, format!("{:?} -> {:?}", t.point(0), t.point(n)));

    let mut alt = Worst::new();
    for (i, &z) in t.z.iter().enumerate() {
        let m = (z - s.flight.h_min).min(s.flight.h_max - z);
        alt.note(m, || format!("point {i}: z = {z}"));
    }
    alt.finish(&mut report, "altitude", 0.0);

    let (vxy, vz) = (s.flight.v_xy_max * s.dt(), s.flight.v_z_max * s.dt());
    let (mut sxy, mut sz) = (Worst::new(), Worst::new());
    for i in 1..=n {
        let (a, b) = (t.h[i - 1], t.h[i]);
        let dh = (b[0] - a[0]).hypot(b[1] - a[1]);
        let dz = (t.z[i] - t.z[i - 1]).abs();
        sxy.note((vxy - dh) / vxy, || format!("slot {i}: {dh} m"));
        sz.note((vz - dz) / vz, || format!("slot {i}: {dz} m"));
    }
    sxy.finish(&mut report, "speed_xy", NORM_REL_TOL);
    sz.finish(&mut report, "speed_z", NORM_REL_TOL);

    let sensing_bp = matches!(d.mode, DynamicMode::Isac | DynamicMode::Isotropic);
    let sensing_snr = d.mode != DynamicMode::CommOnly;
    let mut acc = new_acc();
    for (i, bf) in d.solution.slots.iter().enumerate() {
        audit_slot(s, &t.point(i + 1), bf, sensing_bp, sensing_snr, &format!("slot {}", i + 1), &mut acc);
    }
    slot_checks(&mut report, acc);

    if let Some(budget) = s.e_start {
        let power: Vec<f64> = d.solution.slots.iter().map(|b| b.power()).collect();
        match energy_ledger(&t.positions(), &power, s) {
            Ok(ledger) => {
                let used = ledger.cumulative;
                report.push("energy", (budget - used) / budget, used <= budget, format!("{used} J of {budget} J"));
            }
            Err(e) => report.push("energy", -1.0, false, e.to_string()),
        }
    }
    report
}

pub fn audit(s: &Scenario, d: &Design) -> AuditReport {
    match d {
        Design::Static(d) => audit_static(s, d),
        Design::Dynamic(d) => audit_dynamic(s, d),
    }
}
