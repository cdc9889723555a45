//! Parameter sweeps: one full solve per grid value.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::{scenario_grid, solve_static_on, StaticMode};
use crate::scenario::Scenario;
use crate::trajectory::{solve_dynamic_with, DynamicMode, DynamicOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Transmit power cap, watts.
    PMax,
    /// Beampattern threshold, watts.
    Gamma,
    /// SAR SNR floor, linear.
    SnrMin,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PMax => "p_max",
            SweepParam::Gamma => "gamma",
            SweepParam::SnrMin => "snr_min",
        }
    }

    /// Copy of `s` with this parameter set to `value`.
    pub fn apply(self, s: &Scenario, value: f64) -> Scenario {
        let mut out = s.clone();
        match self {
            SweepParam::PMax => out.power_max = value,
            SweepParam::Gamma => out.bp_threshold = value,
            SweepParam::SnrMin => out.snr_min = value,
        }
        out
    }

    /// Whether the communication-only optimum depends on this parameter.
    fn moves_comm_only(self) -> bool {
        self == SweepParam::PMax
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "p_max" | "pmax" => Ok(SweepParam::PMax),
            "gamma" => Ok(SweepParam::Gamma),
            "snr_min" | "snrmin" => Ok(SweepParam::SnrMin),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep parameter `{other}`; expected p_max, gamma or snr_min"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepDesign {
    #[default]
    Static,
    Dynamic,
}

impl SweepDesign {
    pub fn name(self) -> &'static str {
        match self {
            SweepDesign::Static => "static",
            SweepDesign::Dynamic => "dynamic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: SweepParam,
    pub value: f64,
    pub design: SweepDesign,
    pub feasible: bool,
    /// ISAC objective, bps/Hz.
    pub objective: Option<f64>,
    /// Communication-only objective on the same instance, when requested.
    pub comm_only: Option<f64>,
    /// `|comm_only - objective| / comm_only`.
    pub gap: Option<f64>,
    /// SCA iterations (static) or outer iterations (dynamic).
    pub iterations: usize,
    pub status: String,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "parameter,value,design,feasible,objective,comm_only,gap,iterations,status";

    pub fn csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.parameter,
            self.value,
            self.design.name(),
            self.feasible,
            opt(self.objective),
            opt(self.comm_only),
            opt(self.gap),
            self.iterations,
            self.status
        )
    }
}

pub fn rows_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SweepRow::CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepOptions {
    pub design: SweepDesign,
    /// Also solve the communication-only problem for every row.
    pub compare_comm_only: bool,
}

/// Outcome of one solve: `(objective, iterations)` or a status string.
type Outcome = std::result::Result<(f64, usize), String>;

fn status_of(e: &Error) -> String {
    match e.infeasible_class() {
        Some(c) => format!("infeasible:{c}"),
        None => "solver_failure".into(),
    }
}

fn solve_one(s: &Scenario, design: SweepDesign, comm_only: bool) -> Outcome {
    let r = match design {
        SweepDesign::Static => {
            let mode = if comm_only { StaticMode::CommOnly } else { StaticMode::Isac };
            solve_static_on(s, &scenario_grid(s), mode).map(|d| (d.objective, d.trace.iterations()))
        }
        SweepDesign::Dynamic => {
            let mode = if comm_only { DynamicMode::CommOnly } else { DynamicMode::Isac };
            let opts = DynamicOptions {
                mode,
                ..Default::default()
            };
            solve_dynamic_with(s, &opts).map(|d| (d.objective, d.outer_iterations()))
        }
    };
    r.map_err(|e| status_of(&e))
}

/// Solves every grid value (in parallel) and returns rows in input order.
/// Infeasible values produce rows marked infeasible, not errors.
pub fn sweep(s: &Scenario, param: SweepParam, values: &[f64], opts: SweepOptions) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("empty {param} sweep grid")));
    }
    let scenarios = values
        .iter()
        .map(|&v| {
            let sc = param.apply(s, v);
            sc.validate().map(|_| sc)
        })
        .collect::<Result<Vec<_>>>()?;

    let isac: Vec<Outcome> = crate::par_map(&scenarios, |_, sc| solve_one(sc, opts.design, false));
    let comm: Vec<Option<Outcome>> = if !opts.compare_comm_only {
        vec![None; values.len()]
    } else if param.moves_comm_only() {
        crate::par_map(&scenarios, |_, sc| Some(solve_one(sc, opts.design, true)))
    } else {
        let shared = solve_one(&scenarios[0], opts.design, true);
        vec![Some(shared); values.len()]
    };

    Ok(values
        .iter()
        .zip(isac)
        .zip(comm)
        .map(|((&value, isac), comm)| {
            let comm_only = comm.and_then(|c| c.ok()).map(|(v, _)| v);
            let (feasible, objective, iterations, status) = match isac {
                Ok((v, it)) => (true, Some(v), it, "optimal".to_string()),
                Err(st) => (false, None, 0, st),
            };
            let gap = match (objective, comm_only) {
                (Some(o), Some(c)) if c != 0.0 => Some((c - o).abs() / c.abs()),
                _ => None,
            };
            SweepRow {
                parameter: param,
                value,
                design: opts.design,
                feasible,
                objective,
                comm_only,
                gap,
                iterations,
                status,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::GridSpec;

    fn small() -> Scenario {
        let mut s = Scenario::desk();
        s.grid = GridSpec {
            nx: 2,
            ny: 2,
            altitude_step: 5000.0,
            area: None,
        };
        s
    }

    #[test]
    fn parse_names() {
        for p in [SweepParam::PMax, SweepParam::Gamma, SweepParam::SnrMin] {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert_eq!("pmax".parse::<SweepParam>().unwrap(), SweepParam::PMax);
        assert!("altitude".parse::<SweepParam>().is_err());
    }

    #[test]
    fn empty_grid_is_an_error() {
        assert!(sweep(&small(), SweepParam::PMax, &[], SweepOptions::default()).is_err());
    }

    #[test]
    fn repeated_values_give_identical_rows() {
        let rows = sweep(&small(), SweepParam::PMax, &[6.0, 6.0], SweepOptions::default()).unwrap();
        assert_eq!(rows[0], rows[1]);
        assert_eq!(rows_csv(&rows).lines().count(), 3);
    }

    #[test]
    fn infeasible_value_becomes_a_row() {
        let rows = sweep(&small(), SweepParam::Gamma, &[1.0], SweepOptions::default()).unwrap();
        assert!(!rows[0].feasible);
        assert!(rows[0].status.starts_with("infeasible"), "{}", rows[0].status);
    }

    #[test]
    fn power_sweep_is_monotone() {
        let opts = SweepOptions {
            compare_comm_only: true,
            ..Default::default()
        };
        let rows = sweep(&small(), SweepParam::PMax, &[2.0, 6.0, 10.0], opts).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].objective.unwrap() >= w[0].objective.unwrap() - 1e-9);
        }
        for r in &rows {
            assert!(r.comm_only.unwrap() >= r.objective.unwrap() * (1.0 - 1e-6));
        }
    }
}
