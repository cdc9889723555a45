//! Read-only replay of finished runs.
//!
//! Every number in the table is recomputed from `scenario.json` and
//! `solution.json`; the stored CSVs are regenerated and compared byte for
//! byte. Nothing here writes to disk.

use std::fs;
use std::path::{Path, PathBuf};

use haps_isac::audit::audit;
use haps_isac::baselines::{BaselineKind, Design};
use haps_isac::geometry::ChannelModel;
use haps_isac::placement::static_task;
use haps_isac::sweep::{rows_csv, SweepRow};
use haps_isac::trajectory::true_objective;
use haps_isac::Scenario;

use crate::rundir::{Status, STATUS_FILE};
use crate::{CliError, EXIT_OK, EXIT_SOLVER};

/// Relative tolerance between a stored and a recomputed objective.
const OBJECTIVE_REL_TOL: f64 = 1e-9;

struct Replay {
    dir: PathBuf,
    status: Status,
    design: Option<&'static str>,
    objective: Option<f64>,
    /// Failed replay checks; empty means everything matched.
    problems: Vec<String>,
    sweep: Option<Vec<SweepRow>>,
}

fn run_dirs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let default = [PathBuf::from("runs")];
    let paths = if paths.is_empty() { &default[..] } else { paths };
    let mut dirs = Vec::new();
    for p in paths {
        if p.join(STATUS_FILE).is_file() {
            dirs.push(p.clone());
            continue;
        }
        let entries = fs::read_dir(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|d| {
                let hidden = d.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with('.'));
                !hidden && d.join(STATUS_FILE).is_file()
            })
            .collect();
        found.sort();
        dirs.extend(found);
    }
    if dirs.is_empty() {
        return Err(CliError::Usage("no finished runs found".into()));
    }
    Ok(dirs)
}

fn read(dir: &Path, file: &str) -> Result<String, String> {
    fs::read_to_string(dir.join(file)).map_err(|e| format!("{file}: {e}"))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= OBJECTIVE_REL_TOL * a.abs().max(b.abs()).max(1e-12)
}

fn recompute(s: &Scenario, d: &Design) -> f64 {
    match d {
        Design::Static(d) => {
            let task = static_task(s, &ChannelModel::from_scenario(s), &d.placement, d.mode);
            d.solution.slots.first().map_or(f64::NAN, |bf| task.objective(bf))
        }
        Design::Dynamic(d) => true_objective(s, d.mode, &d.trajectory, &d.solution.slots),
    }
}

fn csv_files(d: &Design) -> Vec<(&'static str, String)> {
    match d {
        Design::Static(d) => vec![("grid.csv", d.table_csv()), ("trace.csv", d.trace.to_csv())],
        Design::Dynamic(d) => vec![
            ("trajectory.csv", d.trajectory.to_csv()),
            ("outer.csv", d.outer_csv()),
            ("inner.csv", d.inner_csv()),
        ],
    }
}

fn replay(dir: &Path) -> Result<Replay, CliError> {
    let status: Status = serde_json::from_str(&read(dir, STATUS_FILE).map_err(CliError::Verify)?)
        .map_err(|e| CliError::Verify(format!("{}: bad status.json: {e}", dir.display())))?;
    let mut r = Replay {
        dir: dir.to_path_buf(),
        status,
        design: None,
        objective: None,
        problems: Vec::new(),
        sweep: None,
    };
    if let Err(p) = replay_artifacts(dir, &mut r) {
        r.problems.push(p);
    }
    Ok(r)
}

fn replay_artifacts(dir: &Path, r: &mut Replay) -> Result<(), String> {
    if dir.join("sweep.json").is_file() {
        let rows: Vec<SweepRow> = serde_json::from_str(&read(dir, "sweep.json")?).map_err(|e| format!("sweep.json: {e}"))?;
        if rows_csv(&rows) != read(dir, "sweep.csv")? {
            r.problems.push("sweep.csv differs from sweep.json".into());
        }
        r.design = Some("sweep");
        r.sweep = Some(rows);
        return Ok(());
    }
    if !dir.join("solution.json").is_file() {
        if r.status.exit_code == EXIT_OK {
            r.problems.push("solution.json missing".into());
        }
        return Ok(());
    }
    let s = Scenario::from_json_str(&read(dir, "scenario.json")?).map_err(|e| format!("scenario.json: {e}"))?;
    let d: Design = serde_json::from_str(&read(dir, "solution.json")?).map_err(|e| format!("solution.json: {e}"))?;
    r.design = Some(match d {
        Design::Static(_) => "static",
        Design::Dynamic(_) => "dynamic",
    });

    let obj = recompute(&s, &d);
    r.objective = Some(obj);
    if !close(obj, d.objective()) {
        r.problems.push(format!("objective {obj} recomputed, {} stored", d.objective()));
    }
    if let Some(stored) = r.status.objective {
        if !close(obj, stored) {
            r.problems.push(format!("objective {obj} recomputed, {stored} in status"));
        }
    }
    let passed = audit(&s, &d).passed();
    if r.status.audit_passed != Some(passed) {
        r.problems.push(format!("audit {passed} recomputed, {:?} in status", r.status.audit_passed));
    }
    for (name, text) in csv_files(&d) {
        if read(dir, name)? != text {
            r.problems.push(format!("{name} differs from solution.json"));
        }
    }
    Ok(())
}

fn scheme(st: &Status) -> String {
    match (&st.command[..], &st.kind) {
        (_, Some(k)) => k.clone(),
        ("solve-static" | "solve-dynamic", None) => "isac".into(),
        (c, None) => c.into(),
    }
}

/// Objective of the ISAC run with the same scenario and design type.
fn isac_reference(runs: &[Replay], r: &Replay) -> Option<f64> {
    let command = match r.design? {
        "static" => "solve-static",
        "dynamic" => "solve-dynamic",
        _ => return None,
    };
    runs.iter()
        .find(|o| o.status.command == command && o.status.scenario_sha256 == r.status.scenario_sha256)
        .and_then(|o| o.objective)
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

pub fn report(paths: &[PathBuf]) -> Result<i32, CliError> {
    let runs = run_dirs(paths)?
        .iter()
        .map(|d| replay(d))
        .collect::<Result<Vec<_>, _>>()?;

    println!(
        "{:<40} {:<22} {:<8} {:<15} {:>10} {:>9} {:>7}  replay",
        "run", "scheme", "design", "status", "objective", "vs isac", "audit"
    );
    for r in &runs {
        let scheme = scheme(&r.status);
        // A sensing-only dynamic objective is a beampattern, not a rate.
        let delta = match (r.objective, isac_reference(&runs, r)) {
            (Some(o), Some(i)) if scheme != BaselineKind::SarOnlyDynamic.name() => Some(o - i),
            _ => None,
        };
        let audit = match r.status.audit_passed {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let run = r.dir.file_name().map_or_else(|| r.dir.display().to_string(), |n| n.to_string_lossy().into_owned());
        println!(
            "{:<40} {:<22} {:<8} {:<15} {:>10} {:>9} {:>7}  {}",
            run,
            scheme,
            r.design.unwrap_or("-"),
            r.status.status,
            fmt_opt(r.objective.or(r.status.objective), 4),
            delta.map_or_else(|| "-".into(), |d| format!("{d:+.4}")),
            audit,
            if r.problems.is_empty() { "ok" } else { "MISMATCH" }
        );
    }

    for r in runs.iter().filter(|r| r.sweep.is_some()) {
        let rows = r.sweep.as_deref().unwrap_or_default();
        let Some(first) = rows.first() else { continue };
        println!("\nsweep {} ({}, {})", r.status.run_id, first.parameter, first.design.name());
        println!(
            "{:>14} {:<9} {:>10} {:>10} {:>9} {:>5}  status",
            "value", "feasible", "objective", "comm only", "gap %", "iter"
        );
        for row in rows {
            println!(
                "{:>14.6e} {:<9} {:>10} {:>10} {:>9} {:>5}  {}",
                row.value,
                row.feasible,
                fmt_opt(row.objective, 4),
                fmt_opt(row.comm_only, 4),
                fmt_opt(row.gap.map(|g| 100.0 * g), 3),
                row.iterations,
                row.status
            );
        }
    }

    let bad: Vec<&Replay> = runs.iter().filter(|r| !r.problems.is_empty()).collect();
    for r in &bad {
        for p in &r.problems {
            eprintln!("{}: {p}", r.dir.display());
        }
    }
    Ok(if bad.is_empty() { EXIT_OK } else { EXIT_SOLVER })
}
