mod args;
mod report;
mod rundir;

use std::io;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;

use haps_isac::audit::{audit, AuditReport};
use haps_isac::baselines::{solve_baseline, BaselineKind, Design};
use haps_isac::placement::solve_static;
use haps_isac::scenario::load_scenario;
use haps_isac::sweep::{rows_csv, sweep, SweepDesign, SweepOptions, SweepParam};
use haps_isac::trajectory::solve_dynamic;
use haps_isac::units::dbm_to_watts;
use haps_isac::{Error, Scenario};

use args::{Cli, Command, RunOpts, SweepArgs};
use rundir::{sha256_hex, RunDir, SolverSettings, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
const EXIT_IO: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Verify(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => core_exit_code(e),
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Verify(_) => EXIT_SOLVER,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

fn core_exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } => EXIT_INFEASIBLE,
        Error::Solver(_) => EXIT_SOLVER,
        Error::Config { .. } | Error::Validation(_) | Error::InvalidInput(_) => EXIT_USAGE,
        Error::Io(_) => EXIT_IO,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { scenario } => validate(&scenario),
        Command::SolveStatic(opts) => solve("solve-static", None, &opts, prepare(&opts)?, |s| {
            solve_static(s).map(Design::Static).map(Outcome::design)
        }),
        Command::SolveDynamic(opts) => solve("solve-dynamic", None, &opts, prepare(&opts)?, |s| {
            solve_dynamic(s).map(Design::Dynamic).map(Outcome::design)
        }),
        Command::Baseline { kind, run } => {
            let kind: BaselineKind = kind.parse()?;
            let s = prepare(&run)?;
            solve("baseline", Some(kind.name()), &run, s, |s| solve_baseline(kind, s).map(Outcome::design))
        }
        Command::Sweep(args) => run_sweep(args),
        Command::Report { paths } => report::report(&paths),
    }
}

/// Reads a scenario, treating a missing or unreadable file as a usage error.
fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    load_scenario(path).map_err(|e| match e {
        Error::Io(io) => CliError::Usage(format!("cannot read {}: {io}", path.display())),
        other => other.into(),
    })
}

#[derive(Serialize)]
struct Verdict {
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    targets: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    antennas: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slots: Option<usize>,
    violations: Vec<String>,
}

fn validate(path: &Path) -> Result<i32, CliError> {
    let verdict = match read_scenario(path) {
        Ok(s) => Verdict {
            valid: true,
            users: Some(s.k()),
            targets: Some(s.q()),
            antennas: Some(s.antennas),
            slots: Some(s.slots),
            violations: Vec::new(),
        },
        Err(CliError::Core(Error::Validation(v))) => invalid(v),
        Err(CliError::Core(e @ Error::Config { .. })) => invalid(vec![e.to_string()]),
        Err(e) => return Err(e),
    };
    println!("{}", serde_json::to_string_pretty(&verdict).expect("verdict serializes"));
    Ok(if verdict.valid { EXIT_OK } else { EXIT_USAGE })
}

fn invalid(violations: Vec<String>) -> Verdict {
    Verdict {
        valid: false,
        users: None,
        targets: None,
        antennas: None,
        slots: None,
        violations,
    }
}

/// Loads the scenario, applies command-line overrides and sizes the pool.
fn prepare(opts: &RunOpts) -> Result<Scenario, CliError> {
    let mut s = read_scenario(&opts.scenario)?;
    if let Some(seed) = opts.seed {
        s.rng_seed = seed;
    }
    if let Some(tol) = opts.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
        }
        s.algorithm.solver_tol = tol;
    }
    if let Some(n) = opts.max_iter {
        if n == 0 {
            return Err(CliError::Usage("--max-iter must be at least 1".into()));
        }
        s.algorithm.sca_max_iter = n;
        s.algorithm.outer_max_iter = n;
    }
    s.validate()?;
    if let Some(jobs) = opts.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))?;
    }
    Ok(s)
}

/// What a finished solve leaves behind.
struct Outcome {
    files: Vec<(&'static str, String)>,
    objective: Option<f64>,
    audit: Option<AuditReport>,
    design: Option<Design>,
}

impl Outcome {
    fn design(d: Design) -> Self {
        let mut files = Vec::new();
        match &d {
            Design::Static(d) => {
                files.push(("grid.csv", d.table_csv()));
                files.push(("trace.csv", d.trace.to_csv()));
            }
            Design::Dynamic(d) => {
                files.push(("trajectory.csv", d.trajectory.to_csv()));
                files.push(("outer.csv", d.outer_csv()));
                files.push(("inner.csv", d.inner_csv()));
            }
        }
        Self {
            files,
            objective: Some(d.objective()),
            audit: None,
            design: Some(d),
        }
    }
}

fn solve<F>(command: &str, kind: Option<&str>, opts: &RunOpts, s: Scenario, f: F) -> Result<i32, CliError>
where
    F: FnOnce(&Scenario) -> haps_isac::Result<Outcome>,
{
    let scenario_json = serde_json::to_string(&s).expect("scenario serializes");
    let label = match kind {
        Some(k) => format!("{command}-{k}"),
        None => command.to_string(),
    };
    let args: Vec<String> = std::env::args().collect();
    let dir = RunDir::create(&opts.out, &label, &args, &scenario_json)?;
    dir.write("scenario.toml", s.to_toml_string())?;
    dir.write("scenario.json", format!("{scenario_json}\n"))?;

    let mut status = Status {
        run_id: dir.name.clone(),
        command: command.to_string(),
        kind: kind.map(str::to_string),
        status: "optimal".into(),
        exit_code: EXIT_OK,
        class: None,
        message: None,
        objective: None,
        audit_passed: None,
        scenario_sha256: sha256_hex(scenario_json.as_bytes()),
        elapsed_s: 0.0,
        started_unix: dir.started_unix,
        version: env!("CARGO_PKG_VERSION").to_string(),
        solver: SolverSettings {
            seed: s.rng_seed,
            tol: s.algorithm.solver_tol,
            sca_max_iter: s.algorithm.sca_max_iter,
            outer_max_iter: s.algorithm.outer_max_iter,
            jobs: rayon::current_num_threads(),
        },
    };

    match f(&s) {
        Ok(mut out) => {
            if let Some(d) = &out.design {
                dir.write_json("solution.json", d)?;
                out.audit = Some(audit(&s, d));
            }
            for (name, text) in &out.files {
                dir.write(name, text)?;
            }
            status.objective = out.objective;
            if let Some(a) = &out.audit {
                dir.write_json("audit.json", a)?;
                status.audit_passed = Some(a.passed());
                if !a.passed() {
                    let failed: Vec<_> = a.failures().map(|c| format!("{} ({})", c.name, c.detail)).collect();
                    status.status = "audit_failed".into();
                    status.exit_code = EXIT_SOLVER;
                    status.message = Some(format!("audit failed: {}", failed.join("; ")));
                }
            }
        }
        Err(e) => {
            status.exit_code = core_exit_code(&e);
            status.message = Some(e.to_string());
            status.class = e.infeasible_class().map(|c| c.to_string());
            status.status = match status.exit_code {
                EXIT_INFEASIBLE => "infeasible",
                EXIT_SOLVER => "solver_failure",
                _ => "error",
            }
            .into();
        }
    }
    status.elapsed_s = dir.elapsed();
    let path = dir.finish(&status)?;

    println!("run_dir: {}", path.display());
    println!("status: {}", status.status);
    if let Some(v) = status.objective {
        println!("objective: {v}");
    }
    if let Some(m) = &status.message {
        eprintln!("{m}");
    }
    Ok(status.exit_code)
}

fn run_sweep(args: SweepArgs) -> Result<i32, CliError> {
    let (param, values) = match (&args.pmax, &args.gamma, &args.snr_min) {
        (Some(v), _, _) => (SweepParam::PMax, v.clone()),
        (_, Some(v), _) => (SweepParam::Gamma, v.iter().map(|&d| dbm_to_watts(d)).collect()),
        (_, _, Some(v)) => (SweepParam::SnrMin, v.clone()),
        _ => return Err(CliError::Usage("one of --pmax, --gamma or --snr-min is required".into())),
    };
    if values.is_empty() {
        return Err(CliError::Usage(format!("empty {param} sweep grid")));
    }
    let base = prepare(&args.run)?;
    // Reject bad grid values before a run directory exists.
    for &v in &values {
        param.apply(&base, v).validate()?;
    }
    let opts = SweepOptions {
        design: if args.dynamic { SweepDesign::Dynamic } else { SweepDesign::Static },
        compare_comm_only: args.compare_comm_only,
    };
    let kind = format!("{param}-{}", opts.design.name());
    solve("sweep", Some(&kind), &args.run, base, |s| {
        let rows = sweep(s, param, &values, opts)?;
        let json = serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n";
        Ok(Outcome {
            files: vec![("sweep.csv", rows_csv(&rows)), ("sweep.json", json)],
            objective: None,
            audit: None,
            design: None,
        })
    })
}
