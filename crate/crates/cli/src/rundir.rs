//! One directory per run, published atomically.
//!
//! Files are written into `.<name>.partial` and the directory is renamed
//! once `status.json` is in place, so a run directory without a status file
//! never appears under its final name.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const STATUS_FILE: &str = "status.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub seed: u64,
    pub tol: f64,
    pub sca_max_iter: usize,
    pub outer_max_iter: usize,
    pub jobs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub run_id: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// `optimal`, `infeasible`, `solver_failure` or `error`.
    pub status: String,
    pub exit_code: i32,
    /// Blocking constraint family of an infeasible run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_passed: Option<bool>,
    /// SHA-256 of the canonical scenario JSON.
    pub scenario_sha256: String,
    pub elapsed_s: f64,
    pub started_unix: u64,
    pub version: String,
    pub solver: SolverSettings,
}

pub struct RunDir {
    pub name: String,
    partial: PathBuf,
    target: PathBuf,
    started: Instant,
    pub started_unix: u64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunDir {
    /// Creates `<out>/.<label>-<id>.partial`. The id hashes the arguments,
    /// the scenario, the clock and the process id, so concurrent runs with
    /// equal inputs still get distinct directories.
    pub fn create(out: &Path, label: &str, args: &[String], scenario_json: &str) -> io::Result<Self> {
        fs::create_dir_all(out)?;
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        let mut h = Sha256::new();
        for a in args {
            h.update(a.as_bytes());
            h.update([0]);
        }
        h.update(scenario_json.as_bytes());
        h.update(now.as_nanos().to_le_bytes());
        h.update(std::process::id().to_le_bytes());
        let id = hex::encode(h.finalize());
        let name = format!("{label}-{}", &id[..12]);
        let partial = out.join(format!(".{name}.partial"));
        fs::create_dir(&partial)?;
        Ok(Self {
            target: out.join(&name),
            name,
            partial,
            started: Instant::now(),
            started_unix: now.as_secs(),
        })
    }

    pub fn write(&self, file: &str, contents: impl AsRef<[u8]>) -> io::Result<()> {
        fs::write(self.partial.join(file), contents)
    }

    pub fn write_json<T: Serialize>(&self, file: &str, value: &T) -> io::Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        self.write(file, text + "\n")
    }

    pub fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// Writes `status.json` and publishes the directory.
    pub fn finish(self, status: &Status) -> io::Result<PathBuf> {
        self.write_json(STATUS_FILE, status)?;
        fs::rename(&self.partial, &self.target)?;
        Ok(self.target)
    }
}
