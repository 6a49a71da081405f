//! Scenario runner behind the command-line front end.
//!
//! Each command turns a [`ScenarioConfig`] into a [`RunReport`] plus optional
//! CSV tables. Reports are deterministic for a fixed config and seed except
//! for the `timings` field.

pub mod config;
mod suites;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use config::{
    CheckKind, FamilyConfig, GaussianDemoConfig, LatticeFamilyConfig, ScenarioConfig, Tolerances, VacuumSweepConfig,
};

use crate::error::{Error, Result};
use crate::rng::RNG_ALGORITHM;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyFamily,
    GaussianDemo,
    VacuumSweep,
    DualityTest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyFamily => "verify-family",
            Command::GaussianDemo => "gaussian-demo",
            Command::VacuumSweep => "vacuum-sweep",
            Command::DualityTest => "duality-test",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub max_defect: f64,
    pub tolerance: f64,
    pub count: usize,
    pub message: String,
    pub detail: serde_json::Value,
}

impl CheckResult {
    pub fn new(name: &str, max_defect: f64, tolerance: f64, count: usize) -> Self {
        let passed = max_defect <= tolerance;
        Self {
            name: name.to_owned(),
            passed,
            max_defect,
            tolerance,
            count,
            message: String::new(),
            detail: serde_json::Value::Null,
        }
    }

    pub fn with_detail<T: Serialize>(mut self, detail: &T) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(serde_json::Value::Null);
        self
    }

    pub fn with_message(mut self, message: impl Into<String>) -> Self {
        self.message = message.into();
        self
    }

    pub fn require(mut self, ok: bool) -> Self {
        self.passed &= ok;
        self
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub artifact_version: String,
    pub rng: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    /// Wall-clock seconds per check; the only nondeterministic field.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_CHECK_FAILURE
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The report without `timings`, for comparing runs.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!("{} {} max_defect={:.3e} tol={:.1e}", c.status(), c.name, c.max_defect, c.tolerance));
            if !c.message.is_empty() {
                out.push_str(&format!(" ({})", c.message));
            }
            out.push('\n');
        }
        out.push_str(&format!("{} {}: {} checks\n", if self.passed { "PASS" } else { "FAIL" }, self.command, self.checks.len()));
        out
    }
}

/// Report plus plot-ready tables (`file name → CSV text`).
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub tables: BTreeMap<String, String>,
    pub artifacts: BTreeMap<String, String>,
}

impl RunOutput {
    /// Writes `<command>.json` and the tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join(format!("{}.json", self.report.command));
        std::fs::write(&path, self.report.to_json()?)?;
        written.push(path);
        for (name, text) in self.tables.iter().chain(&self.artifacts) {
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            written.push(path);
        }
        Ok(written)
    }
}

pub(crate) struct Timed {
    pub checks: Vec<CheckResult>,
    pub timings: BTreeMap<String, f64>,
}

impl Timed {
    fn new() -> Self {
        Self { checks: Vec::new(), timings: BTreeMap::new() }
    }

    pub(crate) fn run(&mut self, name: &str, f: impl FnOnce() -> Result<CheckResult>) -> Result<()> {
        let start = Instant::now();
        let res = f()?;
        self.timings.insert(name.to_owned(), start.elapsed().as_secs_f64());
        self.checks.push(res);
        Ok(())
    }
}

/// Runs `command` on `cfg`.
pub fn run(command: Command, cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut timed = Timed::new();
    let mut tables = BTreeMap::new();
    let mut artifacts = BTreeMap::new();
    match command {
        Command::VerifyFamily => suites::verify_family(cfg, &mut timed)?,
        Command::DualityTest => suites::duality_test(cfg, &mut timed)?,
        Command::GaussianDemo => suites::gaussian_demo(cfg, &mut timed, &mut tables)?,
        Command::VacuumSweep => suites::vacuum_sweep(cfg, &mut timed, &mut tables, &mut artifacts)?,
    }
    let Timed { mut checks, mut timings } = timed;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    timings.insert("total".into(), start.elapsed().as_secs_f64());
    let passed = checks.iter().all(|c| c.passed);
    let report = RunReport {
        command: command.name().to_owned(),
        artifact_version: env!("CARGO_PKG_VERSION").to_owned(),
        rng: RNG_ALGORITHM.to_owned(),
        seed: cfg.seed(),
        config: cfg.clone(),
        checks,
        passed,
        timings,
    };
    Ok(RunOutput { report, tables, artifacts })
}

/// Exit code for an error raised before any check ran.
pub fn error_exit_code(_e: &Error) -> i32 {
    EXIT_CONFIG_ERROR
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(text).unwrap()
    }

    #[test]
    fn verify_family_small_passes_and_is_deterministic() {
        let cfg = small(
            r#"
            seed = 5
            [family]
            kind = "lattice"
            sites = 4
            [samples]
            cocycle = 20
            isometry = 20
            duality = 40
            surjectivity = 20
            net = 20
        "#,
        );
        let a = run(Command::VerifyFamily, &cfg).unwrap();
        assert!(a.report.passed, "{}", a.report.summary());
        assert_eq!(a.report.checks.len(), 6);
        let b = run(Command::VerifyFamily, &cfg).unwrap();
        assert_eq!(a.report.deterministic_json().unwrap(), b.report.deterministic_json().unwrap());
        let names: Vec<&str> = a.report.checks.iter().map(|c| c.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn fault_injection_fails_and_names_the_triple() {
        let cfg = small("seed = 1\nchecks = [\"coherence\"]\n[family]\nkind = \"lattice\"\nsites = 3\n[fault]\ncorrupt_phi = true");
        let out = run(Command::VerifyFamily, &cfg).unwrap();
        assert!(!out.report.passed);
        assert_eq!(out.report.exit_code(), EXIT_CHECK_FAILURE);
        let c = out.report.check("coherence").unwrap();
        assert!(c.message.contains("worst triple"), "{}", c.message);
    }

    #[test]
    fn empty_check_list_passes() {
        let out = run(Command::VerifyFamily, &small("seed = 1\nchecks = []")).unwrap();
        assert!(out.report.passed);
        assert!(out.report.checks.is_empty());
    }

    #[test]
    fn vacuum_controls_and_tables() {
        let cfg = small("seed = 2\n[vacuum]\ncoupling = 0.0\nfield = 1.0\nlengths = [4, 6]");
        let out = run(Command::VacuumSweep, &cfg).unwrap();
        assert!(out.report.passed, "{}", out.report.summary());
        assert!(out.report.check("control").is_some());
        let csv = &out.tables["vacuum_trace.csv"];
        assert!(csv.starts_with("L,energy,gap,d_k"));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn budget_refusal_is_an_error() {
        let cfg = small("seed = 2\n[vacuum]\nlengths = [4, 6]\ndim_budget = 32");
        let err = run(Command::VacuumSweep, &cfg).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { .. }));
        assert_eq!(error_exit_code(&err), EXIT_CONFIG_ERROR);
    }

    #[test]
    fn gaussian_demo_axis_aligned() {
        let cfg = small("seed = 4\n[gaussian]\nvariant = { kind = \"axis_aligned\" }\ntruncations = [2, 3]\nappendix_samples = 3\npoints = 10");
        let out = run(Command::GaussianDemo, &cfg).unwrap();
        assert!(out.report.passed, "{}", out.report.summary());
        assert!(out.tables["gaussian_truncation.csv"].lines().count() == 3);
    }
}
