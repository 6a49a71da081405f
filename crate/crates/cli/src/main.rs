use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use projstate::harness::{self, Command, ScenarioConfig, EXIT_CONFIG_ERROR};
use projstate::Error;

#[derive(Parser)]
#[command(name = "projstate", version, about = "Verify factorized Hilbert-space families and projective state nets")]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Coherence, cocycle, isometry, duality, surjectivity and net checks on a family.
    VerifyFamily(Common),
    /// Measure identities, triple maps, partial-trace equivalence and truncation study for the Gaussian model.
    GaussianDemo(Common),
    /// Projected transverse-field Ising ground states along a growing chain.
    VacuumSweep(Common),
    /// Duality between state projection and observable embedding.
    DualityTest(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed of the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the JSON report and CSV tables; the report goes to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides every tolerance of the run.
    #[arg(long)]
    tol: Option<f64>,
    /// Replace one factorization isomorphism by a wrong one.
    #[arg(long)]
    corrupt_phi: bool,
}

fn load(common: &Common) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(tol) = common.tol {
        cfg.tol = Some(tol);
    }
    if common.corrupt_phi {
        cfg.fault.corrupt_phi = true;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(command: Command, common: &Common) -> Result<i32, Error> {
    let cfg = load(common)?;
    let out = harness::run(command, &cfg)?;
    match &cfg.output.dir {
        Some(dir) => {
            for path in out.write(dir)? {
                eprintln!("wrote {}", path.display());
            }
            print!("{}", out.report.summary());
        }
        None => {
            println!("{}", out.report.to_json()?);
            eprint!("{}", out.report.summary());
        }
    }
    Ok(out.report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match &cli.command {
        Verb::VerifyFamily(c) => (Command::VerifyFamily, c),
        Verb::GaussianDemo(c) => (Command::GaussianDemo, c),
        Verb::VacuumSweep(c) => (Command::VacuumSweep, c),
        Verb::DualityTest(c) => (Command::DualityTest, c),
    };
    let code = match execute(command, common) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = harness::error_exit_code(&e);
            debug_assert_eq!(code, EXIT_CONFIG_ERROR);
            code
        }
    };
    ExitCode::from(code as u8)
}
