use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use fracflat::harness::{
    calibrate, run, Calibration, CalibrationConfig, ExperimentConfig, ExperimentKind, Params, Report,
};

#[derive(Parser)]
#[command(name = "fracflat", version, about = "Fractional kernels, nonlocal curvature and flatness checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment (or calibration family) configuration, JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Calibration file with the frozen constants.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form kernel against its time quadrature; tail integrals.
    Kernel,
    /// Heat solver convergence, mass, symmetry, Duhamel and Gaussian bounds.
    Heat,
    /// Radius sweep of an effacement, measure or Dirichlet-gap estimate.
    Sweep,
    /// Nonlocal mean curvature at a boundary point.
    Nmc,
    /// Fractional perimeter in a ball.
    Perimeter,
    /// Dyadic flatness report of a sampled graph.
    Flatness,
    /// Minimal-graph flow only.
    Solve,
    /// Minimal-graph flow followed by the regularity checks.
    Verify,
    /// Fit and freeze the certifier constants.
    Calibrate {
        /// Replace an existing calibration file.
        #[arg(long)]
        overwrite: bool,
    },
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Self::Kernel => ExperimentKind::KernelCheck,
            Self::Heat => ExperimentKind::HeatCheck,
            Self::Sweep => ExperimentKind::EstimateSweep,
            Self::Nmc => ExperimentKind::NmcEval,
            Self::Perimeter => ExperimentKind::PerimeterEval,
            Self::Flatness => ExperimentKind::FlatnessPipeline,
            Self::Solve | Self::Verify => ExperimentKind::SolveAndVerify,
            Self::Calibrate { .. } => return None,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn experiment(cmd: &Command, kind: ExperimentKind, common: &Common) -> Result<bool> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_json(&read(p)?)?,
        None => ExperimentConfig::new(kind, 0, "out"),
    };
    if cfg.kind != kind {
        bail!("configuration is a {} experiment, not {}", cfg.kind.name(), kind.name());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output = o.clone();
    }
    if let (Command::Solve, Params::SolveAndVerify(p)) = (cmd, &mut cfg.params) {
        p.verify = false;
    }
    cfg.validate()?;
    let cal = common
        .calibration
        .as_deref()
        .map(Calibration::load)
        .transpose()
        .context("loading calibration")?;
    let report = run(&cfg, cal.as_ref())?;
    let files = report.write(&cfg.output)?;
    print_report(&report);
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(report.pass)
}

fn print_report(r: &Report) {
    for c in &r.checks {
        println!(
            "{} {:<28} {:e} {} {:e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.threshold
        );
    }
    println!("{}: {}", r.kind.name(), if r.pass { "pass" } else { "FAIL" });
}

fn calibration(common: &Common, overwrite: bool) -> Result<bool> {
    let cfg = match &common.config {
        Some(p) => CalibrationConfig::from_json(&read(p)?)?,
        None => CalibrationConfig::default(),
    };
    let seed = common.seed.unwrap_or(0);
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let path = dir.join("calibration.json");
    if path.exists() && !overwrite {
        bail!("{} exists; pass --overwrite to replace it", path.display());
    }
    let cal = calibrate(&cfg, seed)?;
    cal.write(&path, overwrite)?;
    println!("calibration {} written to {}", cal.version, path.display());
    println!(
        "C_effacement = {:e}, C_tail = {:e}, C_dirichlet = {:e}, delta = {}, k0 = {}",
        cal.c_effacement, cal.c_tail, cal.c_dirichlet, cal.delta_harnack, cal.k0
    );
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(j) = cli.common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match (&cli.command, cli.command.kind()) {
        (Command::Calibrate { overwrite }, _) => calibration(&cli.common, *overwrite),
        (cmd, Some(kind)) => experiment(cmd, kind, &cli.common),
        (_, None) => unreachable!("every experiment subcommand has a kind"),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
