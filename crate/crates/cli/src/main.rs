//! Command-line driver: run paired experiments, verify the bound battery,
//! sweep the particle count, or print the derived constants.
//!
//! Exit codes: 0 on success with all checks passing, 2 when the work finished
//! but a check or bound failed, 1 on operational errors (bad config, I/O).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use svgd_core::harness::{self, ConstantsSummary, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "svgd",
    version,
    about = "Stein variational gradient descent with checkable finite-particle bounds"
)]
struct Cli {
    /// Override the particle seed from the config (reference seeds are untouched).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts; overrides the config and SVGD_OUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a paired finite/reference experiment and write its artifacts.
    Run {
        /// Experiment configuration (JSON).
        config: PathBuf,
    },
    /// Run the named self-check battery for a configuration.
    Verify {
        config: PathBuf,
        /// Emit the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Sweep the particle count under the budget step policy and check the rate.
    Sweep {
        config: PathBuf,
        /// Particle counts, comma separated (e.g. --n 16,64,256).
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Independent repeats per count, each with a distinct derived seed.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Failure probability of the initialization estimate.
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
    },
    /// Print every derived constant for a configuration without running it.
    Constants {
        config: PathBuf,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(s) = seed {
        config.init.seed = s;
    }
    Ok(config)
}

fn render_constants(s: &ConstantsSummary) -> String {
    let c = &s.constants;
    let mut out = String::new();
    let _ = writeln!(out, "kappa              {}", c.kappa);
    let _ = writeln!(out, "gamma              {}", c.gamma);
    let _ = writeln!(out, "lipschitz          {}", c.lipschitz);
    let _ = writeln!(out, "lambda             {}", c.lambda);
    let _ = writeln!(out, "m_p                {}", c.m_p);
    let _ = writeln!(out, "x_star_norm        {}", c.x_star_norm);
    let _ = writeln!(out, "c1                 {}", c.c1);
    let _ = writeln!(out, "c2                 {}", c.c2);
    let _ = writeln!(out, "A                  {}", c.a);
    let _ = writeln!(out, "B                  {}", c.b);
    let _ = writeln!(out, "C                  {}", c.c);
    let _ = writeln!(out, "m0 coupled (n)     {}", c.m0p_n);
    let _ = writeln!(out, "M0 coupled (n)     {}", c.big_m0p_n);
    let _ = writeln!(out, "m0 coupled (ref)   {}", c.m0p_inf);
    let _ = writeln!(out, "M0 coupled (ref)   {}", c.big_m0p_inf);
    let _ = writeln!(out, "KL0                {}", c.kl0);
    let _ = writeln!(out, "alpha              {}", c.alpha);
    let _ = writeln!(out, "step cap (p = 1)   {}", s.r_alpha1.r);
    let _ = writeln!(out, "step cap (p = 2)   {}", s.r_alpha2.r);
    let _ = writeln!(out, "rounds             {}", s.rounds);
    let _ = writeln!(out, "budget total       {}", s.budget_total);
    if let Some(w) = s.w_bar {
        let _ = writeln!(out, "w_bar              {w}");
    }
    if let Some(b) = &s.budget {
        let _ = writeln!(out, "budget b           {}", b.b);
    }
    out
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Run { config } => {
            let config = load(config, cli.seed)?;
            let out = harness::run_experiment(&config)?;
            let dir = harness::resolve_out_dir(cli.out.as_deref(), &config);
            let written = harness::emit_run(&out, &dir, &config.output.prefix)?;
            print!("{}", harness::render_summary(&out.record));
            for path in &written {
                println!("wrote {}", path.display());
            }
            let clean = out.record.hard_violations.is_empty()
                && out.record.soft_violations.is_empty();
            Ok(if clean { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Verify { config, json } => {
            let config = load(config, cli.seed)?;
            let report = harness::verify_suite(&config)?;
            if *json {
                println!("{}", report.to_json_pretty()?);
            } else {
                print!("{}", report.render());
            }
            Ok(if report.passed_all { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Sweep { config, n, repeats, delta } => {
            let config = load(config, cli.seed)?;
            let table = harness::sweep_n(&config, n, *repeats, *delta)?;
            let dir = harness::resolve_out_dir(cli.out.as_deref(), &config);
            let written = harness::emit_sweep(&table, &dir, &config.output.prefix)?;
            print!("{}", harness::render_rate_table(&table));
            for path in &written {
                println!("wrote {}", path.display());
            }
            Ok(if table.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
        Command::Constants { config, json } => {
            let config = load(config, cli.seed)?;
            let summary = harness::derive_constants(&config)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&summary)?);
            } else {
                print!("{}", render_constants(&summary));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
