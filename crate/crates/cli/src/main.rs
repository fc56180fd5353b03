use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use clustergap::exec::Exec;
use clustergap_cli::config::RunConfig;
use clustergap_cli::verify::{self, VerifyOptions};
use clustergap_cli::{adapt, configure_threads, exit_code, solve, thread_count, EXIT_CHECK_FAILED};

#[derive(Parser)]
#[command(name = "clustergap", version, about = "Eigenvalue cluster computation with a posteriori gap estimates")]
struct Cli {
    /// Worker threads (overrides CLUSTER_GAP_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every loop sequentially.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Configuration file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_prefix: Option<PathBuf>,
    /// Comma-separated reference eigenvalues.
    #[arg(long)]
    reference: Option<String>,
    /// Print the effective configuration before running.
    #[arg(long)]
    dump_config: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", p.display()))?;
                let mut c = RunConfig::default();
                c.apply_text(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
                c
            }
            None => RunConfig::default(),
        };
        let mut overrides = Vec::new();
        let flags = [
            ("problem", self.problem.clone()),
            ("degree", self.degree.map(|v| v.to_string())),
            ("estimator", self.estimator.clone()),
            ("seed", self.seed.map(|v| v.to_string())),
            ("output_prefix", self.output_prefix.as_ref().map(|p| p.display().to_string())),
            ("reference", self.reference.clone()),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                overrides.push(format!("{k}={v}"));
            }
        }
        overrides.extend(self.set.iter().cloned());
        cfg.apply_overrides(&overrides).map_err(|e| anyhow::anyhow!("command-line override: {e}"))?;
        cfg.validate()?;
        if self.dump_config {
            print!("{}", cfg.dump());
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the matrix-level filter and projector checks.
    VerifySpectral {
        /// Comma-separated subset of 3x3, cayley, butterworth, lemma, riesz.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random instances for the mapping lemma check.
        #[arg(long, default_value_t = 200)]
        random: usize,
    },
    /// One cluster solve on a fixed mesh, or on a dense matrix.
    Solve {
        #[command(flatten)]
        config: ConfigArgs,
        /// Dense matrix file: `n`, then `n` rows of complex entries.
        #[arg(long)]
        matrix: Option<PathBuf>,
    },
    /// Adaptive refinement driven by the cluster gap estimator.
    Adapt {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn run(cli: Cli) -> Result<i32> {
    configure_threads(thread_count(cli.threads)?)?;
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::VerifySpectral { cases, seed, random } => {
            let mut opts = VerifyOptions { seed, random, ..VerifyOptions::default() };
            if !cases.is_empty() {
                opts.cases = cases;
            }
            let outcomes = verify::run_checks(&opts)?;
            let mut failed = Vec::new();
            for o in &outcomes {
                let status = if o.passed { "PASS" } else { "FAIL" };
                writeln!(stdout, "{status} {} ({:.2} s)\n  {}", o.name, o.seconds, o.detail)?;
                if !o.passed {
                    failed.push(o.name.as_str());
                }
            }
            if failed.is_empty() {
                writeln!(stdout, "all {} checks passed", outcomes.len())?;
                Ok(0)
            } else {
                writeln!(stdout, "failed checks: {}", failed.join(", "))?;
                Ok(EXIT_CHECK_FAILED)
            }
        }
        Command::Solve { config, matrix } => {
            let cfg = config.load()?;
            match matrix {
                Some(path) => {
                    solve::run_dense(&cfg, &path, exec, &mut stdout)?;
                }
                None => {
                    solve::run_solve(&cfg, exec, &mut stdout)?;
                }
            }
            Ok(0)
        }
        Command::Adapt { config } => {
            let cfg = config.load()?;
            let outcome = adapt::run_adapt(&cfg, exec, &mut std::io::stderr())?;
            writeln!(stdout, "{} rounds written to {}", outcome.rows.len(), outcome.csv_path.display())?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
