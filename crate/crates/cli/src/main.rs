use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasinoise::pipeline::{
    run, run_sweep, ConfigIssue, PipelineError, RunConfig, SweepConfig, EXIT_OK,
};

/// Spectral 1/f noise and phase-space return probabilities of driven
/// quantum systems.
#[derive(Parser)]
#[command(name = "quasinoise", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one pipeline.
    Run(Common),
    /// Execute a config with a `[sweep] S = [...]` table, one run per value.
    Sweep(Common),
    /// Parse and check a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the root seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
    }

    fn init_threads(&self) -> Result<(), PipelineError> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(config_error("--threads", "must be >= 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| config_error("--threads", &e.to_string()))?;
        }
        Ok(())
    }
}

fn config_error(field: &str, reason: &str) -> PipelineError {
    PipelineError::Config(vec![ConfigIssue {
        field: field.to_owned(),
        reason: reason.to_owned(),
    }])
}

/// True when the file declares a `[sweep]` table.
fn has_sweep_table(path: &Path) -> bool {
    std::fs::read_to_string(path).is_ok_and(|t| t.lines().any(|l| l.trim() == "[sweep]"))
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run(c) => {
            let mut cfg = RunConfig::from_file(&c.config)?;
            c.apply(&mut cfg);
            cfg.validate()?;
            c.init_threads()?;
            let report = run(&cfg)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            Ok(())
        }
        Command::Sweep(c) => {
            let mut sc = SweepConfig::from_file(&c.config)?;
            c.apply(&mut sc.base);
            sc.base.validate()?;
            c.init_threads()?;
            let table = run_sweep(&sc)?;
            println!("{:>10} {:>10} {:>6} {:>12}  status", "S", "alpha", "D_H", "residual");
            for r in &table.rows {
                let f = |v: Option<f64>| v.map_or("-".to_owned(), |x| format!("{x:.4}"));
                println!(
                    "{:>10} {:>10} {:>6} {:>12}  {}",
                    r.drive_strength,
                    f(r.alpha),
                    r.d_h.map_or("-".to_owned(), |d| d.to_string()),
                    f(r.residual),
                    r.error.as_deref().unwrap_or("ok")
                );
            }
            if table.failures() == table.rows.len() {
                return Err(PipelineError::Stage {
                    stage: "sweep",
                    source: quasinoise::Error::InsufficientData("every run failed".into()),
                });
            }
            Ok(())
        }
        Command::ValidateConfig { config } => {
            if has_sweep_table(&config) {
                let sc = SweepConfig::from_file(&config)?;
                println!("ok: sweep of {} runs ({})", sc.drive_strengths.len(), sc.base.pipeline);
            } else {
                let cfg = RunConfig::from_file(&config)?;
                println!("ok: {}", cfg.pipeline);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
