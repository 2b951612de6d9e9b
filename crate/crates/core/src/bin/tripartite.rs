use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tripartite_core::harness::{mode_diff, preset, run_sweep, validate_hierarchy, SweepConfig};
use tripartite_core::Error;

#[derive(Parser)]
#[command(
    name = "tripartite",
    version,
    about = "Parameter sweeps for tripartite coupling estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// param:lo:hi:n[:log], values in Hz except x_b and gap_ratio.
    #[arg(long)]
    axis: Option<String>,
    /// corrected or strict_paper.
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated quantity names.
    #[arg(long)]
    outputs: Option<String>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Extra `key=value` settings applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the requested quantities along one parameter axis.
    Sweep {
        #[command(flatten)]
        args: SweepArgs,
        #[arg(long)]
        out: PathBuf,
        /// Exit with status 3 if any row failed.
        #[arg(long)]
        strict: bool,
        /// Also write the effective configuration to this file.
        #[arg(long)]
        save_config: Option<PathBuf>,
    },
    /// Run both formula modes and report which columns differ.
    Diff {
        #[command(flatten)]
        args: SweepArgs,
    },
    /// Check a preset's parameters and time-scale hierarchy.
    Validate {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value_t = tripartite_core::harness::DEFAULT_HIERARCHY_FACTOR)]
        factor: f64,
    },
}

fn build_config(args: &SweepArgs) -> Result<SweepConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config {
                line: None,
                field: None,
                message: format!("{}: {e}", path.display()),
            })?;
            SweepConfig::parse(&text)?
        }
        None => SweepConfig::default(),
    };
    let flags = [
        ("preset", &args.preset),
        ("axis", &args.axis),
        ("mode", &args.mode),
        ("outputs", &args.outputs),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for pair in &args.set {
        cfg.set_pair(pair)?;
    }
    cfg.validate()?;
    cfg.require_axis()?;
    Ok(cfg)
}

fn io_error(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Config {
        line: None,
        field: None,
        message: format!("{}: {e}", path.display()),
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Sweep {
            args,
            out,
            strict,
            save_config,
        } => {
            let cfg = build_config(&args)?;
            if let Some(path) = &save_config {
                fs::write(path, cfg.to_text()).map_err(|e| io_error(path, e))?;
            }
            let table = run_sweep(&cfg, args.jobs)?;
            fs::write(&out, table.to_csv()).map_err(|e| io_error(&out, e))?;
            let failed = table.failed_rows();
            eprintln!(
                "wrote {} rows to {} ({failed} with failures)",
                table.rows.len(),
                out.display()
            );
            if strict && failed > 0 {
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Diff { args } => {
            let cfg = build_config(&args)?;
            let diff = mode_diff(&cfg, args.jobs)?;
            print!("{}", diff.report());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate {
            preset: name,
            factor,
        } => {
            let p = preset(&name).ok_or_else(|| Error::Config {
                line: None,
                field: Some("preset".into()),
                message: format!("unknown preset `{name}`"),
            })?;
            p.validate().map_err(|e| Error::Config {
                line: None,
                field: Some("preset".into()),
                message: e.to_string(),
            })?;
            let warnings = validate_hierarchy(&p, factor);
            if warnings.is_empty() {
                println!("{name}: ok");
            }
            for w in warnings {
                println!("{name}: warning: {w}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
