use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wrk::{execute, read_config, replay, CliError, Command, Overrides};

#[derive(Parser)]
#[command(name = "wrk", version, about = "Two-species Widom–Rowlinson dynamics: simulation, kinetic limit, equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    ov: OverrideArgs,
}

#[derive(Args)]
struct OverrideArgs {
    /// Output directory (falls back to the config, then $WRK_OUT, then ./wrk-out).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    Simulate(Common),
    SolveKinetic(Common),
    Equilibria(Common),
    PhasePortrait(Common),
    BifurcationScan(Common),
    LpConverge(Common),
    VerifyIdentities(Common),
    /// Re-run the configuration recorded in a manifest and compare checksums.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        ov: OverrideArgs,
    },
}

impl OverrideArgs {
    fn into_overrides(self) -> Result<Overrides, CliError> {
        if self.threads == Some(0) {
            return Err(CliError::Schema { path: "--threads".into(), message: "must be at least 1".into() });
        }
        Ok(Overrides { out: self.out, seed: self.seed, threads: self.threads })
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(sub: Sub) -> Result<serde_json::Value, CliError> {
    let (cmd, common) = match sub {
        Sub::Replay { manifest, ov } => {
            let rep = replay(&manifest, &ov.into_overrides()?)?;
            let identical = rep.identical();
            let v = serde_json::json!({ "replay": rep, "identical": identical });
            if !identical {
                return Err(CliError::Numerical(format!("replay differs from manifest: {v}")));
            }
            return Ok(v);
        }
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::SolveKinetic(c) => (Command::SolveKinetic, c),
        Sub::Equilibria(c) => (Command::Equilibria, c),
        Sub::PhasePortrait(c) => (Command::PhasePortrait, c),
        Sub::BifurcationScan(c) => (Command::BifurcationScan, c),
        Sub::LpConverge(c) => (Command::LpConverge, c),
        Sub::VerifyIdentities(c) => (Command::VerifyIdentities, c),
    };
    let cfg = read_config(&common.config)?;
    let res = execute(cmd, cfg, &common.ov.into_overrides()?)?;
    Ok(serde_json::json!({
        "command": cmd.as_str(),
        "out_dir": res.out_dir.display().to_string(),
        "files": res.manifest.files.len(),
        "wall_time_s": res.manifest.wall_time_s,
    }))
}
