//! Command-line harness: reads a JSON run configuration, dispatches to
//! `wrk-core`, and writes data files plus a checksummed manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod plot;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use config::{Command, RunConfig};
pub use error::CliError;
pub use manifest::{FileEntry, Manifest, MANIFEST_NAME};

pub const OUT_ENV: &str = "WRK_OUT";
pub const DEFAULT_OUT: &str = "wrk-out";

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// `--out`, then `output` in the config, then `$WRK_OUT`, then `./wrk-out`.
pub fn resolve_out_dir(cli: Option<&Path>, cfg: Option<&str>, env: Option<&str>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.map(PathBuf::from))
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    RunConfig::from_json_str(&text)
}

/// Applies overrides, runs the command and writes its files and manifest.
pub fn execute(cmd: Command, mut cfg: RunConfig, ov: &Overrides) -> Result<RunResult, CliError> {
    let env = std::env::var(OUT_ENV).ok();
    let out_dir = resolve_out_dir(ov.out.as_deref(), cfg.output.as_deref(), env.as_deref());
    if let Some(s) = ov.seed {
        cfg.simulation.seed = s;
    }
    if let Some(t) = ov.threads {
        cfg.simulation.threads = t;
    }
    if let Some(c) = cfg.command.filter(|c| *c != cmd) {
        return Err(CliError::Schema {
            path: "command".into(),
            message: format!("config is for `{}`, invoked as `{}`", c.as_str(), cmd.as_str()),
        });
    }
    cfg.command = Some(cmd);
    cfg.output = Some(out_dir.display().to_string());
    cfg.validate(cmd)?;

    let threads = cfg.simulation.threads;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    let output = pool.install(|| commands::run(cmd, &cfg))?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(out_dir.display(), e))?;
    remove_previous_outputs(&out_dir)?;
    let mut files = Vec::with_capacity(output.files.len());
    for (name, data) in &output.files {
        let path = out_dir.join(name);
        std::fs::write(&path, data).map_err(|e| CliError::io(path.display(), e))?;
        files.push(FileEntry::of(name, data));
    }
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        tool: "wrk".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd,
        seed: cfg.simulation.seed,
        threads,
        wall_time_s: wall,
        conventions: commands::conventions(cmd),
        config: cfg,
        files,
    };
    let mpath = out_dir.join(MANIFEST_NAME);
    std::fs::write(&mpath, manifest.to_json_pretty() + "\n").map_err(|e| CliError::io(mpath.display(), e))?;
    if let Some(msg) = output.failure {
        return Err(CliError::Numerical(msg));
    }
    Ok(RunResult { out_dir, manifest })
}

/// Deletes the files recorded by an earlier manifest in `dir`, so the new
/// manifest covers the directory.
fn remove_previous_outputs(dir: &Path) -> Result<(), CliError> {
    let mpath = dir.join(MANIFEST_NAME);
    let Ok(text) = std::fs::read_to_string(&mpath) else {
        return Ok(());
    };
    if let Ok(old) = Manifest::from_json_str(&text) {
        for f in old.files {
            let p = dir.join(&f.path);
            if p.is_file() {
                std::fs::remove_file(&p).map_err(|e| CliError::io(p.display(), e))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ReplayReport {
    pub out_dir: String,
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.extra.is_empty()
    }
}

/// Re-runs the configuration echoed in a manifest and compares checksums.
/// The seed and thread count come from the manifest unless overridden.
pub fn replay(manifest_path: &Path, ov: &Overrides) -> Result<ReplayReport, CliError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| CliError::io(manifest_path.display(), e))?;
    let old = Manifest::from_json_str(&text)?;
    let mut cfg = old.config.clone();
    if ov.out.is_some() {
        cfg.output = None;
    }
    let res = execute(old.command, cfg, ov)?;
    let want: BTreeMap<&str, &str> = old.files.iter().map(|f| (f.path.as_str(), f.sha256.as_str())).collect();
    let got: BTreeMap<&str, &str> = res.manifest.files.iter().map(|f| (f.path.as_str(), f.sha256.as_str())).collect();
    let mut rep = ReplayReport {
        out_dir: res.out_dir.display().to_string(),
        matched: vec![],
        mismatched: vec![],
        missing: vec![],
        extra: vec![],
    };
    for (name, digest) in &want {
        match got.get(name) {
            Some(d) if d == digest => rep.matched.push(name.to_string()),
            Some(_) => rep.mismatched.push(name.to_string()),
            None => rep.missing.push(name.to_string()),
        }
    }
    rep.extra = got.keys().filter(|k| !want.contains_key(*k)).map(|k| k.to_string()).collect();
    Ok(rep)
}
