//! `a2t` command line.

mod args;
mod commands;
mod io;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;

pub use args::Cli;
use args::Command;

use crate::manifest::{sidecar, RunManifest};
use crate::{Result, ServiceError};

/// Manifest under construction for the current run.
pub(crate) struct Run {
    pub manifest: RunManifest,
    explicit_path: Option<PathBuf>,
    primary: Option<PathBuf>,
}

impl Run {
    pub fn set(&mut self, key: &str, value: impl serde::Serialize) {
        self.manifest.set(key, value);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.input(path)
    }

    /// Record an output; the first one decides the default manifest location.
    pub fn output(&mut self, path: &Path) -> Result<()> {
        if self.primary.is_none() {
            self.primary = Some(path.to_path_buf());
        }
        self.manifest.output(path)
    }

    /// Default location for runs without file outputs.
    pub fn fallback_location(&mut self, path: PathBuf) {
        if self.primary.is_none() {
            self.primary = Some(path);
        }
    }

    fn finish(self, command: &str) -> Result<()> {
        let path = match (self.explicit_path, self.primary) {
            (Some(p), _) => p,
            (None, Some(p)) if p.is_dir() => p.join("run.manifest.json"),
            (None, Some(p)) => sidecar(&p),
            (None, None) => PathBuf::from(format!("a2t-{}.manifest.json", command.replace(' ', "-"))),
        };
        self.manifest.write(&path)
    }
}

/// Parse and execute; returns the process exit status.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match execute(cli, args.into_iter().skip(1).collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, argv: Vec<String>) -> Result<()> {
    if let Command::Rerun(a) = &cli.command {
        return rerun(&a.manifest);
    }
    let name = cli.command.name();
    let mut run = Run {
        manifest: RunManifest::new(&name, argv),
        explicit_path: cli.manifest.clone(),
        primary: None,
    };
    commands::dispatch(cli.command, &mut run)?;
    run.finish(&name)
}

/// Re-execute a recorded command and check that its outputs are reproduced.
fn rerun(path: &Path) -> Result<()> {
    let recorded = RunManifest::load(path)?;
    for d in &recorded.inputs {
        let now = crate::manifest::FileDigest::of(&d.path)?;
        if now.sha256 != d.sha256 {
            return Err(ServiceError::Data(format!("input {} changed since the run", d.path.display())));
        }
    }
    let mut args = vec![crate::manifest::TOOL.to_string()];
    args.extend(recorded.argv.iter().cloned());
    let cli = Cli::try_parse_from(&args).map_err(|e| ServiceError::Usage(e.to_string()))?;
    execute(cli, recorded.argv.clone())?;
    let changed = recorded.changed_outputs();
    if !changed.is_empty() {
        let list: Vec<String> = changed.iter().map(|p| p.display().to_string()).collect();
        return Err(ServiceError::Data(format!("outputs differ from the manifest: {}", list.join(", "))));
    }
    println!("reproduced {} output(s)", recorded.outputs.len());
    Ok(())
}
