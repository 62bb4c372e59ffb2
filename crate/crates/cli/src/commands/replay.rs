use std::path::{Path, PathBuf};

use clap::Parser;

use crate::error::{CliError, Result};
use crate::manifest::{digest_file, digest_without_wall_time, Manifest};
use crate::{dispatch, Cli, Context, ReplayArgs};

fn absolute(p: &Path) -> Result<PathBuf> {
    if p.is_absolute() {
        return Ok(p.to_path_buf());
    }
    let cwd = std::env::current_dir().map_err(|e| CliError::io("current directory", e))?;
    Ok(cwd.join(p))
}

/// The recorded argv with its `--out` pointed at `out`.
fn redirect(argv: &[String], out: &Path) -> Vec<String> {
    let mut next = Vec::with_capacity(argv.len() + 2);
    let mut skip = false;
    for a in argv {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") {
            continue;
        }
        next.push(a.clone());
    }
    next.push("--out".into());
    next.push(out.display().to_string());
    next
}

pub fn run(args: &ReplayArgs) -> Result<String> {
    let manifest = Manifest::load(&args.manifest)?;
    let out = absolute(&args.out)?;

    for input in &manifest.inputs {
        let now = digest_file(&input.path)?;
        if now != input.sha256 {
            return Err(CliError::Mismatch(format!(
                "input {} ({}) changed since the run",
                input.role,
                input.path.display()
            )));
        }
    }

    let argv = redirect(&manifest.args.argv, &out);
    let cli = Cli::try_parse_from(&argv)
        .map_err(|e| CliError::Schema(format!("manifest argv does not parse: {e}")))?;
    if matches!(cli.command, crate::Command::Replay(_)) {
        return Err(CliError::Schema("manifest records a replay".into()));
    }
    std::env::set_current_dir(&manifest.args.cwd)
        .map_err(|e| CliError::io(manifest.args.cwd.display(), e))?;
    let ctx = Context {
        invocation: crate::manifest::Invocation {
            cwd: manifest.args.cwd.clone(),
            argv: argv.clone(),
        },
        thread_cap: None,
    };
    dispatch(cli, &ctx)?;

    let mut mismatched = Vec::new();
    for a in &manifest.artifacts {
        let path = out.join(&a.path);
        let bytes = std::fs::read(&path).map_err(|e| CliError::io(path.display(), e))?;
        let same = match &a.sha256_without_wall_time {
            Some(want) => digest_without_wall_time(&bytes).as_ref() == Some(want),
            None => crate::manifest::sha256_hex(&bytes) == a.sha256,
        };
        if !same {
            mismatched.push(a.path.clone());
        }
    }
    if !mismatched.is_empty() {
        return Err(CliError::Mismatch(format!(
            "artifacts differ: {}",
            mismatched.join(", ")
        )));
    }
    Ok(format!(
        "replayed={} artifacts_matched={}",
        manifest.command,
        manifest.artifacts.len()
    ))
}
