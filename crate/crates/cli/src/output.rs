use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use dotlab::table::Table;

/// Directory receiving one command's outputs; every file is written via a temporary and renamed.
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        write_atomic(&self.root.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write(name, &table.to_csv())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("part");
    fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

/// Everything needed to re-run a command: its argument vector and resolved seed.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: String,
    /// Arguments after the program name, exactly as given.
    pub args: Vec<String>,
    pub seed: u64,
    pub output_dir: String,
    pub version: String,
    pub duration_s: f64,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn write(out: &OutputDir, command: &str, config: &str, args: Vec<String>, seed: u64, started: Instant) -> Result<()> {
        let m = RunManifest {
            command: command.to_string(),
            config: config.to_string(),
            args,
            seed,
            output_dir: out.root().display().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_s: started.elapsed().as_secs_f64(),
            files: out.files().to_vec(),
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        write_atomic(&out.root().join("manifest.json"), &text)
    }
}
