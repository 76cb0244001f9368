use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

/// Files written by a run, removed again if the run fails.
#[derive(Debug, Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
}

impl Outputs {
    /// Writes `content` to `path`, or to standard output when `path` is `None`.
    pub fn emit(&mut self, path: Option<&Path>, content: &str) -> Result<()> {
        match path {
            Some(p) => self.write(p, content),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(content.as_bytes()).context("writing to standard output")?;
                Ok(())
            }
        }
    }

    pub fn write(&mut self, path: &Path, content: &str) -> Result<()> {
        self.claim(path);
        fs::write(path, content).with_context(|| format!("writing {}", path.display()))
    }

    /// Records a path that something else is about to write.
    pub fn claim(&mut self, path: &Path) {
        if !self.written.iter().any(|p| p == path) {
            self.written.push(path.to_path_buf());
        }
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn remove_all(&self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub artifacts: Vec<PathBuf>,
    pub wall_ms: u64,
    pub version: &'static str,
    pub jobs: usize,
}

impl RunManifest {
    pub fn new(
        command: &str,
        params: serde_json::Value,
        seed: Option<u64>,
        artifacts: &[PathBuf],
        started: Instant,
        jobs: usize,
    ) -> Self {
        Self {
            command: command.to_string(),
            params,
            seed,
            artifacts: artifacts.to_vec(),
            wall_ms: started.elapsed().as_millis() as u64,
            version: env!("CARGO_PKG_VERSION"),
            jobs,
        }
    }

    /// Writes to `explicit`, else next to the first artifact, else to
    /// standard error.
    pub fn emit(&self, explicit: Option<&Path>) -> Result<()> {
        let json = to_json(self)?;
        let target = explicit.map(Path::to_path_buf).or_else(|| {
            self.artifacts.first().map(|p| {
                let mut name = p.as_os_str().to_owned();
                name.push(".manifest.json");
                PathBuf::from(name)
            })
        });
        match target {
            Some(p) => fs::write(&p, json).with_context(|| format!("writing {}", p.display())),
            None => {
                eprint!("{json}");
                Ok(())
            }
        }
    }
}
