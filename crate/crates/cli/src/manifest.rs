use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Record of a completed run. It is written after every artifact, so its
/// presence means the run finished.
pub struct RunManifest {
    subcommand: &'static str,
    config: Vec<(String, String)>,
    seed: Option<u64>,
    artifacts: Vec<PathBuf>,
    started_unix: u64,
    clock: Instant,
}

impl RunManifest {
    pub fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            config: Vec::new(),
            seed: None,
            artifacts: Vec::new(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            clock: Instant::now(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.to_path_buf());
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::new();
        out.push_str(&format!("subcommand = {}\n", self.subcommand));
        out.push_str(&format!("version = {}\n", env!("CARGO_PKG_VERSION")));
        if let Some(seed) = self.seed {
            out.push_str(&format!("seed = {seed}\n"));
        }
        out.push_str(&format!("started_unix = {}\n", self.started_unix));
        out.push_str(&format!(
            "wall_clock_seconds = {:.3}\n",
            self.clock.elapsed().as_secs_f64()
        ));
        for (k, v) in &self.config {
            out.push_str(&format!("config.{k} = {v}\n"));
        }
        for a in &self.artifacts {
            out.push_str(&format!("artifact = {}\n", a.display()));
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())
    }
}
