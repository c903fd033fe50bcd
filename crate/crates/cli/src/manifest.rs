//! Record of one run: what was asked, what was read, what was written.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, Default)]
pub struct RunManifest {
    pub command_line: String,
    pub config: Vec<(String, String)>,
    /// `(path, sha256)` of every input file.
    pub inputs: Vec<(PathBuf, String)>,
    pub outputs: Vec<PathBuf>,
    pub wall_time: Duration,
    /// Extra `key=value` lines, such as the wavelength grid.
    pub extra: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command_line: String, config: Vec<(String, String)>) -> Self {
        Self { command_line, config, ..Self::default() }
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        let hash = sha256_file(path)?;
        self.inputs.push((path.to_path_buf(), hash));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("command={}\n", self.command_line));
        s.push_str(&format!("version={}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("wall_time_s={:.3}\n", self.wall_time.as_secs_f64()));
        for (k, v) in &self.config {
            s.push_str(&format!("config.{k}={v}\n"));
        }
        for (k, v) in &self.extra {
            s.push_str(&format!("{k}={v}\n"));
        }
        for (p, h) in &self.inputs {
            s.push_str(&format!("input.{}={h}\n", p.display()));
        }
        for p in &self.outputs {
            s.push_str(&format!("output={}\n", p.display()));
        }
        s
    }

    /// Writes `manifest.txt` into `dir` after checking that every listed
    /// output exists. The manifest lists itself last.
    pub fn write(&mut self, dir: &Path) -> CliResult<PathBuf> {
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(CliError::Data(format!("output {} was not written", missing.display())));
        }
        let path = dir.join("manifest.txt");
        self.outputs.push(path.clone());
        fs::write(&path, self.render())?;
        Ok(path)
    }
}
