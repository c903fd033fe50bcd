//! `key=value` settings. Later sources override earlier ones: built-in
//! defaults, then a `--config` file, then command-line flags.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use fuvar::synth::SceneSpec;
use fuvar::FuvarConfig;

use crate::error::{CliError, CliResult};

/// Scene and solver parameters of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub scene: SceneSpec,
    pub solver: FuvarConfig,
    /// Whether `endmembers` was given explicitly. When it was not, commands
    /// that synthesize a scene use the scene's material count.
    pub endmembers_set: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self { scene: SceneSpec::default(), solver: FuvarConfig::default(), endmembers_set: false }
    }
}

/// Splits a config file into `(key, value)` pairs. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_pairs(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value, got {line:?}", n + 1)))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| CliError::Usage(format!("{key}: cannot parse {value:?}")))
}

impl Settings {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut s = Self::default();
        for (k, v) in parse_pairs(&text)? {
            s.set(&k, &v)?;
        }
        Ok(s)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.scene.rng_seed = seed;
        self.solver.rng_seed = seed;
    }

    pub fn set_endmembers(&mut self, p: usize) {
        self.solver.endmembers = p;
        self.endmembers_set = true;
    }

    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let (sc, so) = (&mut self.scene, &mut self.solver);
        match key {
            "rows" => sc.rows = parse(key, value)?,
            "cols" => sc.cols = parse(key, value)?,
            "materials" => sc.materials = parse(key, value)?,
            "bands" => sc.bands = parse(key, value)?,
            "decimation" => sc.decimation = parse(key, value)?,
            "decimation_phase" => sc.decimation_phase = parse(key, value)?,
            "ms_bands" => sc.ms_bands = parse(key, value)?,
            "snr_hs_db" => sc.snr_hs_db = parse(key, value)?,
            "snr_ms_db" => sc.snr_ms_db = parse(key, value)?,
            "psi_breakpoints" => sc.psi_breakpoints = parse(key, value)?,
            "psi_amplitude" => sc.psi_amplitude = parse(key, value)?,
            "grf_smoothness" => sc.grf_smoothness = parse(key, value)?,
            "grf_contrast" => sc.grf_contrast = parse(key, value)?,
            "seed" => self.set_seed(parse(key, value)?),
            "endmembers" => self.set_endmembers(parse(key, value)?),
            "lambda_a" => so.lambda_a = parse(key, value)?,
            "lambda_1" => so.lambda_1 = parse(key, value)?,
            "lambda_2" => so.lambda_2 = parse(key, value)?,
            "rho" => so.rho = parse(key, value)?,
            "outer_max_iters" => so.outer_max_iters = parse(key, value)?,
            "outer_rel_tol" => so.outer_rel_tol = parse(key, value)?,
            "admm_max_iters" => so.admm_max_iters = parse(key, value)?,
            "admm_rel_tol" => so.admm_rel_tol = parse(key, value)?,
            "freeze_psi" => so.freeze_psi = parse(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Solver configuration for a synthetic scene.
    pub fn solver_for_scene(&self) -> FuvarConfig {
        let mut c = self.solver.clone();
        if !self.endmembers_set {
            c.endmembers = self.scene.materials;
        }
        c
    }

    /// Every setting as `(key, value)`, in a fixed order.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let (sc, so) = (&self.scene, &self.solver);
        let v: Vec<(&str, String)> = vec![
            ("rows", sc.rows.to_string()),
            ("cols", sc.cols.to_string()),
            ("materials", sc.materials.to_string()),
            ("bands", sc.bands.to_string()),
            ("decimation", sc.decimation.to_string()),
            ("decimation_phase", sc.decimation_phase.to_string()),
            ("ms_bands", sc.ms_bands.to_string()),
            ("snr_hs_db", sc.snr_hs_db.to_string()),
            ("snr_ms_db", sc.snr_ms_db.to_string()),
            ("psi_breakpoints", sc.psi_breakpoints.to_string()),
            ("psi_amplitude", sc.psi_amplitude.to_string()),
            ("grf_smoothness", sc.grf_smoothness.to_string()),
            ("grf_contrast", sc.grf_contrast.to_string()),
            ("seed", sc.rng_seed.to_string()),
            ("endmembers", self.solver_for_scene().endmembers.to_string()),
            ("lambda_a", so.lambda_a.to_string()),
            ("lambda_1", so.lambda_1.to_string()),
            ("lambda_2", so.lambda_2.to_string()),
            ("rho", so.rho.to_string()),
            ("outer_max_iters", so.outer_max_iters.to_string()),
            ("outer_rel_tol", so.outer_rel_tol.to_string()),
            ("admm_max_iters", so.admm_max_iters.to_string()),
            ("admm_rel_tol", so.admm_rel_tol.to_string()),
            ("freeze_psi", so.freeze_psi.to_string()),
        ];
        v.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}
