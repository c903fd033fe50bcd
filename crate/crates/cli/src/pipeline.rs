//! Scene-to-metrics runs shared by `example1` and `sweep`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fuvar::init::{initial_abundances, vca_extract};
use fuvar::io::{write_cube, write_matrix_csv};
use fuvar::metrics::{evaluate, MetricOptions, MetricReport};
use fuvar::solver::{fuvar_from, FusionResult, Observations};
use fuvar::synth::{build_scene, Scene};
use fuvar::{AbundanceMap, EndmemberMatrix, FuvarConfig};

use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::render::{band_for_wavelength, render_composite};

/// Visible and infrared composites, in micrometres.
pub const COMPOSITES: [(&str, [f64; 3]); 2] = [("visible", [0.66, 0.56, 0.45]), ("infrared", [2.20, 1.50, 0.80])];
pub const WAVELENGTH_RANGE: (f64, f64) = (0.4, 2.5);

/// A synthesized scene with its observations and solver starting point.
pub struct Prepared {
    pub scene: Scene,
    pub endmembers: EndmemberMatrix,
    pub obs: Observations,
    pub a0: AbundanceMap,
    pub config: FuvarConfig,
}

pub fn prepare(settings: &Settings) -> CliResult<Prepared> {
    let scene = build_scene(&settings.scene)?;
    let config = settings.solver_for_scene();
    config.validate()?;
    let vca = vca_extract(&scene.yh.to_band_matrix(), config.endmembers, config.rng_seed)?;
    let a0 = initial_abundances(&scene.yh, &vca.endmembers, scene.model.decimation)?;
    let obs = Observations::new(&scene.yh, &scene.ym, &scene.model)?;
    Ok(Prepared { scene, endmembers: vca.endmembers, obs, a0, config })
}

impl Prepared {
    pub fn run(&self, config: &FuvarConfig) -> CliResult<FusionResult> {
        Ok(fuvar_from(&self.obs, &self.endmembers, &self.a0, config)?)
    }

    /// Metrics of `Z_h` and `Z_m` estimates against the ground truth.
    pub fn score(&self, r: &FusionResult) -> CliResult<(MetricReport, MetricReport)> {
        let opts = MetricOptions::default();
        let n = self.obs.coarse_pixels();
        Ok((evaluate(&self.scene.zh, &r.zh, n, &opts)?, evaluate(&self.scene.zm, &r.zm, n, &opts)?))
    }
}

#[derive(Debug, Clone)]
pub struct MethodRow {
    pub method: String,
    pub hs: MetricReport,
    pub ms: MetricReport,
}

pub const RESULTS_HEADER: [&str; 9] = [
    "method", "psnr_hs", "sam_hs_deg", "ergas_hs", "uiqi_hs", "psnr_ms", "sam_ms_deg", "ergas_ms", "uiqi_ms",
];

pub fn write_results_csv(rows: &[MethodRow], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        let mut rec = vec![r.method.clone()];
        for m in [&r.hs, &r.ms] {
            rec.extend([m.psnr_db, m.sam_rad.to_degrees(), m.ergas, m.uiqi].iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub struct Example1 {
    pub fuvar: MethodRow,
    pub ablation: MethodRow,
    pub fuvar_result: FusionResult,
    pub ablation_result: FusionResult,
    pub outputs: Vec<PathBuf>,
    pub wall_time: Duration,
}

/// Synthesizes the scene, runs FuVar and the frozen-scaling ablation, and
/// writes cubes, `results.csv` and composites into `out`.
pub fn run_example1(settings: &Settings, out: &Path) -> CliResult<Example1> {
    let start = Instant::now();
    std::fs::create_dir_all(out)?;
    let prep = prepare(settings)?;
    let full = prep.run(&FuvarConfig { freeze_psi: false, ..prep.config.clone() })?;
    let frozen = prep.run(&FuvarConfig { freeze_psi: true, ..prep.config.clone() })?;
    let (fh, fm) = prep.score(&full)?;
    let (ah, am) = prep.score(&frozen)?;
    let rows = [
        MethodRow { method: "FuVar".into(), hs: fh, ms: fm },
        MethodRow { method: "ablation".into(), hs: ah, ms: am },
    ];

    let mut outputs = Vec::new();
    let mut keep = |p: PathBuf| {
        outputs.push(p.clone());
        p
    };
    write_results_csv(&rows, &keep(out.join("results.csv")))?;
    write_cube(&prep.scene.zh, keep(out.join("truth_zh.cube")))?;
    write_cube(&prep.scene.zm, keep(out.join("truth_zm.cube")))?;
    write_cube(&full.zh, keep(out.join("fuvar_zh.cube")))?;
    write_cube(&full.zm, keep(out.join("fuvar_zm.cube")))?;
    write_cube(&frozen.zh, keep(out.join("ablation_zh.cube")))?;
    write_cube(&frozen.zm, keep(out.join("ablation_zm.cube")))?;
    write_matrix_csv(full.abundances.matrix(), keep(out.join("fuvar_abundances.csv")))?;
    write_matrix_csv(full.scaling.matrix(), keep(out.join("fuvar_scaling.csv")))?;
    write_matrix_csv(prep.endmembers.matrix(), keep(out.join("endmembers.csv")))?;

    let bands = prep.scene.spec.bands;
    for (name, wl) in COMPOSITES {
        let mut idx = [0; 3];
        for (i, w) in idx.iter_mut().zip(wl) {
            *i = band_for_wavelength(w, WAVELENGTH_RANGE.0, WAVELENGTH_RANGE.1, bands)?;
        }
        for (label, cube) in [("truth", &prep.scene.zh), ("fuvar", &full.zh), ("ablation", &frozen.zh)] {
            render_composite(cube, idx, &keep(out.join(format!("{label}_{name}.png"))))?;
        }
    }
    let [fuvar, ablation] = rows;
    Ok(Example1 { fuvar, ablation, fuvar_result: full, ablation_result: frozen, outputs, wall_time: start.elapsed() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    LambdaA,
    Lambda1,
    Lambda2,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::LambdaA => "lambda_a",
            SweepParam::Lambda1 => "lambda_1",
            SweepParam::Lambda2 => "lambda_2",
        }
    }

    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "lambda_a" => Ok(SweepParam::LambdaA),
            "lambda_1" => Ok(SweepParam::Lambda1),
            "lambda_2" => Ok(SweepParam::Lambda2),
            _ => Err(CliError::Usage(format!("unknown sweep parameter {s:?}"))),
        }
    }

    fn scaled(self, base: &FuvarConfig, multiplier: f64) -> FuvarConfig {
        let mut c = base.clone();
        match self {
            SweepParam::LambdaA => c.lambda_a *= multiplier,
            SweepParam::Lambda1 => c.lambda_1 *= multiplier,
            SweepParam::Lambda2 => c.lambda_2 *= multiplier,
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub multiplier: f64,
    /// `Z_h` PSNR, or the reason the point failed.
    pub psnr_hs: Result<f64, String>,
}

/// One fusion per multiplier of `param`, all from the same prepared scene.
/// A failing point is recorded and the sweep continues.
pub fn run_sweep(prep: &Prepared, param: SweepParam, multipliers: &[f64]) -> CliResult<Vec<SweepPoint>> {
    if multipliers.is_empty() {
        return Err(CliError::Usage("sweep grid is empty".into()));
    }
    Ok(multipliers
        .iter()
        .map(|&m| {
            let psnr_hs = prep
                .run(&param.scaled(&prep.config, m))
                .and_then(|r| prep.score(&r))
                .map(|(hs, _)| hs.psnr_db)
                .map_err(|e| e.to_string());
            SweepPoint { multiplier: m, psnr_hs }
        })
        .collect())
}

pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["multiplier", "psnr_hs", "status"])?;
    for p in points {
        match &p.psnr_hs {
            Ok(v) => w.write_record([p.multiplier.to_string(), v.to_string(), "ok".into()])?,
            Err(e) => w.write_record([p.multiplier.to_string(), String::new(), e.clone()])?,
        }
    }
    w.flush()?;
    Ok(())
}
