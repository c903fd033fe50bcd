//! One function per subcommand. Each writes its outputs and a manifest and
//! returns the manifest path.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fuvar::init::{initial_abundances, vca_extract};
use fuvar::io::{read_cube, read_matrix_csv, write_cube, write_matrix_csv};
use fuvar::metrics::{evaluate, MetricOptions, MetricReport};
use fuvar::solver::fuvar;
use fuvar::synth::build_scene;
use fuvar::{BlurKernel, Decimation, EndmemberMatrix, ImageCube, ObservationModel};

use crate::config::Settings;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::pipeline::{self, SweepParam, WAVELENGTH_RANGE};
use crate::render::{band_for_wavelength, render_composite};

fn manifest(command_line: &str, settings: &Settings) -> RunManifest {
    RunManifest::new(command_line.to_string(), settings.pairs())
}

fn finish(mut m: RunManifest, out: &Path, start: Instant) -> CliResult<PathBuf> {
    m.wall_time = start.elapsed();
    m.write(out)
}

pub fn cmd_synth(settings: &Settings, out: &Path, command_line: &str) -> CliResult<PathBuf> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let scene = build_scene(&settings.scene)?;
    let mut m = manifest(command_line, settings);
    for (name, cube) in [("yh", &scene.yh), ("ym", &scene.ym), ("zh", &scene.zh), ("zm", &scene.zm)] {
        let p = out.join(format!("{name}.cube"));
        write_cube(cube, &p)?;
        m.outputs.push(p);
    }
    for (name, mat) in [
        ("abundances", scene.abundances.matrix()),
        ("scaling", scene.scaling.matrix()),
        ("endmembers", scene.endmembers.matrix()),
        ("srf", &scene.model.srf),
    ] {
        let p = out.join(format!("{name}.csv"));
        write_matrix_csv(mat, &p)?;
        m.outputs.push(p);
    }
    let (lo, hi) = WAVELENGTH_RANGE;
    m.extra.push(("wavelength_start_um".into(), lo.to_string()));
    m.extra.push(("wavelength_end_um".into(), hi.to_string()));
    finish(m, out, start)
}

fn load_or_extract_endmembers(
    yh: &ImageCube,
    csv: Option<&Path>,
    settings: &Settings,
    m: &mut RunManifest,
) -> CliResult<EndmemberMatrix> {
    match csv {
        Some(p) => {
            m.add_input(p)?;
            Ok(EndmemberMatrix::new(read_matrix_csv(p)?)?)
        }
        None => Ok(vca_extract(&yh.to_band_matrix(), settings.solver.endmembers, settings.solver.rng_seed)?
            .endmembers),
    }
}

pub fn cmd_init(settings: &Settings, yh_path: &Path, out: &Path, command_line: &str) -> CliResult<PathBuf> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let mut m = manifest(command_line, settings);
    m.add_input(yh_path)?;
    let yh = read_cube(yh_path)?;
    let dec = Decimation::new(settings.scene.decimation, settings.scene.decimation_phase)?;
    let mh = load_or_extract_endmembers(&yh, None, settings, &mut m)?;
    let a0 = initial_abundances(&yh, &mh, dec)?;
    for (name, mat) in [("endmembers", mh.matrix()), ("abundances_init", a0.matrix())] {
        let p = out.join(format!("{name}.csv"));
        write_matrix_csv(mat, &p)?;
        m.outputs.push(p);
    }
    finish(m, out, start)
}

pub struct FuseInputs<'a> {
    pub yh: &'a Path,
    pub ym: &'a Path,
    pub srf: &'a Path,
    pub endmembers: Option<&'a Path>,
}

pub fn cmd_fuse(settings: &Settings, inputs: &FuseInputs, out: &Path, command_line: &str) -> CliResult<PathBuf> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let mut m = manifest(command_line, settings);
    for p in [inputs.yh, inputs.ym, inputs.srf] {
        m.add_input(p)?;
    }
    let yh = read_cube(inputs.yh)?;
    let ym = read_cube(inputs.ym)?;
    let srf = read_matrix_csv(inputs.srf)?;
    if ym.rows() % yh.rows() != 0 || ym.rows() / yh.rows() != ym.cols() / yh.cols() {
        return Err(CliError::Data(format!(
            "MS grid {}x{} is not an integer multiple of HS grid {}x{}",
            ym.rows(),
            ym.cols(),
            yh.rows(),
            yh.cols()
        )));
    }
    let dec = Decimation::new(ym.rows() / yh.rows(), settings.scene.decimation_phase)?;
    let model = ObservationModel::new(BlurKernel::default_psf(), dec, srf, f64::INFINITY, f64::INFINITY)?;
    let mh = load_or_extract_endmembers(&yh, inputs.endmembers, settings, &mut m)?;
    let r = fuvar(&yh, &ym, &mh, &model, &settings.solver)?;

    let mut outputs = vec![];
    for (name, cube) in [("zh", &r.zh), ("zm", &r.zm)] {
        let p = out.join(format!("{name}.cube"));
        write_cube(cube, &p)?;
        outputs.push(p);
    }
    for (name, mat) in [("abundances", r.abundances.matrix()), ("scaling", r.scaling.matrix()), ("endmembers", mh.matrix())]
    {
        let p = out.join(format!("{name}.csv"));
        write_matrix_csv(mat, &p)?;
        outputs.push(p);
    }
    let rep = &r.report;
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let report = [
        format!("outer_iters={}", rep.outer_iters),
        format!("initial_objective={}", rep.initial_objective),
        format!("final_objective={}", rep.objectives.last().copied().unwrap_or(rep.initial_objective)),
        format!("objectives={}", rep.objectives.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
        format!("rel_change_a={}", rep.rel_change_a),
        format!("rel_change_psi={}", rep.rel_change_psi),
        format!("admm_a_iters={}", join(&rep.admm_a_iters)),
        format!("admm_psi_iters={}", join(&rep.admm_psi_iters)),
        format!("wall_time_s={:.3}", rep.wall_time.as_secs_f64()),
    ]
    .join("\n");
    let p = out.join("report.txt");
    fs::write(&p, report + "\n")?;
    outputs.push(p);
    m.outputs = outputs;
    finish(m, out, start)
}

/// Metrics of `estimate` against `reference`; also prints them.
pub fn cmd_eval(reference: &Path, estimate: &Path, coarse_pixels: Option<usize>, settings: &Settings) -> CliResult<MetricReport> {
    let z = read_cube(reference)?;
    let zh = read_cube(estimate)?;
    let d = settings.scene.decimation;
    let n = coarse_pixels.unwrap_or(z.pixels() / (d * d));
    if n == 0 {
        return Err(CliError::Usage("coarse pixel count must be positive".into()));
    }
    let r = evaluate(&z, &zh, n, &MetricOptions::default())?;
    println!("psnr,sam,ergas,uiqi");
    println!("{},{},{},{}", r.psnr_db, r.sam_rad, r.ergas, r.uiqi);
    println!();
    println!("  PSNR   {:>12.4} dB", r.psnr_db);
    println!("  SAM    {:>12.6} rad  ({:.4} deg)", r.sam_rad, r.sam_rad.to_degrees());
    println!("  ERGAS  {:>12.6}", r.ergas);
    println!("  UIQI   {:>12.6}", r.uiqi);
    Ok(r)
}

pub enum BandSelection {
    Indices([usize; 3]),
    /// Wavelengths in micrometres on a linear grid `(start, end)`.
    Wavelengths([f64; 3], (f64, f64)),
}

pub fn cmd_render(cube_path: &Path, bands: &BandSelection, png: &Path) -> CliResult<()> {
    let cube = read_cube(cube_path)?;
    let idx = match bands {
        BandSelection::Indices(i) => *i,
        BandSelection::Wavelengths(w, (lo, hi)) => {
            let mut idx = [0; 3];
            for (i, wl) in idx.iter_mut().zip(w) {
                *i = band_for_wavelength(*wl, *lo, *hi, cube.bands())?;
            }
            idx
        }
    };
    if let Some(parent) = png.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    render_composite(&cube, idx, png)
}

pub fn cmd_example1(settings: &Settings, out: &Path, command_line: &str) -> CliResult<pipeline::Example1> {
    let start = Instant::now();
    let run = pipeline::run_example1(settings, out)?;
    let mut m = manifest(command_line, settings);
    m.outputs = run.outputs.clone();
    finish(m, out, start)?;
    for row in [&run.fuvar, &run.ablation] {
        println!(
            "{:<9} HS: PSNR {:.2} dB, SAM {:.3} deg, ERGAS {:.3}, UIQI {:.4} | MS: PSNR {:.2} dB, SAM {:.3} deg, ERGAS {:.3}, UIQI {:.4}",
            row.method,
            row.hs.psnr_db,
            row.hs.sam_rad.to_degrees(),
            row.hs.ergas,
            row.hs.uiqi,
            row.ms.psnr_db,
            row.ms.sam_rad.to_degrees(),
            row.ms.ergas,
            row.ms.uiqi
        );
    }
    Ok(run)
}

pub fn cmd_sweep(
    settings: &Settings,
    param: SweepParam,
    multipliers: &[f64],
    out: &Path,
    command_line: &str,
) -> CliResult<Vec<pipeline::SweepPoint>> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let prep = pipeline::prepare(settings)?;
    let points = pipeline::run_sweep(&prep, param, multipliers)?;
    let p = out.join(format!("sweep_{}.csv", param.name()));
    pipeline::write_sweep_csv(&points, &p)?;
    let mut m = manifest(command_line, settings);
    m.outputs.push(p);
    finish(m, out, start)?;
    for pt in &points {
        match &pt.psnr_hs {
            Ok(v) => println!("{} x{}: PSNR_HS {v:.3} dB", param.name(), pt.multiplier),
            Err(e) => eprintln!("{} x{}: failed: {e}", param.name(), pt.multiplier),
        }
    }
    Ok(points)
}
