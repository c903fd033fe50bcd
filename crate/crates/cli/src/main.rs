use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fuvar_cli::commands::{self, BandSelection, FuseInputs};
use fuvar_cli::config::Settings;
use fuvar_cli::error::{CliError, CliResult};
use fuvar_cli::pipeline::{SweepParam, WAVELENGTH_RANGE};

#[derive(Parser)]
#[command(name = "fuvar", version, about = "Hyperspectral/multispectral fusion under spectral variability")]
struct Cli {
    /// Settings file with one `key=value` per line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for scene synthesis and endmember extraction.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct SceneArgs {
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    materials: Option<usize>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    decimation: Option<usize>,
    #[arg(long)]
    decimation_phase: Option<usize>,
    #[arg(long)]
    ms_bands: Option<usize>,
    #[arg(long)]
    snr_hs_db: Option<f64>,
    #[arg(long)]
    snr_ms_db: Option<f64>,
    #[arg(long)]
    psi_breakpoints: Option<usize>,
    #[arg(long)]
    psi_amplitude: Option<f64>,
    #[arg(long)]
    grf_smoothness: Option<f64>,
    #[arg(long)]
    grf_contrast: Option<f64>,
}

#[derive(Args, Default)]
struct SolverArgs {
    #[arg(long)]
    endmembers: Option<usize>,
    #[arg(long)]
    lambda_a: Option<f64>,
    #[arg(long)]
    lambda_1: Option<f64>,
    #[arg(long)]
    lambda_2: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    outer_max_iters: Option<usize>,
    #[arg(long)]
    outer_rel_tol: Option<f64>,
    #[arg(long)]
    admm_max_iters: Option<usize>,
    #[arg(long)]
    admm_rel_tol: Option<f64>,
    #[arg(long)]
    freeze_psi: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene and its observations.
    Synth {
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Extract endmembers and initial abundances from an HS cube.
    Init {
        #[arg(long)]
        yh: PathBuf,
        #[arg(long)]
        endmembers: Option<usize>,
        #[arg(long)]
        decimation: Option<usize>,
        #[arg(long)]
        decimation_phase: Option<usize>,
    },
    /// Fuse an HS and an MS cube.
    Fuse {
        #[arg(long)]
        yh: PathBuf,
        #[arg(long)]
        ym: PathBuf,
        /// Spectral response, `L_m x L_h` CSV.
        #[arg(long)]
        srf: PathBuf,
        /// Endmember spectra, `L_h x P` CSV. Extracted from the HS cube if absent.
        #[arg(long = "endmembers-csv")]
        endmembers_csv: Option<PathBuf>,
        #[arg(long)]
        decimation_phase: Option<usize>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Quality metrics of an estimate against a reference cube.
    Eval {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Coarse pixel count for ERGAS; defaults to pixels / decimation^2.
        #[arg(long)]
        coarse_pixels: Option<usize>,
    },
    /// Write a three-band PNG composite.
    Render {
        #[arg(long)]
        cube: PathBuf,
        /// Band indices `r,g,b`.
        #[arg(long, value_delimiter = ',', conflicts_with = "wavelengths")]
        bands: Option<Vec<usize>>,
        /// Wavelengths in micrometres `r,g,b`.
        #[arg(long, value_delimiter = ',')]
        wavelengths: Option<Vec<f64>>,
        #[arg(long, default_value_t = WAVELENGTH_RANGE.0)]
        wl_start: f64,
        #[arg(long, default_value_t = WAVELENGTH_RANGE.1)]
        wl_end: f64,
        /// PNG path; defaults to `<out>/composite.png`.
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Synthetic experiment: FuVar against the frozen-scaling ablation.
    Example1 {
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// PSNR of the HS estimate while one regularization weight is scaled.
    Sweep {
        /// One of lambda_a, lambda_1, lambda_2.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100")]
        multipliers: Vec<f64>,
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn set<T: ToString>(s: &mut Settings, key: &str, v: Option<T>) -> CliResult<()> {
    match v {
        Some(v) => s.set(key, &v.to_string()),
        None => Ok(()),
    }
}

impl SceneArgs {
    fn apply(&self, s: &mut Settings) -> CliResult<()> {
        set(s, "rows", self.rows)?;
        set(s, "cols", self.cols)?;
        set(s, "materials", self.materials)?;
        set(s, "bands", self.bands)?;
        set(s, "decimation", self.decimation)?;
        set(s, "decimation_phase", self.decimation_phase)?;
        set(s, "ms_bands", self.ms_bands)?;
        set(s, "snr_hs_db", self.snr_hs_db)?;
        set(s, "snr_ms_db", self.snr_ms_db)?;
        set(s, "psi_breakpoints", self.psi_breakpoints)?;
        set(s, "psi_amplitude", self.psi_amplitude)?;
        set(s, "grf_smoothness", self.grf_smoothness)?;
        set(s, "grf_contrast", self.grf_contrast)
    }
}

impl SolverArgs {
    fn apply(&self, s: &mut Settings) -> CliResult<()> {
        set(s, "endmembers", self.endmembers)?;
        set(s, "lambda_a", self.lambda_a)?;
        set(s, "lambda_1", self.lambda_1)?;
        set(s, "lambda_2", self.lambda_2)?;
        set(s, "rho", self.rho)?;
        set(s, "outer_max_iters", self.outer_max_iters)?;
        set(s, "outer_rel_tol", self.outer_rel_tol)?;
        set(s, "admm_max_iters", self.admm_max_iters)?;
        set(s, "admm_rel_tol", self.admm_rel_tol)?;
        if self.freeze_psi {
            s.solver.freeze_psi = true;
        }
        Ok(())
    }
}

fn run(cli: Cli, command_line: &str) -> CliResult<()> {
    let mut s = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    if let Some(seed) = cli.seed {
        s.set_seed(seed);
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Synth { scene } => {
            scene.apply(&mut s)?;
            commands::cmd_synth(&s, out, command_line)?;
        }
        Command::Init { yh, endmembers, decimation, decimation_phase } => {
            set(&mut s, "endmembers", endmembers)?;
            set(&mut s, "decimation", decimation)?;
            set(&mut s, "decimation_phase", decimation_phase)?;
            commands::cmd_init(&s, &yh, out, command_line)?;
        }
        Command::Fuse { yh, ym, srf, endmembers_csv, decimation_phase, solver } => {
            set(&mut s, "decimation_phase", decimation_phase)?;
            solver.apply(&mut s)?;
            let inputs = FuseInputs { yh: &yh, ym: &ym, srf: &srf, endmembers: endmembers_csv.as_deref() };
            commands::cmd_fuse(&s, &inputs, out, command_line)?;
        }
        Command::Eval { reference, estimate, coarse_pixels } => {
            commands::cmd_eval(&reference, &estimate, coarse_pixels, &s)?;
        }
        Command::Render { cube, bands, wavelengths, wl_start, wl_end, png } => {
            let three = |n: usize| match n {
                3 => Ok(()),
                _ => Err(CliError::Usage(format!("expected 3 comma-separated values, got {n}"))),
            };
            let sel = match (bands, wavelengths) {
                (Some(b), None) => {
                    three(b.len())?;
                    BandSelection::Indices([b[0], b[1], b[2]])
                }
                (None, Some(w)) => {
                    three(w.len())?;
                    BandSelection::Wavelengths([w[0], w[1], w[2]], (wl_start, wl_end))
                }
                _ => return Err(CliError::Usage("give either --bands or --wavelengths".into())),
            };
            let png = png.unwrap_or_else(|| out.join("composite.png"));
            commands::cmd_render(&cube, &sel, &png)?;
        }
        Command::Example1 { scene, solver } => {
            scene.apply(&mut s)?;
            solver.apply(&mut s)?;
            commands::cmd_example1(&s, out, command_line)?;
        }
        Command::Sweep { param, multipliers, scene, solver } => {
            scene.apply(&mut s)?;
            solver.apply(&mut s)?;
            let param = SweepParam::parse(&param)?;
            commands::cmd_sweep(&s, param, &multipliers, out, command_line)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, &command_line) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fuvar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
