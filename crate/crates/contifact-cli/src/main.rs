//! Command-line driver: factorize, verify, synth, convergence, transform.
//!
//! Exit codes: 0 success, 2 when the density fails the log-integral
//! factorability condition, 3 when the completion solver gives up, 1 for
//! every I/O or validation problem. Errors go to stderr as one JSON object.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use contifact::config::RunConfig;
use contifact::error::Error;
use contifact::grid::Grid;
use contifact::io::{
    export_matrix_csv, export_samples_csv, read_density, read_matrix, write_density,
    write_matrix, write_text,
};
use contifact::oracles::{gaussian_density, preset, synth_density, PRESET_NAMES};
use contifact::pipeline::{
    factorize, factorize_sweep, verify_factorization, FactorizationReport,
};
use contifact::transforms::{hilbert, project_pm};
use contifact::{fourier_forward, fourier_inverse};

#[derive(Parser)]
#[command(
    name = "contifact",
    version,
    about = "Approximate spectral factorization of matrix densities on the real line"
)]
struct Cli {
    /// JSON run configuration; individual flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an approximate spectral factor of a density file.
    Factorize {
        input: PathBuf,
        /// Factor file to write; `.bin` selects the binary encoding.
        #[arg(long)]
        output: PathBuf,
        /// Metrics report path; defaults next to the output.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Spectral cells per completion step; repeat the flag to sweep.
        #[arg(long)]
        bins: Vec<usize>,
        /// Fixed spectral support half-width instead of the automatic one.
        #[arg(long)]
        support_b: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        leak_tol: Option<f64>,
    },
    /// Check a factor against a density and write the metrics report.
    Verify {
        density: PathBuf,
        factor: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write a named synthetic density and, when available, its exact factor.
    Synth {
        /// One of: scalar, rational2, twisted2, cross2, lower3, gaussian.
        preset: String,
        #[arg(long)]
        output: PathBuf,
        /// Exact factor output; not available for gaussian.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Grid half-width; falls back to the config, then 256.
        #[arg(long)]
        window_t: Option<f64>,
        /// Sample count (power of two); falls back to the config, then 16384.
        #[arg(long)]
        samples: Option<usize>,
        /// Optional plot-data export of the density.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Factorize at several bin counts and write a CSV of the metrics.
    Convergence {
        input: PathBuf,
        /// CSV output path.
        #[arg(long)]
        output: PathBuf,
        /// Bin counts to run; defaults to 2 4 8 16.
        #[arg(long)]
        bins: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Apply a scalar transform to one entry of a matrix file.
    Transform {
        input: PathBuf,
        /// One of: forward, plus, minus, hilbert, roundtrip.
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value_t = 0)]
        col: usize,
        /// CSV output path.
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    init_threads();
    let matches = match Cli::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            emit_error(&e);
            exit_code_for(&e)
        }
    }
}

fn init_threads() {
    if let Ok(raw) = std::env::var("CONTIFACT_THREADS") {
        if let Ok(threads) = raw.parse::<usize>() {
            if threads >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}

fn exit_code_for(e: &Error) -> ExitCode {
    match e {
        Error::PaleyWienerDiverged { .. } => ExitCode::from(2),
        Error::SolverFailure { .. } => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidGrid(_) => "invalid_grid",
        Error::GridMismatch(_) => "grid_mismatch",
        Error::WrongDomain { .. } => "wrong_domain",
        Error::NotRealValued { .. } => "not_real_valued",
        Error::NotPositive { .. } => "not_positive",
        Error::OffLattice { .. } => "off_lattice",
        Error::MisalignedSupport { .. } => "misaligned_support",
        Error::LeakageTooLarge { .. } => "leakage_too_large",
        Error::PaleyWienerDiverged { .. } => "paley_wiener_diverged",
        Error::PivotFailure { .. } => "pivot_failure",
        Error::DegenerateCorner { .. } => "degenerate_corner",
        Error::SolverFailure { .. } => "solver_failure",
        Error::UnsupportedSize(_) => "unsupported_size",
        Error::Overflow(_) => "overflow",
        Error::Validation(_) => "validation",
        Error::Io(_) => "io",
        Error::Json(_) => "json",
    }
}

fn emit_error(e: &Error) {
    let detail = serde_json::json!({
        "error": error_kind(e),
        "detail": e.to_string(),
    });
    eprintln!("{detail}");
}

fn load_config(path: &Option<PathBuf>) -> contifact::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn default_report_path(output: &Path) -> PathBuf {
    output.with_extension("report.json")
}

fn write_report(path: &Path, report: &FactorizationReport) -> contifact::Result<()> {
    write_text(path, &serde_json::to_string_pretty(report)?)
}

fn run(cli: Cli) -> contifact::Result<()> {
    let mut config = load_config(&cli.config)?;
    match cli.command {
        Command::Factorize {
            input,
            output,
            report,
            bins,
            support_b,
            seed,
            leak_tol,
        } => {
            if !bins.is_empty() {
                config.bins = bins;
            }
            if support_b.is_some() {
                config.support_b = support_b;
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(l) = leak_tol {
                config.leak_tol = l;
            }
            config.validate()?;
            let density = read_density(&input)?;
            let (factor, reports) = if config.bins.len() == 1 {
                let (f, r) = factorize(&density, &config.pipeline_params(config.bins[0]))?;
                (f, vec![r])
            } else {
                let params = config.pipeline_params(config.bins[0]);
                factorize_sweep(&density, &config.bins, &params)?
            };
            let best = reports
                .iter()
                .min_by(|a, b| a.residual_l1.total_cmp(&b.residual_l1))
                .expect("at least one report");
            for step in &best.steps {
                if step.induction_defect > config.tol_tri {
                    eprintln!(
                        "warning: step m={} leading-block product defect {:.3e} exceeds tol_tri {:.3e}",
                        step.m, step.induction_defect, config.tol_tri
                    );
                }
            }
            write_matrix(&output, &factor)?;
            let report_path = report.unwrap_or_else(|| default_report_path(&output));
            write_report(&report_path, best)?;
            println!(
                "factor {} residual_l1 {:.3e} det_identity {:.3e} report {}",
                output.display(),
                best.residual_l1,
                best.det_identity,
                report_path.display()
            );
            Ok(())
        }
        Command::Verify {
            density,
            factor,
            report,
        } => {
            let s = read_density(&density)?;
            let f = read_matrix(&factor)?;
            let metrics = verify_factorization(&s, &f)?;
            let report_path = report.unwrap_or_else(|| default_report_path(&factor));
            write_report(&report_path, &metrics)?;
            println!(
                "residual_l1 {:.3e} det_identity {:.3e} report {}",
                metrics.residual_l1,
                metrics.det_identity,
                report_path.display()
            );
            Ok(())
        }
        Command::Synth {
            preset: name,
            output,
            oracle,
            window_t,
            samples,
            csv,
        } => {
            let t_half = window_t.or(config.window_t).unwrap_or(256.0);
            let n = samples.or(config.samples).unwrap_or(1 << 14);
            let grid = Grid::symmetric(t_half, n)?;
            let density = if name == "gaussian" {
                if oracle.is_some() {
                    return Err(Error::Validation(
                        "the gaussian preset has no factor to write: its log-integral diverges"
                            .into(),
                    ));
                }
                gaussian_density(grid, 1)?
            } else {
                let spec = preset(&name).ok_or_else(|| {
                    Error::Validation(format!(
                        "unknown preset {name:?}; available: {}, gaussian",
                        PRESET_NAMES.join(", ")
                    ))
                })?;
                let (s, a) = synth_density(&spec, grid)?;
                if let Some(path) = &oracle {
                    write_matrix(path, &a)?;
                }
                s
            };
            write_density(&output, &density)?;
            if let Some(path) = &csv {
                let as_matrix = contifact::MatrixFunction::new(
                    density.grid(),
                    density.r(),
                    density.values().to_vec(),
                )?;
                export_matrix_csv(path, &as_matrix)?;
            }
            println!(
                "density {} r {} n {} window {}",
                output.display(),
                density.r(),
                n,
                t_half
            );
            Ok(())
        }
        Command::Convergence {
            input,
            output,
            bins,
            seed,
        } => {
            if let Some(s) = seed {
                config.seed = s;
            }
            let list = if bins.is_empty() {
                vec![2, 4, 8, 16]
            } else {
                bins
            };
            config.bins = list.clone();
            config.validate()?;
            let density = read_density(&input)?;
            let mut csv = String::from("bins,residual_l1,row_analyticity,det_identity,wall_time_s\n");
            for &b in &list {
                let start = Instant::now();
                let (_, report) = factorize(&density, &config.pipeline_params(b))?;
                let elapsed = start.elapsed().as_secs_f64();
                let analyticity = report
                    .row_analyticity
                    .iter()
                    .copied()
                    .fold(0.0_f64, f64::max);
                csv.push_str(&format!(
                    "{b},{:.6e},{:.6e},{:.6e},{elapsed:.3}\n",
                    report.residual_l1, analyticity, report.det_identity
                ));
            }
            write_text(&output, &csv)?;
            println!("convergence table {}", output.display());
            Ok(())
        }
        Command::Transform {
            input,
            op,
            row,
            col,
            output,
        } => {
            let m = read_matrix(&input)?;
            if row >= m.r() || col >= m.r() {
                return Err(Error::Validation(format!(
                    "entry ({row}, {col}) outside a {0} x {0} matrix",
                    m.r()
                )));
            }
            let f = m.entry(row, col);
            let result = match op.as_str() {
                "forward" => fourier_forward(&f)?,
                "plus" => project_pm(&f)?.plus,
                "minus" => project_pm(&f)?.minus,
                "hilbert" => hilbert(&f)?,
                "roundtrip" => fourier_inverse(&fourier_forward(&f)?)?,
                other => {
                    return Err(Error::Validation(format!(
                        "unknown transform {other:?}; expected forward, plus, minus, hilbert, or roundtrip"
                    )))
                }
            };
            export_samples_csv(&output, &result)?;
            println!("transform {op} of entry ({row}, {col}) -> {}", output.display());
            Ok(())
        }
    }
}
