use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use kepler_averaging::config::{load_forcing, ReportFormat, RunConfig};
use kepler_averaging::continuation::ContinuationConfig;
use kepler_averaging::pipeline::{self, default_sweep};
use kepler_averaging::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_CIRCULAR: u8 = 2;
const EXIT_NO_POINTS: u8 = 3;
const EXIT_NO_BRANCH: u8 = 4;
const EXIT_MISMATCH: u8 = 5;

#[derive(Parser)]
#[command(
    name = "kepler-averaging",
    version,
    about = "Periodic orbits of the forced planar Kepler problem"
)]
struct Cli {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Forcing file; overrides the forcing in --config.
    #[arg(long, global = true)]
    forcing: Option<PathBuf>,
    /// Winding number; overrides the config.
    #[arg(long = "N", global = true, allow_negative_numbers = true)]
    n: Option<i64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<ReportFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form analysis at circular orbits (linear forcing only).
    Circular,
    /// Critical points of the averaged function.
    Average,
    /// Continue a periodic orbit from every critical point and classify it.
    Continue,
    /// Sweep p(t) = e^(it) + a e^(-it) across |a| = 4 at N = 1.
    ReproducePaper,
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match (&cli.config, &cli.forcing) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(path)) => RunConfig::new(load_forcing(path)?),
        (None, None) => {
            return Err(Error::Config(
                "either --config or --forcing is required".into(),
            ))
        }
    };
    if let Some(path) = &cli.forcing {
        cfg.forcing = load_forcing(path)?;
    }
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(f) = cli.format {
        cfg.report_format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() {
    let Ok(v) = std::env::var("KEPLER_AVG_THREADS") else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("could not size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring KEPLER_AVG_THREADS={v:?}"),
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Circular => {
            let cfg = build_config(cli)?;
            let out = match pipeline::run_circular(&cfg) {
                Ok(o) => o,
                Err(e @ (Error::OffManifold { .. } | Error::DegenerateEquator)) => {
                    eprintln!("error: {e}");
                    eprintln!("the closed-form analysis needs c_0 = c_2N = 0 and c_N != 0");
                    return Ok(EXIT_CIRCULAR);
                }
                Err(e) => return Err(e),
            };
            print!("{}", pipeline::circular_text(&out));
            report(&pipeline::write_circular(
                &out,
                &cfg.output_dir,
                cfg.report_format,
            )?);
            Ok(0)
        }
        Command::Average => {
            let cfg = build_config(cli)?;
            let out = pipeline::run_average(&cfg)?;
            print!("{}", pipeline::average_text(&out));
            report(&pipeline::write_average(
                &out,
                &cfg.output_dir,
                cfg.report_format,
            )?);
            if out.critical_points.is_empty() {
                if out.degenerate_continuum {
                    eprintln!("degenerate: gradient vanishes identically");
                } else {
                    eprintln!("no critical points found");
                }
                return Ok(EXIT_NO_POINTS);
            }
            Ok(0)
        }
        Command::Continue => {
            let cfg = build_config(cli)?;
            let out = pipeline::run_continue(&cfg)?;
            print!("{}", pipeline::continue_text(&out));
            report(&pipeline::write_continue(
                &out,
                &cfg.output_dir,
                cfg.report_format,
            )?);
            if out.branches.is_empty() {
                eprintln!("no critical points to continue");
                return Ok(EXIT_NO_POINTS);
            }
            Ok(if out.completed() > 0 {
                0
            } else {
                EXIT_NO_BRANCH
            })
        }
        Command::ReproducePaper => {
            // a config, when given, only supplies ε grid and integrator settings
            let (eps, cc, dir, format) = match &cli.config {
                Some(p) => {
                    let cfg = RunConfig::load(p)?;
                    (
                        cfg.eps_grid.clone(),
                        cfg.continuation(),
                        cfg.output_dir,
                        cfg.report_format,
                    )
                }
                None => (
                    kepler_averaging::continuation::default_eps_grid(),
                    ContinuationConfig::default(),
                    PathBuf::from("out"),
                    ReportFormat::Text,
                ),
            };
            let dir = cli.out.clone().unwrap_or(dir);
            let format = cli.format.unwrap_or(format);
            let r = pipeline::reproduce_paper(&default_sweep(), &eps, &cc)?;
            print!("{}", pipeline::reproduce_text(&r));
            report(&pipeline::write_reproduce(&r, &dir, format)?);
            Ok(if r.mismatches > 0 { EXIT_MISMATCH } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
