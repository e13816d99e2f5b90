//! Command-line front end: `spectrum`, `sweep`, `dressed`, `correlation`.

mod config;
mod output;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{parse_config, OutputPaths, RunConfig, SweepParameter, SweepSpec, SCHEMA_VERSION};
pub use output::{
    config_from_footer, emit_plot, footer, lines_csv, num, render_svg, spectrum_csv, Series, SPECTRUM_HEADER,
};

use crate::dressed::{mixing_angle, predicted_lines, rabi_splitting, DetuningConvention, AXIS_SIGN};
use crate::dynamics::CorrelationGrid;
use crate::error::{Error, Result};
use crate::hilbert::Truncation;
use crate::spectrum::{assemble, asymmetry_ratio, main_pair, simulate, SpectrumResult};

#[derive(Debug, Parser)]
#[command(name = "omtc", version, about = "Single-photon emission spectra of dipole-coupled atoms in an optomechanical cavity")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file with flat dotted keys (model.J = 0.5).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Main CSV output; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    output: Option<PathBuf>,

    /// Also draw the spectra as an SVG line plot.
    #[arg(long, global = true, value_name = "PATH")]
    svg: Option<PathBuf>,

    /// Worker threads for the grid fill and the detuning sweep.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Save the correlation grid for later re-sweeps.
    #[arg(long, global = true, value_name = "PATH")]
    dump_correlation: Option<PathBuf>,

    /// Sweep the filter over a saved grid instead of simulating.
    #[arg(long, global = true, value_name = "PATH")]
    load_correlation: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filtered spectrum for one parameter set.
    Spectrum,
    /// One spectrum per value of sweep.parameter, plus a summary table.
    Sweep,
    /// Dressed-state stick spectrum (branch, m, position, weight).
    Dressed,
    /// Compute the correlation grid and store it.
    Correlation,
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("omtc: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text)?;
    if let Some(p) = &cli.output {
        cfg.output.csv = Some(p.clone());
    }
    if let Some(p) = &cli.svg {
        cfg.output.svg = Some(p.clone());
    }
    if let Some(p) = &cli.dump_correlation {
        cfg.output.correlation_dump = Some(p.clone());
    }
    let threads = cli.threads.unwrap_or(0);
    if cli.threads == Some(0) {
        return Err(Error::config("--threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Spectrum => spectrum_command(&cfg, cli.load_correlation.as_deref()),
        Command::Sweep => {
            reject_load(cli)?;
            sweep_command(&cfg)
        }
        Command::Dressed => dressed_command(&cfg),
        Command::Correlation => {
            reject_load(cli)?;
            correlation_command(&cfg)
        }
    })
}

fn reject_load(cli: &Cli) -> Result<()> {
    match cli.load_correlation {
        Some(_) => Err(Error::config("--load-correlation only applies to the spectrum subcommand")),
        None => Ok(()),
    }
}

fn emit(path: Option<&Path>, contents: &str) -> Result<()> {
    match path {
        Some(p) => output::write_file(p, contents),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn quoted(s: &str) -> String {
    format!("{s:?}")
}

fn kv(k: &str, v: impl Into<String>) -> (String, String) {
    (k.to_string(), v.into())
}

fn run_facts(command: &str, cfg: &RunConfig, result: &SpectrumResult, source: &str) -> Vec<(String, String)> {
    let info = &result.info;
    let mut facts = vec![
        kv("schema_version", SCHEMA_VERSION.to_string()),
        kv("command", quoted(command)),
        kv("param_hash", quoted(&format!("{:016x}", cfg.grid_hash()))),
        kv("grid_source", quoted(source)),
        kv("axis_sign", format!("{AXIS_SIGN:?}")),
        kv("grid_n_t", info.n_t.to_string()),
        kv("grid_dt", format!("{:?}", info.dt)),
        kv("grid_memory_bytes", info.grid_bytes.to_string()),
        kv("horizon", format!("{:?}", result.horizon)),
    ];
    if let Some(t) = &info.trajectory {
        facts.push(kv("residual_excitation", format!("{:?}", t.residual_excitation)));
        facts.push(kv("stopped_by_leak", t.stopped_by_leak.to_string()));
        facts.push(kv("max_trace_error", format!("{:?}", t.cptp.max_trace_error)));
        facts.push(kv("max_hermiticity_error", format!("{:?}", t.cptp.max_hermiticity_error)));
        if let Some(m) = t.cptp.min_eigenvalue {
            facts.push(kv("min_eigenvalue", format!("{m:?}")));
        }
    }
    if let Some(d) = info.backend_deviation {
        facts.push(kv("backend_deviation", format!("{d:?}")));
    }
    facts.push(kv("min_raw_intensity", format!("{:?}", info.min_raw_intensity)));
    facts.push(kv("peaks", output::peaks_value(&result.peaks)));
    if let Some((lo, hi)) = main_pair(result) {
        facts.push(kv("main_peaks", format!("[{:?}, {:?}]", lo.position, hi.position)));
        facts.push(kv("main_peak_separation", format!("{:?}", hi.position - lo.position)));
        facts.push(kv("main_peak_asymmetry", format!("{:?}", asymmetry_ratio(&(lo, hi)))));
    }
    facts
}

fn open_dump(path: &Path, cfg: &RunConfig) -> Result<CorrelationGrid> {
    let file = File::open(path).map_err(|e| Error::config(format!("cannot open {}: {e}", path.display())))?;
    let grid = CorrelationGrid::read_dump(BufReader::new(file), cfg.model.kappa)?;
    if grid.param_hash != cfg.grid_hash() {
        return Err(Error::config(format!(
            "{} was computed for different model or numerics settings (hash {:016x}, expected {:016x})",
            path.display(),
            grid.param_hash,
            cfg.grid_hash()
        )));
    }
    Ok(grid)
}

fn save_dump(path: &Path, grid: &CorrelationGrid) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    grid.write_dump(BufWriter::new(file))
}

/// Simulates (or loads) and evaluates one spectrum, honoring the dump paths
/// and the optional phonon-cutoff convergence check.
pub fn compute_spectrum(cfg: &RunConfig, load: Option<&Path>) -> Result<(SpectrumResult, Vec<(String, String)>)> {
    let mut extra = Vec::new();
    let (result, source) = match load {
        Some(path) => {
            let grid = open_dump(path, cfg)?;
            (assemble(&grid, &cfg.model, &cfg.filter, None, None)?, "loaded")
        }
        None => {
            let sim = simulate(&cfg.model, &cfg.truncation, cfg.initial, &cfg.numerics)?;
            let mut grid = sim.run.grid;
            grid.param_hash = cfg.grid_hash();
            if let Some(p) = &cfg.output.correlation_dump {
                save_dump(p, &grid)?;
            }
            let r = assemble(&grid, &cfg.model, &cfg.filter, Some(sim.run.trajectory), Some(sim.backend_deviation))?;
            (r, "simulated")
        }
    };
    if cfg.convergence_check {
        let wider = Truncation { phonon_cutoff: cfg.truncation.phonon_cutoff + 4, ..cfg.truncation };
        let sim = simulate(&cfg.model, &wider, cfg.initial, &cfg.numerics)?;
        let other = assemble(&sim.run.grid, &cfg.model, &cfg.filter, None, None)?;
        let l2 = relative_l2(&result.intensities(), &other.intensities());
        extra.push(kv("convergence_phonon_cutoff", wider.phonon_cutoff.to_string()));
        extra.push(kv("convergence_l2", format!("{l2:?}")));
        if !(l2 < 0.01) {
            return Err(Error::numerical(format!(
                "spectrum changes by {:.3}% in L2 norm when the phonon cutoff grows to {}; raise numerics.phonon_cutoff",
                100.0 * l2,
                wider.phonon_cutoff
            )));
        }
    }
    let mut facts = run_facts("spectrum", cfg, &result, source);
    facts.extend(extra);
    Ok((result, facts))
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn spectrum_command(cfg: &RunConfig, load: Option<&Path>) -> Result<()> {
    let (result, facts) = compute_spectrum(cfg, load)?;
    let csv = spectrum_csv(&result, &footer(&cfg.echo(), &facts));
    if let Some(svg) = &cfg.output.svg {
        let x = result.deltas();
        let y = result.intensities();
        emit_plot(&[Series { label: format!("J = {}", cfg.model.j), x: &x, y: &y }], svg)?;
    }
    emit(cfg.output.csv.as_deref(), &csv)
}

/// `dir/stem.csv` → `dir/stem_<tag>.csv`.
fn suffixed(base: &Path, tag: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sweep".into());
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}_{tag}.{ext}"))
}

fn sweep_command(cfg: &RunConfig) -> Result<()> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep.parameter and sweep.values are required for the sweep subcommand"))?;
    let base = cfg
        .output
        .csv
        .clone()
        .ok_or_else(|| Error::config("the sweep subcommand writes several files; pass --output or set output.csv"))?;
    if cfg.output.correlation_dump.is_some() {
        return Err(Error::config("correlation dumps are written by the spectrum and correlation subcommands only"));
    }
    let key = sweep.parameter.key();
    let mut summary = format!("# {key},peak_separation,lower_peak,upper_peak,asymmetry,max_intensity,total_counts\n");
    let mut results = Vec::new();
    for &value in &sweep.values {
        let member = cfg.at_sweep_value(sweep.parameter, value);
        let (result, mut facts) = compute_spectrum(&member, None)?;
        facts[1] = kv("command", quoted("sweep"));
        facts.push(kv("sweep_parameter", quoted(key)));
        facts.push(kv("sweep_value", format!("{value:?}")));
        // every sweepable parameter enters the generator, so each value is re-simulated
        facts.push(kv("grid_reused", "false"));
        let csv = spectrum_csv(&result, &footer(&member.echo(), &facts));
        output::write_file(&suffixed(&base, &format!("{key}{value}")), &csv)?;
        let row = match main_pair(&result) {
            Some((lo, hi)) => format!(
                "{},{},{},{},{},{},{}",
                num(value),
                num(hi.position - lo.position),
                num(lo.position),
                num(hi.position),
                num(asymmetry_ratio(&(lo, hi))),
                num(result.max_intensity()),
                num(result.total_counts())
            ),
            None => format!("{},nan,nan,nan,nan,{},{}", num(value), num(result.max_intensity()), num(result.total_counts())),
        };
        summary.push_str(&row);
        summary.push('\n');
        results.push((value, result));
    }
    summary.push_str(&footer(
        &cfg.echo(),
        &[
            kv("schema_version", SCHEMA_VERSION.to_string()),
            kv("command", quoted("sweep")),
            kv("sweep_parameter", quoted(key)),
            kv("sweep_values", format!("{:?}", sweep.values)),
            kv("grid_reused", "false"),
        ],
    ));
    output::write_file(&suffixed(&base, "summary"), &summary)?;
    if let Some(svg) = &cfg.output.svg {
        let data: Vec<(String, Vec<f64>, Vec<f64>)> = results
            .iter()
            .map(|(v, r)| (format!("{key} = {v}"), r.deltas(), r.intensities()))
            .collect();
        let series: Vec<Series> = data.iter().map(|(l, x, y)| Series { label: l.clone(), x, y }).collect();
        emit_plot(&series, svg)?;
    }
    Ok(())
}

fn dressed_command(cfg: &RunConfig) -> Result<()> {
    let m = &cfg.model;
    let lines = predicted_lines(m, cfg.truncation.phonon_cutoff)?;
    let facts = vec![
        kv("schema_version", SCHEMA_VERSION.to_string()),
        kv("command", quoted("dressed")),
        kv("axis_sign", format!("{AXIS_SIGN:?}")),
        kv("mixing_angle", format!("{:?}", mixing_angle(m)?)),
        kv("splitting", format!("{:?}", rabi_splitting(m, DetuningConvention::Hamiltonian))),
        kv("splitting_printed_convention", format!("{:?}", rabi_splitting(m, DetuningConvention::Printed))),
        kv("total_weight", format!("{:?}", lines.total_weight())),
    ];
    emit(cfg.output.csv.as_deref(), &lines_csv(&lines, &footer(&cfg.echo(), &facts)))
}

fn correlation_command(cfg: &RunConfig) -> Result<()> {
    let dump = cfg
        .output
        .correlation_dump
        .clone()
        .ok_or_else(|| Error::config("pass --dump-correlation or set output.correlation_dump"))?;
    let sim = simulate(&cfg.model, &cfg.truncation, cfg.initial, &cfg.numerics)?;
    let mut grid = sim.run.grid;
    grid.param_hash = cfg.grid_hash();
    save_dump(&dump, &grid)?;
    let mut csv = String::from("# t,photon_number\n");
    for (k, n) in sim.run.photon_number.iter().enumerate() {
        csv.push_str(&format!("{},{}\n", num(k as f64 * grid.dt()), num(*n)));
    }
    let t = &sim.run.trajectory;
    csv.push_str(&footer(
        &cfg.echo(),
        &[
            kv("schema_version", SCHEMA_VERSION.to_string()),
            kv("command", quoted("correlation")),
            kv("param_hash", quoted(&format!("{:016x}", grid.param_hash))),
            kv("grid_n_t", grid.n_t().to_string()),
            kv("grid_memory_bytes", CorrelationGrid::memory_bytes(grid.n_t()).to_string()),
            kv("horizon", format!("{:?}", grid.horizon())),
            kv("residual_excitation", format!("{:?}", t.residual_excitation)),
        ],
    ));
    emit(cfg.output.csv.as_deref(), &csv)
}
