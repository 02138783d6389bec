//! Command-line front end: `simulate`, `belltest`, `certify`, `mc` and
//! `calibrate-dispersion`.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{
    ApparatusSection, CertificationSection, ExperimentConfig, GridSection, ScanSection, SourceSection,
};

use crate::belltest::{bell_check, phase_scan, visibility, write_fringe_csv, BellThresholdTable, Verdict};
use crate::certify::{
    certify_dimension, monte_carlo, psd_fill, CertificationResult, CoherenceBoundMatrix, DiagonalData, Entry,
    Estimate, FillStats, MonteCarloInputs, Ordering, SubspaceVisibility,
};
use crate::dataset;
use crate::error::{Error, Result};
use crate::simulate::{simulate_dataset, SimulatedDataset};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "freqcert", version, about = "Frequency-bin entanglement simulator and dimensionality certifier")]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,

    /// Master seed (default: config, then FREQCERT_SEED, then 1)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the certification dataset
    Simulate(SimulateArgs),
    /// Phase-scan a d-mode superposition and test the visibility threshold
    Belltest(BelltestArgs),
    /// Certify the entanglement dimensionality of a dataset
    Certify(CertifyArgs),
    /// Certify with Monte Carlo error propagation
    Mc(CertifyArgs),
    /// Fit the quadratic spectral phase from pair phase scans
    CalibrateDispersion(CalibrateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long)]
    pub d: Option<usize>,
    /// Quadratic spectral phase, rad per mode²
    #[arg(long)]
    pub c2: Option<f64>,
    /// Expectation values without crosstalk, accidentals or sampling
    #[arg(long)]
    pub noiseless: bool,
    #[arg(long, value_delimiter = ',')]
    pub neighbors: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct BelltestArgs {
    /// Superposition dimension (2, 3, 5 or 7)
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub noiseless: bool,
    /// Output directory for the fringe CSV and verdict JSON
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    /// Measurement CSV (setting_type,j,i,counts,time_s)
    #[arg(long, conflicts_with_all = ["visibilities", "diagonal"])]
    pub measurements: Option<PathBuf>,
    /// Visibility CSV (j,i,V,sigma_V); needs --diagonal
    #[arg(long, requires = "diagonal")]
    pub visibilities: Option<PathBuf>,
    /// Diagonal CSV (j,p,sigma_p)
    #[arg(long, requires = "visibilities")]
    pub diagonal: Option<PathBuf>,
    /// Pair separations to use
    #[arg(long, value_delimiter = ',')]
    pub neighbors: Option<Vec<usize>>,
    /// Monte Carlo samples (0 disables)
    #[arg(long)]
    pub mc: Option<usize>,
    /// Largest subspace dimension to try
    #[arg(long)]
    pub dmax: Option<usize>,
    /// Shrink every measured coherence by this many standard errors
    #[arg(long)]
    pub conservative_sigma: Option<f64>,
    /// Mode selection per subspace: prefix, window or greedy
    #[arg(long, value_parser = parse_ordering)]
    pub ordering: Option<Ordering>,
    /// Result JSON path (stdout when omitted)
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Simulate noiselessly when no data file is given
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Calibration CSV (j,i,psi_rad,counts)
    #[arg(long)]
    pub calibration: PathBuf,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn parse_ordering(s: &str) -> std::result::Result<Ordering, String> {
    match s {
        "prefix" => Ok(Ordering::Prefix),
        "window" => Ok(Ordering::Window),
        "greedy" => Ok(Ordering::Greedy),
        _ => Err(format!("unknown ordering '{s}' (prefix, window, greedy)")),
    }
}

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::UnsupportedDimension(_)
            | Error::ModeOutOfRange { .. } => 2,
            Error::IncompleteDataset(_) => 3,
            Error::Numerical(_) | Error::DegenerateFit(_) | Error::ZeroCounts | Error::ZeroSideband { .. } => 4,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
        }
    }
}

/// One lower-triangle element `(j, k)` with `j > k`, 1-based.
#[derive(Debug, Clone, Serialize)]
pub struct MatrixElement {
    pub j: usize,
    pub k: usize,
    #[serde(flatten)]
    pub entry: Entry,
}

#[derive(Debug, Clone, Serialize)]
pub struct MatrixReport {
    pub d: usize,
    pub diagonal: Vec<Estimate>,
    pub lower_triangle: Vec<MatrixElement>,
}

impl MatrixReport {
    pub fn new(m: &CoherenceBoundMatrix) -> Self {
        let d = m.d();
        let lower_triangle = (0..d)
            .flat_map(|j| (0..j).map(move |k| (j, k)))
            .map(|(j, k)| MatrixElement { j: j + 1, k: k + 1, entry: m.get(j, k) })
            .collect();
        Self { d, diagonal: m.diagonal().to_vec(), lower_triangle }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Assumptions {
    /// Coherence phases are taken as aligned, so magnitudes add in the fidelity.
    pub coherence_phases_aligned: bool,
    /// Uncorrelated elements `<j,k|rho|j,k>`, `j != k`, are left out of the fidelity.
    pub uncorrelated_blocks_excluded: bool,
    /// The fidelity of `d'` modes is normalized by the trace of their block.
    pub subspace_trace_normalized: bool,
    /// Measured coherences enter at their central value.
    pub central_values: bool,
    /// Diagonal given without bucket data.
    pub bucket_data_missing: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub schema_version: u32,
    pub d: usize,
    pub neighbors: Vec<usize>,
    pub ordering: Ordering,
    pub conservative_sigma: f64,
    pub fill: FillStats,
    pub matrix: MatrixReport,
    #[serde(flatten)]
    pub result: CertificationResult,
    pub assumptions: Assumptions,
    pub uncorrelated_upper_limit: Vec<f64>,
}

/// Diagonal and visibilities ready for certification.
#[derive(Debug, Clone)]
pub struct CertifyInputs {
    pub diagonal: DiagonalData,
    pub visibilities: Vec<SubspaceVisibility>,
    pub bucket_data: bool,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let mut w = create(path)?;
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value)?;
            writeln!(lock)?;
        }
    }
    Ok(())
}

/// Config with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.certification.seed = Some(seed);
    }
    match &cli.command {
        Command::Simulate(a) => {
            if let Some(d) = a.d {
                cfg.grid.d = d;
            }
            if let Some(c2) = a.c2 {
                cfg.source.dispersion_c2 = c2;
            }
            if let Some(n) = &a.neighbors {
                cfg.certification.neighbors = n.clone();
            }
            cfg.scan.noiseless |= a.noiseless;
        }
        Command::Belltest(a) => cfg.scan.noiseless |= a.noiseless,
        Command::Certify(a) | Command::Mc(a) => {
            if let Some(n) = &a.neighbors {
                cfg.certification.neighbors = n.clone();
            }
            if let Some(n) = a.mc {
                cfg.certification.mc_samples = n;
            }
            if let Some(d) = a.dmax {
                cfg.certification.d_max = Some(d);
            }
            if let Some(s) = a.conservative_sigma {
                cfg.certification.conservative_sigma = s;
            }
            if let Some(o) = a.ordering {
                cfg.certification.ordering = o;
            }
            cfg.scan.noiseless |= a.noiseless;
            if matches!(cli.command, Command::Mc(_)) && cfg.certification.mc_samples == 0 {
                cfg.certification.mc_samples = 200;
            }
        }
        Command::CalibrateDispersion(_) => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli)?;
    match &cli.command {
        Command::Simulate(a) => {
            let data = cmd_simulate(&cfg, &a.out)?;
            eprintln!(
                "wrote {} rows ({} diagonal settings, {} fringe-extremum settings) to {}",
                data.measurements.len(),
                2 * data.d,
                data.fringe_groups(),
                a.out.display()
            );
        }
        Command::Belltest(a) => {
            let report = cmd_belltest(&cfg, a.d, a.out.as_deref())?;
            write_json(&report, None)?;
        }
        Command::Certify(a) | Command::Mc(a) => {
            let report = cmd_certify(&cfg, a)?;
            eprintln!("{}", summary_line(&report));
            write_json(&report, a.out.as_deref())?;
        }
        Command::CalibrateDispersion(a) => {
            let scans = dataset::read_calibration(open(&a.calibration)?)?;
            let fit = crate::certify::dispersion_calibrate(&scans)?;
            write_json(&fit, a.out.as_deref())?;
        }
    }
    Ok(())
}

/// Writes `measurements.csv`, `calibration.csv` and `simulation.json` to `out`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulatedDataset> {
    let data = simulate_dataset(&cfg.state()?, &cfg.simulation()?)?;
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("measurements.csv"))?;
    dataset::write_measurements(&data.measurements, &mut w)?;
    w.flush()?;
    let mut w = create(&out.join("calibration.csv"))?;
    dataset::write_calibration(&data.calibration, &mut w)?;
    w.flush()?;

    #[derive(Serialize)]
    struct Summary<'a> {
        schema_version: u32,
        d: usize,
        diagonal_settings: usize,
        fringe_settings: usize,
        samples_per_extremum: usize,
        dispersion: &'a crate::certify::DispersionFit,
        config: &'a ExperimentConfig,
    }
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        d: data.d,
        diagonal_settings: 2 * data.d,
        fringe_settings: data.fringe_groups(),
        samples_per_extremum: cfg.scan.samples_per_extremum,
        dispersion: &data.dispersion,
        config: cfg,
    };
    write_json(&summary, Some(&out.join("simulation.json")))?;
    Ok(data)
}

#[derive(Debug, Clone, Serialize)]
pub struct BellReport {
    pub schema_version: u32,
    pub d: usize,
    pub visibility: f64,
    pub visibility_sigma: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub noiseless: bool,
    pub points: usize,
}

pub fn cmd_belltest(cfg: &ExperimentConfig, d: usize, out: Option<&Path>) -> Result<BellReport> {
    let table = BellThresholdTable::default();
    let threshold = table.threshold(d)?;
    let scan = phase_scan(&cfg.state()?, &cfg.bell_scan(d)?)?;
    let (v, sigma) = visibility(&scan)?;
    let report = BellReport {
        schema_version: SCHEMA_VERSION,
        d,
        visibility: v,
        visibility_sigma: sigma,
        threshold,
        verdict: bell_check(v, d, &table)?,
        noiseless: scan.noiseless,
        points: scan.points.len(),
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        let mut w = create(&dir.join(format!("fringe_d{d}.csv")))?;
        write_fringe_csv(&scan, &mut w)?;
        w.flush()?;
        write_json(&report, Some(&dir.join(format!("verdict_d{d}.json"))))?;
    }
    Ok(report)
}

/// Loads the inputs named by `args`, or simulates them from `cfg` when no
/// data file is given.
pub fn load_certify_inputs(cfg: &ExperimentConfig, args: &CertifyArgs) -> Result<CertifyInputs> {
    let neighbors = &cfg.certification.neighbors;
    if let (Some(vis), Some(diag)) = (&args.visibilities, &args.diagonal) {
        let diagonal = dataset::read_diagonal(open(diag)?)?;
        let visibilities: Vec<_> =
            dataset::read_visibilities(open(vis)?)?.into_iter().filter(|v| neighbors.contains(&v.i)).collect();
        return Ok(CertifyInputs { diagonal, visibilities, bucket_data: false });
    }
    let records = match &args.measurements {
        Some(path) => dataset::read_measurements(open(path)?)?,
        None => simulate_dataset(&cfg.state()?, &cfg.simulation()?)?.measurements,
    };
    let d = dataset::infer_dimension(&records)?;
    let diagonal = crate::certify::diagonal_from_records(&records, d)?;
    let visibilities = dataset::visibilities_from_records(&records, d, neighbors)?;
    Ok(CertifyInputs { diagonal, visibilities, bucket_data: true })
}

/// Full certification report for already loaded inputs.
pub fn certify_report(cfg: &ExperimentConfig, inputs: &CertifyInputs) -> Result<CertifyReport> {
    let options = cfg.certify_options();
    let matrix = CoherenceBoundMatrix::from_visibilities(&inputs.diagonal, &inputs.visibilities)?;
    let (filled, fill) = psd_fill(&matrix)?;
    let mut result = certify_dimension(&filled, &options);
    if cfg.certification.mc_samples > 0 {
        let mc_inputs = MonteCarloInputs {
            diagonal: inputs.diagonal.clone(),
            visibilities: inputs.visibilities.clone(),
            options,
        };
        result.monte_carlo = Some(monte_carlo(&mc_inputs, cfg.certification.mc_samples, cfg.seed()?)?);
    }
    Ok(CertifyReport {
        schema_version: SCHEMA_VERSION,
        d: filled.d(),
        neighbors: cfg.certification.neighbors.clone(),
        ordering: options.ordering,
        conservative_sigma: options.conservative_sigma,
        fill,
        matrix: MatrixReport::new(&filled),
        result,
        assumptions: Assumptions {
            coherence_phases_aligned: true,
            uncorrelated_blocks_excluded: true,
            subspace_trace_normalized: true,
            central_values: options.conservative_sigma == 0.0,
            bucket_data_missing: !inputs.bucket_data,
        },
        uncorrelated_upper_limit: inputs.diagonal.uncorrelated_upper_limit(),
    })
}

pub fn cmd_certify(cfg: &ExperimentConfig, args: &CertifyArgs) -> Result<CertifyReport> {
    certify_report(cfg, &load_certify_inputs(cfg, args)?)
}

/// One-line summary with the certified dimension at the two largest spaces.
pub fn summary_line(report: &CertifyReport) -> String {
    let r = &report.result;
    let mut line = format!("k* = {} (first reached at d' = {})", r.k_star, r.best_dim);
    for idx in r.dims.len().saturating_sub(2)..r.dims.len() {
        line.push_str(&format!("; d' = {}: F = {:.4}, certified {}", r.dims[idx], r.fidelity[idx], r.certified[idx]));
    }
    if let Some(mc) = &r.monte_carlo {
        line.push_str(&format!("; monte carlo {:.2} +- {:.2} over {} samples", mc.mean, mc.std, mc.n_samples));
    }
    line
}
