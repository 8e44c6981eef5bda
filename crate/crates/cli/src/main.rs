use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use strainrod::bench::config::BenchConfig;
use strainrod::bench::markers::{emit_synthetic, ingest_markers, Calibration, MarkerRecording};
use strainrod::bench::report::{Report, ReportFormat};
use strainrod::bench::runner::{reference_shapes, run_scenario, run_scenario_with_markers, RunOptions};
use strainrod::bench::scenario::{ModelSpec, Scenario};
use strainrod::rod::RodProperties;
use strainrod::{Error, Result};

#[derive(Parser)]
#[command(name = "strainrod", version, about = "Static Kirchhoff rod models and their accuracy/timing benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario: bending, two-bending, torsion or bending-torsion.
    Simulate {
        scenario: String,
        #[command(flatten)]
        common: Common,
        /// Include gravity in the reference and GVS models.
        #[arg(long)]
        gravity: bool,
    },
    /// Run every scenario of a TOML benchmark configuration.
    Benchmark {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score the models against a motion-capture marker recording.
    Score {
        recording: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic marker recording from exact solutions of a scenario.
    EmitSynthetic {
        scenario: String,
        /// Rod preset; needs a marker layout.
        #[arg(long, default_value = "nitinol")]
        rod: String,
        /// Marker perturbation in millimetres.
        #[arg(long, default_value_t = 2.0)]
        perturbation_mm: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// Rod preset: fibreglass-sim, fibreglass or nitinol.
    #[arg(long)]
    rod: Option<String>,
    /// Comma-separated model ids, e.g. `interp,gvs-legendre-3`.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Report file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Timed repeats per configuration.
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

const DEFAULT_MODELS: &str = "interp,gvs-monomial-3,gvs-legendre-3";

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 4,
        Error::NoConvergence { .. } | Error::IntegrationDiverged { .. } | Error::NearSingular { .. } | Error::BranchGuard { .. } => 3,
        _ => 2,
    }
}

fn run_options(base: RunOptions, steps: Option<usize>, tol: Option<f64>, repeats: Option<usize>) -> Result<RunOptions> {
    let opts = RunOptions {
        steps: steps.unwrap_or(base.steps),
        tol: tol.unwrap_or(base.tol),
        repeats: repeats.unwrap_or(base.repeats),
        ..base
    };
    if opts.steps < 50 || !(opts.tol > 0.0) || opts.repeats == 0 {
        return Err(Error::Config("need --steps >= 50, --tol > 0 and --repeats >= 1".into()));
    }
    Ok(opts)
}

fn rod(name: &str) -> Result<RodProperties> {
    RodProperties::preset(name).ok_or_else(|| Error::Config(format!("unknown rod `{name}` (expected fibreglass-sim, fibreglass or nitinol)")))
}

fn models(ids: &Option<Vec<String>>) -> Result<Vec<ModelSpec>> {
    match ids {
        Some(ids) => ids.iter().map(|id| ModelSpec::parse(id)).collect(),
        None => DEFAULT_MODELS.split(',').map(ModelSpec::parse).collect(),
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn emit(report: &Report, common: &Common) -> Result<()> {
    for a in report.aggregates() {
        eprintln!(
            "{:<16} {:<20} {}/{} converged  max {:>7.3}%  mean {:>7.3}%  {:>8.2} ms  {:>5.1} it",
            a.scenario,
            a.model,
            a.converged,
            a.configs,
            a.max_e_r_max_pct,
            a.mean_e_r_int_pct,
            a.mean_time_s * 1e3,
            a.mean_iterations
        );
    }
    let text = match common.format {
        Format::Csv => report.to_csv(),
        Format::Json => report.to_json(),
    };
    match &common.out {
        Some(p) => report.emit(p, common.format.into()),
        None => write_out(None, &text),
    }
}

fn simulate(scenario: &str, common: &Common, gravity: bool) -> Result<()> {
    let mut s = Scenario::by_name(scenario)?;
    let props = rod(common.rod.as_deref().unwrap_or("fibreglass-sim"))?;
    if gravity && props.density.is_none() {
        return Err(Error::Config(format!("rod `{}` has no density; gravity needs one", props.name)));
    }
    s.models = models(&common.models)?;
    s.gravity = gravity;
    s.rod = props.name.clone();
    let opts = run_options(RunOptions::default(), common.steps, common.tol, common.repeats)?;
    emit(&run_scenario(&s, &props, &opts)?, common)
}

fn benchmark(config: &Path, common: &Common) -> Result<()> {
    let cfg = BenchConfig::load(config)?;
    let opts = run_options(cfg.run, common.steps, common.tol, common.repeats)?;
    let only = common.models.as_ref().map(|_| models(&common.models)).transpose()?;
    let mut report = Report::default();
    for (mut scenario, props) in cfg.scenarios()? {
        if let Some(rod_name) = &common.rod {
            scenario.rod = rod_name.clone();
        }
        let props = match &common.rod {
            Some(name) => cfg.rod(name)?,
            None => props,
        };
        if let Some(only) = &only {
            scenario.models = only.clone();
        }
        report.extend(run_scenario(&scenario, &props, &opts)?);
    }
    emit(&report, common)
}

fn score(recording: &Path, common: &Common) -> Result<()> {
    let props = rod(common.rod.as_deref().unwrap_or("nitinol"))?;
    let rec = MarkerRecording::read(recording)?;
    let entries = ingest_markers(&rec, &props, &Calibration::default())?;
    let (bcs, markers): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
    let mut s = Scenario::new("recording", bcs.iter().map(|bc| bc.tip).collect());
    s.rod = props.name.clone();
    s.models = models(&common.models)?;
    let opts = run_options(RunOptions::default(), common.steps, common.tol, common.repeats)?;
    let report = run_scenario_with_markers(&s, &props, &opts, &markers)?;
    for model in std::iter::once("exact".to_string()).chain(s.models.iter().map(ModelSpec::id)) {
        let means: Vec<f64> = report.rows_for(&s.name, &model).filter_map(|r| r.marker_mean_mm()).collect();
        if !means.is_empty() {
            let mean = means.iter().sum::<f64>() / means.len() as f64;
            eprintln!("{model:<20} mean marker error {mean:.3} mm ({:.3}% of L)", mean / 10.0 / props.length);
        }
    }
    emit(&report, common)
}

fn emit_synthetic_cmd(
    scenario: &str,
    rod_name: &str,
    perturbation_mm: f64,
    seed: u64,
    out: Option<&Path>,
    steps: Option<usize>,
    tol: Option<f64>,
) -> Result<()> {
    if !(perturbation_mm >= 0.0 && perturbation_mm.is_finite()) {
        return Err(Error::Config(format!("perturbation must be a non-negative length, got {perturbation_mm}")));
    }
    let props = rod(rod_name)?;
    let mut s = Scenario::by_name(scenario)?;
    s.rod = props.name.clone();
    let opts = run_options(RunOptions { repeats: 1, ..Default::default() }, steps, tol, None)?;
    let shapes: Vec<_> = reference_shapes(&s, &props, &opts)?.into_iter().map(|(shape, _)| shape).collect();
    let rec = emit_synthetic(&shapes, &props, perturbation_mm * 1e-3, seed)?;
    write_out(out, &rec.to_csv())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { scenario, common, gravity } => simulate(scenario, common, *gravity),
        Command::Benchmark { config, common } => benchmark(config, common),
        Command::Score { recording, common } => score(recording, common),
        Command::EmitSynthetic {
            scenario,
            rod,
            perturbation_mm,
            seed,
            out,
            steps,
            tol,
        } => emit_synthetic_cmd(scenario, rod, *perturbation_mm, *seed, out.as_deref(), *steps, *tol),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
