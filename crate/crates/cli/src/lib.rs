//! Command-line front end for `otsense`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use otsense::io::{self, ColumnSelector, ResultsDoc};
use otsense::models::{Integrator, ModelName, ModelSpec, Predation};
use otsense::{
    bootstrap_from, estimate, irrelevance_threshold, ot_indices_smap, CiType, DummyDistribution, Error,
    EstimatorConfig, GroundCost, IndexEstimate, SensitivityDataset, SolverConfig, SolverKind, Weighting,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "otsense", version, about = "Optimal-transport sensitivity indices from input-output samples")]
pub struct Cli {
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, env = "OTSENSE_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// OT indices with the chosen solver.
    Indices(EstimateArgs),
    /// Wasserstein-Bures indices with advective and diffusive parts.
    Wb(EstimateArgs),
    /// One-dimensional indices for every output and input pair.
    Smap(SmapArgs),
    /// Index of an independent dummy input (irrelevance threshold).
    Threshold(ThresholdArgs),
    /// Local separations per class.
    Separations(EstimateArgs),
    /// Write a sample from a built-in model.
    Example(ExampleArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Input columns: names or 1-based ranges such as `1-3`. Defaults to all
    /// columns that are not outputs.
    #[arg(long)]
    pub inputs: Option<String>,
    /// Output columns.
    #[arg(long)]
    pub outputs: String,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Number of classes per input.
    #[arg(long = "M", visible_alias = "partitions", default_value_t = 20)]
    pub partitions: usize,
    /// exact, sinkhorn, sinkhorn-stable, wass-bures or 1d.
    #[arg(long, default_value = "exact")]
    pub solver: String,
    /// Entropic regularization, relative to the largest pairwise cost.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = SolverConfig::DEFAULT_ITERATIONS)]
    pub iterations: usize,
    /// Marginal error tolerance of the entropic solvers.
    #[arg(long, default_value_t = SolverConfig::DEFAULT_MAX_ERR)]
    pub max_err: f64,
    /// Order of the one-dimensional solver.
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// sq-euclidean or minkowski-power(p,q).
    #[arg(long, default_value = "sq-euclidean")]
    pub cost: String,
    /// uniform or class-size.
    #[arg(long, default_value = "uniform")]
    pub weighting: String,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Bootstrap the indices.
    #[arg(long)]
    pub boot: bool,
    /// Bootstrap replicates.
    #[arg(long = "R", visible_alias = "replicates", default_value_t = 1000)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.95)]
    pub conf: f64,
    /// normal, basic or percentile.
    #[arg(long, default_value = "normal")]
    pub ci_type: String,
    /// Also compute the dummy-input threshold with this distribution
    /// (normal or uniform).
    #[arg(long)]
    pub dummy: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write SVG charts.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct SmapArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long = "M", visible_alias = "partitions", default_value_t = 20)]
    pub partitions: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Output columns.
    #[arg(long)]
    pub outputs: String,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// normal or uniform.
    #[arg(long, default_value = "normal")]
    pub dummy: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExampleArgs {
    /// linear-gaussian, budworm or climate.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Destination CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Budworm: last month of the output grid.
    #[arg(long, default_value_t = 150.0)]
    pub t_end: f64,
    /// Budworm: spacing of the output grid in months.
    #[arg(long, default_value_t = 1.0)]
    pub t_step: f64,
    /// Budworm: fixed RK4 step instead of the adaptive integrator.
    #[arg(long)]
    pub rk4_step: Option<f64>,
    /// Budworm: use (alpha S)^2 instead of (alpha^S)^2 in the predation term.
    #[arg(long)]
    pub alpha_times_s: bool,
}

/// Failure of a command, tagged with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::InvalidCost(_) => EXIT_USAGE,
            ref e if e.is_data_error() => EXIT_DATA,
            _ => EXIT_NUMERIC,
        };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

impl SolverArgs {
    fn config(&self, forced: Option<SolverKind>) -> CliResult<EstimatorConfig> {
        let kind = match forced {
            Some(k) => k,
            None => self.solver.parse::<SolverKind>()?,
        };
        let mut solver =
            SolverConfig::new(kind).with_iterations(self.iterations).with_max_err(self.max_err).with_p(self.p);
        if let Some(eps) = self.epsilon {
            solver = solver.with_epsilon(eps);
        }
        let cost: GroundCost = self.cost.parse()?;
        let weighting: Weighting = self.weighting.parse()?;
        let cfg = EstimatorConfig::new(self.partitions, solver).with_cost(cost).with_weighting(weighting);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(data: &DataArgs) -> CliResult<SensitivityDataset> {
    let outputs = ColumnSelector::parse(&data.outputs)?;
    let inputs = data.inputs.as_deref().map(ColumnSelector::parse).transpose()?;
    Ok(io::read_dataset_csv(&data.data, inputs.as_ref(), &outputs)?)
}

fn write(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| Failure::from(Error::Io(e)))
}

fn warn_all(est: &IndexEstimate) {
    for w in &est.warnings {
        eprintln!("warning: {w}");
    }
}

fn run_estimate(args: &EstimateArgs, forced: Option<SolverKind>, separations_only: bool) -> CliResult<()> {
    let cfg = args.solver.config(forced)?;
    let ci_type: CiType = args.ci_type.parse()?;
    let dummy = args.dummy.as_deref().map(str::parse::<DummyDistribution>).transpose()?;
    let ds = load(&args.data)?;
    let mut est = estimate(&ds, &cfg)?;
    warn_all(&est);
    if args.boot {
        est.bootstrap = Some(bootstrap_from(&ds, &cfg, &est, args.replicates, args.conf, ci_type, args.seed)?);
    }
    let threshold = match dummy {
        Some(d) => Some(irrelevance_threshold(ds.y(), &cfg, d, args.seed)?.inputs[0].index),
        None => None,
    };
    let doc = ResultsDoc::new(&est, threshold);
    fs::create_dir_all(&args.out).map_err(|e| Failure::from(Error::Io(e)))?;
    if separations_only {
        write(&args.out.join("separations.csv"), &doc.separations_csv()?)?;
    } else {
        io::results::write_results_doc(&doc, &args.out)?;
    }
    if args.plot {
        if !separations_only {
            write(&args.out.join("indices.svg"), &io::indices_svg(&doc))?;
        }
        let names: Vec<String> = doc.inputs.iter().map(|i| i.name.clone()).collect();
        write(&args.out.join("separations.svg"), &io::separations_svg(&doc.separations, &names))?;
    }
    for input in &doc.inputs {
        match &input.ci {
            Some(ci) => println!("{}\t{:.6}\t[{:.6}, {:.6}]", input.name, input.index, ci.low, ci.high),
            None => println!("{}\t{:.6}", input.name, input.index),
        }
    }
    if let Some(t) = threshold {
        println!("threshold\t{t:.6}");
    }
    Ok(())
}

fn run_smap(args: &SmapArgs) -> CliResult<()> {
    let ds = load(&args.data)?;
    let map = ot_indices_smap(&ds, args.partitions)?;
    io::write_smap(&map, &args.out)?;
    println!("output\t{}", map.inputs.join("\t"));
    for (name, row) in map.outputs.iter().zip(map.values.rows()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        println!("{name}\t{}", cells.join("\t"));
    }
    Ok(())
}

fn run_threshold(args: &ThresholdArgs) -> CliResult<()> {
    let cfg = args.solver.config(None)?;
    let dummy: DummyDistribution = args.dummy.parse()?;
    let table = io::read_table(&args.data)?;
    let cols = ColumnSelector::parse(&args.outputs)?.resolve(&table.headers)?;
    let y = table.select(&cols)?;
    let est = irrelevance_threshold(&y, &cfg, dummy, args.seed)?;
    warn_all(&est);
    let doc = ResultsDoc::new(&est, Some(est.inputs[0].index));
    fs::create_dir_all(&args.out).map_err(|e| Failure::from(Error::Io(e)))?;
    write(&args.out.join("threshold.json"), &doc.to_json()?)?;
    println!("{:.6}", est.inputs[0].index);
    Ok(())
}

fn run_example(args: &ExampleArgs) -> CliResult<()> {
    let name: ModelName = args.model.parse()?;
    let mut spec = ModelSpec::new(name, args.n, args.seed);
    if name == ModelName::Budworm {
        if !(args.t_step > 0.0 && args.t_end > 0.0) {
            return Err(usage("--t-end and --t-step must be > 0"));
        }
        let steps = (args.t_end / args.t_step).round() as usize;
        spec.budworm.times = (0..=steps).map(|k| k as f64 * args.t_step).collect();
        if let Some(step) = args.rk4_step {
            spec.budworm.integrator = Integrator::Rk4 { step };
        }
        if args.alpha_times_s {
            spec.budworm.predation = Predation::ProductWithS;
        }
    } else if args.rk4_step.is_some() || args.alpha_times_s {
        return Err(usage("integrator options apply to the budworm model only"));
    }
    let ds = spec.generate()?;
    io::write_dataset_csv(&args.out, &ds)?;
    println!("wrote {} rows, {} inputs, {} outputs to {}", ds.len(), ds.input_dim(), ds.output_dim(), args.out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Indices(a) => run_estimate(a, None, false),
        Command::Wb(a) => run_estimate(a, Some(SolverKind::WassBures), false),
        Command::Separations(a) => run_estimate(a, None, true),
        Command::Smap(a) => run_smap(a),
        Command::Threshold(a) => run_threshold(a),
        Command::Example(a) => run_example(a),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_NUMERIC;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
