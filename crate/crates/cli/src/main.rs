use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use caputo_core::pde::LinearSolverKind;
use caputo_core::study::{
    check_table, run_experiment, write_csv, write_markdown, write_pointwise_series, ErrorReport,
    ExperimentConfig, ExperimentKind, GoldenTable, OutputFormat,
};
use caputo_core::Error;
use clap::{Args, Parser, Subcommand};

/// Convergence studies for L1 and Alikhanov discretizations of the Caputo
/// derivative on graded temporal meshes.
#[derive(Parser, Debug)]
#[command(name = "caputo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scalar problem with exact solution u = t^alpha.
    Ivp(SweepArgs),
    /// Two-dimensional parabolic problem on (0, pi)^2.
    Pde(SweepArgs),
    /// Empirical stability ratios against the stability envelope.
    Stability(SweepArgs),
    /// Lower-bound ratios of the discrete barrier function.
    Barrier(SweepArgs),
    /// Truncation-error bound ratios for u = t^alpha.
    Truncation(SweepArgs),
    /// Recompute the published reference tables and compare.
    Check(CheckArgs),
}

/// Flags override values read from `--config`. Lists are comma-separated;
/// grading exponents may be expressions in `a` such as `(2-a)/0.9`.
#[derive(Args, Debug, Default)]
struct SweepArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fractional orders.
    #[arg(long)]
    alpha: Option<String>,
    /// Grading exponents.
    #[arg(long)]
    r: Option<String>,
    /// Numbers of time intervals.
    #[arg(long = "M")]
    m: Option<String>,
    /// Numbers of spatial intervals per direction.
    #[arg(long = "N")]
    n: Option<String>,
    /// l1 or alikhanov.
    #[arg(long)]
    scheme: Option<String>,
    /// final-time, max-over-time or spatial-l2.
    #[arg(long)]
    norm: Option<String>,
    /// Stability exponents gamma (stability only; defaults to alpha, 0, alpha-1).
    #[arg(long)]
    gamma: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    t: Option<String>,
    /// Barrier offset index.
    #[arg(long)]
    p: Option<String>,
    /// fixed-n, equal or square coupling of N and M (pde only).
    #[arg(long)]
    coupling: Option<String>,
    /// reference, manufactured or manufactured-discrete (pde only).
    #[arg(long)]
    problem: Option<String>,
    /// auto, cg, pcg or bicgstab (pde only).
    #[arg(long)]
    solver: Option<String>,
    /// Iteration cap of the linear solver per time level (pde only).
    #[arg(long = "max-iter")]
    max_iter: Option<String>,
    /// Estimate errors by comparison with a run on (2N, 2M) (pde only).
    #[arg(long = "two-mesh", num_args = 0..=1, default_missing_value = "true")]
    two_mesh: Option<String>,
    /// Attach pointwise errors and error envelopes (ivp only).
    #[arg(long)]
    envelope: bool,
    /// Table output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Pointwise plot-data file (implies --envelope).
    #[arg(long = "plot-out")]
    plot_out: Option<PathBuf>,
    /// csv or markdown.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Tables to check: 2, 2t, 2s, 3, 4, 5 or all.
    #[arg(long, default_value = "3,4,5")]
    table: String,
    /// Largest M for the initial-value tables and the temporal half of table 2.
    #[arg(long = "max-M", default_value_t = 8192)]
    max_m: usize,
    /// Largest N for the spatial half of table 2.
    #[arg(long = "max-N", default_value_t = 64)]
    max_n: usize,
    /// Linear solver for table 2.
    #[arg(long, default_value = "pcg")]
    solver: String,
    /// Significant digits required of each error, replacing the per-table
    /// default (3 for the initial-value tables, 2 for table 2).
    #[arg(long)]
    digits: Option<u32>,
}

enum Failure {
    Core(Error),
    Check(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(error: &Error) -> u8 {
    match error.root() {
        Error::SolverDivergence { .. } | Error::NonPositiveDiagonal { .. } => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

impl SweepArgs {
    fn into_config(self, kind: ExperimentKind) -> Result<ExperimentConfig, Error> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        config.kind = kind;
        let overrides = [
            ("alpha", self.alpha),
            ("r", self.r),
            ("M", self.m),
            ("N", self.n),
            ("scheme", self.scheme),
            ("norm", self.norm),
            ("gamma", self.gamma),
            ("T", self.t),
            ("p", self.p),
            ("coupling", self.coupling),
            ("problem", self.problem),
            ("solver", self.solver),
            ("max_iter", self.max_iter),
            ("two_mesh", self.two_mesh),
            ("format", self.format),
        ];
        for (key, value) in overrides {
            if let Some(value) = value {
                config.set(key, &value)?;
            }
        }
        if let Some(out) = self.out {
            config.output = Some(out);
        }
        if let Some(plot) = self.plot_out {
            config.plot_output = Some(plot);
        }
        if self.envelope || config.plot_output.is_some() {
            config.envelope_overlay = true;
        }
        config.validate()?;
        Ok(config)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit_table(report: &ErrorReport, format: OutputFormat, out: &mut dyn Write) -> Result<(), Error> {
    match format {
        OutputFormat::Csv => write_csv(report, out),
        OutputFormat::Markdown => write_markdown(report, out),
    }
}

/// `dir/name.csv` becomes `dir/name-a0.5-r1.5-M1024.csv` when several
/// pointwise series share one target.
fn series_path(base: &Path, alpha: f64, r: f64, m: usize) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("pointwise");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}-a{alpha}-r{r:.4}-M{m}.{ext}"))
}

fn run_sweep(args: SweepArgs, kind: ExperimentKind) -> Result<(), Failure> {
    let config = args.into_config(kind)?;
    let report = run_experiment(&config)?;
    match &config.output {
        Some(path) => {
            let mut file = create(path)?;
            emit_table(&report, config.format, &mut file)?;
            file.flush().map_err(Error::from)?;
        }
        None => {
            let stdout = io::stdout();
            emit_table(&report, config.format, &mut stdout.lock())?;
        }
    }
    if let Some(base) = &config.plot_output {
        let single = report.pointwise.len() == 1;
        for series in &report.pointwise {
            let path = if single {
                base.clone()
            } else {
                series_path(base, series.alpha, series.r, series.m)
            };
            let mut file = create(&path)?;
            write_pointwise_series(series, &mut file)?;
            file.flush().map_err(Error::from)?;
        }
    }
    Ok(())
}

fn run_check(args: CheckArgs) -> Result<(), Failure> {
    let tables = GoldenTable::parse_list(&args.table)?;
    let solver: LinearSolverKind = args.solver.parse()?;
    let mut failed = 0;
    let mut total = 0;
    for table in tables {
        let limit = if table == GoldenTable::Table2Spatial {
            args.max_n
        } else {
            args.max_m
        };
        let outcomes = check_table(table, limit, solver, args.digits)?;
        for outcome in &outcomes {
            println!("{outcome}");
        }
        total += outcomes.len();
        failed += outcomes.iter().filter(|o| !o.pass).count();
    }
    println!("{} of {total} comparisons passed", total - failed);
    if failed > 0 {
        Err(Failure::Check(failed))
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ivp(a) => run_sweep(a, ExperimentKind::Ivp),
        Command::Pde(a) => run_sweep(a, ExperimentKind::Pde),
        Command::Stability(a) => run_sweep(a, ExperimentKind::Stability),
        Command::Barrier(a) => run_sweep(a, ExperimentKind::Barrier),
        Command::Truncation(a) => run_sweep(a, ExperimentKind::Truncation),
        Command::Check(a) => run_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Check(n)) => {
            eprintln!("{n} comparisons outside tolerance");
            ExitCode::from(4)
        }
    }
}
