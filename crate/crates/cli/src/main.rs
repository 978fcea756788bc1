//! `podgrid`: validate noise-factor models, expand situation grids, bind
//! PODs and emit robustness requirements.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use podgrid::modelio::REFERENCE_MODEL_JSON;
use podgrid::requirements::{format_id_ranges, lint, CoverageReport};
use podgrid::*;

#[derive(Parser)]
#[command(name = "podgrid", version, about = "Situation coverage grids and POD-qualified robustness requirements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file and list every structural issue.
    Validate { model: PathBuf },
    /// Expand one factor type into its situation grid.
    Expand {
        model: PathBuf,
        #[arg(long = "type", value_name = "NAME")]
        type_name: String,
        #[arg(long, value_enum, default_value_t = GridFormat::Csv)]
        format: GridFormat,
        /// Split enumeration across threads; output is unchanged.
        #[arg(long)]
        parallel: bool,
        #[command(flatten)]
        output: Output,
    },
    /// Print unpruned and pruned grid sizes.
    Count {
        model: PathBuf,
        #[arg(long = "type", value_name = "NAME")]
        type_name: Option<String>,
    },
    /// Decompose a global situation id into one row per type.
    Situation {
        model: PathBuf,
        #[arg(long, value_name = "N")]
        global_id: u64,
    },
    /// Report how much of the operational context the PODs cover.
    Coverage {
        model: PathBuf,
        requirements: PathBuf,
        #[arg(long = "type", value_name = "NAME")]
        type_name: Option<String>,
    },
    /// Write the requirements document with its POD appendix.
    Emit {
        model: PathBuf,
        requirements: PathBuf,
        #[arg(long, value_enum)]
        format: DocFormat,
        #[command(flatten)]
        output: Output,
    },
    /// Draw distinct row or global ids with a fixed seed.
    Sample {
        model: PathBuf,
        #[arg(long = "type", value_name = "NAME", required_unless_present = "global", conflicts_with = "global")]
        type_name: Option<String>,
        #[arg(long)]
        global: bool,
        #[arg(long = "n", value_name = "K")]
        n: u64,
        #[arg(long, value_name = "S")]
        seed: u64,
    },
    /// Drop factors that only affect frame rate or dropped frames.
    Filter {
        model: PathBuf,
        #[command(flatten)]
        output: Output,
    },
    /// Print the bundled reference model.
    Reference {
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of standard output.
    #[arg(short = 'o', long = "output", value_name = "PATH")]
    path: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GridFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DocFormat {
    Md,
    Json,
    Csv,
}

/// A failed command: diagnostics for stderr and its exit code.
enum Failure {
    /// Bad model, unbound POD, out-of-range id and similar.
    Domain(Vec<String>),
    Io(String),
}

impl Failure {
    fn domain(msg: impl ToString) -> Self {
        Failure::Domain(vec![msg.to_string()])
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Io(_) => 3,
        }
    }
}

/// What a successful command produced.
struct Success {
    payload: Vec<u8>,
    output: Option<PathBuf>,
    warnings: Vec<String>,
}

impl Success {
    fn stdout(payload: impl Into<Vec<u8>>) -> Self {
        Self {
            payload: payload.into(),
            output: None,
            warnings: Vec::new(),
        }
    }

    fn to(mut self, output: Output) -> Self {
        self.output = output.path;
        self
    }
}

type CmdResult = Result<Success, Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Io(format!("error: cannot read {}: {e}", path.display())))
}

fn parse_failure(path: &Path, err: ParseError) -> Failure {
    match err {
        ParseError::ValidationFailed(issues) => {
            Failure::Domain(issues.iter().map(ToString::to_string).collect())
        }
        other => Failure::domain(format!("error: {}: {other}", path.display())),
    }
}

fn load_model(path: &Path) -> Result<NoiseFactorModel, Failure> {
    parse_model(&read(path)?).map_err(|e| parse_failure(path, e))
}

fn load_requirements(path: &Path) -> Result<Vec<RequirementSpec>, Failure> {
    parse_requirements(&read(path)?).map_err(|e| parse_failure(path, e))
}

fn domain<E: std::fmt::Display>(err: E) -> Failure {
    Failure::domain(format!("error: {err}"))
}

fn cmd_validate(model: &Path) -> CmdResult {
    load_model(model)?;
    Ok(Success::stdout("OK\n"))
}

fn cmd_expand(model: &Path, type_name: &str, format: GridFormat, parallel: bool, output: Output) -> CmdResult {
    let model = load_model(model)?;
    let grid = if parallel {
        expand_parallel(&model, type_name)
    } else {
        expand(&model, type_name)
    }
    .map_err(domain)?;
    let payload = match format {
        GridFormat::Csv => grid.to_csv().into_bytes(),
        GridFormat::Json => grid.to_json(),
    };
    Ok(Success::stdout(payload).to(output))
}

fn stats_line(stats: &GridStats) -> String {
    format!(
        "{} unpruned={} pruned={}\n",
        stats.type_name, stats.unpruned_count, stats.pruned_count
    )
}

fn cmd_count(model: &Path, type_name: Option<&str>) -> CmdResult {
    let model = load_model(model)?;
    if let Some(name) = type_name {
        return Ok(Success::stdout(stats_line(&count(&model, name).map_err(domain)?)));
    }
    let mut out = String::new();
    for ty in &model.types {
        out.push_str(&stats_line(&count(&model, &ty.name).map_err(domain)?));
    }
    let space = GlobalIndexSpace::new(&model).map_err(domain)?;
    out.push_str(&format!("GLOBAL total={}\n", space.total()));
    Ok(Success::stdout(out))
}

fn cmd_situation(model: &Path, gid: u64) -> CmdResult {
    let model = load_model(model)?;
    let space = GlobalIndexSpace::new(&model).map_err(domain)?;
    let tuple = space.global_to_tuple(gid).map_err(domain)?;
    let rows = space.situations(gid).map_err(domain)?;

    let ids: Vec<String> = tuple.iter().map(u64::to_string).collect();
    let mut out = format!("global_id={gid}\ntuple=({})\n", ids.join(","));
    for ((ty, id), row) in model.types.iter().zip(&tuple).zip(&rows) {
        let cells: Vec<String> = ty
            .factors
            .iter()
            .zip(row.labels())
            .map(|(f, label)| format!("{}={label}", f.name))
            .collect();
        out.push_str(&format!("[{}] row {id}: {}\n", ty.name, cells.join("; ")));
    }
    out.push_str(&format!("consistent={}\n", space.is_consistent(&rows)));
    Ok(Success::stdout(out))
}

fn render_report(report: &CoverageReport) -> String {
    let verdict = if report.is_complete() { "COMPLETE" } else { "INCOMPLETE" };
    let uncovered = if report.uncovered.is_empty() {
        "none".to_owned()
    } else {
        format_id_ranges(&report.uncovered)
    };
    format!(
        "type={}\ncoverage {}/{} {verdict}\nratio {} = {}\nuncovered: {uncovered}\n",
        report.type_name,
        report.covered.len(),
        report.grid_size,
        report.ratio,
        report.ratio_decimal(6),
    )
}

fn bound_requirements(
    model: &NoiseFactorModel,
    reqs_path: &Path,
) -> Result<(GridSet, Vec<RobustnessRequirement>), Failure> {
    let specs = load_requirements(reqs_path)?;
    let grids = GridSet::expand_all(model);
    let reqs = bind_requirements(model, &grids, &specs).map_err(domain)?;
    Ok((grids, reqs))
}

fn cmd_coverage(model: &Path, reqs_path: &Path, type_name: Option<&str>) -> CmdResult {
    let model = load_model(model)?;
    let (grids, reqs) = bound_requirements(&model, reqs_path)?;
    let out = match type_name {
        Some(name) => {
            let grid = grids
                .get(name)
                .ok_or_else(|| domain(GridError::UnknownType(name.to_owned())))?;
            render_report(&coverage_report(&reqs, grid).map_err(domain)?)
        }
        None => {
            let summary = completeness(&reqs, &grids).map_err(domain)?;
            let mut out: Vec<String> = summary.reports.iter().map(render_report).collect();
            out.push(format!(
                "overall {}\n",
                if summary.is_complete() { "COMPLETE" } else { "INCOMPLETE" }
            ));
            out.join("\n")
        }
    };
    Ok(Success::stdout(out))
}

fn cmd_emit(model: &Path, reqs_path: &Path, format: DocFormat, output: Output) -> CmdResult {
    let model = load_model(model)?;
    let (grids, reqs) = bound_requirements(&model, reqs_path)?;
    let format = match format {
        DocFormat::Md => Format::Markdown,
        DocFormat::Json => Format::Json,
        DocFormat::Csv => Format::Csv,
    };
    let payload = emit(&reqs, &grids, format).map_err(domain)?;
    let mut success = Success::stdout(payload).to(output);
    success.warnings = reqs.iter().flat_map(lint).map(|l| l.to_string()).collect();
    Ok(success)
}

fn cmd_sample(model: &Path, type_name: Option<&str>, n: u64, seed: u64) -> CmdResult {
    let model = load_model(model)?;
    let ids = match type_name {
        Some(name) => {
            let grid = LazyGrid::new(&model, name).map_err(domain)?;
            sample(SampleSpace::Grid(&grid), n, seed)
        }
        None => {
            let space = GlobalIndexSpace::new(&model).map_err(domain)?;
            sample(SampleSpace::Global(&space), n, seed)
        }
    }
    .map_err(domain)?;
    let out: String = ids.iter().map(|id| format!("{id}\n")).collect();
    Ok(Success::stdout(out))
}

fn cmd_filter(model: &Path, output: Output) -> CmdResult {
    let model = load_model(model)?;
    let filtered = filter_relevant(&model).map_err(domain)?;
    Ok(Success::stdout(serialize_model(&filtered)).to(output))
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Validate { model } => cmd_validate(&model),
        Command::Expand {
            model,
            type_name,
            format,
            parallel,
            output,
        } => cmd_expand(&model, &type_name, format, parallel, output),
        Command::Count { model, type_name } => cmd_count(&model, type_name.as_deref()),
        Command::Situation { model, global_id } => cmd_situation(&model, global_id),
        Command::Coverage {
            model,
            requirements,
            type_name,
        } => cmd_coverage(&model, &requirements, type_name.as_deref()),
        Command::Emit {
            model,
            requirements,
            format,
            output,
        } => cmd_emit(&model, &requirements, format, output),
        Command::Sample {
            model,
            type_name,
            global: _,
            n,
            seed,
        } => cmd_sample(&model, type_name.as_deref(), n, seed),
        Command::Filter { model, output } => cmd_filter(&model, output),
        Command::Reference { output } => Ok(Success::stdout(REFERENCE_MODEL_JSON).to(output)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { 2 } else { 0 });
        }
    };

    match run(cli.command) {
        Ok(success) => {
            let mut stderr = std::io::stderr().lock();
            for w in &success.warnings {
                let _ = writeln!(stderr, "{w}");
            }
            let written = match &success.output {
                Some(path) => std::fs::write(path, &success.payload)
                    .map_err(|e| format!("error: cannot write {}: {e}", path.display())),
                None => std::io::stdout()
                    .lock()
                    .write_all(&success.payload)
                    .map_err(|e| format!("error: cannot write output: {e}")),
            };
            match written {
                Ok(()) => ExitCode::SUCCESS,
                Err(msg) => {
                    let _ = writeln!(stderr, "{msg}");
                    ExitCode::from(3)
                }
            }
        }
        Err(failure) => {
            let mut stderr = std::io::stderr().lock();
            match &failure {
                Failure::Domain(lines) => {
                    for line in lines {
                        let _ = writeln!(stderr, "{line}");
                    }
                }
                Failure::Io(msg) => {
                    let _ = writeln!(stderr, "{msg}");
                }
            }
            ExitCode::from(failure.code())
        }
    }
}
