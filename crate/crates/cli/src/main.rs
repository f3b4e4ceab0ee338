use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use unilift::domain::DomainSpec;
use unilift::model::format::ModelFile;
use unilift::query::{self, AnswerSet, EventProbe};
use unilift::{expand, parse_query, Expansion, Program, UniverseModel, WorldFilter};

mod output;

use output::{Format, Row};

#[derive(Parser)]
#[command(
    name = "unilift",
    version,
    about = "Lifted inference over models with an unknown universe"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Expand the universe and write the world manifest.
    Expand(Common),
    /// Answer a query on every model.
    Query(QueryArgs),
    /// The k best models by event probability or by model probability.
    Topk(TopkArgs),
    /// Models not dominated in (model probability, event probability).
    Skyline(EventArgs),
    /// How the event probability changes with the domain sizes.
    Trend(EventArgs),
}

#[derive(Args)]
struct Common {
    /// Template model (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Constraint program; every parfactor gets the full constraint when omitted.
    #[arg(long)]
    program: Option<PathBuf>,
    /// Domain specification (JSON).
    #[arg(long)]
    domains: PathBuf,
    /// Drop domain worlds below this probability.
    #[arg(long)]
    threshold: Option<f64>,
    /// Apply the threshold again to the combined world weights.
    #[arg(long, requires = "threshold")]
    cascade: bool,
    /// Seed for `"random"` potential tables.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QueryArgs {
    #[command(flatten)]
    common: Common,
    /// `P(A, B | C=v, ...)`
    #[arg(long)]
    query: String,
}

#[derive(Args)]
struct EventArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    query: String,
    /// `atom=value`, one of the query targets.
    #[arg(long)]
    event: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankBy {
    Query,
    Model,
}

#[derive(Args)]
struct TopkArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    query: String,
    /// Needed when ranking by query probability.
    #[arg(long)]
    event: Option<String>,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = RankBy::Query)]
    by: RankBy,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<unilift::Error> for Failure {
    fn from(e: unilift::Error) -> Self {
        Failure {
            code: if e.is_input_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load(c: &Common) -> Result<Expansion, Failure> {
    let tmpl = ModelFile::parse(&read(&c.model)?)?.template(c.seed)?;
    let program = match &c.program {
        Some(p) => Program::parse(&read(p)?)?,
        None => Program::top(&tmpl),
    };
    let domains = DomainSpec::parse(&read(&c.domains)?)?;
    let filter = c
        .threshold
        .map(|t| WorldFilter::new(t, c.cascade))
        .transpose()?;
    Ok(expand(&UniverseModel::new(
        tmpl, program, domains, filter,
    )?)?)
}

fn answers(c: &Common, q: &str) -> Result<AnswerSet, Failure> {
    let q = parse_query(q)?;
    let e = load(c)?;
    let a = query::query_all(&e.models, &q)?;
    for s in &a.skipped {
        eprintln!("skipped world {}: {}", s.model, s.reason);
    }
    Ok(a)
}

fn emit(c: &Common, bytes: Vec<u8>) -> Result<(), Failure> {
    match &c.out {
        Some(p) => fs::write(p, bytes).map_err(|e| input(format!("{}: {e}", p.display()))),
        None => io::stdout()
            .write_all(&bytes)
            .map_err(|e| input(format!("stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Expand(c) => {
            let e = load(&c)?;
            emit(&c, output::manifest(&e, c.format)?)
        }
        Command::Query(a) => {
            let ans = answers(&a.common, &a.query)?;
            let rows = ans.entries.iter().map(|e| Row::new(e, None)).collect();
            emit(
                &a.common,
                output::answers(&ans, rows, false, None, a.common.format)?,
            )
        }
        Command::Topk(a) => {
            if a.k == 0 {
                return Err(input("--k must be at least 1"));
            }
            let ans = answers(&a.common, &a.query)?;
            let sel = match a.by {
                RankBy::Query => {
                    let text = a
                        .event
                        .as_deref()
                        .ok_or_else(|| input("--event is required with --by query"))?;
                    let e: EventProbe = text.parse()?;
                    query::top_k_query_prob(&ans, &e, a.k)?
                }
                RankBy::Model => query::top_k_model_prob(&ans, a.k)?,
            };
            if sel.exhausted {
                eprintln!(
                    "k={} exceeds the {} answers; returning all",
                    a.k,
                    ans.entries.len()
                );
            }
            let rows = sel
                .indices
                .iter()
                .enumerate()
                .map(|(r, &i)| Row::new(&ans.entries[i], Some(format!("rank {}", r + 1))))
                .collect();
            emit(
                &a.common,
                output::answers(&ans, rows, true, None, a.common.format)?,
            )
        }
        Command::Skyline(a) => {
            let ans = answers(&a.common, &a.query)?;
            let e: EventProbe = a.event.parse()?;
            let rows = query::skyline(&ans, &e)?
                .into_iter()
                .map(|i| Row::new(&ans.entries[i], Some("skyline".into())))
                .collect();
            emit(
                &a.common,
                output::answers(&ans, rows, true, None, a.common.format)?,
            )
        }
        Command::Trend(a) => {
            let ans = answers(&a.common, &a.query)?;
            let e: EventProbe = a.event.parse()?;
            let report = query::trend_report(&ans, &e)?;
            eprintln!(
                "trend {}: {}, max delta {:.11e}",
                e, report.direction, report.max_delta
            );
            let rows = report
                .order
                .iter()
                .map(|&i| Row::new(&ans.entries[i], Some(report.direction.to_string())))
                .collect();
            emit(
                &a.common,
                output::answers(&ans, rows, true, Some(&report), a.common.format)?,
            )
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
