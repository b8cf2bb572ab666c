//! The `guidetwig` command line: build indexes, run queries, generate
//! synthetic documents and benchmark the engines.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use guidetwig_core::document::{generate_to, GenerateError, GeneratorConfig};
use guidetwig_core::workload::{
    multi_branch_sweep, parse_workload, run, run_bench, single_branch_sweep, BenchRow, Engine, WorkloadError,
};
use guidetwig_core::{parse, Index, IndexError, ParseError, Plan};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "guidetwig", version, about = "Twig queries over a path-guide index")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index file from an XML document.
    Index { xml: PathBuf, output: PathBuf },
    /// Run a twig query against an index.
    Query {
        index: PathBuf,
        query: String,
        #[arg(long, default_value = "dt", value_parser = parse_engine)]
        engine: Engine,
        /// Print only the number of answers.
        #[arg(long)]
        count: bool,
        /// Print the evaluation plan and access counters instead of answers.
        #[arg(long)]
        explain: bool,
        /// Print the distinct join-point nodes instead of leaf tuples.
        #[arg(long, value_enum)]
        project: Option<Projection>,
        #[arg(long, value_enum, default_value = "dotted")]
        format: Format,
    },
    /// Write a random document.
    Gen {
        #[arg(long, default_value_t = 12)]
        max_depth: usize,
        #[arg(long, default_value_t = 10)]
        max_fanout: usize,
        /// Comma-separated tag alphabet.
        #[arg(long, default_value = "A,B,C,D,E,F", value_delimiter = ',')]
        tags: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stop adding elements once this many exist.
        #[arg(long, default_value_t = 100_000)]
        nodes: usize,
        /// Output file; standard output if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run a query workload under each engine and print CSV.
    Bench {
        index: PathBuf,
        #[arg(long, conflicts_with = "auto", required_unless_present = "auto")]
        workload: Option<PathBuf>,
        #[arg(long, value_enum)]
        auto: Option<Sweep>,
        /// Engines to run, in order.
        #[arg(long = "engine", value_parser = parse_engine, default_values = ["dt", "leafscan"])]
        engines: Vec<Engine>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Projection {
    Jp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dotted,
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    SingleBranch,
    MultiBranch,
}

fn parse_engine(s: &str) -> Result<Engine, String> {
    s.parse().map_err(|e: guidetwig_core::workload::UnknownEngine| e.to_string())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("query syntax error: {0}")]
    Query(#[from] ParseError),
    #[error("workload: {0}")]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Unsupported(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Query(_) | CliError::Workload(_) => EXIT_USAGE,
            CliError::Generate(GenerateError::Config(_)) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        }
    }
}

fn open(path: &PathBuf) -> Result<File, CliError> {
    File::open(path).map_err(|source| CliError::File { path: path.clone(), source })
}

fn load(path: &PathBuf) -> Result<Index, CliError> {
    match Index::load(path) {
        Err(IndexError::Io(source)) => Err(CliError::File { path: path.clone(), source }),
        other => Ok(other?),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Index { xml, output } => {
            let index = Index::from_xml(BufReader::new(open(&xml)?))?;
            index.save(&output)?;
            writeln!(
                out,
                "indexed {} elements into {} guide nodes ({} extent bytes) -> {}",
                index.element_count(),
                index.guide().len(),
                index.extent_bytes(),
                output.display()
            )?;
        }
        Command::Query { index, query, engine, count, explain, project, format } => {
            let twig = parse(&query)?;
            let index = load(&index)?;
            let (result, metrics) = run(&index, &twig, engine);
            if explain {
                let plan = Plan::new(index.guide(), twig);
                out.write_all(plan.explain(index.guide()).as_bytes())?;
                writeln!(
                    out,
                    "engine={engine}, results={}, prefix_comparisons={}, jumps={}",
                    result.len(),
                    metrics.prefix_comparisons,
                    metrics.jumps
                )?;
            } else {
                let lines: Vec<String> = match project {
                    Some(Projection::Jp) => result.jp_labels.iter().map(|l| l.to_string()).collect(),
                    None => result.tuples.iter().map(|t| t.to_string()).collect(),
                };
                if count || format == Format::Count {
                    writeln!(out, "{}", lines.len())?;
                } else {
                    for line in lines {
                        writeln!(out, "{line}")?;
                    }
                }
            }
            writeln!(err, "{metrics}")?;
        }
        Command::Gen { max_depth, max_fanout, tags, seed, nodes, output } => {
            let config = GeneratorConfig { max_depth, max_fanout, tag_alphabet: tags, seed, target_node_count: nodes };
            let emitted = match &output {
                Some(path) => {
                    let file = File::create(path).map_err(|source| CliError::File { path: path.clone(), source })?;
                    let mut w = BufWriter::new(file);
                    let n = generate_to(&config, &mut w)?;
                    w.flush()?;
                    n
                }
                None => {
                    let n = generate_to(&config, &mut *out)?;
                    writeln!(out)?;
                    n
                }
            };
            writeln!(err, "generated {emitted} elements (seed {seed})")?;
        }
        Command::Bench { index, workload, auto, engines } => {
            let index = load(&index)?;
            let queries = match (workload, auto) {
                (Some(path), _) => parse_workload(&io::read_to_string(open(&path)?)?)?,
                (None, Some(sweep)) => {
                    let q = match sweep {
                        Sweep::SingleBranch => single_branch_sweep(&index),
                        Sweep::MultiBranch => multi_branch_sweep(&index),
                    };
                    if q.is_empty() {
                        return Err(CliError::Unsupported(
                            "document too small for this sweep (needs depth 9 and six tags)".into(),
                        ));
                    }
                    q
                }
                (None, None) => unreachable!("clap requires one of --workload and --auto"),
            };
            let rows = run_bench(&index, &queries, &engines)?;
            let mut csv = csv::Writer::from_writer(out);
            csv.write_record(BenchRow::COLUMNS)?;
            for row in rows {
                csv.write_record(row.fields())?;
            }
            csv.flush()?;
        }
    }
    Ok(())
}
