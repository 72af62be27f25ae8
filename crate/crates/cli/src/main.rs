use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hqdt::dataset::{Dataset, Split};
use hqdt::harness::{precision_table, run, RunConfig};
use hqdt::kb::KnowledgeBase;
use hqdt::reasoner::Mode;
use hqdt::text::Corpus;
use hqdt::world::{generate_synthetic_world, WorldSpec};

#[derive(Parser)]
#[command(name = "hqdt", about = "Question answering over decomposition trees with KB and text sources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the dev split of a question set and write a report.
    Run {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        questions: PathBuf,
        /// Question set whose train split builds the precision table
        /// (defaults to --questions).
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long, default_value = "mix")]
        mode: Mode,
        #[arg(long, default_value_t = 0.7)]
        gamma: f64,
        #[arg(long, default_value_t = 5)]
        topk: usize,
        #[arg(long = "ablate-kb", default_value_t = 0.0)]
        ablate_kb: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Evaluate the train split instead of dev.
        #[arg(long)]
        on_train: bool,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-question traces.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Generate a synthetic KB, corpus and question set.
    GenWorld {
        /// World spec JSON; defaults are used for missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute per-skeleton precision on the train split.
    PrecisionTable {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Bad input: exit code 2.
    Invalid(String),
    /// Anything else: exit code 1.
    Runtime(String),
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| runtime(format!("writing {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { kb, corpus, questions, train, mode, gamma, topk, ablate_kb, seed, on_train, out, traces } => {
            let cfg = RunConfig {
                mode,
                gamma,
                k: topk,
                ablate_kb,
                seed,
                split: if on_train { Split::Train } else { Split::Dev },
            };
            cfg.validate().map_err(invalid)?;
            let kb = KnowledgeBase::load(&kb).map_err(invalid)?;
            let corpus = Corpus::load(&corpus).map_err(invalid)?;
            let eval = Dataset::load(&questions).map_err(invalid)?;
            let train = match train {
                Some(p) => Dataset::load(&p).map_err(invalid)?,
                None => eval.clone(),
            };
            let output = run(&kb, &corpus, &train, &eval, &cfg).map_err(runtime)?;
            write_or_print(out.as_deref(), &output.report.to_json().map_err(runtime)?)?;
            if let Some(dir) = traces {
                output.write_traces(&dir).map_err(runtime)?;
            }
            let o = output.report.overall;
            eprintln!("{mode}: {} questions, EM {:.4}, F1 {:.4}", o.questions, o.em, o.f1);
            Ok(())
        }
        Command::GenWorld { spec, seed, out } => {
            let spec: WorldSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| invalid(format!("reading {}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| invalid(format!("parsing {}: {e}", p.display())))?
                }
                None => WorldSpec::default(),
            };
            let world = generate_synthetic_world(&spec, seed).map_err(invalid)?;
            std::fs::create_dir_all(&out).map_err(|e| runtime(format!("creating {}: {e}", out.display())))?;
            write_or_print(Some(&out.join("kb.json")), &pretty(&world.kb)?)?;
            write_or_print(Some(&out.join("corpus.json")), &pretty(&world.corpus)?)?;
            write_or_print(Some(&out.join("questions.json")), &pretty(&world.dataset)?)?;
            write_or_print(Some(&out.join("shortcut_questions.json")), &pretty(&world.shortcut)?)?;
            eprintln!(
                "wrote {} entities, {} paragraphs, {} questions to {}",
                world.kb.entities.len(),
                world.corpus.paragraphs.len(),
                world.dataset.questions.len(),
                out.display()
            );
            Ok(())
        }
        Command::PrecisionTable { train, kb, out } => {
            let kb = KnowledgeBase::load(&kb).map_err(invalid)?;
            let train = Dataset::load(&train).map_err(invalid)?;
            let table = precision_table(&train, &kb);
            let text = serde_json::to_string_pretty(&table.0).map_err(runtime)? + "\n";
            write_or_print(out.as_deref(), &text)
        }
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value).map_err(runtime)? + "\n")
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
