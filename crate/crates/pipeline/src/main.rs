use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use editrepair_core::edit::{apply, EditContext};
use editrepair_core::grammar::{Ast, NodeId};
use editrepair_core::minilang::{parse, print_lossy, run_all, CompiledProgram, TestCase};
use editrepair_core::oracle::{
    extract_oracle, generate_seeds, mutate_corpus, read_jsonl, write_jsonl, MutationKind, Seed, SeedConfig, Vocabulary,
};
use editrepair_model::Model;
use editrepair_pipeline::{
    evaluate, evaluate_oracle, ochiai, repair, train, Localization, LocalizationMode, RepairBudget, TrainConfig,
};

#[derive(Parser)]
#[command(name = "editrepair", version, about = "Syntax-guided edit decoding for program repair")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract oracle edit scripts from a pair file.
    Extract {
        pairs: PathBuf,
        /// Frequency threshold for identifier and literal productions.
        #[arg(long, default_value_t = 10)]
        threshold: usize,
        /// Write one JSON line per accepted pair.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a synthetic bug corpus by mutating fixed programs.
    Mutate {
        /// Directory of `NAME.mini` programs with `NAME.tests.json` suites.
        /// Without it, random seed programs are generated.
        #[arg(long)]
        seed_dir: Option<PathBuf>,
        /// Random seed programs to generate when no directory is given.
        #[arg(long, default_value_t = 200)]
        seeds: usize,
        #[arg(long)]
        n: usize,
        /// Mutation seed; defaults to --seed.
        #[arg(long)]
        rng: Option<u64>,
        /// Restrict to single-token mutations.
        #[arg(long)]
        single_token: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; see TrainJob for the config keys.
    Train {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rank statements by Ochiai suspiciousness.
    Localize { program: PathBuf, tests: PathBuf },
    /// Search for a plausible patch.
    Repair {
        program: PathBuf,
        tests: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        beam: usize,
        /// Scripts per statement.
        #[arg(long, default_value_t = 100)]
        candidates: usize,
        /// Suspicious statements to try.
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Pre-order id of the faulty statement; skips localization.
        #[arg(long)]
        perfect_loc: Option<u32>,
        #[arg(long)]
        no_placeholder: bool,
        /// Seconds per bug; 0 disables the limit.
        #[arg(long, default_value_t = 600)]
        time_limit: u64,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a serialized edit script to a program.
    ApplyEdit {
        program: PathBuf,
        script: PathBuf,
        /// Pre-order id of the faulty statement.
        #[arg(long)]
        stmt: u32,
    },
    /// Repair every pair of a corpus and summarize.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        /// Model checkpoint; without it the oracle scripts are replayed.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        perfect_loc: bool,
        #[arg(long, default_value_t = 100)]
        beam: usize,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// Oracle replay needs the frequency threshold of its grammar.
        #[arg(long, default_value_t = 10)]
        threshold: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Contents of the `train --config` file.
#[derive(Debug, Serialize, Deserialize)]
struct TrainJob {
    /// Pair file (JSON lines).
    data: PathBuf,
    /// Checkpoint directory.
    out: PathBuf,
    #[serde(flatten)]
    config: TrainConfig,
}

fn read_program(path: &Path) -> Result<Ast> {
    let src = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&src).with_context(|| format!("parsing {}", path.display()))
}

fn read_tests(path: &Path) -> Result<Vec<TestCase>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

fn read_pairs(path: &Path) -> Result<Vec<editrepair_core::oracle::PatchPair>> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_jsonl(BufReader::new(f))?)
}

fn print_json<T: Serialize>(v: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(v)?;
    if let Some(p) = out {
        std::fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("{text}");
    Ok(())
}

fn load_seeds(dir: &Path) -> Result<Vec<Seed>> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mini"))
        .collect();
    names.sort();
    let mut seeds = Vec::new();
    for p in names {
        let tests = p.with_extension("tests.json");
        seeds.push(Seed {
            program: read_program(&p)?,
            tests: if tests.exists() { read_tests(&tests)? } else { Vec::new() },
        });
    }
    if seeds.is_empty() {
        bail!("no .mini files in {}", dir.display());
    }
    Ok(seeds)
}

/// Exit status: 0 success, 1 no patch found, 2 usage or input error.
fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Extract { pairs, threshold, out } => {
            let pairs = read_pairs(&pairs)?;
            let eg = Vocabulary::from_pairs(&pairs, threshold).edit_grammar();
            let mut w = out.map(|p| File::create(p).map(BufWriter::new)).transpose()?;
            let mut rejected = std::collections::BTreeMap::<String, usize>::new();
            let mut accepted = 0;
            for p in &pairs {
                match extract_oracle(&eg, p, true) {
                    Ok(ex) => {
                        accepted += 1;
                        if let Some(w) = w.as_mut() {
                            let line = serde_json::json!({
                                "id": ex.id,
                                "faulty": ex.ctx.faulty,
                                "script": ex.script.to_sexp(&eg.grammar),
                                "placeholder": ex.placeholder_value,
                            });
                            writeln!(w, "{line}")?;
                        }
                    }
                    Err(r) => *rejected.entry(r.label().to_string()).or_default() += 1,
                }
            }
            print_json(&serde_json::json!({"pairs": pairs.len(), "accepted": accepted, "rejected": rejected}), None)?;
            Ok(0)
        }
        Command::Mutate {
            seed_dir,
            seeds,
            n,
            rng,
            single_token,
            out,
        } => {
            let seeds = match seed_dir {
                Some(d) => load_seeds(&d)?,
                None => generate_seeds(seeds, SeedConfig::default(), &mut ChaCha8Rng::seed_from_u64(cli.seed)),
            };
            let kinds: &[MutationKind] = if single_token {
                &editrepair_core::oracle::SINGLE_TOKEN_MUTATIONS
            } else {
                &MutationKind::ALL
            };
            let pairs = mutate_corpus(&seeds, n, kinds, rng.unwrap_or(cli.seed));
            write_jsonl(BufWriter::new(File::create(&out)?), &pairs)?;
            eprintln!("{} pairs from {} seeds -> {}", pairs.len(), seeds.len(), out.display());
            Ok(0)
        }
        Command::Train { config } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut job: TrainJob = serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
            if cli.seed != 0 {
                job.config.seed = cli.seed;
            }
            let pairs = read_pairs(&job.data)?;
            let out = train(&pairs, &job.config, Some(&job.out), |m| {
                eprintln!(
                    "epoch {} steps {} train_nll {:.4} val_nll {}",
                    m.epoch,
                    m.steps,
                    m.train_nll,
                    m.val_nll.map_or("-".into(), |v| format!("{v:.4}"))
                )
            })?;
            print_json(
                &serde_json::json!({
                    "train_examples": out.train.len(),
                    "val_examples": out.val.len(),
                    "rejected": out.train.rejected,
                    "metrics": out.metrics,
                }),
                None,
            )?;
            Ok(0)
        }
        Command::Localize { program, tests } => {
            let ast = read_program(&program)?;
            let compiled = CompiledProgram::compile(&ast).map_err(|e| anyhow::anyhow!("{} type errors", e.len()))?;
            let records = run_all(&compiled, &read_tests(&tests)?, editrepair_core::minilang::DEFAULT_FUEL);
            print_json(&ochiai(&records), None)?;
            Ok(0)
        }
        Command::Repair {
            program,
            tests,
            checkpoint,
            beam,
            candidates,
            top,
            perfect_loc,
            no_placeholder,
            time_limit,
            out,
        } => {
            let ast = read_program(&program)?;
            let tests = read_tests(&tests)?;
            let (model, _) = Model::<f32>::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let budget = RepairBudget {
                beam,
                candidates,
                top_statements: top,
                time_limit_secs: (time_limit > 0).then_some(time_limit),
                placeholders: !no_placeholder,
                ..RepairBudget::default()
            };
            let loc = perfect_loc.map_or(Localization::Ochiai, |s| Localization::Perfect(NodeId(s)));
            let report = repair(&model, &ast, &tests, &budget, loc)?;
            print_json(&report, out.as_deref())?;
            Ok(if report.plausible.is_some() { 0 } else { 1 })
        }
        Command::ApplyEdit { program, script, stmt } => {
            let ast = read_program(&program)?;
            let text = std::fs::read_to_string(&script).with_context(|| format!("reading {}", script.display()))?;
            // the grammar only matters for its symbols; frequent tokens are
            // read back from the script itself
            let eg = grammar_for_script(&text);
            let script = Ast::from_sexp(&eg.grammar, text.trim()).context("parsing the script")?;
            let ctx = EditContext::for_minilang(ast, NodeId(stmt)).map_err(|e| anyhow::anyhow!("statement {stmt}: {e}"))?;
            let patched = apply(&eg, &script, &ctx)?;
            print!("{}", print_lossy(&patched)?);
            Ok(0)
        }
        Command::Eval {
            corpus,
            checkpoint,
            perfect_loc,
            beam,
            top,
            threshold,
            out,
        } => {
            let pairs = read_pairs(&corpus)?;
            let budget = RepairBudget {
                beam,
                candidates: beam,
                top_statements: top,
                ..RepairBudget::default()
            };
            let mode = if perfect_loc { LocalizationMode::Perfect } else { LocalizationMode::Ochiai };
            let summary = match checkpoint {
                Some(c) => {
                    let (model, _) = Model::<f32>::load(&c).with_context(|| format!("loading {}", c.display()))?;
                    evaluate(&model, &pairs, &budget, mode)
                }
                None => evaluate_oracle(&Vocabulary::from_pairs(&pairs, threshold).edit_grammar(), &pairs, &budget, mode),
            };
            print_json(&summary, out.as_deref())?;
            Ok(0)
        }
    }
}

/// Edit grammar whose frequent productions cover every identifier and
/// literal token in `script`.
fn grammar_for_script(script: &str) -> editrepair_core::edit::EditGrammar {
    let grab = |head: &str| -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let pat = format!("({head} \"");
        let mut rest = script;
        while let Some(i) = rest.find(&pat) {
            rest = &rest[i + pat.len()..];
            if let Some(j) = rest.find('"') {
                let tok = rest[..j].to_string();
                if tok != editrepair_core::minilang::PLACEHOLDER && !out.contains(&tok) {
                    out.push(tok);
                }
            }
        }
        out
    };
    Vocabulary {
        identifiers: grab("Ident"),
        literals: grab("Int"),
    }
    .edit_grammar()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
