use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use sqlcex::encode::TieMode;
use sqlcex::harness::{self, EvalConfig};
use sqlcex::pipeline::{eqcheck, Prepared, TaskConfig, ValidationBackend, Verdict};
use sqlcex::schema::{load_schema, DatabaseSchema};
use sqlcex::solver::SolveBudget;
use sqlcex::sql::{printer::query_to_sql, SupportReport};

#[derive(Parser)]
#[command(name = "sqlcex", version, about = "Bounded equivalence checking for SQL queries")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check one gold/generated pair.
    Check {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        gold: String,
        #[arg(long)]
        gen: String,
        /// Directory receiving dump.json and insert.sql on a counterexample.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Evaluate a benchmark file and write reports and counterexamples.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        /// Directory of `<db_id>.json` schemas.
        #[arg(long)]
        schemas: PathBuf,
        /// Directory of `<db_id>.sql` INSERT scripts used for EX.
        #[arg(long)]
        test_dbs: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        parallelism: Option<usize>,
        #[arg(long, action = ArgAction::Set, default_value_t = true)]
        cross_check: bool,
        #[arg(long, action = ArgAction::Set, default_value_t = true)]
        verify_only_ex_passes: bool,
        #[command(flatten)]
        task: TaskArgs,
    },
    /// Run both queries on a dumped database and print the results.
    Replay {
        #[arg(long)]
        schema: PathBuf,
        /// dump.json or insert.sql
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        gold: String,
        #[arg(long)]
        gen: String,
    },
    /// Coverage and timing per method from a verdicts.jsonl file.
    Stats {
        verdicts: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Parse a query and report whether the checker supports it.
    Parse {
        #[arg(long)]
        schema: PathBuf,
        sql: String,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum Backend {
    Reference,
    Sqlite,
}

#[derive(Copy, Clone, ValueEnum)]
enum Ties {
    InputOrder,
    Arbitrary,
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long, default_value_t = 5)]
    bound: usize,
    #[arg(long, default_value_t = 600.0)]
    timeout_secs: f64,
    #[arg(long, action = ArgAction::Set, default_value_t = true)]
    exclude_degenerate: bool,
    #[arg(long, value_enum, default_value = "reference")]
    validation_backend: Backend,
    #[arg(long, value_enum, default_value = "input-order")]
    ties: Ties,
    /// Write every solver query as SMT-LIB into this directory.
    #[arg(long)]
    emit_smtlib: Option<PathBuf>,
}

impl TaskArgs {
    fn config(&self) -> Result<TaskConfig, String> {
        if let Some(d) = &self.emit_smtlib {
            std::fs::create_dir_all(d).map_err(|e| format!("{}: {e}", d.display()))?;
        }
        Ok(TaskConfig {
            max_bound: self.bound,
            budget: SolveBudget::seconds(self.timeout_secs),
            exclude_degenerate: self.exclude_degenerate,
            validation_backend: match self.validation_backend {
                Backend::Reference => ValidationBackend::Reference,
                Backend::Sqlite => ValidationBackend::Sqlite,
            },
            ties: match self.ties {
                Ties::InputOrder => TieMode::InputOrder,
                Ties::Arbitrary => TieMode::Arbitrary,
            },
            emit_smtlib: self.emit_smtlib.clone(),
            ..TaskConfig::default()
        })
    }
}

fn schema_from(path: &Path) -> Result<DatabaseSchema, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    load_schema(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.cmd {
        Cmd::Check {
            schema,
            gold,
            gen,
            out,
            task,
        } => {
            let schema = schema_from(&schema)?;
            let cfg = task.config()?;
            let gold = Prepared::parse(&gold, &schema).map_err(|e| format!("gold: {e}"))?;
            let gen = Prepared::parse(&gen, &schema).map_err(|e| format!("generated: {e}"))?;
            let outcome = eqcheck(&schema, &gold, &gen, &cfg);
            let secs = outcome.elapsed.as_secs_f64();
            match &outcome.verdict {
                Verdict::EquivalentUpTo(k) => {
                    println!("equivalent up to bound {k} ({secs:.3} s)");
                    Ok(0)
                }
                Verdict::NotEquivalent { db, bound, .. } => {
                    println!("not equivalent: counterexample at bound {bound} ({secs:.3} s)");
                    print!("{}", db.insert_script());
                    if let Some(dir) = out {
                        std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
                        let w = |name: &str, text: String| {
                            std::fs::write(dir.join(name), text).map_err(|e| format!("{}: {e}", dir.display()))
                        };
                        w("dump.json", db.to_dump_json(&schema))?;
                        w("insert.sql", db.insert_script())?;
                    }
                    Ok(0)
                }
                Verdict::Inconclusive { reason, detail } => {
                    println!("inconclusive ({reason:?}): {detail} ({secs:.3} s)");
                    Ok(1)
                }
            }
        }
        Cmd::Eval {
            dataset,
            schemas,
            test_dbs,
            out,
            parallelism,
            cross_check,
            verify_only_ex_passes,
            task,
        } => {
            let mut cfg = EvalConfig {
                task: task.config()?,
                cross_check,
                verify_only_ex_passes,
                test_dbs,
                out_dir: out,
                ..EvalConfig::default()
            };
            if let Some(p) = parallelism {
                cfg.parallelism = p;
            }
            let run = harness::run_eval(&dataset, &schemas, &cfg).map_err(|e| e.to_string())?;
            print!("{}", harness::format_report(&run.report));
            Ok(run.exit_code as u8)
        }
        Cmd::Replay { schema, dump, gold, gen } => {
            let schema = schema_from(&schema)?;
            let text = std::fs::read_to_string(&dump).map_err(|e| format!("{}: {e}", dump.display()))?;
            let r = harness::replay(&schema, &text, &gold, &gen).map_err(|e| e.to_string())?;
            println!("gold:");
            print!("{}", harness::format_relation(&r.gold));
            println!("generated:");
            print!("{}", harness::format_relation(&r.gen));
            println!("EX={}", r.ex);
            Ok(0)
        }
        Cmd::Stats { verdicts, json } => {
            let records = harness::load_records(&verdicts).map_err(|e| e.to_string())?;
            let rows = harness::stats(&records);
            if json {
                println!("{}", serde_json::to_string_pretty(&rows).map_err(|e| e.to_string())?);
            } else {
                print!("{}", harness::format_stats(&rows));
            }
            Ok(0)
        }
        Cmd::Parse { schema, sql } => {
            let schema = schema_from(&schema)?;
            let p = Prepared::parse(&sql, &schema).map_err(|e| e.to_string())?;
            println!("{}", query_to_sql(&p.query));
            match p.support() {
                SupportReport::Supported => {
                    println!("supported");
                    Ok(0)
                }
                SupportReport::Unsupported(f) => {
                    println!("unsupported: {}", f.join(", "));
                    Ok(1)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
