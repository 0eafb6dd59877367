//! Command-line frontend: parse, evaluate, translate, model check, build
//! reduction instances, generate inputs, and run property suites.
//!
//! Exit codes: `eval` mirrors its verdict (0 true, 1 false), `mc` uses
//! 0 holds, 1 refuted, 3 holds-on-approx, 4 unknown; errors are 2
//! everywhere; `check-props` exits 1 when any suite reports a failure.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use teamltl::formula::{
    classify_fragment, fragment_flags, parse_team_formula_with, render, FamilyRegistry,
    TeamFormula,
};
use teamltl::kripke::{mc_teamltl, KripkeStructure, McBounds, McMode, McVerdict};
use teamltl::propgen;
use teamltl::reduction::{
    build_formula_lossy, build_formula_nonlossy, build_kripke, build_sat_embedding,
    CounterMachine,
};
use teamltl::team_eval;
use teamltl::traces::TeamFile;
use teamltl::translate::{full_translate, kcoherent_translate, leftflat_translate};

#[derive(Parser)]
#[command(name = "teamltl", about = "TeamLTL verification toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct FormulaInput {
    /// Formula text.
    #[arg(long, short = 'e', conflicts_with = "formula_file")]
    formula: Option<String>,
    /// Read the formula from a file.
    #[arg(long)]
    formula_file: Option<PathBuf>,
    /// Relation-family file for gen[NAME] atoms.
    #[arg(long)]
    families: Option<PathBuf>,
}

impl FormulaInput {
    fn read(&self) -> Result<TeamFormula, String> {
        let text = match (&self.formula, &self.formula_file) {
            (Some(t), _) => t.clone(),
            (None, Some(p)) => {
                fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?
            }
            (None, None) => return Err("provide --formula or --formula-file".into()),
        };
        let registry = match &self.families {
            Some(p) => {
                let ftext =
                    fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                FamilyRegistry::parse(&ftext)?
            }
            None => FamilyRegistry::new(),
        };
        parse_team_formula_with(text.trim(), &registry).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FragmentArg {
    Kcoherent,
    Leftflat,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Kcoherent,
    Leftflat,
    Bounded,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceVariant {
    Lossy,
    Nonlossy,
    SatEmbed,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Team,
    Formula,
    Kripke,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a formula and print its canonical form and fragment.
    Parse {
        #[command(flatten)]
        input: FormulaInput,
    },
    /// Evaluate a formula on a team file.
    Eval {
        #[command(flatten)]
        input: FormulaInput,
        /// Team file (JSON).
        #[arg(long)]
        team: PathBuf,
        /// Evaluation step; defaults to the file's index.
        #[arg(long)]
        index: Option<usize>,
        /// Print the split choices of a satisfied formula.
        #[arg(long)]
        explain: bool,
    },
    /// Translate a formula into the hyper grammar.
    Translate {
        #[command(flatten)]
        input: FormulaInput,
        #[arg(long, value_enum)]
        fragment: FragmentArg,
        /// Trace-variable count for the kcoherent fragment.
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Model check a formula against a Kripke structure.
    Mc {
        #[command(flatten)]
        input: FormulaInput,
        /// Kripke file (JSON).
        #[arg(long)]
        kripke: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Enumeration bounds for the bounded mode and witness search.
        #[arg(long, default_value_t = 3)]
        stem_max: usize,
        #[arg(long, default_value_t = 2)]
        loop_max: usize,
        /// Cap on the witness-trajectory search.
        #[arg(long, default_value_t = 4096)]
        bounds_cap: usize,
    },
    /// Build the counter-machine reduction artifacts.
    Reduce {
        /// Machine file: one instruction per line.
        #[arg(long)]
        machine: PathBuf,
        /// Recurrence label.
        #[arg(long, default_value_t = 0)]
        b: usize,
        #[arg(long, value_enum)]
        variant: ReduceVariant,
        /// Output path for the structure (JSON).
        #[arg(long)]
        out_kripke: PathBuf,
        /// Output path for the formula.
        #[arg(long)]
        out_formula: PathBuf,
    },
    /// Generate a seeded team, formula, or Kripke structure.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        max_traces: usize,
        #[arg(long, default_value_t = 3)]
        stem_max: usize,
        #[arg(long, default_value_t = 2)]
        loop_max: usize,
        #[arg(long, default_value_t = 2)]
        ap_count: usize,
        #[arg(long, default_value_t = 4)]
        depth: usize,
        /// Fragment for formula generation: plain, kcoherent-eligible,
        /// left-flat, bor-ne-flat, or any.
        #[arg(long, default_value = "kcoherent-eligible")]
        fragment: String,
        #[arg(long, default_value_t = 4)]
        max_states: usize,
    },
    /// Run a registered property suite.
    CheckProps {
        /// Suite name, or "all".
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 200)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    match &cli.command {
        Command::Parse { input } => {
            let f = input.read()?;
            let flags = fragment_flags(&f);
            if cli.format == Format::Json {
                println!(
                    "{}",
                    json!({
                        "formula": render(&f),
                        "fragment": classify_fragment(&f).to_string(),
                        "size": f.size(),
                        "flags": {
                            "plain": flags.plain,
                            "kcoherent_eligible": flags.k_coherent_eligible,
                            "left_flat": flags.left_flat,
                            "bor_ne_flat": flags.general_bor_ne_flat,
                        },
                    })
                );
            } else {
                println!("{}", render(&f));
                println!("fragment: {}", classify_fragment(&f));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            input,
            team,
            index,
            explain,
        } => {
            let f = input.read()?;
            let text =
                fs::read_to_string(team).map_err(|e| format!("{}: {e}", team.display()))?;
            let file = TeamFile::parse(&text).map_err(|e| e.to_string())?;
            let team = file.into_team();
            let at = index.unwrap_or(team.index);
            let verdict = team_eval::eval(team.traces(), at, &f);
            let lines = if *explain && verdict {
                team_eval::explain(team.traces(), at, &f)
            } else {
                Vec::new()
            };
            if cli.format == Format::Json {
                println!(
                    "{}",
                    json!({"verdict": verdict, "index": at, "explain": lines})
                );
            } else {
                println!("{verdict}");
                for l in lines {
                    println!("  {l}");
                }
            }
            Ok(if verdict {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Translate { input, fragment, k } => {
            let f = input.read()?;
            let hyper = match fragment {
                FragmentArg::Kcoherent => {
                    kcoherent_translate(&f, *k).map_err(|e| e.to_string())?
                }
                FragmentArg::Leftflat => {
                    leftflat_translate(&f).map_err(|e| e.to_string())?.closed
                }
                FragmentArg::Full => full_translate(&f).map_err(|e| e.to_string())?.formula,
            };
            if cli.format == Format::Json {
                println!(
                    "{}",
                    json!({
                        "hyper": hyper.to_string(),
                        "size": hyper.size(),
                        "prefix_len": hyper.prefix.len(),
                    })
                );
            } else {
                println!("{hyper}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Mc {
            input,
            kripke,
            mode,
            k,
            stem_max,
            loop_max,
            bounds_cap,
        } => {
            let f = input.read()?;
            let text = fs::read_to_string(kripke)
                .map_err(|e| format!("{}: {e}", kripke.display()))?;
            let structure = KripkeStructure::parse(&text).map_err(|e| e.to_string())?;
            let mc_mode = match mode {
                ModeArg::Kcoherent => McMode::KCoherent(*k),
                ModeArg::Leftflat => McMode::LeftFlat,
                ModeArg::Bounded => McMode::Bounded {
                    stem_max: *stem_max,
                    loop_max: *loop_max,
                },
            };
            let bounds = McBounds {
                witness_stem: *stem_max,
                witness_loop: *loop_max,
                state_cap: *bounds_cap,
            };
            let verdict =
                mc_teamltl(&structure, &f, &mc_mode, &bounds).map_err(|e| e.to_string())?;
            let (name, code, detail) = match &verdict {
                McVerdict::Holds => ("holds", 0u8, json!({})),
                McVerdict::Refuted { counterexample } => (
                    "refuted",
                    1,
                    json!({
                        "counterexample": counterexample.as_ref().map(|traces| {
                            traces
                                .iter()
                                .map(|t| json!({"stem": t.stem, "loop": t.cycle}))
                                .collect::<Vec<_>>()
                        })
                    }),
                ),
                McVerdict::HoldsOnApprox { stem_max, loop_max } => (
                    "holds-on-approx",
                    3,
                    json!({"stem_max": stem_max, "loop_max": loop_max}),
                ),
                McVerdict::Unknown { detail } => ("unknown", 4, json!({"detail": detail})),
            };
            if cli.format == Format::Json {
                println!("{}", json!({"verdict": name, "detail": detail}));
            } else {
                println!("{name}");
                if detail != json!({}) {
                    println!("  {detail}");
                }
            }
            Ok(ExitCode::from(code))
        }
        Command::Reduce {
            machine,
            b,
            variant,
            out_kripke,
            out_formula,
        } => {
            let text = fs::read_to_string(machine)
                .map_err(|e| format!("{}: {e}", machine.display()))?;
            let m = CounterMachine::parse(&text).map_err(|e| e.to_string())?;
            let (structure, formula) = match variant {
                ReduceVariant::Lossy => (
                    build_kripke(&m),
                    build_formula_lossy(&m, *b).map_err(|e| e.to_string())?,
                ),
                ReduceVariant::Nonlossy => (
                    build_kripke(&m),
                    build_formula_nonlossy(&m, *b).map_err(|e| e.to_string())?,
                ),
                ReduceVariant::SatEmbed => build_sat_embedding(&build_kripke(&m)),
            };
            fs::write(out_kripke, structure.to_json())
                .map_err(|e| format!("{}: {e}", out_kripke.display()))?;
            fs::write(out_formula, render(&formula) + "\n")
                .map_err(|e| format!("{}: {e}", out_formula.display()))?;
            if cli.format == Format::Json {
                println!(
                    "{}",
                    json!({
                        "kripke": out_kripke.display().to_string(),
                        "formula": out_formula.display().to_string(),
                        "states": structure.states.len(),
                        "formula_size": formula.size(),
                    })
                );
            } else {
                println!(
                    "wrote {} ({} states) and {} (size {})",
                    out_kripke.display(),
                    structure.states.len(),
                    out_formula.display(),
                    formula.size()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen {
            kind,
            seed,
            max_traces,
            stem_max,
            loop_max,
            ap_count,
            depth,
            fragment,
            max_states,
        } => {
            match kind {
                GenKind::Team => {
                    let team =
                        propgen::gen_team(*seed, *max_traces, *stem_max, *loop_max, *ap_count);
                    let ap = ["a", "b", "c", "e"]
                        .iter()
                        .take(*ap_count)
                        .map(|s| s.to_string())
                        .collect();
                    let file = TeamFile::from_team(&team, ap);
                    println!("{}", serde_json::to_string_pretty(&file).unwrap());
                }
                GenKind::Formula => {
                    use teamltl::formula::Fragment;
                    let frag = match fragment.as_str() {
                        "plain" => Fragment::PlainTeamLtl,
                        "kcoherent-eligible" => Fragment::KCoherentEligible,
                        "left-flat" => Fragment::LeftFlat,
                        "bor-ne-flat" => Fragment::GeneralBorNeFlat,
                        "any" => Fragment::Unsupported,
                        other => return Err(format!("unknown fragment {other:?}")),
                    };
                    let f = propgen::gen_formula(*seed, *depth, frag);
                    println!("{}", render(&f));
                }
                GenKind::Kripke => {
                    let k = propgen::gen_kripke(*seed, *max_states, *ap_count);
                    println!("{}", k.to_json());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::CheckProps {
            suite,
            trials,
            seed,
        } => {
            let names: Vec<&str> = if suite == "all" {
                propgen::suite_names()
                    .into_iter()
                    .filter(|n| !n.ends_with(":mutated"))
                    .collect()
            } else {
                vec![suite.as_str()]
            };
            let mut all_ok = true;
            let mut reports = Vec::new();
            for name in names {
                let report =
                    propgen::run_suite(name, *trials, *seed).map_err(|e| e.to_string())?;
                all_ok &= report.ok();
                if cli.format == Format::Text {
                    println!("{}", report.line());
                }
                reports.push(json!({
                    "suite": report.name,
                    "trials": report.trials,
                    "passes": report.passes,
                    "failures": report.failures,
                    "escalations": report.escalations,
                    "counterexample": report.first_counterexample,
                    "millis": report.duration.as_millis() as u64,
                }));
            }
            if cli.format == Format::Json {
                println!("{}", json!({"reports": reports, "ok": all_ok}));
            }
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
