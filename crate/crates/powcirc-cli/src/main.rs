//! Command-line driver: word problem, reduction, comparison, circuit
//! conversion, gadget generation, tower words and exact evaluation over
//! the shared JSON formats.
//!
//! Exit codes: 0 success (`wp`: trivial), 1 nontrivial word or internal
//! failure, 2 usage or malformed input, 3 evaluation budget exceeded.
//! Stdout carries one machine-readable token per query; diagnostics go to
//! stderr. `POWCIRC_BUDGET_BITS` overrides the default evaluation budget.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use powcirc::json;
use powcirc::{baumslag, gadget, reduce, Error, Marking, DEFAULT_BUDGET_BITS};

#[derive(Parser)]
#[command(name = "powcirc", version, about = "power circuit toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide whether a word over a, A, b, B, t, T, 1 is trivial in the
    /// Baumslag group (exit 0: trivial, exit 1: nontrivial)
    Wp { word: String },
    /// Reduce a circuit file, carrying its markings into compact form
    Reduce {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        /// marking to carry (default: all markings in the file)
        #[arg(short = 'm', long = "marking")]
        marking: Option<String>,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Compare two markings of a circuit file; prints LT, EQ or GT
    Cmp {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        #[arg(short = 'l', long = "left")]
        left: String,
        #[arg(short = 'm', long = "right")]
        right: String,
    },
    /// Convert between power circuits and (0,+,-,2^x)-arithmetic circuits
    Convert(ConvertArgs),
    /// Build the comparison gadget for a Boolean circuit under an assignment
    Gadget {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        /// assignment bits, e.g. 0101, one per input gate
        #[arg(long = "assign", default_value = "")]
        assign: String,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Print the tower word w_N
    Tower {
        #[arg(short = 'n')]
        n: u64,
    },
    /// Evaluate a marking exactly
    Eval {
        #[arg(short = 'i', long = "input")]
        input: PathBuf,
        #[arg(short = 'm', long = "marking")]
        marking: String,
        /// exponent budget in bits (default 2^20; env POWCIRC_BUDGET_BITS)
        #[arg(long = "budget")]
        budget: Option<u64>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ConvertDirection {
    /// power circuit with a marking -> arithmetic circuit
    #[arg(long = "to-arith")]
    to_arith: bool,
    /// arithmetic circuit -> power circuit (prints integral|non-integral)
    #[arg(long = "to-pc")]
    to_pc: bool,
}

#[derive(Args)]
struct ConvertArgs {
    #[command(flatten)]
    direction: ConvertDirection,
    #[arg(short = 'i', long = "input")]
    input: PathBuf,
    /// marking to expand (to-arith only; default: the file's only marking)
    #[arg(short = 'm', long = "marking")]
    marking: Option<String>,
    #[arg(short = 'o', long = "output")]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::EvalBudgetExceeded { .. } | Error::BudgetExceeded(_) => ExitCode::from(3),
                Error::Malformed(_)
                | Error::BadLetter(_)
                | Error::BadLabel(_)
                | Error::UnknownNode(_)
                | Error::TooLarge(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn budget_bits(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("POWCIRC_BUDGET_BITS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(DEFAULT_BUDGET_BITS)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Malformed(format!("cannot parse {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Malformed(format!("cannot serialize: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| Error::Malformed(format!("cannot write {}: {e}", path.display())))
}

fn pick_marking(
    markings: &BTreeMap<String, Marking>,
    name: &str,
) -> Result<Marking, Error> {
    markings
        .get(name)
        .cloned()
        .ok_or_else(|| Error::Malformed(format!("no marking named {name:?} in the input")))
}

fn run(cmd: Cmd) -> Result<ExitCode, Error> {
    match cmd {
        Cmd::Wp { word } => {
            if baumslag::word_problem(&word)? {
                println!("trivial");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("nontrivial");
                Ok(ExitCode::from(1))
            }
        }
        Cmd::Reduce {
            input,
            marking,
            output,
        } => {
            let loaded = json::circuit_from_file(&read_json(&input)?)?;
            let selected: Vec<(String, Marking)> = match marking {
                Some(name) => vec![(name.clone(), pick_marking(&loaded.markings, &name)?)],
                None => loaded.markings.into_iter().collect(),
            };
            let inputs: Vec<Marking> = selected.iter().map(|(_, m)| m.clone()).collect();
            let result = reduce::reduce(&loaded.circuit, &inputs)?;
            let (trimmed, compacts) = reduce::trim_reduced(&result.reduced, &result.markings)?;
            let markings: BTreeMap<String, Marking> = selected
                .iter()
                .map(|(name, _)| name.clone())
                .zip(compacts)
                .collect();
            write_json(&output, &json::reduced_to_file(&trimmed, &markings))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Cmp { input, left, right } => {
            let loaded = json::circuit_from_file(&read_json(&input)?)?;
            let l = pick_marking(&loaded.markings, &left)?;
            let m = pick_marking(&loaded.markings, &right)?;
            let token = match reduce::compare(&loaded.circuit, &l, &m)? {
                std::cmp::Ordering::Less => "LT",
                std::cmp::Ordering::Equal => "EQ",
                std::cmp::Ordering::Greater => "GT",
            };
            println!("{token}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Convert(args) => {
            if args.direction.to_arith {
                let loaded = json::circuit_from_file(&read_json(&args.input)?)?;
                let marking = match &args.marking {
                    Some(name) => pick_marking(&loaded.markings, name)?,
                    None if loaded.markings.len() == 1 => {
                        loaded.markings.values().next().unwrap().clone()
                    }
                    None => {
                        return Err(Error::Malformed(
                            "pass -m to select one of several markings".into(),
                        ))
                    }
                };
                let arith = powcirc::arith::from_power_circuit(&loaded.circuit, &marking)?;
                write_json(&args.output, &json::arith_to_file(&arith))?;
                Ok(ExitCode::SUCCESS)
            } else {
                let arith = json::arith_from_file(&read_json(&args.input)?)?;
                let out = powcirc::arith::to_power_circuit(&arith)?;
                let mut markings = BTreeMap::new();
                markings.insert("out".to_string(), out.marking);
                write_json(&args.output, &json::circuit_to_file(&out.circuit, &markings))?;
                println!("{}", if out.integral { "integral" } else { "non-integral" });
                Ok(ExitCode::SUCCESS)
            }
        }
        Cmd::Gadget {
            input,
            assign,
            output,
        } => {
            let loaded = json::bool_from_file(&read_json(&input)?)?;
            let layered = match loaded.layered()? {
                Some(l) => l,
                None => gadget::normalize(&loaded.circuit, loaded.circuit.depth())?,
            };
            let bits: Vec<bool> = assign
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Malformed(format!(
                        "assignment bit must be 0 or 1, got {other:?}"
                    ))),
                })
                .collect::<Result<_, _>>()?;
            if bits.len() != layered.n_inputs() {
                return Err(Error::Malformed(format!(
                    "assignment has {} bits for {} inputs",
                    bits.len(),
                    layered.n_inputs()
                )));
            }
            let built = gadget::build(&layered)?;
            let pc = built.with_assignment(&bits);
            let mut markings = BTreeMap::new();
            markings.insert(
                "A".to_string(),
                Marking::from_pairs([(built.a, 1)])?,
            );
            markings.insert(
                "B".to_string(),
                Marking::from_pairs([(built.b, 1)])?,
            );
            write_json(&output, &json::circuit_to_file(&pc, &markings))?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Tower { n } => {
            println!("{}", baumslag::tower_word(n)?);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Eval {
            input,
            marking,
            budget,
        } => {
            let loaded = json::circuit_from_file(&read_json(&input)?)?;
            let m = pick_marking(&loaded.markings, &marking)?;
            let value = loaded.circuit.eval_exact(&m, budget_bits(budget))?;
            println!("{value}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
