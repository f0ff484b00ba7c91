//! Command-line front end: run verification suites over a scenario, export
//! tree balls, and push single elements through the trace transfer.
//!
//! Exit codes: 0 all checks passed, 1 counterexample found, 2 invalid
//! input, 3 a resource budget was exhausted.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use treetrace::algebra::GroupRingElement;
use treetrace::exec::ExecMode;
use treetrace::operator::{verify_transfer, OperatorError};
use treetrace::scenario::{parse_scenario, Scenario};
use treetrace::suites::{parse_suite_set, run_suites, RunReport};
use treetrace::tree::{Tree, TreeError};
use treetrace::words::{GroupSpec, WordError};

const EXIT_PASS: u8 = 0;
const EXIT_COUNTEREXAMPLE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(
    name = "treetrace",
    version,
    about = "Exact trace and index verification over trees of finite groups"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites over a scenario.
    Verify {
        /// Scenario file (JSON).
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated subset of transfer, jv, index, poly, cyclicity,
        /// norms. Default: every suite that applies to the scenario.
        #[arg(long)]
        suites: Option<String>,
        /// Override params.radius.
        #[arg(long)]
        radius: Option<usize>,
        /// Override params.trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Override params.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the JSON report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Stdout format.
        #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
        format: ReportFormat,
        /// Omit elapsed-time fields; with a fixed scenario and seed the
        /// report is then reproducible byte for byte.
        #[arg(long)]
        no_timing: bool,
    },
    /// Print a ball of the tree the scenario's group acts on.
    ExportBall {
        /// Scenario file (JSON); must describe a tree (amalgam or hnn).
        #[arg(long)]
        scenario: PathBuf,
        /// Ball radius around the base vertex.
        #[arg(long)]
        radius: usize,
        #[arg(long, value_enum, default_value_t = BallFormat::Text)]
        format: BallFormat,
    },
    /// Trace one group element through the transfer identity.
    ComputeTrace {
        /// Scenario file (JSON); must describe a tree (amalgam or hnn).
        #[arg(long)]
        scenario: PathBuf,
        /// Whitespace-separated word, e.g. "a:r b:s12" or "h:rr t h:s01 t^-1".
        #[arg(long)]
        element: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum BallFormat {
    Dot,
    Text,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Verify {
            scenario,
            suites,
            radius,
            trials,
            seed,
            report,
            format,
            no_timing,
        } => cmd_verify(
            &scenario, suites, radius, trials, seed, report, format, no_timing,
        ),
        Command::ExportBall {
            scenario,
            radius,
            format,
        } => cmd_export_ball(&scenario, radius, format),
        Command::ComputeTrace { scenario, element } => cmd_compute_trace(&scenario, &element),
    };
    ExitCode::from(code)
}

fn invalid(e: impl std::fmt::Display) -> u8 {
    eprintln!("error: {e}");
    EXIT_INVALID
}

fn word_error_code(e: WordError) -> u8 {
    match e {
        WordError::BudgetExceeded { .. } => {
            eprintln!("error: {e}");
            EXIT_BUDGET
        }
        _ => invalid(e),
    }
}

fn tree_error_code(e: TreeError) -> u8 {
    match e {
        TreeError::BudgetExceeded { .. } => {
            eprintln!("error: {e}");
            EXIT_BUDGET
        }
        TreeError::Word(w) => word_error_code(w),
        _ => invalid(e),
    }
}

fn op_error_code(e: OperatorError) -> u8 {
    match e {
        OperatorError::Tree(t) => tree_error_code(t),
        OperatorError::Word(w) => word_error_code(w),
        _ => invalid(e),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, u8> {
    parse_scenario(path).map_err(|e| invalid(e))
}

fn load_tree(scenario: &Scenario) -> Result<(std::sync::Arc<GroupSpec>, Tree), u8> {
    match scenario.tree_spec() {
        Some(spec) => Ok((spec.clone(), Tree::new(spec.clone()))),
        None => Err(invalid(format!(
            "scenario '{}' has kind {} and no tree to act on",
            scenario.name, scenario.kind
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    scenario_path: &Path,
    suites: Option<String>,
    radius: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
    report_path: Option<PathBuf>,
    format: ReportFormat,
    no_timing: bool,
) -> u8 {
    let mut scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(r) = radius {
        if r == 0 {
            return invalid("--radius must be positive");
        }
        scenario.params.radius = r;
    }
    if let Some(t) = trials {
        if t == 0 {
            return invalid("--trials must be positive");
        }
        scenario.params.trials = t;
    }
    if let Some(s) = seed {
        scenario.params.seed = s;
    }
    let enabled = match suites.as_deref() {
        Some(list) => match parse_suite_set(list) {
            Ok(set) => Some(set),
            Err(e) => return invalid(e),
        },
        None => None,
    };
    let report = match run_suites(&scenario, enabled.as_ref(), ExecMode::Parallel, !no_timing) {
        Ok(r) => r,
        Err(e) => return invalid(e),
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    if let Some(path) = report_path {
        if let Err(e) = fs::write(&path, format!("{json}\n")) {
            return invalid(format!("cannot write {}: {e}", path.display()));
        }
    }
    match format {
        ReportFormat::Json => println!("{json}"),
        ReportFormat::Text => print_text(&report),
    }
    report.status().exit_code() as u8
}

fn print_text(report: &RunReport) {
    println!(
        "scenario: {} ({}, seed {})",
        report.scenario.name, report.scenario.kind, report.scenario.params.seed
    );
    for s in &report.suites {
        let verdict = if s.passed { "pass" } else { "FAIL" };
        let timing = s
            .elapsed_ms
            .map(|ms| format!(", {ms} ms"))
            .unwrap_or_default();
        println!(
            "suite {}: {verdict} ({} trials, {} failures{timing})",
            s.suite, s.trials, s.failures
        );
        if let Some(err) = &s.error {
            println!("  error: {err}");
        }
        for c in &s.counterexamples {
            println!("  trial {}: {}", c.trial, c.detail);
        }
    }
    println!("overall: {}", if report.passed { "pass" } else { "FAIL" });
}

fn cmd_export_ball(scenario_path: &Path, radius: usize, format: BallFormat) -> u8 {
    let scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let (_, tree) = match load_tree(&scenario) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    let budget = scenario.params.ball_budget;
    let rendered = match format {
        BallFormat::Dot => tree.export_dot(radius, budget),
        BallFormat::Text => tree.export_text(radius, budget),
    };
    match rendered {
        Ok(out) => {
            print!("{out}");
            if !out.ends_with('\n') {
                println!();
            }
            EXIT_PASS
        }
        Err(e) => tree_error_code(e),
    }
}

fn cmd_compute_trace(scenario_path: &Path, element: &str) -> u8 {
    let scenario = match load_scenario(scenario_path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let (spec, tree) = match load_tree(&scenario) {
        Ok(pair) => pair,
        Err(code) => return code,
    };
    let letters = match spec.parse_word(element) {
        Ok(l) => l,
        Err(e) => return word_error_code(e),
    };
    let g = match spec.normalize(&letters) {
        Ok(g) => g,
        Err(e) => return word_error_code(e),
    };
    let a = GroupRingElement::delta(spec.clone(), g);
    let report = match verify_transfer(&tree, &a, false) {
        Ok(r) => r,
        Err(e) => return op_error_code(e),
    };
    println!("element: {}", report.element);
    println!("group trace: {}", report.lhs);
    println!("transferred trace: {}", report.rhs);
    println!("agreement: {}", if report.equal { "yes" } else { "no" });
    if report.equal {
        EXIT_PASS
    } else {
        EXIT_COUNTEREXAMPLE
    }
}
