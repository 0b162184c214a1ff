//! `warnacc`: warning accuracy, design accuracy and p-values for stratified
//! experiments read from `stratum,treated,outcome` CSV files.
//!
//! Exit status: 0 on success, 2 on invalid input or flags, 3 when a solver
//! or enumeration budget runs out (the report is still written when one
//! exists), 1 on any other failure.

mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use warnacc_core::rational::{parse_rational, to_f64};
use warnacc_core::solver::{brute_force_all, ORACLE_CAP};
use warnacc_core::{
    chisq_upper_tail, decide, design_accuracy_with, load_experiment_path, sensitive_set, sensitivity_weights,
    warning_accuracy, warning_accuracy_with_log, DecisionMethod, Error, NullKind, NullSpec, Sidedness,
    SolverBudget, StratifiedExperiment, WarningAccuracy,
};

use report::{
    AnalyzeReport, DesignReport, InputJson, OracleReport, PvalueReport, SubjectJson, WitnessJson, SCHEMA_VERSION,
};

#[derive(Parser)]
#[command(name = "warnacc", version, about = "Outcome-misclassification sensitivity for stratified experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Warning accuracy, minimal alteration number, sensitive set and weights.
    Analyze {
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        /// Write the branch-and-bound trace to this file.
        #[arg(long)]
        search_log: Option<PathBuf>,
    },
    /// Monte-Carlo design accuracy. Outcomes in the input are ignored.
    Design {
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value_t = 1000)]
        replications: usize,
        /// Outcome probability in the control arm.
        #[arg(long)]
        p0: f64,
        /// Outcome probability in the treated arm.
        #[arg(long)]
        p1: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Leave out replications that run out of budget instead of failing.
        #[arg(long)]
        exclude_over_budget: bool,
    },
    /// Test decision and p-value on the measured outcomes.
    Pvalue {
        #[command(flatten)]
        test: TestArgs,
    },
    /// Brute-force warning accuracy with every optimal witness (small N only).
    Oracle {
        #[command(flatten)]
        test: TestArgs,
    },
}

#[derive(Args)]
struct TestArgs {
    /// CSV file with header `stratum,treated,outcome`.
    #[arg(long)]
    input: PathBuf,
    /// Significance level, as a decimal or a fraction.
    #[arg(long, default_value = "1/20")]
    alpha: String,
    #[arg(long, value_enum, default_value_t = NullArg::Sharp)]
    null: NullArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Chisq)]
    method: MethodArg,
    /// Sidedness of the exact test.
    #[arg(long, value_enum, default_value_t = SidedArg::One)]
    sided: SidedArg,
    /// Report file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BudgetArgs {
    /// Node limit of each solve.
    #[arg(long, default_value_t = 1_000_000_000)]
    max_nodes: u64,
    /// Time limit of each solve in seconds.
    #[arg(long, default_value_t = 600.0)]
    max_seconds: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum NullArg {
    Sharp,
    Weak,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Chisq,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum SidedArg {
    One,
    Two,
}

enum Failure {
    Invalid(String),
    Budget(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::EnumerationCapExceeded { .. } | Error::ReplicationBudgetExceeded { .. } => {
                Failure::Budget(e.to_string())
            }
            Error::WitnessCheck(_) => Failure::Other(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

impl TestArgs {
    fn spec(&self) -> Result<NullSpec, Failure> {
        let alpha = parse_rational(&self.alpha)?;
        let null = match self.null {
            NullArg::Sharp => NullKind::Sharp,
            NullArg::Weak => NullKind::Weak,
        };
        let method = match self.method {
            MethodArg::Chisq => DecisionMethod::ChiSquare,
            MethodArg::Exact => DecisionMethod::ExactEnumeration,
        };
        let sided = match self.sided {
            SidedArg::One => Sidedness::OneSidedUpper,
            SidedArg::Two => Sidedness::TwoSided,
        };
        Ok(NullSpec::new(null, alpha, method, sided)?)
    }

    fn load(&self) -> Result<(StratifiedExperiment, InputJson), Failure> {
        let exp = load_experiment_path(&self.input)?;
        let input = InputJson {
            subjects: exp.num_subjects(),
            strata: exp.num_strata(),
        };
        Ok((exp, input))
    }
}

impl BudgetArgs {
    fn budget(&self) -> Result<SolverBudget, Failure> {
        if !(self.max_seconds.is_finite() && self.max_seconds > 0.0) {
            return Err(Failure::Invalid("--max-seconds must be a positive number".into()));
        }
        Ok(SolverBudget::new(self.max_nodes, Duration::from_secs_f64(self.max_seconds))?)
    }
}

fn write_report<T: Serialize>(report: &T, output: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Failure::Other(e.to_string()))?;
    let io_err = |e: io::Error| Failure::Other(format!("writing report: {e}"));
    match output {
        Some(path) => {
            let mut f = File::create(path).map_err(io_err)?;
            writeln!(f, "{text}").map_err(io_err)
        }
        None => writeln!(io::stdout().lock(), "{text}").map_err(io_err),
    }
}

fn analyze(test: &TestArgs, budget: &BudgetArgs, search_log: Option<&Path>) -> Result<(), Failure> {
    let spec = test.spec()?;
    let budget = budget.budget()?;
    let (exp, input) = test.load()?;
    let report = match search_log {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Invalid(format!("search log: {e}")))?;
            let mut w = BufWriter::new(file);
            let r = warning_accuracy_with_log(&exp, &spec, budget, &mut w)?;
            w.flush().map_err(|e| Failure::Other(format!("search log: {e}")))?;
            r
        }
        None => warning_accuracy(&exp, &spec, budget)?,
    };
    write_report(&AnalyzeReport::new(input, &report), test.output.as_deref())?;
    match report.warning_accuracy {
        WarningAccuracy::LowerBound(_) | WarningAccuracy::Unknown => {
            Err(Failure::Budget("solver budget exceeded before optimality was proven".into()))
        }
        _ => Ok(()),
    }
}

fn pvalue(test: &TestArgs) -> Result<(), Failure> {
    let spec = test.spec()?;
    let (exp, input) = test.load()?;
    let d = decide(&exp, exp.measured(), &spec)?;
    let approx = match &d.p_value {
        Some(p) => to_f64(p),
        None => chisq_upper_tail(&d.statistic),
    };
    let report = PvalueReport {
        schema_version: SCHEMA_VERSION,
        command: "pvalue",
        input,
        null_spec: (&spec).into(),
        decision: (&d).into(),
        p_value: d.p_value.as_ref().map(Into::into),
        p_value_approx: approx,
    };
    write_report(&report, test.output.as_deref())
}

fn oracle(test: &TestArgs) -> Result<(), Failure> {
    let spec = test.spec()?;
    let (exp, input) = test.load()?;
    let res = brute_force_all(&exp, &spec, ORACLE_CAP)?;
    let mut witnesses = Vec::with_capacity(res.witnesses.len());
    for w in &res.witnesses {
        let set = sensitive_set(&exp, w)?;
        let weights = if set.is_empty() {
            None
        } else {
            Some((&sensitivity_weights(&exp, w)?).into())
        };
        witnesses.push(WitnessJson {
            sensitive_set: set.iter().map(SubjectJson::from).collect(),
            sensitivity_weights: weights,
        });
    }
    let man = res
        .witnesses
        .first()
        .map(|w| warnacc_core::alteration_count(exp.measured(), w))
        .transpose()?
        .map(|m| m as u64);
    let report = OracleReport {
        schema_version: SCHEMA_VERSION,
        command: "oracle",
        input,
        null_spec: (&spec).into(),
        measured_decision: (&res.measured).into(),
        warning_accuracy: (&res.warning_accuracy).into(),
        minimal_alteration_number: man,
        witnesses,
    };
    write_report(&report, test.output.as_deref())
}

#[allow(clippy::too_many_arguments)]
fn design(
    test: &TestArgs,
    budget: &BudgetArgs,
    replications: usize,
    p0: f64,
    p1: f64,
    seed: u64,
    exclude: bool,
) -> Result<(), Failure> {
    let spec = test.spec()?;
    let budget = budget.budget()?;
    let (exp, input) = test.load()?;
    let res = design_accuracy_with(&exp, p0, p1, &spec, replications, seed, budget, exclude)?;
    write_report(&DesignReport::new(input, &spec, p0, p1, &res), test.output.as_deref())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze {
            test,
            budget,
            search_log,
        } => analyze(test, budget, search_log.as_deref()),
        Command::Design {
            test,
            budget,
            replications,
            p0,
            p1,
            seed,
            exclude_over_budget,
        } => design(test, budget, *replications, *p0, *p1, *seed, *exclude_over_budget),
        Command::Pvalue { test } => pvalue(test),
        Command::Oracle { test } => oracle(test),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("budget exceeded: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
