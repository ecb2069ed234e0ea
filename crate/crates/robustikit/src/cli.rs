//! Command-line interface.
//!
//! Exit codes, uniform across subcommands:
//!
//! * `0` — success; every checked property holds.
//! * `1` — a checked property fails, a construction is unusable, or a
//!   simulated walk hits a violation.
//! * `2` — usage, parse, or validation error.
//! * `3` — the state space exceeds the configured cap.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::checks::{
    check_feasibility, check_invariant_preservation, check_partitioning, CheckError,
    CheckOptions, CheckReport, WitnessPolicy,
};
use crate::analysis::funcs::SafparMode;
use crate::analysis::smtlib::{emit_smtlib, SmtQuery};
use crate::dsl::{load_source, print_eventb, print_machine, print_uncertainty, SourceFile};
use crate::explore::{run_workflow, sweep, ExploreError, WorkflowStage};
use crate::model::{ConstBinding, Machine, ModelError, UncertaintySpec};
use crate::report::{
    self, envelope, machine_detail_value, paired_value, robustify_value, sweep_value, to_value,
    workflow_value,
};
use crate::sim::{simulate, SimError, SimOptions, SimOutcome};
use crate::transform::{
    inject, render_paired, robustify, RobustMethod, RobustifyOptions, TransformError,
};

#[derive(Parser)]
#[command(
    name = "robustikit",
    version,
    about = "Model, check, and robustify finite-state controllers that act on imperfect observations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file, printing its canonical form
    Parse(ParseArgs),
    /// Check partitioning, invariant preservation, and feasibility
    Check(CheckArgs),
    /// Pair a machine with an uncertainty description
    Inject(InjectArgs),
    /// Build a robustified controller (preserving, repurposing, or auto)
    Robustify(RobustifyArgs),
    /// Run the full pipeline: base checks, injection, both constructions
    Workflow(WorkflowArgs),
    /// Evaluate both constructions across a range of a symbolic bound
    Sweep(SweepArgs),
    /// Take a seeded random walk and watch the invariants
    Simulate(SimulateArgs),
    /// Emit a machine or proof obligation in another format
    Export(ExportArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Model file (.cpm)
    file: PathBuf,
    /// Machine to use when the file declares several
    #[arg(long)]
    machine: Option<String>,
    /// Bind a symbolic constant, e.g. --set Delta=3 (repeatable)
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Abort when the state space exceeds this many states
    #[arg(long, default_value_t = 10_000_000)]
    cap: u64,
    /// Worker threads (default: all cores; env ROBUSTIKIT_JOBS also works)
    #[arg(long)]
    jobs: Option<usize>,
    /// Emit a machine-readable JSON report on stdout
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct WitnessArgs {
    /// How many counterexamples to collect per check
    #[arg(long, value_enum, default_value_t = WitnessArg::First)]
    witnesses: WitnessArg,
    /// Keep at most this many counterexamples (with --witnesses all)
    #[arg(long)]
    max_witnesses: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WitnessArg {
    First,
    All,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    witnesses: WitnessArgs,
}

#[derive(Args)]
struct InjectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Uncertainty description to pair with
    #[arg(long)]
    uncertainty: Option<String>,
    /// Write the paired machine here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Preserving,
    Repurposing,
    Auto,
}

#[derive(Args)]
struct RobustifyArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    witnesses: WitnessArgs,
    #[arg(long)]
    uncertainty: Option<String>,
    #[arg(long, value_enum, default_value_t = MethodArg::Auto)]
    method: MethodArg,
    /// Write the robustified machine here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the draft machine even when its usability condition fails
    #[arg(long)]
    force: bool,
    /// Keep events for subsets no perception realizes
    #[arg(long)]
    no_prune: bool,
    /// Repurposing: constrain safe parameters only where the guard region
    /// meets the ball
    #[arg(long)]
    safpar_prose: bool,
}

#[derive(Args)]
struct WorkflowArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    witnesses: WitnessArgs,
    #[arg(long)]
    uncertainty: Option<String>,
    /// Write the resulting machine here
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    safpar_prose: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    uncertainty: Option<String>,
    /// Symbolic constant to sweep (defaults to the only unbound one)
    #[arg(long)]
    param: Option<String>,
    /// Inclusive value range, e.g. 0..10
    #[arg(long)]
    range: String,
    #[arg(long)]
    safpar_prose: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = 100)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Dsl,
    EventbText,
    Json,
    Smt2,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QueryArg {
    Partitioning,
    Preservation,
    Feasibility,
    Vacuity,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = FormatArg::Dsl)]
    format: FormatArg,
    /// Obligation to encode (required for --format smt2)
    #[arg(long, value_enum)]
    query: Option<QueryArg>,
    /// Controller indices for --query vacuity, e.g. 1,2,3
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    uncertainty: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` and runs the selected command, returning the process exit
/// code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.exit_code() == 0 { 0 } else { 2 };
        }
    };
    let result = match cli.command {
        Command::Parse(a) => cmd_parse(a),
        Command::Check(a) => cmd_check(a),
        Command::Inject(a) => cmd_inject(a),
        Command::Robustify(a) => cmd_robustify(a),
        Command::Workflow(a) => cmd_workflow(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs with the process arguments.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

struct Failure {
    code: i32,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

/// Classifies an error: cap overruns exit 3, everything else is an input
/// problem (2).
///
/// The wrapper enums forward `Display` and `source` transparently, which
/// hides the intermediate layers from the `source()` chain — so this
/// matches the nested variants directly instead of walking the chain.
fn classify<E: std::error::Error + 'static>(e: E) -> Failure {
    fn model(m: &ModelError) -> bool {
        matches!(m, ModelError::StateSpaceTooLarge { .. })
    }
    fn check(c: &CheckError) -> bool {
        matches!(c, CheckError::Model(m) if model(m))
    }
    fn transform(t: &TransformError) -> bool {
        match t {
            TransformError::Check(c) => check(c),
            TransformError::Model(m) => model(m),
            _ => false,
        }
    }
    let err: &(dyn std::error::Error + 'static) = &e;
    let cap = if let Some(m) = err.downcast_ref::<ModelError>() {
        model(m)
    } else if let Some(c) = err.downcast_ref::<CheckError>() {
        check(c)
    } else if let Some(t) = err.downcast_ref::<TransformError>() {
        transform(t)
    } else if let Some(x) = err.downcast_ref::<ExploreError>() {
        match x {
            ExploreError::Transform(t) => transform(t),
            ExploreError::Check(c) => check(c),
            _ => false,
        }
    } else if let Some(s) = err.downcast_ref::<SimError>() {
        matches!(s, SimError::Model(m) if model(m))
    } else {
        false
    };
    Failure { code: if cap { 3 } else { 2 }, message: e.to_string() }
}

fn configure_jobs(requested: Option<usize>) {
    let jobs = requested.or_else(|| {
        std::env::var("ROBUSTIKIT_JOBS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = jobs {
        // A second configuration attempt in one process is harmless: the
        // pool keeps its first shape.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load(input: &InputArgs) -> Result<SourceFile, Failure> {
    configure_jobs(input.jobs);
    let text = fs::read_to_string(&input.file)
        .map_err(|e| usage(format!("cannot read {}: {e}", input.file.display())))?;
    load_source(&text).map_err(|diags| {
        let rendered: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        usage(format!("{} does not load:\n{}", input.file.display(), rendered.join("\n")))
    })
}

fn pick_machine<'a>(src: &'a SourceFile, input: &InputArgs) -> Result<&'a Machine, Failure> {
    match &input.machine {
        Some(name) => src
            .machines
            .iter()
            .find(|m| &m.name == name)
            .ok_or_else(|| usage(format!("no machine named `{name}` in the file"))),
        None => match src.machines.as_slice() {
            [one] => Ok(one),
            [] => Err(usage("the file declares no machine")),
            many => Err(usage(format!(
                "the file declares several machines ({}); pick one with --machine",
                many.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        },
    }
}

fn pick_spec<'a>(
    src: &'a SourceFile,
    name: &Option<String>,
    m: &Machine,
) -> Result<&'a UncertaintySpec, Failure> {
    match name {
        Some(name) => {
            let spec = src
                .uncertainties
                .iter()
                .find(|u| &u.name == name)
                .ok_or_else(|| usage(format!("no uncertainty description named `{name}`")))?;
            if spec.machine != m.name {
                return Err(usage(format!(
                    "uncertainty `{name}` describes machine `{}`, not `{}`",
                    spec.machine, m.name
                )));
            }
            Ok(spec)
        }
        None => {
            let mut candidates =
                src.uncertainties.iter().filter(|u| u.machine == m.name);
            match (candidates.next(), candidates.next()) {
                (Some(one), None) => Ok(one),
                (None, _) => Err(usage(format!(
                    "the file has no uncertainty description for machine `{}`",
                    m.name
                ))),
                (Some(_), Some(_)) => Err(usage(format!(
                    "several uncertainty descriptions target `{}`; pick one with --uncertainty",
                    m.name
                ))),
            }
        }
    }
}

fn parse_sets(set: &[String]) -> Result<ConstBinding, Failure> {
    let mut consts = ConstBinding::new();
    for item in set {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects NAME=VALUE, got `{item}`")))?;
        let value: i64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("--set {name}: `{value}` is not an integer")))?;
        consts.insert(name.trim().to_string(), value);
    }
    Ok(consts)
}

fn check_options(input: &InputArgs, witnesses: &WitnessArgs) -> CheckOptions {
    CheckOptions {
        policy: match witnesses.witnesses {
            WitnessArg::First => WitnessPolicy::First,
            WitnessArg::All => WitnessPolicy::All,
        },
        cap: input.cap as u128,
        max_witnesses: witnesses.max_witnesses,
        ..CheckOptions::default()
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn print_json(command: &str, result: serde_json::Value) {
    print!("{}", report::render(&envelope(command, result)));
}

fn cmd_parse(a: ParseArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    if a.input.json {
        print_json(
            "parse",
            json!({
                "machines": src.machines.iter().map(machine_detail_value).collect::<Vec<_>>(),
                "uncertainties": src.uncertainties.iter().map(|u| json!({
                    "name": u.name, "machine": u.machine, "text": print_uncertainty(u),
                })).collect::<Vec<_>>(),
                "warnings": src.diagnostics.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            }),
        );
        return Ok(0);
    }
    let mut parts: Vec<String> = src.machines.iter().map(print_machine).collect();
    parts.extend(src.uncertainties.iter().map(print_uncertainty));
    print!("{}", parts.join("\n"));
    Ok(0)
}

fn cmd_check(a: CheckArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    let m = pick_machine(&src, &a.input)?;
    let consts = parse_sets(&a.input.set)?;
    let opts = check_options(&a.input, &a.witnesses);
    let reports: Vec<CheckReport> = vec![
        check_partitioning(m, &consts, &opts).map_err(classify)?,
        check_invariant_preservation(m, &consts, &opts).map_err(classify)?,
        check_feasibility(m, &consts, &opts).map_err(classify)?,
    ];
    let all_hold = reports.iter().all(|r| r.verdict.holds());
    if a.input.json || !all_hold {
        print_json(
            "check",
            json!({
                "machine": m.name,
                "holds": all_hold,
                "checks": reports.iter().map(to_value).collect::<Vec<_>>(),
            }),
        );
    } else {
        for r in &reports {
            println!("{}: holds ({} states)", r.kind, r.stats.states_visited);
        }
    }
    Ok(if all_hold { 0 } else { 1 })
}

fn cmd_inject(a: InjectArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    let m = pick_machine(&src, &a.input)?;
    let spec = pick_spec(&src, &a.uncertainty, m)?;
    let consts = parse_sets(&a.input.set)?;
    let opts = CheckOptions { cap: a.input.cap as u128, ..CheckOptions::default() };
    let pm = inject(m, spec, &consts, &opts).map_err(classify)?;
    let text = render_paired(&pm);
    if a.input.json {
        print_json("inject", paired_value(&pm));
        if let Some(out) = &a.out {
            emit(&Some(out.clone()), &text)?;
        }
    } else {
        emit(&a.out, &text)?;
    }
    Ok(0)
}

fn cmd_robustify(a: RobustifyArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    let m = pick_machine(&src, &a.input)?;
    let spec = pick_spec(&src, &a.uncertainty, m)?;
    let consts = parse_sets(&a.input.set)?;
    let opts = RobustifyOptions {
        prune: !a.no_prune,
        safpar_mode: if a.safpar_prose { SafparMode::Prose } else { SafparMode::Formula },
        check: check_options(&a.input, &a.witnesses),
    };

    if a.method == MethodArg::Auto {
        let report = run_workflow(m, spec, &consts, &opts).map_err(explore_failure)?;
        let code = match report.stage {
            WorkflowStage::Infeasible => 1,
            _ => 0,
        };
        if a.input.json {
            print_json("robustify", workflow_value(&report));
        } else if let Some(machine) = &report.result {
            emit(&a.out, &print_machine(machine))?;
        } else {
            println!("infeasible: neither construction is usable under `{}`", spec.name);
            println!("recommendation: {}", report.recommendation.unwrap_or_default());
        }
        if a.input.json {
            if let (Some(out), Some(machine)) = (&a.out, &report.result) {
                emit(&Some(out.clone()), &print_machine(machine))?;
            }
        }
        return Ok(code);
    }

    let method = match a.method {
        MethodArg::Preserving => RobustMethod::Preserving,
        MethodArg::Repurposing => RobustMethod::Repurposing,
        MethodArg::Auto => unreachable!(),
    };
    let pm = inject(m, spec, &consts, &opts.check).map_err(classify)?;
    let outcome = robustify(&pm, method, &consts, &opts).map_err(classify)?;
    let usable = outcome.condition.verdict.holds();
    if a.input.json {
        print_json("robustify", robustify_value(&outcome));
    }
    match (&outcome.machine, a.force) {
        (Some(machine), _) => {
            if !a.input.json || a.out.is_some() {
                emit(&a.out, &print_machine(machine))?;
            }
        }
        (None, true) => {
            if !a.input.json || a.out.is_some() {
                emit(&a.out, &print_machine(&outcome.draft))?;
            }
            eprintln!(
                "warning: the {} condition fails; this draft is for inspection only",
                outcome.condition.kind
            );
        }
        (None, false) => {
            if !a.input.json {
                print_json("robustify", robustify_value(&outcome));
            }
        }
    }
    Ok(if usable { 0 } else { 1 })
}

fn explore_failure(e: ExploreError) -> Failure {
    match &e {
        ExploreError::Precondition { report, .. } => {
            print_json(
                "workflow",
                json!({ "precondition_failure": to_value(report.as_ref()) }),
            );
            Failure { code: 1, message: e.to_string() }
        }
        _ => classify(e),
    }
}

fn cmd_workflow(a: WorkflowArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    let m = pick_machine(&src, &a.input)?;
    let spec = pick_spec(&src, &a.uncertainty, m)?;
    let consts = parse_sets(&a.input.set)?;
    let opts = RobustifyOptions {
        prune: true,
        safpar_mode: if a.safpar_prose { SafparMode::Prose } else { SafparMode::Formula },
        check: check_options(&a.input, &a.witnesses),
    };
    let report = run_workflow(m, spec, &consts, &opts).map_err(explore_failure)?;
    if a.input.json {
        print_json("workflow", workflow_value(&report));
    } else {
        match report.stage {
            WorkflowStage::Preserving => println!("stage: preserving construction succeeded"),
            WorkflowStage::Repurposing => {
                println!("stage: preserving failed; repurposing construction succeeded")
            }
            WorkflowStage::Infeasible => {
                println!("stage: infeasible — neither construction is usable");
                println!("recommendation: {}", report.recommendation.unwrap_or_default());
            }
        }
        if let Some(machine) = &report.result {
            println!("result machine: {}", machine.name);
        }
    }
    if let Some(machine) = &report.result {
        if let Some(out) = &a.out {
            emit(&Some(out.clone()), &print_machine(machine))?;
        }
    }
    Ok(match report.stage {
        WorkflowStage::Infeasible => 1,
        _ => 0,
    })
}

fn cmd_sweep(a: SweepArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    let m = pick_machine(&src, &a.input)?;
    let spec = pick_spec(&src, &a.uncertainty, m)?;
    let consts = parse_sets(&a.input.set)?;
    let (lo, hi) = a
        .range
        .split_once("..")
        .and_then(|(lo, hi)| Some((lo.trim().parse().ok()?, hi.trim().parse().ok()?)))
        .ok_or_else(|| usage(format!("--range expects LO..HI, got `{}`", a.range)))?;
    let opts = RobustifyOptions {
        prune: true,
        safpar_mode: if a.safpar_prose { SafparMode::Prose } else { SafparMode::Formula },
        check: CheckOptions { cap: a.input.cap as u128, ..CheckOptions::default() },
    };
    let report = sweep(m, spec, a.param.as_deref(), lo, hi, &consts, &opts).map_err(classify)?;
    if a.input.json {
        print_json("sweep", sweep_value(&report));
    } else {
        print!("{}", report.render_table());
    }
    Ok(0)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    let m = pick_machine(&src, &a.input)?;
    let consts = parse_sets(&a.input.set)?;
    let opts = SimOptions {
        seed: a.seed,
        steps: a.steps,
        cap: a.input.cap as u128,
        ..SimOptions::default()
    };
    let report = simulate(m, &consts, &opts).map_err(classify)?;
    if a.input.json {
        print_json("simulate", to_value(&report));
    } else {
        let fmt_state = |s: &std::collections::BTreeMap<String, String>| {
            s.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
        };
        println!("initial: {}", fmt_state(&report.initial));
        for (i, step) in report.steps.iter().enumerate() {
            let params = step
                .params
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            println!("#{:<4} {} [{}] -> {}", i, step.event, params, fmt_state(&step.state));
        }
        match &report.outcome {
            SimOutcome::Completed => println!("completed {} steps", report.steps.len()),
            SimOutcome::Deadlock { step } => println!("deadlock at step {step}"),
            SimOutcome::Violation { step, invariant } => {
                println!("violation of `{invariant}` at step {step}")
            }
        }
    }
    Ok(match report.outcome {
        SimOutcome::Violation { .. } => 1,
        _ => 0,
    })
}

fn cmd_export(a: ExportArgs) -> Result<i32, Failure> {
    let src = load(&a.input)?;
    let m = pick_machine(&src, &a.input)?;
    let consts = parse_sets(&a.input.set)?;
    match a.format {
        FormatArg::Dsl => {
            let mut text = print_machine(m);
            if let Some(name) = &a.uncertainty {
                let spec = pick_spec(&src, &Some(name.clone()), m)?;
                text.push('\n');
                text.push_str(&print_uncertainty(spec));
            }
            emit(&a.out, &text)?;
        }
        FormatArg::EventbText => emit(&a.out, &print_eventb(m))?,
        FormatArg::Json => {
            let value = envelope("export", machine_detail_value(m));
            emit(&a.out, &report::render(&value))?;
        }
        FormatArg::Smt2 => {
            let query = match a.query.ok_or_else(|| usage("--format smt2 needs --query"))? {
                QueryArg::Partitioning => SmtQuery::Partitioning,
                QueryArg::Preservation => SmtQuery::Preservation,
                QueryArg::Feasibility => SmtQuery::Feasibility,
                QueryArg::Vacuity => {
                    let subset = a
                        .subset
                        .as_deref()
                        .ok_or_else(|| usage("--query vacuity needs --subset, e.g. 1,2,3"))?;
                    let subset: Vec<usize> = subset
                        .split(',')
                        .map(|s| s.trim().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| usage(format!("bad --subset `{subset}`")))?;
                    SmtQuery::Vacuity { subset }
                }
            };
            let spec = match &a.uncertainty {
                Some(name) => Some(pick_spec(&src, &Some(name.clone()), m)?),
                None => src.uncertainties.iter().find(|u| u.machine == m.name),
            };
            let script = emit_smtlib(m, spec, &query, &consts).map_err(classify)?;
            emit(&a.out, &script)?;
        }
    }
    Ok(0)
}
