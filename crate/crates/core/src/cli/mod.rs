//! Command-line front end. The `shelterq` binary only forwards to [`main_with`].
//!
//! Exit codes: 0 success, 2 validation, 3 infeasible, 4 numerical
//! inconsistency (also used for a failed trace check), 1 for I/O failures.

pub mod scenario;

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::erlang::{erlang_a_metrics, ErlangAMetrics};
use crate::error::Error;
use crate::experiments::{
    comparison_table, compare_scenarios, summary_document, sweep, verify_traces, write_replications_csv,
    write_summary_json, write_sweep_csv, NamedScenario, Replications, SummaryDocument,
};
use crate::staffing::{Regime, StaffingResult};

pub use scenario::{Diagnostic, LoadedScenario, PolicyChoice, PolicyMode, Resolved, ScenarioFile, ScenarioPlan};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SHELTERQ_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "shelterq-out";

#[derive(Debug, Parser)]
#[command(name = "shelterq", version, about = "Bed staffing, priority thresholds and simulation for impatient-customer queues")]
pub struct Cli {
    /// Base seed; overrides simulation.base_seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replications; overrides simulation.replications.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Output directory (default: $SHELTERQ_OUT_DIR, else ./shelterq-out).
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Summary file format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Structured)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Qd,
    Ed,
    Qed,
    ExactAb,
    ExactWait,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Analytic,
    Calibrate,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Erlang-A metrics at the scenario's bed count.
    Analyze { scenario: PathBuf },
    /// Bed counts under one or all staffing regimes.
    Staff {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = RegimeArg::All)]
        regime: RegimeArg,
    },
    /// Entry thresholds per class.
    Thresholds {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Analytic)]
        mode: ModeArg,
    },
    /// Replicated simulation of the scenario or its [[compare]] entries.
    Simulate { scenario: PathBuf },
    /// One-parameter sensitivity sweep.
    Sweep {
        scenario: PathBuf,
        /// lambda, mu or theta; overrides [sweep].
        #[arg(long)]
        parameter: Option<String>,
        /// Comma-separated grid; overrides [sweep].
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

/// Failure of a subcommand, printed to stderr.
#[derive(Debug)]
pub enum CliError {
    Scenario(Diagnostic),
    Run(Error),
}

impl From<Diagnostic> for CliError {
    fn from(d: Diagnostic) -> Self {
        CliError::Scenario(d)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        let e = match self {
            CliError::Scenario(d) => &d.error,
            CliError::Run(e) => e,
        };
        exit_code(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Scenario(d) => d.fmt(f),
            CliError::Run(e) => e.fmt(f),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::UnstableWithoutAbandonment { .. } => 2,
        Error::InfeasibleAtMaxK { .. } | Error::NoRootInBracket { .. } | Error::DegenerateLoad { .. } => 3,
        Error::NumericalInconsistency(_) | Error::TraceViolation { .. } => 4,
        Error::Io(_) => 1,
    }
}

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    match run(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    loaded: LoadedScenario,
    resolved: Resolved,
    seed: u64,
    reps: usize,
}

impl Context<'_> {
    fn out_dir(&self) -> Option<PathBuf> {
        self.cli.out_dir.clone().or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
    }

    fn out_dir_or_default(&self) -> PathBuf {
        self.out_dir().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    fn provenance(&self, command: &str, extra: serde_json::Value) -> serde_json::Value {
        json!({
            "command": command,
            "scenario_path": self.loaded.path,
            "scenario": self.loaded.file,
            "base_seed": self.seed,
            "replications": self.reps,
            "resolved": extra,
        })
    }
}

fn load<'a>(cli: &'a Cli, path: &Path) -> Result<Context<'a>, CliError> {
    let loaded = LoadedScenario::read(path)?;
    let mut resolved = loaded.resolve()?;
    let seed = cli.seed.unwrap_or(resolved.simulation.base_seed);
    let reps = cli.reps.unwrap_or(resolved.simulation.replications);
    if reps < 2 {
        return Err(Error::Config(format!("--reps must be at least 2, got {reps}")).into());
    }
    resolved.simulation.base_seed = seed;
    resolved.simulation.replications = reps;
    Ok(Context { cli, loaded, resolved, seed, reps })
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze { scenario } => analyze(&load(cli, scenario)?, stdout),
        Command::Staff { scenario, regime } => staff(&load(cli, scenario)?, *regime, stdout),
        Command::Thresholds { scenario, mode } => thresholds(&load(cli, scenario)?, *mode, stdout),
        Command::Simulate { scenario } => simulate(&load(cli, scenario)?, stdout),
        Command::Sweep { scenario, parameter, values } => {
            sweep_cmd(&load(cli, scenario)?, parameter.as_deref(), values.as_deref(), stdout)
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn comment_lines(provenance: &serde_json::Value, seed: u64) -> Result<String, CliError> {
    Ok(format!("# base_seed={seed}\n# config={}\n", serde_json::to_string(provenance).map_err(Error::from)?))
}

fn csv_bytes<R: Serialize>(header: &str, rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut out = header.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for r in rows {
            w.serialize(r).map_err(Error::from)?;
        }
        w.flush()?;
    }
    Ok(out)
}

fn json_bytes(value: &serde_json::Value) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    out.push(b'\n');
    Ok(out)
}

fn first_plan(ctx: &Context) -> Result<ScenarioPlan, CliError> {
    Ok(ctx.loaded.plans(&ctx.resolved)?.remove(0))
}

fn metrics_text(m: &ErlangAMetrics) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "beds                 {}", m.servers);
    let _ = writeln!(s, "P(wait > 0)          {:.6}", m.p_wait);
    let _ = writeln!(s, "P(abandon | wait)    {:.6}", m.p_ab_given_wait);
    let _ = writeln!(s, "P(abandon)           {:.6}", m.p_ab);
    let _ = writeln!(s, "mean wait (days)     {:.6}", m.mean_wait);
    let _ = writeln!(s, "mean queue           {:.4}", m.mean_queue);
    let _ = writeln!(s, "mean busy beds       {:.4}", m.mean_busy_servers);
    let _ = writeln!(s, "occupancy            {:.6}", m.occupancy);
    s
}

fn analyze(ctx: &Context, stdout: &mut dyn Write) -> Result<(), CliError> {
    let plan = first_plan(ctx)?;
    let m = erlang_a_metrics(plan.beds, &ctx.resolved.params)?;
    stdout.write_all(metrics_text(&m).as_bytes())?;
    if let Some(dir) = ctx.out_dir() {
        let prov = ctx.provenance("analyze", json!({ "beds": plan.beds, "params": ctx.resolved.params }));
        match ctx.cli.format {
            Format::Csv => {
                write_file(&dir, "analyze.csv", &csv_bytes(&comment_lines(&prov, ctx.seed)?, &[m])?)?;
            }
            Format::Structured => {
                write_file(&dir, "analyze.json", &json_bytes(&json!({ "provenance": prov, "metrics": m }))?)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct StaffRow {
    regime: String,
    beds: u32,
    beta_star: Option<f64>,
    offered_load: f64,
    gamma_used: Option<f64>,
    p_ab_at_beds: Option<f64>,
    p_ab_one_fewer: Option<f64>,
    mean_wait_at_beds: Option<f64>,
    mean_wait_one_fewer: Option<f64>,
}

impl From<&StaffingResult> for StaffRow {
    fn from(r: &StaffingResult) -> Self {
        let at = r.certificate.map(|c| c.at_beds);
        let fewer = r.certificate.and_then(|c| c.one_fewer);
        StaffRow {
            regime: r.regime.to_string(),
            beds: r.beds,
            beta_star: r.beta_star,
            offered_load: r.offered_load,
            gamma_used: r.gamma_used,
            p_ab_at_beds: at.map(|m| m.p_ab),
            p_ab_one_fewer: fewer.map(|m| m.p_ab),
            mean_wait_at_beds: at.map(|m| m.mean_wait),
            mean_wait_one_fewer: fewer.map(|m| m.mean_wait),
        }
    }
}

fn staff(ctx: &Context, regime: RegimeArg, stdout: &mut dyn Write) -> Result<(), CliError> {
    let target = ctx.loaded.file.capacity.target;
    let regimes: Vec<Regime> = match regime {
        RegimeArg::Qd => vec![Regime::Qd],
        RegimeArg::Ed => vec![Regime::Ed],
        RegimeArg::Qed => vec![Regime::Qed],
        RegimeArg::ExactAb => vec![Regime::ExactAb],
        RegimeArg::ExactWait => vec![Regime::ExactWait],
        RegimeArg::All => vec![Regime::Qd, Regime::Ed, Regime::Qed, Regime::ExactAb, Regime::ExactWait],
    };
    let mut results = Vec::new();
    for r in regimes {
        // the file's target only applies to the regime it names
        let named = ctx.loaded.file.capacity.regime.as_deref().and_then(scenario::parse_regime);
        let t = if named == Some(r) { target } else { None };
        results.push(scenario::staff(r, t, &ctx.resolved.params, &ctx.resolved.qos)?);
    }
    for r in &results {
        let mut line = format!("{:<10} beds = {}", r.regime.to_string(), r.beds);
        if let Some(b) = r.beta_star {
            let _ = write!(line, "  beta* = {b:.6}");
        }
        if let Some(g) = r.gamma_used {
            let _ = write!(line, "  gamma = {g}");
        }
        if let Some(c) = r.certificate {
            let _ = write!(line, "  P(ab) at N = {:.6}, mean wait at N = {:.6}", c.at_beds.p_ab, c.at_beds.mean_wait);
            if let Some(f) = c.one_fewer {
                let _ = write!(line, "; at N-1: {:.6}, {:.6}", f.p_ab, f.mean_wait);
            }
        }
        writeln!(stdout, "{line}")?;
    }
    if let Some(dir) = ctx.out_dir() {
        let prov = ctx.provenance("staff", json!({ "params": ctx.resolved.params, "qos": ctx.resolved.qos }));
        let rows: Vec<StaffRow> = results.iter().map(StaffRow::from).collect();
        match ctx.cli.format {
            Format::Csv => {
                write_file(&dir, "staffing.csv", &csv_bytes(&comment_lines(&prov, ctx.seed)?, &rows)?)?;
            }
            Format::Structured => {
                write_file(&dir, "staffing.json", &json_bytes(&json!({ "provenance": prov, "results": results }))?)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ThresholdRow {
    class: String,
    threshold: u32,
    p_wait: Option<f64>,
    achieved: Option<f64>,
}

fn thresholds(ctx: &Context, mode: ModeArg, stdout: &mut dyn Write) -> Result<(), CliError> {
    let plan = first_plan(ctx)?;
    let r = &ctx.resolved;
    let labels = r.class_mix.labels.clone();
    let (policy, degenerate, profile, calibration) = match mode {
        ModeArg::Analytic => {
            let a = r.analytic_policy(plan.beds)?;
            (a.policy, a.analytically_degenerate, Some(a.profile), None)
        }
        ModeArg::Calibrate => {
            let o = r.calibrated_policy(plan.beds, ctx.seed)?;
            (o.policy.clone(), false, None, Some(o))
        }
    };
    writeln!(stdout, "beds = {}", plan.beds)?;
    let rows: Vec<ThresholdRow> = labels
        .iter()
        .enumerate()
        .map(|(j, l)| ThresholdRow {
            class: l.clone(),
            threshold: policy.thresholds()[j],
            p_wait: profile.as_ref().map(|p| p.p_wait_by_class[j]),
            achieved: calibration.as_ref().map(|c| c.achieved[j]),
        })
        .collect();
    for row in &rows {
        let mut line = format!("K[{}] = {}", row.class, row.threshold);
        if let Some(p) = row.p_wait {
            let _ = write!(line, "  P(wait > 0) = {p:.6}");
        }
        if let Some(a) = row.achieved {
            let _ = write!(line, "  simulated cap metric = {a:.6}");
        }
        writeln!(stdout, "{line}")?;
    }
    for row in rows.iter().filter(|row| row.threshold >= plan.beds) {
        writeln!(stdout, "warning: K[{}] = {} >= {} beds, so this class can never start service", row.class, row.threshold, plan.beds)?;
    }
    if degenerate {
        writeln!(stdout, "analytically-degenerate: a cumulative load reached 1 - eps and was clamped")?;
    }
    if let Some(dir) = ctx.out_dir() {
        let mode_name = match mode {
            ModeArg::Analytic => "analytic",
            ModeArg::Calibrate => "calibrate",
        };
        let prov = ctx.provenance("thresholds", json!({ "beds": plan.beds, "mode": mode_name, "qos": r.qos }));
        match ctx.cli.format {
            Format::Csv => {
                write_file(&dir, "thresholds.csv", &csv_bytes(&comment_lines(&prov, ctx.seed)?, &rows)?)?;
            }
            Format::Structured => {
                let doc = json!({
                    "provenance": prov,
                    "thresholds": policy,
                    "analytically_degenerate": degenerate,
                    "delay_profile": profile,
                    "calibration": calibration,
                });
                write_file(&dir, "thresholds.json", &json_bytes(&doc)?)?;
            }
        }
    }
    Ok(())
}

fn summary_bytes(format: Format, doc: &SummaryDocument) -> Result<(&'static str, Vec<u8>), CliError> {
    match format {
        Format::Structured => {
            let mut out = Vec::new();
            write_summary_json(&mut out, doc)?;
            Ok(("summary.json", out))
        }
        Format::Csv => Ok(("summary.csv", csv_bytes(&comment_lines(&doc.provenance, doc.base_seed)?, &doc.rows)?)),
    }
}

fn simulate(ctx: &Context, stdout: &mut dyn Write) -> Result<(), CliError> {
    let r = &ctx.resolved;
    let plans = ctx.loaded.plans(r)?;
    let mut scenarios = Vec::new();
    for p in &plans {
        let policy = r.policy(&p.policy, p.beds, ctx.seed)?;
        scenarios.push(NamedScenario::new(p.name.clone(), r.config(p.beds, policy)));
    }
    let results = compare_scenarios(&scenarios, ctx.reps, ctx.seed)?;
    let dir = ctx.out_dir_or_default();
    let configs: Vec<_> = scenarios.iter().map(|s| json!({ "name": s.name, "config": s.config })).collect();
    let prov = ctx.provenance("simulate", json!(configs));

    let pairs: Vec<(&str, &Replications)> = results.iter().map(|s| (s.name.as_str(), &s.replications)).collect();
    let mut reps_csv = Vec::new();
    write_replications_csv(&mut reps_csv, &pairs, ctx.seed, &prov)?;
    write_file(&dir, "replications.csv", &reps_csv)?;
    let doc = summary_document(&pairs, ctx.seed, &prov);
    let (name, bytes) = summary_bytes(ctx.cli.format, &doc)?;
    write_file(&dir, name, &bytes)?;
    let table = comparison_table(&results);
    write_file(&dir, "comparison.txt", table.as_bytes())?;
    stdout.write_all(table.as_bytes())?;

    if r.simulation.trace {
        for s in &scenarios {
            let kept = verify_traces(&s.config, ctx.reps, ctx.seed, r.simulation.trace_files)?;
            for (i, t) in kept.iter().enumerate() {
                write_file(&dir.join("traces"), &format!("{}-rep{i}.csv", file_stem(&s.name)), t.to_text().as_bytes())?;
            }
            writeln!(stdout, "trace check passed for {} ({} replications)", s.name, ctx.reps)?;
        }
    }
    writeln!(stdout, "wrote {}", dir.display())?;
    Ok(())
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn sweep_cmd(
    ctx: &Context,
    parameter: Option<&str>,
    values: Option<&[f64]>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    use crate::experiments::{SweepParameter, SweepSpec};
    let file_spec = ctx.loaded.sweep_spec()?;
    let parameter = match (parameter, &file_spec) {
        (Some(p), _) => SweepParameter::parse(p)
            .ok_or_else(|| Error::Config(format!("unknown sweep parameter '{p}' (lambda, mu or theta)")))?,
        (None, Some(s)) => s.parameter,
        (None, None) => return Err(Error::Config("no [sweep] section and no --parameter given".into()).into()),
    };
    let values = match (values, &file_spec) {
        (Some(v), _) => v.to_vec(),
        (None, Some(s)) => s.values.clone(),
        (None, None) => return Err(Error::Config("no [sweep] section and no --values given".into()).into()),
    };
    let spec = SweepSpec { parameter, values };
    spec.validate()?;

    let r = &ctx.resolved;
    let plan = first_plan(ctx)?;
    let policy = r.policy(&plan.policy, plan.beds, ctx.seed)?;
    let config = r.config(plan.beds, policy);
    let points = sweep(&config, &spec, ctx.reps, ctx.seed)?;

    let dir = ctx.out_dir_or_default();
    let prov = ctx.provenance("sweep", json!({ "config": config, "sweep": spec }));
    let mut series = Vec::new();
    write_sweep_csv(&mut series, &spec, &points, ctx.seed, &prov)?;
    write_file(&dir, "sweep.csv", &series)?;
    let names: Vec<String> = points.iter().map(|p| format!("{}={}", spec.parameter.name(), p.value)).collect();
    let pairs: Vec<(&str, &Replications)> =
        names.iter().map(String::as_str).zip(points.iter().map(|p| &p.replications)).collect();
    let doc = summary_document(&pairs, ctx.seed, &prov);
    let (name, bytes) = summary_bytes(ctx.cli.format, &doc)?;
    write_file(&dir, name, &bytes)?;

    writeln!(stdout, "{:>10}  {:>16}  {:>16}  {:>16}", spec.parameter.name(), "abandonment", "utilization", "mean wait")?;
    for p in &points {
        let s = &p.replications.summary;
        let cell = |m: &str| {
            let st = s.get(m).expect("summarized metric");
            format!("{:.4} ± {:.4}", st.mean, st.ci95)
        };
        writeln!(
            stdout,
            "{:>10}  {:>16}  {:>16}  {:>16}",
            p.value,
            cell("abandonment"),
            cell("utilization"),
            cell("mean_wait")
        )?;
    }
    writeln!(stdout, "wrote {}", dir.display())?;
    Ok(())
}
