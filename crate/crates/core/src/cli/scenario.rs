//! Scenario files: TOML with `system`, `population`, `capacity`, `policy`,
//! `simulation` and `qos` sections, optional `[[compare]]` entries and an
//! optional `[sweep]`. Unknown keys are rejected. Diagnostics carry the line
//! of the offending key when it can be located.
//!
//! ```toml
//! [system]
//! lambda = 4.44
//! mu = 0.016
//! theta = 0.5
//!
//! [capacity]
//! beds = "auto"
//! regime = "qed"
//! target = 0.04
//!
//! [policy]
//! thresholds = [0, 0, 0, 0, 0, 25]
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::desim::{ArrivalMix, ScenarioConfig};
use crate::erlang::SystemParams;
use crate::error::Error;
use crate::experiments::{SweepParameter, SweepSpec};
use crate::population::{class_arrival_rates_with_mode, AttributeModel, ClassMix, GroupingMode};
use crate::staffing::{
    min_beds_for_abandonment, min_beds_for_wait, staff_ed, staff_qd, staff_qed, QosTargets, Regime, StaffingResult,
    WaitCap,
};
use crate::thresholds::{
    calibrate_thresholds_by_simulation, class_delay_profile, cumulative_loads, thresholds_for_qos,
    CalibrationCaps, DegeneracyHandling, ThresholdPolicy, WaitNumerator,
};

/// A problem with a scenario file, located when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub path: String,
    pub line: Option<usize>,
    pub error: Error,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}: {}", self.path, l, self.error),
            None => write!(f, "{}: {}", self.path, self.error),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub lambda: f64,
    pub mu: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    pub ht_victim: Option<f64>,
    pub substance_or_mental_health: Option<f64>,
    pub lgbtq: Option<f64>,
    pub welfare_or_justice: Option<f64>,
    pub us_minority: Option<f64>,
    /// `combination-table` (default) or `rule-order`.
    pub grouping: Option<String>,
    /// Explicit per-class rates in priority order; replaces the attribute model.
    pub rates: Option<Vec<f64>>,
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BedsSpec {
    Count(u32),
    Word(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    pub beds: BedsSpec,
    /// `qd`, `ed`, `qed`, `exact-ab` or `exact-wait`; used with `beds = "auto"`.
    pub regime: Option<String>,
    /// γ for QD/ED, the abandonment target for QED and exact-ab, the mean-wait bound for exact-wait.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// Explicit thresholds; excludes `mode`.
    pub thresholds: Option<Vec<u32>>,
    /// `zero`, `analytic` or `calibrate`.
    pub mode: Option<String>,
    /// Analytic numerator: `wait-fraction` (default) or `abandon-cap`.
    pub numerator: Option<String>,
    /// `clamp` (default) or `fail`.
    pub degeneracy: Option<String>,
    /// Calibration caps: `wait` (default), `abandon` or `mean-wait`.
    pub caps: Option<String>,
    pub max_k: Option<u32>,
    pub calibration_reps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_horizon")]
    pub horizon_days: f64,
    #[serde(default)]
    pub warmup_days: f64,
    #[serde(default)]
    pub initial_occupancy: u32,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub base_seed: u64,
    /// Verify the admission rule on every replication's trace.
    #[serde(default)]
    pub trace: bool,
    /// Trace files written per scenario when tracing.
    #[serde(default = "default_trace_files")]
    pub trace_files: usize,
}

fn default_horizon() -> f64 {
    360.0
}
fn default_reps() -> usize {
    100
}
fn default_seed() -> u64 {
    1
}
fn default_trace_files() -> usize {
    1
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            horizon_days: default_horizon(),
            warmup_days: 0.0,
            initial_occupancy: 0,
            replications: default_reps(),
            base_seed: default_seed(),
            trace: false,
            trace_files: default_trace_files(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QosSection {
    pub alpha: Option<f64>,
    pub max_mean_wait: Option<f64>,
    /// `[fraction, horizon_days]` per class except the lowest.
    pub wait_caps: Option<Vec<[f64; 2]>>,
    pub abandon_caps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareEntry {
    pub name: String,
    pub beds: Option<BedsSpec>,
    pub regime: Option<String>,
    pub target: Option<f64>,
    pub thresholds: Option<Vec<u32>>,
    pub mode: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub system: SystemSection,
    #[serde(default)]
    pub population: PopulationSection,
    pub capacity: CapacitySection,
    #[serde(default)]
    pub policy: PolicySection,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub qos: Option<QosSection>,
    #[serde(default)]
    pub compare: Vec<CompareEntry>,
    pub sweep: Option<SweepSection>,
}

/// Parsed file plus the text, kept for locating keys in diagnostics.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub path: String,
    pub text: String,
    pub file: ScenarioFile,
}

impl LoadedScenario {
    pub fn read(path: &Path) -> Result<LoadedScenario, Diagnostic> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Diagnostic { path: shown.clone(), line: None, error: Error::Io(e.to_string()) })?;
        LoadedScenario::parse(&shown, &text)
    }

    pub fn parse(path: &str, text: &str) -> Result<LoadedScenario, Diagnostic> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Diagnostic {
            path: path.to_string(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            error: Error::Config(e.message().to_string()),
        })?;
        Ok(LoadedScenario { path: path.to_string(), text: text.to_string(), file })
    }

    /// Diagnostic pointing at `key` inside `[section]`, or at the section header.
    pub fn at(&self, section: &str, key: &str, error: Error) -> Diagnostic {
        Diagnostic { path: self.path.clone(), line: locate_key(&self.text, section, key), error }
    }

    fn bad(&self, section: &str, key: &str, msg: impl Into<String>) -> Diagnostic {
        self.at(section, key, Error::Config(format!("[{section}] {key}: {}", msg.into())))
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// First line defining `key` after the header of `section`, else the header line.
fn locate_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut inside = false;
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_start_matches('[').trim_end_matches(']').trim();
            inside = name == section;
            if inside && header.is_none() {
                header = Some(i + 1);
            }
            continue;
        }
        if inside {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    Zero,
    Analytic,
    Calibrate,
}

impl PolicyMode {
    pub fn parse(s: &str) -> Option<PolicyMode> {
        match s {
            "zero" => Some(PolicyMode::Zero),
            "analytic" => Some(PolicyMode::Analytic),
            "calibrate" => Some(PolicyMode::Calibrate),
            _ => None,
        }
    }
}

pub fn parse_regime(s: &str) -> Option<Regime> {
    match s {
        "qd" => Some(Regime::Qd),
        "ed" => Some(Regime::Ed),
        "qed" => Some(Regime::Qed),
        "exact-ab" => Some(Regime::ExactAb),
        "exact-wait" => Some(Regime::ExactWait),
        _ => None,
    }
}

/// Staffing for `regime` with its target; `None` picks the QoS default.
pub fn staff(regime: Regime, target: Option<f64>, params: &SystemParams, qos: &QosTargets) -> crate::Result<StaffingResult> {
    match regime {
        Regime::Qd => staff_qd(params, target.unwrap_or(qos.alpha_global)),
        Regime::Ed => staff_ed(params, target.unwrap_or(qos.alpha_global)),
        Regime::Qed => staff_qed(target.unwrap_or(qos.alpha_global), params),
        Regime::ExactAb => min_beds_for_abandonment(params, target.unwrap_or(qos.alpha_global)),
        Regime::ExactWait => min_beds_for_wait(params, target.unwrap_or(qos.max_mean_wait)),
    }
}

/// How the thresholds of one scenario are obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyChoice {
    Explicit(Vec<u32>),
    Mode(PolicyMode),
}

/// Everything a subcommand needs, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: SystemParams,
    pub mix: ArrivalMix,
    /// Per-class rates at `params.lambda`.
    pub class_mix: ClassMix,
    pub qos: QosTargets,
    pub simulation: SimulationSection,
    pub numerator: WaitNumerator,
    pub degeneracy: DegeneracyHandling,
    pub calibration_caps: CalibrationCaps,
    pub max_k: Option<u32>,
    pub calibration_reps: Option<usize>,
}

/// One simulated scenario with its bed count and policy source.
#[derive(Debug, Clone)]
pub struct ScenarioPlan {
    pub name: String,
    pub beds: u32,
    pub staffing: Option<StaffingResult>,
    pub policy: PolicyChoice,
}

impl LoadedScenario {
    pub fn resolve(&self) -> Result<Resolved, Diagnostic> {
        let f = &self.file;
        let s = &f.system;
        let params = SystemParams { lambda: s.lambda, mu: s.mu, theta: s.theta };
        if let Err(e) = params.validate() {
            let key = if !(s.lambda > 0.0) {
                "lambda"
            } else if !(s.mu > 0.0) {
                "mu"
            } else {
                "theta"
            };
            return Err(self.at("system", key, e));
        }

        let p = &f.population;
        let (mix, class_mix) = if let Some(rates) = &p.rates {
            let attrs = [&p.ht_victim, &p.substance_or_mental_health, &p.lgbtq, &p.welfare_or_justice, &p.us_minority];
            if attrs.iter().any(|a| a.is_some()) || p.grouping.is_some() {
                return Err(self.bad("population", "rates", "explicit rates cannot be combined with attribute probabilities"));
            }
            let labels = match &p.labels {
                Some(l) => l.clone(),
                None => (1..=rates.len()).map(|i| format!("class{i}")).collect(),
            };
            let given = ClassMix::from_rates(labels, rates.clone()).map_err(|e| self.at("population", "rates", e))?;
            let total = given.total_rate();
            if (total - params.lambda).abs() > 1e-9 * params.lambda.max(1.0) {
                return Err(self.bad(
                    "population",
                    "rates",
                    format!("rates sum to {total} but system.lambda is {}", params.lambda),
                ));
            }
            (ArrivalMix::Classes(given.clone()), given)
        } else {
            if p.labels.is_some() {
                return Err(self.bad("population", "labels", "labels need explicit rates"));
            }
            let d = AttributeModel::default();
            let model = AttributeModel {
                ht_victim: p.ht_victim.unwrap_or(d.ht_victim),
                substance_or_mental_health: p.substance_or_mental_health.unwrap_or(d.substance_or_mental_health),
                lgbtq: p.lgbtq.unwrap_or(d.lgbtq),
                welfare_or_justice: p.welfare_or_justice.unwrap_or(d.welfare_or_justice),
                us_minority: p.us_minority.unwrap_or(d.us_minority),
            };
            model.validate().map_err(|e| self.at("population", "ht_victim", e))?;
            let mode = match p.grouping.as_deref() {
                None | Some("combination-table") => GroupingMode::CombinationTable,
                Some("rule-order") => GroupingMode::RuleOrder,
                Some(other) => {
                    return Err(self.bad("population", "grouping", format!("unknown grouping '{other}'")));
                }
            };
            let cm = class_arrival_rates_with_mode(params.lambda, &model, mode);
            (ArrivalMix::Attributes { model, mode }, cm)
        };
        let classes = class_mix.len();

        let mut qos = QosTargets::shelter_baseline();
        if let Some(q) = &f.qos {
            if let Some(a) = q.alpha {
                qos.alpha_global = a;
            }
            if let Some(m) = q.max_mean_wait {
                qos.max_mean_wait = m;
            }
            if let Some(w) = &q.wait_caps {
                qos.per_class_wait_caps = w.iter().map(|[x, t]| WaitCap { fraction: *x, horizon: *t }).collect();
            }
            if let Some(a) = &q.abandon_caps {
                qos.per_class_abandon_caps = a.clone();
            }
        }
        if classes != 6 {
            // the built-in caps are for six groups
            if f.qos.as_ref().and_then(|q| q.wait_caps.as_ref()).is_none() {
                qos.per_class_wait_caps.clear();
            }
            if f.qos.as_ref().and_then(|q| q.abandon_caps.as_ref()).is_none() {
                qos.per_class_abandon_caps.clear();
            }
        }
        if let Err(e) = qos.validate(classes) {
            let key = match &e {
                Error::Config(m) if m.contains("wait cap") => "wait_caps",
                Error::Config(m) if m.contains("abandon") => "abandon_caps",
                Error::Config(m) if m.contains("max_mean_wait") => "max_mean_wait",
                _ => "alpha",
            };
            return Err(self.at("qos", key, e));
        }

        let pol = &f.policy;
        let numerator = match pol.numerator.as_deref() {
            None | Some("wait-fraction") => WaitNumerator::WaitFraction,
            Some("abandon-cap") => WaitNumerator::AbandonCap,
            Some(o) => return Err(self.bad("policy", "numerator", format!("unknown numerator '{o}'"))),
        };
        let degeneracy = match pol.degeneracy.as_deref() {
            None | Some("clamp") => DegeneracyHandling::Clamp,
            Some("fail") => DegeneracyHandling::Fail,
            Some(o) => return Err(self.bad("policy", "degeneracy", format!("unknown handling '{o}'"))),
        };
        let calibration_caps = match pol.caps.as_deref() {
            None | Some("wait") => CalibrationCaps::wait_caps(&qos),
            Some("abandon") => CalibrationCaps::abandon_caps(&qos),
            Some("mean-wait") => CalibrationCaps::MeanWait(vec![qos.max_mean_wait; classes.saturating_sub(1)]),
            Some(o) => return Err(self.bad("policy", "caps", format!("unknown caps '{o}'"))),
        };

        let sim = f.simulation.clone();
        if !(sim.horizon_days > sim.warmup_days && sim.warmup_days >= 0.0 && sim.horizon_days.is_finite()) {
            return Err(self.bad("simulation", "horizon_days", "need horizon_days > warmup_days >= 0"));
        }
        if sim.replications < 2 {
            return Err(self.bad("simulation", "replications", "at least 2 replications are needed"));
        }
        if let Some(r) = pol.calibration_reps {
            if r < 2 {
                return Err(self.bad("policy", "calibration_reps", "at least 2 replications are needed"));
            }
        }

        Ok(Resolved {
            params,
            mix,
            class_mix,
            qos,
            simulation: sim,
            numerator,
            degeneracy,
            calibration_caps,
            max_k: pol.max_k,
            calibration_reps: pol.calibration_reps,
        })
    }

    fn beds_from(
        &self,
        section: &str,
        beds: &BedsSpec,
        regime: Option<&str>,
        target: Option<f64>,
        r: &Resolved,
    ) -> Result<(u32, Option<StaffingResult>), Diagnostic> {
        match beds {
            BedsSpec::Count(0) => Err(self.bad(section, "beds", "must be >= 1")),
            BedsSpec::Count(n) => Ok((*n, None)),
            BedsSpec::Word(w) if w == "auto" => {
                let name = regime.unwrap_or("qed");
                let regime = parse_regime(name)
                    .ok_or_else(|| self.bad(section, "regime", format!("unknown regime '{name}'")))?;
                let res = staff(regime, target, &r.params, &r.qos).map_err(|e| self.at(section, "target", e))?;
                Ok((res.beds, Some(res)))
            }
            BedsSpec::Word(w) => Err(self.bad(section, "beds", format!("expected an integer or \"auto\", got '{w}'"))),
        }
    }

    fn policy_from(
        &self,
        section: &str,
        thresholds: &Option<Vec<u32>>,
        mode: &Option<String>,
        classes: usize,
    ) -> Result<PolicyChoice, Diagnostic> {
        match (thresholds, mode) {
            (Some(_), Some(_)) => Err(self.bad(section, "mode", "give either thresholds or mode, not both")),
            (Some(k), None) => {
                if k.len() != classes {
                    return Err(self.bad(section, "thresholds", format!("{} thresholds for {classes} classes", k.len())));
                }
                ThresholdPolicy::new(k.clone()).map_err(|e| self.at(section, "thresholds", e))?;
                Ok(PolicyChoice::Explicit(k.clone()))
            }
            (None, Some(m)) => PolicyMode::parse(m)
                .map(PolicyChoice::Mode)
                .ok_or_else(|| self.bad(section, "mode", format!("unknown policy mode '{m}'"))),
            (None, None) => Ok(PolicyChoice::Mode(PolicyMode::Zero)),
        }
    }

    /// The main scenario followed by each `[[compare]]` entry.
    pub fn plans(&self, r: &Resolved) -> Result<Vec<ScenarioPlan>, Diagnostic> {
        let f = &self.file;
        let cap = &f.capacity;
        if matches!(cap.beds, BedsSpec::Count(_)) && (cap.regime.is_some() || cap.target.is_some()) {
            return Err(self.bad("capacity", "regime", "regime and target only apply with beds = \"auto\""));
        }
        let classes = r.class_mix.len();
        let (beds, staffing) = self.beds_from("capacity", &cap.beds, cap.regime.as_deref(), cap.target, r)?;
        let policy = self.policy_from("policy", &f.policy.thresholds, &f.policy.mode, classes)?;
        if f.compare.is_empty() {
            return Ok(vec![ScenarioPlan { name: "scenario".into(), beds, staffing, policy }]);
        }
        let mut plans = Vec::new();
        for c in &f.compare {
            let (beds, staffing) = match &c.beds {
                Some(b) => self.beds_from("compare", b, c.regime.as_deref(), c.target, r)?,
                None => (beds, staffing.clone()),
            };
            let policy = if c.thresholds.is_none() && c.mode.is_none() {
                PolicyChoice::Mode(PolicyMode::Zero)
            } else {
                self.policy_from("compare", &c.thresholds, &c.mode, classes)?
            };
            plans.push(ScenarioPlan { name: c.name.clone(), beds, staffing, policy });
        }
        Ok(plans)
    }

    pub fn sweep_spec(&self) -> Result<Option<SweepSpec>, Diagnostic> {
        let Some(s) = &self.file.sweep else { return Ok(None) };
        let parameter = SweepParameter::parse(&s.parameter)
            .ok_or_else(|| self.bad("sweep", "parameter", format!("unknown parameter '{}'", s.parameter)))?;
        let spec = SweepSpec { parameter, values: s.values.clone() };
        spec.validate().map_err(|e| self.at("sweep", "values", e))?;
        Ok(Some(spec))
    }
}

impl Resolved {
    /// Simulation config for `beds` and `policy`.
    pub fn config(&self, beds: u32, policy: ThresholdPolicy) -> ScenarioConfig {
        ScenarioConfig {
            params: self.params,
            mix: self.mix.clone(),
            beds,
            policy,
            horizon_days: self.simulation.horizon_days,
            warmup_days: self.simulation.warmup_days,
            initial_occupancy: self.simulation.initial_occupancy,
            wait_horizons: Vec::new(),
        }
    }

    /// Analytic thresholds at `beds`, with the degeneracy flag.
    pub fn analytic_policy(&self, beds: u32) -> crate::Result<crate::thresholds::AnalyticThresholds> {
        let loads = cumulative_loads(&self.class_mix.rates, beds, self.params.mu)?;
        let pw = crate::erlang::erlang_a_metrics(beds, &self.params)?.p_wait;
        thresholds_for_qos(&loads, &self.qos, self.numerator, pw, self.degeneracy)
    }

    pub fn calibrated_policy(&self, beds: u32, base_seed: u64) -> crate::Result<crate::thresholds::CalibrationOutcome> {
        let cfg = self.config(beds, ThresholdPolicy::zeros(self.class_mix.len()));
        let max_k = self.max_k.unwrap_or(beds);
        let reps = self.calibration_reps.unwrap_or(self.simulation.replications);
        calibrate_thresholds_by_simulation(&cfg, &self.calibration_caps, max_k, reps, base_seed)
    }

    pub fn policy(&self, choice: &PolicyChoice, beds: u32, base_seed: u64) -> crate::Result<ThresholdPolicy> {
        match choice {
            PolicyChoice::Explicit(k) => ThresholdPolicy::new(k.clone()),
            PolicyChoice::Mode(PolicyMode::Zero) => Ok(ThresholdPolicy::zeros(self.class_mix.len())),
            PolicyChoice::Mode(PolicyMode::Analytic) => Ok(self.analytic_policy(beds)?.policy),
            PolicyChoice::Mode(PolicyMode::Calibrate) => Ok(self.calibrated_policy(beds, base_seed)?.policy),
        }
    }

    /// Per-class delay probabilities implied by `policy` at `beds`.
    pub fn delay_profile(&self, policy: &ThresholdPolicy, beds: u32) -> crate::Result<crate::thresholds::ClassDelayProfile> {
        let loads = cumulative_loads(&self.class_mix.rates, beds, self.params.mu)?;
        let pw = crate::erlang::erlang_a_metrics(beds, &self.params)?.p_wait;
        class_delay_profile(policy, &loads, pw, DegeneracyHandling::Clamp)
    }
}
