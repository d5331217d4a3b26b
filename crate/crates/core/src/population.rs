//! Vulnerability classes from five independent binary risk attributes.
//!
//! The attribute-combination → group mapping is data (`data/combination_table.csv`),
//! not a rule chain: the sequential "first attribute that applies" reading
//! sends `(0,0,0,1,1)` to D while the table sends it to E, and the table is
//! the one whose group sums match the per-class arrival rates used downstream.
//! [`GroupingMode::RuleOrder`] keeps the rule-chain reading for comparison.

use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TABLE_CSV: &str = include_str!("../data/combination_table.csv");

pub const ATTRIBUTE_COUNT: usize = 5;

/// Vulnerability group, `A` (highest priority) to `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Group {
    pub const ALL: [Group; 6] = [Group::A, Group::B, Group::C, Group::D, Group::E, Group::F];

    /// Priority index, 0 for the highest-priority group.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        ["A", "B", "C", "D", "E", "F"][self.index()]
    }

    pub fn from_label(s: &str) -> Option<Group> {
        Group::ALL.into_iter().find(|g| g.label() == s)
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Marginal probabilities of the five attributes, assumed independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeModel {
    pub ht_victim: f64,
    pub substance_or_mental_health: f64,
    pub lgbtq: f64,
    pub welfare_or_justice: f64,
    pub us_minority: f64,
}

impl Default for AttributeModel {
    fn default() -> Self {
        AttributeModel {
            ht_victim: 0.20,
            substance_or_mental_health: 0.30,
            lgbtq: 0.30,
            welfare_or_justice: 0.30,
            us_minority: 0.55,
        }
    }
}

impl AttributeModel {
    /// Probabilities in table column order.
    pub fn as_array(&self) -> [f64; ATTRIBUTE_COUNT] {
        [
            self.ht_victim,
            self.substance_or_mental_health,
            self.lgbtq,
            self.welfare_or_justice,
            self.us_minority,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in ["ht_victim", "substance_or_mental_health", "lgbtq", "welfare_or_justice", "us_minority"]
            .iter()
            .zip(self.as_array())
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("attribute probability {name} = {p} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Probability of one exact attribute vector.
    pub fn probability_of(&self, attrs: [bool; ATTRIBUTE_COUNT]) -> f64 {
        self.as_array()
            .iter()
            .zip(attrs)
            .map(|(&p, on)| if on { p } else { 1.0 - p })
            .product()
    }
}

/// How attribute vectors are mapped to groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupingMode {
    #[default]
    CombinationTable,
    RuleOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnerabilityProfile {
    pub attributes: [bool; ATTRIBUTE_COUNT],
    pub group: Group,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub attributes: [bool; ATTRIBUTE_COUNT],
    pub group: Group,
    /// Share in percent under the baseline attribute model.
    pub percent: f64,
}

/// The 32-row combination table.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationTable {
    rows: Vec<TableRow>,
    by_code: [Group; 32],
}

#[derive(Deserialize)]
struct RawRow {
    ht_victim: u8,
    substance_or_mental_health: u8,
    lgbtq: u8,
    welfare_or_justice: u8,
    us_minority: u8,
    group: String,
    percent: f64,
}

fn attribute_code(attrs: [bool; ATTRIBUTE_COUNT]) -> usize {
    attrs.iter().enumerate().fold(0, |acc, (i, &b)| acc | ((b as usize) << i))
}

impl CombinationTable {
    /// The table shipped with the crate.
    pub fn builtin() -> &'static CombinationTable {
        static TABLE: OnceLock<CombinationTable> = OnceLock::new();
        TABLE.get_or_init(|| CombinationTable::parse(TABLE_CSV).expect("bundled combination table is valid"))
    }

    /// Parse delimited text: five 0/1 flags, a group letter and a percentage;
    /// `#` starts a comment line. All 32 combinations must appear exactly once.
    pub fn parse(text: &str) -> Result<CombinationTable> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::with_capacity(32);
        let mut seen: [Option<Group>; 32] = [None; 32];
        for (i, rec) in reader.deserialize::<RawRow>().enumerate() {
            let raw = rec.map_err(|e| Error::config(format!("combination table row {}: {e}", i + 1)))?;
            let flags = [
                raw.ht_victim,
                raw.substance_or_mental_health,
                raw.lgbtq,
                raw.welfare_or_justice,
                raw.us_minority,
            ];
            if flags.iter().any(|&f| f > 1) {
                return Err(Error::config(format!("combination table row {}: flags must be 0 or 1", i + 1)));
            }
            let attributes = flags.map(|f| f == 1);
            let group = Group::from_label(&raw.group)
                .ok_or_else(|| Error::config(format!("combination table row {}: unknown group {}", i + 1, raw.group)))?;
            let code = attribute_code(attributes);
            if seen[code].replace(group).is_some() {
                return Err(Error::config(format!("combination table row {}: duplicate combination", i + 1)));
            }
            rows.push(TableRow { attributes, group, percent: raw.percent });
        }
        let mut by_code = [Group::F; 32];
        for (code, g) in seen.iter().enumerate() {
            by_code[code] = g.ok_or_else(|| Error::config("combination table must list all 32 combinations"))?;
        }
        Ok(CombinationTable { rows, by_code })
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn group_of(&self, attrs: [bool; ATTRIBUTE_COUNT]) -> Group {
        self.by_code[attribute_code(attrs)]
    }
}

/// Group of an attribute vector according to the combination table.
pub fn group_of(attrs: [bool; ATTRIBUTE_COUNT]) -> Group {
    CombinationTable::builtin().group_of(attrs)
}

/// Sequential reading: the first attribute present decides the group,
/// `F` when none is.
pub fn group_by_rule_order(attrs: [bool; ATTRIBUTE_COUNT]) -> Group {
    attrs
        .iter()
        .position(|&b| b)
        .map(|i| Group::ALL[i])
        .unwrap_or(Group::F)
}

pub fn group_with_mode(attrs: [bool; ATTRIBUTE_COUNT], mode: GroupingMode) -> Group {
    match mode {
        GroupingMode::CombinationTable => group_of(attrs),
        GroupingMode::RuleOrder => group_by_rule_order(attrs),
    }
}

/// Five independent attribute draws (one uniform each, in column order).
pub fn sample_profile<R: Rng + ?Sized>(model: &AttributeModel, rng: &mut R) -> VulnerabilityProfile {
    sample_profile_with_mode(model, GroupingMode::CombinationTable, rng)
}

pub fn sample_profile_with_mode<R: Rng + ?Sized>(
    model: &AttributeModel,
    mode: GroupingMode,
    rng: &mut R,
) -> VulnerabilityProfile {
    let probs = model.as_array();
    let mut attributes = [false; ATTRIBUTE_COUNT];
    for (a, p) in attributes.iter_mut().zip(probs) {
        *a = rng.random::<f64>() < p;
    }
    VulnerabilityProfile { attributes, group: group_with_mode(attributes, mode) }
}

/// Exact group shares: sum of the combination probabilities mapped to each group.
pub fn group_shares(model: &AttributeModel, mode: GroupingMode) -> [f64; 6] {
    let mut shares = [0.0; 6];
    for code in 0..32usize {
        let attrs: [bool; ATTRIBUTE_COUNT] = std::array::from_fn(|i| code >> i & 1 == 1);
        shares[group_with_mode(attrs, mode).index()] += model.probability_of(attrs);
    }
    shares
}

/// Per-class proportions and arrival rates, in priority order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMix {
    pub labels: Vec<String>,
    pub proportions: Vec<f64>,
    pub rates: Vec<f64>,
}

impl ClassMix {
    /// Mix from explicit per-class rates; the aggregate is their sum.
    pub fn from_rates(labels: Vec<String>, rates: Vec<f64>) -> Result<ClassMix> {
        if labels.len() != rates.len() || rates.is_empty() {
            return Err(Error::config("class labels and rates must be non-empty and of equal length"));
        }
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::config("class arrival rates must be finite and nonnegative"));
        }
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            return Err(Error::config("at least one class needs a positive arrival rate"));
        }
        let proportions = rates.iter().map(|r| r / total).collect();
        Ok(ClassMix { labels, proportions, rates })
    }

    /// A single class carrying the whole stream.
    pub fn single(lambda: f64) -> ClassMix {
        ClassMix { labels: vec!["all".into()], proportions: vec![1.0], rates: vec![lambda] }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    /// Same proportions with the aggregate rate replaced.
    pub fn rescaled(&self, lambda: f64) -> ClassMix {
        ClassMix {
            labels: self.labels.clone(),
            proportions: self.proportions.clone(),
            rates: self.proportions.iter().map(|p| p * lambda).collect(),
        }
    }
}

/// `λ_j = share_j · λ` with the shares from the combination table.
pub fn class_arrival_rates(lambda: f64, model: &AttributeModel) -> ClassMix {
    class_arrival_rates_with_mode(lambda, model, GroupingMode::CombinationTable)
}

pub fn class_arrival_rates_with_mode(lambda: f64, model: &AttributeModel, mode: GroupingMode) -> ClassMix {
    let proportions = group_shares(model, mode).to_vec();
    ClassMix {
        labels: Group::ALL.iter().map(|g| g.label().to_string()).collect(),
        rates: proportions.iter().map(|p| p * lambda).collect(),
        proportions,
    }
}
