//! Experiment configuration documents (TOML).
//!
//! Every table rejects unknown keys. Structural problems are reported by the
//! TOML deserializer with line and column; semantic problems found while
//! resolving a run point at the line of the offending key when it can be
//! found in the source.

use std::fmt;
use std::path::{Path, PathBuf};

use dpminimax::optimizers::{BatchPairing, Selection};
use dpminimax::privacy::{AccountantConfig, DEFAULT_LAMBDA_MAX};
use dpminimax::problems::{AucSyntheticSpec, QuadraticNcscSpec, RandomMdpSpec, TabularMdpSpec, WorstGroupSpec};
use dpminimax::PrivacyBudget;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmKind,
    #[serde(default)]
    pub budget: Option<PrivacyBudget>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    pub schedule: ScheduleSpec,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub accountant: AccountantSection,
    /// Start at the alternating-sign point `x₀ = r·(1, −1, 1, …)/√d₁`.
    /// Ignored when the schedule gives `x0` explicitly.
    #[serde(default)]
    pub x0_norm: Option<f64>,
    /// Draw the dataset once from this seed instead of once per run seed.
    #[serde(default)]
    pub data_seed: Option<u64>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    DpSgda,
    Privatediff,
    GdaReference,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlgorithmKind::DpSgda => "dp_sgda",
            AlgorithmKind::Privatediff => "privatediff",
            AlgorithmKind::GdaReference => "gda_reference",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Quadratic,
    Auc,
    WorstGroup,
    Td,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Quadratic => "quadratic",
            Family::Auc => "auc",
            Family::WorstGroup => "worst_group",
            Family::Td => "td",
        })
    }
}

/// `family` picks the problem; the matching sub-table (optional, defaults
/// apply) holds its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<QuadraticNcscSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<AucConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_group: Option<WorstGroupSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td: Option<TdConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AucConfig {
    #[serde(default = "default_alpha_bound")]
    pub alpha_bound: f64,
    #[serde(default = "default_primal_radius")]
    pub primal_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<AucSyntheticSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<AucCsv>,
}

impl Default for AucConfig {
    fn default() -> Self {
        Self {
            alpha_bound: default_alpha_bound(),
            primal_radius: default_primal_radius(),
            synthetic: None,
            csv: None,
        }
    }
}

fn default_alpha_bound() -> f64 {
    dpminimax::problems::DEFAULT_ALPHA_BOUND
}

fn default_primal_radius() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AucCsv {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    #[serde(default = "default_label_column")]
    pub label_column: String,
}

fn default_label_column() -> String {
    "label".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TdConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomMdpSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mdp: Option<TabularMdpSpec>,
}

/// Explicit noise scales; which keys apply depends on the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountantSection {
    #[serde(default = "default_lambda_max")]
    pub lambda_max: u32,
    #[serde(default)]
    pub higher_order_constant: f64,
    /// Budget mode: scale the closed-form noise up until the accountant
    /// closes (reported as `noise_inflation`).
    #[serde(default = "yes")]
    pub inflate: bool,
    /// Explicit-noise mode: report the achieved δ at this ε.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_epsilon: Option<f64>,
}

fn default_lambda_max() -> u32 {
    DEFAULT_LAMBDA_MAX
}

fn yes() -> bool {
    true
}

impl Default for AccountantSection {
    fn default() -> Self {
        Self {
            lambda_max: DEFAULT_LAMBDA_MAX,
            higher_order_constant: 0.0,
            inflate: true,
            audit_epsilon: None,
        }
    }
}

impl AccountantSection {
    pub fn config(&self) -> AccountantConfig {
        AccountantConfig {
            lambda_max: self.lambda_max,
            higher_order_constant: self.higher_order_constant,
        }
    }
}

/// `schedule = "theory"` or a table of explicit hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    Theory,
    Explicit(Box<ExplicitSchedule>),
}

impl Serialize for ScheduleSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ScheduleSpec::Theory => s.serialize_str("theory"),
            ScheduleSpec::Explicit(e) => e.serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for ScheduleSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ScheduleSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("\"theory\" or a table of hyperparameters")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<ScheduleSpec, E> {
                if v == "theory" {
                    Ok(ScheduleSpec::Theory)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<ScheduleSpec, A::Error> {
                let e = ExplicitSchedule::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(ScheduleSpec::Explicit(Box::new(e)))
            }
        }
        d.deserialize_any(V)
    }
}

/// Union of the hyperparameters of all algorithms. Keys that do not apply to
/// the chosen algorithm are rejected when the run is resolved.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSchedule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restart_interval: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<BatchPairing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Selection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wallclock: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<f64>>,
}

impl ExplicitSchedule {
    /// Names of the keys that are set.
    pub fn present_keys(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        macro_rules! check {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    out.push(stringify!($f));
                }
            )*};
        }
        check!(
            iterations,
            rounds,
            restart_interval,
            inner_iterations,
            batch_size,
            inner_batch_size,
            eta_x,
            eta_y,
            clip_x,
            clip_y,
            c2,
            c3,
            pairing,
            selection,
            metrics,
            wallclock,
            x0,
            y0
        );
        out
    }
}

/// A parsed config together with its source text and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: String,
    /// Directory the config was read from; relative data paths resolve here.
    pub base_dir: PathBuf,
    pub name: String,
}

impl LoadedConfig {
    /// Config error pointing at the first line that assigns `key`.
    pub fn error_at(&self, key: &str, message: impl fmt::Display) -> CliError {
        match locate_key(&self.source, key) {
            Some(line) => CliError::config(format!("{}:{line}: {message}", self.name)),
            None => CliError::config(format!("{}: {message}", self.name)),
        }
    }
}

/// 1-based line of the first `key = …` assignment, if any.
pub fn locate_key(source: &str, key: &str) -> Option<usize> {
    source
        .lines()
        .position(|l| {
            let t = l.trim_start();
            t.strip_prefix(key)
                .map(|rest| rest.trim_start().starts_with('='))
                .unwrap_or(false)
        })
        .map(|i| i + 1)
}

pub fn parse_config(source: &str, name: &str, base_dir: &Path) -> CliResult<LoadedConfig> {
    let config: ExperimentConfig = toml::from_str(source).map_err(|e| CliError::config(format!("{name}: {e}")))?;
    let loaded = LoadedConfig {
        config,
        source: source.to_string(),
        base_dir: base_dir.to_path_buf(),
        name: name.to_string(),
    };
    check_structure(&loaded)?;
    Ok(loaded)
}

pub fn load_config(path: &Path) -> CliResult<LoadedConfig> {
    let source =
        std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config(&source, &path.display().to_string(), &base)
}

/// Checks that need the whole document but no data.
fn check_structure(l: &LoadedConfig) -> CliResult<()> {
    let c = &l.config;
    if c.seeds.is_empty() {
        return Err(l.error_at("seeds", "seeds must be a non-empty list"));
    }
    let mut sorted = c.seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(l.error_at("seeds", "seeds must be distinct"));
    }
    match (c.algorithm, c.budget.is_some(), c.noise.is_some()) {
        (AlgorithmKind::GdaReference, true, _) => {
            return Err(l.error_at(
                "algorithm",
                "gda_reference is non-private and takes neither [budget] nor [noise]",
            ));
        }
        (AlgorithmKind::GdaReference, _, true) => {
            return Err(l.error_at(
                "algorithm",
                "gda_reference is non-private and takes neither [budget] nor [noise]",
            ));
        }
        (AlgorithmKind::GdaReference, false, false) => {}
        (_, true, true) => {
            return Err(CliError::config(format!(
                "{}: give exactly one of [budget] and [noise], not both",
                l.name
            )))
        }
        (_, false, false) => {
            return Err(CliError::config(format!(
                "{}: give exactly one of [budget] and [noise]",
                l.name
            )))
        }
        _ => {}
    }
    if c.schedule == ScheduleSpec::Theory {
        if c.budget.is_none() {
            return Err(l.error_at("schedule", "schedule = \"theory\" needs a [budget]"));
        }
        if c.algorithm == AlgorithmKind::GdaReference {
            return Err(l.error_at("schedule", "gda_reference has no theory schedule"));
        }
    }
    if let Some(r) = c.x0_norm {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(l.error_at("x0_norm", "x0_norm must be finite and >= 0"));
        }
    }
    if c.accountant.lambda_max == 0 {
        return Err(l.error_at("lambda_max", "lambda_max must be >= 1"));
    }
    if let Some(e) = c.accountant.audit_epsilon {
        if !(e > 0.0 && e.is_finite()) {
            return Err(l.error_at("audit_epsilon", "audit_epsilon must be finite and > 0"));
        }
    }
    let p = &c.problem;
    let present = [
        (Family::Quadratic, p.quadratic.is_some()),
        (Family::Auc, p.auc.is_some()),
        (Family::WorstGroup, p.worst_group.is_some()),
        (Family::Td, p.td.is_some()),
    ];
    for (f, set) in present {
        if set && f != p.family {
            return Err(l.error_at("family", format!("[problem.{f}] given but family = \"{}\"", p.family)));
        }
    }
    if let Some(a) = &p.auc {
        if a.synthetic.is_some() && a.csv.is_some() {
            return Err(CliError::config(format!(
                "{}: [problem.auc] takes one of synthetic and csv",
                l.name
            )));
        }
    }
    if let Some(t) = &p.td {
        if t.random.is_some() && t.mdp.is_some() {
            return Err(CliError::config(format!(
                "{}: [problem.td] takes one of random and mdp",
                l.name
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
algorithm = "dp_sgda"
seeds = [0]

[problem]
family = "quadratic"

[budget]
epsilon = 1.0
delta = 1e-6

[schedule]
iterations = 10
eta_x = 0.1
eta_y = 0.5
"#;

    fn parse(s: &str) -> CliResult<LoadedConfig> {
        parse_config(s, "test.toml", Path::new("."))
    }

    #[test]
    fn minimal_parses_with_defaults() {
        let l = parse(MINIMAL).unwrap();
        assert_eq!(l.config.algorithm, AlgorithmKind::DpSgda);
        assert_eq!(l.config.output_dir, PathBuf::from("out"));
        assert_eq!(l.config.accountant, AccountantSection::default());
        match &l.config.schedule {
            ScheduleSpec::Explicit(e) => assert_eq!(e.iterations, Some(10)),
            ScheduleSpec::Theory => panic!(),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let bad = MINIMAL.replace("eta_y = 0.5", "eta_y = 0.5\nbatchsize = 3");
        let e = parse(&bad).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.message.contains("batchsize"), "{}", e.message);
        assert!(e.message.contains("line 16"), "{}", e.message);
    }

    #[test]
    fn unknown_problem_key_rejected() {
        let bad = MINIMAL.replace(
            "family = \"quadratic\"",
            "family = \"quadratic\"\n[problem.quadratic]\ndimx = 3",
        );
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn theory_schedule() {
        let s = MINIMAL.replace("[schedule]\niterations = 10\neta_x = 0.1\neta_y = 0.5", "");
        let s = s.replace("seeds = [0]", "seeds = [0]\nschedule = \"theory\"");
        let l = parse(&s).unwrap();
        assert_eq!(l.config.schedule, ScheduleSpec::Theory);
        let bad = s.replace("\"theory\"", "\"magic\"");
        assert!(parse(&bad).is_err());
    }

    #[test]
    fn exactly_one_of_budget_and_noise() {
        let both = format!("{MINIMAL}\n[noise]\nsigma_x = 1.0\nsigma_y = 1.0\n");
        assert!(parse(&both).unwrap_err().message.contains("exactly one"));
        let neither = MINIMAL.replace("[budget]\nepsilon = 1.0\ndelta = 1e-6", "");
        assert!(parse(&neither).is_err());
    }

    #[test]
    fn empty_seeds_rejected_with_line() {
        let e = parse(&MINIMAL.replace("seeds = [0]", "seeds = []")).unwrap_err();
        assert!(e.message.starts_with("test.toml:3:"), "{}", e.message);
    }

    #[test]
    fn budget_is_validated() {
        assert!(parse(&MINIMAL.replace("delta = 1e-6", "delta = 2.0")).is_err());
    }

    #[test]
    fn mismatched_family_table() {
        let s = MINIMAL.replace(
            "family = \"quadratic\"",
            "family = \"quadratic\"\n[problem.auc]\nalpha_bound = 1.0",
        );
        assert!(parse(&s).unwrap_err().message.contains("problem.auc"));
    }

    #[test]
    fn round_trips_through_toml() {
        let l = parse(MINIMAL).unwrap();
        let text = toml::to_string(&l.config).unwrap();
        let again = parse(&text).unwrap();
        assert_eq!(again.config, l.config);
    }

    #[test]
    fn locate_key_finds_first_assignment() {
        assert_eq!(locate_key("a = 1\n  bb = 2\nb = 3", "b"), Some(3));
        assert_eq!(locate_key("a = 1", "z"), None);
    }
}
