use std::path::{Path, PathBuf};

use isl_core::distributions::TargetSpec;
use isl_core::training::{Method, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// KS distance to the target CDF (1D).
    Ksd,
    /// MAE and MSE against the optimal monotone map (1D target and noise).
    MaeMse,
    /// Log-log CCDF area between the absolute values (1D).
    Accdf,
    /// Mode count and high-quality percentage (targets with known modes).
    Modes,
    /// Histogram KL(reference || generated) (D <= 2).
    Kl,
    /// Mean per-marginal histogram JS divergence.
    JsMarginal,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Ksd,
        Metric::MaeMse,
        Metric::Accdf,
        Metric::Modes,
        Metric::Kl,
        Metric::JsMarginal,
    ];

    pub fn applies_to(self, target: &TargetSpec, noise_dim: usize) -> bool {
        let d = target.dim();
        match self {
            Metric::Ksd | Metric::Accdf => d == 1,
            Metric::MaeMse => d == 1 && noise_dim == 1,
            Metric::Modes => target.mode_layout().is_some(),
            Metric::Kl => d <= 2,
            Metric::JsMarginal => true,
        }
    }
}

fn default_n_samples() -> usize {
    10_000
}
fn default_n_mc() -> usize {
    10_000
}
fn default_bins() -> usize {
    isl_core::metrics::DEFAULT_BINS
}

/// Sample counts used after training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalCounts {
    /// Generated samples per metric.
    pub n_samples: usize,
    /// Fresh target samples used as the reference.
    pub n_reference: usize,
    /// Monte Carlo draws for MAE/MSE.
    pub n_mc: usize,
    /// Histogram bins per axis for KL/JS.
    pub bins: usize,
}

impl Default for EvalCounts {
    fn default() -> Self {
        EvalCounts {
            n_samples: default_n_samples(),
            n_reference: default_n_samples(),
            n_mc: default_n_mc(),
            bins: default_bins(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    /// Its `seed` is replaced by each entry of `seeds`.
    pub train: TrainConfig,
    /// Tail index for Pareto-ISL noise; estimated from the data when absent.
    #[serde(default)]
    pub pareto_xi: Option<f64>,
    pub output_dir: PathBuf,
    /// Every applicable metric when absent.
    #[serde(default)]
    pub metrics: Option<Vec<Metric>>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub eval: EvalCounts,
    /// Keep per-epoch wall-clock times in the reports (which then differ
    /// between reruns).
    #[serde(default)]
    pub record_timings: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// The field a serde message names, for unknown or missing fields.
fn named_field(message: &str) -> Option<&str> {
    let rest = message
        .strip_prefix("unknown field `")
        .or_else(|| message.strip_prefix("missing field `"))?;
    rest.split('`').next()
}

/// How serde describes an unexpected JSON value in "invalid type" messages.
fn unexpected(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(b) => format!("boolean `{b}`"),
        Value::Number(n) if n.is_f64() => format!("floating point `{n}`"),
        Value::Number(n) => format!("integer `{n}`"),
        Value::String(s) => format!("string {s:?}"),
        Value::Array(_) => "sequence".into(),
        Value::Object(_) => "map".into(),
    }
}

/// Tagged enums (targets, noise laws) are buffered by serde, so their errors
/// stop at the enum itself; find the single field the message points at.
fn field_inside(root: &Value, path: &str, message: &str) -> Option<String> {
    let mut node = root;
    for seg in path.split('.') {
        node = node.get(seg)?;
    }
    let found = message.strip_prefix("invalid type: ")?;
    let mut hits = node
        .as_object()?
        .iter()
        .filter(|(_, v)| found.starts_with(&format!("{}, expected", unexpected(v))));
    match (hits.next(), hits.next()) {
        (Some((k, _)), None) => Some(k.clone()),
        _ => None,
    }
}

/// Parses a config, naming the offending key on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let field = named_field(&message).map(str::to_string).or_else(|| {
            let root: Value = serde_json::from_str(text).ok()?;
            field_inside(&root, &path, &message)
        });
        let key = match field {
            Some(f) if path == "." => Some(f),
            Some(f) if path == f || path.ends_with(&format!(".{f}")) => Some(path),
            Some(f) => Some(format!("{path}.{f}")),
            None if path == "." => None,
            None => Some(path),
        };
        CliError::config(key, message)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    parse_config(&text)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |key: &str, m: String| Err(CliError::config(Some(key.to_string()), m));
        if let Err(e) = self.train.validate() {
            return cfg_err("train", e.to_string());
        }
        if self.seeds.is_empty() {
            return cfg_err("seeds", "seed list must not be empty".into());
        }
        let d = self.train.target.dim();
        if self.method.is_one_dimensional() && d != 1 {
            return cfg_err("method", format!("{} needs a 1D target, got dimension {d}", self.method.name()));
        }
        if self.method == Method::IslSliced && d < 2 {
            return cfg_err("method", "isl_sliced needs a target of dimension >= 2".into());
        }
        if self.pareto_xi.is_some() && self.method != Method::ParetoIsl {
            return cfg_err("pareto_xi", "pareto_xi only applies to pareto_isl".into());
        }
        let e = &self.eval;
        if e.n_samples == 0 || e.n_reference < 2 || e.n_mc == 0 || e.bins == 0 {
            return cfg_err("eval", "sample counts and bins must be positive (n_reference >= 2)".into());
        }
        if let Some(list) = &self.metrics {
            for m in list {
                if !m.applies_to(&self.train.target, self.train.noise.dim) {
                    return cfg_err("metrics", format!("{m:?} does not apply to target {}", self.train.target.name()));
                }
            }
        }
        Ok(())
    }

    /// Selected metrics in canonical order.
    pub fn selected_metrics(&self) -> Vec<Metric> {
        match &self.metrics {
            Some(list) => Metric::ALL.into_iter().filter(|m| list.contains(m)).collect(),
            None => Metric::ALL
                .into_iter()
                .filter(|m| m.applies_to(&self.train.target, self.train.noise.dim))
                .collect(),
        }
    }

    pub fn train_config_for(&self, seed: u64) -> TrainConfig {
        let mut c = self.train.clone();
        c.seed = seed;
        c
    }
}
