use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDateTime;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datapipe::{parse_timestamp, AttachMode};
use crate::decomposition::{CeemdanParams, SiftConfig};
use crate::error::{Error, Result};
use crate::models::{BpnnConfig, DeepTcnConfig, ModelConfig, ModelKind, RnnConfig};
use crate::training::TrainConfig;

/// A model family, optionally fed the decomposition components as extra
/// input channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant {
    pub decomposed: bool,
    pub kind: ModelKind,
}

impl Variant {
    pub const fn plain(kind: ModelKind) -> Self {
        Self { decomposed: false, kind }
    }

    pub const fn ceemdan(kind: ModelKind) -> Self {
        Self { decomposed: true, kind }
    }

    /// Display order of the comparison tables: decomposed variants first,
    /// strongest families first within each group.
    pub fn table_rank(&self) -> usize {
        let family = match self.kind {
            ModelKind::DeepTcn => 0,
            ModelKind::Gru => 1,
            ModelKind::Lstm => 2,
            ModelKind::Bpnn => 3,
            ModelKind::Lr => 4,
        };
        if self.decomposed {
            family
        } else {
            5 + family
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.decomposed {
            write!(f, "CEEMDAN-{}", self.kind)
        } else {
            write!(f, "{}", self.kind)
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.get(..8) {
            Some(p) if p.eq_ignore_ascii_case("CEEMDAN-") => Ok(Variant::ceemdan(t[8..].parse()?)),
            _ => Ok(Variant::plain(t.parse()?)),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Input file in the documented CSV schema. When absent a synthetic
    /// series of `synthetic_hours` rows is generated from `synthetic_seed`.
    pub path: Option<PathBuf>,
    pub synthetic_hours: usize,
    pub synthetic_seed: u64,
    /// Train, validation and test fractions, used unless both dates are set.
    pub split_fractions: [f64; 3],
    pub validation_start: Option<String>,
    pub test_start: Option<String>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            path: None,
            synthetic_hours: 2000,
            synthetic_seed: 1,
            split_fractions: [0.6, 0.2, 0.2],
            validation_start: None,
            test_start: None,
        }
    }
}

impl DataConfig {
    pub fn split_dates(&self) -> Result<Option<(NaiveDateTime, NaiveDateTime)>> {
        let parse = |s: &str| parse_timestamp(s).ok_or_else(|| Error::Config(format!("cannot parse split date {s:?}")));
        match (&self.validation_start, &self.test_start) {
            (Some(v), Some(t)) => Ok(Some((parse(v)?, parse(t)?))),
            (None, None) => Ok(None),
            _ => Err(Error::Config("set both validation_start and test_start, or neither".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionMode {
    FullSeries,
    TrainOnlyRefit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    pub enabled: bool,
    pub noise_ratio: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: DecompositionMode,
    /// Trailing window length for rows after the training range in
    /// `train_only_refit` mode.
    pub refit_window: usize,
    pub sift: SiftConfig,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        let p = CeemdanParams::default();
        Self {
            enabled: true,
            noise_ratio: p.noise_ratio,
            trials: p.trials,
            seed: p.seed,
            mode: DecompositionMode::FullSeries,
            refit_window: 512,
            sift: SiftConfig::default(),
        }
    }
}

impl DecompositionConfig {
    pub fn params(&self) -> CeemdanParams {
        CeemdanParams {
            noise_ratio: self.noise_ratio,
            trials: self.trials,
            seed: self.seed,
        }
    }

    pub fn attach_mode(&self) -> AttachMode {
        match self.mode {
            DecompositionMode::FullSeries => AttachMode::FullSeries,
            DecompositionMode::TrainOnlyRefit => AttachMode::TrainOnlyRefit {
                window: self.refit_window,
                params: self.params(),
                sift: self.sift.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsSection {
    pub names: Vec<Variant>,
    pub horizons: Vec<usize>,
    /// Input window length T.
    pub history: usize,
}

impl Default for ModelsSection {
    fn default() -> Self {
        Self {
            names: [ModelKind::Lr, ModelKind::Bpnn, ModelKind::Lstm, ModelKind::Gru, ModelKind::DeepTcn]
                .into_iter()
                .map(Variant::plain)
                .chain([Variant::ceemdan(ModelKind::DeepTcn)])
                .collect(),
            horizons: vec![1, 2, 3],
            history: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Small-sample correction for the DM test.
    pub harvey: bool,
}

/// Everything one `run` needs. Every field has a default, so an empty file
/// is a valid configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Independent replicates of every (model, horizon) cell.
    pub robustness_runs: usize,
    pub data: DataConfig,
    pub decomposition: DecompositionConfig,
    pub models: ModelsSection,
    pub train: TrainConfig,
    pub tcn: DeepTcnConfig,
    pub bpnn: BpnnConfig,
    pub rnn: RnnConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("results"),
            robustness_runs: 1,
            data: DataConfig::default(),
            decomposition: DecompositionConfig::default(),
            models: ModelsSection::default(),
            train: TrainConfig::default(),
            tcn: DeepTcnConfig::default(),
            bpnn: BpnnConfig::default(),
            rnn: RnnConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            tcn: self.tcn.clone(),
            bpnn: self.bpnn.clone(),
            rnn: self.rnn.clone(),
        }
    }

    pub fn needs_decomposition(&self) -> bool {
        self.models.names.iter().any(|v| v.decomposed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.names.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        if self.models.horizons.is_empty() {
            return Err(Error::Config("at least one horizon is required".into()));
        }
        for (i, v) in self.models.names.iter().enumerate() {
            if self.models.names[..i].contains(v) {
                return Err(Error::Config(format!("model {v} listed twice")));
            }
        }
        let mut hs = self.models.horizons.clone();
        hs.sort_unstable();
        hs.dedup();
        if hs.len() != self.models.horizons.len() || hs.contains(&0) {
            return Err(Error::Config("horizons must be distinct and positive".into()));
        }
        if self.models.history == 0 {
            return Err(Error::Config("history must be positive".into()));
        }
        if self.robustness_runs == 0 {
            return Err(Error::Config("robustness_runs must be at least 1".into()));
        }
        if self.needs_decomposition() && !self.decomposition.enabled {
            return Err(Error::Config("CEEMDAN variants requested but decomposition is disabled".into()));
        }
        if let Some(path) = &self.data.path {
            if !path.exists() {
                return Err(Error::Config(format!("data file {} does not exist", path.display())));
            }
        }
        self.data.split_dates()?;
        self.decomposition.sift.validate()?;
        self.tcn.validate()?;
        self.train.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_settings() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c.models.history, 24);
        assert_eq!(c.train.epochs, 100);
        assert_eq!(c.train.batch_size, 128);
        assert_eq!(c.train.learning_rate, 0.01);
        assert_eq!(c.bpnn.hidden, 32);
        assert_eq!(c.rnn.hidden, 64);
        assert_eq!(c.tcn.dilations, [1, 2, 4, 8]);
        assert_eq!(c.tcn.channels, [32, 32, 16, 16]);
        assert_eq!(c.models.names.len(), 6);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn parses_sections() {
        let c = ExperimentConfig::from_toml(
            r#"
            seed = 5
            robustness_runs = 3
            [data]
            synthetic_hours = 500
            [models]
            names = ["LR", "ceemdan-gru"]
            horizons = [1]
            [train]
            epochs = 2
            [rnn]
            sigmoid_head = true
            [decomposition]
            mode = "train_only_refit"
            "#,
        )
        .unwrap();
        assert_eq!(c.models.names, [Variant::plain(ModelKind::Lr), Variant::ceemdan(ModelKind::Gru)]);
        assert!(c.rnn.sigmoid_head);
        assert_eq!(c.decomposition.mode, DecompositionMode::TrainOnlyRefit);
        assert_eq!(c.train.batch_size, 128);
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ExperimentConfig::from_toml("[models]\nnames = [\"ARIMA\"]").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let mut c = ExperimentConfig::default();
        c.models.horizons = vec![];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.decomposition.enabled = false;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.data.validation_start = Some("2016-11-01 00:00".into());
        assert!(c.validate().is_err());
    }
}
