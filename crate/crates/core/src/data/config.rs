//! Flat `key = value` configuration with defaults for every setting.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Method, RetroHyperParams};
use crate::model::{ScorerKind, TrainConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    // Model and training.
    pub scorer: ScorerKind,
    pub dim: usize,
    pub window: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,

    // Data.
    pub format: String,
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
    pub simulation_size: usize,
    /// Optional `id|name` file with item titles.
    pub names: Option<String>,

    // Explanations.
    pub k: usize,
    pub exclude_history: bool,
    pub method: Method,
    pub gamma1: f64,
    pub lambda: f64,
    pub gamma2: f64,
    pub alpha1: f64,
    pub relax_learning_rate: f64,
    pub relax_steps: usize,
    pub threshold: f64,
    pub r2_literal: bool,
    pub interaction_verb: String,

    // Evaluation.
    pub sample_size: usize,
    pub k_values: Vec<usize>,
    pub jobs: usize,

    // Service.
    pub bind: String,
    pub port: u16,
    pub session_idle_minutes: u64,
    pub snapshot_path: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        let train = TrainConfig::default();
        let hyper = RetroHyperParams::default();
        Config {
            scorer: ScorerKind::Gru,
            dim: train.dim,
            window: train.window,
            batch_size: train.batch_size,
            dropout: train.dropout,
            learning_rate: train.learning_rate,
            epochs: train.max_epochs,
            patience: train.patience,
            seed: train.seed,
            format: "tsv".into(),
            min_user_interactions: 20,
            min_item_interactions: 10,
            simulation_size: 10,
            names: None,
            k: 10,
            exclude_history: true,
            method: Method::Search,
            gamma1: hyper.gamma1,
            lambda: hyper.lambda,
            gamma2: hyper.gamma2,
            alpha1: hyper.alpha1,
            relax_learning_rate: hyper.learning_rate,
            relax_steps: hyper.steps,
            threshold: hyper.threshold,
            r2_literal: hyper.r2_literal,
            interaction_verb: "interacted with".into(),
            sample_size: 200,
            k_values: vec![3, 5, 10],
            jobs: 1,
            bind: "127.0.0.1".into(),
            port: 8080,
            session_idle_minutes: 30,
            snapshot_path: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Overrides one key. `value` is read as a TOML value, falling back
    /// to a plain string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table: toml::Table = toml::from_str(&self.to_text()).expect("config round-trips");
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        table.insert(key.to_string(), parsed);
        let updated: Config = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("{key} = {value}: {}", e.message())))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got {:?}", o.as_ref())))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.dim),
            ("window", self.window),
            ("batch_size", self.batch_size),
            ("k", self.k),
            ("jobs", self.jobs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must be in [0, 1]".into()));
        }
        if self.k_values.contains(&0) {
            return Err(Error::Config("k_values must be positive".into()));
        }
        self.format.parse::<super::Format>()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            window: self.window,
            batch_size: self.batch_size,
            dropout: self.dropout,
            learning_rate: self.learning_rate,
            max_epochs: self.epochs,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn retro_hyper(&self) -> RetroHyperParams {
        RetroHyperParams {
            gamma1: self.gamma1,
            lambda: self.lambda,
            gamma2: self.gamma2,
            alpha1: self.alpha1,
            learning_rate: self.relax_learning_rate,
            steps: self.relax_steps,
            threshold: self.threshold,
            r2_literal: self.r2_literal,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn round_trips_through_text() {
        let c = Config {
            names: Some("items.txt".into()),
            k_values: vec![1, 2],
            ..Config::default()
        };
        assert_eq!(Config::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn overrides_and_errors() {
        let mut c = Config::parse("scorer = \"attention\"\nlambda = 3.5\n").unwrap();
        assert_eq!(c.scorer, ScorerKind::Attention);
        c.apply_overrides(&["k=5", "method=relax", "k_values=[2, 4]", "names=titles.txt"]).unwrap();
        assert_eq!((c.k, c.method, c.lambda), (5, Method::Relax, 3.5));
        assert_eq!(c.k_values, vec![2, 4]);
        assert_eq!(c.names.as_deref(), Some("titles.txt"));
        assert!(c.set("no_such_key", "1").is_err());
        assert!(c.set("k", "0").is_err());
        assert!(c.set("k", "many").is_err());
        assert!(Config::parse("dim = -1").is_err());
        assert!(Config::parse("unknown = 1").is_err());
    }
}
