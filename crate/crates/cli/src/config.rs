//! TOML experiment configuration.
//!
//! Every section is optional; omitted fields take the defaults of the
//! two-class Gaussian experiment. Subcommands other than `experiment` read
//! the parts they need and let flags override them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qadv_core::attack::AttackSpec;
use qadv_core::embed::{DataSpec, EmbeddingSpec};
use qadv_core::estimate::{MultistartOptions, SigmaOptions};
use qadv_core::NormOrder;

use crate::CliError;

/// Where the measured POVM comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PovmSource {
    /// `{|0><0|, |1><1|, ...}`.
    #[default]
    FixedComputational,
    /// Trained per dataset: clean training for the clean curve and
    /// adversarial training against the train attack for the other.
    Trained {
        #[serde(default = "defaults::max_outer_iters")]
        max_outer_iters: usize,
        #[serde(default = "defaults::num_restarts")]
        num_restarts: usize,
    },
    /// JSON file of elements, each a row-major matrix of `[re, im]` pairs.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackPair {
    pub train: AttackSpec,
    pub test: AttackSpec,
}

impl Default for AttackPair {
    fn default() -> Self {
        let a = AttackSpec::new(NormOrder::One, 0.08).expect("valid default budget");
        AttackPair { train: a, test: a }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarlo {
    pub seed: Option<u64>,
    /// Dataset draws per `T` for the generalization-error curves.
    pub num_datasets: usize,
    /// Dataset draws per `T` for the Rademacher estimates (a prefix of the
    /// generalization-error draws).
    pub rademacher_datasets: usize,
    /// Dataset draws per `T` when the POVM is trained.
    pub train_datasets: usize,
    pub sigma: SigmaOptions,
    pub multistart: MultistartOptions,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo {
            seed: None,
            num_datasets: 200,
            rademacher_datasets: 20,
            train_datasets: 20,
            sigma: SigmaOptions::default(),
            multistart: MultistartOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub embedding: EmbeddingSpec,
    pub data: DataSpec,
    pub povm: PovmSource,
    pub t_grid: Vec<usize>,
    pub attacks: AttackPair,
    pub delta: f64,
    /// Replaces the measured eigenvalue floor in bound validity checks.
    pub floor_override: Option<f64>,
    pub mc: MonteCarlo,
    pub outputs: Outputs,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            embedding: EmbeddingSpec::default(),
            data: DataSpec::default(),
            povm: PovmSource::default(),
            t_grid: vec![25, 50, 100, 200, 400, 800],
            attacks: AttackPair::default(),
            delta: 0.8,
            floor_override: None,
            mc: MonteCarlo::default(),
            outputs: Outputs::default(),
        }
    }
}

mod defaults {
    pub fn max_outer_iters() -> usize {
        100
    }
    pub fn num_restarts() -> usize {
        4
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("invalid config: {e}")))
    }

    /// Loads `path` if given, else the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.embedding.validate()?;
        self.data.validate()?;
        self.attacks.train.validate()?;
        self.attacks.test.validate()?;
        if self.t_grid.is_empty() {
            return Err(CliError::Validation("T grid is empty".into()));
        }
        if self.t_grid[0] < 1 || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Validation(format!(
                "T grid must be positive and strictly increasing, got {:?}",
                self.t_grid
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CliError::Validation(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        if let Some(f) = self.floor_override {
            if !(f >= 0.0 && f <= 1.0 / self.embedding.dim as f64) {
                return Err(CliError::Validation(format!("floor override must lie in [0, 1/d], got {f}")));
            }
        }
        let mc = &self.mc;
        if mc.num_datasets < 1 || mc.rademacher_datasets < 1 || mc.train_datasets < 1 || mc.sigma.num_sigma < 1 {
            return Err(CliError::Validation("Monte Carlo counts must be >= 1".into()));
        }
        if matches!(self.povm, PovmSource::Trained { max_outer_iters: 0, .. } | PovmSource::Trained { num_restarts: 0, .. }) {
            return Err(CliError::Validation("training needs at least one iteration and restart".into()));
        }
        Ok(())
    }

    pub fn seed(&self) -> Option<u64> {
        self.mc.seed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn sections_parse() {
        let c = ExperimentConfig::parse(
            r#"
            t_grid = [10, 20]
            floor_override = 0.05
            [attacks.train]
            p = "inf"
            epsilon = 0.1
            [attacks.test]
            p = "1"
            epsilon = 0.15
            [povm]
            source = "trained"
            [mc]
            seed = 3
            num_datasets = 5
            [mc.sigma]
            exhaustive_max_t = 12
            num_sigma = 64
            "#,
        )
        .unwrap();
        assert_eq!(c.attacks.train.p, NormOrder::Infinity);
        assert_eq!(c.attacks.test.epsilon, 0.15);
        assert_eq!(c.mc.seed, Some(3));
        assert_eq!(c.mc.sigma.num_sigma, 64);
        assert_eq!(
            c.povm,
            PovmSource::Trained {
                max_outer_iters: 100,
                num_restarts: 4
            }
        );
        c.validate().unwrap();
    }

    #[test]
    fn bad_configs_rejected() {
        for text in ["t_grid = [20, 10]", "delta = 1.5", "t_grid = []", "floor_override = 0.9", "bogus = 1"] {
            let parsed = ExperimentConfig::parse(text);
            assert!(parsed.is_err() || parsed.unwrap().validate().is_err(), "{text}");
        }
    }
}
