//! Effective configuration: defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use ccdetect_core::features::PcaSettings;
use ccdetect_core::forest::ClassWeight;
use ccdetect_core::{Combo, DetectionParams, ForestParams, Formula, PcaMode, Strategy, TiePolicy, Variant};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PcaModeChoice {
    /// Keep the smallest prefix reaching the variance fraction.
    Variance,
    /// Keep ceil(fraction * d) components.
    Dims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FormulaChoice {
    Ochiai,
    Tarantula,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TieChoice {
    Worst,
    Best,
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum StrategyChoice {
    None,
    Flip,
    Trim,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariantChoice {
    One,
    All,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeightChoice {
    None,
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Combo order; unset means 1 for `detect` and all three for `evaluate`.
    pub combo: Option<u8>,
    pub chunk_size: usize,
    pub partitions: usize,
    pub trees: usize,
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub class_weight: ClassWeightChoice,
    pub pca: bool,
    pub pca_mode: PcaModeChoice,
    pub pca_fraction: f64,
    pub formula: FormulaChoice,
    pub tie: TieChoice,
    pub strategy: StrategyChoice,
    pub variant: VariantChoice,
    pub out_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            combo: None,
            chunk_size: 10,
            partitions: 3,
            trees: 100,
            max_features: None,
            max_depth: None,
            class_weight: ClassWeightChoice::None,
            pca: true,
            pca_mode: PcaModeChoice::Variance,
            pca_fraction: 0.6,
            formula: FormulaChoice::Ochiai,
            tie: TieChoice::Worst,
            strategy: StrategyChoice::Both,
            variant: VariantChoice::Both,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

impl Config {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if let Some(k) = self.combo {
            if !(1..=3).contains(&k) {
                return bad(format!("combo {k} is not 1, 2 or 3"));
            }
        }
        if self.chunk_size == 0 {
            return bad("chunk_size must be at least 1".into());
        }
        if self.partitions < 2 {
            return bad("partitions must be at least 2".into());
        }
        if self.trees == 0 {
            return bad("trees must be at least 1".into());
        }
        if self.max_features == Some(0) {
            return bad("max_features must be at least 1".into());
        }
        if !(self.pca_fraction > 0.0 && self.pca_fraction <= 1.0) {
            return bad(format!("pca_fraction {} outside (0, 1]", self.pca_fraction));
        }
        Ok(())
    }

    pub fn detection_params(&self, combo: Combo) -> DetectionParams {
        let pca = self.pca.then_some(PcaSettings {
            mode: match self.pca_mode {
                PcaModeChoice::Variance => PcaMode::VarianceFraction,
                PcaModeChoice::Dims => PcaMode::DimensionFraction,
            },
            fraction: self.pca_fraction,
        });
        DetectionParams {
            chunk_size: self.chunk_size,
            partitions: self.partitions,
            combo,
            pca,
            forest: ForestParams {
                n_trees: self.trees,
                max_features: self.max_features,
                max_depth: self.max_depth,
                class_weight: match self.class_weight {
                    ClassWeightChoice::None => ClassWeight::None,
                    ClassWeightChoice::Balanced => ClassWeight::Balanced,
                },
                ..ForestParams::default()
            },
            seed: self.seed,
        }
    }

    fn combo_of(k: u8) -> Combo {
        Combo::new(k).expect("validated combo")
    }

    pub fn detect_combo(&self) -> Combo {
        Self::combo_of(self.combo.unwrap_or(1))
    }

    pub fn evaluate_combos(&self) -> Vec<Combo> {
        match self.combo {
            Some(k) => vec![Self::combo_of(k)],
            None => Combo::ALL.to_vec(),
        }
    }

    pub fn formula(&self) -> Formula {
        match self.formula {
            FormulaChoice::Ochiai => Formula::Ochiai,
            FormulaChoice::Tarantula => Formula::Tarantula,
        }
    }

    pub fn tie_policy(&self) -> TiePolicy {
        match self.tie {
            TieChoice::Worst => TiePolicy::Worst,
            TieChoice::Best => TiePolicy::Best,
            TieChoice::Average => TiePolicy::Average,
        }
    }

    pub fn strategies(&self) -> Vec<Strategy> {
        match self.strategy {
            StrategyChoice::None => vec![Strategy::None],
            StrategyChoice::Flip => vec![Strategy::Flip],
            StrategyChoice::Trim => vec![Strategy::Trim],
            StrategyChoice::Both => vec![Strategy::Flip, Strategy::Trim],
        }
    }

    pub fn variant(&self) -> Variant {
        match self.variant {
            VariantChoice::One => Variant::OneAtATime,
            VariantChoice::All => Variant::AllAtOnce,
            VariantChoice::Both => Variant::Both,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_detection_defaults() {
        let c = Config::default();
        assert_eq!(c.detection_params(Combo::One), DetectionParams::default());
        assert_eq!(c.evaluate_combos(), Combo::ALL.to_vec());
        assert_eq!(c.strategies(), vec![Strategy::Flip, Strategy::Trim]);
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let p = Path::new("c.toml");
        let c = Config::from_toml("seed = 7\ncombo = 2\npca_mode = \"dims\"\ntie = \"average\"\n", p).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.detect_combo(), Combo::Two);
        assert_eq!(c.tie_policy(), TiePolicy::Average);
        assert_eq!(
            c.detection_params(Combo::Two).pca.unwrap().mode,
            PcaMode::DimensionFraction
        );
        assert!(matches!(
            Config::from_toml("sede = 7\n", p),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn toml_round_trip() {
        let c = Config {
            combo: Some(3),
            max_depth: Some(4),
            ..Config::default()
        };
        let text = toml::to_string(&c).unwrap();
        assert_eq!(Config::from_toml(&text, Path::new("x")).unwrap(), c);
    }

    #[test]
    fn validation() {
        for c in [
            Config {
                combo: Some(4),
                ..Config::default()
            },
            Config {
                chunk_size: 0,
                ..Config::default()
            },
            Config {
                partitions: 1,
                ..Config::default()
            },
            Config {
                trees: 0,
                ..Config::default()
            },
            Config {
                pca_fraction: 0.0,
                ..Config::default()
            },
            Config {
                pca_fraction: 1.5,
                ..Config::default()
            },
        ] {
            assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))), "{c:?}");
        }
        assert!(Config::default().validate().is_ok());
    }
}
