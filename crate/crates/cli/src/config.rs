//! TOML configuration shared by every subcommand.
//!
//! ```toml
//! seed = 7
//!
//! [model.linear]
//! c = 1.0
//! epochs = 20
//!
//! [model.train]
//! max_epochs = 30
//!
//! [serve]
//! bind = "0.0.0.0:8080"
//!
//! [demo]
//! n = 2000
//! ```
//!
//! Every key is optional. Flags override file values; for `serve`, the
//! `PSYLING_*` environment variables sit between flags and the file.

use std::path::Path;

use psyling::model::ModelConfig;
use psyling_service::ConfigOverrides;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    /// Utterances in the synthetic corpus behind the comparison grid.
    pub n: usize,
    pub marker_strength: f64,
    pub test_size: usize,
    /// Learning-curve corpus.
    pub curve_marker_strength: f64,
    pub curve_sizes: Vec<usize>,
    pub curve_test_size: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            n: 2000,
            marker_strength: 0.9,
            test_size: 400,
            curve_marker_strength: 0.7,
            curve_sizes: vec![250, 500, 1000, 2000],
            curve_test_size: 500,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub serve: ConfigOverrides,
    pub demo: DemoConfig,
}

impl CliConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::domain("invalid_config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start().to_string() + "\n")
            .collect();
        let c = CliConfig::parse(&doc).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.model.train.max_epochs, 30);
        assert_eq!(c.demo.n, 2000);
        assert_eq!(c.serve.bind.unwrap().port(), 8080);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(CliConfig::parse("sede = 1").is_err());
        assert!(CliConfig::parse("[model.linear]\nk = 2").is_err());
    }
}
