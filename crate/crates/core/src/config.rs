//! TOML study files.
//!
//! ```toml
//! [study]
//! target = "cauchy"
//! policies = ["zero", "grad:1", "const:1"]
//! start = "-5,+1"
//! horizon = 1e4
//! replicates = 1000
//! seed = 20240607
//! threshold = 5.0
//! checkpoints = 200
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimators::IndicatorQuery;
use crate::experiments::{log_checkpoints, ExperimentConfig};
use crate::pdmp::ZigZagState;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub target: String,
    pub policies: Vec<String>,
    pub start: String,
    pub horizon: f64,
    pub replicates: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Number of log-spaced checkpoints in `[first_checkpoint, horizon]`.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_first_checkpoint")]
    pub first_checkpoint: f64,
}

fn default_checkpoints() -> usize {
    200
}

fn default_first_checkpoint() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    study: StudyConfig,
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str::<StudyFile>(text)
            .map(|f| f.study)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// One experiment per refresh policy, sharing seed and checkpoints.
    pub fn experiments(&self) -> Result<Vec<ExperimentConfig>> {
        if self.policies.is_empty() {
            return Err(Error::InvalidParameter("study lists no refresh policies".to_string()));
        }
        let initial: ZigZagState = self.start.parse()?;
        let checkpoints = log_checkpoints(self.first_checkpoint, self.horizon, self.checkpoints)?;
        let configs: Vec<ExperimentConfig> = self
            .policies
            .iter()
            .map(|p| ExperimentConfig {
                target_tag: self.target.clone(),
                refresh_tag: p.clone(),
                initial,
                horizon: self.horizon,
                replicates: self.replicates,
                checkpoints: checkpoints.clone(),
                seed: self.seed,
                query: IndicatorQuery::new(self.threshold),
            })
            .collect();
        for c in &configs {
            c.resolve()?;
        }
        Ok(configs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG: &str = r#"
[study]
target = "cauchy"
policies = ["zero", "grad:1", "const:1"]
start = "-5,+1"
horizon = 1e4
replicates = 1000
seed = 7
threshold = 5.0
"#;

    #[test]
    fn parses_study() {
        let s = StudyConfig::parse(FIG).unwrap();
        assert_eq!(s.checkpoints, 200);
        let ex = s.experiments().unwrap();
        assert_eq!(ex.len(), 3);
        assert_eq!(ex[1].refresh_tag, "grad:1");
        assert_eq!(ex[0].initial.x, -5.0);
        assert_eq!(*ex[2].checkpoints.last().unwrap(), 1e4);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(StudyConfig::parse(&FIG.replace("seed = 7", "seed = 7\ncolour = 1")).is_err());
        assert!(StudyConfig::parse(&FIG.replace("\"zero\", ", "\"often\", "))
            .unwrap()
            .experiments()
            .is_err());
        assert!(StudyConfig::parse(&FIG.replace("-5,+1", "-5,2")).unwrap().experiments().is_err());
    }
}
