//! Run configuration: every parameter a subcommand consumes, fully
//! serialized next to the outputs so a run can be reproduced from its record.

use serde::{Deserialize, Serialize};
use shapegraph::{MatchParams, WeightPolicy};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub inputs: Vec<String>,
    pub eta: f64,
    pub lambda: f64,
    pub e: f64,
    pub samples: usize,
    pub seed: u64,
    pub weights: WeightPolicy,
    pub levels: Vec<f64>,
    pub frames: usize,
    pub mean_tol: f64,
    pub mean_max_iter: usize,
    pub outlier_fraction: f64,
    pub bench_grid: Vec<usize>,
    pub bench_runs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: String::new(),
            inputs: Vec::new(),
            eta: 1.0,
            lambda: 0.5,
            e: 0.7,
            samples: 30,
            seed: 0,
            weights: WeightPolicy::Length,
            levels: shapegraph::multiscale::uniform_levels(8),
            frames: 5,
            mean_tol: 1e-4,
            mean_max_iter: 20,
            outlier_fraction: 0.0,
            bench_grid: vec![10, 20, 40, 80],
            bench_runs: 3,
        }
    }
}

impl RunConfig {
    pub fn match_params(&self) -> MatchParams {
        MatchParams {
            lambda: self.lambda,
            eta: self.eta,
            e: self.e,
            samples: self.samples,
            seed: self.seed,
            weight_policy: self.weights,
        }
    }

    pub fn load(path: &Path) -> shapegraph::Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            shapegraph::Error::Data(format!("cannot read config `{}`: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| shapegraph::Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> shapegraph::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
