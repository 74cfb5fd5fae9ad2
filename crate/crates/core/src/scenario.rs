//! Scenario file schema: one JSON document drives every subcommand.
//!
//! Top-level keys are `environment`, `network` and `run`, plus optional
//! per-command blocks (`fluid`, `simulate`, `reliability`, `compare`,
//! `converge`) that override defaults. Unknown keys are rejected.

use serde::Deserialize;
use thiserror::Error;

use crate::fluid::SolveMode;
use crate::model::{
    DepartureFamily, EnvironmentSpec, HoldingLaw, NetworkSpec, TransitionLaw,
};
use crate::reliability::ReliabilitySpec;

/// Default trajectory export step.
pub const DEFAULT_SAMPLE_STEP: f64 = 1e-3;
/// Default simulation grid step.
pub const DEFAULT_GRID_STEP: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario is missing the `{0}` block")]
    MissingBlock(&'static str),
    #[error("environment must define exactly one of `transition` and `rates`")]
    TransitionAmbiguous,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub environment: Option<EnvironmentBlock>,
    pub network: Option<NetworkBlock>,
    pub run: Option<RunBlock>,
    pub fluid: Option<FluidBlock>,
    pub simulate: Option<SimulateBlock>,
    pub reliability: Option<ReliabilitySpec>,
    pub compare: Option<CompareBlock>,
    pub converge: Option<ConvergeBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    pub states: Vec<String>,
    /// Embedded jump-chain matrix; mutually exclusive with `rates`.
    pub transition: Option<Vec<Vec<f64>>>,
    /// Transition rates; holding times default to exponential row sums.
    pub rates: Option<Vec<Vec<f64>>>,
    pub holding: Option<Vec<Option<HoldingLaw>>>,
    pub lambda: Vec<f64>,
    pub routing: Vec<Vec<f64>>,
    pub initial_state: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBlock {
    pub k: usize,
    pub mu: Vec<f64>,
    pub beta: Vec<f64>,
    pub departure_family: DepartureFamily,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub horizon: f64,
    pub seed: u64,
    pub mode: Option<SolveMode>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidBlock {
    pub mode: Option<SolveMode>,
    pub sample_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub n: usize,
    pub replications: usize,
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareBlock {
    pub level: f64,
    pub stations: Vec<usize>,
    pub a: StrategyBlock,
    pub b: StrategyBlock,
}

/// Per-strategy costs plus optional overrides of the base environment.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyBlock {
    pub setup_cost: f64,
    pub unit_rate_cost: f64,
    pub lambda: Option<Vec<f64>>,
    pub initial_state: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeBlock {
    pub ns: Vec<usize>,
    pub replications: usize,
    pub grid_step: Option<f64>,
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Scenario, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn environment_spec(&self) -> Result<EnvironmentSpec, ScenarioError> {
        let block = self.environment.as_ref().ok_or(ScenarioError::MissingBlock("environment"))?;
        let transition = match (&block.transition, &block.rates) {
            (Some(p), None) => TransitionLaw::Embedded(p.clone()),
            (None, Some(z)) => TransitionLaw::Rates(z.clone()),
            _ => return Err(ScenarioError::TransitionAmbiguous),
        };
        let holding = block
            .holding
            .clone()
            .unwrap_or_else(|| vec![None; block.states.len()]);
        Ok(EnvironmentSpec {
            states: block.states.clone(),
            transition,
            holding,
            lambda: block.lambda.clone(),
            routing: block.routing.clone(),
            initial_state: block.initial_state,
        })
    }

    pub fn network_spec(&self) -> Result<NetworkSpec, ScenarioError> {
        let block = self.network.as_ref().ok_or(ScenarioError::MissingBlock("network"))?;
        Ok(NetworkSpec {
            k: block.k,
            mu: block.mu.clone(),
            beta: block.beta.clone(),
            departure_family: block.departure_family,
        })
    }

    pub fn run_block(&self) -> Result<&RunBlock, ScenarioError> {
        self.run.as_ref().ok_or(ScenarioError::MissingBlock("run"))
    }

    /// Solve mode: the fluid block wins over the run block; the default
    /// reproduces the published worked numbers.
    pub fn solve_mode(&self) -> SolveMode {
        self.fluid
            .as_ref()
            .and_then(|f| f.mode)
            .or_else(|| self.run.as_ref().and_then(|r| r.mode))
            .unwrap_or(SolveMode::Example)
    }

    pub fn sample_step(&self) -> f64 {
        self.fluid
            .as_ref()
            .and_then(|f| f.sample_step)
            .unwrap_or(DEFAULT_SAMPLE_STEP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RAMP: &str = r#"{
        "environment": {
            "states": ["E1", "E2", "E3", "E4"],
            "rates": [[0,1,0,0],[0,0,1,0],[0,0,0,1],[0,0,0,0]],
            "holding": [
                {"type": "replay", "values": [0.5488]},
                {"type": "replay", "values": [1.0892]},
                {"type": "replay", "values": [1.8734]},
                null
            ],
            "lambda": [2.0, 4.0, 6.0, 6.0],
            "routing": [[0.5,0.5],[0.5,0.5],[0.5,0.5],[0.5,0.5]],
            "initial_state": 0
        },
        "network": {
            "k": 2,
            "mu": [2.0, 2.0],
            "beta": [0.1, 0.1],
            "departure_family": {"type": "exponential"}
        },
        "run": {"horizon": 3.0, "seed": 42, "mode": "example"}
    }"#;

    #[test]
    fn ramp_scenario_parses_and_converts() {
        let sc = Scenario::from_json_str(RAMP).unwrap();
        let env = sc.environment_spec().unwrap();
        assert_eq!(env.states.len(), 4);
        assert_eq!(env.station_rates(0), vec![1.0, 1.0]);
        assert_eq!(env.station_rates(2), vec![3.0, 3.0]);
        let net = sc.network_spec().unwrap();
        assert_eq!(net.k, 2);
        assert_eq!(sc.solve_mode(), SolveMode::Example);
        assert_eq!(sc.sample_step(), DEFAULT_SAMPLE_STEP);
        assert_eq!(sc.run_block().unwrap().seed, 42);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = RAMP.replacen("\"run\"", "\"rum\"", 1);
        let err = Scenario::from_json_str(&bad).unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn transition_forms_are_exclusive() {
        let both = RAMP.replacen(
            "\"rates\":",
            "\"transition\": [[0,1,0,0],[0,0,1,0],[0,0,0,1],[0,0,0,1]], \"rates\":",
            1,
        );
        let sc = Scenario::from_json_str(&both).unwrap();
        assert_eq!(sc.environment_spec().unwrap_err(), ScenarioError::TransitionAmbiguous);
    }

    #[test]
    fn reliability_only_scenario() {
        let text = r#"{
            "reliability": {
                "lambda": 4.0, "mu": 3.0, "k": 2, "alpha": 0.2, "p": 0.95,
                "g": {"type": "exponential", "rate": 2.0}
            }
        }"#;
        let sc = Scenario::from_json_str(text).unwrap();
        assert!(sc.reliability.is_some());
        assert!(matches!(
            sc.environment_spec().unwrap_err(),
            ScenarioError::MissingBlock("environment")
        ));
    }
}
