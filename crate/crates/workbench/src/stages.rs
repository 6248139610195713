//! The planning chain as separate stages, each with a file artifact.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use basinplan_core::engineering::{CapacityOutcome, ProjectVariant, SiteGeometry};
use basinplan_core::optimizer::PortfolioProblem;
use basinplan_core::pipeline::{self, SegmentFlows};

use crate::config::{BasinInputs, PlanningConfig};
use crate::error::WbError;

pub const SITES_FILE: &str = "sites.json";
pub const DESIGNS_FILE: &str = "designs.json";
pub const CANDIDATES_FILE: &str = "candidates.json";
pub const PROBLEM_FILE: &str = "problem.json";
pub const POOL_FILE: &str = "pool.json";
pub const METRICS_FILE: &str = "metrics.csv";

/// Inputs and flows shared by every stage.
pub struct Context {
    pub config: PlanningConfig,
    pub inputs: BasinInputs,
    pub flows: SegmentFlows,
}

impl Context {
    pub fn new(config: PlanningConfig) -> Result<Self, WbError> {
        let inputs = config.read_inputs()?;
        let flows = pipeline::segment_flows(&inputs.network, &inputs.gauge, &config.scenarios)?;
        Ok(Context { config, inputs, flows })
    }

    pub fn screen(&self) -> Result<Vec<SiteGeometry>, WbError> {
        Ok(pipeline::screen(&self.inputs.network, &self.flows, &self.config.screening)?)
    }

    pub fn design(&self, sites: &[SiteGeometry]) -> Result<Vec<CapacityOutcome>, WbError> {
        let c = &self.config;
        Ok(pipeline::design(sites, &self.flows, &self.inputs.impacts, &self.inputs.prices, &c.design, c.prices.energy_price)?)
    }

    pub fn filter(&self, outcomes: &[CapacityOutcome]) -> Result<Vec<ProjectVariant>, WbError> {
        Ok(pipeline::filter(outcomes, &self.config.filter)?)
    }

    pub fn assemble(&self, candidates: Vec<ProjectVariant>) -> Result<PortfolioProblem, WbError> {
        let c = &self.config;
        Ok(pipeline::assemble(&self.inputs.network, candidates, &self.flows, c.economics(), c.constraints.clone())?)
    }

    /// Screen, design, filter and assemble in one go.
    pub fn problem(&self) -> Result<PortfolioProblem, WbError> {
        let sites = self.screen()?;
        let outcomes = self.design(&sites)?;
        let candidates = self.filter(&outcomes)?;
        self.assemble(candidates)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), WbError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| WbError::format("json", e))?;
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), WbError> {
    std::fs::write(path, text).map_err(|e| WbError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, WbError> {
    let text = std::fs::read_to_string(path).map_err(|e| WbError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| WbError::format(&path.display().to_string(), e))
}
