//! The planning chain from raw basin data to a selection problem:
//! flows at every segment, screening, design, ex-ante filtering, conflicts
//! and assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::{RiverNetwork, SegmentId};
use crate::engineering::{
    design_sites, CapacityOutcome, DesignConfig, DesignInputs, EngineeringError, ProjectVariant, SiteGeometry, UnitPriceBook,
};
use crate::hydrology::{
    incremental_inflows, monthly_scenarios, q7_10, transfer_flow, DailySeries, HydrologyError, ScenarioSet, YearProbability,
};
use crate::metrics::ImpactTable;
use crate::optimizer::{build_problem, Constraints, Economics, Hydrology, OptimizerError, PortfolioProblem};
use crate::screening::{conflict_pairs, exante_filter, screen_sites, ScreeningCriteria, ScreeningError};
use crate::Real;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Hydrology(#[from] HydrologyError),
    #[error(transparent)]
    Screening(#[from] ScreeningError),
    #[error(transparent)]
    Engineering(#[from] EngineeringError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("invalid filter thresholds: {0}")]
    Filter(String),
}

/// Ex-ante thresholds; both inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterThresholds {
    /// USD per installed kW.
    pub max_unit_cost: Real,
    /// MW per km² flooded, riverbed included.
    pub min_power_density: Real,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        FilterThresholds { max_unit_cost: 4000.0, min_power_density: 4.0 }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.max_unit_cost > 0.0) || !(self.min_power_density >= 0.0) {
            return Err(PipelineError::Filter("unit cost must be positive and density non-negative".into()));
        }
        Ok(())
    }
}

/// Flow statistics of every segment, transferred from one gauge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFlows {
    /// Scenarios at the gauge; carries probabilities and month durations.
    pub reference: ScenarioSet,
    pub mean_flow: BTreeMap<SegmentId, Real>,
    /// 7Q10, m³/s.
    pub low_flow: BTreeMap<SegmentId, Real>,
    pub scenarios: BTreeMap<SegmentId, ScenarioSet>,
}

pub fn segment_flows(net: &RiverNetwork, gauge: &DailySeries, years: &[YearProbability]) -> Result<SegmentFlows, PipelineError> {
    let reference = monthly_scenarios(gauge, years)?;
    let mut out = SegmentFlows { reference, mean_flow: BTreeMap::new(), low_flow: BTreeMap::new(), scenarios: BTreeMap::new() };
    for s in net.segments() {
        let series = transfer_flow(gauge, s.drainage_area)?;
        out.mean_flow.insert(s.id.clone(), series.mean_flow());
        out.low_flow.insert(s.id.clone(), q7_10(&series)?);
        out.scenarios.insert(s.id.clone(), monthly_scenarios(&series, years)?);
    }
    Ok(out)
}

/// Screened sites with the 7Q10 filled in as ecological flow.
pub fn screen(net: &RiverNetwork, flows: &SegmentFlows, criteria: &ScreeningCriteria) -> Result<Vec<SiteGeometry>, PipelineError> {
    let mut sites = screen_sites(net, &flows.mean_flow, criteria)?;
    for s in &mut sites {
        s.ecological_flow = flows.low_flow.get(&s.segment_id).copied().unwrap_or(0.0);
    }
    Ok(sites)
}

pub fn design(
    sites: &[SiteGeometry],
    flows: &SegmentFlows,
    impacts: &ImpactTable,
    prices: &UnitPriceBook,
    config: &DesignConfig,
    energy_price: Real,
) -> Result<Vec<CapacityOutcome>, PipelineError> {
    let site_flows: BTreeMap<SegmentId, _> = flows.scenarios.iter().map(|(k, v)| (k.clone(), v.flows())).collect();
    let inputs = DesignInputs { scenarios: &flows.reference, prices, config, energy_price };
    Ok(design_sites(sites, &site_flows, impacts, inputs)?)
}

pub fn filter(outcomes: &[CapacityOutcome], t: &FilterThresholds) -> Result<Vec<ProjectVariant>, PipelineError> {
    t.validate()?;
    let designed: Vec<ProjectVariant> = outcomes.iter().filter_map(|o| o.variant().cloned()).collect();
    Ok(exante_filter(&designed, t.max_unit_cost, t.min_power_density))
}

/// Conflicts, incremental inflows and the selection problem for `variants`.
pub fn assemble(
    net: &RiverNetwork,
    variants: Vec<ProjectVariant>,
    flows: &SegmentFlows,
    economics: Economics,
    constraints: Constraints,
) -> Result<PortfolioProblem, PipelineError> {
    let conflicts = conflict_pairs(&variants, net)?;
    let inflows = incremental_inflows(net, &flows.scenarios)?;
    let hydrology = Hydrology { inflows, month_hours: flows.reference.month_durations, probabilities: flows.reference.probabilities() };
    Ok(build_problem(net.clone(), variants, conflicts, hydrology, economics, constraints)?)
}
