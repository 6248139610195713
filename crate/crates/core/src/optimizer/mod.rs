//! Portfolio selection: the mixed-integer program over project variants,
//! its dispatch subproblem, branch-and-bound, a brute-force oracle and an
//! independent feasibility auditor.

mod audit;
mod bnb;
mod brute;
mod dispatch;
mod export;
pub mod random;
mod relax;
mod topology;
mod whatif;

pub use audit::{audit, AuditReport};
pub use bnb::{solve, Progress, SolutionPool, SolveOptions, SolveStatus};
pub use brute::{brute_force, BRUTE_FORCE_MAX};
pub use dispatch::{
    evaluate, is_feasible, lp_dispatch, Alternative, Dispatch, DispatchMode, ProjectDispatch, SatisfactionValues, ScenarioDispatch,
};
pub use export::{metric_table, metric_table_csv, MetricRow};
pub use whatif::{apply_overrides, what_if, Overrides, WhatIfOutcome};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::{BasinError, RiverNetwork};
use crate::engineering::ProjectVariant;
use crate::hydrology::{check_probabilities, HydrologyError, IncrementalInflows, Monthly};
use crate::lp::LpError;
use crate::metrics::{BoundKind, MetricDef, MetricsError, Orientation, SatisfactionConfig, FREE_FLOWING_KM};
use crate::screening::{ConflictPair, ConflictReason};
use crate::Real;

/// Relative tolerance for constraint checks on fixed selections.
pub const CHECK_TOL: Real = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("duplicate variant id {0}")]
    DuplicateVariant(String),
    #[error("unknown variant {0}")]
    UnknownVariant(String),
    #[error("{expected} scenario probabilities but {found} inflow scenarios")]
    ScenarioMismatch { expected: usize, found: usize },
    #[error("minimum free-flowing length {requested} km exceeds the baseline {baseline} km")]
    FreeFlowingAboveBaseline { requested: Real, baseline: Real },
    #[error("variant {0} is both forced and forbidden")]
    ForceForbid(String),
    #[error("forced variants {0} and {1} conflict")]
    ForcedConflict(String, String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("brute force limited to {max} variants, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("selection is infeasible: {0}")]
    InfeasibleSelection(String),
    #[error("numerical trouble: {0}")]
    Numerical(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Basin(#[from] BasinError),
    #[error(transparent)]
    Hydrology(#[from] HydrologyError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Inflow data the dispatch works on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hydrology {
    pub inflows: IncrementalInflows,
    /// d_t, hours.
    pub month_hours: Monthly,
    /// p_s, in `inflows.labels` order.
    pub probabilities: Vec<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Economics {
    /// π₁, USD/kWh.
    pub energy_price: Real,
    /// π₂, USD/kW/yr.
    pub capacity_price: Real,
    pub availability: Real,
}

impl Default for Economics {
    fn default() -> Self {
        Economics { energy_price: 0.0, capacity_price: 0.0, availability: 0.95 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constraints {
    pub metrics: Vec<MetricDef>,
    /// L, km.
    pub min_free_flowing: Option<Real>,
    pub satisfaction: Option<SatisfactionConfig>,
    pub forced: BTreeSet<String>,
    pub forbidden: BTreeSet<String>,
}

/// The assembled selection problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioProblem {
    pub network: RiverNetwork,
    pub variants: Vec<ProjectVariant>,
    pub conflicts: BTreeSet<ConflictPair>,
    pub hydrology: Hydrology,
    pub economics: Economics,
    pub constraints: Constraints,
}

/// Validates inputs and assembles the problem. Missing same-site conflicts
/// are added.
pub fn build_problem(
    network: RiverNetwork,
    variants: Vec<ProjectVariant>,
    conflicts: BTreeSet<ConflictPair>,
    hydrology: Hydrology,
    economics: Economics,
    constraints: Constraints,
) -> Result<PortfolioProblem, OptimizerError> {
    let mut p = PortfolioProblem { network, variants, conflicts, hydrology, economics, constraints };
    let mut by_segment: BTreeMap<_, Vec<&str>> = BTreeMap::new();
    for v in &p.variants {
        by_segment.entry(v.segment_id.clone()).or_default().push(&v.id);
    }
    let mut extra = Vec::new();
    for ids in by_segment.values() {
        for (a, ia) in ids.iter().enumerate() {
            for ib in &ids[a + 1..] {
                extra.push(ConflictPair::new(ia, ib, ConflictReason::SameSite));
            }
        }
    }
    for c in extra {
        if !p.conflicts.iter().any(|e| e.i == c.i && e.k == c.k) {
            p.conflicts.insert(c);
        }
    }
    p.validate()?;
    Ok(p)
}

impl PortfolioProblem {
    pub fn variant_index(&self, id: &str) -> Result<usize, OptimizerError> {
        self.variants.iter().position(|v| v.id == id).ok_or_else(|| OptimizerError::UnknownVariant(id.into()))
    }

    pub fn scenario_count(&self) -> usize {
        self.hydrology.probabilities.len()
    }

    /// Effective L: the larger of the explicit minimum and any free-flowing
    /// metric lower bound.
    pub fn effective_min_free_flowing(&self) -> Real {
        let from_metrics = self
            .constraints
            .metrics
            .iter()
            .filter(|d| d.id == FREE_FLOWING_KM && d.bound_kind == BoundKind::Min)
            .filter_map(|d| d.bound)
            .fold(0.0, Real::max);
        self.constraints.min_free_flowing.unwrap_or(0.0).max(from_metrics)
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let mut ids = BTreeSet::new();
        for v in &self.variants {
            if !ids.insert(v.id.as_str()) {
                return Err(OptimizerError::DuplicateVariant(v.id.clone()));
            }
            self.network.index_of(&v.segment_id)?;
            let vals = [v.annuity, v.production_factor, v.installed_capacity, v.max_turbine_flow, v.max_active_storage];
            if vals.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || !(v.ecological_release >= 0.0) {
                return Err(OptimizerError::InvalidConstraint(format!("variant {} has negative or non-finite data", v.id)));
            }
        }
        for c in &self.conflicts {
            for id in [&c.i, &c.k] {
                if !ids.contains(id.as_str()) {
                    return Err(OptimizerError::UnknownVariant(id.clone()));
                }
            }
            if c.i == c.k {
                return Err(OptimizerError::InvalidConstraint(format!("variant {} conflicts with itself", c.i)));
            }
        }

        let h = &self.hydrology;
        if h.inflows.labels.len() != h.probabilities.len() {
            return Err(OptimizerError::ScenarioMismatch { expected: h.probabilities.len(), found: h.inflows.labels.len() });
        }
        check_probabilities(h.probabilities.iter().copied())?;
        if h.month_hours.iter().any(|d| !(*d > 0.0)) {
            return Err(OptimizerError::InvalidConstraint("month durations must be positive".into()));
        }
        for s in self.network.segments() {
            let rows = h.inflows.get(&s.id).ok_or_else(|| HydrologyError::MissingSegment(s.id.clone()))?;
            if rows.len() != h.probabilities.len() {
                return Err(OptimizerError::ScenarioMismatch { expected: h.probabilities.len(), found: rows.len() });
            }
            if rows.iter().flatten().any(|q| !(*q >= 0.0 && q.is_finite())) {
                return Err(OptimizerError::InvalidConstraint(format!("negative inflow at segment {}", s.id)));
            }
        }

        let e = &self.economics;
        if !(e.energy_price >= 0.0 && e.capacity_price >= 0.0 && e.energy_price.is_finite() && e.capacity_price.is_finite()) {
            return Err(OptimizerError::InvalidConstraint("prices must be non-negative".into()));
        }
        if !(e.availability > 0.0 && e.availability <= 1.0) {
            return Err(OptimizerError::InvalidConstraint("availability must be in (0, 1]".into()));
        }

        let c = &self.constraints;
        for d in &c.metrics {
            d.validate()?;
            if d.id == FREE_FLOWING_KM && d.bound_kind == BoundKind::Max && d.bound.is_some() {
                return Err(OptimizerError::InvalidConstraint("free-flowing length only takes a minimum bound".into()));
            }
            if d.id == FREE_FLOWING_KM && d.orientation() == Orientation::Impact {
                return Err(OptimizerError::InvalidConstraint("free-flowing length is a benefit metric".into()));
            }
        }
        if let Some(l) = c.min_free_flowing {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(OptimizerError::InvalidConstraint("minimum free-flowing length must be non-negative".into()));
            }
        }
        let baseline = self.network.baseline_free_flowing_length();
        let l = self.effective_min_free_flowing();
        if l > baseline * (1.0 + CHECK_TOL) {
            return Err(OptimizerError::FreeFlowingAboveBaseline { requested: l, baseline });
        }
        if let Some(s) = &c.satisfaction {
            s.validate(&c.metrics)?;
        }
        for id in c.forced.iter().chain(&c.forbidden) {
            if !ids.contains(id.as_str()) {
                return Err(OptimizerError::UnknownVariant(id.clone()));
            }
        }
        if let Some(id) = c.forced.intersection(&c.forbidden).next() {
            return Err(OptimizerError::ForceForbid(id.clone()));
        }
        for p in &self.conflicts {
            if c.forced.contains(&p.i) && c.forced.contains(&p.k) {
                return Err(OptimizerError::ForcedConflict(p.i.clone(), p.k.clone()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, OptimizerError> {
        let p: PortfolioProblem =
            serde_json::from_str(text).map_err(|e| OptimizerError::InvalidConstraint(format!("problem document: {e}")))?;
        p.validate()?;
        Ok(p)
    }
}
