//! Re-solving under modified prices and constraints.

use serde::{Deserialize, Serialize};

use super::bnb::{solve, SolutionPool, SolveOptions};
use super::{OptimizerError, PortfolioProblem};
use crate::metrics::{MetricDef, SatisfactionConfig};
use crate::Real;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub energy_price: Option<Real>,
    pub capacity_price: Option<Real>,
    pub min_free_flowing: Option<Real>,
    /// Replaces the definition with the same id, or adds it.
    pub metrics: Vec<MetricDef>,
    pub force: Vec<String>,
    pub forbid: Vec<String>,
    pub satisfaction: Option<SatisfactionConfig>,
}

/// Copy of `base` with `o` applied. A later force or forbid replaces an
/// earlier one on the same variant.
pub fn apply_overrides(base: &PortfolioProblem, o: &Overrides) -> Result<PortfolioProblem, OptimizerError> {
    let mut p = base.clone();
    if let Some(v) = o.energy_price {
        p.economics.energy_price = v;
    }
    if let Some(v) = o.capacity_price {
        p.economics.capacity_price = v;
    }
    if let Some(v) = o.min_free_flowing {
        p.constraints.min_free_flowing = Some(v);
    }
    for d in &o.metrics {
        match p.constraints.metrics.iter_mut().find(|e| e.id == d.id) {
            Some(e) => *e = d.clone(),
            None => p.constraints.metrics.push(d.clone()),
        }
    }
    for id in &o.force {
        p.variant_index(id)?;
        p.constraints.forbidden.remove(id);
        p.constraints.forced.insert(id.clone());
    }
    for id in &o.forbid {
        p.variant_index(id)?;
        if o.force.contains(id) {
            return Err(OptimizerError::ForceForbid(id.clone()));
        }
        p.constraints.forced.remove(id);
        p.constraints.forbidden.insert(id.clone());
    }
    if let Some(s) = &o.satisfaction {
        p.constraints.satisfaction = Some(s.clone());
    }
    p.validate()?;
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIfOutcome {
    pub pool: SolutionPool,
    /// New incumbent net benefit minus the baseline's, USD/yr.
    pub revenue_delta: Option<Real>,
}

pub fn what_if(
    base: &PortfolioProblem,
    baseline_objective: Option<Real>,
    o: &Overrides,
    options: &SolveOptions,
) -> Result<WhatIfOutcome, OptimizerError> {
    let p = apply_overrides(base, o)?;
    let pool = solve(&p, options, None)?;
    let revenue_delta = match (pool.incumbent(), baseline_objective) {
        (Some(a), Some(b)) => Some(a.objective - b),
        _ => None,
    };
    Ok(WhatIfOutcome { pool, revenue_delta })
}
