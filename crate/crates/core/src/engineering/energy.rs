//! Standalone run-of-river energy estimate.

use serde::{Deserialize, Serialize};

use super::{EngineeringError, ProjectVariant};
use crate::hydrology::{Monthly, ScenarioSet};
use crate::{Real, Scalar};

/// Annual energy of one scenario, kWh, before availability.
///
/// `flows` and `hours` are matched month by month; turbine flow is the
/// available flow net of the ecological release, capped at `max_flow`.
pub fn run_of_river_energy<T: Scalar>(production_factor: T, max_flow: T, release: T, flows: &[T], hours: &[T]) -> T {
    flows.iter().zip(hours).map(|(&a, &d)| d * production_factor * max_flow.min((a - release).max(T::zero()))).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    /// kWh/yr per scenario, availability applied.
    pub per_scenario: Vec<Real>,
    /// Probability-weighted, kWh/yr.
    pub expected: Real,
}

pub(crate) fn estimate(
    production_factor: Real,
    max_flow: Real,
    release: Real,
    scenarios: &ScenarioSet,
    flows: &[Monthly],
    availability: Real,
) -> Result<EnergyEstimate, EngineeringError> {
    if flows.len() != scenarios.scenarios.len() {
        return Err(EngineeringError::ScenarioMismatch { expected: scenarios.scenarios.len(), found: flows.len() });
    }
    let per_scenario: Vec<Real> = flows
        .iter()
        .map(|f| availability * run_of_river_energy(production_factor, max_flow, release, f, &scenarios.month_durations))
        .collect();
    let expected = per_scenario.iter().zip(&scenarios.scenarios).map(|(e, s)| e * s.probability).sum();
    Ok(EnergyEstimate { per_scenario, expected })
}

/// Energy of `variant` operated alone with no storage, given the natural flow
/// at its site for each scenario.
pub fn simulate_energy(
    variant: &ProjectVariant,
    scenarios: &ScenarioSet,
    flows: &[Monthly],
    availability: Real,
) -> Result<EnergyEstimate, EngineeringError> {
    estimate(variant.production_factor, variant.max_turbine_flow, variant.ecological_release, scenarios, flows, availability)
}
