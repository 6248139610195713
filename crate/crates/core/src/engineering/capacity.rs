//! Installed-capacity selection by marginal analysis, and the batch designer.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::costing::{design_structures, VariantSkeleton};
use super::energy::estimate;
use super::{
    annuity, production_factor, reservoir_geometry, variant_id, DesignConfig, EngineeringError, ProjectVariant, Scheme, SiteGeometry,
    Template, UnitPriceBook,
};
use crate::basin::SegmentId;
use crate::hydrology::{Monthly, ScenarioSet};
use crate::metrics::{self, ImpactDensities, ImpactTable};
use crate::Real;

/// Upper bound on capacity grid steps walked per variant.
const MAX_STEPS: usize = 100_000;

/// Shared inputs of a design batch.
#[derive(Clone, Copy, Debug)]
pub struct DesignInputs<'a> {
    pub scenarios: &'a ScenarioSet,
    pub prices: &'a UnitPriceBook,
    pub config: &'a DesignConfig,
    /// USD/kWh
    pub energy_price: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum CapacityOutcome {
    Designed(Box<ProjectVariant>),
    Uneconomic { id: String, segment_id: SegmentId, reason: String },
}

impl CapacityOutcome {
    pub fn id(&self) -> &str {
        match self {
            CapacityOutcome::Designed(v) => &v.id,
            CapacityOutcome::Uneconomic { id, .. } => id,
        }
    }

    pub fn variant(&self) -> Option<&ProjectVariant> {
        match self {
            CapacityOutcome::Designed(v) => Some(v),
            CapacityOutcome::Uneconomic { .. } => None,
        }
    }
}

/// Walks the capacity grid upward while the value of the extra energy covers
/// the extra annuity, then checks the whole project pays for itself.
///
/// `flows` holds the natural flow at the site, one row per scenario.
pub fn optimize_capacity(
    site: &SiteGeometry,
    flows: &[Monthly],
    densities: &ImpactDensities,
    scheme: Scheme,
    template: Template,
    head: Real,
    inputs: DesignInputs<'_>,
) -> Result<CapacityOutcome, EngineeringError> {
    let cfg = inputs.config;
    cfg.check_scheme(scheme, head)?;
    if flows.len() != inputs.scenarios.scenarios.len() {
        return Err(EngineeringError::ScenarioMismatch { expected: inputs.scenarios.scenarios.len(), found: flows.len() });
    }
    if !(inputs.energy_price >= 0.0) {
        return Err(EngineeringError::Domain("energy price must be non-negative".into()));
    }
    let id = variant_id(&site.segment_id, scheme, template, head);
    let uneconomic = |reason: String| Ok(CapacityOutcome::Uneconomic { id: id.clone(), segment_id: site.segment_id.clone(), reason });

    let depth = cfg.dam_depth(scheme, head);
    let reservoir = reservoir_geometry(site, depth)?;
    let rho = production_factor(head, cfg.efficiency)?;
    let release = if scheme == Scheme::Diversion { site.ecological_flow } else { 0.0 };
    let peak = flows.iter().flatten().fold(0.0, |m: Real, q| m.max(q - release));
    if !(peak > 0.0) {
        return uneconomic("no flow left for the turbines".into());
    }
    let steps = ((peak * rho / cfg.capacity_step_kw).ceil() as usize).clamp(1, MAX_STEPS);
    let social = metrics::contributions(densities, reservoir.flooded_area_km2, 0.0);

    let eval = |k: usize| -> Result<Candidate, EngineeringError> {
        let capacity = k as Real * cfg.capacity_step_kw;
        let max_flow = capacity / rho;
        let skeleton = VariantSkeleton {
            scheme,
            template,
            gross_head: head,
            dam_depth: depth,
            installed_capacity: capacity,
            max_turbine_flow: max_flow,
            households: social[metrics::HOUSEHOLDS],
            road_m: social[metrics::ROAD_M],
            railway_m: social[metrics::RAILWAY_M],
        };
        let design = design_structures(&skeleton, site, inputs.prices, cfg)?;
        let annual = annuity(design.capex(), cfg.discount_rate, cfg.life_years)?;
        let energy = estimate(rho, max_flow, release, inputs.scenarios, flows, cfg.availability)?;
        Ok(Candidate { capacity, max_flow, value: inputs.energy_price * energy.expected, annual, energy, design })
    };

    let mut best = eval(1)?;
    for k in 2..=steps {
        let next = eval(k)?;
        // ties go to the larger capacity
        if next.value - best.value >= next.annual - best.annual {
            best = next;
        } else {
            break;
        }
    }
    if !(best.energy.expected > 0.0) || best.value < best.annual {
        return uneconomic(format!(
            "energy value {:.0} USD/yr below annuity {:.0} USD/yr at {:.0} kW",
            best.value, best.annual, best.capacity
        ));
    }

    let storage =
        if scheme == Scheme::DamToe && head >= cfg.storage_min_head { cfg.active_storage_fraction * reservoir.volume_m3 } else { 0.0 };
    let impacts = metrics::contributions(densities, reservoir.flooded_area_km2, best.capacity / 1000.0);
    Ok(CapacityOutcome::Designed(Box::new(ProjectVariant {
        id,
        segment_id: site.segment_id.clone(),
        scheme,
        template,
        gross_head: head,
        dam_depth: depth,
        foot_elevation: site.foot_elevation,
        production_factor: rho,
        installed_capacity: best.capacity,
        max_turbine_flow: best.max_flow,
        max_active_storage: storage,
        flooded_area: reservoir.flooded_area_km2,
        capex: best.design.capex(),
        breakdown: best.design.breakdown,
        annuity: best.annual,
        annual_energy: best.energy.per_scenario,
        expected_energy: best.energy.expected,
        ecological_release: release,
        passable: false,
        impacts,
    })))
}

struct Candidate {
    capacity: Real,
    max_flow: Real,
    value: Real,
    annual: Real,
    energy: super::EnergyEstimate,
    design: super::StructureDesign,
}

/// Designs every compatible (head, scheme, template) combination at every
/// site. Output is ordered by variant id.
pub fn design_sites(
    sites: &[SiteGeometry],
    site_flows: &BTreeMap<SegmentId, Vec<Monthly>>,
    impacts: &ImpactTable,
    inputs: DesignInputs<'_>,
) -> Result<Vec<CapacityOutcome>, EngineeringError> {
    inputs.config.validate()?;
    inputs.prices.validate()?;
    let mut jobs = Vec::new();
    for site in sites {
        site.validate()?;
        let flows =
            site_flows.get(&site.segment_id).ok_or_else(|| EngineeringError::Domain(format!("no flows for site {}", site.segment_id)))?;
        let dens = impacts.get(&site.segment_id).map_err(|_| EngineeringError::MissingImpacts(site.segment_id.clone()))?;
        for &head in &site.available_heads {
            for scheme in Scheme::ALL {
                if inputs.config.check_scheme(scheme, head).is_err() {
                    continue;
                }
                for template in Template::ALL {
                    jobs.push((site, flows.as_slice(), dens, scheme, template, head));
                }
            }
        }
    }
    let mut out = jobs
        .into_par_iter()
        .map(|(site, flows, dens, scheme, template, head)| optimize_capacity(site, flows, dens, scheme, template, head, inputs))
        .collect::<Result<Vec<_>, _>>()?;
    out.sort_by(|a, b| a.id().cmp(b.id()));
    Ok(out)
}
