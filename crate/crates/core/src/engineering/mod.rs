//! Parametric design of hydropower variants at candidate sites: reservoir
//! geometry, structure quantities, unit-price costing, annuity, energy and
//! installed-capacity selection.

mod capacity;
mod costing;
mod econ;
mod energy;
mod geometry;
pub mod prices;

pub use capacity::{design_sites, optimize_capacity, CapacityOutcome, DesignInputs};
pub use costing::{design_structures, CostBreakdown, CostLine, OverheadLine, StructureDesign, VariantSkeleton};
pub use econ::{annuity, capital_recovery_factor};
pub use energy::{run_of_river_energy, simulate_energy, EnergyEstimate};
pub use geometry::{production_factor, ReservoirWedge, GAMMA_WATER};
pub use prices::UnitPriceBook;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::SegmentId;
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineeringError {
    #[error("{0}")]
    Domain(String),
    #[error("incompatible design: {0}")]
    IncompatibleDesign(String),
    #[error("no unit price for {0:?}")]
    MissingPrice(String),
    #[error("invalid price entry {0}")]
    InvalidPrice(String),
    #[error("price file line {line}: {message}")]
    PriceFile { line: usize, message: String },
    #[error("{expected} scenarios configured but {found} inflow series supplied")]
    ScenarioMismatch { expected: usize, found: usize },
    #[error("no impact data for segment {0}")]
    MissingImpacts(SegmentId),
}

/// Where the powerhouse sits relative to the dam.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    DamToe,
    Diversion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    ConcreteGravity,
    Earthfill,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::DamToe, Scheme::Diversion];

    fn code(self) -> &'static str {
        match self {
            Scheme::DamToe => "DT",
            Scheme::Diversion => "DV",
        }
    }
}

impl Template {
    pub const ALL: [Template; 2] = [Template::ConcreteGravity, Template::Earthfill];

    fn code(self) -> &'static str {
        match self {
            Template::ConcreteGravity => "CG",
            Template::Earthfill => "EF",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::DamToe => "dam-toe",
            Scheme::Diversion => "diversion",
        })
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Template::ConcreteGravity => "concrete-gravity",
            Template::Earthfill => "earthfill",
        })
    }
}

/// Geometry and hydrology of a screened candidate site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteGeometry {
    pub segment_id: SegmentId,
    /// m
    pub river_width: Real,
    /// Valley side slope, horizontal per vertical.
    pub valley_side_slope: Real,
    /// Riverbed slope upstream of the dam, m/m.
    pub upstream_slope: Real,
    /// Candidate gross heads, m.
    pub available_heads: Vec<Real>,
    /// Ground elevation at the dam foot, m a.s.l.
    pub foot_elevation: Real,
    /// km²
    pub drainage_area: Real,
    /// Long-term mean natural flow, m³/s.
    pub mean_flow: Real,
    /// 7Q10 at the site, m³/s; released past diversion schemes.
    #[serde(default)]
    pub ecological_flow: Real,
}

impl SiteGeometry {
    pub fn validate(&self) -> Result<(), EngineeringError> {
        if !(self.river_width > 0.0) {
            return Err(EngineeringError::Domain(format!("site {}: river width must be positive", self.segment_id)));
        }
        if !(self.upstream_slope > 0.0) {
            return Err(EngineeringError::Domain(format!("site {}: slope must be positive", self.segment_id)));
        }
        if self.available_heads.iter().any(|h| !(*h > 0.0)) {
            return Err(EngineeringError::Domain(format!("site {}: heads must be positive", self.segment_id)));
        }
        Ok(())
    }
}

/// Reservoir extent for a given water depth at the dam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirGeometry {
    pub backwater_length_m: Real,
    pub flooded_area_km2: Real,
    pub volume_m3: Real,
}

/// Reservoir flooded by a pool `depth` metres deep at the dam, including the riverbed.
pub fn reservoir_geometry(site: &SiteGeometry, depth: Real) -> Result<ReservoirGeometry, EngineeringError> {
    if !(depth > 0.0) {
        return Err(EngineeringError::Domain(format!("reservoir depth {depth} must be positive")));
    }
    let w = ReservoirWedge::new(depth, site.upstream_slope, site.river_width, site.valley_side_slope)?;
    Ok(ReservoirGeometry { backwater_length_m: w.backwater_length, flooded_area_km2: w.area_km2(), volume_m3: w.volume })
}

/// Design rules and economic parameters shared by every variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignConfig {
    /// Turbine-generator efficiency.
    pub efficiency: Real,
    /// Fraction of time units are available.
    pub availability: Real,
    pub discount_rate: Real,
    pub life_years: u32,
    /// Dam crest above full pool, m.
    pub freeboard_m: Real,
    /// Highest head considered for dam-toe powerhouses (low-head turbines).
    pub dam_toe_max_head: Real,
    /// Lowest head considered for diversion schemes (high-head turbines).
    pub diversion_min_head: Real,
    /// Diversion dam pool depth as a fraction of gross head.
    pub diversion_dam_fraction: Real,
    pub diversion_min_dam_depth: Real,
    /// Installed-capacity grid step, kW.
    pub capacity_step_kw: Real,
    /// Dam-toe variants at or above this head get active storage.
    pub storage_min_head: Real,
    /// Share of the reservoir volume usable as active storage.
    pub active_storage_fraction: Real,
    /// Spillway design flood as a multiple of the mean flow.
    pub flood_factor: Real,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig {
            efficiency: 0.9,
            availability: 0.95,
            discount_rate: 0.10,
            life_years: 40,
            freeboard_m: 2.0,
            dam_toe_max_head: 60.0,
            diversion_min_head: 20.0,
            diversion_dam_fraction: 0.25,
            diversion_min_dam_depth: 5.0,
            capacity_step_kw: 1000.0,
            storage_min_head: 50.0,
            active_storage_fraction: 0.3,
            flood_factor: 5.0,
        }
    }
}

impl DesignConfig {
    pub fn validate(&self) -> Result<(), EngineeringError> {
        let bad = |m: &str| Err(EngineeringError::Domain(m.to_string()));
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return bad("efficiency must be in (0, 1]");
        }
        if !(self.availability > 0.0 && self.availability <= 1.0) {
            return bad("availability must be in (0, 1]");
        }
        if !(self.discount_rate > 0.0) || self.life_years < 1 {
            return bad("discount rate must be positive and life at least one year");
        }
        if !(self.capacity_step_kw > 0.0) {
            return bad("capacity step must be positive");
        }
        if !(0.0..=1.0).contains(&self.diversion_dam_fraction) || !(0.0..=1.0).contains(&self.active_storage_fraction) {
            return bad("fractions must be in [0, 1]");
        }
        Ok(())
    }

    /// Pool depth at the dam for a scheme and gross head.
    pub fn dam_depth(&self, scheme: Scheme, head: Real) -> Real {
        match scheme {
            Scheme::DamToe => head,
            Scheme::Diversion => (self.diversion_dam_fraction * head).max(self.diversion_min_dam_depth).min(head),
        }
    }

    /// Head-range check standing in for turbine-type selection.
    pub fn check_scheme(&self, scheme: Scheme, head: Real) -> Result<(), EngineeringError> {
        match scheme {
            Scheme::DamToe if head > self.dam_toe_max_head => {
                Err(EngineeringError::IncompatibleDesign(format!("dam-toe scheme limited to {} m head, got {head}", self.dam_toe_max_head)))
            }
            Scheme::Diversion if head < self.diversion_min_head => Err(EngineeringError::IncompatibleDesign(format!(
                "diversion scheme needs at least {} m head, got {head}",
                self.diversion_min_head
            ))),
            _ => Ok(()),
        }
    }
}

/// One engineered candidate project.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectVariant {
    pub id: String,
    pub segment_id: SegmentId,
    pub scheme: Scheme,
    pub template: Template,
    /// Gross head, m.
    pub gross_head: Real,
    /// Water depth at the dam, m.
    pub dam_depth: Real,
    /// Ground elevation at the dam foot, m a.s.l.
    pub foot_elevation: Real,
    /// kW per m³/s.
    pub production_factor: Real,
    /// kW
    pub installed_capacity: Real,
    /// m³/s
    pub max_turbine_flow: Real,
    /// m³
    pub max_active_storage: Real,
    /// km², riverbed included.
    pub flooded_area: Real,
    /// USD
    pub capex: Real,
    pub breakdown: CostBreakdown,
    /// USD/yr
    pub annuity: Real,
    /// Standalone run-of-river energy per scenario, kWh/yr.
    pub annual_energy: Vec<Real>,
    /// Probability-weighted annual energy, kWh/yr.
    pub expected_energy: Real,
    /// m³/s bypassing the turbines (diversion schemes).
    pub ecological_release: Real,
    /// Fish passage keeps the river connected.
    #[serde(default)]
    pub passable: bool,
    /// Contribution to each impact metric.
    #[serde(default)]
    pub impacts: BTreeMap<String, Real>,
}

impl ProjectVariant {
    pub fn unit_cost(&self) -> Real {
        if self.installed_capacity > 0.0 {
            self.capex / self.installed_capacity
        } else {
            Real::INFINITY
        }
    }

    pub fn installed_mw(&self) -> Real {
        self.installed_capacity / 1000.0
    }
}

pub(crate) fn variant_id(segment: &SegmentId, scheme: Scheme, template: Template, head: Real) -> String {
    let head = if head.fract() == 0.0 { format!("{head:.0}") } else { format!("{head:.1}") };
    format!("{segment}-{}-{}-H{head}", scheme.code(), template.code())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_depths() {
        assert_eq!(variant_id(&"S003".into(), Scheme::DamToe, Template::ConcreteGravity, 30.0), "S003-DT-CG-H30");
        assert_eq!(variant_id(&"S1".into(), Scheme::Diversion, Template::Earthfill, 12.5), "S1-DV-EF-H12.5");
        let cfg = DesignConfig::default();
        assert_eq!(cfg.dam_depth(Scheme::DamToe, 30.0), 30.0);
        assert_eq!(cfg.dam_depth(Scheme::Diversion, 40.0), 10.0);
        assert_eq!(cfg.dam_depth(Scheme::Diversion, 4.0), 4.0);
        assert!(cfg.check_scheme(Scheme::Diversion, 10.0).is_err());
        assert!(cfg.check_scheme(Scheme::DamToe, 80.0).is_err());
        assert!(cfg.check_scheme(Scheme::DamToe, 30.0).is_ok());
    }

    #[test]
    fn reservoir_geometry_from_site() {
        let site = SiteGeometry {
            segment_id: "S".into(),
            river_width: 50.0,
            valley_side_slope: 2.0,
            upstream_slope: 0.01,
            available_heads: vec![10.0],
            foot_elevation: 0.0,
            drainage_area: 1.0,
            mean_flow: 1.0,
            ecological_flow: 0.0,
        };
        let g = reservoir_geometry(&site, 10.0).unwrap();
        assert!((g.backwater_length_m - 1000.0).abs() < 1e-9);
        assert!((g.flooded_area_km2 - 0.07).abs() < 1e-12);
        assert!(reservoir_geometry(&site, 0.0).is_err());
        let flat = SiteGeometry { upstream_slope: 0.0, ..site };
        assert!(reservoir_geometry(&flat, 10.0).is_err());
    }
}
