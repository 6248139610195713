//! Impact contributions of single projects, whole-alternative metrics and
//! satisfaction functions.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::{free_flowing_length, BasinError, Dam, RiverNetwork, SegmentId};
use crate::engineering::ProjectVariant;
use crate::screening::ConflictPair;
use crate::{Real, Scalar};

pub const HOUSEHOLDS: &str = "households";
pub const ROAD_M: &str = "road_m";
pub const RAILWAY_M: &str = "railway_m";
pub const PROTECTED_KM2: &str = "protected_km2";
pub const BIOMASS_MG: &str = "biomass_Mg";
pub const FLOODED_KM2: &str = "flooded_km2";
pub const INSTALLED_MW: &str = "installed_mw";
/// Connectivity metric; not additive over projects.
pub const FREE_FLOWING_KM: &str = "free_flowing_km";

/// Metrics a single project contributes to.
pub const CUMULATIVE: [&str; 7] = [HOUSEHOLDS, ROAD_M, RAILWAY_M, PROTECTED_KM2, BIOMASS_MG, FLOODED_KM2, INSTALLED_MW];

pub fn is_known_metric(id: &str) -> bool {
    id == FREE_FLOWING_KM || CUMULATIVE.contains(&id)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no impact data for segment {0}")]
    MissingSegment(SegmentId),
    #[error("impact table: {0}")]
    Table(String),
    #[error("invalid metric definition {id}: {message}")]
    InvalidDef { id: String, message: String },
    #[error("satisfaction needs at least one value")]
    EmptySatisfaction,
    #[error("selection contains conflicting variants {0} and {1}")]
    ConflictingSelection(String, String),
    #[error(transparent)]
    Basin(#[from] BasinError),
}

/// Impact densities over the floodable corridor of one segment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpactDensities {
    pub segment_id: SegmentId,
    pub households_per_km2: Real,
    pub road_m_per_km2: Real,
    pub railway_m_per_km2: Real,
    pub protected_fraction: Real,
    #[serde(rename = "biomass_Mg_per_ha")]
    pub biomass_mg_per_ha: Real,
}

impl ImpactDensities {
    fn validate(&self) -> Result<(), MetricsError> {
        let vals = [self.households_per_km2, self.road_m_per_km2, self.railway_m_per_km2, self.biomass_mg_per_ha];
        if vals.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(MetricsError::Table(format!("segment {}: densities must be non-negative", self.segment_id)));
        }
        if !(0.0..=1.0).contains(&self.protected_fraction) {
            return Err(MetricsError::Table(format!("segment {}: protected_fraction outside [0, 1]", self.segment_id)));
        }
        Ok(())
    }
}

/// Per-segment impact layer.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ImpactDensities>", into = "Vec<ImpactDensities>")]
pub struct ImpactTable {
    rows: BTreeMap<SegmentId, ImpactDensities>,
}

impl TryFrom<Vec<ImpactDensities>> for ImpactTable {
    type Error = MetricsError;

    fn try_from(rows: Vec<ImpactDensities>) -> Result<Self, MetricsError> {
        let mut map = BTreeMap::new();
        for r in rows {
            r.validate()?;
            if map.contains_key(&r.segment_id) {
                return Err(MetricsError::Table(format!("duplicate segment {}", r.segment_id)));
            }
            map.insert(r.segment_id.clone(), r);
        }
        Ok(ImpactTable { rows: map })
    }
}

impl From<ImpactTable> for Vec<ImpactDensities> {
    fn from(t: ImpactTable) -> Self {
        t.rows.into_values().collect()
    }
}

impl ImpactTable {
    pub fn get(&self, id: &SegmentId) -> Result<&ImpactDensities, MetricsError> {
        self.rows.get(id).ok_or_else(|| MetricsError::MissingSegment(id.clone()))
    }

    pub fn rows(&self) -> impl Iterator<Item = &ImpactDensities> {
        self.rows.values()
    }

    pub fn parse_csv(text: &str) -> Result<Self, MetricsError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
        let rows = rdr.deserialize().collect::<Result<Vec<ImpactDensities>, _>>().map_err(|e| MetricsError::Table(e.to_string()))?;
        rows.try_into()
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in self.rows.values() {
            w.serialize(r).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8")
    }
}

/// Contributions of a reservoir flooding `flooded_area` km² with `densities`.
pub fn contributions(d: &ImpactDensities, flooded_area: Real, installed_mw: Real) -> BTreeMap<String, Real> {
    [
        (HOUSEHOLDS, d.households_per_km2 * flooded_area),
        (ROAD_M, d.road_m_per_km2 * flooded_area),
        (RAILWAY_M, d.railway_m_per_km2 * flooded_area),
        (PROTECTED_KM2, d.protected_fraction * flooded_area),
        // 100 ha per km²
        (BIOMASS_MG, d.biomass_mg_per_ha * flooded_area * 100.0),
        (FLOODED_KM2, flooded_area),
        (INSTALLED_MW, installed_mw),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// The m_{i,j} of one variant.
pub fn project_metrics(variant: &ProjectVariant, impacts: &ImpactTable) -> Result<BTreeMap<String, Real>, MetricsError> {
    let d = impacts.get(&variant.segment_id)?;
    Ok(contributions(d, variant.flooded_area, variant.installed_mw()))
}

/// Metrics of a whole selection. Cumulative metrics add up the variants'
/// stored contributions; free-flowing length comes from the fragmentation of
/// the selected dams.
pub fn alternative_metrics(
    selection: &[&ProjectVariant],
    net: &RiverNetwork,
    conflicts: &BTreeSet<ConflictPair>,
) -> Result<BTreeMap<String, Real>, MetricsError> {
    let ids: BTreeSet<&str> = selection.iter().map(|v| v.id.as_str()).collect();
    for c in conflicts {
        if ids.contains(c.i.as_str()) && ids.contains(c.k.as_str()) {
            return Err(MetricsError::ConflictingSelection(c.i.clone(), c.k.clone()));
        }
    }
    // co-located variants conflict even without an explicit pair
    let mut seen = BTreeMap::new();
    for v in selection {
        if let Some(prev) = seen.insert(&v.segment_id, &v.id) {
            return Err(MetricsError::ConflictingSelection(prev.clone(), v.id.clone()));
        }
    }
    let mut out: BTreeMap<String, Real> = CUMULATIVE.iter().map(|k| (k.to_string(), 0.0)).collect();
    for v in selection {
        for (k, val) in &v.impacts {
            *out.entry(k.clone()).or_insert(0.0) += val;
        }
    }
    let dams: Vec<Dam> = selection.iter().map(|v| Dam::new(v.segment_id.clone(), v.passable)).collect();
    out.insert(FREE_FLOWING_KM.to_string(), free_flowing_length(net, &dams)?);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Max,
    Min,
}

/// Whether more of a metric is better (benefit) or worse (impact).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Benefit,
    Impact,
}

/// A metric constraint and optional satisfaction anchors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDef {
    pub id: String,
    #[serde(default = "default_true")]
    pub cumulative: bool,
    pub bound_kind: BoundKind,
    /// Hard bound; `None` leaves only the satisfaction anchors.
    #[serde(default)]
    pub bound: Option<Real>,
    /// (M_j, M̄_j)
    #[serde(default)]
    pub satisfaction_bounds: Option<(Real, Real)>,
    #[serde(default)]
    pub orientation: Option<Orientation>,
}

fn default_true() -> bool {
    true
}

impl MetricDef {
    pub fn max(id: &str, bound: Real) -> Self {
        MetricDef {
            id: id.into(),
            cumulative: id != FREE_FLOWING_KM,
            bound_kind: BoundKind::Max,
            bound: Some(bound),
            satisfaction_bounds: None,
            orientation: None,
        }
    }

    pub fn min(id: &str, bound: Real) -> Self {
        MetricDef { bound_kind: BoundKind::Min, ..MetricDef::max(id, bound) }
    }

    /// Explicit orientation, else benefit for connectivity and capacity metrics.
    pub fn orientation(&self) -> Orientation {
        self.orientation.unwrap_or(if self.id == FREE_FLOWING_KM || self.id == INSTALLED_MW {
            Orientation::Benefit
        } else {
            Orientation::Impact
        })
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |m: &str| Err(MetricsError::InvalidDef { id: self.id.clone(), message: m.into() });
        if !is_known_metric(&self.id) {
            return bad("unknown metric id");
        }
        if self.cumulative == (self.id == FREE_FLOWING_KM) {
            return bad("free_flowing_km is the only non-cumulative metric");
        }
        if let Some(b) = self.bound {
            if !b.is_finite() {
                return bad("bound must be finite");
            }
        }
        if let Some((lo, hi)) = self.satisfaction_bounds {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return bad("satisfaction bounds need M < M̄");
            }
        }
        Ok(())
    }

    /// Satisfaction of `value`, with impact metrics mirrored inside the anchors.
    pub fn satisfaction_of(&self, value: Real) -> Option<Real> {
        let (lo, hi) = self.satisfaction_bounds?;
        let v = match self.orientation() {
            Orientation::Benefit => value,
            Orientation::Impact => hi + lo - value,
        };
        Some(satisfaction(v, lo, hi))
    }

    /// Whether `value` meets the hard bound.
    pub fn satisfied_by(&self, value: Real, tol: Real) -> bool {
        match (self.bound, self.bound_kind) {
            (None, _) => true,
            (Some(b), BoundKind::Max) => value <= b + tol * b.abs().max(1.0),
            (Some(b), BoundKind::Min) => value >= b - tol * b.abs().max(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatisfactionConfig {
    pub lambda: Real,
    pub s_star: Real,
    /// Metric ids whose definitions carry satisfaction bounds.
    pub metrics: Vec<String>,
}

impl SatisfactionConfig {
    pub fn validate(&self, defs: &[MetricDef]) -> Result<(), MetricsError> {
        let bad = |m: String| Err(MetricsError::InvalidDef { id: "satisfaction".into(), message: m });
        if !(0.0..=1.0).contains(&self.lambda) || !(0.0..=1.0).contains(&self.s_star) {
            return bad("lambda and s_star must lie in [0, 1]".into());
        }
        if self.metrics.is_empty() {
            return Err(MetricsError::EmptySatisfaction);
        }
        for id in &self.metrics {
            if !defs.iter().any(|d| &d.id == id && d.satisfaction_bounds.is_some()) {
                return bad(format!("metric {id} has no satisfaction bounds"));
            }
        }
        Ok(())
    }
}

/// Piecewise-linear satisfaction: 0 at `lo`, 1 at `hi`, clamped outside.
pub fn satisfaction<T: Scalar>(value: T, lo: T, hi: T) -> T {
    ((value - lo) / (hi - lo)).max(T::zero()).min(T::one())
}

/// λ·mean + (1 − λ)·min.
pub fn combined_satisfaction<T: Scalar>(s: &[T], lambda: T) -> Result<T, MetricsError> {
    if s.is_empty() {
        return Err(MetricsError::EmptySatisfaction);
    }
    let n = T::from_usize(s.len()).expect("count fits scalar");
    let mean = s.iter().copied().sum::<T>() / n;
    let min = s.iter().copied().fold(T::infinity(), T::min);
    Ok(lambda * mean + (T::one() - lambda) * min)
}
