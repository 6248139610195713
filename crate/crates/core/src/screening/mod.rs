//! Site screening on the network, ex-ante filters and conflict detection.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::{BasinError, RiverNetwork, SegmentId};
use crate::engineering::{ProjectVariant, SiteGeometry, GAMMA_WATER};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreeningError {
    #[error("no mean flow for segment {0}")]
    MissingFlow(SegmentId),
    #[error("invalid screening criteria: {0}")]
    InvalidCriteria(String),
    #[error(transparent)]
    Basin(#[from] BasinError),
}

/// Efficiency assumed by the rough capacity estimate.
const SCREENING_EFFICIENCY: Real = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningCriteria {
    /// m³/s
    pub min_mean_flow: Real,
    pub min_slope: Real,
    /// m
    pub min_head: Real,
    /// MW, at the largest candidate head and mean flow.
    pub min_capacity_estimate: Real,
    /// Candidate gross heads, m.
    pub head_ladder: Vec<Real>,
}

impl Default for ScreeningCriteria {
    fn default() -> Self {
        ScreeningCriteria {
            min_mean_flow: 0.0,
            min_slope: 0.0,
            min_head: 0.0,
            min_capacity_estimate: 0.0,
            head_ladder: vec![10.0, 20.0, 30.0, 50.0],
        }
    }
}

impl ScreeningCriteria {
    pub fn validate(&self) -> Result<(), ScreeningError> {
        let t = [self.min_mean_flow, self.min_slope, self.min_head, self.min_capacity_estimate];
        if t.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(ScreeningError::InvalidCriteria("thresholds must be non-negative".into()));
        }
        if self.head_ladder.is_empty() || self.head_ladder.iter().any(|h| !(*h > 0.0)) {
            return Err(ScreeningError::InvalidCriteria("head ladder needs positive heads".into()));
        }
        Ok(())
    }
}

/// Bankfull width from mean flow, m.
pub fn river_width(mean_flow: Real) -> Real {
    (3.0 * mean_flow.max(0.0).sqrt()).max(5.0)
}

/// Elevation that can still be dammed above segment `i`: highest upstream
/// segment top minus the foot of `i`.
fn head_budget(net: &RiverNetwork, i: usize) -> Real {
    let foot = net.segments()[i].foot_elevation;
    std::iter::once(i).chain(net.upstream_indices(i)).map(|u| net.segments()[u].top_elevation()).fold(Real::MIN, Real::max) - foot
}

/// Candidate sites on every segment that meets the criteria. Ordered by segment id.
pub fn screen_sites(
    net: &RiverNetwork,
    mean_flows: &BTreeMap<SegmentId, Real>,
    criteria: &ScreeningCriteria,
) -> Result<Vec<SiteGeometry>, ScreeningError> {
    criteria.validate()?;
    let mut out = Vec::new();
    for (i, seg) in net.segments().iter().enumerate() {
        let q = *mean_flows.get(&seg.id).ok_or_else(|| ScreeningError::MissingFlow(seg.id.clone()))?;
        if q < criteria.min_mean_flow || seg.mean_slope < criteria.min_slope {
            continue;
        }
        let budget = head_budget(net, i);
        let mut heads: Vec<Real> = criteria.head_ladder.iter().copied().filter(|h| *h <= budget && *h >= criteria.min_head).collect();
        if heads.is_empty() && budget >= criteria.min_head && budget > 0.0 {
            heads.push(budget);
        }
        let Some(&top) = heads.iter().max_by(|a, b| a.total_cmp(b)) else { continue };
        if GAMMA_WATER * SCREENING_EFFICIENCY * top * q / 1000.0 < criteria.min_capacity_estimate {
            continue;
        }
        heads.sort_by(|a, b| a.total_cmp(b));
        heads.dedup();
        out.push(SiteGeometry {
            segment_id: seg.id.clone(),
            river_width: river_width(q),
            valley_side_slope: seg.valley_half_width_slope,
            upstream_slope: seg.mean_slope,
            available_heads: heads,
            foot_elevation: seg.foot_elevation,
            drainage_area: seg.drainage_area,
            mean_flow: q,
            ecological_flow: 0.0,
        });
    }
    out.sort_by(|a, b| a.segment_id.cmp(&b.segment_id));
    Ok(out)
}

/// Whether a variant passes the unit-cost and power-density thresholds.
/// Both limits are inclusive; a variant flooding nothing passes on density.
pub fn passes_exante(v: &ProjectVariant, max_unit_cost: Real, min_power_density: Real) -> bool {
    if !(v.installed_capacity > 0.0) {
        return false;
    }
    let cost_ok = v.capex / v.installed_capacity <= max_unit_cost;
    let density_ok = v.flooded_area <= 0.0 || (v.installed_capacity / 1000.0) / v.flooded_area >= min_power_density;
    cost_ok && density_ok
}

pub fn exante_filter(variants: &[ProjectVariant], max_unit_cost: Real, min_power_density: Real) -> Vec<ProjectVariant> {
    variants.iter().filter(|v| passes_exante(v, max_unit_cost, min_power_density)).cloned().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConflictReason {
    SameSite,
    Inundation,
}

/// Mutually exclusive variants, stored once with `i < k`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ConflictPair {
    pub i: String,
    pub k: String,
    pub reason: ConflictReason,
}

impl ConflictPair {
    pub fn new(a: &str, b: &str, reason: ConflictReason) -> Self {
        let (i, k) = if a <= b { (a, b) } else { (b, a) };
        ConflictPair { i: i.into(), k: k.into(), reason }
    }

    pub fn involves(&self, id: &str) -> bool {
        self.i == id || self.k == id
    }
}

/// Same-site pairs plus pairs where an upstream dam foot lies strictly below
/// the full pool of a downstream reservoir.
pub fn conflict_pairs(variants: &[ProjectVariant], net: &RiverNetwork) -> Result<BTreeSet<ConflictPair>, ScreeningError> {
    let mut by_segment: BTreeMap<usize, Vec<&ProjectVariant>> = BTreeMap::new();
    for v in variants {
        by_segment.entry(net.index_of(&v.segment_id)?).or_default().push(v);
    }
    let mut out = BTreeSet::new();
    for (&s, here) in &by_segment {
        for (a, va) in here.iter().enumerate() {
            for vb in &here[a + 1..] {
                out.insert(ConflictPair::new(&va.id, &vb.id, ConflictReason::SameSite));
            }
        }
        for vi in here {
            // upstream search, pruned once the bed rises above the full pool
            let mut stack: Vec<usize> = net.upstream_of(s).to_vec();
            while let Some(u) = stack.pop() {
                if net.segments()[u].foot_elevation - vi.foot_elevation >= vi.gross_head {
                    continue;
                }
                for vk in by_segment.get(&u).into_iter().flatten() {
                    if vk.foot_elevation - vi.foot_elevation < vi.gross_head {
                        out.insert(ConflictPair::new(&vi.id, &vk.id, ConflictReason::Inundation));
                    }
                }
                stack.extend_from_slice(net.upstream_of(u));
            }
        }
    }
    Ok(out)
}
