//! Seeded random selection problems for tests and benchmarks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{build_problem, Constraints, Economics, Hydrology, OptimizerError, PortfolioProblem};
use crate::basin::{RiverNetwork, Segment, SegmentId};
use crate::engineering::{CostBreakdown, ProjectVariant, Scheme, Template};
use crate::hydrology::{month_hours, IncrementalInflows, Monthly, MONTHS};
use crate::metrics::{contributions, ImpactDensities, MetricDef, SatisfactionConfig, FLOODED_KM2, FREE_FLOWING_KM, HOUSEHOLDS};
use crate::screening::{ConflictPair, ConflictReason};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceSpec {
    pub seed: u64,
    pub segments: usize,
    pub variants: usize,
    pub scenarios: usize,
    /// Chance that a variant carries storage.
    pub storage_share: Real,
    /// Whether to draw metric, connectivity and satisfaction constraints.
    pub constrained: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        InstanceSpec { seed: 0, segments: 8, variants: 8, scenarios: 2, storage_share: 0.3, constrained: true }
    }
}

fn seasonal(rng: &mut ChaCha8Rng, mean: Real) -> Monthly {
    let phase = rng.gen_range(0..MONTHS);
    let amp = rng.gen_range(0.2..0.8);
    std::array::from_fn(|t| {
        let c = (2.0 * std::f64::consts::PI * ((t + phase) % MONTHS) as Real / MONTHS as Real).cos();
        (mean * (1.0 + amp * c) * rng.gen_range(0.8..1.2)).max(0.0)
    })
}

/// Random tree, inflows, variants and constraints drawn from `spec.seed`.
pub fn random_instance(spec: &InstanceSpec) -> Result<PortfolioProblem, OptimizerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ns = spec.segments.max(1);
    let mut segments: Vec<Segment> = Vec::with_capacity(ns);
    for k in 0..ns {
        let down = (k > 0).then(|| rng.gen_range(0..k));
        let elev = match down {
            None => 100.0,
            Some(d) => segments[d].foot_elevation + rng.gen_range(5.0..60.0),
        };
        segments.push(Segment {
            id: SegmentId::new(format!("s{k:02}")),
            downstream_id: down.map(|d| segments[d].id.clone()),
            length: rng.gen_range(2.0..20.0),
            foot_elevation: elev,
            drainage_area: rng.gen_range(10.0..500.0),
            mean_slope: rng.gen_range(0.001..0.02),
            valley_half_width_slope: rng.gen_range(2.0..8.0),
            natural_barrier: k > 0 && rng.gen_bool(0.08),
        });
    }
    // children always carry higher indices than the reach they drain into
    for k in (1..ns).rev() {
        let d = segments.iter().position(|s| Some(&s.id) == segments[k].downstream_id.as_ref()).expect("parent");
        segments[d].drainage_area += segments[k].drainage_area;
    }
    let network = RiverNetwork::new(segments)?;

    let scen = spec.scenarios.max(1);
    let raw: Vec<Real> = (0..scen).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: Real = raw.iter().sum();
    let mut probabilities: Vec<Real> = raw.iter().map(|r| r / total).collect();
    let head: Real = probabilities[1..].iter().sum();
    probabilities[0] = 1.0 - head;
    let wetness: Vec<Real> = (0..scen).map(|_| rng.gen_range(0.6..1.4)).collect();
    let mut by_segment = BTreeMap::new();
    for s in network.segments() {
        let mean = rng.gen_range(1.0..30.0);
        let rows: Vec<Monthly> = wetness.iter().map(|w| seasonal(&mut rng, mean * w)).collect();
        by_segment.insert(s.id.clone(), rows);
    }
    let inflows = IncrementalInflows { labels: (0..scen).map(|s| format!("sc{s}")).collect(), by_segment, floored: vec![] };
    let hydrology = Hydrology { inflows, month_hours: month_hours(), probabilities };
    let totals = hydrology.inflows.totals(&network)?;
    let economics = Economics {
        energy_price: rng.gen_range(0.04..0.12),
        capacity_price: if rng.gen_bool(0.5) { rng.gen_range(0.0..60.0) } else { 0.0 },
        availability: 0.95,
    };

    let mut variants = Vec::with_capacity(spec.variants);
    for k in 0..spec.variants {
        let seg = rng.gen_range(0..ns);
        let mean_q: Real = totals[seg].iter().flat_map(|r| r.iter()).sum::<Real>() / (scen * MONTHS) as Real;
        let head = rng.gen_range(8.0..90.0);
        let rho = 9.81 * 0.88 * head;
        let qmax = mean_q * rng.gen_range(0.4..1.6);
        let scheme = if rng.gen_bool(0.25) { Scheme::Diversion } else { Scheme::DamToe };
        let storage = if scheme == Scheme::DamToe && rng.gen_bool(spec.storage_share) { rng.gen_range(1e6..8e7) } else { 0.0 };
        let eco = if scheme == Scheme::Diversion { mean_q * rng.gen_range(0.05..0.3) } else { 0.0 };
        let kw = rho * qmax;
        // annuity around the value of running at half the cap all year
        let value = economics.energy_price * rho * qmax * 0.5 * 8760.0 + economics.capacity_price * kw;
        let annuity = value * rng.gen_range(0.3..1.2);
        let flooded = rng.gen_range(0.0..3.0) * head / 30.0;
        let d = ImpactDensities {
            segment_id: network.segments()[seg].id.clone(),
            households_per_km2: rng.gen_range(0.0..40.0),
            road_m_per_km2: rng.gen_range(0.0..200.0),
            railway_m_per_km2: 0.0,
            protected_fraction: rng.gen_range(0.0..0.3),
            biomass_mg_per_ha: rng.gen_range(50.0..300.0),
        };
        variants.push(ProjectVariant {
            id: format!("v{k:02}"),
            segment_id: d.segment_id.clone(),
            scheme,
            template: Template::ConcreteGravity,
            gross_head: head,
            dam_depth: head,
            foot_elevation: network.segments()[seg].foot_elevation,
            production_factor: rho,
            installed_capacity: kw,
            max_turbine_flow: qmax,
            max_active_storage: storage,
            flooded_area: flooded,
            capex: annuity * 10.0,
            breakdown: CostBreakdown::default(),
            annuity,
            annual_energy: vec![0.0; scen],
            expected_energy: 0.0,
            ecological_release: eco,
            passable: rng.gen_bool(0.15),
            impacts: contributions(&d, flooded, kw / 1000.0),
        });
    }

    let mut conflicts = BTreeSet::new();
    for a in 0..variants.len() {
        for b in a + 1..variants.len() {
            let (sa, sb) = (network.index_of(&variants[a].segment_id)?, network.index_of(&variants[b].segment_id)?);
            if sa != sb && (network.is_upstream(sa, sb) || network.is_upstream(sb, sa)) && rng.gen_bool(0.15) {
                conflicts.insert(ConflictPair::new(&variants[a].id, &variants[b].id, ConflictReason::Inundation));
            }
        }
    }

    let mut constraints = Constraints::default();
    if spec.constrained {
        let hh_total: Real = variants.iter().map(|v| v.impacts[HOUSEHOLDS]).sum();
        if rng.gen_bool(0.6) {
            constraints.metrics.push(MetricDef::max(HOUSEHOLDS, hh_total * rng.gen_range(0.2..0.7)));
        }
        let baseline = network.baseline_free_flowing_length();
        if rng.gen_bool(0.5) {
            constraints.min_free_flowing = Some(baseline * rng.gen_range(0.3..0.8));
        }
        if rng.gen_bool(0.3) {
            let fl_total: Real = variants.iter().map(|v| v.impacts[FLOODED_KM2]).sum();
            let mut flooded = MetricDef { bound: None, ..MetricDef::max(FLOODED_KM2, 0.0) };
            flooded.satisfaction_bounds = Some((0.0, fl_total.max(1e-3)));
            let mut ff = MetricDef { bound: None, ..MetricDef::min(FREE_FLOWING_KM, 0.0) };
            ff.satisfaction_bounds = Some((0.0, baseline.max(1e-3)));
            constraints.metrics.push(flooded);
            constraints.metrics.push(ff);
            constraints.satisfaction = Some(SatisfactionConfig {
                lambda: rng.gen_range(0.0..1.0),
                s_star: rng.gen_range(0.2..0.6),
                metrics: vec![FLOODED_KM2.into(), FREE_FLOWING_KM.into()],
            });
        }
        let mut ids: Vec<&String> = variants.iter().map(|v| &v.id).collect();
        ids.shuffle(&mut rng);
        if rng.gen_bool(0.2) {
            constraints.forbidden.insert(ids[0].clone());
        }
        if rng.gen_bool(0.2) && ids.len() > 1 {
            // forcing may conflict; leave it out then
            let id = ids[1].clone();
            if !conflicts.iter().any(|c| c.involves(&id)) {
                let seg = &variants.iter().find(|v| v.id == id).expect("exists").segment_id;
                if variants.iter().filter(|v| &v.segment_id == seg).count() == 1 {
                    constraints.forced.insert(id);
                }
            }
        }
    }
    build_problem(network, variants, conflicts, hydrology, economics, constraints)
}
