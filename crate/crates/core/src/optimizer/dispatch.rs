//! Reservoir dispatch for a fixed selection, and evaluation of a selection
//! into a complete alternative.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::topology::{NodeSet, Topology, STORAGE_UNIT};
use super::{OptimizerError, PortfolioProblem, CHECK_TOL};
use crate::basin::{fragmentation, Dam, SegmentId};
use crate::hydrology::{Monthly, MONTHS};
use crate::lp::{LinearProgram, LpStatus, RowKind};
use crate::metrics::{alternative_metrics, combined_satisfaction, Orientation};
use crate::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DispatchMode {
    /// Closed form wherever no storage sits upstream, LP elsewhere.
    #[default]
    Decomposed,
    /// LP over every selected site.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDispatch {
    pub label: String,
    /// Stored volume at the start of each month, m³.
    pub storage_m3: Monthly,
    pub turbine_m3s: Monthly,
    pub spill_m3s: Monthly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectDispatch {
    pub variant_id: String,
    pub scenarios: Vec<ScenarioDispatch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    /// Net benefit, USD/yr.
    pub objective: Real,
    /// Expected energy per selected variant, kWh/yr.
    pub energy_kwh: BTreeMap<String, Real>,
    pub projects: Vec<ProjectDispatch>,
}

/// Best dispatch for the selection `x` and its net benefit.
pub fn lp_dispatch(p: &PortfolioProblem, x: &[bool], mode: DispatchMode) -> Result<Dispatch, OptimizerError> {
    if x.len() != p.variants.len() {
        return Err(OptimizerError::InfeasibleSelection(format!("{} flags for {} variants", x.len(), p.variants.len())));
    }
    let topo = Topology::new(p);
    let selected: Vec<usize> = (0..x.len()).filter(|&i| x[i]).collect();
    let nodes = NodeSet::new(p, &topo, &selected, mode == DispatchMode::Full);
    if let Some(n) = nodes.nodes.iter().find(|n| n.variants.len() > 1) {
        return Err(OptimizerError::InfeasibleSelection(format!(
            "variants {} and {} share a site",
            p.variants[n.variants[0]].id, p.variants[n.variants[1]].id
        )));
    }
    let h = &p.hydrology;
    let scen = h.probabilities.len();
    let price = p.economics.energy_price * p.economics.availability;

    // per node: turbine and storage (hm³) per scenario
    let mut turbine = vec![vec![[0.0; MONTHS]; scen]; nodes.nodes.len()];
    let mut storage = vec![vec![[0.0; MONTHS]; scen]; nodes.nodes.len()];
    for (n, node) in nodes.nodes.iter().enumerate() {
        if !node.regulated {
            let i = node.variants[0];
            for s in 0..scen {
                for t in 0..MONTHS {
                    turbine[n][s][t] = topo.natural_turbine_flow(p, i, s, t);
                }
            }
        }
    }
    let regulated: Vec<usize> = (0..nodes.nodes.len()).filter(|&n| nodes.nodes[n].regulated).collect();
    if !regulated.is_empty() {
        for s in 0..scen {
            let mut lp = LinearProgram::<Real>::new();
            let mut u_var = BTreeMap::new();
            let mut z_var = BTreeMap::new();
            for &n in &regulated {
                let node = &nodes.nodes[n];
                let i = node.variants[0];
                let v = &p.variants[i];
                let u: Vec<usize> = (0..MONTHS)
                    .map(|t| {
                        let c = price * h.probabilities[s] * h.month_hours[t] * v.production_factor;
                        lp.add_var(c, 0.0, topo.turbine_cap(p, i, s, t))
                    })
                    .collect();
                u_var.insert(n, u);
                if node.storage {
                    let cap = v.max_active_storage / STORAGE_UNIT;
                    z_var.insert(n, (0..MONTHS).map(|_| lp.add_var(0.0, 0.0, cap)).collect::<Vec<_>>());
                }
            }
            for &n in &regulated {
                let node = &nodes.nodes[n];
                for t in 0..MONTHS {
                    let mut coefs = vec![(u_var[&n][t], 1.0)];
                    for m in &node.upstream_storage {
                        let z = &z_var[m];
                        coefs.push((z[(t + 1) % MONTHS], topo.k[t]));
                        coefs.push((z[t], -topo.k[t]));
                    }
                    lp.add_row(coefs, RowKind::Le, topo.natural[node.seg][s][t]);
                }
            }
            let sol = lp.solve()?;
            if sol.status != LpStatus::Optimal {
                return Err(OptimizerError::Numerical(format!("dispatch LP ended {:?}", sol.status)));
            }
            for (&n, u) in &u_var {
                for t in 0..MONTHS {
                    turbine[n][s][t] = sol.x[u[t]].max(0.0);
                }
            }
            for (&n, z) in &z_var {
                for t in 0..MONTHS {
                    storage[n][s][t] = sol.x[z[t]].max(0.0);
                }
            }
        }
    }

    let mut objective = 0.0;
    let mut energy_kwh = BTreeMap::new();
    let mut projects = Vec::new();
    for &i in &selected {
        let n = nodes.node_of[&i];
        let node = &nodes.nodes[n];
        let v = &p.variants[i];
        let mut e = 0.0;
        let mut scenarios = Vec::with_capacity(scen);
        for s in 0..scen {
            let mut spill = [0.0; MONTHS];
            let mut es = 0.0;
            for t in 0..MONTHS {
                let mut out = topo.natural[node.seg][s][t];
                for &m in &node.upstream_storage {
                    out -= topo.k[t] * (storage[m][s][(t + 1) % MONTHS] - storage[m][s][t]);
                }
                spill[t] = out - turbine[n][s][t];
                es += h.month_hours[t] * v.production_factor * turbine[n][s][t];
            }
            e += h.probabilities[s] * es;
            scenarios.push(ScenarioDispatch {
                label: h.inflows.labels[s].clone(),
                storage_m3: storage[n][s].map(|z| z * STORAGE_UNIT),
                turbine_m3s: turbine[n][s],
                spill_m3s: spill,
            });
        }
        e *= p.economics.availability;
        objective += p.economics.energy_price * e + p.economics.capacity_price * v.installed_capacity - v.annuity;
        energy_kwh.insert(v.id.clone(), e);
        projects.push(ProjectDispatch { variant_id: v.id.clone(), scenarios });
    }
    Ok(Dispatch { objective, energy_kwh, projects })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatisfactionValues {
    pub per_metric: BTreeMap<String, Real>,
    pub combined: Real,
}

/// One feasible selection with its dispatch and whole-alternative metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub selected: Vec<String>,
    pub x: Vec<bool>,
    /// y per segment.
    pub fragmented: BTreeMap<SegmentId, bool>,
    /// Net benefit, USD/yr.
    pub objective: Real,
    pub energy_kwh: BTreeMap<String, Real>,
    pub metrics: BTreeMap<String, Real>,
    #[serde(default)]
    pub satisfaction: Option<SatisfactionValues>,
    pub dispatch: Vec<ProjectDispatch>,
}

impl Alternative {
    pub fn installed_mw(&self, p: &PortfolioProblem) -> Real {
        p.variants.iter().zip(&self.x).filter(|(_, &x)| x).map(|(v, _)| v.installed_mw()).sum()
    }
}

struct Checked {
    metrics: BTreeMap<String, Real>,
    satisfaction: Option<SatisfactionValues>,
}

fn check(p: &PortfolioProblem, x: &[bool]) -> Result<Checked, String> {
    if x.len() != p.variants.len() {
        return Err("selection length mismatch".into());
    }
    let c = &p.constraints;
    for (v, &on) in p.variants.iter().zip(x) {
        if on && c.forbidden.contains(&v.id) {
            return Err(format!("{} is forbidden", v.id));
        }
        if !on && c.forced.contains(&v.id) {
            return Err(format!("{} is forced", v.id));
        }
    }
    let selection: Vec<_> = p.variants.iter().zip(x).filter(|(_, &on)| on).map(|(v, _)| v).collect();
    let metrics = alternative_metrics(&selection, &p.network, &p.conflicts).map_err(|e| e.to_string())?;
    for d in &c.metrics {
        let value = metrics.get(&d.id).copied().unwrap_or(0.0);
        if !d.satisfied_by(value, CHECK_TOL) {
            return Err(format!("metric {} = {value} violates its bound", d.id));
        }
    }
    let ff = metrics[crate::metrics::FREE_FLOWING_KM];
    let l = p.effective_min_free_flowing();
    if ff < l - CHECK_TOL * l.max(1.0) {
        return Err(format!("free-flowing length {ff} below {l}"));
    }
    let satisfaction = match &c.satisfaction {
        None => None,
        Some(cfg) => {
            let mut per_metric = BTreeMap::new();
            for id in &cfg.metrics {
                let d = c.metrics.iter().find(|d| &d.id == id).expect("validated");
                let (lo, hi) = d.satisfaction_bounds.expect("validated");
                let value = metrics.get(id).copied().unwrap_or(0.0);
                let raw = match d.orientation() {
                    Orientation::Benefit => (value - lo) / (hi - lo),
                    Orientation::Impact => (hi - value) / (hi - lo),
                };
                if raw < -CHECK_TOL {
                    return Err(format!("metric {id} = {value} outside its satisfaction range"));
                }
                per_metric.insert(id.clone(), raw.clamp(0.0, 1.0));
            }
            let vals: Vec<Real> = per_metric.values().copied().collect();
            let combined = combined_satisfaction(&vals, cfg.lambda).map_err(|e| e.to_string())?;
            if combined < cfg.s_star - CHECK_TOL {
                return Err(format!("combined satisfaction {combined} below {}", cfg.s_star));
            }
            Some(SatisfactionValues { per_metric, combined })
        }
    };
    Ok(Checked { metrics, satisfaction })
}

/// Checks logical, metric, connectivity and satisfaction constraints of `x`.
pub fn is_feasible(p: &PortfolioProblem, x: &[bool]) -> Result<(), String> {
    check(p, x).map(|_| ())
}

/// Evaluates a feasible selection into an alternative.
pub fn evaluate(p: &PortfolioProblem, x: &[bool]) -> Result<Alternative, OptimizerError> {
    let checked = check(p, x).map_err(OptimizerError::InfeasibleSelection)?;
    let d = lp_dispatch(p, x, DispatchMode::Decomposed)?;
    let dams: Vec<Dam> = p.variants.iter().zip(x).filter(|(_, &on)| on).map(|(v, _)| Dam::new(v.segment_id.clone(), v.passable)).collect();
    let frag = fragmentation(&p.network, &dams)?;
    Ok(Alternative {
        selected: p.variants.iter().zip(x).filter(|(_, &on)| on).map(|(v, _)| v.id.clone()).collect(),
        x: x.to_vec(),
        fragmented: frag.fragmented,
        objective: d.objective,
        energy_kwh: d.energy_kwh,
        metrics: checked.metrics,
        satisfaction: checked.satisfaction,
        dispatch: d.projects,
    })
}
