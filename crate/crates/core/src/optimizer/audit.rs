//! Independent feasibility audit of an alternative. Shares no code with the
//! optimizer's own checks beyond the problem data.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::dispatch::Alternative;
use super::PortfolioProblem;
use crate::hydrology::MONTHS;
use crate::metrics::{BoundKind, Orientation, FREE_FLOWING_KM};
use crate::Real;

const TOL: Real = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub passed: bool,
    pub violations: Vec<String>,
}

fn close(a: Real, b: Real, scale: Real) -> bool {
    (a - b).abs() <= TOL * scale.abs().max(1.0)
}

/// Re-derives flows, storage, metrics, connectivity and the objective of
/// `alt` from raw problem data and lists every violated condition.
pub fn audit(p: &PortfolioProblem, alt: &Alternative) -> AuditReport {
    let mut bad = Vec::new();
    let n = p.variants.len();
    if alt.x.len() != n {
        bad.push(format!("x has {} entries for {n} variants", alt.x.len()));
        return AuditReport { passed: false, violations: bad };
    }
    let chosen: Vec<usize> = (0..n).filter(|&i| alt.x[i]).collect();
    let ids: BTreeSet<&str> = chosen.iter().map(|&i| p.variants[i].id.as_str()).collect();
    let listed: BTreeSet<&str> = alt.selected.iter().map(String::as_str).collect();
    if ids != listed {
        bad.push("selected ids disagree with x".into());
    }
    let c = &p.constraints;
    for id in &c.forced {
        if !ids.contains(id.as_str()) {
            bad.push(format!("forced variant {id} not selected"));
        }
    }
    for id in &c.forbidden {
        if ids.contains(id.as_str()) {
            bad.push(format!("forbidden variant {id} selected"));
        }
    }
    for pair in &p.conflicts {
        if ids.contains(pair.i.as_str()) && ids.contains(pair.k.as_str()) {
            bad.push(format!("conflicting variants {} and {} both selected", pair.i, pair.k));
        }
    }
    let net = &p.network;
    let seg_index: BTreeMap<&str, usize> = net.segments().iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    let mut host: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in &chosen {
        let seg = seg_index[p.variants[i].segment_id.as_str()];
        if let Some(prev) = host.insert(seg, i) {
            bad.push(format!("variants {} and {} share a segment", p.variants[prev].id, p.variants[i].id));
        }
    }

    // mass balance, walking up to the nearest selected projects
    let h = &p.hydrology;
    let scen = h.probabilities.len();
    let dispatch: BTreeMap<&str, _> = alt.dispatch.iter().map(|d| (d.variant_id.as_str(), d)).collect();
    let mut energy = 0.0;
    let mut energy_of = BTreeMap::new();
    if dispatch.len() != chosen.len() || chosen.iter().any(|&i| !dispatch.contains_key(p.variants[i].id.as_str())) {
        bad.push("dispatch does not cover exactly the selected variants".into());
    } else {
        for &i in &chosen {
            let v = &p.variants[i];
            let d = dispatch[v.id.as_str()];
            if d.scenarios.len() != scen {
                bad.push(format!("{}: dispatch has {} scenarios", v.id, d.scenarios.len()));
                continue;
            }
            let seg = seg_index[v.segment_id.as_str()];
            let mut local = Vec::new();
            let mut feeders = Vec::new();
            let mut stack = vec![seg];
            while let Some(sidx) = stack.pop() {
                local.push(sidx);
                for &u in net.upstream_of(sidx) {
                    match host.get(&u) {
                        Some(&k) if k != i => feeders.push(k),
                        _ => stack.push(u),
                    }
                }
            }
            let mut e = 0.0;
            for (s, sd) in d.scenarios.iter().enumerate() {
                let mut es = 0.0;
                for t in 0..MONTHS {
                    let mut inflow: Real =
                        local.iter().map(|&sidx| h.inflows.get(&net.segments()[sidx].id).map_or(0.0, |rows| rows[s][t])).sum();
                    for &k in &feeders {
                        if let Some(up) = dispatch.get(p.variants[k].id.as_str()) {
                            let us = &up.scenarios[s];
                            inflow += us.turbine_m3s[t] + us.spill_m3s[t];
                        }
                    }
                    let u = sd.turbine_m3s[t];
                    let w = sd.spill_m3s[t];
                    let z0 = sd.storage_m3[t];
                    let z1 = sd.storage_m3[(t + 1) % MONTHS];
                    let secs = 3600.0 * h.month_hours[t];
                    let lhs = z1 - z0;
                    let rhs = (inflow - u - w) * secs;
                    if !close(lhs, rhs, inflow * secs + v.max_active_storage) {
                        bad.push(format!("{} scenario {s} month {t}: storage change {lhs} vs net inflow {rhs}", v.id));
                    }
                    let mut cap = v.max_turbine_flow;
                    if v.ecological_release > 0.0 {
                        // the release stays in the reach
                        let natural: Real = net
                            .segments()
                            .iter()
                            .enumerate()
                            .filter(|(k, _)| *k == seg || net.is_upstream(*k, seg))
                            .map(|(_, sg)| h.inflows.get(&sg.id).map_or(0.0, |rows| rows[s][t]))
                            .sum();
                        cap = cap.min((natural - v.ecological_release).max(0.0));
                    }
                    if u < -TOL || u > cap + TOL * cap.max(1.0) {
                        bad.push(format!("{} scenario {s} month {t}: turbine flow {u} outside [0, {cap}]", v.id));
                    }
                    if w < -TOL * inflow.max(1.0) {
                        bad.push(format!("{} scenario {s} month {t}: negative spill {w}", v.id));
                    }
                    if z0 < -TOL * v.max_active_storage.max(1.0) || z0 > v.max_active_storage + TOL * v.max_active_storage.max(1.0) {
                        bad.push(format!("{} scenario {s} month {t}: storage {z0} outside [0, {}]", v.id, v.max_active_storage));
                    }
                    es += h.month_hours[t] * v.production_factor * u;
                }
                e += h.probabilities[s] * es;
            }
            e *= p.economics.availability;
            energy += p.economics.energy_price * e + p.economics.capacity_price * v.installed_capacity - v.annuity;
            energy_of.insert(v.id.clone(), e);
        }
        for (id, e) in &energy_of {
            let reported = alt.energy_kwh.get(id).copied().unwrap_or(Real::NAN);
            if !close(*e, reported, *e) {
                bad.push(format!("{id}: energy {reported} kWh, recomputed {e}"));
            }
        }
        if !close(energy, alt.objective, energy) {
            bad.push(format!("objective {} but recomputed {energy}", alt.objective));
        }
    }

    // connectivity: a segment is cut off if any barrier lies on its way to the mouth
    let mut free = 0.0;
    for (sidx, s) in net.segments().iter().enumerate() {
        let mut cur = Some(sidx);
        let mut cut = false;
        while let Some(k) = cur {
            let dammed = host.get(&k).is_some_and(|&i| !p.variants[i].passable);
            if dammed || net.segments()[k].natural_barrier {
                cut = true;
                break;
            }
            cur = net.downstream_of(k);
        }
        if alt.fragmented.get(&s.id) != Some(&cut) {
            bad.push(format!("segment {} fragmentation flag disagrees", s.id));
        }
        if !cut {
            free += s.length;
        }
    }
    let mut metrics: BTreeMap<String, Real> = BTreeMap::new();
    for &i in &chosen {
        for (k, val) in &p.variants[i].impacts {
            *metrics.entry(k.clone()).or_insert(0.0) += val;
        }
    }
    metrics.insert(FREE_FLOWING_KM.into(), free);
    for (k, val) in &metrics {
        let reported = alt.metrics.get(k).copied().unwrap_or(0.0);
        if !close(*val, reported, *val) {
            bad.push(format!("metric {k} = {reported}, recomputed {val}"));
        }
    }
    let value = |id: &str| metrics.get(id).copied().unwrap_or(0.0);
    for d in &c.metrics {
        let Some(b) = d.bound else { continue };
        let v = value(&d.id);
        let ok = match d.bound_kind {
            BoundKind::Max => v <= b + TOL * b.abs().max(1.0),
            BoundKind::Min => v >= b - TOL * b.abs().max(1.0),
        };
        if !ok {
            bad.push(format!("metric {} = {v} breaks its {:?} bound {b}", d.id, d.bound_kind));
        }
    }
    let l = c.min_free_flowing.unwrap_or(0.0);
    if free < l - TOL * l.max(1.0) {
        bad.push(format!("free-flowing length {free} km below {l} km"));
    }
    if let Some(cfg) = &c.satisfaction {
        let mut vals = Vec::new();
        for id in &cfg.metrics {
            let Some(d) = c.metrics.iter().find(|d| &d.id == id) else {
                bad.push(format!("satisfaction metric {id} undefined"));
                continue;
            };
            let Some((lo, hi)) = d.satisfaction_bounds else { continue };
            let v = value(id);
            let s = match d.orientation() {
                Orientation::Benefit => (v - lo) / (hi - lo),
                Orientation::Impact => (hi - v) / (hi - lo),
            };
            if s < -TOL {
                bad.push(format!("metric {id} = {v} below its satisfaction floor"));
            }
            vals.push(s.clamp(0.0, 1.0));
        }
        if !vals.is_empty() {
            let mean = vals.iter().sum::<Real>() / vals.len() as Real;
            let min = vals.iter().copied().fold(1.0, Real::min);
            let combined = cfg.lambda * mean + (1.0 - cfg.lambda) * min;
            if combined < cfg.s_star - TOL {
                bad.push(format!("combined satisfaction {combined} below {}", cfg.s_star));
            }
        }
    }
    AuditReport { passed: bad.is_empty(), violations: bad }
}
