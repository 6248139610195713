//! LP relaxation of the selection problem.

use std::collections::BTreeMap;

use super::topology::{NodeSet, Topology, STORAGE_UNIT};
use super::PortfolioProblem;
use crate::hydrology::MONTHS;
use crate::lp::{LinearProgram, RowKind};
use crate::metrics::{BoundKind, Orientation, FREE_FLOWING_KM};
use crate::screening::ConflictReason;
use crate::Real;

pub(crate) struct Relaxation {
    /// Selection variables are the first `n` columns.
    pub lp: LinearProgram<Real>,
    /// Standalone net benefit of each variant, for branching ties.
    pub standalone: Vec<Real>,
}

/// Linear expression `constant + Σ coef·var`.
struct Expr {
    constant: Real,
    terms: Vec<(usize, Real)>,
}

pub(crate) fn build(p: &PortfolioProblem) -> Relaxation {
    let topo = Topology::new(p);
    let nv = p.variants.len();
    let all: Vec<usize> = (0..nv).collect();
    let nodes = NodeSet::new(p, &topo, &all, false);
    let h = &p.hydrology;
    let econ = &p.economics;
    let price = econ.energy_price * econ.availability;
    let mut lp = LinearProgram::<Real>::new();

    let mut standalone = Vec::with_capacity(nv);
    for (i, v) in p.variants.iter().enumerate() {
        let natural = econ.energy_price * topo.natural_energy(p, i);
        let fixed = econ.capacity_price * v.installed_capacity - v.annuity;
        standalone.push(natural + fixed);
        let regulated = nodes.nodes[nodes.node_of[&i]].regulated;
        let c = if regulated { fixed } else { natural + fixed };
        let (lo, hi) = if p.constraints.forced.contains(&v.id) {
            (1.0, 1.0)
        } else if p.constraints.forbidden.contains(&v.id) {
            (0.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        lp.add_var(c, lo, hi);
    }

    // one clique row per site, pairwise rows for inundation
    for node in &nodes.nodes {
        if node.variants.len() > 1 {
            lp.add_row(node.variants.iter().map(|&i| (i, 1.0)).collect(), RowKind::Le, 1.0);
        }
    }
    let index: BTreeMap<&str, usize> = p.variants.iter().enumerate().map(|(i, v)| (v.id.as_str(), i)).collect();
    for c in &p.conflicts {
        let (a, b) = (index[c.i.as_str()], index[c.k.as_str()]);
        if c.reason == ConflictReason::Inundation || topo.seg_of[a] != topo.seg_of[b] {
            lp.add_row(vec![(a, 1.0), (b, 1.0)], RowKind::Le, 1.0);
        }
    }

    // dispatch where storage can alter flows
    let regulated: Vec<usize> = (0..nodes.nodes.len()).filter(|&n| nodes.nodes[n].regulated).collect();
    for s in 0..h.probabilities.len() {
        let mut z_var: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &n in &regulated {
            let node = &nodes.nodes[n];
            if node.storage {
                let cap = node.variants.iter().map(|&i| p.variants[i].max_active_storage).fold(0.0, Real::max) / STORAGE_UNIT;
                let z: Vec<usize> = (0..MONTHS).map(|_| lp.add_var(0.0, 0.0, cap)).collect();
                for &zt in &z {
                    let mut coefs = vec![(zt, 1.0)];
                    for &i in &node.variants {
                        coefs.push((i, -p.variants[i].max_active_storage / STORAGE_UNIT));
                    }
                    lp.add_row(coefs, RowKind::Le, 0.0);
                }
                z_var.insert(n, z);
            }
        }
        for &n in &regulated {
            let node = &nodes.nodes[n];
            let mut u_by_t: Vec<Vec<usize>> = vec![Vec::new(); MONTHS];
            for &i in &node.variants {
                let v = &p.variants[i];
                for (t, ut) in u_by_t.iter_mut().enumerate() {
                    let cap = topo.turbine_cap(p, i, s, t);
                    let c = price * h.probabilities[s] * h.month_hours[t] * v.production_factor;
                    let u = lp.add_var(c, 0.0, cap);
                    lp.add_row(vec![(u, 1.0), (i, -cap)], RowKind::Le, 0.0);
                    ut.push(u);
                }
            }
            for (t, ut) in u_by_t.iter().enumerate() {
                let mut coefs: Vec<(usize, Real)> = ut.iter().map(|&u| (u, 1.0)).collect();
                for m in &node.upstream_storage {
                    let z = &z_var[m];
                    coefs.push((z[(t + 1) % MONTHS], topo.k[t]));
                    coefs.push((z[t], -topo.k[t]));
                }
                lp.add_row(coefs, RowKind::Le, topo.natural[node.seg][s][t]);
            }
        }
    }

    // cumulative metric bounds
    let cumulative = |id: &str| Expr {
        constant: 0.0,
        terms: p.variants.iter().enumerate().map(|(i, v)| (i, v.impacts.get(id).copied().unwrap_or(0.0))).collect(),
    };
    for d in &p.constraints.metrics {
        let (Some(b), true) = (d.bound, d.cumulative) else { continue };
        let kind = if d.bound_kind == BoundKind::Max { RowKind::Le } else { RowKind::Ge };
        lp.add_row(cumulative(&d.id).terms, kind, b);
    }

    // connectivity
    let l = p.effective_min_free_flowing();
    let sat_needs_y = p.constraints.satisfaction.as_ref().is_some_and(|s| s.metrics.iter().any(|m| m == FREE_FLOWING_KM));
    let mut free_expr = None;
    if l > 0.0 || sat_needs_y {
        let net = &p.network;
        let baseline = net.fragmented_mask(&vec![false; net.len()]);
        let y: Vec<usize> = (0..net.len()).map(|sidx| lp.add_var(0.0, if baseline[sidx] { 1.0 } else { 0.0 }, 1.0)).collect();
        for (i, v) in p.variants.iter().enumerate() {
            if !v.passable {
                lp.add_row(vec![(y[topo.seg_of[i]], 1.0), (i, -1.0)], RowKind::Ge, 0.0);
            }
        }
        for sidx in 0..net.len() {
            for &u in net.upstream_of(sidx) {
                lp.add_row(vec![(y[u], 1.0), (y[sidx], -1.0)], RowKind::Ge, 0.0);
            }
        }
        let total: Real = net.segments().iter().map(|s| s.length).sum();
        let terms: Vec<(usize, Real)> = net.segments().iter().enumerate().map(|(sidx, s)| (y[sidx], -s.length)).collect();
        if l > 0.0 {
            lp.add_row(terms.iter().map(|&(j, c)| (j, -c)).collect(), RowKind::Le, total - l);
        }
        free_expr = Some(Expr { constant: total, terms });
    }

    // satisfaction
    if let Some(cfg) = &p.constraints.satisfaction {
        let smin = lp.add_var(0.0, 0.0, 1.0);
        let mut s_vars = Vec::new();
        for id in &cfg.metrics {
            let d = p.constraints.metrics.iter().find(|d| &d.id == id).expect("validated");
            let (lo, hi) = d.satisfaction_bounds.expect("validated");
            let w = hi - lo;
            let expr = if id == FREE_FLOWING_KM {
                free_expr.as_ref().map(|e| Expr { constant: e.constant, terms: e.terms.clone() }).expect("y built")
            } else {
                cumulative(id)
            };
            let sj = lp.add_var(0.0, 0.0, 1.0);
            // S_j <= (value - lo)/w  or  (hi - value)/w
            let (sign, rhs) = match d.orientation() {
                Orientation::Benefit => (-1.0, (expr.constant - lo) / w),
                Orientation::Impact => (1.0, (hi - expr.constant) / w),
            };
            let mut coefs = vec![(sj, 1.0)];
            coefs.extend(expr.terms.iter().filter(|(_, c)| *c != 0.0).map(|&(j, c)| (j, sign * c / w)));
            lp.add_row(coefs, RowKind::Le, rhs);
            lp.add_row(vec![(smin, 1.0), (sj, -1.0)], RowKind::Le, 0.0);
            s_vars.push(sj);
        }
        let nj = s_vars.len() as Real;
        let mut coefs: Vec<(usize, Real)> = s_vars.iter().map(|&s| (s, cfg.lambda / nj)).collect();
        coefs.push((smin, 1.0 - cfg.lambda));
        lp.add_row(coefs, RowKind::Ge, cfg.s_star);
    }

    Relaxation { lp, standalone }
}
