//! Site-level view of the network used by the dispatch formulations.

use std::collections::BTreeMap;

use super::PortfolioProblem;
use crate::hydrology::{Monthly, MONTHS};
use crate::Real;

/// Storage is carried in hm³ inside the LPs.
pub(crate) const STORAGE_UNIT: Real = 1e6;

pub(crate) struct Topology {
    /// Segment index of each variant.
    pub seg_of: Vec<usize>,
    /// Natural total flow per segment, scenario and month.
    pub natural: Vec<Vec<Monthly>>,
    /// m³/s of sustained flow per hm³ of storage change in month t.
    pub k: Monthly,
}

impl Topology {
    pub fn new(p: &PortfolioProblem) -> Self {
        let seg_of = p.variants.iter().map(|v| p.network.index_of(&v.segment_id).expect("validated")).collect();
        let natural = p.hydrology.inflows.totals(&p.network).expect("validated");
        let k = p.hydrology.month_hours.map(|d| STORAGE_UNIT / (3600.0 * d));
        Topology { seg_of, natural, k }
    }

    /// Turbine flow cap of variant `i` in scenario `s`, month `t`. Diversion
    /// releases come off the natural flow at the intake.
    pub fn turbine_cap(&self, p: &PortfolioProblem, i: usize, s: usize, t: usize) -> Real {
        let v = &p.variants[i];
        if v.ecological_release > 0.0 {
            v.max_turbine_flow.min((self.natural[self.seg_of[i]][s][t] - v.ecological_release).max(0.0))
        } else {
            v.max_turbine_flow
        }
    }

    /// Turbine flow of `i` operated on natural flow.
    pub fn natural_turbine_flow(&self, p: &PortfolioProblem, i: usize, s: usize, t: usize) -> Real {
        let v = &p.variants[i];
        v.max_turbine_flow.min((self.natural[self.seg_of[i]][s][t] - v.ecological_release).max(0.0))
    }

    /// Expected energy of `i` on natural flow, availability applied, kWh/yr.
    pub fn natural_energy(&self, p: &PortfolioProblem, i: usize) -> Real {
        let h = &p.hydrology;
        let rho = p.variants[i].production_factor;
        let mut e = 0.0;
        for (s, prob) in h.probabilities.iter().enumerate() {
            let mut es = 0.0;
            for t in 0..MONTHS {
                es += h.month_hours[t] * rho * self.natural_turbine_flow(p, i, s, t);
            }
            e += prob * es;
        }
        p.economics.availability * e
    }
}

pub(crate) struct Node {
    pub seg: usize,
    pub variants: Vec<usize>,
    /// Nearest nodes upstream.
    pub omega: Vec<usize>,
    pub storage: bool,
    /// Storage nodes at or above this one.
    pub upstream_storage: Vec<usize>,
    pub regulated: bool,
}

pub(crate) struct NodeSet {
    pub nodes: Vec<Node>,
    pub node_of: BTreeMap<usize, usize>,
}

impl NodeSet {
    /// Groups `variants` by segment. A node is regulated when storage sits at
    /// or above it, or when `all_regulated` is set.
    pub fn new(p: &PortfolioProblem, topo: &Topology, variants: &[usize], all_regulated: bool) -> Self {
        let mut by_seg: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &i in variants {
            by_seg.entry(topo.seg_of[i]).or_default().push(i);
        }
        let seg_node: BTreeMap<usize, usize> = by_seg.keys().enumerate().map(|(n, &s)| (s, n)).collect();
        let net = &p.network;
        let mut nodes: Vec<Node> = by_seg
            .iter()
            .map(|(&seg, vs)| {
                let mut omega = Vec::new();
                let mut stack: Vec<usize> = net.upstream_of(seg).to_vec();
                while let Some(u) = stack.pop() {
                    match seg_node.get(&u) {
                        Some(&n) => omega.push(n),
                        None => stack.extend_from_slice(net.upstream_of(u)),
                    }
                }
                omega.sort_unstable();
                Node {
                    seg,
                    variants: vs.clone(),
                    omega,
                    storage: vs.iter().any(|&i| p.variants[i].max_active_storage > 0.0),
                    upstream_storage: Vec::new(),
                    regulated: false,
                }
            })
            .collect();
        // upstream-inclusive storage sets, headwaters first
        let order: Vec<usize> = net.mouth_first().iter().rev().filter_map(|s| seg_node.get(s).copied()).collect();
        for n in order {
            let mut up: Vec<usize> = nodes[n].omega.iter().flat_map(|&m| nodes[m].upstream_storage.clone()).collect();
            if nodes[n].storage {
                up.push(n);
            }
            up.sort_unstable();
            up.dedup();
            nodes[n].regulated = all_regulated || !up.is_empty();
            nodes[n].upstream_storage = up;
        }
        let node_of = nodes.iter().enumerate().flat_map(|(n, node)| node.variants.iter().map(move |&i| (i, n))).collect();
        NodeSet { nodes, node_of }
    }
}
