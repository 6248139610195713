//! Branch-and-bound over the selection variables.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dispatch::{evaluate, is_feasible, Alternative};
use super::relax::{self, Relaxation};
use super::{OptimizerError, PortfolioProblem};
use crate::lp::{LinearProgram, LpSolution, LpStatus, WarmStart};
use crate::Real;

/// Distance from 0/1 below which a relaxed selection counts as integral.
const INTEGRALITY_TOL: Real = 1e-6;
/// Cap on tableau memory kept for warm starts, bytes.
const WARM_BUDGET: usize = 512 << 20;
/// Gaps below this count as closed; LP round-off lives here.
const NUMERIC_GAP: Real = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Relative optimality gap at which the search stops.
    pub gap_tol: Real,
    /// Wall-clock limit, seconds.
    pub time_limit: Option<Real>,
    /// Accepted for reproducible configs; the search itself is deterministic.
    pub seed: u64,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    /// Nodes relaxed per parallel round. Fixed so results do not depend on `threads`.
    pub node_batch: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { gap_tol: 1e-6, time_limit: None, seed: 0, threads: 0, node_batch: 8 }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        if !(self.gap_tol >= 0.0 && self.gap_tol.is_finite()) {
            return Err(OptimizerError::InvalidOptions("gap_tol must be non-negative".into()));
        }
        if self.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(OptimizerError::InvalidOptions("time_limit must be positive".into()));
        }
        if self.node_batch == 0 {
            return Err(OptimizerError::InvalidOptions("node_batch must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    TimeLimit,
    Infeasible,
}

/// Improving sequence of feasible alternatives; the last one is the incumbent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionPool {
    pub alternatives: Vec<Alternative>,
    pub status: SolveStatus,
    pub gap: Real,
    pub best_bound: Real,
    pub nodes: usize,
}

impl SolutionPool {
    pub fn incumbent(&self) -> Option<&Alternative> {
        self.alternatives.last()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pool serializes")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub nodes: usize,
    pub open: usize,
    pub incumbents: usize,
    pub incumbent: Option<Real>,
    pub best_bound: Real,
    pub gap: Option<Real>,
}

struct Node {
    id: u64,
    bound: Real,
    fixes: Vec<(usize, bool)>,
    warm: Option<WarmStart<Real>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // best bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}

fn scale(v: Real) -> Real {
    v.abs().max(1.0)
}

struct Search<'a> {
    problem: &'a PortfolioProblem,
    relax: Relaxation,
    pool: Vec<Alternative>,
    incumbent: Real,
    tried: HashSet<Vec<bool>>,
}

impl Search<'_> {
    fn offer(&mut self, x: &[bool]) -> Result<(), OptimizerError> {
        if !self.tried.insert(x.to_vec()) || is_feasible(self.problem, x).is_err() {
            return Ok(());
        }
        let alt = evaluate(self.problem, x)?;
        if self.pool.is_empty() || alt.objective > self.incumbent + 1e-12 * scale(self.incumbent) {
            self.incumbent = alt.objective;
            self.pool.push(alt);
        }
        Ok(())
    }

    fn node_lp(&self, node: &Node) -> LinearProgram<Real> {
        let mut lp = self.relax.lp.clone();
        for &(j, up) in &node.fixes {
            let v = if up { 1.0 } else { 0.0 };
            lp.set_bounds(j, v, v);
        }
        lp
    }

    fn gap(&self, bound: Real) -> Option<Real> {
        (!self.pool.is_empty()).then(|| ((bound - self.incumbent) / scale(self.incumbent)).max(0.0))
    }
}

/// Solves the selection problem by best-bound branch-and-bound.
pub fn solve(
    problem: &PortfolioProblem,
    options: &SolveOptions,
    progress: Option<&(dyn Fn(&Progress) + Sync)>,
) -> Result<SolutionPool, OptimizerError> {
    problem.validate()?;
    options.validate()?;
    let start = Instant::now();
    let limit = options.time_limit.map(Duration::from_secs_f64);
    let threads =
        rayon::ThreadPoolBuilder::new().num_threads(options.threads).build().map_err(|e| OptimizerError::InvalidOptions(e.to_string()))?;

    let nv = problem.variants.len();
    let mut search =
        Search { problem, relax: relax::build(problem), pool: Vec::new(), incumbent: Real::NEG_INFINITY, tried: HashSet::new() };
    let forced_only: Vec<bool> = problem.variants.iter().map(|v| problem.constraints.forced.contains(&v.id)).collect();
    search.offer(&forced_only)?;

    let mut queue = BinaryHeap::new();
    queue.push(Node { id: 0, bound: Real::INFINITY, fixes: Vec::new(), warm: None });
    let mut next_id = 1u64;
    let mut nodes = 0usize;
    let mut warm_bytes = 0usize;
    // largest bound among nodes dropped only because of the gap tolerance
    let mut tolerated = Real::NEG_INFINITY;
    let mut timed_out = false;

    let prune = |bound: Real, inc: Real, have: bool| have && bound <= inc + options.gap_tol * scale(inc);

    while !queue.is_empty() {
        if limit.is_some_and(|l| start.elapsed() >= l) {
            timed_out = true;
            break;
        }
        let mut batch = Vec::with_capacity(options.node_batch);
        while batch.len() < options.node_batch {
            let Some(node) = queue.pop() else { break };
            if let Some(w) = &node.warm {
                warm_bytes = warm_bytes.saturating_sub(w.bytes());
            }
            if prune(node.bound, search.incumbent, !search.pool.is_empty()) {
                if node.bound > search.incumbent {
                    tolerated = tolerated.max(node.bound);
                }
                continue;
            }
            batch.push(node);
        }
        let lps: Vec<LinearProgram<Real>> = batch.iter().map(|n| search.node_lp(n)).collect();
        let results: Vec<Result<LpSolution<Real>, OptimizerError>> = threads.install(|| {
            batch
                .par_iter()
                .zip(lps.par_iter())
                .map(|(node, lp)| {
                    let sol = match &node.warm {
                        Some(w) => lp.solve_warm(w)?,
                        None => lp.solve()?,
                    };
                    Ok(sol)
                })
                .collect()
        });

        for (node, res) in batch.into_iter().zip(results) {
            let sol = res?;
            nodes += 1;
            match sol.status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => continue,
                other => return Err(OptimizerError::Numerical(format!("relaxation ended {other:?}"))),
            }
            let bound = sol.objective.min(node.bound);
            if prune(bound, search.incumbent, !search.pool.is_empty()) {
                if bound > search.incumbent {
                    tolerated = tolerated.max(bound);
                }
                continue;
            }
            let x = &sol.x[..nv];
            let frac = |v: Real| (v - v.round()).abs();
            let mut branch: Option<usize> = None;
            for j in 0..nv {
                if frac(x[j]) <= INTEGRALITY_TOL {
                    continue;
                }
                branch = match branch {
                    None => Some(j),
                    Some(b) => {
                        let (fj, fb) = (frac(x[j]), frac(x[b]));
                        let better =
                            fj > fb + 1e-12 || ((fj - fb).abs() <= 1e-12 && search.relax.standalone[j] > search.relax.standalone[b]);
                        Some(if better { j } else { b })
                    }
                };
            }
            let rounded: Vec<bool> = x.iter().map(|&v| v >= 1.0 - INTEGRALITY_TOL).collect();
            search.offer(&rounded)?;
            if branch.is_none() && is_feasible(problem, &rounded).is_err() {
                // integral but outside the true feasible set: keep splitting
                branch = (0..nv).find(|&j| search.relax.lp.lower[j] != search.relax.lp.upper[j] && !node.fixes.iter().any(|f| f.0 == j));
            }
            let Some(j) = branch else { continue };
            for up in [false, true] {
                let mut fixes = node.fixes.clone();
                fixes.push((j, up));
                let warm = match &sol.warm {
                    Some(w) if warm_bytes + w.bytes() <= WARM_BUDGET => {
                        warm_bytes += w.bytes();
                        Some(w.clone())
                    }
                    _ => None,
                };
                queue.push(Node { id: next_id, bound, fixes, warm });
                next_id += 1;
            }
        }
        if let Some(cb) = progress {
            let open_bound = queue.peek().map_or(Real::NEG_INFINITY, |n| n.bound);
            let best_bound = open_bound.max(tolerated).max(search.incumbent);
            cb(&Progress {
                nodes,
                open: queue.len(),
                incumbents: search.pool.len(),
                incumbent: (!search.pool.is_empty()).then_some(search.incumbent),
                best_bound,
                gap: search.gap(best_bound),
            });
        }
    }

    let open_bound = queue.peek().map_or(Real::NEG_INFINITY, |n| n.bound);
    let best_bound = open_bound.max(tolerated).max(search.incumbent);
    let status = if search.pool.is_empty() {
        if timed_out {
            SolveStatus::TimeLimit
        } else {
            SolveStatus::Infeasible
        }
    } else if timed_out {
        SolveStatus::TimeLimit
    } else if tolerated > search.incumbent + NUMERIC_GAP * scale(search.incumbent) {
        SolveStatus::GapLimit
    } else {
        SolveStatus::Optimal
    };
    let gap = match status {
        SolveStatus::Infeasible => 0.0,
        _ => search.gap(best_bound).unwrap_or(Real::INFINITY),
    };
    Ok(SolutionPool {
        best_bound: if search.pool.is_empty() { best_bound.max(Real::MIN) } else { best_bound },
        alternatives: search.pool,
        status,
        gap,
        nodes,
    })
}
