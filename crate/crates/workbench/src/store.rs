//! File-based run store: one directory per run, never rewritten.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use basinplan_core::optimizer::{metric_table, metric_table_csv, Overrides, PortfolioProblem, SolutionPool, SolveStatus};
use basinplan_core::Real;

use crate::config::PlanningConfig;
use crate::error::WbError;
use crate::stages::{read_json, write_json, write_text, METRICS_FILE, POOL_FILE, PROBLEM_FILE};

pub const RUN_FILE: &str = "run.json";

/// Revenue given up by one what-if step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub run_id: String,
    pub parent_id: String,
    pub overrides: Overrides,
    pub parent_objective: Option<Real>,
    pub objective: Option<Real>,
    /// objective - parent_objective, USD/yr. Negative is a loss.
    pub revenue_delta: Option<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub id: String,
    pub parent: Option<String>,
    pub created: DateTime<Utc>,
    pub completed: DateTime<Utc>,
    pub config: PlanningConfig,
    /// Overrides relative to the parent; empty for a base run.
    pub overrides: Overrides,
    pub status: SolveStatus,
    pub incumbent_objective: Option<Real>,
    pub candidates: Vec<String>,
    /// Every what-if step from the base run to this one.
    pub ledger: Vec<LedgerEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub problem: PortfolioProblem,
    pub pool: SolutionPool,
}

impl RunRecord {
    pub fn base(id: &str, config: PlanningConfig, problem: PortfolioProblem, pool: SolutionPool, created: DateTime<Utc>) -> Self {
        let meta = RunMeta {
            id: id.into(),
            parent: None,
            created,
            completed: Utc::now(),
            config,
            overrides: Overrides::default(),
            status: pool.status,
            incumbent_objective: pool.incumbent().map(|a| a.objective),
            candidates: problem.variants.iter().map(|v| v.id.clone()).collect(),
            ledger: Vec::new(),
        };
        RunRecord { meta, problem, pool }
    }

    /// A what-if child of `parent`; the ledger gains one entry.
    pub fn derived(
        parent: &RunRecord,
        id: &str,
        overrides: Overrides,
        problem: PortfolioProblem,
        pool: SolutionPool,
        created: DateTime<Utc>,
    ) -> Self {
        let mut rec = RunRecord::base(id, parent.meta.config.clone(), problem, pool, created);
        let objective = rec.meta.incumbent_objective;
        let parent_objective = parent.meta.incumbent_objective;
        let mut ledger = parent.meta.ledger.clone();
        ledger.push(LedgerEntry {
            run_id: id.into(),
            parent_id: parent.meta.id.clone(),
            overrides: overrides.clone(),
            parent_objective,
            objective,
            revenue_delta: objective.zip(parent_objective).map(|(a, b)| a - b),
        });
        rec.meta.parent = Some(parent.meta.id.clone());
        rec.meta.overrides = overrides;
        rec.meta.ledger = ledger;
        rec
    }

    /// Writes run.json, problem.json, pool.json and metrics.csv into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), WbError> {
        std::fs::create_dir_all(dir).map_err(|e| WbError::io(dir, e))?;
        write_text(&dir.join(PROBLEM_FILE), &self.problem.to_json())?;
        write_text(&dir.join(POOL_FILE), &self.pool.to_json())?;
        let rows = metric_table(&self.problem, &self.pool.alternatives);
        write_text(&dir.join(METRICS_FILE), &metric_table_csv(&rows))?;
        write_json(&dir.join(RUN_FILE), &self.meta)
    }

    pub fn read_from(dir: &Path) -> Result<Self, WbError> {
        let meta: RunMeta = read_json(&dir.join(RUN_FILE))?;
        let problem = read_problem(&dir.join(PROBLEM_FILE))?;
        let pool = read_pool(&dir.join(POOL_FILE))?;
        Ok(RunRecord { meta, problem, pool })
    }
}

pub fn read_problem(path: &Path) -> Result<PortfolioProblem, WbError> {
    let text = std::fs::read_to_string(path).map_err(|e| WbError::io(path, e))?;
    Ok(PortfolioProblem::from_json(&text)?)
}

pub fn read_pool(path: &Path) -> Result<SolutionPool, WbError> {
    read_json(path)
}

pub struct RunStore {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && !id.starts_with('.') && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, WbError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| WbError::io(&root, e))?;
        Ok(RunStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Completed run ids in creation order.
    pub fn list(&self) -> Result<Vec<String>, WbError> {
        let mut ids = Vec::new();
        for e in std::fs::read_dir(&self.root).map_err(|e| WbError::io(&self.root, e))? {
            let e = e.map_err(|e| WbError::io(&self.root, e))?;
            let name = e.file_name().to_string_lossy().into_owned();
            if valid_id(&name) && e.path().join(RUN_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn next_id(&self) -> Result<String, WbError> {
        let n = self.list()?.iter().filter_map(|id| id.strip_prefix("run-").and_then(|n| n.parse::<u32>().ok())).max().unwrap_or(0);
        Ok(format!("run-{:04}", n + 1))
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_id(id) && self.root.join(id).join(RUN_FILE).is_file()
    }

    pub fn load(&self, id: &str) -> Result<RunRecord, WbError> {
        if !self.exists(id) {
            return Err(WbError::NotFound(format!("run {id}")));
        }
        RunRecord::read_from(&self.root.join(id))
    }

    /// Stores a completed record. Existing runs are never replaced.
    pub fn commit(&self, rec: &RunRecord) -> Result<(), WbError> {
        let id = &rec.meta.id;
        if !valid_id(id) {
            return Err(WbError::Store(format!("invalid run id {id:?}")));
        }
        let target = self.root.join(id);
        if target.exists() {
            return Err(WbError::Store(format!("run {id} already exists")));
        }
        let tmp = self.root.join(format!(".tmp-{id}"));
        if tmp.exists() {
            std::fs::remove_dir_all(&tmp).map_err(|e| WbError::io(&tmp, e))?;
        }
        rec.write_to(&tmp)?;
        for f in std::fs::read_dir(&tmp).map_err(|e| WbError::io(&tmp, e))? {
            let path = f.map_err(|e| WbError::io(&tmp, e))?.path();
            let mut perm = std::fs::metadata(&path).map_err(|e| WbError::io(&path, e))?.permissions();
            perm.set_readonly(true);
            std::fs::set_permissions(&path, perm).map_err(|e| WbError::io(&path, e))?;
        }
        std::fs::rename(&tmp, &target).map_err(|e| WbError::io(&target, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use basinplan_core::optimizer::random::{random_instance, InstanceSpec};
    use basinplan_core::optimizer::{solve, SolveOptions};

    fn config() -> PlanningConfig {
        let doc = r#"
            scenarios = [{ year = 1990, probability = 1.0 }]
            [data]
            network = "n.jsonl"
            gauge = "g.csv"
            impacts = "i.csv"
        "#;
        toml::from_str(doc).unwrap()
    }

    fn record(id: &str) -> RunRecord {
        let p = random_instance(&InstanceSpec { seed: 4, variants: 5, ..Default::default() }).unwrap();
        let pool = solve(&p, &SolveOptions::default(), None).unwrap();
        RunRecord::base(id, config(), p, pool, Utc::now())
    }

    #[test]
    fn commit_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        assert_eq!(store.next_id().unwrap(), "run-0001");
        let rec = record("run-0001");
        store.commit(&rec).unwrap();
        assert_eq!(store.load("run-0001").unwrap(), rec);
        assert_eq!(store.list().unwrap(), vec!["run-0001"]);
        assert_eq!(store.next_id().unwrap(), "run-0002");
        assert!(matches!(store.load("run-0009"), Err(WbError::NotFound(_))));
        assert!(matches!(store.load("../x"), Err(WbError::NotFound(_))));
    }

    #[test]
    fn runs_are_never_replaced() {
        let dir = tempfile::tempdir().unwrap();
        let store = RunStore::open(dir.path()).unwrap();
        let rec = record("run-0001");
        store.commit(&rec).unwrap();
        assert!(store.commit(&rec).is_err());
        assert!(store.commit(&record("bad/id")).is_err());
    }

    #[test]
    fn ledger_accumulates_with_links() {
        let base = record("run-0001");
        let o = Overrides { energy_price: Some(0.0), ..Default::default() };
        let p = basinplan_core::optimizer::apply_overrides(&base.problem, &o).unwrap();
        let pool = solve(&p, &SolveOptions::default(), None).unwrap();
        let child = RunRecord::derived(&base, "run-0002", o.clone(), p.clone(), pool.clone(), Utc::now());
        let grandchild = RunRecord::derived(&child, "run-0003", o, p, pool, Utc::now());
        assert_eq!(grandchild.meta.parent.as_deref(), Some("run-0002"));
        let l = &grandchild.meta.ledger;
        assert_eq!(l.len(), 2);
        assert_eq!((l[0].parent_id.as_str(), l[0].run_id.as_str()), ("run-0001", "run-0002"));
        assert_eq!((l[1].parent_id.as_str(), l[1].run_id.as_str()), ("run-0002", "run-0003"));
        let delta = l[0].revenue_delta.unwrap();
        assert_eq!(delta, l[0].objective.unwrap() - base.meta.incumbent_objective.unwrap());
        assert!(delta <= 0.0);
    }
}
