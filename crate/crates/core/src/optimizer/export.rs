//! Tabular summaries of alternatives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dispatch::Alternative;
use super::PortfolioProblem;
use crate::metrics::{FLOODED_KM2, FREE_FLOWING_KM};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub alternative: usize,
    /// USD/yr
    pub net_revenue: Real,
    pub projects: usize,
    pub installed_mw: Real,
    pub free_flowing_km: Real,
    pub flooded_km2: Real,
    pub metrics: BTreeMap<String, Real>,
}

pub fn metric_table(p: &PortfolioProblem, alts: &[Alternative]) -> Vec<MetricRow> {
    alts.iter()
        .enumerate()
        .map(|(k, a)| MetricRow {
            alternative: k,
            net_revenue: a.objective,
            projects: a.selected.len(),
            installed_mw: a.installed_mw(p),
            free_flowing_km: a.metrics.get(FREE_FLOWING_KM).copied().unwrap_or(0.0),
            flooded_km2: a.metrics.get(FLOODED_KM2).copied().unwrap_or(0.0),
            metrics: a.metrics.clone(),
        })
        .collect()
}

/// CSV with the fixed columns followed by one column per metric id.
pub fn metric_table_csv(rows: &[MetricRow]) -> String {
    let mut keys: Vec<&String> = rows.iter().flat_map(|r| r.metrics.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> =
        ["alternative", "net_revenue", "projects", "installed_mw", "free_flowing_km", "flooded_km2"].map(String::from).into();
    header.extend(keys.iter().map(|k| format!("metric:{k}")));
    w.write_record(&header).expect("in-memory write");
    for r in rows {
        let mut rec = vec![
            r.alternative.to_string(),
            r.net_revenue.to_string(),
            r.projects.to_string(),
            r.installed_mw.to_string(),
            r.free_flowing_km.to_string(),
            r.flooded_km2.to_string(),
        ];
        rec.extend(keys.iter().map(|k| r.metrics.get(*k).map_or(String::new(), |v| v.to_string())));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
