//! Gauge series, area-ratio flow transfer, low-flow statistics and monthly
//! inflow scenarios.

mod gauge_file;
mod lowflow;

pub use gauge_file::{parse_gauge_csv, write_gauge_csv};
pub use lowflow::{annual_7day_minima, min_moving_average, q7_10, weibull_quantile, MAX_MISSING_DAYS, MIN_YEARS};

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basin::{RiverNetwork, SegmentId};
use crate::{Real, Scalar};

pub const MONTHS: usize = 12;
/// Days per calendar month of a non-leap year.
pub const MONTH_DAYS: [u32; MONTHS] = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31];
/// Tolerance on the sum of scenario probabilities.
pub const PROBABILITY_TOL: Real = 1e-9;

pub type Monthly = [Real; MONTHS];

/// Month lengths in hours for a non-leap year.
pub fn month_hours() -> Monthly {
    MONTH_DAYS.map(|d| d as Real * 24.0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HydrologyError {
    #[error("gauge {gauge}: {message}")]
    InvalidSeries { gauge: String, message: String },
    #[error("target drainage area must be positive, got {0}")]
    NonPositiveArea(Real),
    #[error("year {0} is not fully covered by the series")]
    MissingYear(i32),
    #[error("scenario probabilities sum to {0}, expected 1")]
    ProbabilitySum(Real),
    #[error("invalid scenario set: {0}")]
    InvalidScenario(String),
    #[error("only {usable_years} usable years of record, need {required}")]
    InsufficientRecord { usable_years: usize, required: usize },
    #[error("segment {segment}: scenario labels {found:?} differ from {expected:?}")]
    LabelMismatch { segment: SegmentId, expected: Vec<String>, found: Vec<String> },
    #[error("no total flows for segment {0}")]
    MissingSegment(SegmentId),
    #[error("gauge file line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Daily discharges at a gauge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailySeries {
    pub gauge_id: String,
    /// km²
    pub drainage_area: Real,
    pub samples: Vec<(NaiveDate, Real)>,
}

impl DailySeries {
    pub fn new(gauge_id: impl Into<String>, drainage_area: Real, samples: Vec<(NaiveDate, Real)>) -> Result<Self, HydrologyError> {
        let gauge_id = gauge_id.into();
        let invalid = |message: String| HydrologyError::InvalidSeries { gauge: gauge_id.clone(), message };
        if !(drainage_area > 0.0 && drainage_area.is_finite()) {
            return Err(invalid(format!("drainage area {drainage_area} must be positive")));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(invalid(format!("dates not strictly increasing at {}", w[1].0)));
            }
        }
        if let Some((d, q)) = samples.iter().find(|(_, q)| !(*q >= 0.0 && q.is_finite())) {
            return Err(invalid(format!("negative or non-finite flow {q} on {d}")));
        }
        Ok(DailySeries { gauge_id, drainage_area, samples })
    }

    pub fn mean_flow(&self) -> Real {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|(_, q)| q).sum::<Real>() / self.samples.len() as Real
    }
}

/// Area ratio scaling of a flow value.
pub fn area_ratio_scale<T: Scalar>(flow: T, source_area: T, target_area: T) -> T {
    flow * (target_area / source_area)
}

/// Transfers a gauge series to another point by drainage-area ratio.
pub fn transfer_flow(series: &DailySeries, target_area: Real) -> Result<DailySeries, HydrologyError> {
    if !(target_area > 0.0 && target_area.is_finite()) {
        return Err(HydrologyError::NonPositiveArea(target_area));
    }
    Ok(DailySeries {
        gauge_id: series.gauge_id.clone(),
        drainage_area: target_area,
        samples: series.samples.iter().map(|(d, q)| (*d, area_ratio_scale(*q, series.drainage_area, target_area))).collect(),
    })
}

/// A hydrological year selected as an inflow scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearProbability {
    pub year: i32,
    pub probability: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub probability: Real,
    /// Mean flow per calendar month, m³/s.
    pub monthly_flows: Monthly,
}

/// Probability-weighted monthly inflow years.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
    /// Hours per month.
    pub month_durations: Monthly,
}

pub(crate) fn check_probabilities(probs: impl IntoIterator<Item = Real>) -> Result<(), HydrologyError> {
    let mut sum = 0.0;
    for p in probs {
        if !(p > 0.0 && p.is_finite()) {
            return Err(HydrologyError::InvalidScenario(format!("probability {p} must be positive")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > PROBABILITY_TOL {
        return Err(HydrologyError::ProbabilitySum(sum));
    }
    Ok(())
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>, month_durations: Monthly) -> Result<Self, HydrologyError> {
        let set = ScenarioSet { scenarios, month_durations };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<(), HydrologyError> {
        if self.scenarios.is_empty() {
            return Err(HydrologyError::InvalidScenario("no scenarios".into()));
        }
        check_probabilities(self.scenarios.iter().map(|s| s.probability))?;
        for s in &self.scenarios {
            if s.monthly_flows.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
                return Err(HydrologyError::InvalidScenario(format!("scenario {} has a negative flow", s.label)));
            }
        }
        if self.month_durations.iter().any(|d| !(*d > 0.0)) {
            return Err(HydrologyError::InvalidScenario("month durations must be positive".into()));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<String> {
        self.scenarios.iter().map(|s| s.label.clone()).collect()
    }

    pub fn probabilities(&self) -> Vec<Real> {
        self.scenarios.iter().map(|s| s.probability).collect()
    }

    /// Same scenarios with every flow multiplied by `factor`.
    pub fn scaled(&self, factor: Real) -> ScenarioSet {
        let mut out = self.clone();
        for s in &mut out.scenarios {
            for q in &mut s.monthly_flows {
                *q *= factor;
            }
        }
        out
    }

    /// Monthly flows per scenario, in scenario order.
    pub fn flows(&self) -> Vec<Monthly> {
        self.scenarios.iter().map(|s| s.monthly_flows).collect()
    }
}

/// Builds monthly mean-flow scenarios from selected calendar years.
pub fn monthly_scenarios(series: &DailySeries, years: &[YearProbability]) -> Result<ScenarioSet, HydrologyError> {
    check_probabilities(years.iter().map(|y| y.probability))?;
    let by_date: BTreeMap<NaiveDate, Real> = series.samples.iter().copied().collect();
    let mut scenarios = Vec::with_capacity(years.len());
    for yp in years {
        let mut sums = [0.0; MONTHS];
        let mut counts = [0u32; MONTHS];
        let start = NaiveDate::from_ymd_opt(yp.year, 1, 1).ok_or(HydrologyError::MissingYear(yp.year))?;
        for day in start.iter_days().take_while(|d| d.year() == yp.year) {
            let q = by_date.get(&day).ok_or(HydrologyError::MissingYear(yp.year))?;
            let m = day.month0() as usize;
            sums[m] += q;
            counts[m] += 1;
        }
        let mut monthly = [0.0; MONTHS];
        for m in 0..MONTHS {
            monthly[m] = sums[m] / counts[m] as Real;
        }
        scenarios.push(Scenario { label: yp.year.to_string(), probability: yp.probability, monthly_flows: monthly });
    }
    ScenarioSet::new(scenarios, month_hours())
}

/// A negative incremental inflow that was clamped to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlooredInflow {
    pub segment: SegmentId,
    pub scenario: String,
    pub month: usize,
    pub raw: Real,
}

/// Natural inflow entering at each segment, excluding upstream contributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementalInflows {
    pub labels: Vec<String>,
    /// Per segment, per scenario (in `labels` order), per month, m³/s.
    pub by_segment: BTreeMap<SegmentId, Vec<Monthly>>,
    #[serde(default)]
    pub floored: Vec<FlooredInflow>,
}

impl IncrementalInflows {
    pub fn get(&self, segment: &SegmentId) -> Option<&[Monthly]> {
        self.by_segment.get(segment).map(Vec::as_slice)
    }

    /// Natural total flow at every segment (sum over itself and everything upstream).
    pub fn totals(&self, net: &RiverNetwork) -> Result<Vec<Vec<Monthly>>, HydrologyError> {
        let scen = self.labels.len();
        let mut totals = vec![vec![[0.0; MONTHS]; scen]; net.len()];
        for &i in net.mouth_first().iter().rev() {
            let id = &net.segments()[i].id;
            let own = self.by_segment.get(id).ok_or_else(|| HydrologyError::MissingSegment(id.clone()))?;
            for s in 0..scen {
                for t in 0..MONTHS {
                    let up: Real = net.upstream_of(i).iter().map(|&u| totals[u][s][t]).sum();
                    totals[i][s][t] = own[s][t] + up;
                }
            }
        }
        Ok(totals)
    }
}

/// Incremental inflow = total at the segment minus the totals of its immediate
/// upstream segments, floored at zero with a warning.
pub fn incremental_inflows(
    net: &RiverNetwork,
    total_flows: &BTreeMap<SegmentId, ScenarioSet>,
) -> Result<IncrementalInflows, HydrologyError> {
    let Some(first) = net.segments().first() else {
        return Ok(IncrementalInflows { labels: Vec::new(), by_segment: BTreeMap::new(), floored: Vec::new() });
    };
    let get = |id: &SegmentId| total_flows.get(id).ok_or_else(|| HydrologyError::MissingSegment(id.clone()));
    let labels = get(&first.id)?.labels();
    for s in net.segments() {
        let found = get(&s.id)?.labels();
        if found != labels {
            return Err(HydrologyError::LabelMismatch { segment: s.id.clone(), expected: labels, found });
        }
    }

    let mut by_segment = BTreeMap::new();
    let mut floored = Vec::new();
    for (i, seg) in net.segments().iter().enumerate() {
        let own = get(&seg.id)?;
        let mut per_scenario = Vec::with_capacity(labels.len());
        for (k, sc) in own.scenarios.iter().enumerate() {
            let mut inc = [0.0; MONTHS];
            for t in 0..MONTHS {
                let up: Real = net.upstream_of(i).iter().map(|&u| total_flows[&net.segments()[u].id].scenarios[k].monthly_flows[t]).sum();
                let raw = sc.monthly_flows[t] - up;
                if raw < 0.0 {
                    log::warn!(
                        "negative incremental inflow {raw:.4} m3/s at segment {} scenario {} month {}; floored to 0",
                        seg.id,
                        sc.label,
                        t + 1
                    );
                    floored.push(FlooredInflow { segment: seg.id.clone(), scenario: sc.label.clone(), month: t, raw });
                }
                inc[t] = raw.max(0.0);
            }
            per_scenario.push(inc);
        }
        by_segment.insert(seg.id.clone(), per_scenario);
    }
    Ok(IncrementalInflows { labels, by_segment, floored })
}
