//! River network model: segments, topology queries and fragmentation.

mod fragmentation;
mod synth;

pub use fragmentation::{fragmentation, free_flowing_length, Dam, FragmentationState};
pub use synth::{synth_basin, SynthSpec};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

/// Identifier of a river segment.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub String);

impl SegmentId {
    pub fn new(id: impl Into<String>) -> Self {
        SegmentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SegmentId {
    fn from(s: &str) -> Self {
        SegmentId(s.to_string())
    }
}

/// One reach of the drainage network. Elevation refers to the downstream end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub id: SegmentId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downstream_id: Option<SegmentId>,
    #[serde(rename = "length_km")]
    pub length: Real,
    #[serde(rename = "foot_elevation_m")]
    pub foot_elevation: Real,
    #[serde(rename = "drainage_area_km2")]
    pub drainage_area: Real,
    pub mean_slope: Real,
    pub valley_half_width_slope: Real,
    #[serde(default)]
    pub natural_barrier: bool,
}

impl Segment {
    /// Elevation at the upstream end of the reach, m.
    pub fn top_elevation(&self) -> Real {
        self.foot_elevation + self.length * 1000.0 * self.mean_slope
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasinError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate segment id {0}")]
    DuplicateId(SegmentId),
    #[error("segment {id}: downstream reference {downstream} does not resolve")]
    DanglingDownstream { id: SegmentId, downstream: SegmentId },
    #[error("segment {0}: cycle detected in downstream links")]
    Cycle(SegmentId),
    #[error("segment {id}: {field} must be positive and finite")]
    NonPositive { id: SegmentId, field: &'static str },
    #[error("segment {id}: drainage area is smaller than the sum of its upstream segments")]
    DrainageMonotonicity { id: SegmentId },
    #[error("segment {id}: foot elevation is above that of upstream segment {upstream}")]
    ElevationMonotonicity { id: SegmentId, upstream: SegmentId },
    #[error("unknown segment {0}")]
    UnknownSegment(SegmentId),
    #[error("invalid synthetic basin parameters: {0}")]
    InvalidSynthSpec(String),
}

/// Validated forest of river segments with adjacency in both directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct RiverNetwork {
    segments: Vec<Segment>,
    index: HashMap<SegmentId, usize>,
    downstream: Vec<Option<usize>>,
    upstream: Vec<Vec<usize>>,
    /// Every segment appears after the segment it drains into.
    mouth_first: Vec<usize>,
}

impl TryFrom<Vec<Segment>> for RiverNetwork {
    type Error = BasinError;

    fn try_from(segments: Vec<Segment>) -> Result<Self, Self::Error> {
        RiverNetwork::new(segments)
    }
}

impl From<RiverNetwork> for Vec<Segment> {
    fn from(net: RiverNetwork) -> Self {
        net.segments
    }
}

impl RiverNetwork {
    /// Validates the segments and builds the adjacency index.
    pub fn new(segments: Vec<Segment>) -> Result<Self, BasinError> {
        let mut index = HashMap::with_capacity(segments.len());
        for (i, s) in segments.iter().enumerate() {
            for (field, value) in [("length_km", s.length), ("drainage_area_km2", s.drainage_area), ("mean_slope", s.mean_slope)] {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(BasinError::NonPositive { id: s.id.clone(), field });
                }
            }
            if !(s.valley_half_width_slope >= 0.0 && s.valley_half_width_slope.is_finite()) {
                return Err(BasinError::NonPositive { id: s.id.clone(), field: "valley_half_width_slope" });
            }
            if !s.foot_elevation.is_finite() {
                return Err(BasinError::NonPositive { id: s.id.clone(), field: "foot_elevation_m" });
            }
            if index.insert(s.id.clone(), i).is_some() {
                return Err(BasinError::DuplicateId(s.id.clone()));
            }
        }

        let mut downstream = Vec::with_capacity(segments.len());
        for s in &segments {
            let d = match &s.downstream_id {
                None => None,
                Some(d) => Some(*index.get(d).ok_or_else(|| BasinError::DanglingDownstream { id: s.id.clone(), downstream: d.clone() })?),
            };
            downstream.push(d);
        }

        // 0 = unvisited, 1 = on current path, 2 = reaches a mouth
        let mut state = vec![0u8; segments.len()];
        for start in 0..segments.len() {
            let mut path = Vec::new();
            let mut cur = Some(start);
            while let Some(c) = cur {
                match state[c] {
                    2 => break,
                    1 => return Err(BasinError::Cycle(segments[c].id.clone())),
                    _ => {
                        state[c] = 1;
                        path.push(c);
                        cur = downstream[c];
                    }
                }
            }
            for p in path {
                state[p] = 2;
            }
        }

        let mut upstream = vec![Vec::new(); segments.len()];
        for (i, d) in downstream.iter().enumerate() {
            if let Some(d) = d {
                upstream[*d].push(i);
            }
        }

        for (i, s) in segments.iter().enumerate() {
            let inflow_area: Real = upstream[i].iter().map(|&u| segments[u].drainage_area).sum();
            if s.drainage_area < inflow_area {
                return Err(BasinError::DrainageMonotonicity { id: s.id.clone() });
            }
            for &u in &upstream[i] {
                if segments[u].foot_elevation < s.foot_elevation {
                    return Err(BasinError::ElevationMonotonicity { id: s.id.clone(), upstream: segments[u].id.clone() });
                }
            }
        }

        let mut mouth_first = Vec::with_capacity(segments.len());
        let mut stack: Vec<usize> = (0..segments.len()).filter(|&i| downstream[i].is_none()).rev().collect();
        while let Some(i) = stack.pop() {
            mouth_first.push(i);
            stack.extend(upstream[i].iter().rev());
        }

        Ok(RiverNetwork { segments, index, downstream, upstream, mouth_first })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn index_of(&self, id: &SegmentId) -> Result<usize, BasinError> {
        self.index.get(id).copied().ok_or_else(|| BasinError::UnknownSegment(id.clone()))
    }

    pub fn segment(&self, id: &SegmentId) -> Result<&Segment, BasinError> {
        Ok(&self.segments[self.index_of(id)?])
    }

    pub fn downstream_of(&self, i: usize) -> Option<usize> {
        self.downstream[i]
    }

    pub fn upstream_of(&self, i: usize) -> &[usize] {
        &self.upstream[i]
    }

    /// Indices ordered so that each segment follows the one it drains into.
    pub fn mouth_first(&self) -> &[usize] {
        &self.mouth_first
    }

    /// Ids of segments without a downstream link.
    pub fn mouths(&self) -> BTreeSet<SegmentId> {
        self.segments.iter().filter(|s| s.downstream_id.is_none()).map(|s| s.id.clone()).collect()
    }

    /// Transitive upstream closure of `id`, excluding `id` itself.
    pub fn upstream_set(&self, id: &SegmentId) -> Result<BTreeSet<SegmentId>, BasinError> {
        let start = self.index_of(id)?;
        Ok(self.upstream_indices(start).into_iter().map(|i| self.segments[i].id.clone()).collect())
    }

    pub(crate) fn upstream_indices(&self, start: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.upstream[start].clone();
        while let Some(i) = stack.pop() {
            out.push(i);
            stack.extend_from_slice(&self.upstream[i]);
        }
        out
    }

    /// True when `up` lies strictly upstream of `down`.
    pub fn is_upstream(&self, up: usize, down: usize) -> bool {
        let mut cur = self.downstream[up];
        while let Some(c) = cur {
            if c == down {
                return true;
            }
            cur = self.downstream[c];
        }
        false
    }

    /// Serializes as one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.segments {
            out.push_str(&serde_json::to_string(s).expect("segment serializes"));
            out.push('\n');
        }
        out
    }
}

/// Parses a network document: one JSON object per non-blank line, `#` comments allowed.
pub fn load_network(source: &str) -> Result<RiverNetwork, BasinError> {
    let mut segments = Vec::new();
    for (n, line) in source.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let seg: Segment = serde_json::from_str(line).map_err(|e| BasinError::Parse { line: n + 1, message: e.to_string() })?;
        segments.push(seg);
    }
    RiverNetwork::new(segments)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn seg(id: &str, down: Option<&str>, length: Real, elev: Real, area: Real) -> Segment {
        Segment {
            id: id.into(),
            downstream_id: down.map(SegmentId::from),
            length,
            foot_elevation: elev,
            drainage_area: area,
            mean_slope: 0.002,
            valley_half_width_slope: 3.0,
            natural_barrier: false,
        }
    }

    /// A -> B -> C(mouth), 10 km each.
    pub fn chain() -> RiverNetwork {
        RiverNetwork::new(vec![
            seg("A", Some("B"), 10.0, 120.0, 100.0),
            seg("B", Some("C"), 10.0, 100.0, 200.0),
            seg("C", None, 10.0, 80.0, 300.0),
        ])
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    fn line(id: &str, down: Option<&str>, area: f64, elev: f64) -> String {
        let down = down.map(|d| format!(r#""downstream_id":"{d}","#)).unwrap_or_default();
        format!(
            r#"{{"id":"{id}",{down}"length_km":10,"foot_elevation_m":{elev},"drainage_area_km2":{area},"mean_slope":0.002,"valley_half_width_slope":3,"natural_barrier":false}}"#
        )
    }

    #[test]
    fn loads_three_segment_chain() {
        let doc = [line("A", Some("B"), 100.0, 120.0), line("B", Some("C"), 200.0, 100.0), line("C", None, 300.0, 80.0)].join("\n");
        let net = load_network(&doc).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(net.mouths(), BTreeSet::from([SegmentId::from("C")]));
        assert_eq!(load_network(&net.to_jsonl()).unwrap(), net);
    }

    #[test]
    fn rejects_cycle() {
        let doc = [line("A", Some("B"), 100.0, 100.0), line("B", Some("A"), 100.0, 100.0)].join("\n");
        assert!(matches!(load_network(&doc), Err(BasinError::Cycle(_))));
    }

    #[test]
    fn rejects_drainage_decrease() {
        let doc = [line("A", Some("B"), 100.0, 120.0), line("B", None, 50.0, 100.0)].join("\n");
        assert_eq!(load_network(&doc), Err(BasinError::DrainageMonotonicity { id: "B".into() }));
    }

    #[test]
    fn rejects_dangling_and_non_positive() {
        let doc = line("A", Some("Z"), 100.0, 120.0);
        assert!(matches!(load_network(&doc), Err(BasinError::DanglingDownstream { .. })));
        let doc = line("A", None, 0.0, 120.0);
        assert!(matches!(load_network(&doc), Err(BasinError::NonPositive { field: "drainage_area_km2", .. })));
        let doc = line("A", None, 10.0, 120.0).replace(r#""length_km":10"#, r#""length_km":-1"#);
        assert!(matches!(load_network(&doc), Err(BasinError::NonPositive { field: "length_km", .. })));
    }

    #[test]
    fn rejects_unknown_field_and_reports_line() {
        let doc = format!("# header\n{}", line("A", None, 10.0, 1.0).replace("\"natural_barrier\"", "\"barrier\""));
        match load_network(&doc) {
            Err(BasinError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_elevation_inversion() {
        let net = RiverNetwork::new(vec![seg("A", Some("B"), 1.0, 50.0, 1.0), seg("B", None, 1.0, 60.0, 2.0)]);
        assert!(matches!(net, Err(BasinError::ElevationMonotonicity { .. })));
    }

    #[test]
    fn upstream_sets() {
        let net = chain();
        assert_eq!(net.upstream_set(&"C".into()).unwrap(), BTreeSet::from(["A".into(), "B".into()]));
        assert!(net.upstream_set(&"A".into()).unwrap().is_empty());
        assert!(matches!(net.upstream_set(&"Q".into()), Err(BasinError::UnknownSegment(_))));

        let tree = synth_basin(&SynthSpec { depth: 3, branching: 2, seed: 1, ..SynthSpec::default() }).unwrap();
        let root = tree.mouths().into_iter().next().unwrap();
        let up = tree.upstream_set(&root).unwrap();
        assert_eq!(up.len(), 6);
        assert!(!up.contains(&root));
    }

    #[test]
    fn mouth_first_order_is_topological() {
        let net = synth_basin(&SynthSpec { depth: 4, branching: 3, seed: 9, ..SynthSpec::default() }).unwrap();
        let mut pos = vec![0; net.len()];
        for (k, &i) in net.mouth_first().iter().enumerate() {
            pos[i] = k;
        }
        for i in 0..net.len() {
            if let Some(d) = net.downstream_of(i) {
                assert!(pos[d] < pos[i]);
            }
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let net = chain();
        let json = serde_json::to_string(&net).unwrap();
        let back: RiverNetwork = serde_json::from_str(&json).unwrap();
        assert_eq!(back, net);
        let bad = json.replace("300.0", "1.0");
        assert!(serde_json::from_str::<RiverNetwork>(&bad).is_err());
    }
}
