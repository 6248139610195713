use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BasinError, RiverNetwork, SegmentId};
use crate::Real;

/// A barrier placed on a segment. Passable dams (fish ladders) do not fragment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dam {
    pub segment: SegmentId,
    #[serde(default)]
    pub passable: bool,
}

impl Dam {
    pub fn new(segment: impl Into<SegmentId>, passable: bool) -> Self {
        Dam { segment: segment.into(), passable }
    }
}

/// Per-segment connectivity loss.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FragmentationState {
    pub fragmented: BTreeMap<SegmentId, bool>,
}

impl FragmentationState {
    pub fn is_fragmented(&self, id: &SegmentId) -> bool {
        self.fragmented.get(id).copied().unwrap_or(false)
    }

    pub fn fragmented_ids(&self) -> impl Iterator<Item = &SegmentId> {
        self.fragmented.iter().filter(|(_, f)| **f).map(|(id, _)| id)
    }
}

impl RiverNetwork {
    /// Fragmentation mask given per-segment barrier flags (index aligned with `segments()`).
    ///
    /// Natural barriers are always included. A segment is fragmented when it,
    /// or any segment downstream of it, carries a barrier.
    pub fn fragmented_mask(&self, barrier: &[bool]) -> Vec<bool> {
        debug_assert_eq!(barrier.len(), self.len());
        let mut frag = vec![false; self.len()];
        for &i in self.mouth_first() {
            let below = self.downstream_of(i).map(|d| frag[d]).unwrap_or(false);
            frag[i] = below || barrier[i] || self.segments()[i].natural_barrier;
        }
        frag
    }

    pub(crate) fn barrier_mask(&self, dams: &[Dam]) -> Result<Vec<bool>, BasinError> {
        let mut barrier = vec![false; self.len()];
        for d in dams {
            let i = self.index_of(&d.segment)?;
            if !d.passable {
                barrier[i] = true;
            }
        }
        Ok(barrier)
    }

    /// Sum of segment lengths not flagged in `fragmented`.
    pub fn free_length_of_mask(&self, fragmented: &[bool]) -> Real {
        self.segments().iter().zip(fragmented).filter(|(_, f)| !**f).map(|(s, _)| s.length).sum()
    }

    /// Free-flowing length with no dams: only natural barriers apply.
    pub fn baseline_free_flowing_length(&self) -> Real {
        self.free_length_of_mask(&self.fragmented_mask(&vec![false; self.len()]))
    }
}

/// Marks every segment hosting a non-passable dam or natural barrier, and
/// everything upstream of it, as fragmented.
pub fn fragmentation(net: &RiverNetwork, dams: &[Dam]) -> Result<FragmentationState, BasinError> {
    let mask = net.fragmented_mask(&net.barrier_mask(dams)?);
    Ok(FragmentationState { fragmented: net.segments().iter().zip(mask).map(|(s, f)| (s.id.clone(), f)).collect() })
}

/// Total length (km) of segments left unfragmented by `dams`.
///
/// The segment that hosts a dam counts as fragmented.
pub fn free_flowing_length(net: &RiverNetwork, dams: &[Dam]) -> Result<Real, BasinError> {
    let mask = net.fragmented_mask(&net.barrier_mask(dams)?);
    Ok(net.free_length_of_mask(&mask))
}

#[cfg(test)]
mod tests {
    use super::super::test_support::*;
    use super::super::{synth_basin, SynthSpec};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chain_cases() {
        let net = chain();
        let st = fragmentation(&net, &[Dam::new("B", false)]).unwrap();
        assert!(st.is_fragmented(&"A".into()));
        assert!(st.is_fragmented(&"B".into()));
        assert!(!st.is_fragmented(&"C".into()));

        let st = fragmentation(&net, &[]).unwrap();
        assert_eq!(st.fragmented_ids().count(), 0);
        let st = fragmentation(&net, &[Dam::new("B", true)]).unwrap();
        assert_eq!(st.fragmented_ids().count(), 0);

        assert_eq!(free_flowing_length(&net, &[Dam::new("B", false)]).unwrap(), 10.0);
        assert_eq!(free_flowing_length(&net, &[]).unwrap(), 30.0);
        assert_eq!(free_flowing_length(&net, &[Dam::new("C", false)]).unwrap(), 0.0);
        assert!(matches!(free_flowing_length(&net, &[Dam::new("X", false)]), Err(BasinError::UnknownSegment(_))));
    }

    #[test]
    fn natural_barrier_fragments_upstream() {
        let mut segs: Vec<_> = chain().segments().to_vec();
        segs[1].natural_barrier = true;
        let net = RiverNetwork::new(segs).unwrap();
        assert_eq!(net.baseline_free_flowing_length(), 10.0);
        assert_eq!(free_flowing_length(&net, &[]).unwrap(), 10.0);
    }

    fn arb_case() -> impl Strategy<Value = (RiverNetwork, Vec<Dam>, Vec<Dam>)> {
        (1usize..5, 1usize..3, any::<u64>(), proptest::collection::vec((any::<prop::sample::Index>(), any::<bool>()), 0..6))
            .prop_flat_map(|(depth, branching, seed, raw)| {
                let net = synth_basin(&SynthSpec { depth, branching, seed, ..SynthSpec::default() }).unwrap();
                let dams: Vec<Dam> = raw.iter().map(|(ix, p)| Dam::new(net.segments()[ix.index(net.len())].id.clone(), *p)).collect();
                let extra = proptest::collection::vec(any::<prop::sample::Index>(), 0..4);
                (Just(net), Just(dams), extra)
            })
            .prop_map(|(net, dams, extra)| {
                let mut more = dams.clone();
                more.extend(extra.iter().map(|ix| Dam::new(net.segments()[ix.index(net.len())].id.clone(), false)));
                (net, dams, more)
            })
    }

    proptest! {
        #[test]
        fn adding_dams_is_monotone((net, dams, more) in arb_case()) {
            let a = fragmentation(&net, &dams).unwrap();
            let b = fragmentation(&net, &more).unwrap();
            for id in a.fragmented_ids() {
                prop_assert!(b.is_fragmented(id));
            }
            prop_assert!(free_flowing_length(&net, &more).unwrap() <= free_flowing_length(&net, &dams).unwrap());
        }
    }
}
