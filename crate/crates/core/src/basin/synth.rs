use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BasinError, RiverNetwork, Segment, SegmentId};
use crate::Real;

/// Parameters of a synthetic full tree basin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub depth: usize,
    pub branching: usize,
    pub seed: u64,
    pub length_range: (Real, Real),
    pub slope_range: (Real, Real),
    /// Local (non-routed) catchment area per km of reach, km²/km.
    pub local_area_per_km: (Real, Real),
    pub valley_slope_range: (Real, Real),
    pub mouth_elevation: Real,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            depth: 3,
            branching: 2,
            seed: 0,
            length_range: (5.0, 25.0),
            slope_range: (0.0005, 0.01),
            local_area_per_km: (20.0, 60.0),
            valley_slope_range: (2.0, 8.0),
            mouth_elevation: 10.0,
        }
    }
}

fn check_range(name: &str, (lo, hi): (Real, Real), strictly_positive: bool) -> Result<(), BasinError> {
    let ok = lo.is_finite() && hi.is_finite() && lo <= hi && if strictly_positive { lo > 0.0 } else { lo >= 0.0 };
    if ok {
        Ok(())
    } else {
        Err(BasinError::InvalidSynthSpec(format!("{name} = ({lo}, {hi})")))
    }
}

fn sample(rng: &mut ChaCha8Rng, (lo, hi): (Real, Real)) -> Real {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Generates a complete `branching`-ary tree of `depth` levels rooted at the mouth.
///
/// Segments are numbered breadth-first from the mouth (`S000`). Output is a
/// pure function of `spec`.
pub fn synth_basin(spec: &SynthSpec) -> Result<RiverNetwork, BasinError> {
    if spec.depth < 1 || spec.branching < 1 {
        return Err(BasinError::InvalidSynthSpec("depth and branching must be >= 1".into()));
    }
    check_range("length_range", spec.length_range, true)?;
    check_range("slope_range", spec.slope_range, true)?;
    check_range("local_area_per_km", spec.local_area_per_km, true)?;
    check_range("valley_slope_range", spec.valley_slope_range, false)?;
    let count: usize = (0..spec.depth).map(|k| spec.branching.pow(k as u32)).sum();
    if count > 100_000 {
        return Err(BasinError::InvalidSynthSpec(format!("{count} segments is too many")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    // BFS numbering: children of i are b*i + 1 ..= b*i + b.
    let parent = |i: usize| if i == 0 { None } else { Some((i - 1) / spec.branching) };
    let mut segs = Vec::with_capacity(count);
    for i in 0..count {
        let length = sample(&mut rng, spec.length_range);
        let slope = sample(&mut rng, spec.slope_range);
        let local = length * sample(&mut rng, spec.local_area_per_km);
        let valley = sample(&mut rng, spec.valley_slope_range);
        segs.push(Segment {
            id: SegmentId(format!("S{i:03}")),
            downstream_id: parent(i).map(|p| SegmentId(format!("S{p:03}"))),
            length,
            foot_elevation: 0.0,
            drainage_area: local,
            mean_slope: slope,
            valley_half_width_slope: valley,
            natural_barrier: false,
        });
    }
    for i in 0..count {
        segs[i].foot_elevation = match parent(i) {
            None => spec.mouth_elevation,
            Some(p) => segs[p].top_elevation(),
        };
    }
    for i in (1..count).rev() {
        let p = parent(i).unwrap();
        let a = segs[i].drainage_area;
        segs[p].drainage_area += a;
    }
    RiverNetwork::new(segs)
}
