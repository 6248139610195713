//! Exhaustive enumeration, the reference answer for small instances.

use rayon::prelude::*;

use super::dispatch::{evaluate, is_feasible, Alternative};
use super::{OptimizerError, PortfolioProblem};

pub const BRUTE_FORCE_MAX: usize = 20;

fn mask_to_x(mask: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

// lexicographic order on x, first variant most significant
fn lex_less(a: &[bool], b: &[bool]) -> bool {
    a < b
}

/// Best feasible selection over all 2ⁿ masks, ties broken toward the
/// lexicographically smallest x. `None` when nothing is feasible.
pub fn brute_force(p: &PortfolioProblem) -> Result<Option<Alternative>, OptimizerError> {
    p.validate()?;
    let n = p.variants.len();
    if n > BRUTE_FORCE_MAX {
        return Err(OptimizerError::TooLarge { n, max: BRUTE_FORCE_MAX });
    }
    let best = (0..1u32 << n)
        .into_par_iter()
        .map(|mask| {
            let x = mask_to_x(mask, n);
            if is_feasible(p, &x).is_err() {
                return Ok(None);
            }
            evaluate(p, &x).map(Some)
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, b) => b,
                    (a, None) => a,
                    (Some(a), Some(b)) => {
                        let pick_b = b.objective > a.objective || (b.objective == a.objective && lex_less(&b.x, &a.x));
                        Some(if pick_b { b } else { a })
                    }
                })
            },
        )?;
    Ok(best)
}
