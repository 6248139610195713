use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};

use super::{DailySeries, HydrologyError};
use crate::{Real, Scalar};

/// Years with more missing days than this are left out of low-flow statistics.
pub const MAX_MISSING_DAYS: usize = 10;
/// Minimum number of usable years for a 7Q10 estimate.
pub const MIN_YEARS: usize = 10;

/// Empirical quantile at non-exceedance `p` using Weibull plotting positions
/// `m / (n + 1)` and linear interpolation between order statistics.
///
/// `sorted` must be ascending. Probabilities outside the plotted range clamp
/// to the extreme order statistics.
pub fn weibull_quantile<T: Scalar>(sorted: &[T], p: T) -> Option<T> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let denom = T::from_usize(n + 1)?;
    let pos = |m: usize| T::from_usize(m).map(|m| m / denom);
    if p <= pos(1)? {
        return Some(sorted[0]);
    }
    if p >= pos(n)? {
        return Some(sorted[n - 1]);
    }
    // p in (p_m, p_{m+1}]
    let m = (p * denom).floor().to_usize()?.clamp(1, n - 1);
    let (lo, hi) = (pos(m)?, pos(m + 1)?);
    let w = (p - lo) / (hi - lo);
    Some(sorted[m - 1] + w * (sorted[m] - sorted[m - 1]))
}

/// Minimum of the trailing `window`-day moving average over `daily`.
///
/// Each mean is taken about the window minimum, so a constant window returns
/// its value exactly.
pub fn min_moving_average<T: Scalar>(daily: &[T], window: usize) -> Option<T> {
    if window == 0 || daily.len() < window {
        return None;
    }
    let w = T::from_usize(window)?;
    daily
        .windows(window)
        .map(|win| {
            let lo = win.iter().copied().fold(win[0], T::min);
            lo + win.iter().map(|&x| x - lo).sum::<T>() / w
        })
        .reduce(T::min)
}

/// Gap-filled daily flows per calendar year, skipping years with too many gaps.
pub(crate) fn usable_years(series: &DailySeries) -> BTreeMap<i32, Vec<Real>> {
    let known: BTreeMap<NaiveDate, Real> = series.samples.iter().copied().collect();
    let (Some(first), Some(last)) = (known.keys().next(), known.keys().next_back()) else {
        return BTreeMap::new();
    };
    let mut out = BTreeMap::new();
    for year in first.year()..=last.year() {
        let start = NaiveDate::from_ymd_opt(year, 1, 1).unwrap();
        let days: Vec<NaiveDate> = start.iter_days().take_while(|d| d.year() == year).collect();
        let missing = days.iter().filter(|d| !known.contains_key(d)).count();
        if missing > MAX_MISSING_DAYS {
            continue;
        }
        let flows = days
            .iter()
            .map(|d| match known.get(d) {
                Some(q) => *q,
                None => interpolate(&known, *d),
            })
            .collect();
        out.insert(year, flows);
    }
    out
}

fn interpolate(known: &BTreeMap<NaiveDate, Real>, day: NaiveDate) -> Real {
    let before = known.range(..day).next_back();
    let after = known.range(day..).next();
    match (before, after) {
        (Some((d0, q0)), Some((d1, q1))) => {
            let span = (*d1 - *d0).num_days() as Real;
            let off = (day - *d0).num_days() as Real;
            q0 + (q1 - q0) * off / span
        }
        (Some((_, q)), None) | (None, Some((_, q))) => *q,
        (None, None) => 0.0,
    }
}

/// Annual minima of the 7-day trailing mean, one per usable calendar year.
pub fn annual_7day_minima(series: &DailySeries) -> BTreeMap<i32, Real> {
    usable_years(series).into_iter().filter_map(|(y, flows)| min_moving_average(&flows, 7).map(|m| (y, m))).collect()
}

/// Lowest 7-day mean flow with a 10-year return period, m³/s.
pub fn q7_10(series: &DailySeries) -> Result<Real, HydrologyError> {
    let mut minima: Vec<Real> = annual_7day_minima(series).into_values().collect();
    if minima.len() < MIN_YEARS {
        return Err(HydrologyError::InsufficientRecord { usable_years: minima.len(), required: MIN_YEARS });
    }
    minima.sort_by(|a, b| a.total_cmp(b));
    Ok(weibull_quantile(&minima, 0.1).expect("non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series_from(years: std::ops::Range<i32>, f: impl Fn(NaiveDate) -> Real) -> DailySeries {
        let mut samples = Vec::new();
        for y in years {
            let mut d = NaiveDate::from_ymd_opt(y, 1, 1).unwrap();
            while d.year() == y {
                samples.push((d, f(d)));
                d = d.succ_opt().unwrap();
            }
        }
        DailySeries::new("G", 100.0, samples).unwrap()
    }

    #[test]
    fn weibull_interpolation_by_hand() {
        let minima: Vec<f64> = (1..=10).map(f64::from).collect();
        // p_1 = 1/11, p_2 = 2/11; (0.1 - 1/11) / (1/11) = 0.1
        let q = weibull_quantile(&minima, 0.1).unwrap();
        assert!((q - 1.1).abs() < 1e-12);
        let q32 = weibull_quantile(&minima.iter().map(|&v| v as f32).collect::<Vec<_>>(), 0.1).unwrap();
        assert!((q32 - 1.1).abs() < 1e-5);
        assert_eq!(weibull_quantile(&minima, 0.01), Some(1.0));
        assert_eq!(weibull_quantile(&minima, 0.99), Some(10.0));
        assert_eq!(weibull_quantile::<f64>(&[], 0.5), None);
    }

    #[test]
    fn moving_average_minimum() {
        let v = [5.0, 5.0, 1.0, 1.0, 1.0, 5.0];
        assert_eq!(min_moving_average(&v, 3), Some(1.0));
        assert_eq!(min_moving_average(&v, 7), None);
    }

    #[test]
    fn constant_series_identity() {
        for c in [10.0, 3.7, 0.1] {
            let s = series_from(1960..1970, |_| c);
            assert_eq!(q7_10(&s).unwrap(), c);
        }
    }

    #[test]
    fn minima_one_to_ten() {
        // Year k has a 7-day trough of k m³/s and 50 m³/s otherwise.
        let s = series_from(1960..1970, |d| if d.month() == 3 && (10..17).contains(&d.day()) { (d.year() - 1959) as Real } else { 50.0 });
        let minima: Vec<Real> = annual_7day_minima(&s).into_values().collect();
        assert_eq!(minima, (1..=10).map(|k| k as Real).collect::<Vec<_>>());
        assert!((q7_10(&s).unwrap() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn short_record_is_rejected() {
        let s = series_from(1960..1965, |_| 10.0);
        assert!(matches!(q7_10(&s), Err(HydrologyError::InsufficientRecord { usable_years: 5, .. })));
    }

    #[test]
    fn gappy_years_are_dropped_and_small_gaps_filled() {
        let full = series_from(1960..1971, |d| 10.0 + d.ordinal() as Real * 0.01);
        // 1961: 30 missing days -> excluded; 1962: 5 missing days -> interpolated.
        let samples: Vec<_> = full
            .samples
            .iter()
            .copied()
            .filter(|(d, _)| !(d.year() == 1961 && d.ordinal() <= 30))
            .filter(|(d, _)| !(d.year() == 1962 && (100..105).contains(&d.ordinal())))
            .collect();
        let gappy = DailySeries::new("G", 100.0, samples).unwrap();
        let years = usable_years(&gappy);
        assert!(!years.contains_key(&1961));
        let y62 = &years[&1962];
        let orig = &usable_years(&full)[&1962];
        for (a, b) in y62.iter().zip(orig) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(annual_7day_minima(&gappy).len(), 10);
        assert!(q7_10(&gappy).is_ok());
    }

    #[test]
    fn dry_year_can_exceed_its_own_mean() {
        // one dry year (mean 5, trough 4), nine wet years with troughs of 100
        let s = series_from(1960..1970, |d| match (d.year(), d.month() == 3 && (10..17).contains(&d.day())) {
            (1960, true) => 4.0,
            (1960, false) => 5.0,
            (_, true) => 100.0,
            _ => 1000.0,
        });
        let q = q7_10(&s).unwrap();
        assert!((q - 13.6).abs() < 1e-9);
        assert!(q > 5.0);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn bracketed_by_minima_and_mean(scales in proptest::collection::vec(0.1f64..100.0, 10..14), seed in 0u64..1000) {
            let n = scales.len() as i32;
            let s = series_from(1960..1960 + n, |d| {
                let y = (d.year() - 1960) as usize;
                let wobble = ((d.ordinal() as u64 * 2654435761 + seed) % 1000) as Real / 1000.0;
                scales[y] * (0.2 + wobble)
            });
            let minima: Vec<Real> = annual_7day_minima(&s).into_values().collect();
            let q = q7_10(&s).unwrap();
            let lo = minima.iter().copied().fold(Real::INFINITY, Real::min);
            let mean_of_minima = minima.iter().sum::<Real>() / minima.len() as Real;
            proptest::prop_assert!(q >= lo - 1e-12);
            proptest::prop_assert!(q <= mean_of_minima + 1e-9);
            proptest::prop_assert!(q <= s.mean_flow() + 1e-9);
        }

        #[test]
        fn constant_flow_is_its_own_low_flow(c in 1e-3f64..1e4) {
            let s = series_from(1960..1970, |_| c);
            proptest::prop_assert_eq!(q7_10(&s).unwrap(), c);
        }

        #[test]
        fn window_mean_stays_within_window_range(v in proptest::collection::vec(0.0f64..1e3, 7..40)) {
            let m = min_moving_average(&v, 7).unwrap();
            let lo = v.iter().copied().fold(Real::INFINITY, Real::min);
            let brute = v.windows(7).map(|w| w.iter().sum::<Real>() / 7.0).fold(Real::INFINITY, Real::min);
            proptest::prop_assert!(m >= lo);
            proptest::prop_assert!((m - brute).abs() <= 1e-9 * brute.max(1.0));
        }
    }
}
