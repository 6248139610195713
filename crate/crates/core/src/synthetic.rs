//! Seeded stand-ins for gauge records and impact layers, used by the shipped
//! fixture and by tests.

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::basin::{synth_basin, BasinError, RiverNetwork, SynthSpec};
use crate::hydrology::{DailySeries, HydrologyError};
use crate::metrics::{ImpactDensities, ImpactTable, MetricsError};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeSpec {
    pub seed: u64,
    pub gauge_id: String,
    /// km²
    pub drainage_area: Real,
    pub first_year: i32,
    pub years: usize,
    /// Long-term runoff, m³/s per km².
    pub specific_discharge: Real,
    /// Relative amplitude of the annual cycle.
    pub seasonality: Real,
    /// Month (1-12) of peak flow.
    pub peak_month: u32,
    /// Spread of year-to-year wetness, log space.
    pub interannual_sigma: Real,
    /// Day-to-day persistence of the noise.
    pub persistence: Real,
    pub daily_sigma: Real,
}

impl Default for GaugeSpec {
    fn default() -> Self {
        GaugeSpec {
            seed: 0,
            gauge_id: "G0".into(),
            drainage_area: 10_000.0,
            first_year: 1961,
            years: 20,
            specific_discharge: 0.025,
            seasonality: 0.6,
            peak_month: 11,
            interannual_sigma: 0.2,
            persistence: 0.95,
            daily_sigma: 0.08,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SyntheticError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Basin(#[from] BasinError),
    #[error(transparent)]
    Hydrology(#[from] HydrologyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Daily record with an annual cycle, lognormal year factors and AR(1) noise.
pub fn synth_gauge(spec: &GaugeSpec) -> Result<DailySeries, SyntheticError> {
    if spec.years == 0 || !(spec.specific_discharge > 0.0) || !(1..=12).contains(&spec.peak_month) {
        return Err(SyntheticError::Spec("gauge needs years, positive runoff and a peak month".into()));
    }
    if !(0.0..1.0).contains(&spec.seasonality) || !(0.0..1.0).contains(&spec.persistence) {
        return Err(SyntheticError::Spec("seasonality and persistence must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let year_factor =
        LogNormal::new(-0.5 * spec.interannual_sigma.powi(2), spec.interannual_sigma).map_err(|e| SyntheticError::Spec(e.to_string()))?;
    let noise = Normal::new(0.0, spec.daily_sigma).map_err(|e| SyntheticError::Spec(e.to_string()))?;
    let mean = spec.specific_discharge * spec.drainage_area;
    let peak_doy = (spec.peak_month as Real - 0.5) * 365.25 / 12.0;
    let mut samples = Vec::new();
    let mut ar = 0.0;
    for y in 0..spec.years {
        let year = spec.first_year + y as i32;
        let f = year_factor.sample(&mut rng);
        let start = NaiveDate::from_ymd_opt(year, 1, 1).ok_or_else(|| SyntheticError::Spec(format!("year {year}")))?;
        for day in start.iter_days().take_while(|d| d.year() == year) {
            let phase = 2.0 * std::f64::consts::PI * (day.ordinal() as Real - peak_doy) / 365.25;
            ar = spec.persistence * ar + (1.0 - spec.persistence * spec.persistence).sqrt() * noise.sample(&mut rng);
            let q = mean * f * (1.0 + spec.seasonality * phase.cos()) * ar.exp();
            samples.push((day, q.max(0.0)));
        }
    }
    Ok(DailySeries::new(spec.gauge_id.clone(), spec.drainage_area, samples)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImpactSpec {
    pub seed: u64,
    /// Mean households per km² away from towns.
    pub rural_households: Real,
    /// Chance a segment hosts a town.
    pub town_share: Real,
    pub town_households: Real,
    pub road_m_per_km2: Real,
    /// Chance a segment is crossed by the railway.
    pub railway_share: Real,
    pub railway_m_per_km2: Real,
    /// Chance a segment lies in a protected area.
    pub protected_share: Real,
    /// Forest biomass range, Mg/ha.
    pub biomass: (Real, Real),
}

impl Default for ImpactSpec {
    fn default() -> Self {
        ImpactSpec {
            seed: 0,
            rural_households: 2.0,
            town_share: 0.1,
            town_households: 60.0,
            road_m_per_km2: 150.0,
            railway_share: 0.1,
            railway_m_per_km2: 300.0,
            protected_share: 0.2,
            biomass: (150.0, 350.0),
        }
    }
}

/// One density row per segment of `net`.
pub fn synth_impacts(net: &RiverNetwork, spec: &ImpactSpec) -> Result<ImpactTable, SyntheticError> {
    let shares = [spec.town_share, spec.railway_share, spec.protected_share];
    if shares.iter().any(|p| !(0.0..=1.0).contains(p)) || !(spec.biomass.0 <= spec.biomass.1) {
        return Err(SyntheticError::Spec("shares must lie in [0, 1] and biomass range be ordered".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rows: Vec<ImpactDensities> = net
        .segments()
        .iter()
        .map(|s| {
            let town = rng.gen_bool(spec.town_share);
            let households = spec.rural_households * rng.gen_range(0.5..1.5) + if town { spec.town_households } else { 0.0 };
            let rail = rng.gen_bool(spec.railway_share);
            let protected = if rng.gen_bool(spec.protected_share) { rng.gen_range(0.3..1.0) } else { 0.0 };
            let biomass = if spec.biomass.0 == spec.biomass.1 { spec.biomass.0 } else { rng.gen_range(spec.biomass.0..spec.biomass.1) };
            ImpactDensities {
                segment_id: s.id.clone(),
                households_per_km2: households,
                road_m_per_km2: spec.road_m_per_km2 * rng.gen_range(0.2..1.8) * if town { 3.0 } else { 1.0 },
                railway_m_per_km2: if rail { spec.railway_m_per_km2 } else { 0.0 },
                protected_fraction: protected,
                biomass_mg_per_ha: biomass,
            }
        })
        .collect();
    Ok(ImpactTable::try_from(rows)?)
}

/// Network, gauge at the mouth and impact layer from one spec.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticBasinSpec {
    pub network: SynthSpec,
    pub gauge: GaugeSpec,
    pub impacts: ImpactSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticBasin {
    pub network: RiverNetwork,
    pub gauge: DailySeries,
    pub impacts: ImpactTable,
}

pub fn synth_dataset(spec: &SyntheticBasinSpec) -> Result<SyntheticBasin, SyntheticError> {
    let network = synth_basin(&spec.network)?;
    let mouth_area = network.segments().iter().map(|s| s.drainage_area).fold(0.0, Real::max);
    let gauge = synth_gauge(&GaugeSpec { drainage_area: mouth_area, ..spec.gauge.clone() })?;
    let impacts = synth_impacts(&network, &spec.impacts)?;
    Ok(SyntheticBasin { network, gauge, impacts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydrology::{q7_10, transfer_flow};

    #[test]
    fn gauge_is_reproducible_and_seasonal() {
        let spec = GaugeSpec { seed: 3, ..Default::default() };
        let a = synth_gauge(&spec).unwrap();
        assert_eq!(a, synth_gauge(&spec).unwrap());
        assert_eq!(a.samples.len(), 7305);
        let rel = (a.mean_flow() / (spec.specific_discharge * spec.drainage_area) - 1.0).abs();
        assert!(rel < 0.25, "{rel}");
        let month_mean = |m: u32| {
            let v: Vec<Real> = a.samples.iter().filter(|(d, _)| d.month() == m).map(|(_, q)| *q).collect();
            v.iter().sum::<Real>() / v.len() as Real
        };
        assert!(month_mean(11) > 2.0 * month_mean(5));
        let q = q7_10(&a).unwrap();
        assert!(q > 0.0 && q < a.mean_flow());
        assert!(synth_gauge(&GaugeSpec { years: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn dataset_is_consistent() {
        let d = synth_dataset(&SyntheticBasinSpec::default()).unwrap();
        assert_eq!(d.impacts.rows().count(), d.network.len());
        let mouth = d.network.segments().iter().map(|s| s.drainage_area).fold(0.0, Real::max);
        assert_eq!(d.gauge.drainage_area, mouth);
        let half = transfer_flow(&d.gauge, mouth / 2.0).unwrap();
        assert!((half.mean_flow() * 2.0 - d.gauge.mean_flow()).abs() < 1e-6 * d.gauge.mean_flow());
    }
}
