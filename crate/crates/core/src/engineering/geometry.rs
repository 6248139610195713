//! Power equation and reservoir wedge geometry.

use serde::{Deserialize, Serialize};

use super::EngineeringError;
use crate::Scalar;

/// Specific weight of water, kN/m³.
pub const GAMMA_WATER: f64 = 9.81;

/// kW produced per m³/s of turbined flow: `9.81 · efficiency · head`.
pub fn production_factor<T: Scalar>(head: T, efficiency: T) -> Result<T, EngineeringError> {
    if !(head > T::zero() && head.is_finite()) {
        return Err(EngineeringError::Domain(format!("head {head} must be positive")));
    }
    if !(efficiency > T::zero() && efficiency <= T::one()) {
        return Err(EngineeringError::Domain(format!("efficiency {efficiency} must be in (0, 1]")));
    }
    Ok(T::lit(GAMMA_WATER) * efficiency * head)
}

/// Reservoir impounded behind a dam in a trapezoidal valley with a uniformly
/// rising bed.
///
/// With depth `h` at the dam, bed slope `s`, bottom width `b` and side slope
/// `z` (horizontal per vertical), the pool reaches back `L = h / s` and the
/// depth at distance `x` is `d(x) = h (1 - x / L)`. Then
///
/// * top width `W(x) = b + 2 z d(x)`, so plan area `∫ W dx = L (b + z h)`;
/// * section area `d (b + z d)`, so volume `∫ = L (b h / 2 + z h² / 3)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirWedge<T> {
    /// m
    pub backwater_length: T,
    /// m²
    pub plan_area: T,
    /// m³
    pub volume: T,
}

impl<T: Scalar> ReservoirWedge<T> {
    pub fn new(depth: T, bed_slope: T, bottom_width: T, side_slope: T) -> Result<Self, EngineeringError> {
        if !(bed_slope > T::zero()) {
            return Err(EngineeringError::Domain("bed slope must be positive".into()));
        }
        if depth < T::zero() || bottom_width < T::zero() || side_slope < T::zero() {
            return Err(EngineeringError::Domain("negative reservoir dimension".into()));
        }
        let length = depth / bed_slope;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        Ok(ReservoirWedge {
            backwater_length: length,
            plan_area: length * (bottom_width + side_slope * depth),
            volume: length * (bottom_width * depth / two + side_slope * depth * depth / three),
        })
    }

    pub fn area_km2(&self) -> T {
        self.plan_area / T::lit(1e6)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_factor_values() {
        assert!((production_factor(100.0_f64, 1.0).unwrap() - 981.0).abs() < 1e-12);
        assert!((production_factor(30.0_f64, 0.9).unwrap() - 264.87).abs() < 1e-9);
        assert!(production_factor(0.0_f64, 0.9).is_err());
        assert!(production_factor(10.0_f64, 1.5).is_err());
        assert!(production_factor(10.0_f64, 0.0).is_err());
    }

    /// Trapezoidal integration of width and section area along the backwater.
    fn numeric(depth: f64, slope: f64, b: f64, z: f64, n: usize) -> (f64, f64) {
        let len = depth / slope;
        let dx = len / n as f64;
        let d = |x: f64| depth * (1.0 - x / len);
        let w = |x: f64| b + 2.0 * z * d(x);
        let a = |x: f64| d(x) * (b + z * d(x));
        let (mut area, mut vol) = (0.0, 0.0);
        for k in 0..n {
            let (x0, x1) = (k as f64 * dx, (k + 1) as f64 * dx);
            area += 0.5 * (w(x0) + w(x1)) * dx;
            vol += 0.5 * (a(x0) + a(x1)) * dx;
        }
        (area, vol)
    }

    #[test]
    fn wedge_matches_numeric_integration() {
        let g = ReservoirWedge::new(10.0_f64, 0.01, 50.0, 2.0).unwrap();
        assert!((g.backwater_length - 1000.0).abs() < 1e-9);
        let (area, vol) = numeric(10.0, 0.01, 50.0, 2.0, 20_000);
        assert!((g.plan_area - area).abs() / area < 1e-9);
        assert!((g.volume - vol).abs() / vol < 1e-7);
        assert!((g.plan_area - 70_000.0).abs() < 1e-6);
        assert!((g.volume - 316_666.666_666_7).abs() < 1e-3);
        assert!((g.area_km2() - 0.07).abs() < 1e-12);
    }

    #[test]
    fn wedge_vanishes_with_depth() {
        let g = ReservoirWedge::new(1e-9_f64, 0.01, 50.0, 2.0).unwrap();
        assert!(g.plan_area < 1e-4 && g.volume < 1e-6);
        assert!(ReservoirWedge::new(10.0_f64, 0.0, 50.0, 2.0).is_err());
        let g32 = ReservoirWedge::new(10.0_f32, 0.01, 50.0, 2.0).unwrap();
        assert!((g32.plan_area - 70_000.0).abs() < 1.0);
    }
}
