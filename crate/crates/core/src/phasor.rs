//! Balanced three-phase power-triangle arithmetic.
//!
//! Quantities are RMS; angles are radians. Reactive power is positive for an
//! inductive (lagging) load and negative when the net load is capacitive.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Three-phase source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplySpec {
    line_voltage_rms: f64,
    frequency: f64,
}

impl SupplySpec {
    pub const PHASE_COUNT: usize = 3;

    pub fn new(line_voltage_rms: f64, frequency: f64) -> Result<Self> {
        if !(line_voltage_rms.is_finite() && line_voltage_rms > 0.0) {
            return Err(Error::Domain {
                quantity: "line voltage",
                value: line_voltage_rms,
                expected: "> 0 V",
            });
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::Domain {
                quantity: "frequency",
                value: frequency,
                expected: "> 0 Hz",
            });
        }
        Ok(Self {
            line_voltage_rms,
            frequency,
        })
    }

    /// The 400 V / 50 Hz laboratory supply.
    pub fn laboratory() -> Self {
        Self {
            line_voltage_rms: 400.0,
            frequency: 50.0,
        }
    }

    pub fn line_voltage(&self) -> f64 {
        self.line_voltage_rms
    }

    pub fn phase_voltage(&self) -> f64 {
        self.line_voltage_rms / SQRT_3
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// Spacing of voltage zero crossings (both slopes).
    pub fn half_period(&self) -> f64 {
        0.5 / self.frequency
    }

    /// Apparent power drawn at `current` amperes of line current.
    pub fn apparent_power(&self, current: f64) -> f64 {
        SQRT_3 * self.line_voltage_rms * current
    }
}

/// One load state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub line_current_rms: f64,
    pub power_factor: f64,
    pub lagging: bool,
    pub real_power: f64,
    /// Signed: negative means net capacitive.
    pub reactive_power: f64,
    pub speed: Option<f64>,
}

impl OperatingPoint {
    /// Builds a lagging point from line current and power factor, deriving P and Q.
    pub fn derive(supply: &SupplySpec, current: f64, pf: f64, speed: Option<f64>) -> Result<Self> {
        Ok(Self {
            line_current_rms: current,
            power_factor: pf,
            lagging: true,
            real_power: real_power(supply, current, pf)?,
            reactive_power: reactive_power(supply, current, pf)?,
            speed,
        })
    }

    pub fn apparent_power(&self) -> f64 {
        self.real_power.hypot(self.reactive_power)
    }

    /// Signed phase angle: positive when current lags voltage.
    pub fn phase_lag(&self) -> f64 {
        let phi = self.power_factor.clamp(0.0, 1.0).acos();
        if self.lagging {
            phi
        } else {
            -phi
        }
    }
}

fn check_pf(pf: f64) -> Result<()> {
    if pf > 0.0 && pf <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity: "power factor",
            value: pf,
            expected: "0 < pf <= 1",
        })
    }
}

fn check_current(current: f64) -> Result<()> {
    if current >= 0.0 && current.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            quantity: "line current",
            value: current,
            expected: ">= 0 A",
        })
    }
}

pub fn phase_angle_from_pf(pf: f64) -> Result<f64> {
    check_pf(pf)?;
    Ok(pf.acos())
}

pub fn pf_from_phase_angle(phi: f64) -> f64 {
    phi.cos()
}

/// Three-phase reactive power, `√3·V_L·I·sin φ`.
pub fn reactive_power(supply: &SupplySpec, current: f64, pf: f64) -> Result<f64> {
    check_current(current)?;
    check_pf(pf)?;
    Ok(supply.apparent_power(current) * (1.0 - pf * pf).sqrt())
}

pub fn real_power(supply: &SupplySpec, current: f64, pf: f64) -> Result<f64> {
    check_current(current)?;
    check_pf(pf)?;
    Ok(supply.apparent_power(current) * pf)
}

/// Reactive power of one phase, `V_ph·I·sin φ`, for unbalanced per-phase sensing.
pub fn phase_reactive_power(supply: &SupplySpec, current: f64, pf: f64) -> Result<f64> {
    check_current(current)?;
    check_pf(pf)?;
    Ok(supply.phase_voltage() * current * (1.0 - pf * pf).sqrt())
}

/// Reactive power from a lag angle instead of a power factor. Angles beyond
/// [0, π/2] are clamped, so the result is never negative.
pub fn reactive_power_at_angle(apparent_power: f64, phi: f64) -> f64 {
    apparent_power.max(0.0) * phi.clamp(0.0, FRAC_PI_2).sin()
}

/// The operating point seen by the supply once `q_cap` VAr of capacitance is engaged.
///
/// The residual reactive power may go negative (leading); enforcing the
/// non-leading policy is the caller's job.
pub fn corrected_point(supply: &SupplySpec, uncompensated: &OperatingPoint, q_cap: f64) -> OperatingPoint {
    if q_cap == 0.0 {
        return *uncompensated;
    }
    let p = uncompensated.real_power;
    let q_res = uncompensated.reactive_power - q_cap;
    let s = p.hypot(q_res);
    let power_factor = if s > 0.0 { p / s } else { 1.0 };
    OperatingPoint {
        line_current_rms: s / (SQRT_3 * supply.line_voltage()),
        power_factor,
        lagging: q_res >= 0.0,
        real_power: p,
        reactive_power: q_res,
        speed: uncompensated.speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn lab() -> SupplySpec {
        SupplySpec::laboratory()
    }

    #[test]
    fn angle_examples() {
        assert_eq!(phase_angle_from_pf(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(phase_angle_from_pf(0.5).unwrap(), PI / 3.0, epsilon = 1e-12);
        // 76.1135° computed independently
        assert_abs_diff_eq!(phase_angle_from_pf(0.24).unwrap(), 1.328_430_475_755_933, epsilon = 1e-12);
        assert!(phase_angle_from_pf(0.0).is_err());
        assert!(phase_angle_from_pf(1.01).is_err());
        assert!(phase_angle_from_pf(f64::NAN).is_err());
    }

    #[test]
    fn reactive_power_matches_measured_rows() {
        let s = lab();
        assert_abs_diff_eq!(reactive_power(&s, 3.0, 0.24).unwrap(), 2017.8, epsilon = 0.5);
        assert_abs_diff_eq!(reactive_power(&s, 7.0, 0.41).unwrap(), 4423.4, epsilon = 0.5);
        assert_abs_diff_eq!(reactive_power(&s, 6.0, 0.99).unwrap(), 586.41, epsilon = 0.5);
        assert_eq!(reactive_power(&s, 5.0, 1.0).unwrap(), 0.0);
        assert!(reactive_power(&s, -1.0, 0.5).is_err());
    }

    #[test]
    fn real_power_examples() {
        let s = lab();
        assert_abs_diff_eq!(real_power(&s, 4.0, 0.28).unwrap(), 775.9588, epsilon = 1e-3);
        assert_eq!(real_power(&s, 0.0, 0.9).unwrap(), 0.0);
        assert_abs_diff_eq!(real_power(&s, 6.0, 0.40).unwrap(), 1662.7688, epsilon = 1e-3);
    }

    #[test]
    fn supply_rejects_bad_values() {
        assert!(SupplySpec::new(0.0, 50.0).is_err());
        assert!(SupplySpec::new(400.0, -1.0).is_err());
        assert_eq!(SupplySpec::new(400.0, 50.0).unwrap(), lab());
        assert_eq!(SupplySpec::PHASE_COUNT, 3);
    }

    #[test]
    fn corrected_to_unity() {
        let s = lab();
        let p = OperatingPoint::derive(&s, 4.0, 0.28, None).unwrap();
        let c = corrected_point(&s, &p, 2660.43);
        assert_abs_diff_eq!(c.power_factor, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.line_current_rms, 1.12, epsilon = 1e-6);
        assert!(c.lagging);
    }

    #[test]
    fn corrected_partial() {
        let s = lab();
        let p = OperatingPoint::derive(&s, 6.0, 0.40, Some(1446.0)).unwrap();
        let c = corrected_point(&s, &p, 3223.46);
        assert_abs_diff_eq!(c.reactive_power, 586.42, epsilon = 0.05);
        assert_abs_diff_eq!(c.power_factor, 0.943, epsilon = 5e-4);
        assert_eq!(c.speed, Some(1446.0));
    }

    #[test]
    fn zero_compensation_is_identity() {
        let s = lab();
        let p = OperatingPoint::derive(&s, 5.0, 0.37, None).unwrap();
        assert_eq!(corrected_point(&s, &p, 0.0), p);
    }

    #[test]
    fn over_compensation_leads() {
        let s = lab();
        let p = OperatingPoint::derive(&s, 3.0, 0.24, None).unwrap();
        let c = corrected_point(&s, &p, 3267.3);
        assert!(!c.lagging);
        assert!(c.reactive_power < 0.0);
        assert!(c.phase_lag() < 0.0);
    }

    proptest! {
        #[test]
        fn triangle_identity(i in 0.0f64..20.0, pf in 1e-3f64..=1.0) {
            let s = lab();
            let p = OperatingPoint::derive(&s, i, pf, None).unwrap();
            let lhs = p.real_power.powi(2) + p.reactive_power.powi(2);
            let rhs = s.apparent_power(i).powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1e-300));
        }

        #[test]
        fn q_decreases_with_pf(i in 0.1f64..20.0, a in 1e-3f64..1.0, b in 1e-3f64..1.0) {
            prop_assume!(a != b);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let s = lab();
            prop_assert!(reactive_power(&s, i, hi).unwrap() < reactive_power(&s, i, lo).unwrap());
        }

        #[test]
        fn corrected_point_conserves_triangle(i in 0.5f64..10.0, pf in 0.05f64..=1.0, q in 0.0f64..6000.0) {
            let s = lab();
            let p = OperatingPoint::derive(&s, i, pf, None).unwrap();
            let c = corrected_point(&s, &p, q);
            let lhs = s.apparent_power(c.line_current_rms).powi(2);
            let rhs = c.real_power.powi(2) + c.reactive_power.powi(2);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
            prop_assert_eq!(c.lagging, c.reactive_power >= 0.0);
        }
    }

    #[test]
    fn angle_round_trip_dense_grid() {
        for k in 1..=10_000 {
            let pf = k as f64 / 10_000.0;
            let back = pf_from_phase_angle(phase_angle_from_pf(pf).unwrap());
            assert!((back - pf).abs() <= 1e-12, "pf {pf} -> {back}");
        }
    }
}
