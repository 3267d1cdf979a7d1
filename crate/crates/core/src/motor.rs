//! Table-driven surrogate of the 3.7 kW induction motor.

use crate::error::{Error, Result};
use crate::phasor::{OperatingPoint, SupplySpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRow {
    pub line_current_rms: f64,
    pub power_factor: f64,
    pub speed: f64,
}

impl LoadRow {
    pub const fn new(line_current_rms: f64, power_factor: f64, speed: f64) -> Self {
        Self {
            line_current_rms,
            power_factor,
            speed,
        }
    }
}

/// Uncompensated motor measurements at 400 V: current, pf, speed.
pub const LABORATORY_ROWS: [LoadRow; 5] = [
    LoadRow::new(3.0, 0.24, 1447.0),
    LoadRow::new(4.0, 0.28, 1467.0),
    LoadRow::new(5.0, 0.37, 1465.0),
    LoadRow::new(6.0, 0.40, 1446.0),
    LoadRow::new(7.0, 0.41, 1441.0),
];

/// Validated knots with strictly increasing current.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTable {
    rows: Vec<LoadRow>,
}

impl Default for LoadTable {
    fn default() -> Self {
        Self {
            rows: LABORATORY_ROWS.to_vec(),
        }
    }
}

impl LoadTable {
    /// Validates `rows`; they must already be in increasing current order.
    pub fn from_rows(rows: impl Into<Vec<LoadRow>>) -> Result<Self> {
        let rows = rows.into();
        for (i, row) in rows.iter().enumerate() {
            if !(row.power_factor > 0.0 && row.power_factor <= 1.0) {
                return Err(Error::validation(
                    format!("motor.row[{i}]"),
                    format!("power factor {} outside (0, 1]", row.power_factor),
                ));
            }
            if !(row.line_current_rms.is_finite() && row.line_current_rms >= 0.0) {
                return Err(Error::validation(
                    format!("motor.row[{i}]"),
                    format!("current {} A must be finite and non-negative", row.line_current_rms),
                ));
            }
            if i > 0 {
                let prev = rows[i - 1].line_current_rms;
                if row.line_current_rms == prev {
                    return Err(Error::validation(
                        format!("motor.row[{i}]"),
                        format!("duplicate current {prev} A"),
                    ));
                }
                if row.line_current_rms < prev {
                    return Err(Error::validation(
                        format!("motor.row[{i}]"),
                        format!("current {} A is not increasing (previous {prev} A)", row.line_current_rms),
                    ));
                }
            }
        }
        if rows.len() < 2 {
            return Err(Error::validation(
                "motor.rows",
                format!("need at least 2 rows, got {}", rows.len()),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[LoadRow] {
        &self.rows
    }

    pub fn min_current(&self) -> f64 {
        self.rows[0].line_current_rms
    }

    pub fn max_current(&self) -> f64 {
        self.rows[self.rows.len() - 1].line_current_rms
    }

    /// Linear interpolation of pf and speed; no extrapolation.
    pub fn lookup_point(&self, current: f64, supply: &SupplySpec) -> Result<OperatingPoint> {
        let (lo, hi) = (self.min_current(), self.max_current());
        if !(current >= lo && current <= hi) {
            return Err(Error::OutOfTable {
                current,
                min: lo,
                max: hi,
            });
        }
        // first knot with current >= requested
        let idx = self.rows.partition_point(|r| r.line_current_rms < current);
        let (pf, speed) = if self.rows[idx].line_current_rms == current {
            (self.rows[idx].power_factor, self.rows[idx].speed)
        } else {
            let (a, b) = (&self.rows[idx - 1], &self.rows[idx]);
            let w = (current - a.line_current_rms) / (b.line_current_rms - a.line_current_rms);
            (
                a.power_factor + w * (b.power_factor - a.power_factor),
                a.speed + w * (b.speed - a.speed),
            )
        };
        OperatingPoint::derive(supply, current, pf, Some(speed))
    }
}
