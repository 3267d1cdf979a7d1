//! Switched capacitor bank: unit ratings, binary sizing, zero-crossing gated
//! engagement and switch health.

use std::fmt;
use std::str::FromStr;

use crate::bits::SwitchBits;
use crate::error::{Error, Result};
use crate::phasor::SupplySpec;

/// Slack when snapping times onto the zero-crossing grid.
const GRID_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connection {
    Delta,
    Star,
}

impl Connection {
    /// VAr per unit of `V_L²·ω·C`.
    fn factor(self) -> f64 {
        match self {
            Connection::Delta => 3.0,
            Connection::Star => 1.0,
        }
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connection::Delta => "delta",
            Connection::Star => "star",
        })
    }
}

impl FromStr for Connection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(Connection::Delta),
            "star" | "wye" => Ok(Connection::Star),
            other => Err(format!("unknown connection `{other}` (expected delta or star)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Health {
    #[default]
    Ok,
    StuckOpen,
    StuckClosed,
}

impl fmt::Display for Health {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Health::Ok => "ok",
            Health::StuckOpen => "stuck_open",
            Health::StuckClosed => "stuck_closed",
        })
    }
}

impl FromStr for Health {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ok" => Ok(Health::Ok),
            "stuck_open" => Ok(Health::StuckOpen),
            "stuck_closed" => Ok(Health::StuckClosed),
            other => Err(format!("unknown health `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitorUnit {
    /// Microfarads.
    pub capacitance: f64,
    pub connection: Connection,
    /// Switch position as driven by the relay.
    pub engaged: bool,
    pub health: Health,
}

impl CapacitorUnit {
    pub fn new(capacitance_uf: f64, connection: Connection) -> Result<Self> {
        if !(capacitance_uf.is_finite() && capacitance_uf > 0.0) {
            return Err(Error::Domain {
                quantity: "capacitance",
                value: capacitance_uf,
                expected: "> 0 uF",
            });
        }
        Ok(Self {
            capacitance: capacitance_uf,
            connection,
            engaged: false,
            health: Health::Ok,
        })
    }

    /// Whether the unit is actually connected, after health is taken into account.
    pub fn effectively_engaged(&self) -> bool {
        match self.health {
            Health::Ok => self.engaged,
            Health::StuckOpen => false,
            Health::StuckClosed => true,
        }
    }

    /// Three-phase VAr the unit injects when connected.
    pub fn rated_reactive_power(&self, supply: &SupplySpec) -> f64 {
        let v = supply.line_voltage();
        v * v * supply.omega() * self.capacitance * 1e-6 * self.connection.factor()
    }
}

pub fn unit_reactive_power(unit: &CapacitorUnit, supply: &SupplySpec) -> f64 {
    if unit.effectively_engaged() {
        unit.rated_reactive_power(supply)
    } else {
        0.0
    }
}

/// Capacitance in microfarads that yields `q` three-phase VAr.
pub fn capacitance_for(q: f64, connection: Connection, supply: &SupplySpec) -> f64 {
    let v = supply.line_voltage();
    q / (connection.factor() * v * v * supply.omega()) * 1e6
}

/// `n_steps` units whose ratings are `q_step·2^k` with `q_step = q_max / (2^n − 1)`.
pub fn size_binary_bank(
    q_max: f64,
    n_steps: usize,
    supply: &SupplySpec,
    connection: Connection,
) -> Result<Vec<CapacitorUnit>> {
    if !(q_max.is_finite() && q_max > 0.0) {
        return Err(Error::Domain {
            quantity: "q_max",
            value: q_max,
            expected: "> 0 VAr",
        });
    }
    if !(1..=16).contains(&n_steps) {
        return Err(Error::Domain {
            quantity: "binary steps",
            value: n_steps as f64,
            expected: "1..=16",
        });
    }
    let q_step = q_max / ((1u32 << n_steps) - 1) as f64;
    (0..n_steps)
        .map(|k| {
            let q = q_step * (1u32 << k) as f64;
            CapacitorUnit::new(capacitance_for(q, connection, supply), connection)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchAction {
    Engage,
    Disengage,
}

/// A relay closing or opening.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchEvent {
    pub time: f64,
    pub unit: usize,
    pub action: SwitchAction,
}

/// Time of the first voltage zero crossing at or after `now`.
pub fn next_zero_crossing(now: f64, supply: &SupplySpec) -> f64 {
    let half = supply.half_period();
    let k = (now / half - GRID_EPS).ceil().max(0.0);
    k * half
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankState {
    units: Vec<CapacitorUnit>,
    command_bits: SwitchBits,
    readback_bits: SwitchBits,
    pending: Vec<(usize, f64)>,
}

impl BankState {
    pub fn new(units: Vec<CapacitorUnit>) -> Result<Self> {
        if units.len() > SwitchBits::MAX_LEN {
            return Err(Error::validation(
                "bank.units",
                format!("at most {} units supported, got {}", SwitchBits::MAX_LEN, units.len()),
            ));
        }
        let n = units.len();
        let mut state = Self {
            units,
            command_bits: SwitchBits::zeros(n),
            readback_bits: SwitchBits::zeros(n),
            pending: Vec::new(),
        };
        for i in 0..n {
            state.command_bits.set(i, state.units[i].engaged);
        }
        state.refresh_readback();
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[CapacitorUnit] {
        &self.units
    }

    pub fn command_bits(&self) -> SwitchBits {
        self.command_bits
    }

    pub fn readback_bits(&self) -> SwitchBits {
        self.readback_bits
    }

    /// Queued engagements as `(unit, scheduled time)`.
    pub fn pending_engagements(&self) -> &[(usize, f64)] {
        &self.pending
    }

    /// Rated three-phase VAr per unit, regardless of state.
    pub fn rated_weights(&self, supply: &SupplySpec) -> Vec<f64> {
        self.units.iter().map(|u| u.rated_reactive_power(supply)).collect()
    }

    fn refresh_readback(&mut self) {
        for (i, u) in self.units.iter().enumerate() {
            self.readback_bits.set(i, u.effectively_engaged());
        }
    }

    /// Overrides a unit's health, e.g. for fault injection.
    pub fn with_health(mut self, unit: usize, health: Health) -> Result<Self> {
        let n = self.len();
        let u = self
            .units
            .get_mut(unit)
            .ok_or(Error::LengthMismatch { left: unit + 1, right: n })?;
        u.health = health;
        self.refresh_readback();
        Ok(self)
    }

    /// Applies a new command vector at time `now`.
    ///
    /// Openings take effect immediately. Closings are queued for the next voltage
    /// zero crossing at or after `now`; when `now` sits on the grid they apply at once.
    pub fn command_switches(self, desired: SwitchBits, now: f64, supply: &SupplySpec) -> Result<Self> {
        Ok(self.command_switches_logged(desired, now, supply)?.0)
    }

    /// As [`command_switches`](Self::command_switches), also returning the
    /// switch events that took effect at `now`.
    pub fn command_switches_logged(
        mut self,
        desired: SwitchBits,
        now: f64,
        supply: &SupplySpec,
    ) -> Result<(Self, Vec<SwitchEvent>)> {
        if desired.len() != self.len() {
            return Err(Error::LengthMismatch {
                left: desired.len(),
                right: self.len(),
            });
        }
        let mut events = Vec::new();
        let changed = desired.xor(self.command_bits);
        for i in changed.ones_iter() {
            if desired.get(i) {
                let at = next_zero_crossing(now, supply);
                self.pending.push((i, at));
            } else {
                self.pending.retain(|&(u, _)| u != i);
                if self.units[i].engaged {
                    self.units[i].engaged = false;
                    events.push(SwitchEvent {
                        time: now,
                        unit: i,
                        action: SwitchAction::Disengage,
                    });
                }
            }
        }
        self.command_bits = desired;
        let (state, mut fired) = self.advance(now);
        events.append(&mut fired);
        Ok((state, events))
    }

    /// Makes every queued engagement due at or before `now` effective.
    pub fn advance(mut self, now: f64) -> (Self, Vec<SwitchEvent>) {
        let mut events = Vec::new();
        let mut keep = Vec::with_capacity(self.pending.len());
        for (unit, at) in std::mem::take(&mut self.pending) {
            if at <= now + GRID_EPS {
                if !self.units[unit].engaged {
                    self.units[unit].engaged = true;
                    events.push(SwitchEvent {
                        time: at,
                        unit,
                        action: SwitchAction::Engage,
                    });
                }
            } else {
                keep.push((unit, at));
            }
        }
        self.pending = keep;
        self.refresh_readback();
        (self, events)
    }

    /// Earliest queued engagement time, if any.
    pub fn next_pending_time(&self) -> Option<f64> {
        self.pending.iter().map(|&(_, t)| t).reduce(f64::min)
    }
}

pub fn bank_reactive_power(state: &BankState, supply: &SupplySpec) -> f64 {
    state.units.iter().map(|u| unit_reactive_power(u, supply)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn lab() -> SupplySpec {
        SupplySpec::laboratory()
    }

    fn engaged(c: f64, conn: Connection) -> CapacitorUnit {
        let mut u = CapacitorUnit::new(c, conn).unwrap();
        u.engaged = true;
        u
    }

    #[test]
    fn unit_ratings() {
        let s = lab();
        assert_abs_diff_eq!(unit_reactive_power(&engaged(20.0, Connection::Delta), &s), 3015.9289, epsilon = 1e-3);
        assert_abs_diff_eq!(unit_reactive_power(&engaged(20.0, Connection::Star), &s), 1005.3096, epsilon = 1e-3);
        let idle = CapacitorUnit::new(20.0, Connection::Delta).unwrap();
        assert_eq!(unit_reactive_power(&idle, &s), 0.0);
        assert!(CapacitorUnit::new(0.0, Connection::Star).is_err());
    }

    #[test]
    fn health_overrides_switch_position() {
        let s = lab();
        let mut open = engaged(20.0, Connection::Star);
        open.health = Health::StuckOpen;
        assert_eq!(unit_reactive_power(&open, &s), 0.0);
        let mut closed = CapacitorUnit::new(20.0, Connection::Star).unwrap();
        closed.health = Health::StuckClosed;
        assert!(unit_reactive_power(&closed, &s) > 1000.0);
    }

    #[test]
    fn bank_totals() {
        let s = lab();
        let idle = BankState::new(vec![CapacitorUnit::new(20.0, Connection::Star).unwrap(); 3]).unwrap();
        assert_eq!(bank_reactive_power(&idle, &s), 0.0);
        let combo_c = BankState::new(vec![engaged(20.0, Connection::Star); 3]).unwrap();
        assert_abs_diff_eq!(bank_reactive_power(&combo_c, &s), 3015.9289, epsilon = 1e-3);

        let bank = BankState::new(vec![CapacitorUnit::new(20.0, Connection::Star).unwrap()])
            .unwrap()
            .with_health(0, Health::StuckOpen)
            .unwrap()
            .command_switches(SwitchBits::ones(1), 0.0, &s)
            .unwrap();
        assert!(bank.command_bits().get(0));
        assert!(!bank.readback_bits().get(0));
        assert_eq!(bank_reactive_power(&bank, &s), 0.0);
    }

    #[test]
    fn binary_sizing() {
        let s = lab();
        let units = size_binary_bank(2100.0, 3, &s, Connection::Star).unwrap();
        let q: Vec<f64> = units.iter().map(|u| u.rated_reactive_power(&s)).collect();
        for (got, want) in q.iter().zip([300.0, 600.0, 1200.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
        for (u, want) in units.iter().zip([5.968310, 11.936621, 23.873241]) {
            assert_abs_diff_eq!(u.capacitance, want, epsilon = 1e-6);
        }
        let single = size_binary_bank(777.0, 1, &s, Connection::Delta).unwrap();
        assert_abs_diff_eq!(single[0].rated_reactive_power(&s), 777.0, epsilon = 1e-9);
        assert!(size_binary_bank(0.0, 3, &s, Connection::Star).is_err());
        assert!(size_binary_bank(100.0, 17, &s, Connection::Star).is_err());
    }

    #[test]
    fn engagement_waits_for_zero_crossing() {
        let s = lab();
        let bank = BankState::new(vec![CapacitorUnit::new(10.0, Connection::Star).unwrap()]).unwrap();
        let (bank, ev) = bank.command_switches_logged(SwitchBits::ones(1), 0.003, &s).unwrap();
        assert!(ev.is_empty());
        assert_eq!(bank.pending_engagements(), &[(0, 0.01)]);
        assert!(bank.command_bits().get(0) && !bank.readback_bits().get(0));
        let (bank, ev) = bank.advance(0.0099);
        assert!(ev.is_empty());
        let (bank, ev) = bank.advance(0.01);
        assert_eq!(ev, vec![SwitchEvent { time: 0.01, unit: 0, action: SwitchAction::Engage }]);
        assert!(bank.readback_bits().get(0));

        // on the grid: immediate
        let fresh = BankState::new(vec![CapacitorUnit::new(10.0, Connection::Star).unwrap()]).unwrap();
        let (fresh, ev) = fresh.command_switches_logged(SwitchBits::ones(1), 0.01, &s).unwrap();
        assert_eq!(ev[0].time, 0.01);
        assert!(fresh.readback_bits().get(0));

        // opening is immediate, off the grid
        let (opened, ev) = fresh.command_switches_logged(SwitchBits::zeros(1), 0.013, &s).unwrap();
        assert_eq!(ev, vec![SwitchEvent { time: 0.013, unit: 0, action: SwitchAction::Disengage }]);
        assert!(!opened.readback_bits().get(0));
    }

    #[test]
    fn disengage_cancels_pending() {
        let s = lab();
        let bank = BankState::new(vec![CapacitorUnit::new(10.0, Connection::Star).unwrap()]).unwrap();
        let bank = bank.command_switches(SwitchBits::ones(1), 0.002, &s).unwrap();
        let bank = bank.command_switches(SwitchBits::zeros(1), 0.004, &s).unwrap();
        assert!(bank.pending_engagements().is_empty());
        let (bank, ev) = bank.advance(0.02);
        assert!(ev.is_empty());
        assert!(!bank.readback_bits().get(0));
    }

    #[test]
    fn zero_crossing_grid() {
        let s = lab();
        assert_abs_diff_eq!(next_zero_crossing(0.003, &s), 0.01, epsilon = 1e-15);
        assert_eq!(next_zero_crossing(0.0, &s), 0.0);
        assert_abs_diff_eq!(next_zero_crossing(0.07, &s), 0.07, epsilon = 1e-12);
        assert_abs_diff_eq!(next_zero_crossing(0.0701, &s), 0.08, epsilon = 1e-12);
        assert_abs_diff_eq!(next_zero_crossing(0.0001, &SupplySpec::new(400.0, 60.0).unwrap()), 1.0 / 120.0, epsilon = 1e-15);
    }

    #[test]
    fn length_mismatch_rejected() {
        let bank = BankState::new(vec![CapacitorUnit::new(1.0, Connection::Star).unwrap()]).unwrap();
        assert!(bank.command_switches(SwitchBits::zeros(2), 0.0, &lab()).is_err());
    }

    #[test]
    fn binary_completeness() {
        let s = lab();
        for n in 1..=8usize {
            let units = size_binary_bank(1000.0, n, &s, Connection::Star).unwrap();
            let w: Vec<f64> = units.iter().map(|u| u.rated_reactive_power(&s)).collect();
            let step = 1000.0 / ((1u32 << n) - 1) as f64;
            let mut reached = vec![false; 1 << n];
            for mask in 0u64..(1 << n) {
                let total = SwitchBits::from_word(mask, n).weighted_sum(&w);
                let k = (total / step).round();
                assert!((total - k * step).abs() < 1e-6);
                reached[k as usize] = true;
            }
            assert!(reached.iter().all(|&r| r), "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn delta_is_three_star(c in 0.1f64..200.0, v in 100.0f64..1000.0, f in 40.0f64..70.0) {
            let s = SupplySpec::new(v, f).unwrap();
            let d = CapacitorUnit::new(c, Connection::Delta).unwrap().rated_reactive_power(&s);
            let y = CapacitorUnit::new(c, Connection::Star).unwrap().rated_reactive_power(&s);
            prop_assert_eq!(d, 3.0 * y);
        }

        #[test]
        fn stuck_units_ignore_commands(words in proptest::collection::vec(0u64..16, 1..12)) {
            let s = lab();
            let mut bank = BankState::new(vec![CapacitorUnit::new(5.0, Connection::Star).unwrap(); 4]).unwrap()
                .with_health(1, Health::StuckOpen).unwrap()
                .with_health(2, Health::StuckClosed).unwrap();
            let r1 = bank.units()[1].rated_reactive_power(&s);
            for (k, w) in words.into_iter().enumerate() {
                bank = bank.command_switches(SwitchBits::from_word(w, 4), k as f64 * 0.01, &s).unwrap();
                prop_assert_eq!(unit_reactive_power(&bank.units()[1], &s), 0.0);
                prop_assert_eq!(unit_reactive_power(&bank.units()[2], &s), r1);
                prop_assert!(!bank.readback_bits().get(1));
                prop_assert!(bank.readback_bits().get(2));
            }
        }

        #[test]
        fn binary_weights_double(q in 1.0f64..1e5, n in 1usize..=16) {
            let s = lab();
            let w: Vec<f64> = size_binary_bank(q, n, &s, Connection::Delta).unwrap()
                .iter().map(|u| u.rated_reactive_power(&s)).collect();
            for pair in w.windows(2) {
                prop_assert!((pair[1] - 2.0 * pair[0]).abs() <= 1e-9 * pair[1]);
            }
            prop_assert!((w.iter().sum::<f64>() - q).abs() <= 1e-9 * q);
        }
    }
}
