//! PLC scan-cycle controller.
//!
//! One scan reads the I/O image, checks command against readback bits, turns
//! the XOR duty and peak-current code into lagging VAr, picks a capacitor
//! combination and passes it through a debounce filter before writing it out.

use std::fmt;
use std::str::FromStr;

use crate::bank::{BankState, Health};
use crate::bits::SwitchBits;
use crate::error::{Error, Result};
use crate::phasor::{self, SupplySpec};
use crate::select;
use crate::signal::{self, FrontEnd};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Preset combination per load-current region.
    Lookup,
    /// Largest bank VAr not exceeding the measured load VAr.
    Greedy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Lookup => "lookup",
            Mode::Greedy => "greedy",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "lookup" => Ok(Mode::Lookup),
            "greedy" => Ok(Mode::Greedy),
            other => Err(format!("unknown mode `{other}` (expected lookup or greedy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    A,
    B,
    C,
}

impl Region {
    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "A" | "a" => Ok(Region::A),
            "B" | "b" => Ok(Region::B),
            "C" | "c" => Ok(Region::C),
            other => Err(format!("unknown region `{other}`")),
        }
    }
}

/// Unit indices of the default lookup bank, see [`crate::scenario::lookup_bank`].
pub const LOOKUP_COMBO_A: [usize; 3] = [0, 1, 2];
pub const LOOKUP_COMBO_B: [usize; 4] = [3, 4, 5, 6];
pub const LOOKUP_COMBO_C: [usize; 3] = [5, 6, 7];
pub const LOOKUP_BANK_LEN: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    pub mode: Mode,
    /// `[A/B edge, end of B as measured, B/C edge]`, amperes.
    pub region_thresholds: [f64; 3],
    /// Region assigned to currents between the second and third thresholds.
    pub gap_region: Region,
    pub combo_presets: [SwitchBits; 3],
    /// Reported only; greedy mode always compensates as far as it can without leading.
    pub target_pf: f64,
    /// Minimum VAr gain before a feasible command is replaced. `None` means half
    /// the smallest bank step.
    pub deadband: Option<f64>,
    pub debounce_scans: u32,
    pub fault_scans: u32,
    pub scan_period: f64,
    pub per_phase: bool,
    /// Shrink the measured VAr by the front end's worst-case error before
    /// selecting, so quantisation can never push the bank into leading.
    pub guard_band: bool,
    pub front_end: FrontEnd,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let preset = |idx: &[usize]| SwitchBits::from_indices(LOOKUP_BANK_LEN, idx.iter().copied()).unwrap();
        Self {
            mode: Mode::Greedy,
            region_thresholds: [3.9, 5.2, 6.0],
            gap_region: Region::B,
            combo_presets: [preset(&LOOKUP_COMBO_A), preset(&LOOKUP_COMBO_B), preset(&LOOKUP_COMBO_C)],
            target_pf: 0.95,
            deadband: None,
            debounce_scans: 5,
            fault_scans: 3,
            scan_period: 0.01,
            per_phase: false,
            guard_band: true,
            front_end: FrontEnd::default(),
        }
    }
}

impl ControllerConfig {
    /// Checks the configuration against the bank it will drive.
    pub fn validate(&self, supply: &SupplySpec, bank_len: usize) -> Result<()> {
        let t = self.region_thresholds;
        if !(t[0] < t[1] && t[1] < t[2]) || t.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("controller.thresholds", "must be finite and strictly increasing"));
        }
        if !(self.target_pf > 0.0 && self.target_pf <= 1.0) {
            return Err(Error::validation("controller.target_pf", "must be in (0, 1]"));
        }
        if let Some(d) = self.deadband {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::validation("controller.deadband", "must be >= 0 VAr"));
            }
        }
        if self.debounce_scans < 1 {
            return Err(Error::validation("controller.debounce_scans", "must be >= 1"));
        }
        if self.fault_scans < 1 {
            return Err(Error::validation("controller.fault_scans", "must be >= 1"));
        }
        if !(self.scan_period.is_finite() && self.scan_period > 0.0) {
            return Err(Error::validation("controller.scan_period", "must be > 0 s"));
        }
        // A healthy closing may legitimately lag its command by up to half a cycle.
        if (self.fault_scans - 1) as f64 * self.scan_period + 1e-12 < supply.half_period() {
            return Err(Error::validation(
                "controller.fault_scans",
                format!(
                    "{} scans of {} s cannot outlast the {} s zero-crossing delay",
                    self.fault_scans,
                    self.scan_period,
                    supply.half_period()
                ),
            ));
        }
        if self.mode == Mode::Lookup {
            if self.per_phase {
                return Err(Error::validation("controller.per_phase", "lookup presets are whole-bank; use greedy mode"));
            }
            for (name, p) in ["combo_a", "combo_b", "combo_c"].iter().zip(&self.combo_presets) {
                if p.len() != bank_len {
                    return Err(Error::validation(
                        format!("controller.{name}"),
                        format!("preset covers {} units but the bank has {bank_len}", p.len()),
                    ));
                }
            }
        }
        if self.per_phase && !bank_len.is_multiple_of(3) {
            return Err(Error::validation("bank", format!("per-phase mode needs a multiple of 3 units, got {bank_len}")));
        }
        self.front_end.validate(supply)
    }

    fn effective_deadband(&self, weights: &[f64]) -> f64 {
        self.deadband
            .unwrap_or_else(|| 0.5 * weights.iter().cloned().fold(f64::INFINITY, f64::min))
            .max(0.0)
    }
}

/// The PLC's I/O snapshot for one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanImage {
    pub duty_accumulator: f64,
    pub analog_code: u32,
    pub digital_out: SwitchBits,
    pub readback_in: SwitchBits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SwitchFault {
    pub unit: usize,
    pub health: Health,
}

impl fmt::Display for SwitchFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}:{}", self.unit, self.health)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// Command currently written to the digital outputs.
    pub command: SwitchBits,
    pub pending_mask: Option<SwitchBits>,
    pub stable_count: u32,
    pub mismatch_counts: Vec<u32>,
    pub latched_open: SwitchBits,
    pub latched_closed: SwitchBits,
    pub measurement_fault: bool,
}

impl ControllerState {
    pub fn new(bank_len: usize) -> Self {
        Self {
            command: SwitchBits::zeros(bank_len),
            pending_mask: None,
            stable_count: 0,
            mismatch_counts: vec![0; bank_len],
            latched_open: SwitchBits::zeros(bank_len),
            latched_closed: SwitchBits::zeros(bank_len),
            measurement_fault: false,
        }
    }

    pub fn latched(&self) -> SwitchBits {
        self.latched_open.or(self.latched_closed)
    }

    pub fn faults(&self) -> Vec<SwitchFault> {
        (0..self.command.len())
            .filter_map(|unit| {
                if self.latched_open.get(unit) {
                    Some(SwitchFault { unit, health: Health::StuckOpen })
                } else if self.latched_closed.get(unit) {
                    Some(SwitchFault { unit, health: Health::StuckClosed })
                } else {
                    None
                }
            })
            .collect()
    }
}

/// What the controller inferred from its inputs during one scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadEstimate {
    pub current_rms: f64,
    pub phase_angle: f64,
    pub power_factor: f64,
    pub reactive_power: f64,
    /// VAr the selection was allowed to cover.
    pub compensable: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub desired: SwitchBits,
    /// `None` when the inputs were unusable.
    pub estimate: Option<LoadEstimate>,
    pub new_faults: Vec<SwitchFault>,
}

/// Counts command/readback disagreements and latches units that disagree for
/// `fault_scans` consecutive scans.
pub fn detect_switch_fault(
    command: SwitchBits,
    readback: SwitchBits,
    mut state: ControllerState,
    cfg: &ControllerConfig,
) -> Result<(Vec<SwitchFault>, ControllerState)> {
    if command.len() != readback.len() || command.len() != state.mismatch_counts.len() {
        return Err(Error::LengthMismatch {
            left: command.len(),
            right: readback.len(),
        });
    }
    let latched = state.latched();
    let mut faults = Vec::new();
    for unit in 0..command.len() {
        if latched.get(unit) {
            continue;
        }
        if command.get(unit) == readback.get(unit) {
            state.mismatch_counts[unit] = 0;
            continue;
        }
        state.mismatch_counts[unit] += 1;
        if state.mismatch_counts[unit] >= cfg.fault_scans {
            let health = if command.get(unit) {
                state.latched_open.set(unit, true);
                Health::StuckOpen
            } else {
                state.latched_closed.set(unit, true);
                Health::StuckClosed
            };
            state.mismatch_counts[unit] = 0;
            faults.push(SwitchFault { unit, health });
        }
    }
    Ok((faults, state))
}

/// Preset for the region containing `current_rms`. Intervals are closed on the left.
pub fn select_lookup(current_rms: f64, cfg: &ControllerConfig) -> SwitchBits {
    cfg.combo_presets[lookup_region(current_rms, cfg).index()]
}

pub fn lookup_region(current_rms: f64, cfg: &ControllerConfig) -> Region {
    let [ab, b_end, bc] = cfg.region_thresholds;
    if current_rms < ab {
        Region::A
    } else if current_rms < b_end {
        Region::B
    } else if current_rms < bc {
        cfg.gap_region
    } else {
        Region::C
    }
}

/// Mask with the largest total bank VAr not exceeding `q_load`.
///
/// Units latched faulty are not free choices: stuck-closed ones are always
/// counted, stuck-open ones never chosen.
pub fn select_greedy(q_load: f64, bank: &BankState, supply: &SupplySpec, state: &ControllerState) -> SwitchBits {
    let weights = bank.rated_weights(supply);
    select_with_faults(q_load, &weights, state)
}

fn select_with_faults(q_load: f64, weights: &[f64], state: &ControllerState) -> SwitchBits {
    let forced = state.latched_closed;
    let allowed = SwitchBits::ones(weights.len()).and_not(state.latched());
    let room = q_load - forced.weighted_sum(weights);
    select::best_subset(weights, room, allowed).or(forced)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Basis {
    ThreePhase,
    SinglePhase,
}

/// One scan over the whole bank.
pub fn scan(
    image: &ScanImage,
    cfg: &ControllerConfig,
    state: ControllerState,
    supply: &SupplySpec,
    bank: &BankState,
) -> Result<(ScanOutput, ControllerState)> {
    let weights = bank.rated_weights(supply);
    scan_weighted(image, cfg, state, supply, &weights, Basis::ThreePhase)
}

fn scan_weighted(
    image: &ScanImage,
    cfg: &ControllerConfig,
    state: ControllerState,
    supply: &SupplySpec,
    weights: &[f64],
    basis: Basis,
) -> Result<(ScanOutput, ControllerState)> {
    let n = weights.len();
    for len in [image.digital_out.len(), image.readback_in.len(), state.command.len()] {
        if len != n {
            return Err(Error::LengthMismatch { left: len, right: n });
        }
    }

    let (new_faults, mut state) = detect_switch_fault(image.digital_out, image.readback_in, state, cfg)?;
    if !new_faults.is_empty() {
        state.command = state.command.and_not(state.latched_open).or(state.latched_closed);
        state.pending_mask = None;
        state.stable_count = 0;
    }

    let fe = &cfg.front_end;
    let duty = image.duty_accumulator;
    if image.analog_code >= fe.max_code() || !(0.0..=1.0).contains(&duty) {
        state.measurement_fault = true;
        return Ok((
            ScanOutput {
                desired: state.command,
                estimate: None,
                new_faults,
            },
            state,
        ));
    }
    state.measurement_fault = false;

    let current_rms = fe.decode_current(image.analog_code);
    let phase_angle = signal::phase_from_duty(duty)?;
    let power_factor = phasor::pf_from_phase_angle(phase_angle);
    let apparent = |i: f64| match basis {
        Basis::ThreePhase => supply.apparent_power(i),
        Basis::SinglePhase => supply.phase_voltage() * i,
    };
    let reactive_power = phasor::reactive_power_at_angle(apparent(current_rms), phase_angle);
    let compensable = if cfg.guard_band {
        let i_lo = (current_rms - fe.current_tolerance(supply, current_rms)).max(0.0);
        phasor::reactive_power_at_angle(apparent(i_lo), phase_angle - fe.phase_tolerance(supply))
    } else {
        reactive_power
    };

    let candidate = match cfg.mode {
        Mode::Lookup => select_lookup(current_rms, cfg).and_not(state.latched_open).or(state.latched_closed),
        Mode::Greedy => {
            let best = select_with_faults(compensable, weights, &state);
            let held = state.command;
            let held_total = held.weighted_sum(weights);
            let gain = best.weighted_sum(weights) - held_total;
            if held_total <= compensable && gain <= cfg.effective_deadband(weights) {
                held
            } else {
                best
            }
        }
    };

    let state = debounce(candidate, state, cfg.debounce_scans);
    Ok((
        ScanOutput {
            desired: state.command,
            estimate: Some(LoadEstimate {
                current_rms,
                phase_angle,
                power_factor,
                reactive_power,
                compensable,
            }),
            new_faults,
        },
        state,
    ))
}

/// A candidate replaces the command once it has been proposed `scans` times in a row.
fn debounce(candidate: SwitchBits, mut state: ControllerState, scans: u32) -> ControllerState {
    if candidate == state.command {
        state.pending_mask = None;
        state.stable_count = 0;
        return state;
    }
    if state.pending_mask == Some(candidate) {
        state.stable_count += 1;
    } else {
        state.pending_mask = Some(candidate);
        state.stable_count = 1;
    }
    if state.stable_count >= scans {
        state.command = candidate;
        state.pending_mask = None;
        state.stable_count = 0;
    }
    state
}

/// Start index and length of phase `phase`'s units in a per-phase bank.
pub fn phase_group(bank_len: usize, phase: usize) -> (usize, usize) {
    let len = bank_len / 3;
    (phase * len, len)
}

/// Independent single-phase scans over the three thirds of the bank.
///
/// Each unit is one star-connected capacitor on its phase, so it supplies a
/// third of its three-phase rating.
pub fn per_phase_scan(
    images: &[ScanImage; 3],
    cfg: &ControllerConfig,
    states: [ControllerState; 3],
    supply: &SupplySpec,
    bank: &BankState,
) -> Result<([ScanOutput; 3], [ControllerState; 3])> {
    let all = bank.rated_weights(supply);
    let mut outs = Vec::with_capacity(3);
    let mut next = Vec::with_capacity(3);
    for (phase, (image, state)) in images.iter().zip(states).enumerate() {
        let (start, len) = phase_group(all.len(), phase);
        let weights: Vec<f64> = all[start..start + len].iter().map(|w| w / 3.0).collect();
        let (out, st) = scan_weighted(image, cfg, state, supply, &weights, Basis::SinglePhase)?;
        outs.push(out);
        next.push(st);
    }
    let outs: [ScanOutput; 3] = outs.try_into().expect("three phases");
    let next: [ControllerState; 3] = next.try_into().expect("three phases");
    Ok((outs, next))
}
