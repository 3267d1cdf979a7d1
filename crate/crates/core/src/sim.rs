//! Closed-loop time stepping: load → front end → scan → bank → supply-side point.

use crate::bank::{BankState, SwitchEvent};
use crate::bits::SwitchBits;
use crate::controller::{self, ControllerState, ScanImage, SwitchFault};
use crate::error::Result;
use crate::par::{self, Execution};
use crate::phasor::{self, OperatingPoint, SupplySpec};
use crate::scenario::{ProfilePoint, ScenarioConfig};
use crate::signal::{FrontEnd, Measurement, Waveforms};

/// One logged scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub time: f64,
    /// Motor-side line current (mean of the phases).
    pub load_current: f64,
    pub load_pf: f64,
    pub real_power: f64,
    pub q_load: f64,
    pub command: SwitchBits,
    /// Readback bits: units actually connected.
    pub engaged: SwitchBits,
    pub q_cap: f64,
    pub corrected_pf: f64,
    /// Supply-side line current after compensation.
    pub corrected_current: f64,
    pub lagging: bool,
    pub faults: Vec<SwitchFault>,
    pub measurement_fault: bool,
}

impl SimRecord {
    fn uncompensated(time: f64, load: &OperatingPoint, bank_len: usize) -> Self {
        Self {
            time,
            load_current: load.line_current_rms,
            load_pf: load.power_factor,
            real_power: load.real_power,
            q_load: load.reactive_power,
            command: SwitchBits::zeros(bank_len),
            engaged: SwitchBits::zeros(bank_len),
            q_cap: 0.0,
            corrected_pf: load.power_factor,
            corrected_current: load.line_current_rms,
            lagging: true,
            faults: Vec::new(),
            measurement_fault: false,
        }
    }

    pub fn residual_q(&self) -> f64 {
        self.q_load - self.q_cap
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<SimRecord>,
    pub events: Vec<SwitchEvent>,
}

impl Trace {
    pub fn last(&self) -> Option<&SimRecord> {
        self.records.last()
    }
}

/// Reuses the last capture while the load is unchanged.
struct MeasureCache {
    key: Option<(f64, f64)>,
    value: Option<Measurement>,
}

impl MeasureCache {
    fn new() -> Self {
        Self { key: None, value: None }
    }

    fn get(&mut self, fe: &FrontEnd, supply: &SupplySpec, current: f64, lag: f64) -> Result<Measurement> {
        if self.key != Some((current, lag)) || self.value.is_none() {
            self.value = Some(fe.measure(supply, current, lag)?);
            self.key = Some((current, lag));
        }
        Ok(self.value.expect("filled above"))
    }
}

/// Aggregated load of the three phases, each looked up at its own current.
fn load_point(cfg: &ScenarioConfig, currents: [f64; 3]) -> Result<(OperatingPoint, [OperatingPoint; 3])> {
    let supply = &cfg.supply;
    let mut phases = [OperatingPoint::derive(supply, 0.0, 1.0, None)?; 3];
    for (p, &i) in phases.iter_mut().zip(&currents) {
        *p = cfg.load_table.lookup_point(i, supply)?;
    }
    if currents[0] == currents[1] && currents[1] == currents[2] {
        return Ok((phases[0], phases));
    }
    // per-phase share of each three-phase figure is a third
    let p: f64 = phases.iter().map(|x| x.real_power / 3.0).sum();
    let q: f64 = phases.iter().map(|x| x.reactive_power / 3.0).sum();
    let s = p.hypot(q);
    let speed = phases.iter().filter_map(|x| x.speed).sum::<f64>() / 3.0;
    let total = OperatingPoint {
        line_current_rms: currents.iter().sum::<f64>() / 3.0,
        power_factor: if s > 0.0 { p / s } else { 1.0 },
        lagging: true,
        real_power: p,
        reactive_power: q,
        speed: Some(speed),
    };
    Ok((total, phases))
}

/// Runs a scenario to completion. Records are taken once per scan period,
/// after the scan's command has been applied.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Trace> {
    cfg.validate()?;
    let supply = cfg.supply;
    let ctl = &cfg.controller;
    let per_phase = ctl.per_phase;
    let mut bank = BankState::new(cfg.bank.build(&supply, per_phase)?)?;
    let n = bank.len();
    let cap_scale = if per_phase { 1.0 / 3.0 } else { 1.0 };

    let mut faults = cfg.faults.clone();
    faults.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next_fault = 0;

    let group = n / 3;
    let mut state = ControllerState::new(n);
    let mut phase_states = [
        ControllerState::new(group),
        ControllerState::new(group),
        ControllerState::new(group),
    ];
    let mut caches = [MeasureCache::new(), MeasureCache::new(), MeasureCache::new()];

    let period = ctl.scan_period;
    let steps = (cfg.duration / period + 1e-9).floor() as usize;
    let mut trace = Trace {
        records: Vec::with_capacity(steps + 1),
        events: Vec::new(),
    };

    for step in 0..=steps {
        let t = step as f64 * period;
        while next_fault < faults.len() && faults[next_fault].time <= t + 1e-12 {
            let f = faults[next_fault];
            bank = bank.with_health(f.unit, f.health)?;
            next_fault += 1;
        }
        let (b, mut fired) = bank.advance(t);
        bank = b;
        trace.events.append(&mut fired);

        let currents = cfg.currents_at(t);
        let (load, phases) = load_point(cfg, currents)?;

        let (desired, latched, measurement_fault) = if per_phase {
            let mut images = [ScanImage {
                duty_accumulator: 0.0,
                analog_code: 0,
                digital_out: SwitchBits::zeros(group),
                readback_in: SwitchBits::zeros(group),
            }; 3];
            for (ph, img) in images.iter_mut().enumerate() {
                let m = caches[ph].get(&ctl.front_end, &supply, currents[ph], phases[ph].phase_lag())?;
                let (start, len) = controller::phase_group(n, ph);
                *img = ScanImage {
                    duty_accumulator: m.duty,
                    analog_code: m.analog_code,
                    digital_out: bank.command_bits().slice(start, len),
                    readback_in: bank.readback_bits().slice(start, len),
                };
            }
            let (outs, next) = controller::per_phase_scan(&images, ctl, phase_states, &supply, &bank)?;
            phase_states = next;
            let mut desired = SwitchBits::zeros(n);
            let mut latched = Vec::new();
            for (ph, (out, st)) in outs.iter().zip(&phase_states).enumerate() {
                let (start, len) = controller::phase_group(n, ph);
                desired.splice(start, out.desired.slice(0, len));
                latched.extend(st.faults().into_iter().map(|f| SwitchFault { unit: f.unit + start, ..f }));
            }
            let mfault = phase_states.iter().any(|s| s.measurement_fault);
            (desired, latched, mfault)
        } else {
            let m = caches[0].get(&ctl.front_end, &supply, load.line_current_rms, load.phase_lag())?;
            let image = ScanImage {
                duty_accumulator: m.duty,
                analog_code: m.analog_code,
                digital_out: bank.command_bits(),
                readback_in: bank.readback_bits(),
            };
            let (out, next) = controller::scan(&image, ctl, state, &supply, &bank)?;
            state = next;
            (out.desired, state.faults(), state.measurement_fault)
        };

        let (b, mut fired) = bank.command_switches_logged(desired, t, &supply)?;
        bank = b;
        trace.events.append(&mut fired);

        let q_cap = crate::bank::bank_reactive_power(&bank, &supply) * cap_scale;
        let corrected = phasor::corrected_point(&supply, &load, q_cap);
        trace.records.push(SimRecord {
            time: t,
            load_current: load.line_current_rms,
            load_pf: load.power_factor,
            real_power: load.real_power,
            q_load: load.reactive_power,
            command: bank.command_bits(),
            engaged: bank.readback_bits(),
            q_cap,
            corrected_pf: corrected.power_factor,
            corrected_current: corrected.line_current_rms,
            lagging: corrected.lagging,
            faults: latched,
            measurement_fault,
        });
    }
    Ok(trace)
}

pub fn run_batch(cfgs: &[ScenarioConfig], exec: Execution) -> Vec<Result<Trace>> {
    par::map_ordered(cfgs, exec, run_scenario)
}

/// One row per current, in input order. Without compensation the controller
/// is bypassed; with it, each row is the last record of a constant-load run.
pub fn sweep(currents: &[f64], compensate: bool, base: &ScenarioConfig, exec: Execution) -> Vec<Result<SimRecord>> {
    par::map_ordered(currents, exec, |&i| sweep_row(i, compensate, base))
}

fn sweep_row(current: f64, compensate: bool, base: &ScenarioConfig) -> Result<SimRecord> {
    if !compensate {
        let load = base.load_table.lookup_point(current, &base.supply)?;
        let len = base.bank.len(base.controller.per_phase);
        return Ok(SimRecord::uncompensated(0.0, &load, len));
    }
    // fail fast on the range error before stepping
    base.load_table.lookup_point(current, &base.supply)?;
    let mut cfg = base.clone();
    cfg.profile = vec![ProfilePoint::balanced(0.0, current)];
    let trace = run_scenario(&cfg)?;
    Ok(trace.records.last().cloned().expect("at least one record"))
}

/// Inclusive arithmetic range `from, from + step, …` up to `to`.
pub fn current_range(from: f64, to: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || from.is_nan() || to.is_nan() || from > to {
        return if from == to { vec![from] } else { Vec::new() };
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| from + k as f64 * step).collect()
}

/// Operating point that `dump_waveforms` renders.
pub fn waveform_point(current: f64, compensated: bool, cfg: &ScenarioConfig) -> Result<OperatingPoint> {
    let load = cfg.load_table.lookup_point(current, &cfg.supply)?;
    if !compensated {
        return Ok(load);
    }
    let row = sweep_row(current, true, cfg)?;
    Ok(phasor::corrected_point(&cfg.supply, &load, row.q_cap))
}

/// Voltage and line current of the uncompensated (or steady-state corrected)
/// point at `current` amperes, with the comparator and XOR outputs.
pub fn dump_waveforms(
    current: f64,
    sample_rate: f64,
    cycles: usize,
    compensated: bool,
    cfg: &ScenarioConfig,
) -> Result<Waveforms> {
    let point = waveform_point(current, compensated, cfg)?;
    let fe = FrontEnd {
        sample_rate,
        cycles,
        ..cfg.controller.front_end
    };
    fe.capture(&cfg.supply, point.line_current_rms, point.phase_lag())
}
