//! Interfacing circuit between the power stage and the PLC.
//!
//! Two paths are modelled. The phase path squares voltage and current with
//! zero-threshold comparators and XORs them; the XOR high fraction is `φ/π`.
//! The magnitude path half-wave clips the current, holds its peak and feeds a
//! 12-bit ADC. All stages are ideal (no slew, offsets or diode drops).

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::phasor::SupplySpec;

pub const DEFAULT_SAMPLE_RATE: f64 = 20_000.0;
pub const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;
pub const LOGIC_HIGH_VOLTS: f64 = 24.0;
pub const LOGIC_LOW_VOLTS: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    sample_rate: f64,
    fundamental: f64,
    samples: Vec<f64>,
}

fn samples_per_period(sample_rate: f64, fundamental: f64) -> usize {
    (sample_rate / fundamental).round() as usize
}

impl SampledSignal {
    pub fn new(sample_rate: f64, fundamental: f64, samples: Vec<f64>) -> Result<Self> {
        if !(fundamental.is_finite() && fundamental > 0.0) {
            return Err(Error::validation("signal.fundamental", "must be > 0 Hz"));
        }
        if !(sample_rate.is_finite() && sample_rate >= MIN_SAMPLES_PER_PERIOD * fundamental) {
            return Err(Error::validation(
                "signal.sample_rate",
                format!("{sample_rate} Hz is below {MIN_SAMPLES_PER_PERIOD} x {fundamental} Hz"),
            ));
        }
        let per = samples_per_period(sample_rate, fundamental);
        if samples.len() < per {
            return Err(Error::validation(
                "signal.samples",
                format!("{} samples is less than one period ({per})", samples.len()),
            ));
        }
        Ok(Self {
            sample_rate,
            fundamental,
            samples,
        })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn fundamental(&self) -> f64 {
        self.fundamental
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples_per_period(&self) -> usize {
        samples_per_period(self.sample_rate, self.fundamental)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            sample_rate: self.sample_rate,
            fundamental: self.fundamental,
            samples: self.samples.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// Two-level signal: `true` is the 24 V level.
#[derive(Debug, Clone, PartialEq)]
pub struct LogicSignal {
    sample_rate: f64,
    fundamental: f64,
    levels: Vec<bool>,
}

impl LogicSignal {
    pub fn levels(&self) -> &[bool] {
        &self.levels
    }

    pub fn voltage(&self, k: usize) -> f64 {
        if self.levels[k] {
            LOGIC_HIGH_VOLTS
        } else {
            LOGIC_LOW_VOLTS
        }
    }

    pub fn high_fraction(&self) -> f64 {
        self.levels.iter().filter(|&&h| h).count() as f64 / self.levels.len() as f64
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// `√2·rms·sin(ωt − lag)` sampled at `sample_rate` over whole cycles.
pub fn synthesize(
    amplitude_rms: f64,
    phase_lag: f64,
    supply: &SupplySpec,
    sample_rate: f64,
    cycles: usize,
) -> Result<SampledSignal> {
    let f = supply.frequency();
    if cycles == 0 {
        return Err(Error::validation("signal.cycles", "must be >= 1"));
    }
    if !(sample_rate.is_finite() && sample_rate >= MIN_SAMPLES_PER_PERIOD * f) {
        return Err(Error::validation(
            "signal.sample_rate",
            format!("{sample_rate} Hz is below {MIN_SAMPLES_PER_PERIOD} x {f} Hz"),
        ));
    }
    let per = samples_per_period(sample_rate, f);
    let peak = SQRT_2 * amplitude_rms;
    let step = 2.0 * PI * f / sample_rate;
    let samples = (0..per * cycles)
        .map(|k| peak * (step * k as f64 - phase_lag).sin())
        .collect();
    SampledSignal::new(sample_rate, f, samples)
}

/// Zero-threshold comparator; exact zeros hold the previous level, starting low.
pub fn comparator(signal: &SampledSignal) -> LogicSignal {
    let mut level = false;
    let levels = signal
        .samples
        .iter()
        .map(|&x| {
            if x > 0.0 {
                level = true;
            } else if x < 0.0 {
                level = false;
            }
            level
        })
        .collect();
    LogicSignal {
        sample_rate: signal.sample_rate,
        fundamental: signal.fundamental,
        levels,
    }
}

pub fn xor(a: &LogicSignal, b: &LogicSignal) -> Result<LogicSignal> {
    if a.levels.len() != b.levels.len() {
        return Err(Error::LengthMismatch {
            left: a.levels.len(),
            right: b.levels.len(),
        });
    }
    if a.sample_rate != b.sample_rate {
        return Err(Error::validation(
            "signal.sample_rate",
            format!("{} Hz vs {} Hz", a.sample_rate, b.sample_rate),
        ));
    }
    Ok(LogicSignal {
        sample_rate: a.sample_rate,
        fundamental: a.fundamental,
        levels: a.levels.iter().zip(&b.levels).map(|(x, y)| x ^ y).collect(),
    })
}

/// Fraction of time exactly one input is high, over the trailing whole periods.
pub fn xor_duty(a: &LogicSignal, b: &LogicSignal) -> Result<f64> {
    let x = xor(a, b)?;
    let per = samples_per_period(x.sample_rate, x.fundamental).max(1);
    let whole = (x.levels.len() / per) * per;
    let window = if whole == 0 { &x.levels[..] } else { &x.levels[x.levels.len() - whole..] };
    Ok(window.iter().filter(|&&h| h).count() as f64 / window.len() as f64)
}

pub fn phase_from_duty(duty: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&duty) {
        return Err(Error::Domain {
            quantity: "XOR duty",
            value: duty,
            expected: "0 <= duty <= 1",
        });
    }
    Ok(PI * duty)
}

pub fn clip_negative(signal: &SampledSignal) -> SampledSignal {
    signal.map(|x| x.max(0.0))
}

/// Ideal hold of the largest sample in the most recent full period.
///
/// The hold capacitor starts discharged, so the result is never negative.
pub fn peak_detect(signal: &SampledSignal) -> f64 {
    peak_detect_with_droop(signal, 0.0)
}

/// Peak hold whose stored value decays by `droop_per_cycle` (a fraction) each
/// fundamental period after the sample that charged it.
pub fn peak_detect_with_droop(signal: &SampledSignal, droop_per_cycle: f64) -> f64 {
    let per = signal.samples_per_period().min(signal.samples.len());
    let start = signal.samples.len() - per;
    let keep = (1.0 - droop_per_cycle.clamp(0.0, 1.0)).max(0.0);
    let last = signal.samples.len() - 1;
    signal.samples[start..]
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            if keep == 1.0 {
                x
            } else {
                let age = (last - (start + j)) as f64 / per as f64;
                x * keep.powf(age)
            }
        })
        .fold(0.0, f64::max)
}

/// Unipolar ADC: `round_half_up(clamp(v, 0, FS)/FS · (2^bits − 1))`.
pub fn adc_convert(voltage: f64, full_scale: f64, bits: u32) -> u32 {
    let max_code = ((1u64 << bits) - 1) as f64;
    let v = if voltage.is_nan() { 0.0 } else { voltage.clamp(0.0, full_scale) };
    (v / full_scale * max_code + 0.5).floor() as u32
}

pub fn adc_decode(code: u32, full_scale: f64, bits: u32) -> f64 {
    code as f64 / ((1u64 << bits) - 1) as f64 * full_scale
}

/// 24 V DC input module: 13..30 V reads 1, −3..5 V reads 0, the band in
/// between keeps the previous reading.
pub fn digital_input_level(voltage: f64, previous: bool) -> Result<bool> {
    if !(-3.0..=30.0).contains(&voltage) {
        return Err(Error::InputOverRange(voltage));
    }
    Ok(if voltage >= 13.0 {
        true
    } else if voltage <= 5.0 {
        false
    } else {
        previous
    })
}

/// Peak-detector reading to primary-side RMS current.
pub fn scale_peak_to_rms(peak: f64, ct_ratio: f64) -> f64 {
    peak / SQRT_2 * ct_ratio
}

/// Instrument transformer ratios, ADC range and sampling of the interfacing circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEnd {
    pub sample_rate: f64,
    /// Primary amperes per secondary volt of the current sensing path.
    pub ct_ratio: f64,
    pub vt_ratio: f64,
    pub adc_full_scale: f64,
    pub adc_bits: u32,
    pub droop_per_cycle: f64,
    /// Whole fundamental periods captured per measurement.
    pub cycles: usize,
}

impl Default for FrontEnd {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            ct_ratio: 1.0,
            vt_ratio: 1.0,
            adc_full_scale: 10.0,
            adc_bits: 12,
            droop_per_cycle: 0.0,
            cycles: 1,
        }
    }
}

/// Values the front end hands to the PLC inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub duty: f64,
    pub analog_code: u32,
}

/// Captured waveforms of one measurement, for dumping.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveforms {
    pub voltage: SampledSignal,
    pub current: SampledSignal,
    pub voltage_square: LogicSignal,
    pub current_square: LogicSignal,
    pub xor: LogicSignal,
}

impl FrontEnd {
    pub fn validate(&self, supply: &SupplySpec) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate >= MIN_SAMPLES_PER_PERIOD * supply.frequency()) {
            return Err(Error::validation(
                "sample_rate",
                format!("{} Hz is below {MIN_SAMPLES_PER_PERIOD} x the supply frequency", self.sample_rate),
            ));
        }
        for (path, v) in [
            ("controller.ct_ratio", self.ct_ratio),
            ("controller.vt_ratio", self.vt_ratio),
            ("controller.adc_full_scale", self.adc_full_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(path, "must be > 0"));
            }
        }
        if !(1..=24).contains(&self.adc_bits) {
            return Err(Error::validation("controller.adc_bits", "must be in 1..=24"));
        }
        if !(0.0..1.0).contains(&self.droop_per_cycle) {
            return Err(Error::validation("controller.droop_per_cycle", "must be in [0, 1)"));
        }
        if self.cycles == 0 {
            return Err(Error::validation("controller.measure_cycles", "must be >= 1"));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        ((1u64 << self.adc_bits) - 1) as u32
    }

    /// Phase resolution of the duty measurement: one sample at each XOR edge.
    pub fn phase_tolerance(&self, supply: &SupplySpec) -> f64 {
        2.0 * PI / samples_per_period(self.sample_rate, supply.frequency()) as f64
    }

    /// Worst-case error of the decoded RMS current in amperes: half an ADC
    /// step plus the sampling error of the peak hold.
    pub fn current_tolerance(&self, supply: &SupplySpec, current_rms: f64) -> f64 {
        let lsb_volts = self.adc_full_scale / self.max_code() as f64;
        let n = samples_per_period(self.sample_rate, supply.frequency()) as f64;
        let sampling = current_rms * (1.0 - (PI / n).cos());
        scale_peak_to_rms(0.5 * lsb_volts, self.ct_ratio) + sampling
    }

    pub fn capture(&self, supply: &SupplySpec, current_rms: f64, phase_lag: f64) -> Result<Waveforms> {
        let voltage = synthesize(supply.phase_voltage(), 0.0, supply, self.sample_rate, self.cycles)?;
        let current = synthesize(current_rms, phase_lag, supply, self.sample_rate, self.cycles)?;
        let voltage_square = comparator(&voltage);
        let current_square = comparator(&current);
        let xor = xor(&voltage_square, &current_square)?;
        Ok(Waveforms {
            voltage,
            current,
            voltage_square,
            current_square,
            xor,
        })
    }

    /// Runs both measurement paths for a load drawing `current_rms` at `phase_lag`.
    pub fn measure(&self, supply: &SupplySpec, current_rms: f64, phase_lag: f64) -> Result<Measurement> {
        let w = self.capture(supply, current_rms, phase_lag)?;
        self.measure_waveforms(&w)
    }

    pub fn measure_waveforms(&self, w: &Waveforms) -> Result<Measurement> {
        // XOR output through the digital input module, counted on the signal grid.
        let per = w.xor.len() / self.cycles;
        let mut level = false;
        let mut high = 0usize;
        for k in w.xor.len() - per * self.cycles..w.xor.len() {
            level = digital_input_level(w.xor.voltage(k), level)?;
            high += level as usize;
        }
        let duty = high as f64 / (per * self.cycles) as f64;

        let secondary = w.current.map(|x| x / self.ct_ratio);
        let peak = peak_detect_with_droop(&clip_negative(&secondary), self.droop_per_cycle);
        let analog_code = adc_convert(peak, self.adc_full_scale, self.adc_bits);
        Ok(Measurement { duty, analog_code })
    }

    /// Inverse of the magnitude path: ADC code to RMS line current.
    pub fn decode_current(&self, code: u32) -> f64 {
        scale_peak_to_rms(adc_decode(code, self.adc_full_scale, self.adc_bits), self.ct_ratio)
    }

    /// ADC code an ideal front end reports for a peak of `peak_amperes`.
    pub fn code_for_peak(&self, peak_amperes: f64) -> u32 {
        adc_convert(peak_amperes / self.ct_ratio, self.adc_full_scale, self.adc_bits)
    }
}
