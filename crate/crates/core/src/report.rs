//! CSV output. Numbers are written with six significant digits in the style
//! of C's `%.6g`; lines end in LF.

use std::fmt::Write as _;

use crate::bank::CapacitorUnit;
use crate::error::Error;
use crate::phasor::SupplySpec;
use crate::sim::SimRecord;
use crate::signal::Waveforms;

/// `%.6g`-style formatting.
pub fn fmt_sig(x: f64) -> String {
    const SIG: usize = 6;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub const RECORD_HEADER: &str =
    "t_s,i_load_a,pf_load,p_w,q_load_var,q_cap_var,pf_corr,i_corr_a,lagging,command,engaged,faults";

fn record_fields(r: &SimRecord) -> String {
    let mut faults: Vec<String> = r.faults.iter().map(ToString::to_string).collect();
    if r.measurement_fault {
        faults.push("measurement".into());
    }
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_sig(r.time),
        fmt_sig(r.load_current),
        fmt_sig(r.load_pf),
        fmt_sig(r.real_power),
        fmt_sig(r.q_load),
        fmt_sig(r.q_cap),
        fmt_sig(r.corrected_pf),
        fmt_sig(r.corrected_current),
        bit(r.lagging),
        r.command,
        r.engaged,
        faults.join(";"),
    )
}

pub fn records_csv(records: &[SimRecord]) -> String {
    let mut out = String::with_capacity(96 * (records.len() + 1));
    out.push_str(RECORD_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&record_fields(r));
        out.push('\n');
    }
    out
}

/// Sweep table: the record columns after the requested current, plus an error column.
pub fn sweep_csv(currents: &[f64], rows: &[Result<SimRecord, Error>]) -> String {
    let mut out = format!("i_request_a,{RECORD_HEADER},error\n");
    for (i, row) in currents.iter().zip(rows) {
        match row {
            Ok(r) => {
                let _ = writeln!(out, "{},{},", fmt_sig(*i), record_fields(r));
            }
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                let _ = writeln!(out, "{}{},{}", fmt_sig(*i), ",".repeat(12), msg);
            }
        }
    }
    out
}

pub const WAVEFORM_HEADER: &str = "t_s,v_volts,i_amperes,v_square,i_square,xor_level";

pub fn waveforms_csv(w: &Waveforms) -> String {
    let mut out = String::with_capacity(48 * (w.voltage.len() + 1));
    out.push_str(WAVEFORM_HEADER);
    out.push('\n');
    let (v, i) = (w.voltage.samples(), w.current.samples());
    for k in 0..v.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_sig(w.voltage.time(k)),
            fmt_sig(v[k]),
            fmt_sig(i[k]),
            bit(w.voltage_square.levels()[k]),
            bit(w.current_square.levels()[k]),
            bit(w.xor.levels()[k]),
        );
    }
    out
}

pub fn bank_csv(units: &[CapacitorUnit], supply: &SupplySpec) -> String {
    let mut out = String::from("unit,connection,capacitance_uf,q_var\n");
    for (k, u) in units.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{}",
            u.connection,
            fmt_sig(u.capacitance),
            fmt_sig(u.rated_reactive_power(supply))
        );
    }
    out
}

pub fn events_csv(events: &[crate::bank::SwitchEvent]) -> String {
    let mut out = String::from("t_s,unit,action\n");
    for e in events {
        let action = match e.action {
            crate::bank::SwitchAction::Engage => "engage",
            crate::bank::SwitchAction::Disengage => "disengage",
        };
        let _ = writeln!(out, "{},{},{action}", fmt_sig(e.time), e.unit);
    }
    out
}
