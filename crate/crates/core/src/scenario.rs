//! Scenario description and its text format.
//!
//! The file is line-oriented. Top-level `key = value` lines (before any
//! section) set the run itself; `[section]` headers open the `supply`,
//! `motor`, `bank`, `controller`, `profile` and `faults` blocks. `#` starts a
//! comment.
//!
//! ```text
//! duration = 2.0
//! sample_rate = 20000
//!
//! [supply]
//! line_voltage = 400
//! frequency = 50
//!
//! [bank]
//! binary_qmax = 2700
//! binary_steps = 4
//! connection = star
//!
//! [controller]
//! mode = greedy
//!
//! [profile]
//! t=0.0 i=4.0
//! t=1.0 i=6.5
//!
//! [faults]
//! t=1.5 unit=3 health=stuck_open
//! ```

use std::path::Path;

use crate::bank::{size_binary_bank, CapacitorUnit, Connection, Health};
use crate::bits::SwitchBits;
use crate::controller::{ControllerConfig, Mode};
use crate::error::{Error, Result};
use crate::motor::{LoadRow, LoadTable};
use crate::phasor::SupplySpec;

/// Step-held load breakpoint. `currents` holds one value per phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub time: f64,
    pub currents: [f64; 3],
}

impl ProfilePoint {
    pub fn balanced(time: f64, current: f64) -> Self {
        Self {
            time,
            currents: [current; 3],
        }
    }

    pub fn is_balanced(&self) -> bool {
        self.currents[0] == self.currents[1] && self.currents[1] == self.currents[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultInjection {
    pub time: f64,
    pub unit: usize,
    pub health: Health,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BankSpec {
    Units(Vec<CapacitorUnit>),
    Binary {
        q_max: f64,
        steps: usize,
        connection: Connection,
    },
}

impl BankSpec {
    /// Builds the units. A per-phase binary bank gets one binary group per phase.
    pub fn build(&self, supply: &SupplySpec, per_phase: bool) -> Result<Vec<CapacitorUnit>> {
        match self {
            BankSpec::Units(units) => Ok(units.clone()),
            &BankSpec::Binary { q_max, steps, connection } => {
                let group = size_binary_bank(q_max, steps, supply, connection)?;
                if per_phase {
                    Ok(group.iter().chain(&group).chain(&group).copied().collect())
                } else {
                    Ok(group)
                }
            }
        }
    }

    pub fn len(&self, per_phase: bool) -> usize {
        match self {
            BankSpec::Units(u) => u.len(),
            BankSpec::Binary { steps, .. } => steps * if per_phase { 3 } else { 1 },
        }
    }

    pub fn is_empty(&self, per_phase: bool) -> bool {
        self.len(per_phase) == 0
    }
}

/// The three preset combinations' bank: one 20 µF delta, two 2.5 µF star,
/// two 2.5 µF delta and three 20 µF star units.
pub fn lookup_bank() -> Vec<CapacitorUnit> {
    [
        (20.0, Connection::Delta),
        (2.5, Connection::Star),
        (2.5, Connection::Star),
        (2.5, Connection::Delta),
        (2.5, Connection::Delta),
        (20.0, Connection::Star),
        (20.0, Connection::Star),
        (20.0, Connection::Star),
    ]
    .into_iter()
    .map(|(c, conn)| CapacitorUnit::new(c, conn).expect("positive capacitance"))
    .collect()
}

pub fn default_greedy_bank() -> BankSpec {
    BankSpec::Binary {
        q_max: 2700.0,
        steps: 4,
        connection: Connection::Star,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub supply: SupplySpec,
    pub load_table: LoadTable,
    pub profile: Vec<ProfilePoint>,
    pub bank: BankSpec,
    pub controller: ControllerConfig,
    pub faults: Vec<FaultInjection>,
    pub duration: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::for_mode(Mode::Greedy)
    }
}

impl ScenarioConfig {
    /// Laboratory setup with the mode's default bank and a constant 3 A load for 1 s.
    pub fn for_mode(mode: Mode) -> Self {
        let bank = match mode {
            Mode::Greedy => default_greedy_bank(),
            Mode::Lookup => BankSpec::Units(lookup_bank()),
        };
        let mut controller = ControllerConfig {
            mode,
            ..ControllerConfig::default()
        };
        let n = bank.len(false);
        if controller.combo_presets[0].len() != n {
            controller.combo_presets = [SwitchBits::zeros(n); 3];
        }
        Self {
            supply: SupplySpec::laboratory(),
            load_table: LoadTable::default(),
            profile: vec![ProfilePoint::balanced(0.0, 3.0)],
            bank,
            controller,
            faults: Vec::new(),
            duration: 1.0,
        }
    }

    pub fn with_constant_load(mut self, current: f64) -> Self {
        self.profile = vec![ProfilePoint::balanced(0.0, current)];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::validation("duration", format!("must be > 0 s, got {}", self.duration)));
        }
        if self.profile.is_empty() {
            return Err(Error::validation("profile", "needs at least one breakpoint"));
        }
        for (i, p) in self.profile.iter().enumerate() {
            if !p.time.is_finite() || p.time < 0.0 {
                return Err(Error::validation(format!("profile[{i}].t"), "must be finite and >= 0"));
            }
            if i > 0 && p.time < self.profile[i - 1].time {
                return Err(Error::validation(format!("profile[{i}].t"), "breakpoints must be time-sorted"));
            }
            if p.currents.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
                return Err(Error::validation(format!("profile[{i}].i"), "currents must be finite and >= 0"));
            }
            if !self.controller.per_phase && !p.is_balanced() {
                return Err(Error::validation(
                    format!("profile[{i}]"),
                    "per-phase currents need controller.per_phase = true",
                ));
            }
        }
        let n = self.bank.len(self.controller.per_phase);
        if n == 0 {
            return Err(Error::validation("bank", "no capacitor units"));
        }
        if n > SwitchBits::MAX_LEN {
            return Err(Error::validation("bank", format!("at most {} units", SwitchBits::MAX_LEN)));
        }
        if self.controller.per_phase {
            let units = self.bank.build(&self.supply, true)?;
            if units.iter().any(|u| u.connection != Connection::Star) {
                return Err(Error::validation("bank", "per-phase mode needs star-connected units"));
            }
        }
        for (i, f) in self.faults.iter().enumerate() {
            if !f.time.is_finite() || f.time < 0.0 {
                return Err(Error::validation(format!("faults[{i}].t"), "must be finite and >= 0"));
            }
            if f.unit >= n {
                return Err(Error::validation(
                    format!("faults[{i}].unit"),
                    format!("unit {} does not exist in a bank of {n}", f.unit),
                ));
            }
        }
        self.controller.validate(&self.supply, n)
    }

    /// Phase currents in force at time `t`.
    pub fn currents_at(&self, t: f64) -> [f64; 3] {
        let k = self.profile.partition_point(|p| p.time <= t + 1e-12);
        self.profile[k.saturating_sub(1)].currents
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation(path.display().to_string(), e.to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Parser::default().parse(text)
    }
}

#[derive(Default)]
struct Parser {
    section: String,
    duration: Option<f64>,
    sample_rate: Option<f64>,
    supply: (Option<f64>, Option<f64>),
    rows: Vec<LoadRow>,
    units: Vec<CapacitorUnit>,
    binary: (Option<f64>, Option<usize>, Option<Connection>),
    ctl: Vec<(String, String, usize)>,
    profile: Vec<ProfilePoint>,
    faults: Vec<FaultInjection>,
}

fn num(path: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::validation(path, format!("`{v}` is not a number")))
}

fn int<T: std::str::FromStr>(path: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::validation(path, format!("`{v}` is not a non-negative integer")))
}

fn boolean(path: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(Error::validation(path, format!("`{other}` is not a boolean"))),
    }
}

/// `t=0.5 i=3` style fields.
fn fields<'a>(path: &str, line: &'a str) -> Result<Vec<(&'a str, &'a str)>> {
    line.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::validation(path, format!("expected key=value, found `{tok}`")))
        })
        .collect()
}

impl Parser {
    fn parse(mut self, text: &str) -> Result<ScenarioConfig> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim().to_ascii_lowercase();
                if !["supply", "motor", "bank", "controller", "profile", "faults"].contains(&name.as_str()) {
                    return Err(Error::validation(format!("line {}", lineno + 1), format!("unknown section [{name}]")));
                }
                self.section = name;
                continue;
            }
            self.line(line, lineno + 1)?;
        }
        self.finish()
    }

    fn line(&mut self, line: &str, lineno: usize) -> Result<()> {
        match self.section.as_str() {
            "profile" => return self.profile_line(line, lineno),
            "faults" => return self.fault_line(line, lineno),
            _ => {}
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim().to_ascii_lowercase(), v.trim()))
            .ok_or_else(|| Error::validation(format!("line {lineno}"), format!("expected key = value, found `{line}`")))?;
        let path = if self.section.is_empty() {
            key.clone()
        } else {
            format!("{}.{}", self.section, key)
        };
        match (self.section.as_str(), key.as_str()) {
            ("", "duration") => self.duration = Some(num(&path, value)?),
            ("", "sample_rate") => self.sample_rate = Some(num(&path, value)?),
            ("supply", "line_voltage") => self.supply.0 = Some(num(&path, value)?),
            ("supply", "frequency") => self.supply.1 = Some(num(&path, value)?),
            ("motor", "row") => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::validation(path, "expected `current pf speed`"));
                }
                self.rows.push(LoadRow::new(
                    num(&path, parts[0])?,
                    num(&path, parts[1])?,
                    num(&path, parts[2])?,
                ));
            }
            ("bank", "unit") => {
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 2 {
                    return Err(Error::validation(path, "expected `<microfarads> <delta|star>`"));
                }
                let conn = parts[1].parse().map_err(|e| Error::validation(&path, e))?;
                let unit = CapacitorUnit::new(num(&path, parts[0])?, conn)
                    .map_err(|e| Error::validation(&path, e.to_string()))?;
                self.units.push(unit);
            }
            ("bank", "binary_qmax") => self.binary.0 = Some(num(&path, value)?),
            ("bank", "binary_steps") => self.binary.1 = Some(int(&path, value)?),
            ("bank", "connection") => {
                self.binary.2 = Some(value.parse().map_err(|e| Error::validation(&path, e))?)
            }
            ("controller", _) => self.ctl.push((key, value.to_string(), lineno)),
            _ => return Err(Error::validation(path, "unknown key")),
        }
        Ok(())
    }

    fn profile_line(&mut self, line: &str, lineno: usize) -> Result<()> {
        let idx = self.profile.len();
        let path = format!("profile[{idx}]");
        let mut t = None;
        let mut all = None;
        let mut phase = [None; 3];
        for (k, v) in fields(&path, line)? {
            match k {
                "t" => t = Some(num(&format!("{path}.t"), v)?),
                "i" => all = Some(num(&format!("{path}.i"), v)?),
                "ia" => phase[0] = Some(num(&format!("{path}.ia"), v)?),
                "ib" => phase[1] = Some(num(&format!("{path}.ib"), v)?),
                "ic" => phase[2] = Some(num(&format!("{path}.ic"), v)?),
                other => return Err(Error::validation(format!("{path}.{other}"), format!("unknown field (line {lineno})"))),
            }
        }
        let time = t.ok_or_else(|| Error::validation(format!("{path}.t"), "missing"))?;
        let currents = match (all, phase) {
            (Some(i), [None, None, None]) => [i; 3],
            (None, [Some(a), Some(b), Some(c)]) => [a, b, c],
            _ => return Err(Error::validation(&path, "give either i= or all of ia= ib= ic=")),
        };
        self.profile.push(ProfilePoint { time, currents });
        Ok(())
    }

    fn fault_line(&mut self, line: &str, lineno: usize) -> Result<()> {
        let path = format!("faults[{}]", self.faults.len());
        let (mut t, mut unit, mut health) = (None, None, None);
        for (k, v) in fields(&path, line)? {
            match k {
                "t" => t = Some(num(&format!("{path}.t"), v)?),
                "unit" => unit = Some(int(&format!("{path}.unit"), v)?),
                "health" => health = Some(v.parse::<Health>().map_err(|e| Error::validation(format!("{path}.health"), e))?),
                other => return Err(Error::validation(format!("{path}.{other}"), format!("unknown field (line {lineno})"))),
            }
        }
        let missing = |f: &str| Error::validation(format!("{path}.{f}"), "missing");
        self.faults.push(FaultInjection {
            time: t.ok_or_else(|| missing("t"))?,
            unit: unit.ok_or_else(|| missing("unit"))?,
            health: health.ok_or_else(|| missing("health"))?,
        });
        Ok(())
    }

    fn controller(&self, bank_len: usize, mut cfg: ControllerConfig) -> Result<ControllerConfig> {
        // mode first: it decides the preset defaults
        for (key, value, _) in &self.ctl {
            if key == "mode" {
                cfg.mode = value.parse().map_err(|e| Error::validation("controller.mode", e))?;
            }
        }
        for (key, value, _) in &self.ctl {
            let path = format!("controller.{key}");
            let v = value.as_str();
            match key.as_str() {
                "mode" => {}
                "thresholds" => {
                    let xs: Vec<f64> = v.split_whitespace().map(|x| num(&path, x)).collect::<Result<_>>()?;
                    cfg.region_thresholds = xs
                        .try_into()
                        .map_err(|_| Error::validation(&path, "expected three currents"))?;
                }
                "gap_region" => cfg.gap_region = v.parse().map_err(|e| Error::validation(&path, e))?,
                "combo_a" | "combo_b" | "combo_c" => {
                    let slot = (key.as_bytes()[6] - b'a') as usize;
                    let idx: Vec<usize> = if v == "-" {
                        Vec::new()
                    } else {
                        v.split_whitespace().map(|x| int(&path, x)).collect::<Result<_>>()?
                    };
                    cfg.combo_presets[slot] = SwitchBits::from_indices(bank_len, idx)
                        .map_err(|_| Error::validation(&path, format!("unit index beyond bank of {bank_len}")))?;
                }
                "target_pf" => cfg.target_pf = num(&path, v)?,
                "deadband" => cfg.deadband = if v == "auto" { None } else { Some(num(&path, v)?) },
                "debounce_scans" => cfg.debounce_scans = int(&path, v)?,
                "fault_scans" => cfg.fault_scans = int(&path, v)?,
                "scan_period" => cfg.scan_period = num(&path, v)?,
                "per_phase" => cfg.per_phase = boolean(&path, v)?,
                "guard_band" => cfg.guard_band = boolean(&path, v)?,
                "ct_ratio" => cfg.front_end.ct_ratio = num(&path, v)?,
                "vt_ratio" => cfg.front_end.vt_ratio = num(&path, v)?,
                "adc_full_scale" => cfg.front_end.adc_full_scale = num(&path, v)?,
                "adc_bits" => cfg.front_end.adc_bits = int(&path, v)?,
                "droop_per_cycle" => cfg.front_end.droop_per_cycle = num(&path, v)?,
                "measure_cycles" => cfg.front_end.cycles = int(&path, v)?,
                _ => return Err(Error::validation(path, "unknown key")),
            }
        }
        Ok(cfg)
    }

    fn finish(self) -> Result<ScenarioConfig> {
        let mode = self
            .ctl
            .iter()
            .find(|(k, _, _)| k == "mode")
            .map(|(_, v, _)| v.parse::<Mode>().map_err(|e| Error::validation("controller.mode", e)))
            .transpose()?
            .unwrap_or(Mode::Greedy);
        let mut cfg = ScenarioConfig::for_mode(mode);

        let (v, f) = self.supply;
        cfg.supply = SupplySpec::new(
            v.unwrap_or(cfg.supply.line_voltage()),
            f.unwrap_or(cfg.supply.frequency()),
        )
        .map_err(|e| Error::validation("supply", e.to_string()))?;

        if !self.rows.is_empty() {
            cfg.load_table = LoadTable::from_rows(self.rows.clone())?;
        }

        let binary_given = self.binary.0.is_some() || self.binary.1.is_some() || self.binary.2.is_some();
        match (self.units.is_empty(), binary_given) {
            (false, true) => return Err(Error::validation("bank", "give either unit lines or binary_* keys, not both")),
            (false, false) => cfg.bank = BankSpec::Units(self.units.clone()),
            (true, true) => {
                cfg.bank = BankSpec::Binary {
                    q_max: self.binary.0.ok_or_else(|| Error::validation("bank.binary_qmax", "missing"))?,
                    steps: self.binary.1.ok_or_else(|| Error::validation("bank.binary_steps", "missing"))?,
                    connection: self.binary.2.unwrap_or(Connection::Star),
                }
            }
            (true, false) => {}
        }

        let per_phase = self
            .ctl
            .iter()
            .find(|(k, _, _)| k == "per_phase")
            .map(|(_, v, _)| boolean("controller.per_phase", v))
            .transpose()?
            .unwrap_or(false);
        let bank_len = cfg.bank.len(per_phase);
        if bank_len > SwitchBits::MAX_LEN {
            return Err(Error::validation("bank", format!("at most {} units", SwitchBits::MAX_LEN)));
        }
        let mut ctl = cfg.controller.clone();
        if ctl.combo_presets[0].len() != bank_len {
            // presets for a bank other than the default lookup bank must be given explicitly
            ctl.combo_presets = [SwitchBits::zeros(bank_len); 3];
        }
        cfg.controller = self.controller(bank_len, ctl)?;
        if let Some(rate) = self.sample_rate {
            cfg.controller.front_end.sample_rate = rate;
        }
        if let Some(d) = self.duration {
            cfg.duration = d;
        }
        if !self.profile.is_empty() {
            cfg.profile = self.profile.clone();
        }
        cfg.faults = self.faults.clone();
        cfg.validate()?;
        Ok(cfg)
    }
}
