use pfc_core::report::{records_csv, RECORD_HEADER};
use pfc_core::sim::run_batch;
use pfc_core::{run_scenario, Execution, Health, Mode, ScenarioConfig};

const STEP: &str = "
duration = 1.0

[bank]
binary_qmax = 2700
binary_steps = 4
connection = star

[controller]
mode = greedy
debounce_scans = 5

[profile]
t=0.0 i=3.0
t=0.5 i=6.0
";

#[test]
fn step_load_settles_and_never_leads() {
    let cfg = ScenarioConfig::parse(STEP).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    assert_eq!(trace.records.len(), 101);
    for r in &trace.records {
        assert!(r.lagging, "leading at t={}", r.time);
        assert!(r.q_cap <= r.q_load + 1e-9);
    }
    let before = trace.records.iter().rfind(|r| r.time < 0.5).unwrap();
    let after = trace.last().unwrap();
    assert!(after.q_cap > before.q_cap);
    assert!(after.corrected_pf > after.load_pf);
}

#[test]
fn debounce_delays_the_first_command() {
    let cfg = ScenarioConfig::parse(STEP).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    let first = trace.records.iter().position(|r| !r.command.none()).unwrap();
    // five matching scans starting at t = 0
    assert_eq!(first, 4);
    for e in &trace.events {
        let half_periods = e.time * 100.0;
        assert!((half_periods - half_periods.round()).abs() < 1e-6, "{e:?}");
    }
}

#[test]
fn stuck_open_unit_is_routed_around() {
    let text = format!("{STEP}\n[faults]\nt=0.8 unit=3 health=stuck_open\n");
    let cfg = ScenarioConfig::parse(&text).unwrap();
    let trace = run_scenario(&cfg).unwrap();
    let last = trace.last().unwrap();
    assert_eq!(last.faults.len(), 1);
    assert_eq!(last.faults[0].to_string(), "u3:stuck_open");
    assert!(!last.command.get(3));
    assert!(last.lagging);
}

#[test]
fn injected_health_reaches_the_bank() {
    let mut cfg = ScenarioConfig::for_mode(Mode::Greedy).with_constant_load(4.0);
    cfg.faults.push(pfc_core::scenario::FaultInjection { time: 0.0, unit: 0, health: Health::StuckClosed });
    let trace = run_scenario(&cfg).unwrap();
    let last = trace.last().unwrap();
    assert!(last.engaged.get(0));
    assert!(last.lagging);
}

#[test]
fn lookup_mode_follows_regions() {
    let text = "
duration = 1.0
[controller]
mode = lookup
[profile]
t=0.0 i=3.5
t=0.5 i=6.5
";
    let trace = run_scenario(&ScenarioConfig::parse(text).unwrap()).unwrap();
    let mid = trace.records.iter().rfind(|r| r.time < 0.5).unwrap();
    assert_eq!(mid.command.to_string(), "11100000");
    assert_eq!(trace.last().unwrap().command.to_string(), "00000111");
}

#[test]
fn per_phase_handles_unbalance() {
    let text = "
duration = 0.5
[bank]
binary_qmax = 2700
binary_steps = 4
[controller]
per_phase = true
[profile]
t=0.0 ia=3.0 ib=4.0 ic=5.0
";
    let cfg = ScenarioConfig::parse(text).unwrap();
    assert_eq!(cfg.bank.len(true), 12);
    let trace = run_scenario(&cfg).unwrap();
    let last = trace.last().unwrap();
    assert!(last.lagging);
    assert!(last.corrected_pf > last.load_pf);
}

#[test]
fn csv_is_stable_across_runs_and_execution_modes() {
    let cfg = ScenarioConfig::parse(STEP).unwrap();
    let one = run_batch(&[cfg.clone(), cfg.clone()], Execution::Parallel);
    let two = run_batch(&[cfg], Execution::Sequential);
    let a = records_csv(&one[0].as_ref().unwrap().records);
    let b = records_csv(&one[1].as_ref().unwrap().records);
    let c = records_csv(&two[0].as_ref().unwrap().records);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.starts_with(RECORD_HEADER));
}

#[test]
fn out_of_table_profile_is_a_runtime_error() {
    let cfg = ScenarioConfig::parse("[profile]\nt=0 i=2.0\n").unwrap();
    let err = run_scenario(&cfg).unwrap_err();
    assert!(err.is_runtime());
}
