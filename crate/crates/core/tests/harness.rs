use sparc_core::dictionary::build_mub_prime;
use sparc_core::harness::{
    bler_csv_string, run_bler_sweep, run_se_trace, run_theorem1_check, write_se_csv, SeTraceConfig, SimConfig,
};

fn config(extra_decoders: &str, sweep: &str, antennas: usize) -> SimConfig {
    let text = format!(
        r#"
schema_version = 1
config_id = "test"
seed = 11
[dictionary]
prime = 13
sections = 2
[channel]
antennas = {antennas}
[sweep]
{sweep}
[[decoder]]
kind = "mlmp"
{extra_decoders}
"#
    );
    SimConfig::from_toml_str(&text).unwrap()
}

#[test]
fn replay_is_byte_identical_and_batch_independent() {
    let decs = "[[decoder]]\nkind = \"mbomp\"\n[[decoder]]\nkind = \"samp\"\nse = \"online\"";
    let a = config(decs, "ebn0_db = [2.0, 6.0]\nmax_trials = 300\nmin_errors = 20", 4);
    let mut b = a.clone();
    b.sweep.batch = 7;
    let ra = bler_csv_string(&run_bler_sweep(&a).unwrap(), false).unwrap();
    let rb = bler_csv_string(&run_bler_sweep(&b).unwrap(), false).unwrap();
    let rc = bler_csv_string(&run_bler_sweep(&a).unwrap(), false).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(ra, rc);
    assert!(ra.starts_with("config_id,decoder,ebn0_db,trials,block_errors,bler,wall_seconds,seed,low_confidence\n"));
}

#[test]
fn stop_rule_is_exact_per_decoder() {
    let cfg = config("[[decoder]]\nkind = \"bomp\"", "ebn0_db = [0.0, 20.0]\nmax_trials = 400\nmin_errors = 15", 4);
    let records = run_bler_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    for r in &records {
        assert!(r.trials <= 400);
        assert!(r.trials == 400 || r.block_errors == 15, "{r:?}");
        assert!((r.bler - r.block_errors as f64 / r.trials as f64).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&r.bler));
        assert_eq!(r.low_confidence, r.block_errors < 10);
    }
    // At 0 dB both decoders stop on errors; at 20 dB on trials with few errors.
    assert!(records[..2].iter().all(|r| r.block_errors == 15));
    assert!(records[2..].iter().all(|r| r.trials == 400 && r.low_confidence));
}

#[test]
fn paired_decoders_see_the_same_trials() {
    // Identical decoders under different names must produce identical counts,
    // and MLMP with one path can never beat itself with a different label.
    let decs = "name = \"first\"\n[[decoder]]\nkind = \"mlmp\"\nname = \"second\"";
    let cfg = config(decs, "ebn0_db = [3.0]\nmax_trials = 500\nmin_errors = 1000", 4);
    let r = run_bler_sweep(&cfg).unwrap();
    assert_eq!(r[0].block_errors, r[1].block_errors);
    assert!(r[0].block_errors > 0);
}

#[test]
fn diversity_helps() {
    let sweep = "ebn0_db = [6.0]\nmax_trials = 3000\nmin_errors = 100000";
    let d1 = run_bler_sweep(&config("", sweep, 1)).unwrap();
    let d4 = run_bler_sweep(&config("", sweep, 4)).unwrap();
    assert!(d4[0].bler <= d1[0].bler, "D=4 {} vs D=1 {}", d4[0].bler, d1[0].bler);
}

#[test]
fn noiseless_regime_recovers_everything() {
    let rows = run_theorem1_check(&[13], None, 200, 4, 3).unwrap();
    assert_eq!(rows.iter().map(|r| r.k).collect::<Vec<_>>(), vec![1, 2]);
    assert!(rows.iter().all(|r| r.within_bound && r.pass() && r.trials == 200));
}

#[test]
fn se_trace_no_signal_limit_and_replay() {
    let dict = build_mub_prime(13).unwrap().partitioned(2).unwrap();
    let mut cfg = SeTraceConfig::new(-40.0, 2, 20, 8);
    cfg.se_draws = 200;
    let trace = run_se_trace(&dict, &cfg).unwrap();
    let tau0 = trace.rows[0].tau_sq_predicted;
    for r in &trace.rows {
        assert!((r.tau_sq_predicted / tau0 - 1.0).abs() < 1e-3, "{r:?}");
        assert!((r.tau_sq_empirical / tau0 - 1.0).abs() < 0.05, "{r:?}");
    }
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_se_csv(&trace.rows, &mut a).unwrap();
    write_se_csv(&run_se_trace(&dict, &cfg).unwrap().rows, &mut b).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("t,tau_sq_predicted,tau_sq_empirical\n"));
}
