use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use paracz::io;
use serde_json::Value;
use tempfile::TempDir;

const CALIBRATION: &str = r#"{"omega_p": 88.53563442712957, "duration": 180.04936411448162, "edge": 24.0,
    "epsilon": 0.6051880824246092, "entangling_phase": 3.1415926541966552, "phase_error": 6.068621161148258e-10,
    "frame_z": [2.437716042328616, 0.0788850917185571], "g_eff": 3.31557122861992,
    "residual_11_02_population": 8.260644000801509e-05}"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, json: &str) -> PathBuf {
        let p = self.path("config.json");
        std::fs::write(&p, json).unwrap();
        p
    }

    fn out(&self, name: &str) -> PathBuf {
        self.path(name)
    }

    fn paracz(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_paracz")).args(args).current_dir(self.dir.path()).output().unwrap()
    }
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}\nstderr: {}", o.status.code(), String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn dum_rows_match_grid_and_minimum_sits_near_the_sweet_spot() {
    let r = Run::new();
    let cfg = r.config(r#"{"dum": {"epsilon_min": 0.0, "epsilon_max": 1.2, "points": 61}}"#);
    let out = r.out("o");
    ok(&r.paracz(&["dum", "--config", arg(&cfg), "--out", arg(&out), "--svg"]));
    let (meta, curve) = io::read_shift_csv(std::fs::read(out.join("dum.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(curve.epsilon.len(), 61);
    let argmin = curve.shift_mhz.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert!((curve.epsilon[argmin] - 0.6).abs() <= 0.1, "minimum at {}", curve.epsilon[argmin]);
    assert!((curve.sweet_spot - 0.6).abs() <= 0.1);
    assert_eq!(meta.config_sha256, io::config_hash(&std::fs::read(&cfg).unwrap()));
    assert!(std::fs::read_to_string(out.join("dum.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn zero_tunability_is_an_error_exit() {
    let r = Run::new();
    let cfg = r.config(
        r#"{"device": {
            "tunable": {"f_max": 4.475, "f_min": 4.475, "anharmonicity": 200, "t1": 23.6, "t2_star": 19.45, "tunable": true},
            "fixed": {"f_max": 3.826, "f_min": 3.826, "anharmonicity": 200, "t1": 15.9, "t2_star": 14.65, "tunable": false}}}"#,
    );
    let o = r.paracz(&["dum", "--config", arg(&cfg), "--out", arg(&r.out("o"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweet spot"));
    assert!(!r.out("o").join("dum.csv").exists());
}

#[test]
fn configuration_errors_exit_with_code_two_and_name_the_key() {
    let r = Run::new();
    let cases = [
        (r#"{"dum": {"points": 1}}"#, "dum", "dum.points"),
        (r#"{"dum": {"pionts": 10}}"#, "dum", "pionts"),
        (r#"{"seed": 1}"#, "coherence", "coherence"),
        (r#"{}"#, "irb", "seed"),
        (r#"{"seed": 1, "irb": {"rb": {"lengths": [1, 2]}}}"#, "irb", "irb.rb"),
        (r#"{"chevron": {"duration_min": 10}}"#, "chevron", "chevron.duration_min"),
        (r#"not json"#, "dum", "expected"),
    ];
    for (json, cmd, key) in cases {
        let cfg = r.config(json);
        let o = r.paracz(&[cmd, "--config", arg(&cfg), "--out", arg(&r.out("o"))]);
        let err = String::from_utf8_lossy(&o.stderr);
        assert_eq!(o.status.code(), Some(2), "{json}: {err}");
        assert!(err.contains(key), "{json}: {err}");
    }
    let o = r.paracz(&["psd", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_code_one() {
    let r = Run::new();
    let blocker = r.path("file");
    std::fs::write(&blocker, "").unwrap();
    let o = r.paracz(&["dum", "--out", arg(&blocker.join("sub"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ideal_gates_give_unit_decay_and_zero_infidelity() {
    let r = Run::new();
    let cfg = r.config(r#"{"seed": 5, "irb": {"gate": {"ideal": true}, "rb": {"sequences_per_length": 6}, "replicants": 50}}"#);
    let out = r.out("o");
    ok(&r.paracz(&["irb", "--config", arg(&cfg), "--out", arg(&out)]));
    let v = json(&out.join("irb.json"));
    assert_eq!(v["metadata"]["seed"], 5);
    let res = &v["result"];
    assert!((res["reference"]["p"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((res["interleaved"]["p"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(res["irb"]["infidelity"].as_f64().unwrap().abs() < 1e-9);
    assert!(res["calibration"].is_null());
    let (_, data) = io::read_rb_csv(std::fs::read(out.join("irb_decays.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(data.records.len(), 2 * 6 * 6);
    assert!(data.records.iter().all(|r| r.successes == r.shots));
}

#[test]
fn seed_flag_overrides_config_and_reruns_are_byte_identical() {
    let r = Run::new();
    let cfg = r.config(r#"{"seed": 1, "irb": {"gate": {"calibration": CAL, "decoherence": true}, "rb": {"lengths": [1, 4, 16, 48], "sequences_per_length": 5}, "replicants": 40}}"#.replace("CAL", CALIBRATION).as_str());
    let run = |name: &str, seed: &str| {
        let out = r.out(name);
        ok(&r.paracz(&["irb", "--config", arg(&cfg), "--seed", seed, "--out", arg(&out), "--svg"]));
        ["irb.json", "irb_decays.csv", "irb_decays.svg"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let a = run("a", "9");
    let b = run("b", "9");
    let c = run("c", "10");
    assert_eq!(a, b);
    assert_ne!(a[1], c[1]);
    let v: Value = serde_json::from_slice(&a[0]).unwrap();
    assert_eq!(v["metadata"]["seed"], 9);
    let p_ref = v["result"]["reference"]["p"].as_f64().unwrap();
    assert!(p_ref > 0.8 && p_ref < 1.0, "{p_ref}");
}

#[test]
fn repeated_irb_and_ptm_with_a_stored_calibration() {
    let r = Run::new();
    let cfg = r.config(
        r#"{"seed": 3, "ptm": {"gate": {"calibration": CAL, "decoherence": false}},
            "repeat_irb": {"gate": {"calibration": CAL},
                           "repeated": {"experiments": 4, "replicants": 100,
                                        "rb": {"lengths": [1, 4, 16, 48], "sequences_per_length": 6}}}}"#
            .replace("CAL", CALIBRATION)
            .as_str(),
    );
    let out = r.out("o");
    ok(&r.paracz(&["ptm", "--config", arg(&cfg), "--out", arg(&out), "--svg"]));
    let v = json(&out.join("ptm.json"));
    let f = v["result"]["average_gate_fidelity"].as_f64().unwrap();
    assert!(f > 0.999, "{f}");
    let (_, m) = io::read_real_matrix_csv(std::fs::read(out.join("ptm.csv")).unwrap().as_slice(), 16).unwrap();
    // Only leakage out of the computational subspace shrinks the identity row.
    assert!((m[(0, 0)] - 1.0).abs() < 1e-3);

    let o = r.paracz(&["repeat-irb", "--config", arg(&cfg), "--out", arg(&out), "--svg"]);
    let v = json(&out.join("repeat_irb.json"));
    let experiments = v["result"]["summary"]["experiments"].as_array().unwrap();
    assert_eq!(experiments.len(), 4);
    if o.status.success() {
        let (_, e) = io::read_ecdf_csv(std::fs::read(out.join("ecdf.csv")).unwrap().as_slice()).unwrap();
        assert_eq!(e.values.len(), v["result"]["retained"].as_u64().unwrap() as usize);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    } else {
        // Fewer than two retained experiments leave no ECDF to draw.
        assert_eq!(o.status.code(), Some(3));
        assert!(v["result"]["retained"].as_u64().unwrap() < 2);
    }
}

#[test]
fn psd_summary_reports_the_floor_and_hashes_the_input() {
    let r = Run::new();
    let mut text = String::from("frequency_mhz,power_dbm_hz\n");
    for k in 0..200 {
        let f = 0.01 * 1.05f64.powi(k);
        let p = -145.0 + 10.0 * (1.0 + 0.5 / f).log10();
        text.push_str(&format!("{f},{p}\n"));
    }
    let input = r.path("psd.csv");
    std::fs::write(&input, &text).unwrap();
    let out = r.out("o");
    ok(&r.paracz(&["psd", arg(&input), "--out", arg(&out), "--svg"]));
    let v = json(&out.join("psd_summary.json"));
    assert_eq!(v["metadata"]["extra"]["input_sha256"], io::config_hash(text.as_bytes()));
    assert_eq!(v["result"]["points"], 200);
    let floor = v["result"]["white_floor_dbm_hz"].as_f64().unwrap();
    assert!((floor + 145.0).abs() < 1.0, "{floor}");
    assert!(out.join("psd.svg").exists());
}

#[test]
fn chevron_grid_round_trips() {
    let r = Run::new();
    let cfg = r.config(r#"{"chevron": {"freq_points": 3, "duration_min": 60, "duration_max": 270, "duration_points": 8}}"#);
    let out = r.out("o");
    ok(&r.paracz(&["chevron", "--config", arg(&cfg), "--out", arg(&out), "--svg"]));
    let (meta, d) = io::read_chevron_csv(std::fs::read(out.join("chevron.csv")).unwrap().as_slice()).unwrap();
    assert_eq!(d.frequencies.len(), 3);
    assert_eq!(d.durations, vec![60.0, 90.0, 120.0, 150.0, 180.0, 210.0, 240.0, 270.0]);
    assert!(d.population.iter().flatten().all(|p| (-1e-9..=1.0 + 1e-9).contains(p)));
    assert!(meta.extra.contains_key("epsilon"));
}

#[test]
fn calibrate_reaches_high_fidelity() {
    let r = Run::new();
    let out = r.out("o");
    ok(&r.paracz(&["calibrate", "--out", arg(&out)]));
    let v = json(&out.join("calibration.json"));
    let f = v["result"]["average_gate_fidelity"].as_f64().unwrap();
    assert!(f > 0.999, "{f}");
    let phase = v["result"]["calibration"]["entangling_phase"].as_f64().unwrap();
    assert!((phase - std::f64::consts::PI).abs() < 1e-3);
}
