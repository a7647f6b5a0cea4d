use std::path::Path;
use std::process::{Command, Output};

use phasespace::numerics::{PhaseField, Side};

const THERMAL: &str = r#"{"kind":"thermal","params":{"nbar":0.5}}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasespace")).args(args).output().expect("binary runs")
}

fn run_env(args: &[&str], key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasespace"))
        .args(args)
        .env(key, val)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn figure1_is_deterministic_and_peaks_at_kernel_height() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["figure1", "--out", d.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["vacuum.csv", "p_max.csv", "thermal.csv", "squeezed_re.csv", "squeezed_im.csv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    let text = String::from_utf8(read(&a.path().join("vacuum.csv"))).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# phasespace ") && text.contains("config_sha256="));
    let rows: Vec<(f64, f64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && *l != "t,value")
        .map(|l| {
            let (t, v) = l.split_once(',').unwrap();
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 321);
    let (t, peak) = rows.iter().cloned().fold((0.0, f64::NEG_INFINITY), |m, r| if r.1 > m.1 { r } else { m });
    assert_eq!(t, 0.0);
    assert!((peak - 4.0 / (std::f64::consts::PI * std::f64::consts::PI)).abs() < 1e-15);
}

#[test]
fn classify_thermal_has_no_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["classify", "--state", THERMAL, "--grid", "4,81", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&read(&out)).unwrap();
    assert_eq!(v["verdict"], "consistent-with-classical");
    assert!(v["criteria"].as_array().unwrap().iter().all(|c| c["verdict"] != "nonclassical-certified"));
    assert_eq!(v["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_path = dir.path().join("missing").join("x.csv");
    let cases: Vec<Vec<&str>> = vec![
        vec!["charfn", "--state", "{not json"],
        vec!["charfn", "--state", r#"{"kind":"thermal"}"#],
        vec!["charfn", "--state", THERMAL, "--grid", "2,4"],
        vec!["filtered", "--state", THERMAL, "--w", "0"],
        vec!["charfn", "--state", THERMAL, "--grid", "2,5", "--out", bad_path.to_str().unwrap()],
        vec!["verify", "--only", "12"],
        vec!["charfn"],
    ];
    for args in cases {
        assert_eq!(code(&run(&args)), 2, "{args:?}");
    }
    assert_eq!(code(&run_env(&["figure1", "--out", dir.path().to_str().unwrap()], "PHASESPACE_THREADS", "zero")), 2);
}

#[test]
fn runtime_errors_exit_with_one() {
    // |γ| >= 1 makes the Fock-diagonal series diverge
    let o = run(&["fockdiag", "--state", r#"{"kind":"thermal","params":{"nbar":1.0}}"#]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_subset_passes() {
    let o = run(&["verify", "--only", "5,9"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("criterion  5 PASS") && text.contains("criterion  9 PASS"));
}

#[test]
fn charfn_csv_round_trips_and_ignores_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let (one, many) = (dir.path().join("one.csv"), dir.path().join("many.csv"));
    let args = |p: &Path| vec!["charfn".to_string(), "--state".into(), THERMAL.into(), "--grid".into(), "2,9".into(), "--s".into(), "-1".into(), "--out".into(), p.to_str().unwrap().into()];
    let a1 = args(&one);
    let a2 = args(&many);
    assert_eq!(code(&run_env(&a1.iter().map(String::as_str).collect::<Vec<_>>(), "PHASESPACE_THREADS", "1")), 0);
    assert_eq!(code(&run_env(&a2.iter().map(String::as_str).collect::<Vec<_>>(), "PHASESPACE_THREADS", "4")), 0);
    assert_eq!(read(&one), read(&many));
    let field = PhaseField::read_csv(Side::Beta, std::fs::File::open(&one).unwrap()).unwrap();
    let grid = field.grid().unwrap();
    assert_eq!(grid.resolution(), 9);
    for (k, z) in field.values().unwrap().iter().enumerate() {
        let b = grid.point_at(k);
        let want = (-(0.5 + 1.0) * b.norm_sqr()).exp();
        assert!((z.re - want).abs() < 1e-15 && z.im == 0.0);
    }
}

#[test]
fn filtered_cut_matches_between_formats() {
    let csv = run(&["filtered", "--state", THERMAL, "--grid", "3,31", "--cut", "im"]);
    let json = run(&["filtered", "--state", THERMAL, "--grid", "3,31", "--cut", "im", "--format", "json"]);
    assert_eq!(code(&csv), 0);
    assert_eq!(code(&json), 0);
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    let values: Vec<f64> = v["value"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let text = String::from_utf8(csv.stdout).unwrap();
    let from_csv: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && *l != "t,value")
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    // serde_json's default float parser is not correctly rounded
    assert_eq!(values.len(), from_csv.len());
    assert!(values.iter().zip(&from_csv).all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs()));
    assert!(values.iter().all(|&x| x >= -1e-9));
}
