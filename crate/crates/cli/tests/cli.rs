use std::fs;
use std::process::Command;

fn hdiv(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_hdiv"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn experiment_csv_is_deterministic_without_timestamp() {
    let args = [
        "experiment", "--n", "2", "--k", "0", "--radii", "12,16", "--samples", "2", "--seed", "5",
        "--no-timestamp",
    ];
    let (ok, a, err) = hdiv(&args);
    assert!(ok, "{err}");
    let (_, b, _) = hdiv(&args);
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("r,sample,mass_a,mass_b,rho_guaranteed,rho_achieved,i_o,seconds"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn experiment_with_timestamp_has_comment_header() {
    let (ok, out, err) = hdiv(&["experiment", "--radii", "12", "--samples", "1"]);
    assert!(ok, "{err}");
    assert!(out.starts_with("# upper-bound estimator"));
}

#[test]
fn empty_radii_is_empty_output() {
    let (ok, out, err) = hdiv(&["experiment", "--radii", "", "--no-timestamp"]);
    assert!(ok, "{err}");
    assert_eq!(out.lines().count(), 1);
}

#[test]
fn config_file_and_json_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# planar pairs\nn = 2\nk = 0\nradii = 12,16,24\nsamples = 2\nseed = 3\nno-timestamp = true\n").unwrap();
    let csv = dir.path().join("out.csv");
    let sum = dir.path().join("summary.json");
    let (ok, _, err) = hdiv(&[
        "experiment",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        sum.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&sum).unwrap()).unwrap();
    assert_eq!(v["estimator"], "upper-bound estimator");
    assert!(v["exponent_mass_b"]["slope"].is_number());
    for key in ["c_tau", "c_eta", "c_q", "c_r_tilde", "m", "m_prime", "d_tilde", "d_q"] {
        assert!(!v["constants"][key].is_null(), "{key}");
    }

    let (ok, out, err) = hdiv(&["fit", "--in", csv.to_str().unwrap()]);
    assert!(ok, "{err}");
    let f: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(f["slope"].as_f64().unwrap() > 0.0);
}

#[test]
fn fill_and_avoid_fill_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    fs::write(&a, "1 12,5\n-1 -12,5\n").unwrap();
    let (ok, out, err) = hdiv(&["fill", "--in", a.to_str().unwrap()]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["mass_b"].as_f64().unwrap() >= 24.0);

    let b = dir.path().join("b.txt");
    let (ok, out, err) = hdiv(&[
        "avoid-fill", "--in", a.to_str().unwrap(), "--r", "13", "--eps", "1", "--out", b.to_str().unwrap(),
    ]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["check"]["fills"], true);
    assert!(fs::read_to_string(&b).unwrap().lines().count() > 0);
}

#[test]
fn avoid_fill_rejects_non_avoidant_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    fs::write(&a, "1 1,0\n-1 -1,0\n").unwrap();
    let (ok, _, err) = hdiv(&["avoid-fill", "--in", a.to_str().unwrap(), "--r", "13"]);
    assert!(!ok);
    assert!(err.contains("avoidant"), "{err}");
}

#[test]
fn scaffold_reports_blowup_constants() {
    let (ok, out, err) = hdiv(&["scaffold", "--n", "2", "--k", "0", "--eps", "1"]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["N"], 3);
    assert_eq!(v["M"].as_array().unwrap().len(), 2);
}

#[test]
fn carnot_brackets() {
    let (ok, out, err) = hdiv(&["carnot", "--group", "abelian:2", "--r", "3"]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["lower"], 1.0);
    assert_eq!(v["upper"], 1.0);
    let (ok, out, _) = hdiv(&["carnot", "--group", "heisenberg:1", "--samples", "256"]);
    assert!(ok);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["lower"].as_f64().unwrap() <= v["upper"].as_f64().unwrap());
    let (ok, _, _) = hdiv(&["carnot", "--group", "heisenberg:3"]);
    assert!(!ok);
}

#[test]
fn verify_passes() {
    let (ok, out, err) = hdiv(&["verify", "--samples", "3"]);
    assert!(ok, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["checks"].as_array().unwrap().len() >= 7);
    assert!(err.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn bad_format_is_an_error() {
    let (ok, _, _) = hdiv(&["experiment", "--format", "xml"]);
    assert!(!ok);
}
