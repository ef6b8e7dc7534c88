use std::path::Path;
use std::process::{Command, Output};

use roughalg::integration::{rough_integral, RoughIntegralProblem};
use roughalg::one_form::{LipOneFormData, PolynomialOneForm};
use roughalg::sewing::SewOptions;
use roughalg::signature::{lift_path, PiecewiseLinearPath};

fn roughalg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roughalg")).args(args).output().unwrap()
}

fn write_inputs(dir: &Path) -> (String, String) {
    let path = dir.join("path.csv");
    std::fs::write(&path, "t,x1\n0,0\n0.5,0.5\n1,1\n").unwrap();
    let form = dir.join("form.json");
    let identity = PolynomialOneForm::new(1, 1, vec![vec![0.0], vec![1.0]]).unwrap();
    std::fs::write(&form, serde_json::to_string(&identity).unwrap()).unwrap();
    (path.display().to_string(), form.display().to_string())
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn integrate_identity_form_on_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let (path, form) = write_inputs(dir.path());
    let out = roughalg(&["integrate", "--path", &path, "--one-form", &form]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["level1"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn integrate_matches_library_call_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let (path, form) = write_inputs(dir.path());
    let out = roughalg(&["integrate", "--path", &path, "--one-form", &form, "--p", "2.5", "--depth", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);

    let curve = PiecewiseLinearPath::from_csv_path(Path::new(&path)).unwrap();
    let poly = PolynomialOneForm::from_json_str(&std::fs::read_to_string(&form).unwrap()).unwrap();
    let lip = LipOneFormData::from_polynomial(&poly, 3.0);
    let mut prob = RoughIntegralProblem::new(lift_path(&curve, 6), lip, 2.5, (0.0, 1.0), 2);
    prob.sew = SewOptions { tol: 1e-10, max_level: 20, min_level: 1 };
    prob.strict = false;
    let r = rough_integral(&prob).unwrap();
    assert_eq!(v["element"], serde_json::to_value(&r.element).unwrap());
    assert_eq!(v["level1"], serde_json::to_value(&r.level1).unwrap());
}

#[test]
fn out_flag_writes_the_same_document() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = write_inputs(dir.path());
    let file = dir.path().join("sig.json");
    let stdout = roughalg(&["signature", "--path", &path, "--depth", "3"]);
    let to_file = roughalg(&["signature", "--path", &path, "--depth", "3", "--out", file.to_str().unwrap()]);
    assert_eq!(to_file.status.code(), Some(0));
    assert!(to_file.stdout.is_empty());
    assert_eq!(std::fs::read(&file).unwrap(), stdout.stdout);
}

#[test]
fn malformed_csv_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "t,x1\n0,0\n1,oops\n").unwrap();
    let out = roughalg(&["signature", "--path", bad.to_str().unwrap(), "--depth", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn verify_exit_codes() {
    assert_eq!(roughalg(&["verify", "--suite", "hopf", "--seed", "1", "--cases", "5"]).status.code(), Some(0));
    assert_eq!(roughalg(&["verify", "--suite", "signature", "--seed", "1", "--cases", "5", "--tol", "0"]).status.code(), Some(1));
    assert_eq!(roughalg(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(roughalg(&["bogus-command"]).status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let curve = PiecewiseLinearPath::sample(|t| vec![(5.0 * t).sin(), (3.0 * t).cos()], 0.0, 1.0, 40).unwrap();
    std::fs::write(&path, curve.to_csv()).unwrap();
    let form = dir.path().join("form.json");
    let quad = PolynomialOneForm::new(2, 1, vec![vec![1.0, 0.5], vec![0.3, -1.0, 0.7, 0.2], vec![0.5; 8]]).unwrap();
    std::fs::write(&form, serde_json::to_string(&quad).unwrap()).unwrap();
    let out = roughalg(&[
        "integrate",
        "--path",
        path.to_str().unwrap(),
        "--one-form",
        form.to_str().unwrap(),
        "--p",
        "2.5",
        "--tol",
        "1e-300",
        "--max-level",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(json(&out)["report"].is_object());
}

#[test]
fn thread_cap_is_validated_and_output_is_stable() {
    let args = ["verify", "--suite", "changevar", "--seed", "7", "--cases", "5"];
    let a = roughalg(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_roughalg")).args(args).env("ROUGHALG_THREADS", "1").output().unwrap();
    assert_eq!(a.stdout, b.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_roughalg")).args(args).env("ROUGHALG_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
