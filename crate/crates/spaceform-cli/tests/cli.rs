use std::path::{Path, PathBuf};
use std::process::Command;

use proptest::prelude::*;
use serde_json::{json, Value};
use spaceform_cli::run_with;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn lab(args: &[&str]) -> Run {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["spaceform-lab"];
    argv.extend_from_slice(args);
    let code = run_with(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn seed_config() -> Value {
    json!({
        "seed": { "gallery": "problemstar_e1_Cneg" },
        "ambient": { "c": 0, "s": 0 },
        "grid": { "lo": [-1, -1, -1], "hi": [1, 1, 1], "n": [21, 21, 21] }
    })
}

fn transform_config() -> Value {
    let mut cfg = seed_config();
    cfg["grid"]["n"] = json!([9, 9, 9]);
    cfg["ribaucour"] = json!({ "preset": { "name": "r4", "theta": 0.3 } });
    cfg
}

#[test]
fn verify_triple_on_exact_seed() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let cfg = write_config(dir.path(), "seed.json", &seed_config());
    let r = lab(&["verify-triple", "--config", cfg.to_str().unwrap(), "--report", report.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);
    let rep = read_json(&report);
    assert_eq!(rep["passed"], true);
    for e in rep["residuals"]["entries"].as_array().unwrap() {
        assert!(e["max"].as_f64().unwrap() <= 1e-12, "{e}");
    }
    assert_eq!(rep["classification"]["kind"], "ProblemStar");
}

#[test]
fn pair_check_on_refined_box() {
    let dir = TempDir::new().unwrap();
    let mut cfg = seed_config();
    cfg["target"] = json!({ "c": 1, "s": 0 });
    cfg["grid"] = json!({ "lo": [-0.5, 0.2, -0.5], "hi": [0.5, 0.8, 0.5], "n": [61, 37, 61] });
    cfg["ribaucour"] = json!({ "preset": { "name": "r4", "theta": 0.3 } });
    cfg["tolerances"] = json!({ "report": 1e-5 });
    let report = dir.path().join("pair.json");
    cfg["outputs"] = json!({ "report": report });
    let path = write_config(dir.path(), "pair.json.in", &cfg);
    let r = lab(&["pair-check", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);
    let rep = read_json(&report);
    let metric = rep["residuals"]["entries"].as_array().unwrap().iter().find(|e| e["name"] == "metric").unwrap();
    assert!(metric["max"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn pair_check_rejects_wrong_target() {
    let dir = TempDir::new().unwrap();
    let mut cfg = seed_config();
    cfg["grid"]["n"] = json!([7, 7, 7]);
    cfg["target"] = json!({ "c": -1, "s": 0 });
    let path = write_config(dir.path(), "pair.json", &cfg);
    let r = lab(&["pair-check", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("/target"), "{}", r.err);
}

#[test]
fn gallery_eval_cflat_origin() {
    let r = lab(&["gallery", "eval", "--name", "cflat_K_minus1", "--at", "0,0,0"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out.trim(), "(0,0,0,0)");
    let r = lab(&["gallery", "eval", "--name", "r4_closed_form", "--at", "-0.2,0.1,0.3", "--theta", "0.5"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert_eq!(r.out.trim().trim_matches(|c| c == '(' || c == ')').split(',').count(), 4);
}

#[test]
fn gallery_list_names_every_item() {
    let r = lab(&["gallery", "list"]);
    assert_eq!(r.code, 0);
    for item in spaceform_core::gallery::GALLERY {
        assert!(r.out.contains(item.name));
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(lab(&["frobnicate"]).code, 1);
    assert_eq!(lab(&[]).code, 1);
    assert_eq!(lab(&["verify-triple"]).code, 1);
    assert_eq!(lab(&["gallery", "eval", "--name", "cflat", "--at", "0,0"]).code, 1);
    assert_eq!(lab(&["gallery", "eval", "--name", "no_such_item", "--at", "0,0,0"]).code, 1);
    assert_eq!(lab(&["verify-triple", "--config", "/nonexistent/config.json"]).code, 1);
    assert_eq!(lab(&["--help"]).code, 0);
}

#[test]
fn schema_errors_carry_pointer() {
    let dir = TempDir::new().unwrap();
    let mut cfg = seed_config();
    cfg["ambient"]["c"] = json!("one");
    let path = write_config(dir.path(), "bad.json", &cfg);
    let r = lab(&["verify-triple", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("/ambient/c"), "{}", r.err);

    let mut cfg = seed_config();
    cfg["seed"]["inline"] = json!({ "delta": [1, -1, 1], "v": [1, 0, 0], "V": [0, 1, 0] });
    let path = write_config(dir.path(), "both.json", &cfg);
    let r = lab(&["verify-triple", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("/seed"), "{}", r.err);
}

#[test]
fn threshold_violation_still_writes_report() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let cfg = json!({
        "seed": { "inline": { "delta": [1, -1, 1], "v": [1, 0, 0], "V": [0.3, 1, 0] } },
        "grid": { "lo": [-1, -1, -1], "hi": [1, 1, 1], "n": [5, 5, 5] },
        "outputs": { "report": report }
    });
    let path = write_config(dir.path(), "c.json", &cfg);
    let r = lab(&["verify-triple", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 2, "{}{}", r.out, r.err);
    let rep = read_json(&report);
    assert_eq!(rep["passed"], false);
    let gauss = rep["residuals"]["entries"].as_array().unwrap().iter().find(|e| e["name"] == "gauss").unwrap();
    assert!((gauss["max"].as_f64().unwrap() - 0.3).abs() < 1e-12);
}

#[test]
fn ribaucour_matches_closed_form_and_exports() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("f.csv");
    let mut cfg = transform_config();
    cfg["outputs"] = json!({ "csv": csv });
    let path = write_config(dir.path(), "t.json", &cfg);
    let r = lab(&["ribaucour", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);
    assert!(r.out.contains("closed_form"));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "u1,u2,u3,x1,x2,x3,x4");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(&first[..3], &[-1.0, -1.0, -1.0]);
    assert_eq!(text.lines().count(), 1 + 729);
}

#[test]
fn family_must_match_seed() {
    let dir = TempDir::new().unwrap();
    let mut cfg = transform_config();
    cfg["seed"]["gallery"] = json!("problemstar_e1_Cpos");
    let path = write_config(dir.path(), "t.json", &cfg);
    let r = lab(&["ribaucour", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("/ribaucour"), "{}", r.err);
}

#[test]
fn raw_state_ribaucour() {
    let dir = TempDir::new().unwrap();
    let mut cfg = seed_config();
    cfg["grid"] = json!({ "lo": [-0.3, -0.3, -0.3], "hi": [0.3, 0.3, 0.3], "n": [9, 9, 9] });
    cfg["ribaucour"] = json!({
        "state": { "gamma": [0.2, 0.1, -0.1], "beta": 0.4, "phi": 1.5, "vprime": [0.3, 0.1, 0.2], "k2": 1.0 }
    });
    let path = write_config(dir.path(), "raw.json", &cfg);
    let r = lab(&["ribaucour", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);
    assert!(!r.out.contains("closed_form"));
}

#[test]
fn cflat_check_passes_on_transform() {
    let dir = TempDir::new().unwrap();
    let cfg = json!({
        "seed": { "gallery": "cflat" },
        "grid": { "lo": [-0.5, -0.5, -0.5], "hi": [0.5, 0.5, 0.5], "n": [41, 41, 41] },
        "ribaucour": { "preset": { "name": "cflat", "k": -1, "theta": 0.3 } },
        "tolerances": { "report": 1e-5 }
    });
    let path = write_config(dir.path(), "cf.json", &cfg);
    let r = lab(&["cflat-check", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);

    // Problem-* data is not conformally flat; v′₂ vanishes on u₂ = 0
    let mut cfg = transform_config();
    cfg["grid"] = json!({ "lo": [-0.5, 0.2, -0.5], "hi": [0.5, 0.8, 0.5], "n": [9, 9, 9] });
    cfg["tolerances"] = json!({ "report": 1.0e3 });
    let path = write_config(dir.path(), "ps.json", &cfg);
    let r = lab(&["cflat-check", "--config", path.to_str().unwrap()]);
    assert_eq!(r.code, 2, "{}{}", r.out, r.err);
}

fn parse_obj(text: &str) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let (mut v, mut f) = (vec![], vec![]);
    for line in text.lines() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let x: Vec<f64> = it.map(|s| s.parse().unwrap()).collect();
                v.push([x[0], x[1], x[2]]);
            }
            Some("f") => {
                let x: Vec<usize> = it.map(|s| s.parse().unwrap()).collect();
                f.push([x[0], x[1], x[2]]);
            }
            other => panic!("unexpected OBJ line {other:?}"),
        }
    }
    (v, f)
}

#[test]
fn export_cflat_slice_obj() {
    let dir = TempDir::new().unwrap();
    let obj = dir.path().join("slice.obj");
    let cfg = json!({
        "seed": { "gallery": "cflat" },
        "grid": { "lo": [-0.5, -0.5, -0.5], "hi": [0.5, 0.5, 0.5], "n": [11, 11, 11] },
        "ribaucour": { "preset": { "name": "cflat", "k": -1, "theta": 0.3 } }
    });
    let path = write_config(dir.path(), "cf.json", &cfg);
    let r = lab(&["export", "--config", path.to_str().unwrap(), "--obj", obj.to_str().unwrap(), "--slice-value", "0"]);
    assert_eq!(r.code, 0, "{}{}", r.out, r.err);
    let (v, f) = parse_obj(&std::fs::read_to_string(&obj).unwrap());
    assert_eq!(v.len(), 121);
    assert_eq!(f.len(), 2 * 100);
    assert!(v.iter().flatten().all(|x| x.is_finite()));
    assert!(f.iter().flatten().all(|&i| (1..=v.len()).contains(&i)));

    let r =
        lab(&["export", "--config", path.to_str().unwrap(), "--obj", obj.to_str().unwrap(), "--projection", "0,0,1"]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("projection"), "{}", r.err);
    assert_eq!(lab(&["export", "--config", path.to_str().unwrap()]).code, 1);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let mut cfg = transform_config();
    let mut outputs = vec![];
    for k in 0..2 {
        let (csv, rep) = (dir.path().join(format!("{k}.csv")), dir.path().join(format!("{k}.json")));
        cfg["outputs"] = json!({ "csv": csv, "report": rep });
        let path = write_config(dir.path(), "t.json", &cfg);
        assert_eq!(lab(&["ribaucour", "--config", path.to_str().unwrap()]).code, 0);
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&rep).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

fn binary(args: &[&str], threads: &str) -> (Option<i32>, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_spaceform-lab"))
        .args(args)
        .env("SPACEFORM_LAB_THREADS", threads)
        .output()
        .unwrap();
    (out.status.code(), String::from_utf8(out.stderr).unwrap())
}

#[test]
fn thread_count_does_not_change_outputs() {
    let dir = TempDir::new().unwrap();
    let mut cfg = transform_config();
    let mut outputs = vec![];
    for threads in ["1", "3"] {
        let csv = dir.path().join(format!("{threads}.csv"));
        let rep = dir.path().join(format!("{threads}.json"));
        cfg["outputs"] = json!({ "csv": csv, "report": rep });
        let path = write_config(dir.path(), &format!("{threads}.cfg"), &cfg);
        let (code, err) = binary(&["ribaucour", "--config", path.to_str().unwrap()], threads);
        assert_eq!(code, Some(0), "{err}");
        outputs.push((std::fs::read(&csv).unwrap(), std::fs::read(&rep).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let (code, err) = binary(&["gallery", "list"], "zero");
    assert_eq!(code, Some(1));
    assert!(err.contains("SPACEFORM_LAB_THREADS"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Constant data with V = (0, a, b) over v = (1, 0, 0) in R⁴ has a Gauss
    /// residual of exactly |ab|; the exit code follows the threshold.
    #[test]
    fn exit_code_follows_threshold(a in -1.0f64..1.0, b in -1.0f64..1.0, tol in 1e-4f64..1.0) {
        let g = (a * b).abs();
        prop_assume!((g - tol).abs() > 1e-9);
        let dir = TempDir::new().unwrap();
        let report = dir.path().join("r.json");
        let cfg = json!({
            "seed": { "inline": { "delta": [1, -1, 1], "v": [1, 0, 0], "V": [0, a, b] } },
            "grid": { "lo": [-1, -1, -1], "hi": [1, 1, 1], "n": [5, 5, 5] },
            "tolerances": { "integrability": tol },
            "outputs": { "report": report }
        });
        let path = write_config(dir.path(), "c.json", &cfg);
        let r = lab(&["verify-triple", "--config", path.to_str().unwrap()]);
        prop_assert_eq!(r.code, if g > tol { 2 } else { 0 });
        prop_assert_eq!(read_json(&report)["passed"].as_bool().unwrap(), g <= tol);
    }
}
