use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use metricflow::generators::min_c;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_metricflow"))
}

fn run(args: &[&str]) -> Output {
    cli().args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn two_point(dir: &Path, name: &str, d: &str, steps: &str) -> PathBuf {
    let out = dir.join(name);
    let o = run(&["generate", "two-point", "--D", d, "--steps", steps, "-o", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn csv_rows(o: &Output) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn col(rows: &[Vec<String>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn generate_to_stdout_is_a_document() {
    let o = run(&["generate", "static", "--points", "4", "--steps", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["format_version"], 1);
    assert_eq!(v["grid"].as_array().unwrap().len(), 4);
}

#[test]
fn product_of_generated_flows_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let a = two_point(dir.path(), "a.json", "1", "4");
    let b = dir.path().join("b.json");
    assert_eq!(run(&["generate", "static", "--points", "3", "--steps", "4", "-o", p(&b)]).status.code(), Some(0));
    let prod = dir.path().join("prod.json");
    assert_eq!(run(&["generate", "product", p(&a), p(&b), "-o", p(&prod)]).status.code(), Some(0));
    let o = run(&["verify", "--mode", "randomized", "--seeds", "32", p(&prod)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn gaussian_is_flagged_approximate_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.json");
    let o = run(&["generate", "gaussian", "--L", "6", "--h", "0.5", "--steps", "3", "-o", p(&g)]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["verify", "--mode", "randomized", "--seeds", "32", p(&g)]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}");
    assert!(text.contains("approximate"));
}

#[test]
fn verify_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let f = two_point(dir.path(), "f.json", "1", "3");
    let rep = dir.path().join("rep.json");
    assert_eq!(run(&["verify", "--mode", "skip", "--json", p(&rep), p(&f)]).status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["gradient_verdict"], "skipped");
}

#[test]
fn distance_to_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = two_point(dir.path(), "f.json", "1", "3");
    let o = run(&["distance", p(&f), p(&f)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("r = 0 "));
}

#[test]
fn distance_accepts_relation_file_and_rejects_off_grid_j() {
    let dir = tempfile::tempdir().unwrap();
    let f = two_point(dir.path(), "f.json", "1", "2");
    let g = two_point(dir.path(), "g.json", "1.1", "2");
    let rel = dir.path().join("rel.json");
    let entries: Vec<_> = [0.0, 0.5, 1.0].iter().map(|t| serde_json::json!({"time": t, "pairs": [[0, 0], [1, 1]]})).collect();
    std::fs::write(&rel, serde_json::to_string(&entries).unwrap()).unwrap();
    let o = run(&["distance", p(&f), p(&g), "--relation", p(&rel), "--E-mode", "empty"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(run(&["distance", p(&f), p(&g), "--J", "0.25"]).status.code(), Some(2));
    assert_eq!(run(&["distance", p(&f), p(&g), "--exhaustive", "--relation", p(&rel)]).status.code(), Some(2));
}

#[test]
fn triangle_over_three_files_holds() {
    let dir = tempfile::tempdir().unwrap();
    let fs: Vec<PathBuf> =
        ["1", "1.1", "1.2"].iter().enumerate().map(|(i, d)| two_point(dir.path(), &format!("f{i}.json"), d, "2")).collect();
    let o = run(&["triangle", p(&fs[0]), p(&fs[1]), p(&fs[2])]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn var_curve_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let f = two_point(dir.path(), "f.json", "2", "10");
    let o = run(&["report", p(&f), "--quantity", "var-curve", "--start1", "0", "--start2", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&o);
    let c = min_c() * (1.0 + 1e-6);
    for (t, v) in col(&rows, 0).into_iter().zip(col(&rows, 1)) {
        // Independent walkers from opposite points differ with probability ½ + ½e^{−2Ca/D²}.
        let a = 1.0 - t;
        let exact = 4.0 * (0.5 + 0.5 * (-2.0 * c * a / 4.0).exp());
        assert!((v - exact).abs() <= 1e-12, "t = {t}: {v} vs {exact}");
    }
}

#[test]
fn b_function_steps_at_distance_over_r() {
    let dir = tempfile::tempdir().unwrap();
    let f = two_point(dir.path(), "f.json", "1", "2");
    let csv_path = dir.path().join("b.csv");
    let o = run(&[
        "report", p(&f), "--quantity", "b-function", "--start1", "uniform", "--r", "2", "--eps-min", "0.05", "--samples", "20",
        "--csv", p(&csv_path),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("eps,b\n"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec.unwrap();
        let (eps, b): (f64, f64) = (rec[0].parse().unwrap(), rec[1].parse().unwrap());
        if eps < 0.49 {
            assert_eq!(b, 0.5, "eps = {eps}");
        } else if eps > 0.51 {
            assert_eq!(b, 1.0, "eps = {eps}");
        }
    }
}

#[test]
fn dw1_curve_is_monotone_and_d_integral_within_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("s.json");
    assert_eq!(run(&["generate", "static", "--points", "4", "--steps", "6", "-o", p(&f)]).status.code(), Some(0));
    let w = col(&csv_rows(&run(&["report", p(&f), "--quantity", "dW1-curve"])), 1);
    assert!(w.windows(2).all(|p| p[1] >= p[0] - 1e-12), "{w:?}");
    let o = run(&["report", p(&f), "--quantity", "d-integral"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(csv_rows(&o).iter().all(|r| r[5] == "true"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = two_point(dir.path(), "f.json", "1", "2");
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["verify", p(&dir.path().join("missing.json"))]).status.code(), Some(2));
    assert_eq!(run(&["report", p(&f), "--quantity", "b-function", "--time", "0.3"]).status.code(), Some(2));
    let o = cli().env("METRICFLOW_THREADS", "many").args(["verify", "--mode", "skip", p(&f)]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = cli().env("METRICFLOW_THREADS", "1").args(["verify", "--mode", "skip", p(&f)]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn unknown_document_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = two_point(dir.path(), "f.json", "1", "2");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&f).unwrap()).unwrap();
    v["extra"] = serde_json::json!(1);
    std::fs::write(&f, v.to_string()).unwrap();
    assert_eq!(run(&["verify", p(&f)]).status.code(), Some(2));
}
