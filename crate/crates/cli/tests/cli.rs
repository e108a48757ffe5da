use std::path::Path;
use std::process::{Command, Output};

fn monodromy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monodromy"))
        .args(args)
        .env_remove("MONODROMY_TOL")
        .env_remove("MONODROMY_ATOL")
        .env_remove("MONODROMY_RTOL")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn analyze_preset_prints_a_focus_verdict() {
    let out = monodromy(&["analyze", "--preset", "ejfd"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["m"], 1);
    assert_eq!(v["m_source"], "iif");
    assert_eq!(v["verdict"]["verdict"]["kind"], "focus");
    assert_eq!(v["input"]["preset"], "ejfd");
}

#[test]
fn analyze_system_and_candidate_files() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write(dir.path(), "sys.txt", "x' = -y + x*(x^2+y^2); y' = x + y*(x^2+y^2)\n");
    let iif = write(dir.path(), "v0.txt", "(x^2+y^2)^2\n");
    let report = dir.path().join("report.json");
    let out = monodromy(&["analyze", &sys, "--iif", &iif, "--json", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["m"], 3);
    assert_eq!(v["verdict"]["verdict"]["lower_bound"], 1);
    assert_eq!(v["verdict"]["verdict"]["bound_is_exact"], true);
}

#[test]
fn analyze_writes_displacement_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let out = monodromy(&["analyze", "--preset", "ejfd", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r0,pi,dpi,d"));
    let k = (2.0 * std::f64::consts::PI).exp();
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        // Π(r0) = e^{2π} r0 and d = Π - r0
        assert!((v[1] / (k * v[0]) - 1.0).abs() < 1e-8, "{line}");
        assert!((v[3] - (v[1] - v[0])).abs() <= 1e-12 * v[1].abs());
    }
}

#[test]
fn reports_are_byte_identical() {
    let a = monodromy(&["analyze", "--preset", "ex4"]);
    let b = monodromy(&["analyze", "--preset", "ex4"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn abstaining_exits_with_two() {
    let out = monodromy(&["analyze", "--preset", "ex5", "--param", "nu2=3/10"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["verdict"]["verdict"]["kind"], "undecided");
}

#[test]
fn errors_exit_with_one_and_a_json_object() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write(dir.path(), "bad.txt", "x' = 1 + y; y' = x");
    let out = monodromy(&["analyze", &sys]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    // a constant term means the origin is not singular
    assert_eq!(v["error"]["kind"], "parse");
    assert!(v["error"]["message"].as_str().unwrap().contains("singular"));

    let out = monodromy(&["analyze", "--preset", "nosuch"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "usage");

    let out = monodromy(&["analyze", "--chart", "sideways", "--preset", "ex1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_eps_grid_is_a_usage_error() {
    let out = monodromy(&["bifurcate", "--preset", "ex3", "--family", "preset-ex3", "--eps", ","]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "usage");
}

#[test]
fn bifurcate_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let out = monodromy(&[
        "bifurcate",
        "--preset",
        "ex3",
        "--family",
        "preset-ex3",
        "--eps",
        "geom:1e-2:1e-4:3",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,cycle_count,radius_1");
    assert_eq!(lines.len(), 4);
    for (line, r) in lines[1..].iter().zip([0.1, 0.01f64.sqrt() / 10f64.sqrt(), 0.01]) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1], "1");
        let radius: f64 = fields[2].parse().unwrap();
        assert!((radius / r - 1.0).abs() < 1e-6, "{line}");
    }
    let v = json(&out);
    assert_eq!(v["family"]["kind"], "custom");
    assert_eq!(v["table"]["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn bifurcate_with_explicit_coefficients_and_user_multiplicity() {
    let out = monodromy(&[
        "bifurcate",
        "--preset",
        "ejbh",
        "--family",
        "degp1",
        "--m",
        "3",
        "--values",
        "-1",
        "--eps",
        "1e-2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["m_source"], "user");
    let row = &v["table"]["rows"][0];
    assert_eq!(row["count"], 1);
    assert!((row["radii"][0].as_f64().unwrap() - 0.1).abs() < 1e-9);
}

#[test]
fn bifurcate_auto_grid() {
    let out = monodromy(&["bifurcate", "--preset", "ejfd", "--family", "degp2", "--eps", "auto"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!(v["eps_max_admissible"].as_f64().unwrap() > 0.0);
    for row in v["table"]["rows"].as_array().unwrap() {
        assert_eq!(row["count"], 1);
    }
}

#[test]
fn analyze_with_family_sweep() {
    let out = monodromy(&["analyze", "--preset", "ex1", "--family", "degp2", "--eps", "1e-2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["bifurcation"][0]["rows"][0]["count"], 2);
    let out = monodromy(&["analyze", "--preset", "ex1", "--family", "degp2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("selftest.json");
    let out = monodromy(&["selftest", "--json", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    for k in 1..=9 {
        assert!(text.contains(&format!("[PASS] criterion {k}:")), "{text}");
    }
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 9);
}
