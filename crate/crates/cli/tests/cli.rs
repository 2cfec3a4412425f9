use std::path::Path;
use std::process::{Command, Output};

use campanato_core::campanato::{BasePoints, Campanato, CampanatoParams, Window};
use campanato_core::grid::GridField;
use campanato_core::harness;
use campanato_core::registry;
use serde_json::Value;

fn campanato(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_campanato"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn norm_of_abs_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("norm.json");
    let csv = dir.path().join("norm.csv");
    let out = campanato(&[
        "norm",
        "-f",
        "abs",
        "--s",
        "1",
        "--q",
        "1",
        "--p",
        "2",
        "--degree",
        "1",
        "--j-min",
        "-6",
        "--j-max",
        "3",
        "--per-axis",
        "9",
        "--report",
        s(&report),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json = read_json(&report);

    let f = registry::parse("abs", 1).unwrap();
    let base = BasePoints::lattice(vec![-1.0], vec![1.0], 9)
        .unwrap()
        .with_critical_points(&f);
    let params = CampanatoParams::new(1.0, 1.0, 2.0, 1, 0).unwrap();
    let expect = Campanato::new(1)
        .seminorm(&f, &params, &base, Window::new(-6, 3).unwrap())
        .unwrap();
    let got = json["result"]["value"].as_f64().unwrap();
    assert_eq!(got, expect.value);
    assert_eq!(
        json["result"]["report"]["argmax"][0].as_f64().unwrap(),
        expect.argmax[0]
    );
    // |x| has the same normalized oscillation 1/(2√3) at every scale around 0
    let per_scale = 1.0 / (2.0 * 3f64.sqrt());
    assert!((got - 10.0 * per_scale).abs() < 1e-9, "{got}");
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 11);
}

#[test]
fn verify_estimate1_rotation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("verify.json");
    let csv = dir.path().join("verify.csv");
    let out = campanato(&[
        "verify",
        "--inequality",
        "estimate1",
        "--problem",
        "rotation",
        "--set",
        "harness.checkpoints=5",
        "--set",
        "harness.per_axis=5",
        "--report",
        s(&report),
        "--csv",
        s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json = read_json(&report);
    let reports = json["result"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 1);
    let r = &reports[0];
    assert_eq!(r["id"], "estimate1");
    assert_eq!(r["pass"], true);
    assert_eq!(r["times"].as_array().unwrap().len(), 5);
    assert!(r["max_ratio"].as_f64().unwrap() <= r["budget"].as_f64().unwrap());
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 6);
}

#[test]
fn example_b_reports_the_jump() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("b.json");
    let out = campanato(&["example-b", "--set", "example_b.samples=21", "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json = read_json(&report);
    let expect = harness::appendix_b_example(2.0, 21, Window::new(-20, 4).unwrap(), 4).unwrap();
    assert_eq!(json["result"]["sup_sum"].as_f64().unwrap(), expect.sup_sum);
    assert_eq!(json["result"]["discontinuous"], true);
}

#[test]
fn invalid_configs_exit_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let cases: Vec<Vec<&str>> = vec![
        vec!["norm", "--s", "3", "--degree", "1"],
        vec!["norm", "--p", "1"],
        vec!["norm", "-f", "no_such_function"],
        vec!["norm", "--set", "params.t=1"],
        vec!["norm", "--j-min", "3", "--j-max", "1"],
        vec!["seqop", "--set", "seqop.values=[1, 2]", "--alpha", "1", "--beta", "1"],
        vec!["osc", "--dim", "2", "--x0", "0.5"],
        vec![
            "verify",
            "--inequality",
            "estimate1",
            "--problem",
            "rotation",
            "--set",
            "verify.s=0.5",
        ],
        vec!["verify", "--inequality", "nonsense"],
        vec!["solve", "--problem", "spiral"],
        vec!["norm", "--bogus-flag"],
        vec!["run"],
    ];
    for mut args in cases {
        args.extend(["--report", s(&report)]);
        let out = campanato(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!report.exists(), "{args:?} wrote a report");
    }

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"norm\"\n[params\np = 2\n").unwrap();
    assert_eq!(code(&campanato(&["run", "-c", s(&cfg)])), 2);
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("f.bin");
    let f = registry::parse("gauss", 1).unwrap();
    GridField::sample(&f, &[-1.0], &[1.0], 0.125)
        .unwrap()
        .write_binary(&grid)
        .unwrap();
    // the ball around x0 = 5 leaves the grid box
    let out = campanato(&["osc", "-f", s(&grid), "--x0", "5", "--j-min", "-2", "--j-max", "0"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oscillation"));
}

#[test]
fn run_reads_the_command_from_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let report = dir.path().join("p.json");
    std::fs::write(
        &cfg,
        format!(
            "command = \"project\"\n[function]\nspec = \"quad(2)\"\ndim = 2\n[params]\ndegree = 2\n[point]\nx0 = [0.5, -0.25]\nr = 0.5\n[output]\nreport = \"{}\"\n",
            s(&report)
        ),
    )
    .unwrap();
    let out = campanato(&["run", "-c", s(&cfg)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json = read_json(&report);
    // 2|x|² recentred at (1/2, -1/4): constant 2(1/4 + 1/16), linear 2, -1, quadratic 2, 0, 2
    let terms = json["result"]["polynomial"]["terms"].as_array().unwrap();
    let coeff = |a: u64, b: u64| {
        terms
            .iter()
            .find(|t| t[0][0].as_u64() == Some(a) && t[0][1].as_u64() == Some(b))
            .map(|t| t[1].as_f64().unwrap())
            .unwrap()
    };
    for (a, b, c) in [
        (0, 0, 0.625),
        (1, 0, 2.0),
        (0, 1, -1.0),
        (2, 0, 2.0),
        (1, 1, 0.0),
        (0, 2, 2.0),
    ] {
        assert!((coeff(a, b) - c).abs() < 1e-10, "({a},{b}): {}", coeff(a, b));
    }
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("seq.toml");
    let report = dir.path().join("s.json");
    std::fs::write(&cfg, "[seqop]\nvalues = [1.0, 0.0, 4.0]\nalpha = 2.0\nq = 1.0\n").unwrap();
    let out = campanato(&["seqop", "-c", s(&cfg), "--alpha", "1", "--report", s(&report)]);
    assert_eq!(code(&out), 0);
    let json = read_json(&report);
    assert_eq!(json["config"]["seqop"]["alpha"].as_f64(), Some(1.0));
    assert_eq!(json["result"]["alpha"].as_f64(), Some(1.0));
}

#[test]
fn outputs_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str, threads: &str| {
        let report = dir.path().join(format!("{tag}.json"));
        let csv = dir.path().join(format!("{tag}.csv"));
        let out = campanato(&[
            "osc",
            "-f",
            "bump(1.5, 2)",
            "--dim",
            "2",
            "--per-axis",
            "4",
            "--j-min",
            "-3",
            "--j-max",
            "1",
            "--p",
            "3",
            "--threads",
            threads,
            "--report",
            s(&report),
            "--csv",
            s(&csv),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(&report).unwrap(), std::fs::read(&csv).unwrap())
    };
    let a = run("a", "2");
    let b = run("a", "2");
    assert_eq!(a, b);
    let c = run("c", "1");
    assert_eq!(a.1, c.1);
    let result = |bytes: &[u8]| serde_json::from_slice::<Value>(bytes).unwrap()["result"].clone();
    assert_eq!(result(&a.0), result(&c.0));
}

#[test]
fn solve_writes_grid_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("f.bin");
    let out = campanato(&[
        "solve",
        "-f",
        "gauss",
        "--velocity",
        "constant(0.5)",
        "--horizon",
        "1",
        "--half",
        "1",
        "--set",
        "transport.spacing=0.0625",
        "--grid",
        s(&grid),
        "--report",
        s(&dir.path().join("r.json")),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let g = GridField::read_binary(&grid).unwrap();
    let f0 = registry::parse("gauss", 1).unwrap();
    for (i, v) in g.values().iter().enumerate() {
        let x = g.node(i)[0];
        assert!((v - f0.eval(&[x - 0.5]).unwrap()).abs() < 1e-10);
    }
}

#[test]
fn list_functions_names_the_registry() {
    let out = campanato(&["list-functions"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    for e in registry::ENTRIES {
        assert!(text.contains(e.name), "{} missing", e.name);
    }
    assert!(text.contains("rotation"));
}
