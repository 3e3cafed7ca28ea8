use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scuc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scuc"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Three generators and the battery over four steps, with its profile.
fn small_case(dir: &Path, loads: &[f64]) -> (PathBuf, PathBuf) {
    let mut v: Value = serde_json::from_str(scuc::scenario::REFERENCE_SCENARIO_JSON).unwrap();
    v["dgs"].as_array_mut().unwrap().truncate(3);
    v["horizon_steps"] = loads.len().into();
    v["initial_commitment"] = Value::Array(Vec::new());
    let scenario = dir.join("small.json");
    fs::write(&scenario, v.to_string()).unwrap();
    let mut csv = String::from("t,oc,sog_kn,p_prop_mw,p_hotel_mw,p_load_mw,v\n");
    for (t, l) in loads.iter().enumerate() {
        let v = u8::from(t % 2 == 1);
        csv += &format!("{},navigation,10,{},{},{},{v}\n", t + 1, l - 2.0, 2.0, l);
    }
    let profile = dir.join("small.csv");
    fs::write(&profile, csv).unwrap();
    (scenario, profile)
}

fn optimize(scenario: &Path, profile: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["optimize", "--scenario", p(scenario), "--profile", p(profile), "--out", p(out)];
    args.extend_from_slice(extra);
    scuc(&args)
}

const LOADS: [f64; 4] = [4.0, 6.5, 9.0, 7.0];

#[test]
fn help_lists_every_subcommand_and_default() {
    let out = stdout(&scuc(&["--help"]));
    for cmd in ["simulate-load", "optimize", "verify", "compare", "export-mps", "dump-fuel-curves"] {
        assert!(out.contains(cmd), "{cmd} missing from\n{out}");
    }
    let out = stdout(&scuc(&["optimize", "--help"]));
    for default in ["[default: 0.01]", "[default: 120]", "[default: 4]", "[default: 1000000]", "[default: 42]"] {
        assert!(out.contains(default), "{default} missing from\n{out}");
    }
}

#[test]
fn simulate_load_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    assert_eq!(code(&scuc(&["simulate-load", "--seed", "42", "--out", p(&a)])), 0);
    assert_eq!(code(&scuc(&["simulate-load", "--seed", "42", "--out", p(&b)])), 0);
    assert_eq!(code(&scuc(&["simulate-load", "--seed", "43", "--out", p(&c)])), 0);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_ne!(text, fs::read_to_string(&c).unwrap());
    assert!(text.starts_with("t,oc,sog_kn,p_prop_mw,p_hotel_mw,p_load_mw,v\n"));
    assert_eq!(text.lines().count(), 25);
}

#[test]
fn fuel_curve_dump() {
    let out = scuc(&["dump-fuel-curves"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dg_id,segment,p_start_mw,p_end_mw,slope_kg_per_h_per_mw,intercept_kg_per_h"));
    assert_eq!(lines.count(), 40);
}

#[test]
fn mps_export_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.mps");
    let out = scuc(&["export-mps", "--out", p(&path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let sections: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ') && !l.is_empty()).map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(sections, ["NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]);
    let e18 = text.lines().filter(|l| l.starts_with(" E  E18_")).count();
    assert_eq!(e18, 10);
    assert!(stdout(&out).contains("(524 binary)"));
    let bad = scuc(&["export-mps", "--out", "/nonexistent/dir/model.mps"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn missing_profile_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = scuc(&["optimize", "--profile", p(&dir.path().join("missing.csv")), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    assert!(!out_dir.exists());
}

#[test]
fn bad_options_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (s, pr) = small_case(dir.path(), &LOADS);
    let out = optimize(&s, &pr, &dir.path().join("r"), &["--gap", "-1"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn small_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let (s, pr) = small_case(dir.path(), &LOADS);
    let run = dir.path().join("run");
    let out = optimize(&s, &pr, &run, &["--gap", "0"]);
    assert_eq!(code(&out), 0, "{}\n{}", stdout(&out), String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "report.json", "schedule.csv", "plot_dispatch.csv", "plot_soc.csv", "verify.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let csv = fs::read_to_string(run.join("schedule.csv")).unwrap();
    assert!(csv.starts_with("t,p_dg1,p_dg2,p_dg3,z1,z2,z3,u1,u2,u3,p_charge,p_discharge,soc,p_load,v"));
    assert_eq!(csv.lines().count(), 5);

    let report: Value = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    let cost = report["total_cost"].as_f64().unwrap();
    let obj = report["solve"]["objective"].as_f64().unwrap();
    assert!((cost - obj).abs() <= 1e-6 * obj);
    assert_eq!(report["total_co2"].as_f64().unwrap(), report["total_fuel"].as_f64().unwrap() * 3.206);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["profile"]["kind"], "file");
    assert_eq!(manifest["scenario"]["sha256"].as_str().unwrap().len(), 64);

    let sched = run.join("schedule.csv");
    let verify = |path: &Path| code(&scuc(&["verify", "--scenario", p(&s), "--profile", p(&pr), "--schedule", p(path)]));
    assert_eq!(verify(&sched), 0);
    assert_eq!(verify(&run.join("report.json")), 0);
    // one extra megawatt on the first generator breaks the balance
    let mut lines: Vec<String> = csv.lines().map(String::from).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(String::from).collect();
    cells[1] = (cells[1].parse::<f64>().unwrap() + 1.0).to_string();
    cells[4] = "1".into();
    lines[1] = cells.join(",");
    let tampered = dir.path().join("tampered.csv");
    fs::write(&tampered, lines.join("\n") + "\n").unwrap();
    assert_eq!(verify(&tampered), 5);
}

#[test]
fn battery_comparison_and_guard() {
    let dir = tempfile::tempdir().unwrap();
    let (s, pr) = small_case(dir.path(), &LOADS);
    let (sc1, sc2) = (dir.path().join("sc1"), dir.path().join("sc2"));
    assert_eq!(code(&optimize(&s, &pr, &sc1, &["--gap", "0", "--no-bess"])), 0);
    assert_eq!(code(&optimize(&s, &pr, &sc2, &["--gap", "0"])), 0);
    let cost = |d: &Path| {
        let r: Value = serde_json::from_str(&fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
        r["total_cost"].as_f64().unwrap()
    };
    assert!(cost(&sc2) <= cost(&sc1) + 1e-9);

    let json = dir.path().join("cmp.json");
    let out = scuc(&["compare", p(&sc1), p(&sc2), "--out", p(&json)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("fuel saving of b"));
    let cmp: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(cmp["rows"][0]["metric"], "total_cost_eur");

    let out = scuc(&["compare", p(&sc2), p(&sc2), "--out", p(&json)]);
    assert_eq!(code(&out), 0);
    let cmp: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    for row in cmp["rows"].as_array().unwrap() {
        assert_eq!(row["delta"].as_f64(), Some(0.0), "{row}");
    }
    assert_eq!(cmp["fuel_saving_pct"].as_f64(), Some(0.0));

    let other = dir.path().join("other");
    fs::create_dir(&other).unwrap();
    let (s2, pr2) = small_case(&other, &[4.0, 6.5, 9.5, 7.0]);
    let sc3 = dir.path().join("sc3");
    assert_eq!(code(&optimize(&s2, &pr2, &sc3, &["--gap", "0"])), 0);
    let out = scuc(&["compare", p(&sc2), p(&sc3)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("different load profiles"));
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (s, pr) = small_case(dir.path(), &LOADS);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(code(&optimize(&s, &pr, &a, &["--workers", "1"])), 0);
    assert_eq!(code(&optimize(&s, &pr, &b, &["--workers", "3"])), 0);
    let manifest = a.join("manifest.json");
    assert_eq!(code(&scuc(&["optimize", "--manifest", p(&manifest), "--out", p(&c)])), 0);
    let read = |d: &Path| fs::read(d.join("schedule.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_eq!(read(&a), read(&c));

    // a changed input is refused
    fs::write(&pr, fs::read_to_string(&pr).unwrap().replace(",9,0", ",9.5,0")).unwrap();
    let out = scuc(&["optimize", "--manifest", p(&manifest), "--out", p(&dir.path().join("d"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn infeasible_and_limit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (s, pr) = small_case(dir.path(), &[4.0, 60.0, 9.0, 7.0]);
    let out = optimize(&s, &pr, &dir.path().join("inf"), &[]);
    assert_eq!(code(&out), 3, "{}", stdout(&out));

    let out = scuc(&["optimize", "--nodes", "1", "--out", p(&dir.path().join("lim"))]);
    assert_eq!(code(&out), 4, "{}", stdout(&out));
}
