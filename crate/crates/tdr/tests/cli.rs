//! End-to-end checks of the `tdr` binary: schemas, exit codes, seed
//! precedence, and output layout.

use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tdr"))
}

fn read_lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn dr_curve_schema_is_pinned() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dr.csv");
    let status = binary()
        .args(["dr-curve", "--D", "0", "--trials", "50", "--region_radius", "20"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let lines = read_lines(&out);
    assert_eq!(lines[0], "# schema=tdr.dr-curve.v1");
    let header = lines.iter().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "D,exact,upper,lower,simulated,ci_lo,ci_hi,flag");
    // D = 0 produces exactly one data row.
    let data_rows = lines.iter().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, 2, "header plus one row");
    // The config echo makes the file self-describing.
    assert!(lines.iter().any(|l| l == "# lambda=0.1"));
    assert!(lines.iter().any(|l| l == "# seed=0"));
}

#[test]
fn other_schemas_are_pinned() {
    let dir = tempfile::tempdir().unwrap();

    let out = dir.path().join("d1.csv");
    assert!(binary()
        .args(["tc-vs-d1", "--D", "1", "--trials", "50", "--region_radius", "20"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let lines = read_lines(&out);
    assert_eq!(lines[0], "# schema=tdr.tc-vs-d1.v1");
    assert!(lines.contains(&"D1,D2,exact_tc,lb_tc,sim_tc,ci_lo,ci_hi,flag".to_string()));
    assert!(lines.iter().any(|l| l.starts_with("# argmax exact_tc D1=")));

    let out = dir.path().join("hops.csv");
    assert!(binary()
        .args(["tc-vs-hops", "--D", "2", "--N_max", "2", "--trials", "50", "--region_radius", "20"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let lines = read_lines(&out);
    assert_eq!(lines[0], "# schema=tdr.tc-vs-hops.v1");
    assert!(lines.contains(
        &"N,per_hop_budget,lb_tc,lb_tc_spread,sim_tc,ci_lo,ci_hi,sparse_approx".to_string()
    ));

    let out = dir.path().join("sim.csv");
    assert!(binary()
        .args(["simulate", "--D", "1", "--trials", "50", "--region_radius", "20"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let lines = read_lines(&out);
    assert_eq!(lines[0], "# schema=tdr.simulate.v1");
    assert!(lines.iter().any(|l| l.starts_with("# analytic within CI:")));
}

#[test]
fn two_hop_dr_curve_keeps_bound_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dr2.csv");
    let status = binary()
        .args(["dr-curve", "--hops", "1,1", "--D", "3", "--trials", "300", "--region_radius", "30"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let lines = read_lines(&out);
    let mut rows = 0;
    for line in lines.iter().filter(|l| !l.starts_with('#')).skip(1) {
        let fields: Vec<f64> =
            line.split(',').take(7).map(|f| f.parse().unwrap()).collect();
        let (exact, upper, lower) = (fields[1], fields[2], fields[3]);
        assert!(lower <= exact + 1e-9 && exact <= upper + 1e-9, "row: {line}");
        rows += 1;
    }
    assert_eq!(rows, 4);
    // Each row documents the budget split it used.
    assert!(lines.iter().any(|l| l.starts_with("# split D=3: budgets=")));
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "lambda=0.1\nwobble=3\n").unwrap();
    let status = binary().args(["simulate", "--config"]).arg(&conf).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn missing_required_budget_exits_2() {
    let status = binary().args(["dr-curve", "--trials", "10"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn infeasible_allocation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("opt.conf");
    std::fs::write(&conf, "hops=\nD=4\n").unwrap();
    let status = binary().args(["optimize", "--config"]).arg(&conf).status().unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn unreachable_tolerance_exits_4() {
    let status = binary()
        .args(["dr-curve", "--D", "0", "--trials", "10", "--region_radius", "20"])
        .args(["--quad_rel_tol", "1e-300"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn seed_environment_variable_with_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("seeded.csv");
    let conf = dir.path().join("seeded.conf");
    std::fs::write(&conf, format!("D=0\ntrials=20\nregion_radius=20\nseed=5\noutput={}\n", out.display()))
        .unwrap();

    // Environment overrides the file...
    assert!(binary()
        .args(["simulate", "--config"])
        .arg(&conf)
        .env("SEED", "77")
        .status()
        .unwrap()
        .success());
    assert!(read_lines(&out).contains(&"# seed=77".to_string()));

    // ...and the flag overrides the environment.
    assert!(binary()
        .args(["simulate", "--config"])
        .arg(&conf)
        .env("SEED", "77")
        .args(["--seed", "9"])
        .status()
        .unwrap()
        .success());
    assert!(read_lines(&out).contains(&"# seed=9".to_string()));
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("empty.csv");
    let status = binary()
        .args(["simulate", "--trials", "10"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let lines = read_lines(&out);
    let data_rows = lines.iter().filter(|l| !l.starts_with('#')).count();
    assert_eq!(data_rows, 1, "only the column header");
}

#[test]
fn optimize_emits_parseable_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alloc.jsonl");
    let status = binary()
        .args(["optimize", "--hops", "0.5,1.5", "--D", "4", "--hop-table", "--N_max", "3"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let alloc: serde_json::Value = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!(alloc["integer_budgets"], serde_json::json!([1, 3]));
    assert!(alloc["multiplier"].as_f64().unwrap() < 0.0);
    // One hop-table row per scanned N.
    assert_eq!(lines.clone().count(), 3);
    for line in lines {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(row["hops"].as_u64().unwrap() >= 1);
    }
}

#[test]
fn plot_script_references_the_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curve.csv");
    let status = binary()
        .args(["dr-curve", "--D", "1", "--trials", "50", "--region_radius", "20", "--emit-plot"])
        .arg("--output")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let script = std::fs::read_to_string(dir.path().join("curve.gp")).unwrap();
    assert!(script.contains("plot"));
    assert!(script.contains("curve.csv"));
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rerun.csv");
    let run = || {
        assert!(binary()
            .args(["simulate", "--D", "2", "--trials", "200", "--region_radius", "30", "--seed", "3"])
            .arg("--output")
            .arg(&out)
            .status()
            .unwrap()
            .success());
        std::fs::read(&out).unwrap()
    };
    assert_eq!(run(), run());
}
