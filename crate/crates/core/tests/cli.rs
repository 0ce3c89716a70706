use std::path::PathBuf;
use std::process::{Command, Output};

fn homfrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homfrac")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("homfrac-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{}: {}", e, String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn constants_report_q() {
    let o = homfrac(&["constants", "--group", "heisenberg:1", "--gauge", "koranyi", "--seed", "7", "--samples", "20000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["Q"], 4.0);
    assert_eq!(v["m"], 2);
    for k in ["sigma_Q", "tau_m", "vol_B1"] {
        assert!(v[k]["std_err"].as_f64().unwrap() > 0.0, "{} lacks an error bar", k);
    }
}

#[test]
fn bad_grading_exits_2_and_names_the_triple() {
    let p = scratch("bad.json");
    std::fs::write(&p, r#"{"name":"bad","n":3,"weights":[1,1,1],"brackets":[{"i":1,"j":2,"k":3,"c":1.0}]}"#).unwrap();
    let o = homfrac(&["validate", "--group", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(1, 2, 3)"));
}

#[test]
fn config_errors_exit_2() {
    for args in [
        vec!["fracop", "--s", "1.5"],
        vec!["seminorm", "--group", "nosuch:3"],
        vec!["gauge-check", "--group", "heisenberg:1", "--gauge", "parabolic"],
        vec!["fracop", "--point", "1,2"],
        vec!["no-such-command"],
    ] {
        let o = homfrac(&args);
        assert_eq!(o.status.code(), Some(2), "{:?}: {}", args, String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn hedberg_json() {
    let o = homfrac(&["hedberg", "--Q", "4", "--s", "0.5"]);
    assert!(o.status.success());
    let b = json(&o)["bracket"].as_f64().unwrap();
    assert!((b - (3f64.powf(0.25) + 3f64.powf(-0.75))).abs() < 1e-12);
}

#[test]
fn counterexample_csv() {
    let o = homfrac(&["counterexample", "--k", "1,4,16,64,256", "--eta", "0.1,0.01,0.001"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,eta,shift,ratio,disjoint_value,disjoint"));
    assert_eq!(lines.count(), 15);
}

#[test]
fn fracop_reads_points_and_is_reproducible() {
    let pts = scratch("points.csv");
    std::fs::write(&pts, "x,y,t\n0,0,0\n0.3,-0.2,0.1\n").unwrap();
    let args = ["fracop", "--group", "heisenberg:1", "--s", "0.5", "--samples", "20000", "--points", pts.to_str().unwrap()];
    let a = homfrac(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = String::from_utf8(a.stdout.clone()).unwrap();
    assert_eq!(text.lines().next(), Some("point,value,std_err,tail_bound"));
    assert_eq!(text.lines().count(), 3);
    let mut one = vec!["--threads", "1"];
    one.extend_from_slice(&args);
    assert_eq!(homfrac(&one).stdout, a.stdout);
}

#[test]
fn sobolev_opt_writes_trace_and_dump() {
    let dump = scratch("ext.hfg1");
    let trace = scratch("trace.csv");
    let o = homfrac(&[
        "sobolev-opt", "--group", "heisenberg:1", "--s", "0.5", "--grid", "8", "--box", "6", "--iters", "20", "--samples", "20000",
        "--dump", dump.to_str().unwrap(), "-o", trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(&dump).unwrap();
    assert_eq!(&bytes[..4], b"HFG1");
    let field = homfrac_core::sobolev::read_hfg1(&mut bytes.as_slice()).unwrap();
    assert_eq!(field.counts, vec![8, 8, 8]);
    let t = std::fs::read_to_string(&trace).unwrap();
    let q: Vec<f64> = t.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(q.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn quick_report_lists_every_criterion() {
    let out = scratch("report.json");
    let o = homfrac(&["report", "--quick", "-o", out.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    let ids: Vec<u64> = v["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, (1..=16).collect::<Vec<_>>());
    assert_eq!(v["profile"], "quick");
    let passed = v["passed"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if passed { 0 } else { 1 }));
    for c in v["criteria"].as_array().unwrap() {
        assert!(c["seconds"].as_f64().is_some() && c["seed"] == 7);
    }
}
