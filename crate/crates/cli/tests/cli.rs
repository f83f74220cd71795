use std::path::Path;
use std::process::{Command, Output};

fn lgp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lgp"))
        .args(args)
        .current_dir(dir)
        .env_remove("LG_THREADS")
        .output()
        .expect("spawn lgp")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_disk_gallery_writes_certificate() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lgp(&["solve", "--gallery", "disk-linear", "--n", "128", "--out", "d"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = tmp.path().join("d");
    for f in ["u.csv", "T_x.csv", "T_y.csv", "report.json", "u.pgm", "u_contours.csv"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let r = report(&d.join("report.json"));
    let e = &r["solve"]["energy"];
    let gap = e["gap"].as_f64().unwrap();
    assert!(gap.abs() <= 1e-3 * std::f64::consts::PI, "gap {gap}");
    assert!(r["solve"]["converged"].as_bool().unwrap());
}

#[test]
fn certify_reproduces_solve_energies() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["--shape", "disk:1", "--data", "linear-x", "--n", "32"];
    let mut args = vec!["solve"];
    args.extend(base);
    args.extend(["--out", "s"]);
    assert_eq!(code(&lgp(&args, tmp.path())), 0);
    let mut args = vec!["certify"];
    args.extend(base);
    args.extend(["--u", "s/u.csv", "--tx", "s/T_x.csv", "--ty", "s/T_y.csv", "--out", "c"]);
    assert_eq!(code(&lgp(&args, tmp.path())), 0);
    let solved = report(&tmp.path().join("s/report.json"));
    let cert = report(&tmp.path().join("c/certificate.json"));
    for k in ["relaxed_total", "dual", "gap", "div_residual", "feas_residual"] {
        assert_eq!(solved["solve"]["energy"][k], cert[k], "{k}");
    }
}

#[test]
fn structure_subcommand_reports_alignment() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["--shape", "box:1,1", "--data", "top-edge", "--n", "16"];
    let mut args = vec!["solve"];
    args.extend(base);
    args.extend(["--out", "s"]);
    lgp(&args, tmp.path());
    let mut args = vec!["structure"];
    args.extend(base);
    args.extend(["--u", "s/u.csv", "--tx", "s/T_x.csv", "--ty", "s/T_y.csv"]);
    let o = lgp(&args, tmp.path());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["alignment"]["weighted_mean_alignment"].is_number());
    assert!(v["boundary"]["jump_faces"].is_array());
}

#[test]
fn barrier_annulus_fails_on_inner_circle() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lgp(&["barrier", "--shape", "annulus:0.5,1", "--n", "128", "--out", "b"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("verdict: fails"));
    let r = report(&tmp.path().join("b/barrier.json"));
    assert_eq!(r["quantities"]["inner_fail"].as_f64(), Some(1.0));
    assert_eq!(r["quantities"]["outer_pass"].as_f64(), Some(1.0));
    let csv = std::fs::read_to_string(tmp.path().join("b/barrier.csv")).unwrap();
    assert!(csv.starts_with("face,x,y,nx,ny,component,S,class"));
}

#[test]
fn validation_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&lgp(&["solve", "--config", "missing.cfg", "--out", "x"], tmp.path())), 1);
    assert_eq!(code(&lgp(&["solve", "--bogus"], tmp.path())), 1);
    assert_eq!(code(&lgp(&["gallery", "run", "no-such-entry"], tmp.path())), 1);
    assert_eq!(code(&lgp(&["imaging", "--phantom", "const:-1", "--n", "16"], tmp.path())), 1);
    assert_eq!(code(&lgp(&["solve", "--shape", "disk:1", "--data", "linear-x", "--n", "4", "--out", "x"], tmp.path())), 1);
    let o = lgp(&["solve", "--shape", "disk:1", "--data", "linear-x", "--out", "x"], tmp.path());
    assert_eq!(code(&o), 0);
    let bad = Command::new(env!("CARGO_BIN_EXE_lgp"))
        .args(["perimeter", "--domain", "box:1,1", "--set", "box:0.5,1"])
        .env("LG_THREADS", "zero")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&bad), 0, "perimeter does not use threads");
    let bad = Command::new(env!("CARGO_BIN_EXE_lgp"))
        .args(["solve", "--shape", "disk:1", "--data", "linear-x", "--n", "16", "--out", "y"])
        .env("LG_THREADS", "zero")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&bad), 1);
}

#[test]
fn config_file_drives_solve() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("p.toml"),
        "[problem]\nshape = \"disk:1\"\nn = 24\n\n[boundary]\ndata = \"linear-y\"\n\n[solver]\ncheck_every = 50\n",
    )
    .unwrap();
    let o = lgp(&["solve", "--config", "p.toml", "--out", "o"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&tmp.path().join("o/report.json"));
    assert_eq!(r["problem"]["problem"]["n"], 24);
    std::fs::write(tmp.path().join("bad.toml"), "[problem]\nshape = \"disk:1\"\nbogus = 1\n[boundary]\ndata = \"linear-x\"\n").unwrap();
    assert_eq!(code(&lgp(&["solve", "--config", "bad.toml", "--out", "o2"], tmp.path())), 1);
}

#[test]
fn non_convergence_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lgp(
        &["solve", "--shape", "box:1,1", "--data", "top-edge", "--n", "16", "--max-iters", "20", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(tmp.path().join("o/report.json").exists());
}

#[test]
fn repeated_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["solve", "--shape", "box:1,1", "--data", "top-edge:1,0.2", "--n", "16", "--max-iters", "3000", "--out", out]
    };
    lgp(&args("a"), tmp.path());
    lgp(&args("b"), tmp.path());
    let threaded = Command::new(env!("CARGO_BIN_EXE_lgp"))
        .args(args("c"))
        .env("LG_THREADS", "4")
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(threaded.status.code().is_some());
    let read = |d: &str, f: &str| std::fs::read(tmp.path().join(d).join(f)).unwrap();
    for f in ["u.csv", "T_x.csv", "T_y.csv"] {
        assert_eq!(read("a", f), read("b", f), "{f}");
        assert_eq!(read("a", f), read("c", f), "{f} threaded");
    }
    let strip = |d: &str| {
        let mut r = report(&tmp.path().join(d).join("report.json"));
        r["problem"]["solver"]["threads"] = serde_json::json!(0);
        r
    };
    assert_eq!(read("a", "report.json"), read("b", "report.json"));
    assert_eq!(strip("a"), strip("c"));
}

#[test]
fn checkpoint_resume_matches_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let base = ["solve", "--shape", "box:1,1", "--data", "top-edge", "--n", "16", "--checkpoint"];
    let run = |extra: &[&str]| {
        let mut a: Vec<&str> = base.to_vec();
        a.extend(extra);
        lgp(&a, tmp.path())
    };
    run(&["--max-iters", "300", "--out", "first"]);
    run(&["--max-iters", "300", "--out", "second", "--resume", "first/checkpoint"]);
    run(&["--max-iters", "600", "--out", "straight"]);
    for f in ["u.csv", "u_bar.csv", "V_x.csv", "V_y.csv", "checkpoint.json"] {
        let a = std::fs::read(tmp.path().join("second/checkpoint").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("straight/checkpoint").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn gallery_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lgp(&["gallery", "list"], tmp.path());
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().count() >= 7);
    let o = lgp(&["gallery", "run", "perimeter-half-square", "--out", "g"], tmp.path());
    assert_eq!(code(&o), 0);
    let r = report(&tmp.path().join("g/report.json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["quantities"]["perimeter"].as_f64(), Some(3.0));
}

#[test]
fn perimeter_and_imaging() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lgp(&["perimeter", "--domain", "box:1,1", "--set", "box:0.5,1", "--n", "32"], tmp.path());
    assert_eq!(stdout(&o).trim(), "3");
    let o = lgp(&["imaging", "--phantom", "layered", "--n", "24", "--out", "im"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&tmp.path().join("im/report.json"));
    assert!(r["rel_l2_error_c"].as_f64().unwrap() <= 5e-2);
    assert!(tmp.path().join("im/c_recovered.csv").exists());
}
