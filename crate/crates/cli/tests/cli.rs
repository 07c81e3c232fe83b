use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wlibor"));
    c.env_remove("WLIBOR_THREADS");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn bench() -> String {
    config("benchmark.json").display().to_string()
}

#[test]
fn fit_reports_xis() {
    let o = run(&["fit", &bench()]);
    assert!(o.status.success(), "{o:?}");
    let out = stdout(&o);
    assert!(out.contains("base direction -c·I"));
    let rows: Vec<&str> = out.lines().skip_while(|l| !l.starts_with("k,")).skip(1).collect();
    assert_eq!(rows.len(), 12);
    let xis: Vec<f64> = rows.iter().map(|r| r.split(',').nth(3).unwrap().parse().unwrap()).collect();
    assert!(xis.windows(2).all(|w| w[0] > w[1]));
    assert_eq!(xis[11], 0.0);
}

#[test]
fn atm_two_year_caplet_verifies() {
    let o = run(&["--threads", "2", "price", &bench(), "caplet", "--k", "6", "--verify", "--paths", "40000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("verify ok"), "{out}");
    let price: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("price "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(price > 0.0 && price < 1e-3);
}

#[test]
fn swaption_and_cap_prices() {
    let o = run(&["price", &bench(), "swaption", "--i", "3", "--m", "9"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("Receiver swaption 3x9"));
    let o = run(&["price", &bench(), "cap", "--first", "1", "--last", "11", "--strike", "0.05"]);
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn domain_errors_exit_two() {
    let o = run(&["price", &bench(), "caplet", "--k", "12"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["fit", "/nonexistent/model.json"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(config("benchmark.json")).unwrap();
    std::fs::write(&bad, text.replacen("        3.75,\n        0.0,\n", "        3.75,\n", 1)).unwrap();
    let o = run(&["fit", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("wishart.sigma0") && err.contains("line 5"), "{err}");
}

#[test]
fn insufficient_mass_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("steep.json");
    let text = std::fs::read_to_string(config("benchmark.json")).unwrap();
    // An explicit base direction too small to reach the first bond ratio.
    let text = text.replacen(
        "\"n_tenors\": 12,",
        "\"n_tenors\": 12,\n    \"base_direction\": { \"dim\": 2, \"data\": [-1e-9, 0.0, 0.0, -1e-9] },",
        1,
    );
    std::fs::write(&path, text).unwrap();
    let o = run(&["fit", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exceed"));
}

#[test]
fn surfaces_are_bit_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = bench();
    for (kind, format) in [
        ("caplet", "csv"),
        ("caplet", "json"),
        ("swaption-atm", "csv"),
        ("atm-term", "csv"),
        ("atm-term", "json"),
    ] {
        let a = dir.path().join(format!("{kind}-a.{format}"));
        let b = dir.path().join(format!("{kind}-b.{format}"));
        for out in [&a, &b] {
            let mut args = vec!["surface", cfg.as_str(), "--kind", kind, "--format", format];
            args.extend(["--out", out.to_str().unwrap()]);
            if kind == "caplet" {
                args.extend(["--tenors", "1,8"]);
            }
            if kind == "swaption-atm" {
                args.extend(["--tenors", "3,6", "--lengths", "1,3"]);
            }
            let o = run(&args);
            assert!(o.status.success(), "{kind}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let ta = std::fs::read(&a).unwrap();
        assert_eq!(ta, std::fs::read(&b).unwrap(), "{kind} {format}");
        let text = String::from_utf8(ta).unwrap();
        if format == "csv" {
            assert!(text.starts_with("# schema_version=1"));
        } else {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["schema_version"], 1);
        }
    }
}

#[test]
fn simulate_dumps_paths_and_honours_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let o = run(&[
            "--seed", seed, "simulate", &bench(), "--horizon", "1", "--paths", "1000", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{o:?}");
        std::fs::read_to_string(p).unwrap()
    };
    let a = out("a.csv", "5");
    assert!(a.starts_with("# schema_version=1 seed=5"));
    assert_eq!(a, out("b.csv", "5"));
    assert_ne!(a, out("c.csv", "6"));

    let p = dir.path().join("jump.csv");
    let o = run(&[
        "simulate", config("jump_ou.json").to_str().unwrap(), "--horizon", "2", "--out", p.to_str().unwrap(), "--paths", "1000",
    ]);
    assert!(o.status.success(), "{o:?}");
}

#[test]
fn thread_count_does_not_change_results() {
    let price = |threads: &str| {
        let o = bin()
            .env("WLIBOR_THREADS", threads)
            .args(["price", &bench(), "caplet", "--k", "3", "--verify", "--paths", "5000"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{o:?}");
        stdout(&o)
    };
    assert_eq!(price("1"), price("3"));
}

#[test]
fn verify_exit_code_reflects_failures() {
    let o = run(&["verify", &bench(), "--suite", "quick"]);
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("criterion")).count(), 11);
    let failed = out.lines().any(|l| l.contains(" FAIL "));
    assert_eq!(o.status.code(), Some(if failed { 3 } else { 0 }));
}
