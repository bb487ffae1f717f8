use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
kind = "tracking"
epsilon = 0.5
gamma = 10.0
times = 3
snapshots = 50
snr_db = 10.0
seed = 3

[grid]
spatial = [{ min = -3.0, max = 3.0, count = 12 }]

[[arrays]]
model = "fourier"
sensors = 3

[[sources]]
power = 1.0
waypoints = [[-1.0], [1.0]]

[output]
peaks = 1

[solver]
max_sweeps = 5000
"#;

fn momt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_momt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let out = dir.path().join("out");
    let o = momt(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in [
        "marginal_t0.csv",
        "marginal_t2.csv",
        "peaks.json",
        "report.json",
        "timing.json",
    ] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(out.join("marginal_t1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,mass"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r[1] >= 0.0));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"]["converged"], true);
    let masses: Vec<f64> = report["marginals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["mass"].as_f64().unwrap())
        .collect();
    // all marginals of one transport plan carry the same mass
    for m in &masses {
        assert!((m - masses[0]).abs() <= 1e-9 * masses[0]);
    }
    let peaks: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("peaks.json")).unwrap()).unwrap();
    assert_eq!(peaks["times"].as_array().unwrap().len(), 3);
    assert_eq!(peaks["times"][1]["truth"][0][0], 0.0);
}

#[test]
fn single_time_single_source() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL
        .replace("times = 3", "times = 1")
        .replace("[[-1.0], [1.0]]", "[[0.5]]");
    let cfg = write_config(dir.path(), "one.toml", &text);
    let out = dir.path().join("out");
    let o = momt(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let peaks: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("peaks.json")).unwrap()).unwrap();
    let p = peaks["times"][0]["peaks"][0]["point"][0].as_f64().unwrap();
    // grid spacing is 6/11
    assert!((p - 0.5).abs() < 6.0 / 11.0, "peak at {p}");
    assert!(peaks.get("tracks").is_none());
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for out in [&a, &b] {
        let o = momt(&[
            "run",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--interp",
            "2",
            "--baseline",
            "mvdr",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.iter().any(|n| n == "interp_t0_1.csv"));
    assert!(names.iter().any(|n| n == "mvdr_t2_a0.csv"));
    for n in &names {
        if n == "timing.json" {
            continue;
        }
        assert_eq!(
            fs::read(a.join(n)).unwrap(),
            fs::read(b.join(n)).unwrap(),
            "{n:?} differs"
        );
    }
    let o = momt(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(
        fs::read(a.join("marginal_t0.csv")).unwrap(),
        fs::read(c.join("marginal_t0.csv")).unwrap()
    );
}

#[test]
fn non_convergence_still_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "short.toml",
        &SMALL.replace("max_sweeps = 5000", "max_sweeps = 2"),
    );
    let out = dir.path().join("out");
    let o = momt(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"]["converged"], false);
    assert_eq!(report["solver"]["iterations"], 2);
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            SMALL.replace("seed = 3", "seed = 3\nsnapshot = 2"),
            "snapshot",
        ),
        (SMALL.replace("gamma = 10.0", "gamma = -1.0"), "gamma"),
        (
            SMALL.replace(
                "kind = \"tracking\"",
                "kind = \"tracking\"\ncost = \"dynamic\"",
            ),
            "grid.velocity",
        ),
        (
            SMALL.replace("kind = \"tracking\"", "kind = \"fusion\""),
            "times",
        ),
        (
            SMALL.replace("waypoints = [[-1.0], [1.0]]", "waypoints = [[-1.0, 2.0]]"),
            "waypoints",
        ),
        (SMALL.replace("count = 12", "count = 0"), "grid.spatial"),
    ];
    for (k, (text, field)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("bad{k}.toml"), text);
        let o = momt(&["verify", &cfg]);
        assert_eq!(o.status.code(), Some(2), "case {k}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "case {k}: {}", stderr(&o));
    }
    let o = momt(&["verify", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_and_oracle_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let o = momt(&["verify", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("3 marginals"));
    let o = momt(&["oracle", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("oracle agrees"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let o = momt(&["verify", p.to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(0), "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 3);
}
