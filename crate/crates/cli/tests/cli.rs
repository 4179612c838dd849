use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use airfc::eval::Stat;
use airfc::io::read_trials_csv;
use airfc_cli::plot::{series_from_trials, Metric};

fn airfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_airfc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const DESK: &str = r#"
defaults = "table1"
seed = 11
trials = 2

[system]
antennas = 4
groups = 1
relays_per_group = 4

[task]
classes = 2
samples = 200

[solver]
max_iters = 40
"#;

#[test]
fn validate_accepts_a_good_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ok.toml", DESK);
    let o = airfc(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok"));
}

#[test]
fn validate_names_missing_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[system]\nantennas = 4\n");
    let o = airfc(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("system.groups"), "{}", stderr(&o));
}

#[test]
fn negative_kappa_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "k.toml",
        &DESK.replace("groups = 1", "groups = 1\nrician_kappa = -0.5"),
    );
    let o = airfc(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rician_kappa"));
}

#[test]
fn nonpositive_tx_power_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "p.toml",
        &format!("{DESK}\n[power]\ntx_max_w = 0.0\n"),
    );
    let out = dir.path().join("out");
    let o = airfc(&["optimize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("power.tx_max_w"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn scalar_optimize_produces_feasible_trace() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "w.wmat.json",
        r#"{"format": "airfc-wmat", "version": 1, "weights": {"rows": 1, "cols": 1, "data": [[0.5, -0.25]]}}"#,
    );
    let cfg = write(
        dir.path(),
        "scalar.toml",
        r#"
[system]
antennas = 1
groups = 1
relays_per_group = 1
area_length_m = 20.0
carrier_hz = 3.5e9
bandwidth_hz = 1e6
rician_kappa = 1.0
[power]
relay_w = 0.5
tx_max_w = 1.0
[task]
weights_file = "w.wmat.json"
"#,
    );
    let out = dir.path().join("out");
    let o = airfc(&["optimize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let trace = airfc::io::read_trace_csv(&out.join("trace.csv")).unwrap();
    assert!(trace.len() >= 2);
    assert!(trace.iter().all(|r| r.max_violation <= 1e-9));
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert!(result["accuracy"].is_null());
    let params = airfc::io::load_params(&out.join("params.json")).unwrap();
    assert!(params.precoder[(0, 0)].norm_sqr() <= 1.0 * (1.0 + 1e-9));
}

#[test]
fn optimize_output_is_inventoried() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "d.toml", DESK);
    let out = dir.path().join("out");
    let o = airfc(&["optimize", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_inventory_complete(&out);
    // the exported channel replays to the same solution
    let replay = write(
        dir.path(),
        "r.toml",
        &DESK.replace(
            "relays_per_group = 4",
            "relays_per_group = 4\nchannel_file = \"out/channel.chset.json\"",
        ),
    );
    let out2 = dir.path().join("out2");
    let o = airfc(&[
        "optimize",
        "--config",
        &replay,
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        fs::read(out.join("trace.csv")).unwrap(),
        fs::read(out2.join("trace.csv")).unwrap()
    );
}

fn assert_inventory_complete(out: &Path) {
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let mut listed: Vec<String> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap().to_string())
        .collect();
    listed.push("manifest.json".into());
    listed.sort();
    let mut present: Vec<String> = fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    present.sort();
    assert_eq!(listed, present);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn single_point_sweep_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "one.toml",
        &DESK.replace("trials = 2", "trials = 1"),
    );
    let out = dir.path().join("out");
    let o = airfc(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--no-plots",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(!out.join("accuracy.svg").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"][0]["accuracy"]["std"].as_f64(), Some(0.0));
    assert_inventory_complete(&out);
}

#[test]
fn sweep_is_byte_reproducible_and_plots_regenerate_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let grid = format!("{DESK}\n[sweep]\ngroups = [1, 2, 3]\nrelays_per_group = [2, 4]\n");
    let cfg = write(dir.path(), "grid.toml", &grid);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = airfc(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = airfc(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["trials.csv", "summary.json", "accuracy.svg", "nmse.svg"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    assert_inventory_complete(&a);

    let svg = fs::read_to_string(a.join("accuracy.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    assert!(svg.contains("stroke-dasharray"));
    assert!(svg.contains("L=1") && svg.contains("L=3"));

    let trials = read_trials_csv(&a.join("trials.csv")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let series = series_from_trials(&trials, Metric::Accuracy);
    let points = summary["points"].as_array().unwrap();
    for (i, p) in points.iter().enumerate() {
        let (l, k) = (
            p["point"]["groups"].as_u64().unwrap(),
            p["point"]["relays_per_group"].as_f64().unwrap(),
        );
        let s = &series[l as usize - 1];
        let sp = s.points.iter().find(|q| q.x == k).unwrap();
        assert_eq!(
            sp.stat.mean,
            p["accuracy"]["mean"].as_f64().unwrap(),
            "point {i}"
        );
        // the stored std is the textbook sample standard deviation
        let vals: Vec<f64> = trials
            .iter()
            .filter(|t| t.point == i)
            .map(|t| t.accuracy)
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let sd =
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
        assert!((sd - p["accuracy"]["std"].as_f64().unwrap()).abs() < 1e-15);
        assert_eq!(Stat::of(&vals).std, sp.stat.std);
    }
}

#[test]
fn seed_override_changes_hash_and_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.toml",
        &DESK.replace("trials = 2", "trials = 1"),
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    airfc(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--no-plots",
    ]);
    airfc(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--no-plots",
        "--seed",
        "99",
    ]);
    let hash = |d: &Path| -> String {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
        m["config_hash"].as_str().unwrap().to_string()
    };
    assert_ne!(hash(&a), hash(&b));
    assert_ne!(
        fs::read(a.join("trials.csv")).unwrap(),
        fs::read(b.join("trials.csv")).unwrap()
    );
}
