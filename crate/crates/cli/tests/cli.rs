use std::path::Path;
use std::process::Command;

fn srlab(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_srlab")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TRIG5: &str = r#"dictionary = { kind = "trig", frequencies = { kind = "range", lo = -2, hi = 2 } }"#;

#[test]
fn verify_certifies_parseval_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "v.toml",
        &format!("{TRIG5}\nv = 5\ntarget_c1 = 0.999\npoints = {{ kind = \"equispaced\", per_dim = 5 }}\n"),
    );
    let (code, out, err) = srlab(&["verify", "--config", &cfg]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["result"]["report"]["C1"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["summary"]["all_pass"], true);
}

#[test]
fn failing_inequality_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "v.toml",
        &format!("{TRIG5}\nv = 2\ntarget_c1 = 0.5\npoints = {{ kind = \"equispaced\", per_dim = 1 }}\n"),
    );
    let (code, _, _) = srlab(&["verify", "--config", &cfg, "--format", "csv"]);
    assert_eq!(code, 1);
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[experiment]\nkind = \"nope\"\n");
    let (code, _, err) = srlab(&["experiment", "--config", &cfg]);
    assert_eq!(code, 2);
    assert!(err.contains("error"));
    let (code, _, _) = srlab(&["experiment", "--config", "/nonexistent/x.toml"]);
    assert_eq!(code, 2);
}

#[test]
fn experiment_is_reproducible_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "seed = 3\n[experiment]\nkind = \"tau-lower\"\n");
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let (code, _, err) = srlab(&["experiment", "--config", &cfg, "--out", p.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    let (_, out, _) = srlab(&["experiment", "--config", &cfg, "--seed", "9"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["seed"], 9);
    assert_eq!(v["config"]["seed"], 9);
    assert!(v.get("wall_time_seconds").is_none());
    let (_, out, _) = srlab(&["experiment", "--config", &cfg, "--timing"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["wall_time_seconds"].as_f64().is_some());
}

#[test]
fn csv_output_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "k.toml", "[experiment]\nkind = \"kashin\"\nsizes = [4]\n");
    let (code, out, _) = srlab(&["experiment", "--config", &cfg, "--format", "csv"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "key,inequality,lhs,rhs,constant,margin,tolerance,pass,certified,asserted"
    );
    assert_eq!(lines.count(), 4);
}

#[test]
fn recover_sigma_and_find_points_run() {
    let dir = tempfile::tempdir().unwrap();
    let target = "target = { kind = \"expansion\", coefficients = [[1.0, 0.0], [0.0, 0.0], [0.5, 0.0], [0.0, 0.0], [0.1, 0.0]] }";
    let pts = "points = { kind = \"random\", m = 8 }";
    let rec = write(dir.path(), "r.toml", &format!("{TRIG5}\nv = 2\ncheck = true\n{pts}\n{target}\n"));
    let (code, out, err) = srlab(&["recover", "--config", &rec]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["subset"], serde_json::json!([0, 2]));
    assert_eq!(v["records"].as_array().unwrap().len(), 2);

    let sig = write(dir.path(), "s.toml", &format!("{TRIG5}\nv = 2\nnorm = \"l2-mu\"\n{pts}\n{target}\n"));
    let (code, out, err) = srlab(&["sigma", "--config", &sig]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["result"]["value"].as_f64().unwrap() - 0.1).abs() < 1e-12);

    let find = write(dir.path(), "f.toml", &format!("{TRIG5}\nv = 1\nm = 4\ntarget_c1 = 0.9\n"));
    let (code, _, err) = srlab(&["find-points", "--config", &find]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn lower_bound_produces_a_vanishing_witness() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "l.toml",
        "dictionary = { kind = \"trig\", frequencies = { kind = \"range\", lo = -3, hi = 4 } }\n\
         test_points = { kind = \"equispaced\", per_dim = 8 }\n\
         points = { kind = \"random\", m = 4 }\n",
    );
    let (code, out, err) = srlab(&["lower-bound", "--config", &cfg]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!(v["result"]["witness"]["max_at_points"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(root).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let cfg: srlab::experiments::ExperimentConfig = toml::from_str(&text).unwrap();
        assert!(!cfg.experiment.name().is_empty());
        n += 1;
    }
    assert_eq!(n, 8);
}
