use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn fpp() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fpp"));
    c.env_remove("FPP_THREADS");
    c
}

fn run(out: &Path, args: &[&str]) -> std::process::Output {
    let o = fpp().arg("--out").arg(out).args(args).output().unwrap();
    assert!(
        o.status.success(),
        "fpp {:?} failed: {}",
        args,
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn assert_valid(doc: &Path, schema: &str) {
    let schema = read_json(&schema_dir().join(format!("{schema}.schema.json")));
    let compiled = jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .compile(&schema)
        .expect("schema compiles");
    let value = read_json(doc);
    let msgs: Vec<String> = match compiled.validate(&value) {
        Ok(()) => vec![],
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "{} does not match {schema}: {}", doc.display(), msgs.join("; "));
}

#[test]
fn constant_ball_is_the_word_ball() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["--law", "constant:1", "ball", "--radius", "3"]);
    let text = std::fs::read_to_string(dir.path().join("ball.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,dist"));
    let rows: Vec<&str> = lines.collect();
    // |B(0, 3)| in Z² is 2·3² + 2·3 + 1.
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().any(|r| *r == "0,0,0"));
    assert_valid(&dir.path().join("manifest.json"), "manifest");
}

#[test]
fn certificate_with_small_atom_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["--law", "atom:0.1,0,constant:1", "certify"]);
    let cert = read_json(&dir.path().join("certificate.json"));
    assert_eq!(cert["status"], "valid");
    assert!(cert["a_doubleprime"].as_f64().unwrap() > 0.0);
    assert_valid(&dir.path().join("certificate.json"), "certificate");
}

#[test]
fn repeated_runs_are_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--replicas", "20", "--seed", "5", "avgdist", "--y", "6,2"];
    run(a.path(), &args);
    run(b.path(), &args);
    let read = |d: &Path| std::fs::read(d.join("avgdist.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let hash = |d: &Path| read_json(&d.join("manifest.json"))["config_hash"].clone();
    assert_eq!(hash(a.path()), hash(b.path()));
}

#[test]
fn hash_ignores_thread_count_and_output_dir() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), &["--threads", "1", "--law", "constant:1", "ball", "--radius", "2"]);
    run(b.path(), &["--threads", "2", "--law", "constant:1", "ball", "--radius", "2"]);
    let ha = read_json(&a.path().join("manifest.json"))["config_hash"].clone();
    let hb = read_json(&b.path().join("manifest.json"))["config_hash"].clone();
    assert_eq!(ha, hb);
    let c = tempfile::tempdir().unwrap();
    run(c.path(), &["--threads", "1", "--law", "constant:1", "ball", "--radius", "3"]);
    assert_ne!(ha, read_json(&c.path().join("manifest.json"))["config_hash"]);
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "replicas = 10\nno_such_key = 1\n").unwrap();
    let o = fpp().arg("--config").arg(&cfg).args(["ball", "--radius", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = fpp().args(["--law", "uniform:2,1", "ball", "--radius", "2"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = fpp().args(["ball"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_flags_agree() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = a.path().join("run.toml");
    std::fs::write(&cfg, "seed = 9\nreplicas = 12\nbatches = 4\n[law]\nkind = \"uniform\"\nlo = 1.0\nhi = 3.0\n").unwrap();
    let o = fpp()
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(a.path())
        .args(["avgdist", "--y", "4,1"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    run(b.path(), &["--seed", "9", "--replicas", "12", "--batches", "4", "--law", "uniform:1,3", "avgdist", "--y", "4,1"]);
    let read = |d: &Path| std::fs::read(d.join("avgdist.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn json_outputs_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let small = ["--replicas", "8", "--eval-replicas", "16", "--batches", "4"];
    let cases: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("fluct", vec!["fluct", "--radius", "4", "--pairs", "50", "--sources", "2"], vec!["fluct"]),
        ("sagstar", vec!["sagstar", "--to", "8,0"], vec!["sagstar"]),
        ("sag_seq", vec!["--metric", "l1", "sag-seq", "--to", "9,3", "--parts", "3"], vec!["sag_seq"]),
        ("monotone", vec!["--metric", "l1", "monotone", "--radius", "8"], vec!["monotone"]),
        ("hull_check", vec!["hull-check", "--sets", "2", "--n", "2,3"], vec!["hull_check"]),
        ("cauchy", vec!["cauchy", "--r1", "4", "--r2", "8"], vec!["cauchy"]),
        ("shape", vec!["--radii", "4,8", "shape", "--norm-radius", "16"], vec!["shape"]),
        ("shape_l1", vec!["--metric", "l1", "--radii", "4,8", "shape", "--norm", "l1"], vec!["shape"]),
        ("certificate", vec!["certify"], vec!["certificate"]),
    ];
    for (name, args, schemas) in cases {
        let out = d.join(name);
        let mut full: Vec<&str> = small.to_vec();
        full.extend(args);
        let o = fpp().arg("--out").arg(&out).args(&full).output().unwrap();
        assert!(
            matches!(o.status.code(), Some(0) | Some(1)),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        for s in schemas {
            assert_valid(&out.join(format!("{s}.json")), s);
        }
        assert_valid(&out.join("manifest.json"), "manifest");
    }
}

#[test]
fn shape_reports_an_induction_trace() {
    let dir = tempfile::tempdir().unwrap();
    run(
        dir.path(),
        &["--metric", "l1", "--radii", "4,8,16", "shape", "--norm", "l1", "--sag-c", "2", "--c0", "3"],
    );
    let v = read_json(&dir.path().join("shape.json"));
    let t = &v["induction"];
    assert_eq!(t["c"], 2.0);
    assert_eq!(t["c0"], 3.0);
    assert_eq!(t["g_estimated"], false);
    assert_eq!(t["levels"].as_array().unwrap().len(), 2);
    for row in v["series"]["rows"].as_array().unwrap() {
        assert_eq!(row["delta_in"]["value"].as_f64(), Some(0.0));
    }
}
