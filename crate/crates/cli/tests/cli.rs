use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn slotqed(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_slotqed"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_GEOMETRY: &str = r#"
[geometry]
material = "GaP"
width_nm = 200.0
height_nm = 200.0
slot_nm = 20.0

[solve]
lambda_nm = 720.0
"#;

#[test]
fn cqed_preset_reproduces_cooperativity() {
    let dir = tempfile::tempdir().unwrap();
    let o = slotqed(&["cqed"], Some(&preset("cqed_estimate.toml")), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&dir.path().join("cqed.json"));
    let c = v["figures"]["cooperativity"].as_f64().unwrap();
    assert!((c - 41.0).abs() <= 1.0, "C = {c}");
    let k = v["figures"]["kappa0"].as_f64().unwrap();
    assert!((k - 2.512e11).abs() / 2.512e11 <= 1e-3);
    assert_eq!(v["meta"]["toolkit"], "slotqed");
    assert_eq!(v["meta"]["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn outputs_are_deterministic_and_config_echo_round_trips() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = preset("cqed_estimate.toml");
    assert!(slotqed(&["cqed"], Some(&cfg), a.path()).status.success());
    assert!(slotqed(&["cqed"], Some(&cfg), b.path()).status.success());
    let first = fs::read(a.path().join("cqed.json")).unwrap();
    assert_eq!(first, fs::read(b.path().join("cqed.json")).unwrap());

    // The echoed canonical config reproduces the same hash and output.
    let v = read_json(&a.path().join("cqed.json"));
    let echoed = write_config(b.path(), v["meta"]["config"].as_str().unwrap());
    let c = tempfile::tempdir().unwrap();
    assert!(slotqed(&["cqed"], Some(&echoed), c.path()).status.success());
    assert_eq!(first, fs::read(c.path().join("cqed.json")).unwrap());
}

#[test]
fn missing_key_exits_with_config_code_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nmaterial = \"GaP\"\nheight_nm = 200.0\nslot_nm = 20.0\n");
    let o = slotqed(&["solve"], Some(&cfg), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("width_nm"), "{}", stderr(&o));
}

#[test]
fn missing_section_and_flag_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_GEOMETRY);
    let o = slotqed(&["cqed"], Some(&cfg), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cqed"), "{}", stderr(&o));
    let o = slotqed(&["cqed"], None, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));
}

#[test]
fn unknown_key_and_invalid_value_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL_GEOMETRY}\n[grid]\nspacing = 5.0\n"));
    let o = slotqed(&["solve"], Some(&cfg), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("spacing"), "{}", stderr(&o));

    let cfg = write_config(
        dir.path(),
        "[cqed]\nfsr_ghz = 500.0\nlambda0_nm = 750.0\nq0 = -1.0\nbeta = 0.5\nf_p = 2.0\n",
    );
    let o = slotqed(&["cqed"], Some(&cfg), &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q0"), "{}", stderr(&o));
}

#[test]
fn solve_reports_slot_mode_and_dumps_fields() {
    let dir = tempfile::tempdir().unwrap();
    let o = slotqed(&["solve", "--dump-fields"], Some(&preset("gap_band1_reference.toml")), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&dir.path().join("modes.json"));
    let id = v["slot_mode_id"].as_u64().unwrap() as usize;
    let slot = &v["modes"][id];
    assert!(slot["pol_fraction_y"].as_f64().unwrap() > 0.8);
    assert!(slot["n_g"].as_f64().unwrap() > slot["n_eff"].as_f64().unwrap());
    let dumps = v["field_dumps"].as_array().unwrap();
    assert_eq!(dumps.len(), v["modes"].as_array().unwrap().len());
    let bytes = fs::read(dir.path().join(dumps[id].as_str().unwrap())).unwrap();
    assert!(bytes.starts_with(b"slotqed-fields v1 "));
}

#[test]
fn coupling_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{SMALL_GEOMETRY}\n[coupling]\norientations = [\"x\", \"y\"]\ndisplacements = [-0.5, 0.0, 0.5]\n"),
    );
    let out = dir.path().join("out");
    let o = slotqed(&["coupling"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&out.join("coupling.json"));
    let rows = v["orientations"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let beta = |k: usize| rows[k]["beta"].as_f64().unwrap();
    assert!(beta(1) > 10.0 * beta(0));
    let csv = fs::read_to_string(out.join("displacement_y.csv")).unwrap();
    assert!(csv.starts_with("# slotqed "));
    assert_eq!(csv.lines().count(), 1 + 1 + 3);
    assert!(out.join("orientations.csv").exists());
}

#[test]
fn single_point_sweep_writes_summary_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[sweep]
materials = ["GaP"]
bands = ["visible"]
width_nm = [200.0, 200.0, 50.0]
height_nm = [200.0, 200.0, 50.0]
slot_nm = [20.0, 20.0, 20.0]
refine = false
"#,
    );
    let out = dir.path().join("out");
    let o = slotqed(&["sweep", "--threads", "1"], Some(&cfg), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = read_json(&out.join("sweep.json"));
    let beta = v["table"][0]["best_beta"].as_f64().unwrap();
    assert!(beta > 0.8, "beta {beta}");
    assert!(out.join("sweep_GaP_visible.csv").exists());
    assert!(out.join("sweep_GaP_visible.journal").exists());
    assert!(out.join("material_table.csv").exists());
}
