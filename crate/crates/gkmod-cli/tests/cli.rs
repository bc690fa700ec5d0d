use std::path::Path;
use std::process::{Command, Output};

use gkmod_cli::config::parse_config;
use serde_json::Value;

fn gkmod(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gkmod"))
        .args(args)
        .env("GKMOD_OUT_DIR", dir)
        .output()
        .expect("spawn gkmod")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn scalar(v: &Value, key: &str) -> Value {
    v["scalars"][key].clone()
}

#[test]
fn transfer_level_two() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["transfer", "--level", "2", "--s", "1", "--order", "32"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&d.path().join("transfer.json"));
    assert_eq!(v["all_passed"], true);
    let lead = scalar(&v, "leading_re").as_f64().unwrap();
    assert!((lead - 1.0).abs() < 1e-8);
}

#[test]
fn zeta_s_out_of_range() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["zeta", "--s", "0.4"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("out of range") && e.contains("0.5"), "{e}");
    assert!(!d.path().join("zeta.json").exists());
}

#[test]
fn flag_overrides_file_with_warning() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.conf");
    std::fs::write(&cfg, "# level 3 from the file\nlevel = 3\nsamples = 1000\nseed = 4\n").unwrap();
    let o = gkmod(d.path(), &["gauss-mc", "--config", cfg.to_str().unwrap(), "--level", "2"]);
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    let v = json(&d.path().join("gauss-mc.json"));
    assert_eq!(v["config"]["level"], 2);
    assert_eq!(v["config"]["samples"], 1000);
}

#[test]
fn unknown_file_key_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.conf");
    std::fs::write(&cfg, "level = 2\nleve = 3\n").unwrap();
    let o = gkmod(d.path(), &["coset", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("leve"), "{}", stderr(&o));
}

#[test]
fn duplicate_file_key_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("dup.conf");
    std::fs::write(&cfg, "level = 2\nlevel = 3\n").unwrap();
    let err = parse_config(["gkmod", "coset", "--config", cfg.to_str().unwrap()]).unwrap_err();
    assert!(err.to_string().contains("level"), "{err}");
}

#[test]
fn missing_seed_rejected() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["gauss-mc", "--level", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"), "{}", stderr(&o));
}

#[test]
fn homology_level_eleven() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["homology", "--level", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&d.path().join("homology.json"));
    assert_eq!(scalar(&v, "exactness"), true);
    assert_eq!(scalar(&v, "ranks"), "(12, 6, 4, 3)");
    assert_eq!(scalar(&v, "genus"), 1);
}

#[test]
fn mixmaster_frequencies() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["mixmaster", "--samples", "100", "--eras", "10000", "--seed", "1", "--rows", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&d.path().join("mixmaster.json"));
    for f in ["frequency_a", "frequency_b", "frequency_c"] {
        let x = scalar(&v, f).as_f64().unwrap();
        assert!((x - 1.0 / 3.0).abs() < 1e-2, "{f} = {x}");
    }
    assert_eq!(v["rows"].as_array().unwrap().len(), 50);
}

#[test]
fn json_and_csv_agree() {
    let d = tempfile::tempdir().unwrap();
    let args = ["gauss-mc", "--level", "2", "--samples", "20000", "--seed", "9"];
    assert!(gkmod(d.path(), &args).status.success());
    let mut csv_args = args.to_vec();
    csv_args.extend(["--format", "csv"]);
    assert!(gkmod(d.path(), &csv_args).status.success());
    let v = json(&d.path().join("gauss-mc.json"));
    let text = std::fs::read_to_string(d.path().join("gauss-mc.csv")).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut rd = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(Value::from(header), v["columns"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    let jrows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), jrows.len());
    assert_eq!(rows.len(), 3 * 4);
    for (r, j) in rows.iter().zip(jrows) {
        for (c, jc) in r.iter().zip(j.as_array().unwrap()) {
            match jc {
                Value::Number(n) => {
                    let (a, b) = (c.parse::<f64>().unwrap(), n.as_f64().unwrap());
                    assert_eq!(a.to_bits(), b.to_bits(), "{c} vs {n}");
                }
                Value::String(s) => assert_eq!(c, s),
                other => assert_eq!(c, other.to_string()),
            }
        }
    }
    assert!(text.contains("# check max |empirical - reference|: pass"));
}

#[test]
fn reruns_are_byte_identical() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let args = ["mixmaster", "--samples", "10", "--eras", "2000", "--seed", "5", "--rows", "20", "--format", "csv"];
    assert!(gkmod(d1.path(), &args).status.success());
    assert!(gkmod(d2.path(), &args).status.success());
    let a = std::fs::read(d1.path().join("mixmaster.csv")).unwrap();
    let b = std::fs::read(d2.path().join("mixmaster.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn empty_table_keeps_header() {
    let d = tempfile::tempdir().unwrap();
    // u0 integral right away: the trajectory has no eras
    let o = gkmod(
        d.path(),
        &["mixmaster", "--samples", "1", "--eras", "10", "--seed", "2", "--x0", "0.5", "--tolerance", "1", "--format", "csv", "--out", "empty.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(d.path().join("empty.csv")).unwrap();
    let body: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, ["era,k,leading,u,omega,log_omega"]);
}

#[test]
fn stdout_output() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["cf", "--x", "113/355", "--out", "-"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let ks: Vec<u64> = v["rows"].as_array().unwrap().iter().map(|r| r[1].as_u64().unwrap()).collect();
    assert_eq!(ks, [3, 7, 16]);
    assert_eq!(v["all_passed"], true);
    assert_eq!(std::fs::read_dir(d.path()).unwrap().count(), 0);
}

#[test]
fn runtime_error_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["limsym", "--level", "11", "--g", "2,1,1,1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("base coset"), "{}", stderr(&o));
}

#[test]
fn failed_check_exit_code() {
    let d = tempfile::tempdir().unwrap();
    let o = gkmod(d.path(), &["gauss-mc", "--level", "1", "--samples", "100", "--seed", "1", "--tolerance", "1e-9"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&d.path().join("gauss-mc.json"))["all_passed"], false);
}
