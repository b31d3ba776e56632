use std::path::Path;
use std::process::{Command, Output};

use amo_core::export::{read_csv, sets_from_rows, BandRow};
use amo_core::periodic::BandSpectrum;

fn amo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amo")).args(args).env_remove("AMO_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn bands_examples() {
    let out = stdout(&amo(&["bands", "--lambda", "0.5", "--p", "1", "--q", "5", "--format", "csv"]));
    assert_eq!(out.lines().count(), 6);
    let out = stdout(&amo(&["bands", "--lambda", "0.5", "--p", "0", "--q", "1"]));
    assert_eq!(out.lines().nth(1), Some("0.5,0,1,1,-3.0,-1.0,1.0,3.0"));
    let out = stdout(&amo(&["bands", "--lambda", "1.5", "--p", "1", "--q", "3"]));
    assert!(out.lines().skip(1).all(|l| l.split(',').nth(5) == Some("") && l.split(',').nth(6) == Some("")));
}

#[test]
fn band_csv_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    stdout(&amo(&["bands", "--lambda", "0.37", "--p", "3", "--q", "7", "--out", path.to_str().unwrap()]));
    let rows: Vec<BandRow> = read_csv(std::fs::File::open(&path).unwrap()).unwrap();
    let (outer, inner) = sets_from_rows(&rows).unwrap();
    let s = BandSpectrum::new(0.37, 3, 7).unwrap();
    assert_eq!(outer, s.sigma_set());
    assert_eq!(inner, s.inner_set());
}

#[test]
fn json_mirrors_csv_fields() {
    let out = stdout(&amo(&["bands", "--lambda", "1.5", "--p", "1", "--q", "2", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let row = &v[0];
    for k in ["lambda", "p", "q", "k", "sigma_lo", "inner_lo", "inner_hi", "sigma_hi"] {
        assert!(row.get(k).is_some(), "{k}");
    }
    assert!(row["inner_lo"].is_null());
}

#[test]
fn ids_free_case() {
    let out = stdout(&amo(&["ids", "--lambda", "0", "--p", "0", "--q", "1", "--E", "0"]));
    let n: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((n - 0.5).abs() < 1e-12);
    let out = stdout(&amo(&["ids", "--lambda", "0", "--p", "0", "--q", "1", "--E", "-3,3"]));
    assert_eq!(out.lines().nth(1), Some("-3.0,0.0,"));
}

#[test]
fn pq_membership_with_witness() {
    let out = stdout(&amo(&["pq", "--q", "8", "--c", "0.7", "--rho", "0.25"]));
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "true");
    let (a, b): (u64, u64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
    assert_eq!(a % 2, 1);
    assert!(((4 * b) as f64 * 0.25 - a as f64).abs() < 10.0 / b as f64);
    let out = stdout(&amo(&["pq", "--q", "8", "--c", "0.7", "--intervals"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["q"], 8);
    assert!(!v["intervals"].as_array().unwrap().is_empty());
}

#[test]
fn butterfly_rows_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("b.svg");
    let out = stdout(&amo(&["butterfly", "--lambda", "1", "--q-max", "5", "--svg", svg.to_str().unwrap()]));
    assert_eq!(out.lines().next(), Some("p,q,k,sigma_lo,sigma_hi"));
    assert_eq!(out.lines().count() - 1, 37);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<line").count(), 37);
    assert!(!amo(&["butterfly", "--lambda", "1", "--q-max", "1000"]).status.success());
}

#[test]
fn lyapunov_and_thouless() {
    let out = stdout(&amo(&["lyapunov", "--lambda", "2", "--beta", "1", "--terms", "3", "--E", "0"]));
    let l: f64 = out.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((l - 2f64.ln()).abs() < 0.02, "{l}");
    let out = stdout(&amo(&["lyapunov", "--lambda", "0.5", "--p", "1", "--q", "3", "--thouless", "--energies-count", "4"]));
    assert_eq!(out.lines().next(), Some("E,L_thouless,L_cocycle,abs_diff"));
    assert_eq!(out.lines().count(), 5);
    assert!(!amo(&["lyapunov", "--lambda", "0.5", "--p", "1", "--q", "3", "--beta", "1", "--E", "0"]).status.success());
}

#[test]
fn x_set_and_orbit() {
    let out = stdout(&amo(&["x-set", "--lambda", "0.5", "--p", "1", "--q", "5", "--c", "1"]));
    assert!(out.starts_with("lambda,p,q,k,sigma_lo,inner_lo,inner_hi,sigma_hi,in_X\n"));
    assert!(out.contains(",true"));
    let out = stdout(&amo(&["orbit", "--lambda", "0.5", "--p", "2", "--q", "5", "--E", "0.0", "--b", "2", "--theta", "0.1"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for k in ["dev", "which", "ratio", "E", "b", "proxy"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    let o = amo(&["orbit", "--lambda", "0.5", "--p", "2", "--q", "5", "--E", "5", "--b", "2"]);
    assert!(!o.status.success());
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!amo(&["bands", "--lambda", "0.5"]).status.success());
    assert!(!amo(&["bands", "--lambda", "0.5", "--p", "2", "--q", "4"]).status.success());
    assert!(!amo(&["nonsense"]).status.success());
    assert!(!amo(&["verify", "no_such_report"]).status.success());
}

#[test]
fn single_verify_report() {
    let out = stdout(&amo(&["verify", "sl2_identities"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v[0]["lemma_id"], "sl2_identities");
    assert_eq!(v[0]["status"], "PASS");
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ids.cfg", "# free IDS\ncommand=ids\nlambda=0\np=0\nq=1\nE=0.5\n");
    let out = stdout(&amo(&["--config", &cfg]));
    assert!(out.lines().nth(1).unwrap().starts_with("0.5,"));
    let out = stdout(&amo(&["--config", &cfg, "ids", "--E", "1"]));
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().nth(1).unwrap().starts_with("1.0,"));
    let bad = write(dir.path(), "bad.cfg", "bogus=1\n");
    assert!(!amo(&["--config", &bad, "bands", "--lambda", "0.5", "--p", "1", "--q", "2"]).status.success());
    let q = write(dir.path(), "q.cfg", "q_max=2\nlambda=0.5\n");
    let out = stdout(&amo(&["butterfly", "--config", &q]));
    assert_eq!(out.lines().count(), 1 + 1 + 2);
}

#[test]
fn identical_configs_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for i in 0..2 {
        let p = dir.path().join(format!("x{i}.json"));
        let o = Command::new(env!("CARGO_BIN_EXE_amo"))
            .args(["x-set", "--lambda", "0.5", "--p", "2", "--q", "7", "--c", "0.9", "--format", "json", "--out", p.to_str().unwrap()])
            .env("AMO_THREADS", if i == 0 { "1" } else { "3" })
            .output()
            .unwrap();
        assert!(o.status.success());
        files.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(files[0], files[1]);
}
