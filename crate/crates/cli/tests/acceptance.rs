//! The twelve acceptance criteria, one PASS/FAIL line each.

use std::process::{Command, ExitCode, Stdio};
use std::time::Instant;

use amo_core::diophantine::build_liouville;
use amo_core::verify::*;

struct Line {
    n: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn checks(r: &VerificationReport) -> String {
    r.checks
        .iter()
        .map(|c| {
            let rel = if c.relation == Relation::AtMost { "<=" } else { ">=" };
            format!("{} {:.4e} {rel} {}", c.name, c.measured, c.bound)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn by_name(rs: &[VerificationReport], name: &str) -> (bool, String) {
    let mut pass = true;
    let mut detail = Vec::new();
    for r in rs {
        let c = r.check(name).expect("check present");
        pass &= c.pass;
        detail.push(format!("{:.3e}", c.measured));
    }
    (pass, format!("{name} = [{}]", detail.join(", ")))
}

fn report(rs: &[VerificationReport]) -> (bool, String) {
    (rs.iter().all(|r| r.status == Status::Pass), rs.iter().map(checks).collect::<Vec<_>>().join(" | "))
}

fn criterion(n: usize, name: &'static str, f: impl FnOnce() -> Result<(bool, String), String>) -> Line {
    let start = Instant::now();
    let (pass, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    Line { n, name, pass, detail: format!("{detail} ({:.1} s)", start.elapsed().as_secs_f64()) }
}

fn verify_all_json(threads: &str) -> Result<Vec<u8>, String> {
    let dir = std::env::temp_dir().join(format!("amo-acceptance-{}-{threads}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let out = dir.join("verify.json");
    let status = Command::new(env!("CARGO_BIN_EXE_amo"))
        .args(["verify", "all", "--lambda", "0.5", "--threads", threads, "--out"])
        .arg(&out)
        .env_remove("AMO_THREADS")
        .stderr(Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("verify all exited with {status}"));
    }
    let bytes = std::fs::read(&out).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(bytes)
}

fn main() -> ExitCode {
    let e = |x: amo_core::AmoError| x.to_string();
    let grid: Vec<u64> = (1..=30).collect();
    let mut sigma_time = 0.0;
    let mut lines = Vec::new();

    let start = Instant::now();
    let sigma: Result<Vec<VerificationReport>, String> =
        [0.25, 0.5, 0.75].iter().map(|&l| verify_sigma_measure(l, &grid).map_err(e)).collect();
    sigma_time += start.elapsed().as_secs_f64();
    lines.push(criterion(1, "sigma measure = 4 - 4 lambda", || {
        let rs = sigma.as_ref().map_err(Clone::clone)?;
        let (pass, d) = by_name(rs, "sigma_measure_error");
        Ok((pass && sigma_time < 30.0, format!("{d}, runtime {sigma_time:.2} s < 30 s")))
    }));
    lines.push(criterion(2, "gap bound", || Ok(by_name(sigma.as_ref().map_err(Clone::clone)?, "gap_to_bound_ratio"))));
    lines.push(criterion(3, "IDS consistency", || Ok(report(&[verify_ids(0.5, &[3, 5, 8]).map_err(e)?]))));
    lines.push(criterion(4, "Thouless formula", || {
        let t = Instant::now();
        let a = verify_thouless(&[0.0, 0.5, 2.0], &[1, 8], 10).map_err(e)?;
        let b = verify_thouless_zero(0.5, 8).map_err(e)?;
        let secs = t.elapsed().as_secs_f64();
        let (pass, d) = report(&[a, b]);
        Ok((pass && secs < 60.0, format!("{d}, runtime {secs:.2} s < 60 s")))
    }));
    lines.push(criterion(5, "SL(2,R) identities", || Ok(report(&[verify_sl2(10_000, 0x5eed).map_err(e)?]))));
    lines.push(criterion(6, "midpoint inequality", || Ok(report(&[verify_midpoint(1_000, 0x5eed).map_err(e)?]))));
    lines.push(criterion(7, "Hausdorff continuity", || {
        let pairs = hausdorff_pairs().map_err(e)?;
        let rs = [0.25, 0.5].iter().map(|&l| verify_hausdorff(l, &pairs).map_err(e)).collect::<Result<Vec<_>, _>>()?;
        let (pass, d) = report(&rs);
        Ok((pass && pairs.len() * rs.len() == 20, format!("{} pairs: {d}", pairs.len() * rs.len())))
    }));
    lines.push(criterion(8, "P_q measure trend", || {
        let r = verify_pq_trend(&[20, 24, 28, 32], 0.5, 0.4).map_err(e)?;
        let (pass, d) = report(std::slice::from_ref(&r));
        Ok((pass, format!("{d}; measures {}", r.measured["measures"])))
    }));
    lines.push(criterion(9, "N(X) trend", || {
        let r = verify_nx(0.5, &build_liouville(1.0, 3).map_err(e)?, 3, 0.2).map_err(e)?;
        let (pass, d) = report(std::slice::from_ref(&r));
        Ok((pass, format!("{d}; N(X) {} {:?}", r.measured["n_measure"], r.notes)))
    }));
    lines.push(criterion(10, "orbit rotation", || {
        let r = verify_orbit(0.5, 2, 5, &[11, 13], 0.17).map_err(e)?;
        let (pass, d) = report(std::slice::from_ref(&r));
        Ok((pass, format!("{d}; {} cases, {} witnessed", r.measured["cases"], r.measured["witnessed_cases"])))
    }));
    lines.push(criterion(11, "averaging proxy", || {
        let a = verify_avera_degenerate(0.5, 2, 5, &[11, 13], 0.17).map_err(e)?;
        let b = verify_avera_two_scale(&TwoScale::default()).map_err(e)?;
        Ok(report(&[a, b]))
    }));
    lines.push(criterion(12, "determinism across thread counts", || {
        let one = verify_all_json("1")?;
        let four = verify_all_json("4")?;
        Ok((!one.is_empty() && one == four, format!("{} bytes, identical: {}", one.len(), one == four)))
    }));

    let mut all = true;
    for l in &lines {
        all &= l.pass;
        println!("{} [{:>2}] {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.n, l.name, l.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
