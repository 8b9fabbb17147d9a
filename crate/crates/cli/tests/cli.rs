use std::path::Path;
use std::process::{Command, Output};

fn msh(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_msh")).arg("--out-dir").arg(dir).args(args).output().unwrap();
    assert!(out.status.success(), "msh {args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_two_phase_pgm(path: &Path, n: usize) {
    let mut bytes = format!("P5\n{n} {n}\n255\n").into_bytes();
    for _row in 0..n {
        for col in 0..n {
            bytes.push(if col < n / 2 { 40 } else { 210 });
        }
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn gen_graph_segment_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    msh(d, &["--seed", "3", "gen", "--generator", "rsa", "--window", "0:20,0:20"]);
    msh(d, &["graph", "--points", d.join("points.csv").to_str().unwrap(), "--mode", "voronoi"]);
    write_two_phase_pgm(&d.join("g.pgm"), 40);
    let out = msh(
        d,
        &[
            "segment",
            "--points",
            d.join("points.csv").to_str().unwrap(),
            "--edges",
            d.join("edges.csv").to_str().unwrap(),
            "--image",
            d.join("g.pgm").to_str().unwrap(),
            "--variant",
            "pairwise",
            "--cap",
            "0.05",
            "--pgm",
            "u.pgm",
        ],
    );
    let report = json(&out);
    assert!(report["energy"]["total"].as_f64().unwrap() > 0.0);
    for f in ["u.csv", "trace.csv", "u.pgm"] {
        assert!(d.join(f).exists(), "{f}");
    }
    let trace = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    let energies: Vec<f64> = trace.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(energies.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn knn_graph_and_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    msh(d, &["gen", "--generator", "cubic", "--window", "0:12,0:12", "--torus"]);
    let pts = d.join("points.csv");
    msh(d, &["graph", "--points", pts.to_str().unwrap(), "--mode", "knn", "--k", "4"]);
    let text = std::fs::read_to_string(d.join("edges.csv")).unwrap();
    assert_eq!(text.lines().count() - 3, 4 * 144);
    let g = json(&msh(d, &["gamma", "--points", pts.to_str().unwrap(), "--sides", "4,8,12"]));
    assert_eq!(g["values"][2][1].as_f64().unwrap(), 1.0);
}

#[test]
fn cell_problems_on_square_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = json(&msh(d, &["cell-surface", "--nu", "1,0", "--t", "16"]));
    assert!((s["value"].as_f64().unwrap() - 1.0).abs() < 0.1);
    let b = json(&msh(d, &["cell-bulk", "--xi", "1,0", "--t", "16"]));
    assert!((b["value"].as_f64().unwrap() - 1.0).abs() < 0.1);
    msh(d, &["aniso", "--angles", "0:45:180", "--t", "16"]);
    let scan = std::fs::read_to_string(d.join("scan.csv")).unwrap();
    assert_eq!(scan.lines().count(), 5);
}

#[test]
fn coeffs_and_oracle_check() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let c = json(&msh(d, &["coeffs", "--lattice", "cubic", "--edges", "fd", "--T", "8,12", "--angles", "0,90"]));
    assert!((c["c2"]["limit"].as_f64().unwrap() - 1.0).abs() < 0.2);
    assert!(d.join("coeffs.json").exists());
    let out = msh(d, &["oracle-check", "--instances", "5"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("5/5 equal"));
}

#[test]
fn run_config_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/minimal.json");
    let out = json(&msh(dir.path(), &["--threads", "1", "run", "--config", cfg]));
    assert_eq!(out["segment"]["energy"]["total"].as_f64().unwrap(), 0.0);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn bad_input_fails_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_msh"))
        .args(["--out-dir", dir.path().to_str().unwrap(), "gen", "--generator", "rsa", "--window", "0:10"])
        .arg("--diameter")
        .arg("-1")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
    let out = Command::new(env!("CARGO_BIN_EXE_msh"))
        .args(["graph", "--points", "/nonexistent.csv", "--mode", "voronoi"])
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
}
