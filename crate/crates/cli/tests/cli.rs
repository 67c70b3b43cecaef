use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qcarpet(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcarpet"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = qcarpet(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn matrix(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn decompose_reports_convergence() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["decompose", "--shape", "half-cosine-squared", "--n-modes", "10"], dir.path());
    let j = json(&dir.path().join("decompose.json"));
    assert!(j["summary"]["P_N"].as_f64().unwrap() > 0.999);
    assert_eq!(j["run_config"]["n_modes"], 10);

    ok(&["decompose", "--shape", "square", "--n-modes", "500"], dir.path());
    let j = json(&dir.path().join("decompose.json"));
    assert!(j["summary"]["P_N"].as_f64().unwrap() < 0.999);
    let conv = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let energies: Vec<f64> = conv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(energies.len(), 500);
    assert!(energies[499] > 5.0 * energies[49]);
    let coeffs = fs::read_to_string(dir.path().join("coefficients.csv")).unwrap();
    assert!(coeffs.starts_with("alpha,re_c,im_c,weight,energy\n"));
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qcarpet(&["decompose", "--n-modes", "0"], dir.path()).status.code(), Some(1));
    assert_eq!(
        qcarpet(&["trajectories", "--seed-positions", "1.5,-2,1.5"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(qcarpet(&["decompose", "--w", "80"], dir.path()).status.code(), Some(1));
    let missing = dir.path().join("missing");
    assert_eq!(qcarpet(&["verify", "--only", "1"], &missing).status.code(), Some(1));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["verify", "--only", "1,2,5"], dir.path());
    let report = json(&dir.path().join("verify.json"));
    assert_eq!(report["passed"], 3);
    let o = qcarpet(&["verify", "--only", "2", "--tau-scale", "1.001"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("[FAIL]  2"));
}

#[test]
fn carpet_outputs_are_deterministic_and_re_ingestible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["carpet", "--nx", "81", "--nt", "61", "--n-modes", "60", "--csv"];
    ok(&[&args[..], &["--jobs", "1"]].concat(), a.path());
    ok(&[&args[..], &["--jobs", "3"]].concat(), b.path());
    for f in ["density.pgm", "velocity.pgm", "density.csv", "velocity.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let side = json(&a.path().join("density.json"));
    assert!((side["tau_r"].as_f64().unwrap() - 397.887).abs() < 1e-3);
    assert_eq!(side["T"], side["tau_r"]);
    let pgm = fs::read(a.path().join("density.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n81 61\n65535\n"));
    assert_eq!(pgm.len(), b"P5\n81 61\n65535\n".len() + 2 * 81 * 61);

    let sym = json(&a.path().join("symmetry.json"));
    let max_rho = sym["report"]["max_rho"].as_f64().unwrap();
    assert!(sym["report"]["mirror_error"].as_f64().unwrap() <= 1e-12 * max_rho);
    assert!(sym["report"]["time_reversal_error"].as_f64().unwrap() <= 1e-10 * max_rho);

    // The sidecar's embedded configuration reproduces the run.
    let c = tempfile::tempdir().unwrap();
    let config = a.path().join("velocity.json");
    ok(&["carpet", "--config", config.to_str().unwrap()], c.path());
    for f in ["density.pgm", "velocity.pgm", "density.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(c.path().join(f)).unwrap(), "{f}");
    }
}

/// Mean absolute change of the density from its initial profile.
fn carpet_activity(m: &[Vec<f64>]) -> f64 {
    let first = &m[0];
    let scale = first.iter().copied().fold(0.0, f64::max);
    let total: f64 = m
        .iter()
        .map(|row| row.iter().zip(first).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .sum();
    total / (scale * (m.len() * first.len()) as f64)
}

#[test]
fn heavier_particles_give_quieter_carpets() {
    let mut activity = Vec::new();
    for m in ["1", "10", "100", "1000"] {
        let dir = tempfile::tempdir().unwrap();
        ok(
            &["carpet", "--m", m, "--t-max", "397.9", "--nx", "201", "--nt", "101", "--csv"],
            dir.path(),
        );
        activity.push(carpet_activity(&matrix(&dir.path().join("density.csv"))));
    }
    assert!(activity.windows(2).all(|w| w[1] < w[0]), "{activity:?}");
}

/// Mean number of interior local maxima per time row above 1% of the row peak.
fn mean_peaks(m: &[Vec<f64>]) -> f64 {
    let peaks: usize = m
        .iter()
        .map(|row| {
            let top = row.iter().copied().fold(0.0, f64::max);
            (1..row.len() - 1)
                .filter(|&i| row[i] > row[i - 1] && row[i] >= row[i + 1] && row[i] > 0.01 * top)
                .count()
        })
        .sum();
    peaks as f64 / m.len() as f64
}

#[test]
fn longer_boxes_give_richer_carpets() {
    let mut peaks = Vec::new();
    for l in ["10", "50", "100"] {
        let dir = tempfile::tempdir().unwrap();
        ok(&["carpet", "--L", l, "--nx", "401", "--nt", "101", "--csv"], dir.path());
        peaks.push(mean_peaks(&matrix(&dir.path().join("density.csv"))));
    }
    assert!(peaks.windows(2).all(|w| w[1] > w[0]), "{peaks:?}");
}

fn diagnostics(dir: &Path) -> Value {
    json(&dir.join("trajectories.json"))["diagnostics"].clone()
}

/// Largest distance of any path from the straight line joining its end points.
fn chord_deviation(csv: &str) -> f64 {
    let mut paths: Vec<Vec<(f64, f64)>> = Vec::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let id: usize = f[0].parse().unwrap();
        if paths.len() <= id {
            paths.push(Vec::new());
        }
        paths[id].push((f[1].parse().unwrap(), f[2].parse().unwrap()));
    }
    paths
        .iter()
        .map(|p| {
            let (t0, x0) = p[0];
            let (t1, x1) = p[p.len() - 1];
            p.iter()
                .map(|&(t, x)| (x - (x0 + (x1 - x0) * (t - t0) / (t1 - t0))).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn trajectory_runs() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["trajectories", "--m", "1000", "--t-max", "397.9", "--samples", "100"], dir.path());
    let d = diagnostics(dir.path());
    assert_eq!(d["completed"], 20);
    let csv = fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("traj_id,t,x\n"));
    assert_eq!(csv.lines().count(), 1 + 20 * 101);
    let heavy = chord_deviation(&csv);

    ok(&["trajectories", "--t-max", "397.9", "--samples", "100"], dir.path());
    let light = chord_deviation(&fs::read_to_string(dir.path().join("trajectories.csv")).unwrap());
    println!("chord deviation: m = 1000 {heavy:.3e}, m = 1 {light:.3e}");
    assert!(heavy < 0.01 * light, "{heavy} vs {light}");

    // A square aperture drives far busier trajectories than the smooth profile.
    let steps = |shape: &str| -> u64 {
        let dir = tempfile::tempdir().unwrap();
        ok(&["trajectories", "--shape", shape, "--t-max", "40", "--samples", "40"], dir.path());
        diagnostics(dir.path())["per_member"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| m["stats"]["accepted"].as_u64().unwrap() + m["stats"]["rejected_error"].as_u64().unwrap())
            .sum()
    };
    let square = steps("square");
    let smooth = steps("half-cosine-squared");
    assert!(square > 3 * smooth, "square {square} vs smooth {smooth}");
}

#[test]
fn point_queries() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["point", "--x", "-2,0,2", "--t", "0,15"], dir.path());
    let text = fs::read_to_string(dir.path().join("points.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    // Mirror points share density and carry opposite velocity.
    assert_eq!(rows[3][2], rows[5][2]);
    let (v1, v2): (f64, f64) = (rows[3][3].parse().unwrap(), rows[5][3].parse().unwrap());
    assert_eq!(v1, -v2);
    assert_eq!(qcarpet(&["point", "--x", "30", "--t", "0"], dir.path()).status.code(), Some(1));
}
