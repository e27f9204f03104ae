//! Command-level behavior: CSV artifacts, determinism, sweep/rank
//! consistency with the decoupled closed form, and binary exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use diffnet_cli::{commands, parse_grid, parse_scenario, Resolved};
use tempfile::TempDir;

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

const BASE: &str = r#"
[topology]
kind = "geometric"
n = 4
side = 100.0
range = 70.0
seed = 8

[nodes]
m = 4
mu = 0.05
sigma_u2 = 1.0
sigma_v2 = [1e-3, 4e-3, 2e-3, 6e-4]
rho = 0.5

[error]
kind = "uniform"
p = 0.4

[rule]
kind = "relative_variance"

[run]
iters = 800
runs = 6
window = 200
seed = 11
"#;

fn resolved_into(dir: &Path, body: &str, out: &str) -> Resolved {
    let path = write_config(dir, "scenario.toml", body);
    parse_scenario(&path)
        .unwrap()
        .resolve_with(None, Some(dir.join(out)))
        .unwrap()
}

#[test]
fn theory_and_simulate_write_parseable_csv() {
    let dir = TempDir::new().unwrap();
    let res = resolved_into(dir.path(), BASE, "out");
    let report = commands::cmd_theory(&res).unwrap();
    let (curve, est) = commands::cmd_simulate(&res).unwrap();
    assert_eq!(curve.samples(), 801);
    assert_eq!(est.local.len(), 4);

    for name in ["msd_theory.csv", "msd_sim.csv", "curve.csv", "profiles.csv", "positions.csv"] {
        let text = fs::read_to_string(dir.path().join("out").join(name)).unwrap();
        assert!(text.lines().count() > 1, "{name} is empty");
    }
    // msd_theory.csv round-trips node values losslessly
    let text = fs::read_to_string(dir.path().join("out/msd_theory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "node,msd_linear,msd_db");
    for (k, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let linear: f64 = fields[1].parse().unwrap();
        if k < 4 {
            assert_eq!(linear, report.local[k], "lossless float round trip");
        } else {
            assert_eq!(fields[0], "global");
            assert_eq!(linear, report.global);
        }
    }
}

#[test]
fn commands_are_deterministic_given_the_config() {
    let dir = TempDir::new().unwrap();
    let res_a = resolved_into(dir.path(), BASE, "a");
    let res_b = resolved_into(dir.path(), BASE, "b");
    commands::cmd_simulate(&res_a).unwrap();
    commands::cmd_simulate(&res_b).unwrap();
    for name in ["curve.csv", "msd_sim.csv", "profiles.csv"] {
        let a = fs::read(dir.path().join("a").join(name)).unwrap();
        let b = fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn seed_override_changes_the_sample_path() {
    let dir = TempDir::new().unwrap();
    let path = write_config(dir.path(), "scenario.toml", BASE);
    let scenario = parse_scenario(&path).unwrap();
    let res_a = scenario
        .resolve_with(Some(1), Some(dir.path().join("a")))
        .unwrap();
    let res_b = scenario
        .resolve_with(Some(2), Some(dir.path().join("b")))
        .unwrap();
    let (_, est_a) = commands::cmd_simulate(&res_a).unwrap();
    let (_, est_b) = commands::cmd_simulate(&res_b).unwrap();
    assert_ne!(est_a.global, est_b.global);
}

#[test]
fn compare_reports_small_delta_on_single_node_fixture() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[topology]
kind = "geometric"
n = 1
side = 10.0
range = 5.0
seed = 0

[nodes]
m = 2
mu = 0.1
sigma_u2 = 1.0
sigma_v2 = 0.01

[error]
kind = "uniform"
p = 0.0

[rule]
kind = "uniform"

[run]
iters = 4000
runs = 40
window = 500
seed = 3
"#;
    let res = resolved_into(dir.path(), body, "out");
    let report = commands::cmd_compare(&res).unwrap();
    let theory = report.theory.unwrap();
    assert!((theory.local[0] - 1.25e-3).abs() / 1.25e-3 < 1e-10);
    let delta = (10.0 * (report.sim.local[0] / theory.local[0]).log10()).abs();
    assert!(delta < 0.5, "delta {delta} dB");
}

#[test]
fn unstable_compare_emits_na_theory_columns() {
    let dir = TempDir::new().unwrap();
    // mu far beyond 2/((M+2) sigma_u2) = 1/3: mean-square unstable
    let body = BASE
        .replace("mu = 0.05", "mu = 1.5")
        .replace("iters = 800", "iters = 100")
        .replace("window = 200", "window = 20");
    let res = resolved_into(dir.path(), &body, "out");
    let report = commands::cmd_compare(&res).unwrap();
    assert!(report.theory.is_none());
    assert!(!report.stability.all_meansquare_ok());
    let text = fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.contains("NA")));
}

#[test]
fn sweep_endpoints_match_ideal_and_noncooperative_theory() {
    let dir = TempDir::new().unwrap();
    let res = resolved_into(dir.path(), BASE, "out");
    let report = commands::cmd_sweep(&res, &[0.0, 1.0], false).unwrap();
    assert_eq!(report.points.len(), 2);

    // p = 1: every node at its standalone closed form
    let dead = report.points[1].theory.as_ref().unwrap();
    for (k, p) in res.profiles.iter().enumerate() {
        let standalone = commands::standalone_msd(res.regressor_len(), p);
        let rel = (dead.local[k] - standalone).abs() / standalone;
        assert!(rel < 1e-10, "node {k}: rel {rel}");
    }

    // p = 0: equals the ideal-exchange theory (direct pipeline at p = 0)
    let ideal_model = diffnet_core::ErrorModel::uniform(&res.topo, 0.0).unwrap();
    let (_, _, system) = commands::theory_pipeline(&res, &ideal_model).unwrap();
    let ideal = diffnet_core::steady_state_msd(&system, &res.w_o).unwrap();
    let sweep0 = report.points[0].theory.as_ref().unwrap();
    for k in 0..4 {
        assert_eq!(sweep0.local[k], ideal.local[k]);
    }
}

#[test]
fn sweep_requires_uniform_error_spec() {
    let dir = TempDir::new().unwrap();
    let body = BASE.replace(
        "kind = \"uniform\"\np = 0.4",
        "kind = \"mac\"\ncw = 3\nr = 1",
    );
    let res = resolved_into(dir.path(), &body, "out");
    assert!(commands::cmd_sweep(&res, &[0.0, 0.5], false).is_err());
    assert!(commands::cmd_rank(&res, &[0.0, 0.5]).is_err());
}

#[test]
fn sweep_argmin_is_stable_under_grid_refinement() {
    // 7-node fixture with an interior global minimum
    let dir = TempDir::new().unwrap();
    let body = r#"
[topology]
kind = "geometric"
n = 7
side = 100.0
range = 50.0
seed = 22

[nodes]
m = 8
mu = 0.01
sigma_u2 = 1.0
sigma_v2 = [1e-6, 4.641588833612782e-6, 2.1544346900318867e-5, 1e-4, 4.641588833612773e-4, 2.1544346900318823e-3, 1e-2]

[error]
kind = "uniform"
p = 0.0

[rule]
kind = "relative_variance"

[run]
iters = 100
runs = 1
window = 10
seed = 1
"#;
    let res = resolved_into(dir.path(), body, "out");
    let coarse = commands::cmd_sweep(&res, &parse_grid("0:1:0.04").unwrap(), false).unwrap();
    let p_coarse = coarse.argmin_p.unwrap();
    assert!(p_coarse > 0.0 && p_coarse < 1.0, "argmin {p_coarse}");
    // refine around the coarse argmin with half the step
    let lo = (p_coarse - 0.04).max(0.0);
    let hi = (p_coarse + 0.04).min(1.0);
    let refined_grid: Vec<f64> = (0..=4).map(|i| lo + i as f64 * ((hi - lo) / 4.0)).collect();
    let refined = commands::cmd_sweep(&res, &refined_grid, false).unwrap();
    let p_fine = refined.argmin_p.unwrap();
    assert!(
        (p_fine - p_coarse).abs() <= 0.02 + 1e-12,
        "coarse {p_coarse} vs refined {p_fine}"
    );
}

#[test]
fn rank_at_dead_links_orders_by_standalone_msd_with_index_ties() {
    let dir = TempDir::new().unwrap();
    // path 1-2-3 with nodes 1 and 2 sharing a profile: exact tie at p = 1
    let body = r#"
[topology]
kind = "file"
path = "adj.txt"

[nodes]
m = 4
mu = 0.05
sigma_u2 = 1.0
sigma_v2 = [2e-3, 2e-3, 1e-4]

[error]
kind = "uniform"
p = 0.0

[rule]
kind = "uniform"

[run]
iters = 100
runs = 1
window = 10
seed = 1
"#;
    fs::write(dir.path().join("adj.txt"), "0 1 0\n1 0 1\n0 1 0\n").unwrap();
    let res = resolved_into(dir.path(), body, "out");
    let report = commands::cmd_rank(&res, &[1.0]).unwrap();
    let order = report.orders[0].1.as_ref().unwrap();
    // node 3 has the lowest standalone MSD; nodes 1 and 2 tie, index order
    assert_eq!(order, &vec![3, 1, 2]);
    let text = fs::read_to_string(dir.path().join("out/rank.csv")).unwrap();
    assert_eq!(text, "p,order\n1,3 1 2\n");
}

#[test]
fn binary_exit_codes_and_outputs() {
    let bin = env!("CARGO_BIN_EXE_diffnet");
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "scenario.toml", BASE);
    let out = dir.path().join("results");

    // successful analysis: exit 0 and artifacts present
    let status = Command::new(bin)
        .args(["theory", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("msd_theory.csv").exists());

    // instability is an analysis finding, not a failure
    let unstable = write_config(
        dir.path(),
        "unstable.toml",
        &BASE
            .replace("mu = 0.05", "mu = 1.5")
            .replace("iters = 800", "iters = 60")
            .replace("window = 200", "window = 10")
            .replace("runs = 6", "runs = 2"),
    );
    let status = Command::new(bin)
        .args(["compare", "--config"])
        .arg(&unstable)
        .arg("--out")
        .arg(dir.path().join("unstable_out"))
        .status()
        .unwrap();
    assert!(status.success(), "instability finding must exit 0");

    // validation problems exit nonzero
    let bad = write_config(dir.path(), "bad.toml", &BASE.replace("p = 0.4", "p = 1.4"));
    let output = Command::new(bin)
        .args(["theory", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("error"));

    let status = Command::new(bin).args(["theory"]).status().unwrap();
    assert!(!status.success(), "--config is required");

    // mac subcommands
    let mac = write_config(
        dir.path(),
        "mac.toml",
        &BASE.replace(
            "kind = \"uniform\"\np = 0.4",
            "kind = \"mac\"\ncw = 3\nr = 1\nslots = 5000",
        ),
    );
    let macout = dir.path().join("macout");
    for sub in ["model", "sim"] {
        let status = Command::new(bin)
            .args(["mac", sub, "--config"])
            .arg(&mac)
            .arg("--out")
            .arg(&macout)
            .status()
            .unwrap();
        assert!(status.success());
    }
    for name in ["mac_model.csv", "mac_sim.csv"] {
        let text = fs::read_to_string(macout.join(name)).unwrap();
        assert_eq!(text.lines().count(), 5, "{name}");
    }
}

#[test]
fn sweep_csv_is_lossless() {
    let dir = TempDir::new().unwrap();
    let res = resolved_into(dir.path(), BASE, "out");
    commands::cmd_sweep(&res, &[0.0, 0.25, 0.5, 0.75, 1.0], false).unwrap();
    let text = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    for line in text.lines().skip(1) {
        for field in line.split(',') {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v}"), field, "field {field} not shortest-form");
        }
    }
}
