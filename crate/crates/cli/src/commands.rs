//! Command implementations: each one resolves a scenario into reports,
//! writes CSV artifacts into the output directory and prints a short
//! summary. Analysis findings (including instability) exit successfully;
//! only input and validation problems are errors.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use diffnet_core::{
    build_moment_system, db, mac_node_results, mean_matrix, run_diffusion, scalar_coefficients,
    simulate_backoff, spectral_radius, steady_state_estimate, steady_state_msd, weight_moments,
    Error as CoreError, ErrorModel, LearningCurve, MacNodeResult, MacSimResult, MomentMode,
    MomentSystem, MsdReport, RunOptions, ScalarCoefficients, StabilityReport, SteadyStateEstimate,
    WeightMoments,
};

use crate::error::{CliError, Result};
use crate::scenario::{MomentsChoice, Resolved};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Create the output directory and log the resolved per-node profiles (and
/// positions, when the topology has them) for reproducibility.
pub fn prepare_output(res: &Resolved) -> Result<PathBuf> {
    let dir = res.out_dir.clone();
    fs::create_dir_all(&dir).map_err(|source| CliError::Write {
        path: dir.clone(),
        source,
    })?;
    let mut profiles = String::from("node,mu,sigma_u2,sigma_v2\n");
    for (k, p) in res.profiles.iter().enumerate() {
        let _ = writeln!(profiles, "{},{},{},{}", k + 1, p.mu, p.sigma_u2, p.sigma_v2);
    }
    write_file(&dir.join("profiles.csv"), &profiles)?;
    if let Some(csv) = res.topo.positions_csv() {
        write_file(&dir.join("positions.csv"), &csv)?;
    }
    Ok(dir)
}

/// Exact moments when requested or feasible, Monte Carlo otherwise.
fn moments_for(res: &Resolved, model: &ErrorModel) -> Result<WeightMoments> {
    let vars = res.noise_vars();
    let run = |mode: MomentMode| weight_moments(&res.rule, &res.topo, model, &vars, mode);
    match res.moments {
        MomentsChoice::Exact => Ok(run(MomentMode::Exact)?),
        MomentsChoice::MonteCarlo { samples, seed } => {
            Ok(run(MomentMode::MonteCarlo { samples, seed })?)
        }
        MomentsChoice::Auto { samples, seed } => match run(MomentMode::Exact) {
            Err(CoreError::EnumerationTooLarge { .. }) => {
                Ok(run(MomentMode::MonteCarlo { samples, seed })?)
            }
            other => Ok(other?),
        },
    }
}

/// Coefficients, weight moments and the assembled moment system.
pub fn theory_pipeline(
    res: &Resolved,
    model: &ErrorModel,
) -> Result<(ScalarCoefficients, WeightMoments, MomentSystem)> {
    let coeffs = scalar_coefficients(&res.profiles, &res.corr, res.regressor_len())?;
    let moments = moments_for(res, model)?;
    let system = build_moment_system(&coeffs, &moments)?;
    Ok((coeffs, moments, system))
}

fn msd_csv(report: &MsdReport) -> String {
    let mut out = Vec::new();
    report.write_csv(&mut out).expect("write to Vec");
    String::from_utf8(out).expect("utf8 csv")
}

fn estimate_csv(est: &SteadyStateEstimate) -> String {
    let mut out = String::from("node,msd_linear,msd_db\n");
    for (k, &v) in est.local.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", k + 1, v, db(v));
    }
    let _ = writeln!(out, "global,{},{}", est.global, db(est.global));
    out
}

/// `theory`: closed-form steady-state MSD report.
pub fn cmd_theory(res: &Resolved) -> Result<MsdReport> {
    let dir = prepare_output(res)?;
    let (_, _, system) = theory_pipeline(res, &res.model)?;
    let report = steady_state_msd(&system, &res.w_o)?;
    write_file(&dir.join("msd_theory.csv"), &msd_csv(&report))?;
    println!("steady-state MSD (theory), rho(C') = {:.6}", report.spectral_radius);
    for (k, &v) in report.local.iter().enumerate() {
        println!("  node {:>3}: {:.6e}  ({:+.2} dB)", k + 1, v, db(v));
    }
    println!(
        "  global  : {:.6e}  ({:+.2} dB)",
        report.global,
        report.global_db()
    );
    Ok(report)
}

/// `simulate`: Monte Carlo learning curve and steady-state tail estimate.
pub fn cmd_simulate(res: &Resolved) -> Result<(LearningCurve, SteadyStateEstimate)> {
    let dir = prepare_output(res)?;
    let curve = run_diffusion(
        &res.topo,
        &res.profiles,
        &res.corr,
        &res.w_o,
        &res.rule,
        &res.model,
        RunOptions {
            iters: res.iters,
            runs: res.runs,
            seed: res.seed,
        },
    )?;
    let est = steady_state_estimate(&curve, res.window)?;
    let mut csv = Vec::new();
    curve
        .write_csv(&mut csv)
        .expect("write curve to memory buffer");
    write_file(
        &dir.join("curve.csv"),
        &String::from_utf8(csv).expect("utf8 csv"),
    )?;
    write_file(&dir.join("msd_sim.csv"), &estimate_csv(&est))?;
    println!(
        "simulated {} runs x {} iterations (window {})",
        res.runs, res.iters, res.window
    );
    for (k, &v) in est.local.iter().enumerate() {
        println!("  node {:>3}: {:.6e}  ({:+.2} dB)", k + 1, v, db(v));
    }
    println!("  global  : {:.6e}  ({:+.2} dB)", est.global, db(est.global));
    Ok((curve, est))
}

/// `stability`: sufficient bounds, eta flags and spectral radii.
pub fn cmd_stability(res: &Resolved) -> Result<StabilityReport> {
    let dir = prepare_output(res)?;
    let coeffs = scalar_coefficients(&res.profiles, &res.corr, res.regressor_len())?;
    let moments = moments_for(res, &res.model)?;
    let system = build_moment_system(&coeffs, &moments)?;
    let rho_mean = spectral_radius(&mean_matrix(&moments.abar, &coeffs))?;
    let rho_ms = spectral_radius(&system.cprime)?;
    let report = StabilityReport::evaluate(&res.profiles, &coeffs)
        .with_spectral_radii(Some(rho_mean), Some(rho_ms));
    let mut csv = Vec::new();
    report.write_csv(&mut csv).expect("write to Vec");
    write_file(
        &dir.join("stability.csv"),
        &String::from_utf8(csv).expect("utf8 csv"),
    )?;
    print!("{report}");
    Ok(report)
}

/// Comparison of theory and simulation, with the theory side optional when
/// the configuration is mean-square unstable.
pub struct CompareReport {
    pub theory: Option<MsdReport>,
    pub sim: SteadyStateEstimate,
    pub stability: StabilityReport,
}

/// `compare`: theory vs simulation per node, plus the stability report.
/// An unstable theory side is reported, not treated as a failure.
pub fn cmd_compare(res: &Resolved) -> Result<CompareReport> {
    let dir = prepare_output(res)?;
    let (coeffs, moments, system) = theory_pipeline(res, &res.model)?;
    let theory = match steady_state_msd(&system, &res.w_o) {
        Ok(report) => Some(report),
        Err(CoreError::MeanSquareUnstable { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let rho_mean = spectral_radius(&mean_matrix(&moments.abar, &coeffs))?;
    let rho_ms = spectral_radius(&system.cprime)?;
    let stability = StabilityReport::evaluate(&res.profiles, &coeffs)
        .with_spectral_radii(Some(rho_mean), Some(rho_ms));

    let (_curve, sim) = cmd_simulate(res)?;

    let mut csv = String::from("node,msd_theory_db,msd_sim_db,delta_db\n");
    println!("node  theory(dB)  sim(dB)  delta(dB)");
    for k in 0..res.node_count() {
        let sim_db = db(sim.local[k]);
        match &theory {
            Some(t) => {
                let t_db = db(t.local[k]);
                let _ = writeln!(csv, "{},{},{},{}", k + 1, t_db, sim_db, sim_db - t_db);
                println!(
                    "{:>4}  {:>10.3} {:>8.3} {:>10.3}",
                    k + 1,
                    t_db,
                    sim_db,
                    sim_db - t_db
                );
            }
            None => {
                let _ = writeln!(csv, "{},NA,{},NA", k + 1, sim_db);
                println!("{:>4}          NA {:>8.3}         NA", k + 1, sim_db);
            }
        }
    }
    let sim_db = db(sim.global);
    match &theory {
        Some(t) => {
            let t_db = t.global_db();
            let _ = writeln!(csv, "global,{},{},{}", t_db, sim_db, sim_db - t_db);
        }
        None => {
            let _ = writeln!(csv, "global,NA,{},NA", sim_db);
            println!("theory unavailable: mean-square unstable (rho(C') = {rho_ms:.6})");
        }
    }
    write_file(&dir.join("compare.csv"), &csv)?;
    let mut scsv = Vec::new();
    stability.write_csv(&mut scsv).expect("write to Vec");
    write_file(
        &dir.join("stability.csv"),
        &String::from_utf8(scsv).expect("utf8 csv"),
    )?;
    print!("{stability}");
    Ok(CompareReport {
        theory,
        sim,
        stability,
    })
}

/// One grid point of a sweep: theory per node, optional simulation.
pub struct SweepPoint {
    pub p: f64,
    pub theory: Option<MsdReport>,
    pub sim: Option<SteadyStateEstimate>,
}

pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    /// Grid argmin of the global theory curve, when any point is stable.
    pub argmin_p: Option<f64>,
}

/// `sweep`: steady-state MSD as a function of the uniform error
/// probability. Requires a uniform error spec; the scenario's `p` is
/// replaced by each grid value in turn.
pub fn cmd_sweep(res: &Resolved, grid: &[f64], with_sim: bool) -> Result<SweepReport> {
    if res.uniform_p.is_none() {
        return Err(CliError::Validation(
            "sweep requires a uniform error spec (error.kind = \"uniform\")".into(),
        ));
    }
    let dir = prepare_output(res)?;
    let n = res.node_count();
    let mut points = Vec::with_capacity(grid.len());
    for &p in grid {
        let model = ErrorModel::uniform(&res.topo, p)?;
        let (_, _, system) = theory_pipeline(res, &model)?;
        let theory = match steady_state_msd(&system, &res.w_o) {
            Ok(report) => Some(report),
            Err(CoreError::MeanSquareUnstable { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        let sim = if with_sim {
            let curve = run_diffusion(
                &res.topo,
                &res.profiles,
                &res.corr,
                &res.w_o,
                &res.rule,
                &model,
                RunOptions {
                    iters: res.iters,
                    runs: res.runs,
                    seed: res.seed,
                },
            )?;
            Some(steady_state_estimate(&curve, res.window)?)
        } else {
            None
        };
        points.push(SweepPoint { p, theory, sim });
    }

    let mut csv = String::from("p,msd_global_db");
    for k in 0..n {
        let _ = write!(csv, ",msd_node{}_db", k + 1);
    }
    if with_sim {
        let _ = write!(csv, ",sim_global_db");
        for k in 0..n {
            let _ = write!(csv, ",sim_node{}_db", k + 1);
        }
    }
    csv.push('\n');
    for pt in &points {
        let _ = write!(csv, "{}", pt.p);
        match &pt.theory {
            Some(t) => {
                let _ = write!(csv, ",{}", t.global_db());
                for &v in &t.local {
                    let _ = write!(csv, ",{}", db(v));
                }
            }
            None => {
                for _ in 0..=n {
                    let _ = write!(csv, ",NA");
                }
            }
        }
        if with_sim {
            let est = pt.sim.as_ref().expect("sim computed for every point");
            let _ = write!(csv, ",{}", db(est.global));
            for &v in &est.local {
                let _ = write!(csv, ",{}", db(v));
            }
        }
        csv.push('\n');
    }
    write_file(&dir.join("sweep.csv"), &csv)?;

    let argmin_p = points
        .iter()
        .filter_map(|pt| pt.theory.as_ref().map(|t| (pt.p, t.global)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite MSD"))
        .map(|(p, _)| p);
    match argmin_p {
        Some(p) => println!(
            "sweep over {} grid points: global theory MSD minimized at p = {p}",
            points.len()
        ),
        None => println!("sweep over {} grid points: no stable point", points.len()),
    }
    Ok(SweepReport { points, argmin_p })
}

pub struct RankReport {
    /// For each grid probability, node ids (1-based) sorted by ascending
    /// local theory MSD, ties broken by node index.
    pub orders: Vec<(f64, Option<Vec<usize>>)>,
}

/// `rank`: node ordering by local theory MSD for each grid probability.
pub fn cmd_rank(res: &Resolved, grid: &[f64]) -> Result<RankReport> {
    if res.uniform_p.is_none() {
        return Err(CliError::Validation(
            "rank requires a uniform error spec (error.kind = \"uniform\")".into(),
        ));
    }
    let dir = prepare_output(res)?;
    let mut orders = Vec::with_capacity(grid.len());
    for &p in grid {
        let model = ErrorModel::uniform(&res.topo, p)?;
        let (_, _, system) = theory_pipeline(res, &model)?;
        let order = match steady_state_msd(&system, &res.w_o) {
            Ok(report) => {
                let mut idx: Vec<usize> = (0..res.node_count()).collect();
                idx.sort_by(|&a, &b| {
                    report.local[a]
                        .partial_cmp(&report.local[b])
                        .expect("finite MSD")
                        .then(a.cmp(&b))
                });
                Some(idx.iter().map(|&k| k + 1).collect::<Vec<usize>>())
            }
            Err(CoreError::MeanSquareUnstable { .. }) => None,
            Err(e) => return Err(e.into()),
        };
        orders.push((p, order));
    }
    let mut csv = String::from("p,order\n");
    for (p, order) in &orders {
        match order {
            Some(ids) => {
                let text: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                let _ = writeln!(csv, "{},{}", p, text.join(" "));
            }
            None => {
                let _ = writeln!(csv, "{p},NA");
            }
        }
    }
    write_file(&dir.join("rank.csv"), &csv)?;
    for (p, order) in &orders {
        match order {
            Some(ids) => println!(
                "p = {p}: {}",
                ids.iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
            None => println!("p = {p}: unstable"),
        }
    }
    Ok(RankReport { orders })
}

/// `mac model`: per-node fixed-point transmission, collision and loss
/// probabilities.
pub fn cmd_mac_model(res: &Resolved) -> Result<Vec<MacNodeResult>> {
    let params = res.mac_params.ok_or_else(|| {
        CliError::Validation("mac commands need error.kind = \"mac\" with cw and r".into())
    })?;
    let dir = prepare_output(res)?;
    let results = mac_node_results(&res.topo, &params);
    let mut csv = String::from("node,tau,q,p\n");
    for (k, r) in results.iter().enumerate() {
        let _ = writeln!(csv, "{},{},{},{}", k + 1, r.tau, r.q, r.p);
    }
    write_file(&dir.join("mac_model.csv"), &csv)?;
    println!("node    tau        q        p");
    for (k, r) in results.iter().enumerate() {
        println!("{:>4}  {:7.4}  {:7.4}  {:7.4}", k + 1, r.tau, r.q, r.p);
    }
    Ok(results)
}

/// `mac sim`: slotted backoff simulation over `error.slots` slots.
pub fn cmd_mac_sim(res: &Resolved) -> Result<MacSimResult> {
    let params = res.mac_params.ok_or_else(|| {
        CliError::Validation("mac commands need error.kind = \"mac\" with cw and r".into())
    })?;
    let dir = prepare_output(res)?;
    let out = simulate_backoff(&res.topo, params, res.slots, res.seed);
    let mut csv = String::from("node,q_hat,p_hat\n");
    for k in 0..res.node_count() {
        let _ = writeln!(csv, "{},{},{}", k + 1, out.q_hat[k], out.p_hat[k]);
    }
    write_file(&dir.join("mac_sim.csv"), &csv)?;
    println!("slotted backoff over {} slots (seed {})", res.slots, res.seed);
    println!("node    q_hat    p_hat  attempts");
    for k in 0..res.node_count() {
        println!(
            "{:>4}  {:7.4}  {:7.4}  {:>8}",
            k + 1,
            out.q_hat[k],
            out.p_hat[k],
            out.attempts[k]
        );
    }
    Ok(out)
}

/// Steady-state MSD of a node running alone (the dead-link limit); used to
/// check sweep/rank endpoints.
pub fn standalone_msd(m: usize, p: &diffnet_core::NodeProfile) -> f64 {
    m as f64 * p.mu * p.sigma_v2 / (2.0 - p.mu * (m as f64 + 2.0) * p.sigma_u2)
}
