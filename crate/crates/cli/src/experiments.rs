//! Config-driven experiment runners. Each runner writes deterministic CSV
//! data files plus a JSON summary, and reports hard/statistical failures
//! through [`RunArtifacts`].

use std::path::PathBuf;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde_json::json;

use polymerlab_core::ground_state::{
    alpha_estimate, free_energy_variational, gamma_estimate, ldp_check, poisson_rate,
};
use polymerlab_core::montecarlo::{estimate_z, importance_ensemble};
use polymerlab_core::rng::worker_rng;
use polymerlab_core::stats;
use polymerlab_core::{BrownianField, Environment, OverlapReport, SiteKey, SolverFields};

use crate::config::ExperimentConfig;
use crate::report::{write_csv, write_json, RunArtifacts};

fn timestamped_summary(extra: serde_json::Value) -> serde_json::Value {
    json!({
        "timestamp_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "summary": extra,
    })
}

/// `env` kind: generate, snapshot, reload, audit bit equality.
pub fn run_env(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let d = cfg.solver.d;
    let horizon = cfg.solver.t_final;
    let field = BrownianField::new(d, cfg.master_seed, horizon);

    // Probe a small site/time grid, spanning dyadic and generic times.
    let mut probes = Vec::new();
    for s in -2i32..=2 {
        let mut coords = vec![0i32; d];
        coords[0] = s;
        let site = SiteKey(coords);
        for i in 1..=8 {
            let t = horizon * i as f64 / 8.3;
            probes.push((site.clone(), t.min(horizon)));
        }
    }
    let before: Vec<f64> = probes
        .iter()
        .map(|(s, t)| field.value_at(s, *t))
        .collect::<polymerlab_core::Result<_>>()?;

    let snap_path = cfg.out_dir.join("environment.json");
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    std::fs::write(&snap_path, field.snapshot())
        .with_context(|| format!("cannot write {}", snap_path.display()))?;

    let reloaded = BrownianField::load(&std::fs::read(&snap_path)?)?;
    let after: Vec<f64> = probes
        .iter()
        .map(|(s, t)| reloaded.value_at(s, *t))
        .collect::<polymerlab_core::Result<_>>()?;
    let mismatches = before
        .iter()
        .zip(&after)
        .filter(|(a, b)| a.to_bits() != b.to_bits())
        .count();

    let summary_path = cfg.out_dir.join("env_summary.json");
    write_json(
        &summary_path,
        &timestamped_summary(json!({
            "d": d,
            "master_seed": cfg.master_seed,
            "horizon": horizon,
            "probes": probes.len(),
            "bit_mismatches_after_reload": mismatches,
            "snapshot": snap_path,
        })),
    )?;
    Ok(RunArtifacts {
        files: vec![snap_path, summary_path],
        hard_failures: usize::from(mismatches > 0),
        stat_failures: 0,
    })
}

struct SeedReport {
    seed: u64,
    report: OverlapReport,
    consistency: f64,
}

fn solve_seeds(cfg: &ExperimentConfig, beta: f64) -> Result<Vec<SeedReport>> {
    let params = cfg.solver.params_at_beta(beta);
    params.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let kernel = params.build_kernel().map_err(|e| anyhow::anyhow!("{e}"))?;
    let seeds = cfg.env_seeds();
    let out: Vec<SeedReport> = seeds
        .into_par_iter()
        .map(|seed| {
            let env = BrownianField::new(params.d, seed, params.t_final);
            let fields = SolverFields::full(&env, &params, &kernel).expect("solve");
            SeedReport {
                seed,
                consistency: fields.consistency_residual(),
                report: fields.overlaps_and_localization(),
            }
        })
        .collect();
    Ok(out)
}

fn overlap_csv_row(cfg: &ExperimentConfig, beta: f64, s: &SeedReport) -> String {
    let p = cfg.solver.params_at_beta(beta);
    let r = &s.report;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.seed,
        p.d,
        p.kappa,
        beta,
        p.t_final,
        p.dt,
        p.radius,
        r.log_z,
        r.i_t,
        r.j_t,
        r.a_t,
        r.b_t,
        r.abar_t,
        r.bbar_t,
        r.leak
    )
}

const OVERLAP_HEADER: &str = "seed,d,kappa,beta,T,dt,R,logZ,I,J,a,b,abar,bbar,leak";

/// `localization` kind: per-seed overlap reports and favourite trajectories.
pub fn run_localization(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let beta = cfg.solver.beta;
    let runs = solve_seeds(cfg, beta)?;

    let csv_path = cfg.out_dir.join("localization.csv");
    write_csv(
        &csv_path,
        "overlap-v1",
        OVERLAP_HEADER,
        runs.iter().map(|s| overlap_csv_row(cfg, beta, s)),
    )?;

    // Favourite trajectories of the first seed.
    let fav_path = cfg.out_dir.join("favourites.csv");
    let first = &runs[0];
    let dt = cfg.solver.dt;
    let d = cfg.solver.d;
    let header = {
        let xs: Vec<String> = (0..d).map(|i| format!("xstar_{i}")).collect();
        let ys: Vec<String> = (0..d).map(|i| format!("ystar_{i}")).collect();
        format!("seed,k,t,{},{}", xs.join(","), ys.join(","))
    };
    write_csv(
        &fav_path,
        "favourites-v1",
        &header,
        first.report.x_star.iter().zip(&first.report.y_star).enumerate().map(|(k, (x, y))| {
            let xc: Vec<String> = x.0.iter().map(|c| c.to_string()).collect();
            let yc: Vec<String> = y.0.iter().map(|c| c.to_string()).collect();
            format!("{},{},{},{},{}", first.seed, k, k as f64 * dt, xc.join(","), yc.join(","))
        }),
    )?;

    let worst_sandwich =
        runs.iter().map(|s| s.report.sandwich_violation()).fold(f64::NEG_INFINITY, f64::max);
    let worst_consistency = runs.iter().map(|s| s.consistency).fold(0.0f64, f64::max);
    let is: Vec<f64> = runs.iter().map(|s| s.report.i_t).collect();
    let js: Vec<f64> = runs.iter().map(|s| s.report.j_t).collect();
    let (mean_i, se_i) = stats::mean_se(&is);
    let (mean_j, se_j) = stats::mean_se(&js);

    let hard_failures = usize::from(worst_sandwich > cfg.tolerances.exact_sandwich)
        + usize::from(worst_consistency > cfg.tolerances.consistency);

    let summary_path = cfg.out_dir.join("localization_summary.json");
    write_json(
        &summary_path,
        &timestamped_summary(json!({
            "seeds": runs.len(),
            "mean_I": mean_i, "se_I": se_i,
            "mean_J": mean_j, "se_J": se_j,
            "worst_sandwich_violation": worst_sandwich,
            "worst_consistency_residual": worst_consistency,
        })),
    )?;
    Ok(RunArtifacts {
        files: vec![csv_path, fav_path, summary_path],
        hard_failures,
        stat_failures: 0,
    })
}

/// `overlap-curve` kind: overlaps along the disorder-strength grid.
pub fn run_overlap_curve(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let kappa = cfg.solver.kappa;
    let mut rows = Vec::new();
    let mut all_rows = Vec::new();
    let mut hard_failures = 0usize;
    let mut means: Vec<(f64, f64, f64, f64, f64)> = Vec::new(); // (β, I, seI, J, seJ)

    for &ratio in &cfg.grids.beta2_over_kappa_grid {
        let beta = (ratio * kappa).sqrt();
        let runs = solve_seeds(cfg, beta)?;
        for s in &runs {
            if s.report.sandwich_violation() > cfg.tolerances.exact_sandwich {
                hard_failures += 1;
            }
            all_rows.push(overlap_csv_row(cfg, beta, s));
        }
        let is: Vec<f64> = runs.iter().map(|s| s.report.i_t).collect();
        let js: Vec<f64> = runs.iter().map(|s| s.report.j_t).collect();
        let bs: Vec<f64> = runs.iter().map(|s| s.report.b_t).collect();
        let bbars: Vec<f64> = runs.iter().map(|s| s.report.bbar_t).collect();
        let (mi, si) = stats::mean_se(&is);
        let (mj, sj) = stats::mean_se(&js);
        let (mb, _) = stats::mean_se(&bs);
        let (mbb, _) = stats::mean_se(&bbars);
        means.push((beta, mi, si, mj, sj));
        rows.push(format!(
            "{beta},{ratio},{mi},{si},{mj},{sj},{mb},{mbb},{}",
            beta * (1.0 - mj)
        ));
    }

    // Monotone-trend statistics (asymptotics proxy, statistical only).
    let mut stat_failures = 0usize;
    let mut min_margin_i = f64::INFINITY;
    let mut min_margin_j = f64::INFINITY;
    for w in means.windows(2) {
        let (_, i0, si0, j0, sj0) = w[0];
        let (_, i1, si1, j1, sj1) = w[1];
        min_margin_i = min_margin_i
            .min(i1 - i0 - cfg.tolerances.se_sigmas * (si0 * si0 + si1 * si1).sqrt());
        min_margin_j = min_margin_j
            .min(j1 - j0 - cfg.tolerances.se_sigmas * (sj0 * sj0 + sj1 * sj1).sqrt());
    }
    if min_margin_i < 0.0 || min_margin_j < 0.0 {
        stat_failures += 1;
    }
    // β(1 - mean J) is nondecreasing only in the T → ∞ limit; reported, not
    // gated.
    let derivative_proxy: Vec<f64> = means.iter().map(|m| m.0 * (1.0 - m.3)).collect();
    let proxy_monotone = derivative_proxy.windows(2).all(|w| w[1] >= w[0] - 1e-9);

    let curve_path = cfg.out_dir.join("overlap_curve.csv");
    write_csv(
        &curve_path,
        "overlap-curve-v1",
        "beta,beta2_over_kappa,mean_I,se_I,mean_J,se_J,mean_b,mean_bbar,beta_one_minus_J",
        rows,
    )?;
    let detail_path = cfg.out_dir.join("overlap_curve_seeds.csv");
    write_csv(&detail_path, "overlap-v1", OVERLAP_HEADER, all_rows)?;

    let summary_path = cfg.out_dir.join("overlap_curve_summary.json");
    write_json(
        &summary_path,
        &timestamped_summary(json!({
            "min_trend_margin_I": min_margin_i,
            "min_trend_margin_J": min_margin_j,
            "beta_one_minus_J_monotone_finite_T": proxy_monotone,
            "beta_one_minus_J_note": "asymptotic-only statement; reported, not gated",
            "sandwich_hard_failures": hard_failures,
        })),
    )?;
    Ok(RunArtifacts {
        files: vec![curve_path, detail_path, summary_path],
        hard_failures,
        stat_failures,
    })
}

/// `free-energy` kind: Γ tables, variational Ψ and the maximizer interval.
pub fn run_free_energy(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let kappa = cfg.solver.kappa;
    let d = cfg.solver.d;
    let horizon = cfg.ground_state.gamma_t;
    let seeds = cfg.env_seeds().len().max(8);
    let m = cfg.sampler.m_gamma;

    let mut rows = Vec::new();
    let mut stat_failures = 0usize;
    let mut summaries = Vec::new();
    for &beta in &cfg.grids.beta_grid {
        let gammas: Vec<(f64, f64, f64)> = cfg
            .grids
            .r_grid
            .par_iter()
            .map(|&r| {
                let est = gamma_estimate(
                    cfg.master_seed ^ beta.to_bits(),
                    seeds,
                    beta,
                    r,
                    horizon,
                    m,
                    d,
                )
                .expect("gamma estimate");
                (r, est.gamma_hat, est.se)
            })
            .collect();
        let variational = free_energy_variational(&gammas, kappa)
            .map_err(|e| anyhow::anyhow!("variational step at beta {beta}: {e}"))?;

        // Annealed bound check (statistical).
        for &(_, g, se) in &gammas {
            if g - cfg.tolerances.se_sigmas * se > beta * beta / 2.0 {
                stat_failures += 1;
            }
        }

        for &(r, g, se) in &gammas {
            let ik = poisson_rate(r, kappa).map_err(|e| anyhow::anyhow!("{e}"))?;
            let lambda = g - ik;
            let rate = -g + ik + variational.psi_hat;
            rows.push(format!(
                "{beta},{r},{g},{se},{lambda},{rate},{},{},{}",
                variational.psi_hat, variational.rmax_lo, variational.rmax_hi
            ));
        }

        // Cross-check Ψ̂ against a direct partition-function estimate.
        let direct_t = cfg.solver.t_final;
        let z_runs: Vec<f64> = (0..seeds.min(24))
            .into_par_iter()
            .map(|i| {
                let env = BrownianField::new(
                    d,
                    polymerlab_core::rng::env_seed(cfg.master_seed ^ 0xd1, i as u64),
                    direct_t,
                );
                let mut rng = worker_rng(cfg.master_seed ^ 0xd2, i as u64);
                estimate_z(&env, kappa, beta, direct_t, cfg.sampler.m_z, &mut rng)
                    .expect("estimate_z")
                    .log_z
                    / direct_t
            })
            .collect();
        let (psi_direct, psi_direct_se) = stats::mean_se(&z_runs);
        let gap = (variational.psi_hat - psi_direct).abs();
        let bars = cfg.tolerances.se_sigmas
            * (variational.psi_se * variational.psi_se + psi_direct_se * psi_direct_se).sqrt()
            // Finite-horizon offsets between the two routes.
            + 2.0 / direct_t.min(horizon);
        if gap > bars {
            stat_failures += 1;
        }
        summaries.push(json!({
            "beta": beta,
            "psi_hat": variational.psi_hat,
            "psi_se": variational.psi_se,
            "rmax_lo": variational.rmax_lo,
            "rmax_hi": variational.rmax_hi,
            "rmax_refined": variational.r_refined,
            "psi_direct": psi_direct,
            "psi_direct_se": psi_direct_se,
            "cross_check_gap": gap,
            "cross_check_bars": bars,
        }));
    }

    let table_path = cfg.out_dir.join("rate_tables.csv");
    write_csv(
        &table_path,
        "rate-tables-v1",
        "beta,r,gamma_hat,gamma_se,lambda_hat,rate_hat,psi_hat,rmax_lo,rmax_hi",
        rows,
    )?;
    let summary_path = cfg.out_dir.join("free_energy_summary.json");
    write_json(&summary_path, &timestamped_summary(json!({ "per_beta": summaries })))?;
    Ok(RunArtifacts {
        files: vec![table_path, summary_path],
        hard_failures: 0,
        stat_failures,
    })
}

/// `ground-state` kind: growth-constant ladder with diagnostics.
pub fn run_ground_state(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let report = alpha_estimate(
        cfg.master_seed,
        cfg.env_seeds().len(),
        &cfg.ground_state.n_list,
        cfg.ground_state.k_per_unit,
        cfg.solver.d,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let table_path = cfg.out_dir.join("alpha.csv");
    write_csv(
        &table_path,
        "alpha-v1",
        "n,mean,se,mean_fine,se_fine",
        report.rows.iter().map(|r| {
            format!("{},{},{},{},{}", r.n, r.mean, r.se, r.mean_fine, r.se_fine)
        }),
    )?;

    // Positivity with a quadrature-backed lower bound at n = 1 is covered in
    // the test suites; here gate gently on the estimate itself.
    let stat_failures = usize::from(report.alpha_hat - 3.0 * report.alpha_se <= 0.0)
        + usize::from(report.scaling_ks_p <= 0.001);

    let summary_path = cfg.out_dir.join("ground_state_summary.json");
    write_json(
        &summary_path,
        &timestamped_summary(json!({
            "alpha_hat": report.alpha_hat,
            "alpha_se": report.alpha_se,
            "step_deltas": report.step_deltas,
            "scaling_ks_d": report.scaling_ks_d,
            "scaling_ks_p": report.scaling_ks_p,
        })),
    )?;
    Ok(RunArtifacts {
        files: vec![table_path, summary_path],
        hard_failures: 0,
        stat_failures,
    })
}

/// `ldp` kind: empirical versus predicted jump-count rate function.
pub fn run_ldp(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let rows = ldp_check(
        cfg.master_seed,
        cfg.env_seeds().len().min(64),
        cfg.solver.kappa,
        cfg.solver.beta,
        cfg.ground_state.gamma_t,
        &cfg.grids.r_grid,
        cfg.sampler.m_gamma,
        cfg.solver.d,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    let csv_path = cfg.out_dir.join("ldp.csv");
    write_csv(
        &csv_path,
        "ldp-v1",
        "r,n,empirical_rate,empirical_se,predicted_rate,predicted_se,gap,censored",
        rows.iter().map(|row| {
            format!(
                "{},{},{},{},{},{},{},{}",
                row.r,
                row.n,
                row.empirical_rate,
                row.empirical_se,
                row.predicted_rate,
                row.predicted_se,
                (row.empirical_rate - row.predicted_rate).abs(),
                row.censored
            )
        }),
    )?;

    let max_gap = rows
        .iter()
        .filter(|r| !r.censored)
        .map(|r| (r.empirical_rate - r.predicted_rate).abs())
        .fold(0.0f64, f64::max);
    // The rate must vanish (within bars) somewhere on the grid.
    let min_rate = rows
        .iter()
        .filter(|r| !r.censored)
        .map(|r| r.empirical_rate - cfg.tolerances.se_sigmas * r.empirical_se)
        .fold(f64::INFINITY, f64::min);
    let stat_failures = usize::from(min_rate > 0.1);

    let summary_path = cfg.out_dir.join("ldp_summary.json");
    write_json(
        &summary_path,
        &timestamped_summary(json!({
            "max_abs_gap": max_gap,
            "min_rate_minus_bars": min_rate,
            "censored_points": rows.iter().filter(|r| r.censored).count(),
        })),
    )?;
    Ok(RunArtifacts {
        files: vec![csv_path, summary_path],
        hard_failures: 0,
        stat_failures,
    })
}

/// `check` kind: the full identity suite.
pub fn run_check(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let report = crate::suite::run_all(&cfg.tolerances);
    for check in &report.checks {
        println!("{}", check.line());
    }
    let path = cfg.out_dir.join("check_report.json");
    write_json(&path, &report)?;
    Ok(RunArtifacts {
        files: vec![path],
        hard_failures: report.hard_failures,
        stat_failures: report.stat_failures,
    })
}

/// Dispatch on the experiment kind.
pub fn run(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    use crate::config::ExperimentKind::*;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create {}", cfg.out_dir.display()))?;
    match cfg.kind {
        Env => run_env(cfg),
        FreeEnergy => run_free_energy(cfg),
        OverlapCurve => run_overlap_curve(cfg),
        Localization => run_localization(cfg),
        GroundState => run_ground_state(cfg),
        Ldp => run_ldp(cfg),
        Check => run_check(cfg),
    }
}

/// Paths written by the most common artifacts (used by tests).
pub fn artifact_paths(cfg: &ExperimentConfig) -> Vec<PathBuf> {
    vec![cfg.out_dir.clone()]
}
