//! The identity-check suite: every exact identity the engine guarantees and
//! the statistical checks around the asymptotic statements, at desk scale.
//!
//! Exact identities (oracle equivalence, sandwich, pathwise scaling,
//! forward/backward consistency, DP optimality) are hard checks. Monte
//! Carlo comparisons (Itô and integration-by-parts identities, annealed
//! bounds, concentration, scaling of the conditioned free energy,
//! localization trends, cross-method agreement) run at fixed seeds with
//! 3-SE style tolerances and warn rather than gate unless strict mode asks
//! otherwise.

use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use polymerlab_core::enumeration;
use polymerlab_core::ground_state::{dp_ground_state, gamma_quenched};
use polymerlab_core::montecarlo::{estimate_z, importance_ensemble};
use polymerlab_core::paths::{hamiltonian, sample_conditioned, sample_free};
use polymerlab_core::rng::{env_seed, worker_rng};
use polymerlab_core::stats;
use polymerlab_core::{BrownianField, Environment, SiteKey, SolverFields, SolverParams};

use crate::config::ToleranceSection;
use crate::report::{CheckOutcome, CheckReport};

const SUITE_MASTER: u64 = 0x414e_504f;

fn master_for(criterion: u64) -> u64 {
    polymerlab_core::rng::chain(SUITE_MASTER, criterion)
}

/// Everything one quenched solve contributes to the suite.
#[derive(Clone, Copy, Debug)]
struct SolveStats {
    log_z: f64,
    i_t: f64,
    j_t: f64,
    b_t: f64,
    bbar_t: f64,
    sandwich: f64,
}

/// Run a batch of solves over derived seeds; `full` adds the backward pass
/// (needed for J). Every full solve feeds the consistency ledger.
fn solve_batch(
    params: &SolverParams,
    master: u64,
    count: usize,
    full: bool,
    consistency: &Mutex<f64>,
) -> Vec<SolveStats> {
    let kernel = params.build_kernel().expect("kernel for suite params");
    (0..count)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(params.d, env_seed(master, i as u64), params.t_final);
            if full {
                let fields = SolverFields::full(&env, params, &kernel).expect("suite solve");
                let residual = fields.consistency_residual();
                {
                    let mut worst = consistency.lock().unwrap();
                    *worst = worst.max(residual);
                }
                let report = fields.overlaps_and_localization();
                SolveStats {
                    log_z: fields.log_z,
                    i_t: report.i_t,
                    j_t: report.j_t,
                    b_t: report.b_t,
                    bbar_t: report.bbar_t,
                    sandwich: report.sandwich_violation(),
                }
            } else {
                let fields =
                    SolverFields::forward_only(&env, params, &kernel).expect("suite solve");
                let (i_t, b_t) = fields.endpoint_overlap();
                SolveStats {
                    log_z: fields.log_z,
                    i_t,
                    j_t: f64::NAN,
                    b_t,
                    bbar_t: f64::NAN,
                    sandwich: f64::NEG_INFINITY,
                }
            }
        })
        .collect()
}

fn upper(name: &str, anchor: &str, measured: f64, tol: f64, hard: bool, detail: String, t0: Instant) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        anchor: anchor.into(),
        measured,
        tolerance: tol,
        pass: measured <= tol,
        hard,
        detail,
        runtime_ms: t0.elapsed().as_millis(),
    }
}

fn lower(name: &str, anchor: &str, measured: f64, tol: f64, hard: bool, detail: String, t0: Instant) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        anchor: anchor.into(),
        measured,
        tolerance: tol,
        pass: measured >= tol,
        hard,
        detail,
        runtime_ms: t0.elapsed().as_millis(),
    }
}

/// Criterion 1: solver outputs equal exhaustive path enumeration.
fn c01_oracle_equivalence(tol: &ToleranceSection) -> CheckOutcome {
    let t0 = Instant::now();
    let params = SolverParams {
        d: 1,
        kappa: 1.0,
        beta: 1.0,
        t_final: 1.5,
        dt: 0.25,
        radius: 2,
        kernel_tol: 1e-8,
        kernel_order_cap: 64,
    };
    let kernel = params.build_kernel().unwrap();
    let master = master_for(1);
    let worst = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(1, env_seed(master, i), params.t_final);
            let fields = SolverFields::full(&env, &params, &kernel).unwrap();
            let reference = enumeration::enumerate(&env, &params).unwrap();
            let mut worst =
                (fields.log_z - reference.log_z).abs() / fields.log_z.abs().max(1.0);
            for k in 0..=params.steps() {
                let law = fields.endpoint_law(k);
                let marg = fields.marginal_t(k);
                for x in 0..law.len() {
                    worst = worst.max((law[x] - reference.endpoint_laws[k][x]).abs());
                    worst = worst.max((marg[x] - reference.marginals[k][x]).abs());
                }
            }
            let report = fields.overlaps_and_localization();
            worst = worst.max((report.i_t - reference.i_t).abs());
            worst = worst.max((report.j_t - reference.j_t).abs());
            worst
        })
        .reduce(|| 0.0, f64::max);
    upper(
        "oracle-equivalence",
        "path-sum-enumeration",
        worst,
        tol.exact_oracle,
        true,
        "50 seeds, d=1, K=6, R=2".into(),
        t0,
    )
}

/// Criterion 2: per-realization sandwich inequalities in d = 1 and 2.
fn c02_sandwich(tol: &ToleranceSection, consistency: &Mutex<f64>) -> CheckOutcome {
    let t0 = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    for (d, t_final, dt) in [(1usize, 3.0, 0.02), (2usize, 1.5, 0.02)] {
        let params = SolverParams {
            d,
            kappa: 1.0,
            beta: 1.0,
            t_final,
            dt,
            radius: SolverParams::auto_radius(1.0, 1.0, t_final),
            kernel_tol: 1e-8,
            kernel_order_cap: 64,
        };
        let stats = solve_batch(&params, master_for(2) ^ d as u64, 100, true, consistency);
        for s in &stats {
            worst = worst.max(s.sandwich);
        }
    }
    upper(
        "sandwich",
        "favourite-point-bracket",
        worst,
        tol.exact_sandwich,
        true,
        "b ≤ 1-I ≤ 2b and path version, 100 seeds in d=1 and d=2".into(),
        t0,
    )
}

/// Criterion 3: pathwise diffusive rescaling of the Hamiltonian.
fn c03_pathwise_scaling(tol: &ToleranceSection) -> CheckOutcome {
    let t0 = Instant::now();
    let master = master_for(3);
    let worst = (0..500u64)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(1, env_seed(master, i), 2.0);
            let mut rng = worker_rng(master, i);
            let path = sample_free(1, 1.0, 2.0, &mut rng);
            let h = hamiltonian(&env, &path).unwrap();
            let mut worst = 0.0f64;
            for &a in &[0.25, 4.0] {
                let view = env.rescaled(a);
                let h_view = hamiltonian(&view, &path.time_scaled(a)).unwrap();
                worst = worst.max((h - h_view / a.sqrt()).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    upper(
        "pathwise-scaling",
        "hamiltonian-rescaling",
        worst,
        tol.exact_scaling,
        true,
        "1000 (path, a) pairs, a in {1/4, 4}".into(),
        t0,
    )
}

/// The shared 500-seed batch at the canonical setting (d=1, κ=1, β=1, T=5,
/// Δt=0.01) used by the Itô, IBP, annealed and concentration checks.
fn canonical_batch(consistency: &Mutex<f64>) -> (SolverParams, Vec<SolveStats>) {
    let params = SolverParams {
        d: 1,
        kappa: 1.0,
        beta: 1.0,
        t_final: 5.0,
        dt: 0.01,
        radius: SolverParams::auto_radius(1.0, 1.0, 5.0),
        kernel_tol: 1e-8,
        kernel_order_cap: 64,
    };
    let stats = solve_batch(&params, master_for(5), 500, true, consistency);
    (params, stats)
}

/// Criterion 5: the Itô identity in expectation, with a Δt-halving fit.
fn c05_ito(
    tol: &ToleranceSection,
    params: &SolverParams,
    canonical: &[SolveStats],
    consistency: &Mutex<f64>,
) -> (CheckOutcome, CheckOutcome, f64) {
    let t0 = Instant::now();
    let beta = params.beta;
    let t_final = params.t_final;
    let residual = |s: &SolveStats| s.log_z - 0.5 * beta * beta * t_final * (1.0 - s.i_t);

    let fine: Vec<f64> = canonical.iter().take(200).map(residual).collect();
    let (mean_fine, se_fine) = stats::mean_se(&fine);

    let mut coarse_params = params.clone();
    coarse_params.dt = 0.02;
    let coarse_stats = solve_batch(&coarse_params, master_for(5), 200, false, consistency);
    let coarse: Vec<f64> = coarse_stats.iter().map(residual).collect();
    let (mean_coarse, _) = stats::mean_se(&coarse);

    // First-order discretization model: mean residual ≈ C Δt T.
    let c_hat = (mean_coarse - mean_fine).abs() / (0.01 * t_final);
    let bound = tol.se_sigmas * se_fine + c_hat * 0.01 * t_final;
    let identity = upper(
        "ito-identity",
        "logz-martingale-decomposition",
        mean_fine.abs(),
        bound,
        false,
        format!("200 seeds, C-hat {c_hat:.3}, SE {se_fine:.4}"),
        t0,
    );

    let mean_i = canonical.iter().take(200).map(|s| s.i_t).sum::<f64>() / 200.0;
    let target = 0.5 * beta * beta * t_final * (1.0 - mean_i);
    let rel = mean_fine.abs() / target;
    let relative = upper(
        "ito-relative",
        "logz-martingale-decomposition",
        rel,
        tol.ito_rel,
        false,
        format!("target {target:.4}"),
        t0,
    );
    (identity, relative, c_hat)
}

/// Criterion 6: β-derivative of the mean free energy equals βT(1 - E J).
fn c06_ibp(
    tol: &ToleranceSection,
    params: &SolverParams,
    canonical: &[SolveStats],
    consistency: &Mutex<f64>,
) -> CheckOutcome {
    let t0 = Instant::now();
    let h = 0.05;
    let mut up_params = params.clone();
    up_params.beta = params.beta + h;
    let mut dn_params = params.clone();
    dn_params.beta = params.beta - h;
    // Common environments: same master seed on all three β levels.
    let up = solve_batch(&up_params, master_for(5), 200, false, consistency);
    let dn = solve_batch(&dn_params, master_for(5), 200, false, consistency);
    let diffs: Vec<f64> = up
        .iter()
        .zip(&dn)
        .map(|(u, d)| (u.log_z - d.log_z) / (2.0 * h))
        .collect();
    let (deriv, deriv_se) = stats::mean_se(&diffs);
    let js: Vec<f64> = canonical.iter().take(200).map(|s| s.j_t).collect();
    let (mean_j, _) = stats::mean_se(&js);
    let target = params.beta * params.t_final * (1.0 - mean_j);
    let rel = (deriv - target).abs() / target.abs();
    upper(
        "ibp-identity",
        "beta-derivative-overlap",
        rel,
        tol.ibp_rel,
        false,
        format!("derivative {deriv:.4} ± {deriv_se:.4} vs βT(1-EJ) {target:.4}"),
        t0,
    )
}

/// Criterion 7: annealed upper bounds for the free energy and Γ.
fn c07_annealed(
    tol: &ToleranceSection,
    params: &SolverParams,
    canonical: &[SolveStats],
    consistency: &Mutex<f64>,
) -> CheckOutcome {
    let t0 = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();

    // mean(log Z)/T at β ∈ {0.5, 1}.
    let logz: Vec<f64> = canonical.iter().map(|s| s.log_z / params.t_final).collect();
    let (mean, se) = stats::mean_se(&logz);
    worst = worst.max(mean + tol.se_sigmas * se - 0.5 * params.beta * params.beta);
    detail.push_str(&format!("Ψ̂(β=1) {mean:.4} ± {se:.4}"));

    let mut half = params.clone();
    half.beta = 0.5;
    let stats_half = solve_batch(&half, master_for(7), 100, false, consistency);
    let logz: Vec<f64> = stats_half.iter().map(|s| s.log_z / params.t_final).collect();
    let (mean, se) = stats::mean_se(&logz);
    worst = worst.max(mean + tol.se_sigmas * se - 0.5 * 0.25);
    detail.push_str(&format!(", Ψ̂(β=0.5) {mean:.4} ± {se:.4}"));

    // Γ̂ at the same β grid, r = 1, T = 4.
    for &beta in &[0.5f64, 1.0] {
        let master = master_for(7) ^ beta.to_bits();
        let gs: Vec<f64> = (0..30u64)
            .into_par_iter()
            .map(|i| {
                let env = BrownianField::new(1, env_seed(master, i), 4.0);
                let mut stream = worker_rng(master ^ 0x47_41, i);
                gamma_quenched(&env, beta, 4, 4.0, 400, &mut stream).unwrap().0
            })
            .collect();
        let (g_mean, g_se) = stats::mean_se(&gs);
        worst = worst.max(g_mean + tol.se_sigmas * g_se - 0.5 * beta * beta);
        detail.push_str(&format!(", Γ̂(β={beta}) {g_mean:.4} ± {g_se:.4}"));
    }
    upper("annealed-bounds", "jensen-upper-bound", worst, 0.0, false, detail, t0)
}

/// Criterion 8: Gaussian concentration of log Z around its mean.
fn c08_concentration(tol: &ToleranceSection, params: &SolverParams, canonical: &[SolveStats]) -> CheckOutcome {
    let t0 = Instant::now();
    let n = canonical.len() as f64;
    let logz: Vec<f64> = canonical.iter().map(|s| s.log_z).collect();
    let (center, _) = stats::mean_se(&logz);
    let scale = 2.0 * params.beta * params.beta * params.t_final;
    let mut worst = f64::NEG_INFINITY;
    for u in [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0] {
        let bound = 2.0 * (-u * u / scale).exp();
        if bound >= 1.0 {
            continue;
        }
        let frac =
            logz.iter().filter(|&&z| (z - center).abs() >= u).count() as f64 / n;
        let slack = tol.se_sigmas * (bound * (1.0 - bound) / n).sqrt();
        worst = worst.max(frac - bound - slack);
    }
    upper(
        "concentration",
        "gaussian-tail-bound",
        worst,
        0.0,
        false,
        format!("{} seeds, u grid 1..6", canonical.len()),
        t0,
    )
}

/// Criterion 9: exact jump laws for the free and conditioned samplers.
fn c09_jump_laws() -> CheckOutcome {
    let t0 = Instant::now();
    let master = master_for(9);
    // Free sampler against Poisson(κT).
    let (kappa, horizon) = (1.0, 3.0);
    let counts = Mutex::new(vec![0u64; 32]);
    (0..100u64).into_par_iter().for_each(|w| {
        let mut rng = worker_rng(master, w);
        let mut local = vec![0u64; 32];
        for _ in 0..1000 {
            let n = sample_free(1, kappa, horizon, &mut rng).jump_count().min(31);
            local[n] += 1;
        }
        let mut shared = counts.lock().unwrap();
        for (s, l) in shared.iter_mut().zip(&local) {
            *s += l;
        }
    });
    let counts = counts.into_inner().unwrap();
    let (_, _, p_chi) = stats::chi_square_poisson_gof(&counts, kappa * horizon);

    // Conditioned sampler against the rejection oracle (first jump time).
    let n_cond = 2usize;
    let t_cond = 2.0;
    let mut rng = worker_rng(master ^ 0x4b53, 0);
    let mut rejected = Vec::with_capacity(4000);
    while rejected.len() < 4000 {
        let p = sample_free(1, 1.0, t_cond, &mut rng);
        if p.jump_count() == n_cond {
            rejected.push(p.jump_times[0]);
        }
    }
    let direct: Vec<f64> = (0..4000)
        .map(|_| sample_conditioned(1, n_cond, t_cond, &mut rng).jump_times[0])
        .collect();
    let (_, p_ks) = stats::ks_two_sample(&rejected, &direct);

    lower(
        "jump-laws",
        "poisson-count-and-uniform-times",
        p_chi.min(p_ks),
        0.001,
        false,
        format!("chi2 p {p_chi:.4}, KS p {p_ks:.4}"),
        t0,
    )
}

/// Criterion 10: DP equals exhaustive search; argmax re-evaluates exactly.
fn c10_dp(tol: &ToleranceSection) -> CheckOutcome {
    let t0 = Instant::now();
    let master = master_for(10);
    let horizon = 1.0;
    let k_steps = 4usize;
    let delta = horizon / k_steps as f64;
    let worst = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(1, env_seed(master, i), horizon);
            let mut worst = 0.0f64;
            for n in [1usize, 2] {
                let sol = dp_ground_state(&env, horizon, n, k_steps, 4).unwrap();
                // Exhaustive search over jump placements and directions.
                let slots: Vec<usize> = (1..k_steps).collect();
                let mut best = f64::NEG_INFINITY;
                let mut place = |combo: &[usize]| {
                    for dirs in 0..(1usize << combo.len()) {
                        let mut site = SiteKey::origin(1);
                        let mut h = 0.0;
                        let mut prev = 0.0;
                        for (j, &slot) in combo.iter().enumerate() {
                            let t = slot as f64 * delta;
                            h += env.increment(&site, prev, t).unwrap();
                            site = site.step((dirs >> j) & 1);
                            prev = t;
                        }
                        h += env.increment(&site, prev, horizon).unwrap();
                        best = best.max(h);
                    }
                };
                if n == 1 {
                    for &a in &slots {
                        place(&[a]);
                    }
                } else {
                    for (ai, &a) in slots.iter().enumerate() {
                        for &b in &slots[ai + 1..] {
                            place(&[a, b]);
                        }
                    }
                }
                worst = worst.max((sol.value - best).abs());
                let h = hamiltonian(&env, &sol.path).unwrap();
                worst = worst.max((h - sol.value).abs());
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    upper(
        "dp-ground-state",
        "last-passage-optimality",
        worst,
        tol.exact_oracle,
        true,
        "100 seeds, K=4, n ≤ 2, argmax re-evaluation included".into(),
        t0,
    )
}

/// Criterion 11: scaling of the conditioned free energy on rescaled views.
fn c11_gamma_scaling(tol: &ToleranceSection) -> CheckOutcome {
    let t0 = Instant::now();
    let master = master_for(11);
    let (beta, r, horizon, m) = (1.0f64, 1.0f64, 4.0f64, 600usize);
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();
    for &a in &[0.25f64, 4.0] {
        let n = (a * r * horizon).floor() as usize;
        let diffs: Vec<f64> = (0..40u64)
            .into_par_iter()
            .map(|i| {
                let env =
                    BrownianField::new(1, env_seed(master ^ a.to_bits(), i), horizon);
                let mut stream = worker_rng(master ^ 0x11, i);
                let lhs = gamma_quenched(&env, beta, n, horizon, m, &mut stream)
                    .unwrap()
                    .0;
                let view = env.rescaled(a);
                let mut stream = worker_rng(master ^ 0x22, i);
                let rhs = a * gamma_quenched(&view, beta / a.sqrt(), n, a * horizon, m, &mut stream)
                    .unwrap()
                    .0;
                lhs - rhs
            })
            .collect();
        let (mean, se) = stats::mean_se(&diffs);
        worst = worst.max(mean.abs() - tol.se_sigmas * se);
        detail.push_str(&format!("a={a}: diff {mean:.4} ± {se:.4}; "));
    }
    upper("gamma-scaling", "conditioned-free-energy-scaling", worst, 0.0, false, detail, t0)
}

/// Criterion 12: overlaps increase along the disorder-strength ladder.
fn c12_localization_trend(tol: &ToleranceSection, consistency: &Mutex<f64>) -> CheckOutcome {
    let t0 = Instant::now();
    let betas = [1.0f64, 2.0, 4.0, 8.0];
    let mut means: Vec<(f64, f64, f64, f64)> = Vec::new(); // (I, seI, J, seJ)
    for (bi, &beta) in betas.iter().enumerate() {
        let params = SolverParams {
            d: 1,
            kappa: 1.0,
            beta,
            t_final: 10.0,
            dt: 0.01,
            radius: SolverParams::auto_radius(1.0, beta, 10.0),
            kernel_tol: 1e-8,
            kernel_order_cap: 64,
        };
        let stats_b = solve_batch(&params, master_for(12) ^ bi as u64, 100, true, consistency);
        let is: Vec<f64> = stats_b.iter().map(|s| s.i_t).collect();
        let js: Vec<f64> = stats_b.iter().map(|s| s.j_t).collect();
        let (mi, si) = stats::mean_se(&is);
        let (mj, sj) = stats::mean_se(&js);
        means.push((mi, si, mj, sj));
    }
    let mut min_margin = f64::INFINITY;
    let mut detail = String::new();
    for w in means.windows(2) {
        let (i0, si0, j0, sj0) = w[0];
        let (i1, si1, j1, sj1) = w[1];
        let gap_i = i1 - i0 - tol.se_sigmas * (si0 * si0 + si1 * si1).sqrt();
        let gap_j = j1 - j0 - tol.se_sigmas * (sj0 * sj0 + sj1 * sj1).sqrt();
        min_margin = min_margin.min(gap_i).min(gap_j);
    }
    for (bi, (mi, _, mj, _)) in means.iter().enumerate() {
        detail.push_str(&format!("β²/κ={}: I {mi:.3} J {mj:.3}; ", betas[bi] * betas[bi]));
    }
    lower(
        "localization-trend",
        "overlap-monotone-in-disorder",
        min_margin,
        0.0,
        false,
        detail,
        t0,
    )
}

/// Criterion 13: lattice solver versus path-sampler estimates on shared
/// environments.
fn c13_cross_method(
    tol: &ToleranceSection,
    c_hat: f64,
    consistency: &Mutex<f64>,
) -> (CheckOutcome, CheckOutcome) {
    let t0 = Instant::now();
    let params = SolverParams {
        d: 1,
        kappa: 1.0,
        beta: 1.0,
        t_final: 3.0,
        dt: 0.005,
        radius: SolverParams::auto_radius(1.0, 1.0, 3.0),
        kernel_tol: 1e-8,
        kernel_order_cap: 64,
    };
    let kernel = params.build_kernel().unwrap();
    let master = master_for(13);
    let pairs: Vec<(f64, f64)> = (0..30u64)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(1, env_seed(master, i), params.t_final);
            let fields = SolverFields::full(&env, &params, &kernel).unwrap();
            {
                let mut worst = consistency.lock().unwrap();
                *worst = worst.max(fields.consistency_residual());
            }
            let report = fields.overlaps_and_localization();
            let mut rng = worker_rng(master ^ 0x5a, i);
            let z = estimate_z(&env, params.kappa, params.beta, params.t_final, 20_000, &mut rng)
                .unwrap();
            let mut rng = worker_rng(master ^ 0x5b, i);
            let ens = importance_ensemble(
                &env,
                params.kappa,
                params.beta,
                params.t_final,
                1_500,
                &mut rng,
            )
            .unwrap();
            (z.log_z - fields.log_z, ens.replica_overlap() - report.j_t)
        })
        .collect();

    let dz: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (mean_dz, se_dz) = stats::mean_se(&dz);
    let allow_z = (tol.se_sigmas * se_dz).max(c_hat.max(0.5) * params.dt * params.t_final);
    let z_check = upper(
        "cross-method-logz",
        "sampler-vs-lattice",
        mean_dz.abs(),
        allow_z,
        false,
        format!("30 seeds, SE {se_dz:.4}"),
        t0,
    );

    let dj: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (mean_dj, se_dj) = stats::mean_se(&dj);
    let allow_j = (tol.se_sigmas * se_dj).max(2.0 * params.kappa * params.dt);
    let j_check = upper(
        "cross-method-overlap",
        "sampler-vs-lattice",
        mean_dj.abs(),
        allow_j,
        false,
        format!("30 seeds, SE {se_dj:.4}"),
        t0,
    );
    (z_check, j_check)
}

/// Run the full suite in criterion order.
pub fn run_all(tol: &ToleranceSection) -> CheckReport {
    let consistency = Mutex::new(0.0f64);
    let mut checks = Vec::new();

    checks.push(c01_oracle_equivalence(tol));
    checks.push(c02_sandwich(tol, &consistency));
    checks.push(c03_pathwise_scaling(tol));

    let (params, canonical) = canonical_batch(&consistency);
    let (ito, ito_rel, c_hat) = c05_ito(tol, &params, &canonical, &consistency);
    checks.push(ito);
    checks.push(ito_rel);
    checks.push(c06_ibp(tol, &params, &canonical, &consistency));
    checks.push(c07_annealed(tol, &params, &canonical, &consistency));
    checks.push(c08_concentration(tol, &params, &canonical));
    checks.push(c09_jump_laws());
    checks.push(c10_dp(tol));
    checks.push(c11_gamma_scaling(tol));
    checks.push(c12_localization_trend(tol, &consistency));
    let (z_check, j_check) = c13_cross_method(tol, c_hat, &consistency);
    checks.push(z_check);
    checks.push(j_check);

    // Criterion 4 aggregates every full solve above.
    let worst = *consistency.lock().unwrap();
    checks.insert(
        3,
        upper(
            "consistency",
            "forward-backward-conservation",
            worst,
            tol.consistency,
            true,
            "max over every full solve in the suite".into(),
            Instant::now(),
        ),
    );
    CheckReport::new(checks)
}
