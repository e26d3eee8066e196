//! Ground states and jump-density rate functions.
//!
//! A last-passage dynamic program maximizes the Hamiltonian over grid-jump
//! paths with a fixed jump budget, giving the quenched ground state `A_{T,n}`
//! and (via `A_n / n`) the growth constant. Conditioned Monte Carlo
//! estimates the jump-density free energy `Γ(β, r)`, whose Legendre-type
//! combination with the Poisson rate `I_κ` yields the quenched free energy
//! `Ψ` and the jump-count rate function `I_{κ,β}` through a variational
//! formula over the jump density.

use rayon::prelude::*;

use crate::env::{BrownianField, Environment};
use crate::error::{Error, Result};
use crate::lattice::{LatticeBox, SiteKey};
use crate::paths::{hamiltonian, sample_conditioned, JumpPath};
use crate::rng;
use crate::stats::{self, effective_sample_size, logsumexp, mean_se};

/// Cramér rate of the Poisson(κ) law: `r ln(r/κ) - r + κ`, with `0 ln 0 = 0`.
pub fn poisson_rate(r: f64, kappa: f64) -> Result<f64> {
    if !(r >= 0.0) || !(kappa > 0.0) {
        return Err(Error::InvalidParams(format!(
            "poisson_rate needs r >= 0 and kappa > 0, got r={r}, kappa={kappa}"
        )));
    }
    if r == 0.0 {
        return Ok(kappa);
    }
    Ok(r * (r / kappa).ln() - r + kappa)
}

/// Result of one ground-state dynamic program.
#[derive(Clone, Debug)]
pub struct DpSolution {
    /// Maximum accumulated Hamiltonian over grid-jump paths with exactly the
    /// requested number of jumps.
    pub value: f64,
    /// A path achieving the maximum (jumps on grid times).
    pub path: JumpPath,
}

/// Maximize `H_T` over paths with exactly `n` jumps placed on the grid
/// `{δ, 2δ, ..., (K-1)δ}`, `δ = T / k_steps`, one jump per slot. A jump at
/// `kδ` moves first and then accumulates the slab increment at the new
/// site, so the value is a feasible-path Hamiltonian and the reconstructed
/// path re-evaluates to it exactly.
pub fn dp_ground_state(
    env: &impl Environment,
    horizon: f64,
    n: usize,
    k_steps: usize,
    radius: i32,
) -> Result<DpSolution> {
    if !(horizon > 0.0) || k_steps == 0 {
        return Err(Error::InvalidParams("need horizon > 0 and k_steps >= 1".into()));
    }
    if n + 1 > k_steps {
        return Err(Error::InfeasibleJumpBudget { n, slots: k_steps.saturating_sub(1) });
    }
    if radius < n as i32 {
        return Err(Error::InvalidParams(format!(
            "radius {radius} cannot contain paths with {n} jumps"
        )));
    }
    let d = env.dimension();
    let bounds = LatticeBox::new(d, radius);
    let b = bounds.len();
    let two_d = 2 * d;
    let delta = horizon / k_steps as f64;

    // Slab increments ΔW_x(k) for every box site.
    let sites: Vec<SiteKey> = (0..b).map(|x| bounds.site(x)).collect();
    let mut w_prev = vec![0.0f64; b];
    let mut slab = vec![vec![0.0f64; b]; k_steps];
    for (k, row) in slab.iter_mut().enumerate() {
        let t_next = (k + 1) as f64 * delta;
        for x in 0..b {
            let w_next = env.value_at(&sites[x], t_next)?;
            row[x] = w_next - w_prev[x];
            w_prev[x] = w_next;
        }
    }

    // value[x][j]: best Hamiltonian after the current step with j jumps used.
    // parent[k][x][j]: 0 = stayed, 1 + dir = arrived via `dir` at time kδ.
    let neg = f64::NEG_INFINITY;
    let mut value = vec![vec![neg; n + 1]; b];
    value[bounds.center()][0] = 0.0;
    let mut next = vec![vec![neg; n + 1]; b];
    let mut parent = vec![vec![vec![0u8; n + 1]; b]; k_steps];

    for k in 0..k_steps {
        for col in next.iter_mut() {
            col.iter_mut().for_each(|v| *v = neg);
        }
        for x in 0..b {
            for j in 0..=n {
                let mut best = value[x][j];
                let mut code = 0u8;
                if k >= 1 && j >= 1 {
                    for dir in 0..two_d {
                        // Arriving at x via `dir` means the previous site is
                        // one step back along `dir`.
                        if let Some(y) = bounds.neighbor(x, dir ^ 1) {
                            let cand = value[y][j - 1];
                            if cand > best {
                                best = cand;
                                code = 1 + dir as u8;
                            }
                        }
                    }
                }
                if best > neg {
                    next[x][j] = best + slab[k][x];
                    parent[k][x][j] = code;
                }
            }
        }
        std::mem::swap(&mut value, &mut next);
    }

    let mut best = neg;
    let mut best_x = bounds.center();
    for x in 0..b {
        if value[x][n] > best {
            best = value[x][n];
            best_x = x;
        }
    }
    assert!(best > neg, "no feasible path found");

    // Walk the parent pointers back from (k_steps, best_x, n).
    let mut jumps_rev: Vec<(usize, usize)> = Vec::with_capacity(n); // (step, arrival dir)
    let mut x = best_x;
    let mut j = n;
    for k in (0..k_steps).rev() {
        let code = parent[k][x][j];
        if code > 0 {
            let dir = (code - 1) as usize;
            jumps_rev.push((k, dir));
            x = bounds.neighbor(x, dir ^ 1).expect("parent pointer leads outside the box");
            j -= 1;
        }
    }
    assert_eq!(j, 0, "parent walk must consume the jump budget");
    assert_eq!(x, bounds.center(), "parent walk must return to the origin");

    let mut jump_times = Vec::with_capacity(n);
    let mut path_sites = vec![SiteKey::origin(d)];
    for &(k, dir) in jumps_rev.iter().rev() {
        jump_times.push(k as f64 * delta);
        let next_site = path_sites.last().unwrap().step(dir);
        path_sites.push(next_site);
    }
    let path = JumpPath { start: SiteKey::origin(d), jump_times, sites: path_sites, horizon };
    path.validate()?;
    Ok(DpSolution { value: best, path })
}

/// One row of the growth-constant study.
#[derive(Clone, Debug)]
pub struct AlphaRow {
    pub n: usize,
    /// mean and SE of A_n / n across seeds at the base grid.
    pub mean: f64,
    pub se: f64,
    /// Same at a twice-refined grid.
    pub mean_fine: f64,
    pub se_fine: f64,
}

/// Growth-constant estimate with grid-refinement and scaling diagnostics.
#[derive(Clone, Debug)]
pub struct AlphaReport {
    pub rows: Vec<AlphaRow>,
    /// A_n / n at the largest n (finer grid).
    pub alpha_hat: f64,
    pub alpha_se: f64,
    /// Successive differences of the row means (stabilization diagnostic).
    pub step_deltas: Vec<f64>,
    /// Two-sample KS of A_{T,[rT]} against r^{-1/2} A_{rT,[rT]} on rescaled
    /// environments (equal in law under diffusive scaling).
    pub scaling_ks_d: f64,
    pub scaling_ks_p: f64,
}

/// Estimate `α = lim A_n / n` over a ladder of jump counts.
pub fn alpha_estimate(
    master_seed: u64,
    seeds: usize,
    n_list: &[usize],
    k_per_unit: usize,
    d: usize,
) -> Result<AlphaReport> {
    assert!(!n_list.is_empty() && k_per_unit >= 2);
    assert!(n_list.windows(2).all(|w| w[0] < w[1]), "n_list must increase");
    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let horizon = n as f64;
        let samples: Vec<(f64, f64)> = (0..seeds)
            .into_par_iter()
            .map(|i| {
                let env =
                    BrownianField::new(d, rng::env_seed(master_seed, i as u64), horizon);
                let coarse = dp_ground_state(&env, horizon, n, n * k_per_unit, n as i32)
                    .expect("feasible by construction");
                let fine = dp_ground_state(&env, horizon, n, 2 * n * k_per_unit, n as i32)
                    .expect("feasible by construction");
                (coarse.value / n as f64, fine.value / n as f64)
            })
            .collect();
        let (mean, se) = mean_se(&samples.iter().map(|s| s.0).collect::<Vec<_>>());
        let (mean_fine, se_fine) = mean_se(&samples.iter().map(|s| s.1).collect::<Vec<_>>());
        rows.push(AlphaRow { n, mean, se, mean_fine, se_fine });
    }
    let step_deltas = rows.windows(2).map(|w| w[1].mean_fine - w[0].mean_fine).collect();

    // Distributional scaling check at small horizon: A on (T, [rT]) versus
    // the rescaled-view computation at (rT, [rT]) divided by sqrt(r).
    let (t_small, r) = (2.0f64, 2.0f64);
    let n_small = (r * t_small).floor() as usize;
    let ks_seeds = 400.max(seeds);
    let arm_a: Vec<f64> = (0..ks_seeds)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(
                d,
                rng::env_seed(master_seed ^ 0xA11CE, i as u64),
                t_small,
            );
            dp_ground_state(&env, t_small, n_small, (t_small as usize) * k_per_unit * 4, n_small as i32)
                .unwrap()
                .value
        })
        .collect();
    let arm_b: Vec<f64> = (0..ks_seeds)
        .into_par_iter()
        .map(|i| {
            let base = BrownianField::new(
                d,
                rng::env_seed(master_seed ^ 0xB0B0, i as u64),
                t_small,
            );
            let view = base.rescaled(r);
            let value = dp_ground_state(
                &view,
                r * t_small,
                n_small,
                (t_small as usize) * k_per_unit * 4,
                n_small as i32,
            )
            .unwrap()
            .value;
            value / r.sqrt()
        })
        .collect();
    let (scaling_ks_d, scaling_ks_p) = stats::ks_two_sample(&arm_a, &arm_b);

    let last = rows.last().unwrap();
    Ok(AlphaReport {
        alpha_hat: last.mean_fine,
        alpha_se: last.se_fine,
        rows,
        step_deltas,
        scaling_ks_d,
        scaling_ks_p,
    })
}

/// Conditioned free-energy estimate at one (β, jump density) point.
#[derive(Clone, Debug)]
pub struct GammaEstimate {
    pub beta: f64,
    pub r: f64,
    pub n_jumps: usize,
    pub gamma_hat: f64,
    /// Across-seed standard error.
    pub se: f64,
    /// Jackknife estimate of the log-of-mean bias (reported, not applied).
    pub jackknife_bias: f64,
    pub mean_ess: f64,
}

/// Quenched `(1/T) ln mean_M e^{β H}` over paths conditioned to `n` jumps.
pub fn gamma_quenched(
    env: &impl Environment,
    beta: f64,
    n: usize,
    horizon: f64,
    m: usize,
    rng_stream: &mut impl rand::Rng,
) -> Result<(f64, f64, f64)> {
    assert!(m >= 2);
    let d = env.dimension();
    let mut log_w = Vec::with_capacity(m);
    for _ in 0..m {
        let path = sample_conditioned(d, n, horizon, rng_stream);
        log_w.push(beta * hamiltonian(env, &path)?);
    }
    let lse = logsumexp(&log_w);
    let g = (lse - (m as f64).ln()) / horizon;

    // Leave-one-out jackknife on the log-of-mean.
    let peak = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum_exp: f64 = log_w.iter().map(|lw| (lw - peak).exp()).sum();
    let mut loo_sum = 0.0;
    for &lw in &log_w {
        let reduced = (sum_exp - (lw - peak).exp()).max(f64::MIN_POSITIVE);
        loo_sum += (peak + reduced.ln() - ((m - 1) as f64).ln()) / horizon;
    }
    let bias = (m as f64 - 1.0) * (loo_sum / m as f64 - g);
    Ok((g, bias, effective_sample_size(&log_w)))
}

/// Average `gamma_quenched` across environments.
pub fn gamma_estimate(
    master_seed: u64,
    seeds: usize,
    beta: f64,
    r: f64,
    horizon: f64,
    m: usize,
    d: usize,
) -> Result<GammaEstimate> {
    assert!(seeds >= 2 && r >= 0.0);
    let n = (r * horizon).floor() as usize;
    let per_seed: Vec<(f64, f64, f64)> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(d, rng::env_seed(master_seed, i as u64), horizon);
            let mut stream = rng::worker_rng(master_seed ^ 0x47414d4d, i as u64);
            gamma_quenched(&env, beta, n, horizon, m, &mut stream)
                .expect("environment covers the horizon")
        })
        .collect();
    let gs: Vec<f64> = per_seed.iter().map(|p| p.0).collect();
    let (gamma_hat, se) = mean_se(&gs);
    let jackknife_bias = per_seed.iter().map(|p| p.1).sum::<f64>() / seeds as f64;
    let mean_ess = per_seed.iter().map(|p| p.2).sum::<f64>() / seeds as f64;
    Ok(GammaEstimate { beta, r, n_jumps: n, gamma_hat, se, jackknife_bias, mean_ess })
}

/// Output of the variational step.
#[derive(Clone, Debug)]
pub struct Variational {
    pub psi_hat: f64,
    pub psi_se: f64,
    /// All grid densities within one combined SE of the maximum.
    pub rmax_lo: f64,
    pub rmax_hi: f64,
    /// Concave-envelope refinement of the maximizer location.
    pub r_refined: f64,
}

/// `Ψ̂ = max_r (Γ̂(r) - I_κ(r))` over the grid, refined between neighbours of
/// the arg-max with a golden-section search on the fitted concave parabola.
pub fn free_energy_variational(gamma: &[(f64, f64, f64)], kappa: f64) -> Result<Variational> {
    if gamma.len() < 3 {
        return Err(Error::InvalidParams("need at least three r-grid points".into()));
    }
    let mut psi: Vec<(f64, f64, f64)> = Vec::with_capacity(gamma.len());
    for &(r, g, se) in gamma {
        psi.push((r, g - poisson_rate(r, kappa)?, se));
    }
    let (mut best, mut best_i) = (f64::NEG_INFINITY, 0);
    for (i, &(_, v, _)) in psi.iter().enumerate() {
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if best_i + 1 == psi.len() {
        return Err(Error::GridTooShort { r_hi: psi.last().unwrap().0 });
    }

    // Refine with the concave parabola through the arg-max and neighbours.
    let r_refined;
    let psi_refined;
    if best_i == 0 {
        r_refined = psi[0].0;
        psi_refined = best;
    } else {
        let (x0, y0, _) = psi[best_i - 1];
        let (x1, y1, _) = psi[best_i];
        let (x2, y2, _) = psi[best_i + 1];
        let fit = move |x: f64| {
            // Lagrange form of the interpolating parabola.
            y0 * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2))
                + y1 * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2))
                + y2 * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1))
        };
        let (x_star, f_star) = stats::golden_section_max(fit, x0, x2, 80);
        r_refined = x_star;
        psi_refined = f_star.max(best);
    }

    let se_max = psi[best_i].2;
    let mut rmax_lo = psi[best_i].0;
    let mut rmax_hi = psi[best_i].0;
    for &(r, v, se) in &psi {
        let combined = (se * se + se_max * se_max).sqrt();
        if v >= best - combined {
            rmax_lo = rmax_lo.min(r);
            rmax_hi = rmax_hi.max(r);
        }
    }
    Ok(Variational { psi_hat: psi_refined, psi_se: se_max, rmax_lo, rmax_hi, r_refined })
}

/// One grid point of the rate-function comparison.
#[derive(Clone, Debug)]
pub struct LdpRow {
    pub r: f64,
    pub n: usize,
    /// `-(1/T) ln μ̂(N = n)` averaged over environments.
    pub empirical_rate: f64,
    pub empirical_se: f64,
    /// `-Γ̂(r) + I_κ(r) + Ψ̂`.
    pub predicted_rate: f64,
    pub predicted_se: f64,
    /// Set when the conditional mass underflowed on some environment.
    pub censored: bool,
}

/// Compare the empirical jump-count rate against the variational prediction.
///
/// Per environment, `μ(N = n) ∝ P_κ(N = n) · mean e^{β H | N = n}` with the
/// normalizer summed over a Poisson-tail-complete window of jump counts.
pub fn ldp_check(
    master_seed: u64,
    seeds: usize,
    kappa: f64,
    beta: f64,
    horizon: f64,
    r_grid: &[f64],
    m: usize,
    d: usize,
) -> Result<Vec<LdpRow>> {
    assert!(seeds >= 2 && m >= 2 && !r_grid.is_empty());
    let n_grid: Vec<usize> = r_grid.iter().map(|r| (r * horizon).floor() as usize).collect();
    // Window wide enough that the neglected normalizer mass is negligible.
    let n_hi = n_grid
        .iter()
        .cloned()
        .max()
        .unwrap()
        .max((kappa * horizon * 3.0).ceil() as usize)
        + 8;

    struct PerSeed {
        ln_mu: Vec<f64>,
        gamma: Vec<f64>,
        psi: f64,
    }
    let runs: Vec<PerSeed> = (0..seeds)
        .into_par_iter()
        .map(|i| {
            let env = BrownianField::new(d, rng::env_seed(master_seed, i as u64), horizon);
            let mut stream = rng::worker_rng(master_seed ^ 0x4c4450, i as u64);
            // ln E[e^{βH}; N = n] = ln P(N=n) + ln mean e^{βH|N=n}, per n.
            let mut ln_terms = Vec::with_capacity(n_hi + 1);
            for n in 0..=n_hi {
                let (g, _, _) = gamma_quenched(&env, beta, n, horizon, m, &mut stream)
                    .expect("environment covers the horizon");
                ln_terms.push(stats::ln_poisson_pmf(kappa * horizon, n) + g * horizon);
            }
            let ln_z = logsumexp(&ln_terms);
            let ln_mu: Vec<f64> =
                n_grid.iter().map(|&n| ln_terms[n] - ln_z).collect();
            let gamma: Vec<f64> =
                n_grid.iter().map(|&n| (ln_terms[n] - stats::ln_poisson_pmf(kappa * horizon, n)) / horizon).collect();
            PerSeed { ln_mu, gamma, psi: ln_z / horizon }
        })
        .collect();

    let mut rows = Vec::with_capacity(r_grid.len());
    for (idx, (&r, &n)) in r_grid.iter().zip(&n_grid).enumerate() {
        let emp: Vec<f64> = runs.iter().map(|run| -run.ln_mu[idx] / horizon).collect();
        let censored = emp.iter().any(|v| !v.is_finite());
        let clean: Vec<f64> = emp.iter().cloned().filter(|v| v.is_finite()).collect();
        let (empirical_rate, empirical_se) = if clean.len() >= 2 {
            mean_se(&clean)
        } else {
            (f64::NAN, f64::NAN)
        };
        let gammas: Vec<f64> = runs.iter().map(|run| run.gamma[idx]).collect();
        let psis: Vec<f64> = runs.iter().map(|run| run.psi).collect();
        let (gamma_mean, gamma_se) = mean_se(&gammas);
        let (psi_mean, psi_se) = mean_se(&psis);
        let predicted_rate = -gamma_mean + poisson_rate(r, kappa)? + psi_mean;
        rows.push(LdpRow {
            r,
            n,
            empirical_rate,
            empirical_se,
            predicted_rate,
            predicted_se: (gamma_se * gamma_se + psi_se * psi_se).sqrt(),
            censored,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::worker_rng;

    #[test]
    fn poisson_rate_closed_forms() {
        assert_eq!(poisson_rate(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(poisson_rate(0.0, 1.0).unwrap(), 1.0);
        let v = poisson_rate(2.0, 1.0).unwrap();
        assert!((v - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        assert!(poisson_rate(-0.1, 1.0).is_err());
        assert!(poisson_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn poisson_rate_is_convex_and_vanishes_at_kappa() {
        let kappa = 1.7;
        assert!(poisson_rate(kappa, kappa).unwrap().abs() < 1e-15);
        let rs: Vec<f64> = (1..40).map(|i| i as f64 * 0.1).collect();
        for w in rs.windows(3) {
            let (a, b, c) = (
                poisson_rate(w[0], kappa).unwrap(),
                poisson_rate(w[1], kappa).unwrap(),
                poisson_rate(w[2], kappa).unwrap(),
            );
            assert!(b <= 0.5 * (a + c) + 1e-12);
            assert!(b >= -1e-15);
        }
    }

    #[test]
    fn dp_zero_budget_is_the_constant_path() {
        let env = BrownianField::new(1, 3, 2.0);
        let sol = dp_ground_state(&env, 2.0, 0, 16, 4).unwrap();
        assert_eq!(sol.path.jump_count(), 0);
        let w = env.value_at(&SiteKey::origin(1), 2.0).unwrap();
        assert!((sol.value - w).abs() < 1e-12);
    }

    #[test]
    fn dp_matches_exhaustive_search_on_tiny_grids() {
        // K = 4 slots, jumps allowed at {δ, 2δ, 3δ}; enumerate every
        // placement and direction assignment directly.
        let horizon = 1.0;
        let k_steps = 4;
        for seed in 0..25u64 {
            for n in [1usize, 2] {
                let env = BrownianField::new(1, seed, horizon);
                let sol = dp_ground_state(&env, horizon, n, k_steps, 4).unwrap();

                let delta = horizon / k_steps as f64;
                let slots: Vec<usize> = (1..k_steps).collect();
                let mut best = f64::NEG_INFINITY;
                let mut combos: Vec<Vec<usize>> = Vec::new();
                match n {
                    1 => {
                        for &a in &slots {
                            combos.push(vec![a]);
                        }
                    }
                    2 => {
                        for (i, &a) in slots.iter().enumerate() {
                            for &b in &slots[i + 1..] {
                                combos.push(vec![a, b]);
                            }
                        }
                    }
                    _ => unreachable!(),
                }
                for combo in combos {
                    for dirs in 0..(2usize.pow(n as u32)) {
                        let mut site = SiteKey::origin(1);
                        let mut h = 0.0;
                        let mut prev_t = 0.0;
                        for (i, &slot) in combo.iter().enumerate() {
                            let t = slot as f64 * delta;
                            h += env.increment(&site, prev_t, t).unwrap();
                            site = site.step((dirs >> i) & 1);
                            prev_t = t;
                        }
                        h += env.increment(&site, prev_t, horizon).unwrap();
                        best = best.max(h);
                    }
                }
                assert!(
                    (sol.value - best).abs() < 1e-12,
                    "seed {seed} n {n}: dp {} vs brute {best}",
                    sol.value
                );
            }
        }
    }

    #[test]
    fn dp_argmax_reevaluates_to_value() {
        for seed in 0..10u64 {
            let env = BrownianField::new(1, seed, 3.0);
            let sol = dp_ground_state(&env, 3.0, 4, 24, 6).unwrap();
            let h = hamiltonian(&env, &sol.path).unwrap();
            assert!(
                (h - sol.value).abs() < 1e-10,
                "seed {seed}: H {h} vs A {}",
                sol.value
            );
        }
    }

    #[test]
    fn dp_dominates_any_feasible_path() {
        let env = BrownianField::new(1, 12, 2.0);
        let sol = dp_ground_state(&env, 2.0, 2, 16, 4).unwrap();
        let delta = 2.0 / 16.0;
        let hand = JumpPath {
            start: SiteKey::origin(1),
            jump_times: vec![3.0 * delta, 7.0 * delta],
            sites: vec![SiteKey(vec![0]), SiteKey(vec![1]), SiteKey(vec![0])],
            horizon: 2.0,
        };
        let h = hamiltonian(&env, &hand).unwrap();
        assert!(sol.value >= h - 1e-12);
    }

    #[test]
    fn dp_budget_monotone_under_at_most_semantics() {
        // Best over budgets {0..n} is nondecreasing in n.
        let env = BrownianField::new(1, 9, 2.0);
        let mut best_so_far = f64::NEG_INFINITY;
        for n in 0..4usize {
            let v = dp_ground_state(&env, 2.0, n, 20, 5).unwrap().value;
            best_so_far = best_so_far.max(v);
            let at_most: f64 = (0..=n)
                .map(|j| dp_ground_state(&env, 2.0, j, 20, 5).unwrap().value)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((at_most - best_so_far).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_rejects_infeasible_budgets() {
        let env = BrownianField::new(1, 1, 1.0);
        let err = dp_ground_state(&env, 1.0, 8, 8, 8).unwrap_err();
        assert!(matches!(err, Error::InfeasibleJumpBudget { .. }));
    }

    #[test]
    fn dp_rescaling_is_pathwise_exact() {
        // A^{W}(T, n) = r^{-1/2} A^{W^{(r)}}(rT, n) with aligned grids.
        for seed in 0..5u64 {
            let env = BrownianField::new(1, seed, 2.0);
            let a = dp_ground_state(&env, 2.0, 3, 16, 3).unwrap().value;
            let r = 4.0;
            let view = env.rescaled(r);
            let b = dp_ground_state(&view, r * 2.0, 3, 16, 3).unwrap().value;
            assert!((a - b / r.sqrt()).abs() < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn one_jump_mean_dominates_two_normal_max_lower_bound() {
        // A_1 >= W_0(δ) + max_± [W_±(1) - W_±(δ)], whose mean is
        // sqrt((1-δ)/π); quadrature gives E max of two unit normals 1/sqrt(π).
        let k_steps = 8;
        let delta = 1.0 / k_steps as f64;
        let seeds = 4000;
        let vals: Vec<f64> = (0..seeds)
            .map(|i| {
                let env = BrownianField::new(1, 7000 + i, 1.0);
                dp_ground_state(&env, 1.0, 1, k_steps, 1).unwrap().value
            })
            .collect();
        let (mean, se) = mean_se(&vals);
        let two_normal = stats::expected_max_std_normals(2, 2000);
        assert!((two_normal - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-8);
        let bound = (1.0 - delta).sqrt() * two_normal;
        assert!(mean > bound - 3.0 * se, "mean {mean} vs bound {bound}");
        assert!(mean - 3.0 * se > 0.0, "positivity fails: {mean} ± {se}");
    }

    #[test]
    fn gamma_is_zero_at_beta_zero() {
        let env = BrownianField::new(1, 2, 2.0);
        let mut stream = worker_rng(1, 0);
        let (g, bias, ess) = gamma_quenched(&env, 0.0, 3, 2.0, 200, &mut stream).unwrap();
        assert_eq!(g, 0.0);
        assert!(bias.abs() < 1e-12);
        assert!((ess - 200.0).abs() < 1e-9);
    }

    #[test]
    fn gamma_respects_annealed_bound() {
        let est = gamma_estimate(11, 24, 1.0, 1.0, 3.0, 400, 1).unwrap();
        assert!(
            est.gamma_hat <= 0.5 + 3.0 * est.se,
            "gamma {} se {}",
            est.gamma_hat,
            est.se
        );
        assert!(est.mean_ess > 1.0);
    }

    #[test]
    fn gamma_estimator_is_convex_in_beta_with_common_paths() {
        // ln mean e^{βH} is exactly convex in β for fixed draws.
        let env = BrownianField::new(1, 21, 2.0);
        let mut stream = worker_rng(9, 0);
        let m = 300;
        let hs: Vec<f64> = (0..m)
            .map(|_| hamiltonian(&env, &sample_conditioned(1, 3, 2.0, &mut stream)).unwrap())
            .collect();
        let g = |beta: f64| {
            let lw: Vec<f64> = hs.iter().map(|h| beta * h).collect();
            (logsumexp(&lw) - (m as f64).ln()) / 2.0
        };
        for betas in [[0.2, 0.6, 1.0], [0.5, 1.0, 1.5]] {
            let mid = g(betas[1]);
            let chord = 0.5 * (g(betas[0]) + g(betas[2]));
            assert!(mid <= chord + 1e-12, "mid {mid} chord {chord}");
        }
    }

    #[test]
    fn variational_formula_recovers_free_case() {
        // β = 0: Γ ≡ 0, so Ψ = 0 attained at r = κ.
        let kappa = 1.0;
        let grid: Vec<(f64, f64, f64)> = (1..=30)
            .map(|i| {
                let r = i as f64 * 0.1;
                (r, 0.0, 1e-9)
            })
            .collect();
        let v = free_energy_variational(&grid, kappa).unwrap();
        assert!(v.psi_hat.abs() < 1e-5, "psi {}", v.psi_hat);
        assert!((v.r_refined - kappa).abs() < 0.02, "rmax {}", v.r_refined);
        assert!(v.rmax_lo <= kappa && kappa <= v.rmax_hi);
    }

    #[test]
    fn variational_rejects_short_grids() {
        let grid: Vec<(f64, f64, f64)> =
            vec![(0.5, 0.1, 0.01), (1.0, 0.3, 0.01), (1.5, 0.9, 0.01)];
        let err = free_energy_variational(&grid, 1.0).unwrap_err();
        assert!(matches!(err, Error::GridTooShort { .. }));
    }

    #[test]
    fn ldp_beta_zero_rate_is_poisson_rate() {
        let kappa = 1.0;
        let horizon = 3.0;
        let r_grid = [0.5, 1.0, 2.0];
        let rows = ldp_check(5, 8, kappa, 0.0, horizon, &r_grid, 64, 1).unwrap();
        for row in &rows {
            // Γ = 0 and Ψ = (1/T) ln Σ_n P(N=n) ≈ 0, so the prediction is
            // I_κ(r) up to the window truncation.
            let expected = poisson_rate(row.r, kappa).unwrap();
            assert!(
                (row.predicted_rate - expected).abs() < 1e-8,
                "r {}: {} vs {expected}",
                row.r,
                row.predicted_rate
            );
            // Empirical rate uses the floor count n = [rT]; compare against
            // the exact Poisson answer at that count.
            let exact = -(stats::ln_poisson_pmf(kappa * horizon, row.n)
                - logsumexp(
                    &(0..40)
                        .map(|n| stats::ln_poisson_pmf(kappa * horizon, n))
                        .collect::<Vec<_>>(),
                ))
                / horizon;
            assert!(
                (row.empirical_rate - exact).abs() < 1e-8,
                "r {}: emp {} vs exact {exact}",
                row.r,
                row.empirical_rate
            );
        }
    }

    #[test]
    fn alpha_report_shapes_and_positivity() {
        let report = alpha_estimate(3, 24, &[2, 4], 6, 1).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.alpha_hat > 0.0);
        // Finer grids enlarge the feasible set, so means should not drop
        // beyond noise.
        for row in &report.rows {
            assert!(
                row.mean_fine >= row.mean - 3.0 * (row.se + row.se_fine),
                "refinement lost value at n={}",
                row.n
            );
        }
        assert!(report.scaling_ks_p > 0.001, "KS p {}", report.scaling_ks_p);
    }
}
