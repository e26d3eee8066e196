//! Monte Carlo estimators for the partition function and the replica
//! overlap, built on exact continuous-time paths.
//!
//! The plain estimator averages `e^{β H}` over free paths. The sequential
//! variant propagates a particle population segment by segment with
//! systematic resampling when the effective sample size drops below half
//! the population; the product of per-segment normalizers is an unbiased
//! estimate of Z.

use rand::Rng;

use crate::env::Environment;
use crate::error::Result;
use crate::lattice::SiteKey;
use crate::paths::{hamiltonian, overlap_time, sample_free, JumpPath};
use crate::stats::{effective_sample_size, logsumexp};

/// A weighted path population representing the polymer measure.
pub struct WeightedEnsemble {
    pub paths: Vec<JumpPath>,
    pub log_weights: Vec<f64>,
    pub kappa: f64,
    pub beta: f64,
    pub horizon: f64,
    /// Effective sample size of the final weights.
    pub ess: f64,
    /// ESS recorded at each checkpoint (empty for plain importance sampling).
    pub ess_trace: Vec<f64>,
    /// Checkpoints at which the population was resampled.
    pub resampled_at: Vec<usize>,
}

/// Result of a partition-function estimate.
#[derive(Clone, Debug)]
pub struct ZEstimate {
    pub log_z: f64,
    /// Delta-method standard error of log Z (plain estimator only).
    pub se: f64,
    pub ess: f64,
    /// Set when the population collapsed onto essentially one particle
    /// more than once; the estimate is still returned.
    pub degenerate: bool,
}

/// Plain importance sampling: `Ẑ = mean over M free paths of e^{β H}`.
pub fn estimate_z(
    env: &impl Environment,
    kappa: f64,
    beta: f64,
    horizon: f64,
    m: usize,
    rng: &mut impl Rng,
) -> Result<ZEstimate> {
    let ensemble = importance_ensemble(env, kappa, beta, horizon, m, rng)?;
    Ok(ensemble.z_estimate())
}

/// Draw M free paths and weight them by `e^{β H}`.
pub fn importance_ensemble(
    env: &impl Environment,
    kappa: f64,
    beta: f64,
    horizon: f64,
    m: usize,
    rng: &mut impl Rng,
) -> Result<WeightedEnsemble> {
    assert!(m >= 2, "need at least two paths");
    let d = env.dimension();
    let mut paths = Vec::with_capacity(m);
    let mut log_weights = Vec::with_capacity(m);
    for _ in 0..m {
        let path = sample_free(d, kappa, horizon, rng);
        log_weights.push(beta * hamiltonian(env, &path)?);
        paths.push(path);
    }
    let ess = effective_sample_size(&log_weights);
    Ok(WeightedEnsemble {
        paths,
        log_weights,
        kappa,
        beta,
        horizon,
        ess,
        ess_trace: Vec::new(),
        resampled_at: Vec::new(),
    })
}

impl WeightedEnsemble {
    /// Log of the weight mean with its delta-method standard error.
    pub fn z_estimate(&self) -> ZEstimate {
        let m = self.log_weights.len() as f64;
        let log_mean = logsumexp(&self.log_weights) - m.ln();
        let ratios: Vec<f64> = self.log_weights.iter().map(|lw| (lw - log_mean).exp()).collect();
        let var =
            ratios.iter().map(|r| (r - 1.0) * (r - 1.0)).sum::<f64>() / (m - 1.0);
        ZEstimate {
            log_z: log_mean,
            se: (var / m).sqrt(),
            ess: self.ess,
            degenerate: self.ess <= 1.0 + 1e-9,
        }
    }

    /// Self-normalized replica overlap over all ordered pairs i ≠ j:
    /// `Σ w_i w_j overlap(X_i, X_j) / Σ w_i w_j`.
    pub fn replica_overlap(&self) -> f64 {
        let m = self.paths.len();
        let peak = self.log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.log_weights.iter().map(|lw| (lw - peak).exp()).collect();
        let sum: f64 = w.iter().sum();
        let sum_sq: f64 = w.iter().map(|x| x * x).sum();
        let mut num = 0.0;
        for i in 0..m {
            if w[i] == 0.0 {
                continue;
            }
            for j in i + 1..m {
                if w[j] == 0.0 {
                    continue;
                }
                num += 2.0 * w[i] * w[j] * overlap_time(&self.paths[i], &self.paths[j]);
            }
        }
        num / (sum * sum - sum_sq)
    }
}

/// Tuning of the sequential estimator.
#[derive(Clone, Copy, Debug)]
pub struct SmcConfig {
    /// Number of uniformly spaced checkpoints on (0, T].
    pub checkpoints: usize,
    /// Resample when ESS < threshold_frac * M.
    pub threshold_frac: f64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig { checkpoints: 50, threshold_frac: 0.5 }
    }
}

/// Sequential Monte Carlo with systematic resampling. Returns the ensemble
/// with the final (post-resampling) weights; `log_z` carries the unbiased
/// product-of-normalizers estimate.
pub fn estimate_z_smc(
    env: &impl Environment,
    kappa: f64,
    beta: f64,
    horizon: f64,
    m: usize,
    config: SmcConfig,
    rng: &mut impl Rng,
) -> Result<(ZEstimate, WeightedEnsemble)> {
    assert!(m >= 2 && config.checkpoints >= 1);
    let d = env.dimension();
    let mut paths: Vec<JumpPath> = (0..m)
        .map(|_| JumpPath {
            start: SiteKey::origin(d),
            jump_times: Vec::new(),
            sites: vec![SiteKey::origin(d)],
            horizon,
        })
        .collect();
    let mut log_weights = vec![0.0f64; m];
    let mut log_z = 0.0;
    let mut ess_trace = Vec::with_capacity(config.checkpoints);
    let mut resampled_at = Vec::new();
    let mut collapses = 0usize;

    let seg = horizon / config.checkpoints as f64;
    let mut t_prev = 0.0;
    for c in 1..=config.checkpoints {
        let t_next = if c == config.checkpoints { horizon } else { c as f64 * seg };
        for (path, lw) in paths.iter_mut().zip(log_weights.iter_mut()) {
            // Extend the free path over (t_prev, t_next]; holding times are
            // memoryless so no carry-over state is needed.
            let mut t = t_prev;
            let mut segment_from = t_prev;
            let mut h_seg = 0.0;
            loop {
                let u: f64 = rng.gen();
                t += -(1.0 - u).ln() / kappa;
                if t >= t_next {
                    break;
                }
                h_seg += env.increment(path.sites.last().unwrap(), segment_from, t)?;
                segment_from = t;
                path.jump_times.push(t);
                let dir = rng.gen_range(0..2 * d);
                let next = path.sites.last().unwrap().step(dir);
                path.sites.push(next);
            }
            h_seg += env.increment(path.sites.last().unwrap(), segment_from, t_next)?;
            *lw += beta * h_seg;
        }
        t_prev = t_next;

        let ess = effective_sample_size(&log_weights);
        ess_trace.push(ess);
        if ess <= 1.0 + 1e-9 {
            collapses += 1;
        }
        if ess < config.threshold_frac * m as f64 && c < config.checkpoints {
            log_z += logsumexp(&log_weights) - (m as f64).ln();
            systematic_resample(&mut paths, &mut log_weights, rng);
            resampled_at.push(c);
        }
    }
    log_z += logsumexp(&log_weights) - (m as f64).ln();

    let ess = effective_sample_size(&log_weights);
    let estimate = ZEstimate {
        log_z,
        se: f64::NAN, // single-run SMC carries no within-run error bar
        ess,
        degenerate: collapses >= 2,
    };
    let ensemble = WeightedEnsemble {
        paths,
        log_weights,
        kappa,
        beta,
        horizon,
        ess,
        ess_trace,
        resampled_at,
    };
    Ok((estimate, ensemble))
}

/// Systematic resampling: one uniform offset, M equally spaced pointers.
fn systematic_resample(paths: &mut Vec<JumpPath>, log_weights: &mut [f64], rng: &mut impl Rng) {
    let m = paths.len();
    let peak = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|lw| (lw - peak).exp()).collect();
    let total: f64 = w.iter().sum();
    let u: f64 = rng.gen::<f64>() / m as f64;
    let mut chosen = Vec::with_capacity(m);
    let mut cum = 0.0;
    let mut i = 0usize;
    for k in 0..m {
        let target = (u + k as f64 / m as f64) * total;
        while cum + w[i] < target && i + 1 < m {
            cum += w[i];
            i += 1;
        }
        chosen.push(i);
    }
    *paths = chosen.iter().map(|&i| paths[i].clone()).collect();
    log_weights.iter_mut().for_each(|lw| *lw = 0.0);
}
