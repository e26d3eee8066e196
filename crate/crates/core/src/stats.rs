//! Small statistical utilities shared by estimators, oracles and checks.

use statrs::function::erf::erf;
use statrs::function::gamma::{gamma_lr, ln_gamma};

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// log(sum(exp(xs))) guarded against overflow.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Effective sample size of a log-weight vector: (Σw)² / Σw².
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return 0.0;
    }
    let (mut s, mut s2) = (0.0, 0.0);
    for &lw in log_weights {
        let w = (lw - m).exp();
        s += w;
        s2 += w * w;
    }
    s * s / s2
}

/// Poisson(λ) point mass at `k`, by stable recurrence.
pub fn poisson_pmf(lambda: f64, k: usize) -> f64 {
    (ln_poisson_pmf(lambda, k)).exp()
}

/// ln of the Poisson(λ) point mass at `k`.
pub fn ln_poisson_pmf(lambda: f64, k: usize) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * lambda.ln() - lambda - ln_gamma(k as f64 + 1.0)
}

/// P(N > k) for N ~ Poisson(λ), summed forward from the tail head so small
/// tails keep full precision.
pub fn poisson_tail_above(lambda: f64, k: usize) -> f64 {
    let mut term = poisson_pmf(lambda, k + 1);
    let mut sum = term;
    let mut j = k + 1;
    while term > sum * 1e-18 + f64::MIN_POSITIVE {
        j += 1;
        term *= lambda / j as f64;
        sum += term;
        if j > k + 10_000 {
            break;
        }
    }
    sum
}

/// Survival function of the chi-square distribution with `dof` degrees of
/// freedom.
pub fn chi_square_p(stat: f64, dof: usize) -> f64 {
    1.0 - gamma_lr(dof as f64 / 2.0, stat / 2.0)
}

/// Chi-square goodness-of-fit of observed jump counts against Poisson(λ).
///
/// Cells with expected count below 5 are pooled into their neighbours.
/// Returns (statistic, degrees of freedom, p-value).
pub fn chi_square_poisson_gof(counts: &[u64], lambda: f64) -> (f64, usize, f64) {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    // Expected mass per raw cell, last cell holds the upper tail.
    let mut expected: Vec<f64> = (0..counts.len()).map(|k| nf * poisson_pmf(lambda, k)).collect();
    let tail = nf * poisson_tail_above(lambda, counts.len() - 1);
    *expected.last_mut().unwrap() += tail;

    let mut obs_pooled = Vec::new();
    let mut exp_pooled = Vec::new();
    let (mut acc_o, mut acc_e) = (0.0, 0.0);
    for (o, e) in counts.iter().zip(&expected) {
        acc_o += *o as f64;
        acc_e += e;
        if acc_e >= 5.0 {
            obs_pooled.push(acc_o);
            exp_pooled.push(acc_e);
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 {
        if let (Some(o), Some(e)) = (obs_pooled.last_mut(), exp_pooled.last_mut()) {
            *o += acc_o;
            *e += acc_e;
        } else {
            obs_pooled.push(acc_o);
            exp_pooled.push(acc_e);
        }
    }
    let stat: f64 = obs_pooled
        .iter()
        .zip(&exp_pooled)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = obs_pooled.len().saturating_sub(1).max(1);
    (stat, dof, chi_square_p(stat, dof))
}

/// Kolmogorov distribution tail Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test. Returns (D, asymptotic p-value).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let t = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= t {
            i += 1;
        }
        while j < ys.len() && ys[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    (d, kolmogorov_q(lambda))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// E[max of `m` iid standard normals] by Simpson quadrature of
/// x · m φ(x) Φ(x)^{m-1} over [-10, 10].
pub fn expected_max_std_normals(m: usize, intervals: usize) -> f64 {
    assert!(m >= 1);
    let n = if intervals % 2 == 0 { intervals } else { intervals + 1 };
    let (a, b) = (-10.0, 10.0);
    let h = (b - a) / n as f64;
    let f = |x: f64| x * m as f64 * normal_pdf(x) * normal_cdf(x).powi(m as i32 - 1);
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Golden-section maximization of a unimodal function on [a, b].
pub fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, iters: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logsumexp_matches_direct() {
        let xs: [f64; 4] = [0.1, -0.4, 2.0, 1.3];
        let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(&xs) - direct).abs() < 1e-12);
    }

    #[test]
    fn logsumexp_large_inputs() {
        let xs = [1000.0, 1000.0];
        assert!((logsumexp(&xs) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn ess_bounds() {
        let equal = vec![0.5; 64];
        assert!((effective_sample_size(&equal) - 64.0).abs() < 1e-9);
        let mut one = vec![-1e3; 64];
        one[0] = 0.0;
        assert!((effective_sample_size(&one) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn poisson_tail_matches_complement() {
        let lambda = 2.5;
        for k in 0..10 {
            let head: f64 = (0..=k).map(|j| poisson_pmf(lambda, j)).sum();
            let tail = poisson_tail_above(lambda, k);
            assert!((head + tail - 1.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn chi_square_p_known_values() {
        // P(chi2_1 > 3.841) ≈ 0.05
        assert!((chi_square_p(3.841, 1) - 0.05).abs() < 5e-4);
        // P(chi2_2 > 5.991) ≈ 0.05
        assert!((chi_square_p(5.991, 2) - 0.05).abs() < 5e-4);
    }

    #[test]
    fn ks_same_sample_p_large() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let (d, p) = ks_two_sample(&a, &a);
        assert!(d < 1e-12);
        assert!(p > 0.999);
    }

    #[test]
    fn expected_max_closed_forms() {
        // m=1: E[Z] = 0; m=2: 1/sqrt(pi); m=3: 3/(2 sqrt(pi)).
        assert!(expected_max_std_normals(1, 2000).abs() < 1e-10);
        let two = expected_max_std_normals(2, 2000);
        assert!((two - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9, "{two}");
        let three = expected_max_std_normals(3, 2000);
        assert!((three - 1.5 / std::f64::consts::PI.sqrt()).abs() < 1e-9, "{three}");
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 1.3) * (x - 1.3) + 2.0, 0.0, 3.0, 80);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }
}
