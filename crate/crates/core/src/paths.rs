//! Exact continuous-time path machinery: free and jump-count-conditioned
//! samplers, Hamiltonian evaluation against the lazy environment, and the
//! exact pairwise overlap time.
//!
//! Paths are sampled without any time grid, so the Hamiltonian is evaluated
//! exactly from environment increments and the diffusive rescaling identity
//! can be tested pathwise to machine precision.

use rand::Rng;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::lattice::SiteKey;

/// A càdlàg nearest-neighbour path on the lattice over `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JumpPath {
    pub start: SiteKey,
    /// Strictly increasing jump times in (0, T).
    pub jump_times: Vec<f64>,
    /// Visited sites; `sites[0] == start`, consecutive entries differ by one
    /// unit step.
    pub sites: Vec<SiteKey>,
    pub horizon: f64,
}

impl JumpPath {
    pub fn constant(d: usize, horizon: f64) -> Self {
        JumpPath {
            start: SiteKey::origin(d),
            jump_times: Vec::new(),
            sites: vec![SiteKey::origin(d)],
            horizon,
        }
    }

    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    pub fn endpoint(&self) -> &SiteKey {
        self.sites.last().unwrap()
    }

    /// Position at time `t` (right-continuous).
    pub fn position(&self, t: f64) -> &SiteKey {
        let idx = self.jump_times.partition_point(|&s| s <= t);
        &self.sites[idx]
    }

    /// The time-stretched path `X^{(a)}(s) = X(s / a)` on `[0, a T]`.
    pub fn time_scaled(&self, a: f64) -> JumpPath {
        assert!(a > 0.0);
        JumpPath {
            start: self.start.clone(),
            jump_times: self.jump_times.iter().map(|t| t * a).collect(),
            sites: self.sites.clone(),
            horizon: self.horizon * a,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.sites.len() != self.jump_times.len() + 1 {
            return fail("sites must number one more than jump times".into());
        }
        if self.sites[0] != self.start {
            return fail("path must begin at its start site".into());
        }
        let mut prev = 0.0;
        for &t in &self.jump_times {
            if !(t > prev && t < self.horizon) {
                return fail(format!("jump time {t} not strictly inside (0, {})", self.horizon));
            }
            prev = t;
        }
        for pair in self.sites.windows(2) {
            let l1: i64 = pair[0]
                .0
                .iter()
                .zip(&pair[1].0)
                .map(|(a, b)| (a - b).abs() as i64)
                .sum();
            if l1 != 1 {
                return fail(format!("step {} -> {} is not nearest-neighbour", pair[0], pair[1]));
            }
        }
        Ok(())
    }
}

/// Sample the rate-κ simple symmetric walk on `[0, T]`: exponential holding
/// times, uniform neighbour choices.
pub fn sample_free(d: usize, kappa: f64, horizon: f64, rng: &mut impl Rng) -> JumpPath {
    assert!(kappa > 0.0 && horizon > 0.0);
    let mut jump_times = Vec::new();
    let mut sites = vec![SiteKey::origin(d)];
    let mut t = 0.0;
    loop {
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / kappa;
        if t >= horizon {
            break;
        }
        jump_times.push(t);
        let dir = rng.gen_range(0..2 * d);
        let next = sites.last().unwrap().step(dir);
        sites.push(next);
    }
    JumpPath { start: SiteKey::origin(d), jump_times, sites, horizon }
}

/// Sample a path conditioned to make exactly `n` jumps on `[0, T]`: jump
/// times iid uniform on (0, T) sorted, steps iid uniform over neighbours.
pub fn sample_conditioned(d: usize, n: usize, horizon: f64, rng: &mut impl Rng) -> JumpPath {
    assert!(horizon > 0.0);
    let mut jump_times: Vec<f64>;
    loop {
        jump_times = (0..n)
            .map(|_| loop {
                let u: f64 = rng.gen();
                if u > 0.0 {
                    break u * horizon;
                }
            })
            .collect();
        jump_times.sort_by(|a, b| a.total_cmp(b));
        if jump_times.windows(2).all(|w| w[0] < w[1]) {
            break;
        }
    }
    let mut sites = Vec::with_capacity(n + 1);
    sites.push(SiteKey::origin(d));
    for _ in 0..n {
        let dir = rng.gen_range(0..2 * d);
        let next = sites.last().unwrap().step(dir);
        sites.push(next);
    }
    JumpPath { start: SiteKey::origin(d), jump_times, sites, horizon }
}

/// Accumulated environment increment along the path:
/// `Σ_i [W_{X(t_i)}(t_{i+1}) - W_{X(t_i)}(t_i)]` with `t_0 = 0`,
/// `t_{n+1} = T`, evaluated exactly (no time grid).
pub fn hamiltonian(env: &impl Environment, path: &JumpPath) -> Result<f64> {
    if path.horizon > env.horizon() * (1.0 + 1e-12) {
        return Err(Error::InvalidParams(format!(
            "path horizon {} exceeds environment horizon {}",
            path.horizon,
            env.horizon()
        )));
    }
    let mut total = 0.0;
    let mut t_prev = 0.0;
    for (i, &t) in path.jump_times.iter().enumerate() {
        total += env.increment(&path.sites[i], t_prev, t)?;
        t_prev = t;
    }
    total += env.increment(path.sites.last().unwrap(), t_prev, path.horizon)?;
    Ok(total)
}

/// Fraction of `[0, T]` during which the two paths occupy the same site
/// (exact Lebesgue measure divided by the horizon).
pub fn overlap_time(a: &JumpPath, b: &JumpPath) -> f64 {
    assert_eq!(a.horizon, b.horizon, "paths must share a horizon");
    let mut together = 0.0;
    let mut t = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let next_a = a.jump_times.get(i).copied().unwrap_or(f64::INFINITY);
        let next_b = b.jump_times.get(j).copied().unwrap_or(f64::INFINITY);
        let next = next_a.min(next_b).min(a.horizon);
        if a.sites[i] == b.sites[j] {
            together += next - t;
        }
        if next >= a.horizon {
            break;
        }
        t = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    together / a.horizon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BrownianField;
    use crate::rng::worker_rng;
    use crate::stats;

    #[test]
    fn free_sampler_jump_count_is_poisson() {
        let d = 1;
        let (kappa, horizon) = (1.0, 3.0);
        let mut rng = worker_rng(1, 0);
        let n = 100_000usize;
        let mut counts = vec![0u64; 32];
        let mut total = 0.0;
        for _ in 0..n {
            let path = sample_free(d, kappa, horizon, &mut rng);
            let jumps = path.jump_count();
            total += jumps as f64;
            if jumps < counts.len() {
                counts[jumps] += 1;
            } else {
                *counts.last_mut().unwrap() += 1;
            }
        }
        let lambda = kappa * horizon;
        let mean = total / n as f64;
        let se = (lambda / n as f64).sqrt();
        assert!((mean - lambda).abs() < 3.0 * se, "mean {mean}");
        let (stat, dof, p) = stats::chi_square_poisson_gof(&counts, lambda);
        assert!(p > 0.001, "chi2 {stat} dof {dof} p {p}");
    }

    #[test]
    fn endpoint_parity_matches_jump_parity_in_d1() {
        let mut rng = worker_rng(2, 0);
        for _ in 0..500 {
            let path = sample_free(1, 1.3, 2.0, &mut rng);
            let parity = (path.jump_count() % 2) as i32;
            assert_eq!(path.endpoint().0[0].rem_euclid(2), parity);
        }
    }

    #[test]
    fn conditioned_sampler_basics() {
        let mut rng = worker_rng(3, 0);
        let path = sample_conditioned(2, 0, 1.0, &mut rng);
        assert_eq!(path.jump_count(), 0);
        assert_eq!(path.endpoint(), &SiteKey::origin(2));

        // Order statistics: E[t_(i)] = i T / (n+1).
        let (n, horizon) = (4usize, 2.0);
        let reps = 100_000usize;
        let mut sums = vec![0.0f64; n];
        for _ in 0..reps {
            let p = sample_conditioned(1, n, horizon, &mut rng);
            for (i, &t) in p.jump_times.iter().enumerate() {
                sums[i] += t;
            }
        }
        for i in 0..n {
            let mean = sums[i] / reps as f64;
            let expected = (i + 1) as f64 * horizon / (n as f64 + 1.0);
            // Var of a uniform order statistic is below T²/4.
            let se = horizon / 2.0 / (reps as f64).sqrt();
            assert!((mean - expected).abs() < 3.0 * se, "order stat {i}: {mean} vs {expected}");
        }
    }

    #[test]
    fn conditioned_matches_rejected_free_sampler() {
        // First jump time of the free walk given N = n versus the
        // conditioned sampler, two-sample KS.
        let (kappa, horizon, n) = (1.0, 2.0, 2usize);
        let mut rng = worker_rng(4, 0);
        let mut rejected = Vec::new();
        while rejected.len() < 4000 {
            let p = sample_free(1, kappa, horizon, &mut rng);
            if p.jump_count() == n {
                rejected.push(p.jump_times[0]);
            }
        }
        let direct: Vec<f64> = (0..4000)
            .map(|_| sample_conditioned(1, n, horizon, &mut rng).jump_times[0])
            .collect();
        let (d, p) = stats::ks_two_sample(&rejected, &direct);
        assert!(p > 0.001, "KS D {d} p {p}");
    }

    #[test]
    fn hamiltonian_of_constant_path_is_terminal_value() {
        let env = BrownianField::new(1, 5, 2.0);
        let path = JumpPath::constant(1, 2.0);
        let h = hamiltonian(&env, &path).unwrap();
        let w = env.value_at(&SiteKey::origin(1), 2.0).unwrap();
        assert_eq!(h.to_bits(), w.to_bits());
    }

    #[test]
    fn degenerate_self_jump_leaves_hamiltonian_unchanged() {
        // Arithmetic check only; such paths are rejected as inputs elsewhere.
        let env = BrownianField::new(1, 6, 2.0);
        let mut rng = worker_rng(6, 0);
        let path = sample_free(1, 1.0, 2.0, &mut rng);
        let h = hamiltonian(&env, &path).unwrap();
        let mut split = path.clone();
        let s = 1.23456;
        let idx = split.jump_times.partition_point(|&u| u <= s);
        let here = split.sites[idx].clone();
        split.jump_times.insert(idx, s);
        split.sites.insert(idx + 1, here);
        let h_split = hamiltonian(&env, &split).unwrap();
        assert!((h - h_split).abs() < 1e-12);
    }

    #[test]
    fn hamiltonian_respects_diffusive_rescaling() {
        let env = BrownianField::new(1, 7, 2.0);
        let mut rng = worker_rng(7, 0);
        for &a in &[0.25, 4.0] {
            for _ in 0..50 {
                let path = sample_free(1, 1.0, 2.0, &mut rng);
                let h = hamiltonian(&env, &path).unwrap();
                let view = env.rescaled(a);
                let scaled = path.time_scaled(a);
                let h_scaled = hamiltonian(&view, &scaled).unwrap();
                assert!(
                    (h - h_scaled / a.sqrt()).abs() < 1e-9,
                    "a={a}: {h} vs {}",
                    h_scaled / a.sqrt()
                );
            }
        }
    }

    #[test]
    fn overlap_time_basics() {
        let a = JumpPath::constant(1, 2.0);
        assert_eq!(overlap_time(&a, &a), 1.0);
        let mut rng = worker_rng(8, 0);
        for _ in 0..100 {
            let x = sample_free(1, 1.5, 2.0, &mut rng);
            let y = sample_free(1, 1.5, 2.0, &mut rng);
            let o = overlap_time(&x, &y);
            let o_rev = overlap_time(&y, &x);
            assert!((0.0..=1.0).contains(&o));
            assert_eq!(o.to_bits(), o_rev.to_bits());
            assert!((overlap_time(&x, &x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn overlap_time_hand_case() {
        // X jumps to +1 at t=1; Y stays home. Together on [0,1): half time.
        let x = JumpPath {
            start: SiteKey::origin(1),
            jump_times: vec![1.0],
            sites: vec![SiteKey(vec![0]), SiteKey(vec![1])],
            horizon: 2.0,
        };
        let y = JumpPath::constant(1, 2.0);
        assert!((overlap_time(&x, &y) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_malformed_paths() {
        let mut bad = JumpPath::constant(1, 1.0);
        bad.jump_times = vec![0.5];
        assert!(bad.validate().is_err()); // missing site
        let teleport = JumpPath {
            start: SiteKey::origin(1),
            jump_times: vec![0.5],
            sites: vec![SiteKey(vec![0]), SiteKey(vec![2])],
            horizon: 1.0,
        };
        assert!(teleport.validate().is_err());
        let late = JumpPath {
            start: SiteKey::origin(1),
            jump_times: vec![1.5],
            sites: vec![SiteKey(vec![0]), SiteKey(vec![1])],
            horizon: 1.0,
        };
        assert!(late.validate().is_err());
    }
}
