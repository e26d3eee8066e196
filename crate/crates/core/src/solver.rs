//! Forward/backward solver on a truncated box.
//!
//! The forward array follows `Ẑ_{k+1}(x) = Σ_y Ẑ_k(y) e^{β ΔW_y(k)} p(y, x)`
//! from `Ẑ_0 = δ_0`; the backward array follows
//! `v̂_k(x) = e^{β ΔW_x(k)} Σ_y p(x, y) v̂_{k+1}(y)` from `v̂_K ≡ 1`. Each slab
//! pays its environment increment at the site occupied at the slab start, so
//! the discrete partition function is exactly the weighted sum over
//! grid-jump paths and brute-force path enumeration reproduces it to
//! rounding. Every slice is renormalized by its maximum with the log
//! constant stored aside.

use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::kernel::StepKernel;
use crate::lattice::{LatticeBox, SiteKey};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverParams {
    pub d: usize,
    pub kappa: f64,
    pub beta: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Box radius; 0 means the degenerate single-site box.
    pub radius: i32,
    pub kernel_tol: f64,
    pub kernel_order_cap: usize,
}

impl SolverParams {
    pub fn new(d: usize, kappa: f64, beta: f64, t_final: f64, dt: f64) -> Self {
        let radius = Self::auto_radius(kappa, beta, t_final);
        SolverParams {
            d,
            kappa,
            beta,
            t_final,
            dt,
            radius,
            kernel_tol: 1e-8,
            kernel_order_cap: 64,
        }
    }

    /// Default truncation radius: the free-walk range `κT + 6 sqrt(κT) + 10`
    /// plus a drift allowance that grows with the typical jump density of
    /// the tilted walk at large `β²/κ`.
    pub fn auto_radius(kappa: f64, beta: f64, t_final: f64) -> i32 {
        let kt = kappa * t_final;
        let base = kt + 6.0 * kt.sqrt() + 10.0;
        let ratio = beta * beta / kappa;
        let drift = if ratio > std::f64::consts::E {
            let l = ratio.ln();
            kappa * t_final * ratio / (2.0 * l * l)
        } else {
            0.0
        };
        (base + drift).ceil() as i32
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.d < 1 {
            return fail("dimension must be at least 1".into());
        }
        if !(self.kappa > 0.0) {
            return fail(format!("kappa must be positive, got {}", self.kappa));
        }
        if !(self.t_final > 0.0) {
            return fail(format!("T must be positive, got {}", self.t_final));
        }
        if !(self.dt > 0.0 && self.dt <= self.t_final) {
            return fail(format!("dt must lie in (0, T], got {}", self.dt));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return fail(format!("T/dt must be integral, got {ratio}"));
        }
        if self.radius < 0 {
            return fail(format!("radius must be nonnegative, got {}", self.radius));
        }
        if !(self.kernel_tol > 0.0 && self.kernel_tol <= 1e-6) {
            return fail(format!("kernel_tol must lie in (0, 1e-6], got {}", self.kernel_tol));
        }
        Ok(())
    }

    pub fn bounds(&self) -> LatticeBox {
        LatticeBox::new(self.d, self.radius)
    }

    pub fn build_kernel(&self) -> Result<StepKernel> {
        StepKernel::build(
            &self.bounds(),
            self.kappa,
            self.dt,
            self.kernel_tol,
            self.kernel_order_cap,
        )
    }
}

/// Forward (and optionally backward) arrays of one quenched solve.
pub struct SolverFields {
    pub params: SolverParams,
    bounds: LatticeBox,
    /// forward[k][x], each slice normalized to unit maximum.
    forward: Vec<Vec<f64>>,
    /// Cumulative log of the forward normalizers, length K+1.
    fwd_log: Vec<f64>,
    backward: Option<Vec<Vec<f64>>>,
    bwd_log: Option<Vec<f64>>,
    /// env_weight[k][x] = e^{β ΔW_x(k)}.
    env_weight: Vec<Vec<f64>>,
    pub log_z: f64,
}

impl SolverFields {
    /// Run the forward recursion only (enough for logZ and endpoint laws).
    pub fn forward_only(
        env: &impl Environment,
        params: &SolverParams,
        kernel: &StepKernel,
    ) -> Result<SolverFields> {
        params.validate()?;
        if env.dimension() != params.d {
            return Err(Error::InvalidParams("environment dimension mismatch".into()));
        }
        if env.horizon() < params.t_final * (1.0 - 1e-12) {
            return Err(Error::InvalidParams(format!(
                "environment horizon {} shorter than T = {}",
                env.horizon(),
                params.t_final
            )));
        }
        let bounds = params.bounds();
        let b = bounds.len();
        let k_steps = params.steps();
        let beta = params.beta;

        let sites: Vec<SiteKey> = (0..b).map(|x| bounds.site(x)).collect();
        let mut w_prev = vec![0.0f64; b]; // W_x(t_k), starts at W(0) = 0
        let mut env_weight = Vec::with_capacity(k_steps);
        let mut forward = Vec::with_capacity(k_steps + 1);
        let mut fwd_log = Vec::with_capacity(k_steps + 1);

        let mut slice = vec![0.0f64; b];
        slice[bounds.center()] = 1.0;
        forward.push(slice);
        fwd_log.push(0.0);

        let mut weighted = vec![0.0f64; b];
        for k in 0..k_steps {
            let t_next = (k + 1) as f64 * params.dt;
            let mut weights = Vec::with_capacity(b);
            for x in 0..b {
                let w_next = env.value_at(&sites[x], t_next)?;
                weights.push((beta * (w_next - w_prev[x])).exp());
                w_prev[x] = w_next;
            }
            {
                let cur = forward.last().unwrap();
                for x in 0..b {
                    weighted[x] = cur[x] * weights[x];
                }
            }
            env_weight.push(weights);
            let mut next = vec![0.0f64; b];
            kernel.apply(&weighted, &mut next);
            let m = next.iter().cloned().fold(0.0f64, f64::max);
            assert!(m > 0.0, "forward slice vanished at step {k}");
            for v in &mut next {
                *v /= m;
            }
            fwd_log.push(fwd_log[k] + m.ln());
            forward.push(next);
        }

        let total: f64 = forward[k_steps].iter().sum();
        let log_z = fwd_log[k_steps] + total.ln();
        Ok(SolverFields {
            params: params.clone(),
            bounds,
            forward,
            fwd_log,
            backward: None,
            bwd_log: None,
            env_weight,
            log_z,
        })
    }

    /// Fill the backward arrays from the stored environment weights.
    pub fn solve_backward(&mut self) {
        let b = self.bounds.len();
        let k_steps = self.params.steps();
        let kernel = self.params.build_kernel().expect("params already validated");
        let mut backward = vec![Vec::new(); k_steps + 1];
        let mut bwd_log = vec![0.0f64; k_steps + 1];
        backward[k_steps] = vec![1.0f64; b];
        let mut gathered = vec![0.0f64; b];
        for k in (0..k_steps).rev() {
            kernel.apply(&backward[k + 1], &mut gathered);
            let w = &self.env_weight[k];
            let mut slice = vec![0.0f64; b];
            for x in 0..b {
                slice[x] = w[x] * gathered[x];
            }
            let m = slice.iter().cloned().fold(0.0f64, f64::max);
            assert!(m > 0.0, "backward slice vanished at step {k}");
            for v in &mut slice {
                *v /= m;
            }
            bwd_log[k] = bwd_log[k + 1] + m.ln();
            backward[k] = slice;
        }
        self.backward = Some(backward);
        self.bwd_log = Some(bwd_log);
    }

    /// Forward + backward in one call.
    pub fn full(
        env: &impl Environment,
        params: &SolverParams,
        kernel: &StepKernel,
    ) -> Result<SolverFields> {
        let mut fields = Self::forward_only(env, params, kernel)?;
        fields.solve_backward();
        Ok(fields)
    }

    pub fn bounds(&self) -> &LatticeBox {
        &self.bounds
    }

    pub fn has_backward(&self) -> bool {
        self.backward.is_some()
    }

    pub fn steps(&self) -> usize {
        self.params.steps()
    }

    /// e^{β ΔW_x(k)} table used by the solve (shared with oracles).
    pub fn env_weight(&self, k: usize) -> &[f64] {
        &self.env_weight[k]
    }

    /// Law of the end-point at grid step k: `Ẑ_k / Σ Ẑ_k`.
    pub fn endpoint_law(&self, k: usize) -> Vec<f64> {
        let slice = &self.forward[k];
        let total: f64 = slice.iter().sum();
        slice.iter().map(|v| v / total).collect()
    }

    /// Time-t_k marginal of the horizon-T measure: `Ẑ_k v̂_k / Σ Ẑ_k v̂_k`.
    pub fn marginal_t(&self, k: usize) -> Vec<f64> {
        let backward = self.backward.as_ref().expect("backward pass not solved");
        let fwd = &self.forward[k];
        let bwd = &backward[k];
        let mut out: Vec<f64> = fwd.iter().zip(bwd).map(|(f, b)| f * b).collect();
        let total: f64 = out.iter().sum();
        for v in &mut out {
            *v /= total;
        }
        out
    }

    /// Max over k of |ln Σ_x Ẑ_k v̂_k - ln Σ_x Ẑ_0 v̂_0| with the stored log
    /// constants restored; an exact invariant of the scheme, so the result
    /// is rounding noise.
    pub fn consistency_residual(&self) -> f64 {
        let backward = self.backward.as_ref().expect("backward pass not solved");
        let bwd_log = self.bwd_log.as_ref().unwrap();
        let k_steps = self.params.steps();
        let mut reference = 0.0;
        let mut worst: f64 = 0.0;
        for k in 0..=k_steps {
            let dot: f64 =
                self.forward[k].iter().zip(&backward[k]).map(|(f, b)| f * b).sum();
            let ln_s = dot.ln() + self.fwd_log[k] + bwd_log[k];
            if k == 0 {
                reference = ln_s;
            } else {
                worst = worst.max((ln_s - reference).abs());
            }
        }
        worst
    }

    /// Mass kept by the free (β = 0) evolution over the full horizon; the
    /// complement is lost to series truncation and the absorbing edge.
    pub fn free_mass(&self) -> f64 {
        let kernel = self.params.build_kernel().expect("params already validated");
        let b = self.bounds.len();
        let mut cur = vec![0.0f64; b];
        cur[self.bounds.center()] = 1.0;
        let mut next = vec![0.0f64; b];
        for _ in 0..self.params.steps() {
            kernel.apply(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur.iter().sum()
    }

    /// Largest end-point probability per sup-norm shell at the final step.
    pub fn decay_profile(&self) -> Vec<(i32, f64)> {
        let law = self.endpoint_law(self.params.steps());
        let mut per_shell = vec![0.0f64; self.bounds.radius() as usize + 1];
        for (x, &p) in law.iter().enumerate() {
            let rho = self.bounds.shell(x) as usize;
            per_shell[rho] = per_shell[rho].max(p);
        }
        per_shell.into_iter().enumerate().map(|(r, p)| (r as i32, p)).collect()
    }

    /// End-point overlap `I_T` and miss fraction `b_T` from the forward
    /// arrays alone (no backward pass required).
    pub fn endpoint_overlap(&self) -> (f64, f64) {
        let k_steps = self.params.steps();
        let weight = self.params.dt / self.params.t_final;
        let mut i_t = 0.0;
        let mut b_t = 0.0;
        for k in 0..k_steps {
            let (collision, miss, _) = law_statistics(&self.forward[k]);
            i_t += weight * collision;
            b_t += weight * miss;
        }
        (i_t, b_t)
    }

    /// Overlaps, favourite trajectories and localization fractions.
    pub fn overlaps_and_localization(&self) -> OverlapReport {
        let k_steps = self.params.steps();
        let weight = self.params.dt / self.params.t_final;
        let backward = self.backward.as_ref().expect("backward pass not solved");

        let mut i_t = 0.0;
        let mut b_t = 0.0;
        let mut j_t = 0.0;
        let mut bbar_t = 0.0;
        let mut x_star = Vec::with_capacity(k_steps);
        let mut y_star = Vec::with_capacity(k_steps);

        // Left-endpoint Riemann sums over k = 0..K-1, matching the slab
        // convention of the Hamiltonian weights.
        for k in 0..k_steps {
            let (collision, miss, star) = law_statistics(&self.forward[k]);
            i_t += weight * collision;
            b_t += weight * miss;
            x_star.push(self.bounds.site(star));

            let joint: Vec<f64> =
                self.forward[k].iter().zip(&backward[k]).map(|(f, b)| f * b).collect();
            let (collision, miss, star) = law_statistics(&joint);
            j_t += weight * collision;
            bbar_t += weight * miss;
            y_star.push(self.bounds.site(star));
        }

        OverlapReport {
            log_z: self.log_z,
            i_t,
            j_t,
            a_t: 1.0 - i_t,
            b_t,
            abar_t: 1.0 - j_t,
            bbar_t,
            x_star,
            y_star,
            leak: 1.0 - self.free_mass(),
        }
    }
}

/// (Σ p², 1 - max p, argmax) of the normalization of a nonnegative slice.
/// Ties resolve to the first (lexicographically smallest) site index.
fn law_statistics(slice: &[f64]) -> (f64, f64, usize) {
    let mut total = 0.0;
    let mut sum_sq = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut star = 0;
    for (x, &v) in slice.iter().enumerate() {
        total += v;
        sum_sq += v * v;
        if v > best {
            best = v;
            star = x;
        }
    }
    (sum_sq / (total * total), 1.0 - best / total, star)
}

/// Overlaps and localization statistics of one realization.
#[derive(Clone, Debug)]
pub struct OverlapReport {
    pub log_z: f64,
    /// End-point overlap `I_T` (left Riemann sum of Σ_x law_k(x)²).
    pub i_t: f64,
    /// Path overlap `J_T` (same sum over the horizon-T marginals).
    pub j_t: f64,
    /// `1 - I_T`.
    pub a_t: f64,
    /// Favourite end-point miss fraction.
    pub b_t: f64,
    /// `1 - J_T`.
    pub abar_t: f64,
    /// Favourite path miss fraction.
    pub bbar_t: f64,
    /// Favourite end-point per grid step (length K).
    pub x_star: Vec<SiteKey>,
    /// Favourite path per grid step (length K).
    pub y_star: Vec<SiteKey>,
    /// Free mass lost to truncation over the horizon.
    pub leak: f64,
}

impl OverlapReport {
    /// Exact sandwich inequalities `b ≤ 1 - I ≤ 2b` for both overlap
    /// versions; returns the worst signed violation (nonpositive when the
    /// inequalities hold).
    pub fn sandwich_violation(&self) -> f64 {
        let endpoint = (self.b_t - self.a_t).max(self.a_t - 2.0 * self.b_t);
        let path = (self.bbar_t - self.abar_t).max(self.abar_t - 2.0 * self.bbar_t);
        endpoint.max(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BrownianField;

    fn fields_for(
        seed: u64,
        params: &SolverParams,
    ) -> SolverFields {
        let env = BrownianField::new(params.d, seed, params.t_final);
        let kernel = params.build_kernel().unwrap();
        SolverFields::full(&env, params, &kernel).unwrap()
    }

    fn desk_params() -> SolverParams {
        SolverParams {
            d: 1,
            kappa: 1.0,
            beta: 1.0,
            t_final: 2.0,
            dt: 0.05,
            radius: 12,
            kernel_tol: 1e-8,
            kernel_order_cap: 64,
        }
    }

    #[test]
    fn validation_catches_bad_params() {
        let mut p = desk_params();
        p.dt = 0.3; // T/dt = 6.66...
        assert!(p.validate().is_err());
        let mut p = desk_params();
        p.kappa = 0.0;
        assert!(p.validate().is_err());
        let mut p = desk_params();
        p.kernel_tol = 1e-3;
        assert!(p.validate().is_err());
        let mut p = desk_params();
        p.radius = -1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn free_case_logz_is_log_mass() {
        let mut params = desk_params();
        params.beta = 0.0;
        let f = fields_for(3, &params);
        let mass = f.free_mass();
        assert!((f.log_z - mass.ln()).abs() < 1e-12, "{} vs {}", f.log_z, mass.ln());
        // Wide box: hardly any mass is lost.
        assert!(f.log_z.abs() < 1e-6, "logZ {}", f.log_z);
    }

    #[test]
    fn single_site_box_reduces_to_one_path() {
        let mut params = desk_params();
        params.radius = 0;
        params.beta = 0.7;
        let env = BrownianField::new(1, 17, params.t_final);
        let kernel = params.build_kernel().unwrap();
        let f = SolverFields::full(&env, &params, &kernel).unwrap();
        let w_t = env.value_at(&SiteKey(vec![0]), params.t_final).unwrap();
        let expected = params.beta * w_t - params.kappa * params.t_final;
        assert!((f.log_z - expected).abs() < 1e-10, "{} vs {expected}", f.log_z);

        let report = f.overlaps_and_localization();
        assert!((report.i_t - 1.0).abs() < 1e-12);
        assert!((report.j_t - 1.0).abs() < 1e-12);
        assert_eq!(report.b_t, 0.0);
        assert_eq!(report.bbar_t, 0.0);
    }

    #[test]
    fn consistency_identity_holds() {
        for seed in [1u64, 2, 3] {
            let f = fields_for(seed, &desk_params());
            assert!(f.consistency_residual() < 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn laws_are_normalized_and_start_at_origin() {
        let f = fields_for(9, &desk_params());
        let k_steps = f.steps();
        for k in 0..=k_steps {
            let law = f.endpoint_law(k);
            let marg = f.marginal_t(k);
            assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((marg.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let law0 = f.endpoint_law(0);
        let marg0 = f.marginal_t(0);
        let c = f.bounds().center();
        assert_eq!(law0[c], 1.0);
        assert_eq!(marg0[c], 1.0);
    }

    #[test]
    fn free_marginal_matches_kernel_powers() {
        let mut params = desk_params();
        params.beta = 0.0;
        let f = fields_for(4, &params);
        let kernel = params.build_kernel().unwrap();
        let b = f.bounds().len();
        let k_steps = f.steps();

        // Forward mass q_k by independent power iteration.
        let mut q = vec![0.0f64; b];
        q[f.bounds().center()] = 1.0;
        let mut tmp = vec![0.0f64; b];
        let mut qs = vec![q.clone()];
        for _ in 0..k_steps {
            kernel.apply(&q, &mut tmp);
            std::mem::swap(&mut q, &mut tmp);
            qs.push(q.clone());
        }
        // Backward survival s_k.
        let mut s = vec![1.0f64; b];
        let mut ss = vec![vec![]; k_steps + 1];
        ss[k_steps] = s.clone();
        for k in (0..k_steps).rev() {
            kernel.apply(&s, &mut tmp);
            std::mem::swap(&mut s, &mut tmp);
            ss[k] = s.clone();
        }
        for k in [0, k_steps / 2, k_steps] {
            let law = f.endpoint_law(k);
            let total: f64 = qs[k].iter().sum();
            for x in 0..b {
                assert!((law[x] - qs[k][x] / total).abs() < 1e-8, "endpoint k={k} x={x}");
            }
            let marg = f.marginal_t(k);
            let prod: Vec<f64> = qs[k].iter().zip(&ss[k]).map(|(a, c)| a * c).collect();
            let total: f64 = prod.iter().sum();
            for x in 0..b {
                assert!((marg[x] - prod[x] / total).abs() < 1e-8, "marginal k={k} x={x}");
            }
        }
    }

    #[test]
    fn free_endpoint_overlap_matches_collision_functional() {
        let mut params = desk_params();
        params.beta = 0.0;
        let f = fields_for(12, &params);
        let kernel = params.build_kernel().unwrap();
        let b = f.bounds().len();

        let mut q = vec![0.0f64; b];
        q[f.bounds().center()] = 1.0;
        let mut tmp = vec![0.0f64; b];
        let mut collision = 0.0;
        for _ in 0..f.steps() {
            let total: f64 = q.iter().sum();
            collision += q.iter().map(|v| (v / total) * (v / total)).sum::<f64>();
            kernel.apply(&q, &mut tmp);
            std::mem::swap(&mut q, &mut tmp);
        }
        collision *= params.dt / params.t_final;
        let report = f.overlaps_and_localization();
        assert!((report.i_t - collision).abs() < 1e-8, "{} vs {collision}", report.i_t);
    }

    #[test]
    fn sandwich_holds_every_realization() {
        for seed in 0..20u64 {
            let report = fields_for(seed, &desk_params()).overlaps_and_localization();
            assert!(
                report.sandwich_violation() <= 1e-12,
                "seed {seed}: violation {}",
                report.sandwich_violation()
            );
        }
    }

    #[test]
    fn favourite_paths_meet_at_horizon() {
        // x*(K-1) need not equal y*(K-1), but both stars use the same tie
        // break; spot-check lexicographic selection on a tied slice.
        let (.., star) = super::law_statistics(&[0.2, 0.5, 0.5, 0.3]);
        assert_eq!(star, 1);
    }

    #[test]
    fn decay_profile_bounded_and_free_case_obeys_poisson_shells() {
        let mut params = desk_params();
        params.beta = 0.0;
        let f = fields_for(21, &params);
        let profile = f.decay_profile();
        for &(_, p) in &profile {
            assert!((0.0..=1.0).contains(&p));
        }
        // Reaching sup-norm shell ρ needs at least ρ jumps.
        let law = f.endpoint_law(f.steps());
        let b = f.bounds().len();
        let mut shell_mass = vec![0.0f64; f.bounds().radius() as usize + 1];
        for x in 0..b {
            shell_mass[f.bounds().shell(x) as usize] += law[x];
        }
        let lambda = params.kappa * params.t_final;
        for (rho, &mass) in shell_mass.iter().enumerate().skip(1) {
            let tail = crate::stats::poisson_tail_above(lambda, rho - 1);
            assert!(mass <= tail + 1e-12, "shell {rho}: {mass} > {tail}");
        }
    }

    #[test]
    fn superexponential_trend_in_profile() {
        let params = desk_params();
        let f = fields_for(33, &params);
        let profile = f.decay_profile();
        let kt = (params.kappa * params.t_final).ceil() as usize;
        // Per-shell log-decrements grow once past the free range.
        let mut slopes = Vec::new();
        for rho in kt + 1..profile.len() - 1 {
            let (p0, p1) = (profile[rho].1, profile[rho + 1].1);
            if p0 > 1e-250 && p1 > 1e-250 {
                slopes.push((p0 / p1).ln());
            }
        }
        assert!(slopes.len() >= 3, "profile too short to judge");
        let first = slopes.first().unwrap();
        let last = slopes.last().unwrap();
        assert!(last > first, "decay not accelerating: first {first}, last {last}");
    }
}
