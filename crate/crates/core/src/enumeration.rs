//! Brute-force reference computation for tiny instances.
//!
//! Enumerates every site sequence `(y_0 = 0, y_1, ..., y_K)` the kernel
//! supports on the box and sums the slab weights
//! `Π_k e^{β ΔW_{y_k}(k)} p(y_k, y_{k+1})` directly. This reproduces what
//! the forward/backward recursion computes without sharing any of its code
//! paths, so the solver can be checked against it to rounding.

use crate::env::Environment;
use crate::error::Result;
use crate::kernel::StepKernel;
use crate::solver::SolverParams;

pub struct Enumeration {
    pub log_z: f64,
    /// endpoint_laws[k][x]: normalized weight of length-k prefixes ending at x.
    pub endpoint_laws: Vec<Vec<f64>>,
    /// marginals[k][x]: normalized weight of full paths located at x at step k.
    pub marginals: Vec<Vec<f64>>,
    pub i_t: f64,
    pub j_t: f64,
    pub b_t: f64,
    pub bbar_t: f64,
}

/// Exhaustively enumerate the grid paths of `params` under `env`.
///
/// Cost grows like (box size)^(K+1); keep K at most ~7 on a radius-2 box.
pub fn enumerate(env: &impl Environment, params: &SolverParams) -> Result<Enumeration> {
    params.validate()?;
    let bounds = params.bounds();
    let b = bounds.len();
    let k_steps = params.steps();
    let kernel = params.build_kernel()?;
    assert!(
        (b as f64).powi(k_steps as i32 + 1) < 5e7,
        "instance too large to enumerate"
    );

    // Slab weights straight from the environment.
    let mut weight = vec![vec![0.0f64; b]; k_steps];
    for x in 0..b {
        let site = bounds.site(x);
        let mut prev = 0.0;
        for (k, row) in weight.iter_mut().enumerate() {
            let next = env.value_at(&site, (k + 1) as f64 * params.dt)?;
            row[x] = (params.beta * (next - prev)).exp();
            prev = next;
        }
    }

    let mut prefix = vec![vec![0.0f64; b]; k_steps + 1];
    let mut through = vec![vec![0.0f64; b]; k_steps + 1];
    let mut total = 0.0;

    // Depth-first walk over all kernel-supported sequences.
    let mut stack: Vec<usize> = Vec::with_capacity(k_steps + 1);
    fn visit(
        x: usize,
        k: usize,
        w: f64,
        k_steps: usize,
        kernel: &StepKernel,
        weight: &[Vec<f64>],
        prefix: &mut [Vec<f64>],
        through: &mut [Vec<f64>],
        total: &mut f64,
        stack: &mut Vec<usize>,
    ) {
        prefix[k][x] += w;
        stack.push(x);
        if k == k_steps {
            *total += w;
            for (j, &y) in stack.iter().enumerate() {
                through[j][y] += w;
            }
        } else {
            let slab = w * weight[k][x];
            for &(y, p) in kernel.row(x) {
                visit(
                    y as usize,
                    k + 1,
                    slab * p,
                    k_steps,
                    kernel,
                    weight,
                    prefix,
                    through,
                    total,
                    stack,
                );
            }
        }
        stack.pop();
    }
    let center = bounds.center();
    visit(
        center,
        0,
        1.0,
        k_steps,
        &kernel,
        &weight,
        &mut prefix,
        &mut through,
        &mut total,
        &mut stack,
    );

    let normalize = |v: &[f64]| -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.iter().map(|x| x / s).collect()
    };
    let endpoint_laws: Vec<Vec<f64>> = prefix.iter().map(|v| normalize(v)).collect();
    let marginals: Vec<Vec<f64>> = through.iter().map(|v| normalize(v)).collect();

    let riemann = params.dt / params.t_final;
    let mut i_t = 0.0;
    let mut j_t = 0.0;
    let mut b_t = 0.0;
    let mut bbar_t = 0.0;
    for k in 0..k_steps {
        let law = &endpoint_laws[k];
        i_t += riemann * law.iter().map(|p| p * p).sum::<f64>();
        b_t += riemann * (1.0 - law.iter().cloned().fold(f64::MIN, f64::max));
        let marg = &marginals[k];
        j_t += riemann * marg.iter().map(|p| p * p).sum::<f64>();
        bbar_t += riemann * (1.0 - marg.iter().cloned().fold(f64::MIN, f64::max));
    }

    Ok(Enumeration {
        log_z: total.ln(),
        endpoint_laws,
        marginals,
        i_t,
        j_t,
        b_t,
        bbar_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BrownianField;
    use crate::solver::SolverFields;

    fn tiny_params(k_steps: usize) -> SolverParams {
        SolverParams {
            d: 1,
            kappa: 1.0,
            beta: 1.0,
            t_final: 0.25 * k_steps as f64,
            dt: 0.25,
            radius: 2,
            kernel_tol: 1e-8,
            kernel_order_cap: 64,
        }
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn solver_matches_enumeration_on_tiny_instances() {
        for seed in 0..5u64 {
            for k_steps in [3usize, 6] {
                let params = tiny_params(k_steps);
                let env = BrownianField::new(1, seed, params.t_final);
                let kernel = params.build_kernel().unwrap();
                let fields = SolverFields::full(&env, &params, &kernel).unwrap();
                let reference = enumerate(&env, &params).unwrap();

                let dz = (fields.log_z - reference.log_z).abs();
                assert!(
                    dz <= 1e-10 * fields.log_z.abs().max(1.0),
                    "seed {seed} K {k_steps}: logZ {dz}"
                );
                for k in 0..=k_steps {
                    let law = fields.endpoint_law(k);
                    assert!(
                        max_abs_diff(&law, &reference.endpoint_laws[k]) < 1e-10,
                        "endpoint law k={k}"
                    );
                    let marg = fields.marginal_t(k);
                    assert!(
                        max_abs_diff(&marg, &reference.marginals[k]) < 1e-10,
                        "marginal k={k}"
                    );
                }
                let report = fields.overlaps_and_localization();
                assert!((report.i_t - reference.i_t).abs() < 1e-10);
                assert!((report.j_t - reference.j_t).abs() < 1e-10);
                assert!((report.b_t - reference.b_t).abs() < 1e-10);
                assert!((report.bbar_t - reference.bbar_t).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn beta_zero_partition_function_is_kept_mass() {
        let mut params = tiny_params(4);
        params.beta = 0.0;
        let env = BrownianField::new(1, 8, params.t_final);
        let reference = enumerate(&env, &params).unwrap();
        let kernel = params.build_kernel().unwrap();
        let fields = SolverFields::full(&env, &params, &kernel).unwrap();
        assert!((reference.log_z - fields.free_mass().ln()).abs() < 1e-12);
    }
}
