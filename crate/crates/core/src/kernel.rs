//! One-step transition kernel of the rate-κ simple symmetric walk on a
//! truncated box.
//!
//! The kernel is the Poisson series `p = Σ_j e^{-λ} λ^j / j! · P_box^j` with
//! `λ = κ Δt`, truncated at the smallest order whose Poisson tail is below
//! `kernel_tol`. `P_box` is the jump chain killed at the box edge, so row
//! sums fall short of one by the series tail plus the boundary leak.

use crate::error::{Error, Result};
use crate::lattice::LatticeBox;
use crate::stats;

#[derive(Clone, Debug)]
pub struct StepKernel {
    bounds: LatticeBox,
    order: usize,
    tol: f64,
    /// rows[x] = (target index, p(x, target)), sorted by target.
    rows: Vec<Vec<(u32, f64)>>,
}

impl StepKernel {
    pub fn build(
        bounds: &LatticeBox,
        kappa: f64,
        dt: f64,
        tol: f64,
        order_cap: usize,
    ) -> Result<StepKernel> {
        if !(kappa > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParams("kernel needs kappa > 0 and dt > 0".into()));
        }
        if !(tol > 0.0 && tol <= 1e-6) {
            return Err(Error::InvalidParams(format!(
                "kernel_tol must lie in (0, 1e-6], got {tol}"
            )));
        }
        let lambda = kappa * dt;
        let mut order = 0;
        while stats::poisson_tail_above(lambda, order) >= tol {
            order += 1;
            if order > order_cap {
                return Err(Error::KernelOrderExceeded { required: order, cap: order_cap });
            }
        }

        // Poisson weights c_j = e^{-λ} λ^j / j!.
        let mut weights = Vec::with_capacity(order + 1);
        let mut c = (-lambda).exp();
        weights.push(c);
        for j in 1..=order {
            c *= lambda / j as f64;
            weights.push(c);
        }

        let b = bounds.len();
        let two_d = 2 * bounds.dim();
        let inv = 1.0 / two_d as f64;
        let mut rows = Vec::with_capacity(b);
        let mut cur = vec![0.0f64; b];
        let mut next = vec![0.0f64; b];
        let mut acc = vec![0.0f64; b];
        for x in 0..b {
            cur.iter_mut().for_each(|v| *v = 0.0);
            acc.iter_mut().for_each(|v| *v = 0.0);
            cur[x] = 1.0;
            acc[x] = weights[0];
            for &w in weights.iter().skip(1) {
                next.iter_mut().for_each(|v| *v = 0.0);
                for z in 0..b {
                    let mut s = 0.0;
                    for dir in 0..two_d {
                        if let Some(y) = bounds.neighbor(z, dir) {
                            s += cur[y];
                        }
                    }
                    next[z] = s * inv;
                }
                for z in 0..b {
                    acc[z] += w * next[z];
                }
                std::mem::swap(&mut cur, &mut next);
            }
            let row: Vec<(u32, f64)> = acc
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(y, &v)| (y as u32, v))
                .collect();
            rows.push(row);
        }

        // The operator is symmetric; enforce it exactly by mirroring the
        // lower-index rows over the upper ones.
        for x in 0..b {
            for e in 0..rows[x].len() {
                let (y, p) = rows[x][e];
                let y = y as usize;
                if y > x {
                    let pos = rows[y]
                        .binary_search_by_key(&(x as u32), |&(t, _)| t)
                        .expect("kernel support must be symmetric");
                    rows[y][pos].1 = p;
                }
            }
        }

        Ok(StepKernel { bounds: bounds.clone(), order, tol, rows })
    }

    pub fn bounds(&self) -> &LatticeBox {
        &self.bounds
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.rows[x]
            .binary_search_by_key(&(y as u32), |&(t, _)| t)
            .map(|pos| self.rows[x][pos].1)
            .unwrap_or(0.0)
    }

    pub fn row(&self, x: usize) -> &[(u32, f64)] {
        &self.rows[x]
    }

    pub fn row_sum(&self, x: usize) -> f64 {
        self.rows[x].iter().map(|&(_, p)| p).sum()
    }

    /// dst[x] = Σ_y p(x, y) src[y]. The kernel is symmetric, so this serves
    /// both the forward scatter and the backward gather.
    pub fn apply(&self, src: &[f64], dst: &mut [f64]) {
        debug_assert_eq!(src.len(), self.rows.len());
        debug_assert_eq!(dst.len(), self.rows.len());
        for (x, row) in self.rows.iter().enumerate() {
            let mut s = 0.0;
            for &(y, p) in row {
                s += p * src[y as usize];
            }
            dst[x] = s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_dt_limit_matches_generator() {
        // p(x, y)/Δt → κ/(2d) for neighbours, p(x, x) → 1.
        let bounds = LatticeBox::new(1, 5);
        let dt = 1e-4;
        let kappa = 1.3;
        let k = StepKernel::build(&bounds, kappa, dt, 1e-8, 64).unwrap();
        let c = bounds.center();
        assert!((k.entry(c, c) - 1.0).abs() < 2.0 * kappa * dt);
        for dir in 0..2 {
            let n = bounds.neighbor(c, dir).unwrap();
            let rate = k.entry(c, n) / dt;
            let expected = kappa / 2.0;
            assert!(
                (rate - expected).abs() / expected < 0.01,
                "rate {rate} vs {expected}"
            );
        }
    }

    #[test]
    fn symmetric_exactly() {
        for d in 1..=3 {
            let bounds = LatticeBox::new(d, 2);
            let k = StepKernel::build(&bounds, 0.9, 0.05, 1e-8, 64).unwrap();
            let mut worst: f64 = 0.0;
            for x in 0..bounds.len() {
                for &(y, p) in k.row(x) {
                    worst = worst.max((p - k.entry(y as usize, x)).abs());
                }
            }
            assert_eq!(worst, 0.0, "d={d}");
        }
    }

    #[test]
    fn row_sum_deficit_within_tol_against_matrix_exponential() {
        // Tiny box: compare against exp(λ (P_box - I)) summed to convergence.
        let bounds = LatticeBox::new(1, 3);
        let kappa = 1.0;
        let dt = 0.05;
        let tol = 1e-8;
        let k = StepKernel::build(&bounds, kappa, dt, tol, 64).unwrap();
        let b = bounds.len();
        let lambda = kappa * dt;

        // Dense matrix exponential by plain series, run far past the cap.
        let mut p_box = vec![vec![0.0f64; b]; b];
        for x in 0..b {
            for dir in 0..2 {
                if let Some(y) = bounds.neighbor(x, dir) {
                    p_box[x][y] = 0.5;
                }
            }
        }
        let mut expm = vec![vec![0.0f64; b]; b];
        let mut term = vec![vec![0.0f64; b]; b];
        for x in 0..b {
            term[x][x] = 1.0;
            expm[x][x] = (-lambda).exp();
        }
        let mut coeff = (-lambda).exp();
        for j in 1..=60 {
            // term <- term * P_box
            let mut nt = vec![vec![0.0f64; b]; b];
            for x in 0..b {
                for y in 0..b {
                    if term[x][y] != 0.0 {
                        for z in 0..b {
                            if p_box[y][z] != 0.0 {
                                nt[x][z] += term[x][y] * p_box[y][z];
                            }
                        }
                    }
                }
            }
            term = nt;
            coeff *= lambda / j as f64;
            for x in 0..b {
                for y in 0..b {
                    expm[x][y] += coeff * term[x][y];
                }
            }
        }

        let c = bounds.center();
        let exact_sum: f64 = expm[c].iter().sum();
        let built_sum = k.row_sum(c);
        // Both sides kill at the edge, so they differ by the series tail only.
        assert!(exact_sum - built_sum >= 0.0);
        assert!(exact_sum - built_sum < tol, "deficit {}", exact_sum - built_sum);
        for y in 0..b {
            assert!((k.entry(c, y) - expm[c][y]).abs() < tol, "entry {y}");
        }
    }

    #[test]
    fn order_cap_rejects_large_steps() {
        let bounds = LatticeBox::new(1, 2);
        let err = StepKernel::build(&bounds, 100.0, 1.0, 1e-8, 16).unwrap_err();
        assert!(matches!(err, Error::KernelOrderExceeded { .. }));
    }

    #[test]
    fn single_site_box_keeps_survival_weight() {
        let bounds = LatticeBox::new(1, 0);
        let k = StepKernel::build(&bounds, 2.0, 0.25, 1e-8, 64).unwrap();
        assert_eq!(k.row(0).len(), 1);
        assert!((k.entry(0, 0) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rows_nonnegative_and_substochastic() {
        let bounds = LatticeBox::new(2, 3);
        let k = StepKernel::build(&bounds, 1.5, 0.1, 1e-8, 64).unwrap();
        for x in 0..bounds.len() {
            let sum = k.row_sum(x);
            assert!(sum <= 1.0 + 1e-12, "row {x} sums to {sum}");
            for &(_, p) in k.row(x) {
                assert!(p >= 0.0);
            }
        }
    }
}
