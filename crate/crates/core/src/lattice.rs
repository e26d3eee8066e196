//! Lattice sites and finite sup-norm boxes.

use serde::{Deserialize, Serialize};

/// A site of the integer lattice in `d` dimensions.
///
/// Ordering is lexicographic on coordinates; this is the tie-breaking order
/// used when selecting favourite end-points and favourite paths.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteKey(pub Vec<i32>);

impl SiteKey {
    pub fn origin(d: usize) -> Self {
        SiteKey(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Sup-norm distance from the origin.
    pub fn norm_inf(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// l1 distance from the origin.
    pub fn norm_l1(&self) -> i64 {
        self.0.iter().map(|&c| c.abs() as i64).sum()
    }

    /// Unit step along direction `dir` in `0..2d`: axis `dir / 2`, sign
    /// `+1` for even `dir`, `-1` for odd.
    pub fn step(&self, dir: usize) -> SiteKey {
        let mut c = self.0.clone();
        let axis = dir / 2;
        c[axis] += if dir % 2 == 0 { 1 } else { -1 };
        SiteKey(c)
    }

    /// The `2d` nearest neighbours.
    pub fn neighbors(&self) -> Vec<SiteKey> {
        (0..2 * self.dim()).map(|dir| self.step(dir)).collect()
    }
}

impl std::fmt::Display for SiteKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// The centered box `{-R,...,R}^d`, indexed in lexicographic site order
/// (index 0 is `(-R,...,-R)`), with everything outside treated as absorbing.
#[derive(Clone, Debug)]
pub struct LatticeBox {
    d: usize,
    radius: i32,
    side: usize,
    len: usize,
    strides: Vec<usize>,
}

impl LatticeBox {
    pub fn new(d: usize, radius: i32) -> Self {
        assert!(d >= 1, "dimension must be at least 1");
        assert!(radius >= 0, "radius must be nonnegative");
        let side = 2 * radius as usize + 1;
        let len = side.pow(d as u32);
        // Coordinate 0 is the most significant digit, so index order is
        // lexicographic order on coordinates.
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * side;
        }
        LatticeBox { d, radius, side, len, strides }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> i32 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the origin.
    pub fn center(&self) -> usize {
        let mut idx = 0;
        for i in 0..self.d {
            idx += self.radius as usize * self.strides[i];
        }
        idx
    }

    /// Index of `site`, or `None` if it lies outside the box.
    pub fn index(&self, site: &SiteKey) -> Option<usize> {
        if site.dim() != self.d {
            return None;
        }
        let mut idx = 0;
        for (i, &c) in site.0.iter().enumerate() {
            if c.abs() > self.radius {
                return None;
            }
            idx += (c + self.radius) as usize * self.strides[i];
        }
        Some(idx)
    }

    pub fn site(&self, idx: usize) -> SiteKey {
        debug_assert!(idx < self.len);
        let mut c = Vec::with_capacity(self.d);
        let mut rem = idx;
        for i in 0..self.d {
            let digit = rem / self.strides[i];
            rem %= self.strides[i];
            c.push(digit as i32 - self.radius);
        }
        SiteKey(c)
    }

    /// Neighbour of `idx` along `dir` in `0..2d`, or `None` past the edge.
    pub fn neighbor(&self, idx: usize, dir: usize) -> Option<usize> {
        let axis = dir / 2;
        let digit = (idx / self.strides[axis]) % self.side;
        if dir % 2 == 0 {
            if digit + 1 >= self.side {
                None
            } else {
                Some(idx + self.strides[axis])
            }
        } else if digit == 0 {
            None
        } else {
            Some(idx - self.strides[axis])
        }
    }

    /// Sup-norm radius of the site at `idx`.
    pub fn shell(&self, idx: usize) -> i32 {
        let mut rem = idx;
        let mut best = 0;
        for i in 0..self.d {
            let digit = (rem / self.strides[i]) as i32;
            rem %= self.strides[i];
            best = best.max((digit - self.radius).abs());
        }
        best
    }
}
