//! Lazily refined Brownian environment: one independent standard Brownian
//! motion per lattice site, queryable at arbitrary times in `[0, T_max]`.
//!
//! Values are built on a dyadic bridge tree. The value at the midpoint of an
//! already-revealed interval is drawn from the Brownian bridge with
//! randomness keyed by `(master_seed, site, node)`, so every value is a pure
//! function of the seed: re-querying in any order, from any worker, or after
//! a snapshot/reload reproduces identical bits. Arbitrary times are resolved
//! by descending the tree to `depth_max` and linearly bridging the residual,
//! whose variance must stay below `bridge_tol`.

use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SiteKey;
use crate::rng;

const ENV_TAG: u64 = 0x4252_4f57_4e49_414e;
const SNAPSHOT_VERSION: u32 = 1;

/// Read access to a Brownian environment (a concrete field or a rescaled
/// view of one).
pub trait Environment {
    fn dimension(&self) -> usize;

    /// Largest queryable time.
    fn horizon(&self) -> f64;

    /// W_x(t).
    fn value_at(&self, site: &SiteKey, t: f64) -> Result<f64>;

    /// W_x(t2) - W_x(t1).
    fn increment(&self, site: &SiteKey, t1: f64, t2: f64) -> Result<f64> {
        if t2 < t1 {
            return Err(Error::InvalidParams(format!(
                "increment endpoints out of order: {t1} > {t2}"
            )));
        }
        Ok(self.value_at(site, t2)? - self.value_at(site, t1)?)
    }

    /// Diffusively rescaled view: `value_at(view, x, s) = sqrt(a) * value_at(self, x, s/a)`,
    /// with horizon `a * horizon`.
    fn rescaled(&self, a: f64) -> Rescaled<'_, Self>
    where
        Self: Sized,
    {
        assert!(a > 0.0 && a.is_finite(), "scale factor must be positive");
        Rescaled { base: self, a, sqrt_a: a.sqrt() }
    }
}

/// Per-site store of revealed dyadic nodes.
#[derive(Debug, Default)]
struct Track {
    /// Canonical node id -> value. Node `(depth, k)` has time
    /// `T_max * k * 2^-depth`; ids are packed with `k` odd (plus the root).
    nodes: HashMap<u64, f64>,
}

#[inline]
fn node_id(depth: u8, k: u64) -> u64 {
    ((depth as u64) << 56) | k
}

#[inline]
fn inv_pow2(e: u8) -> f64 {
    1.0 / (1u64 << e) as f64
}

/// A field of iid standard Brownian motions indexed by lattice sites.
#[derive(Debug)]
pub struct BrownianField {
    dimension: usize,
    master_seed: u64,
    horizon: f64,
    depth_max: u8,
    /// Nodes at most this deep are memoized; deeper ones are recomputed on
    /// the fly (pure functions of the key, so determinism is unaffected).
    cache_depth: u8,
    /// Residual bridge variance allowed below `depth_max`.
    bridge_tol: f64,
    tracks: Mutex<HashMap<SiteKey, Track>>,
}

impl BrownianField {
    pub const DEFAULT_DEPTH_MAX: u8 = 40;
    pub const DEFAULT_CACHE_DEPTH: u8 = 16;
    pub const DEFAULT_BRIDGE_TOL: f64 = 1e-9;

    pub fn new(dimension: usize, master_seed: u64, horizon: f64) -> Self {
        Self::with_refinement(
            dimension,
            master_seed,
            horizon,
            Self::DEFAULT_DEPTH_MAX,
            Self::DEFAULT_BRIDGE_TOL,
        )
    }

    pub fn with_refinement(
        dimension: usize,
        master_seed: u64,
        horizon: f64,
        depth_max: u8,
        bridge_tol: f64,
    ) -> Self {
        assert!(dimension >= 1, "dimension must be at least 1");
        assert!(horizon > 0.0 && horizon.is_finite(), "horizon must be positive");
        assert!(depth_max >= 1 && depth_max <= 60);
        assert!(bridge_tol > 0.0);
        BrownianField {
            dimension,
            master_seed,
            horizon,
            depth_max,
            cache_depth: Self::DEFAULT_CACHE_DEPTH.min(depth_max),
            bridge_tol,
            tracks: Mutex::new(HashMap::new()),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Pure keyed draw for the node `(depth, k)` of `site`.
    fn node_noise(&self, site: &SiteKey, depth: u8, k: u64) -> f64 {
        let mut key = rng::chain(self.master_seed, ENV_TAG);
        key = rng::chain(key, site.dim() as u64);
        for &c in &site.0 {
            key = rng::chain(key, c as i64 as u64);
        }
        key = rng::chain(key, node_id(depth, k));
        rng::standard_normal(key)
    }

    /// Value at the dyadic descent towards `t`, creating nodes as needed.
    fn descend(&self, track: &mut Track, site: &SiteKey, t: f64) -> Result<f64> {
        let h = self.horizon;
        // Root node (depth 0, k=1): W(T_max) ~ N(0, T_max).
        let root = *track
            .nodes
            .entry(node_id(0, 1))
            .or_insert_with(|| h.sqrt() * self.node_noise(site, 0, 1));
        if t == h {
            return Ok(root);
        }
        // Interval [k, k+1] at depth s, endpoints revealed.
        let mut s: u8 = 0;
        let mut k: u64 = 0;
        let mut t_lo = 0.0;
        let mut t_hi = h;
        let mut v_lo = 0.0;
        let mut v_hi = root;
        while s < self.depth_max {
            let mid = 2 * k + 1; // node at depth s+1, always odd
            let t_mid = h * mid as f64 * inv_pow2(s + 1);
            let sd = (h * inv_pow2(s + 2)).sqrt();
            let bridge = 0.5 * (v_lo + v_hi);
            let v_mid = if s + 1 <= self.cache_depth {
                *track
                    .nodes
                    .entry(node_id(s + 1, mid))
                    .or_insert_with(|| bridge + sd * self.node_noise(site, s + 1, mid))
            } else {
                bridge + sd * self.node_noise(site, s + 1, mid)
            };
            if t == t_mid {
                return Ok(v_mid);
            }
            if t < t_mid {
                k *= 2;
                t_hi = t_mid;
                v_hi = v_mid;
            } else {
                k = 2 * k + 1;
                t_lo = t_mid;
                v_lo = v_mid;
            }
            s += 1;
        }
        // Residual linear bridge below the finest level.
        let len = t_hi - t_lo;
        let residual = (t - t_lo) * (t_hi - t) / len;
        if residual > self.bridge_tol {
            return Err(Error::ResidualVariance {
                depth: self.depth_max,
                residual,
                tol: self.bridge_tol,
            });
        }
        Ok(v_lo + (t - t_lo) / len * (v_hi - v_lo))
    }

    /// Serialize the field header and every memoized sample.
    pub fn snapshot(&self) -> Vec<u8> {
        let tracks = self.tracks.lock().unwrap();
        let mut dumped: Vec<TrackDump> = tracks
            .iter()
            .map(|(site, track)| {
                let mut samples: Vec<(f64, f64)> = track
                    .nodes
                    .iter()
                    .map(|(&id, &v)| {
                        let depth = (id >> 56) as u8;
                        let k = id & ((1u64 << 56) - 1);
                        (self.horizon * k as f64 * inv_pow2(depth), v)
                    })
                    .collect();
                samples.push((0.0, 0.0));
                samples.sort_by(|a, b| a.0.total_cmp(&b.0));
                TrackDump { site: site.0.clone(), samples }
            })
            .collect();
        dumped.sort_by(|a, b| a.site.cmp(&b.site));
        let file = SnapshotFile {
            version: SNAPSHOT_VERSION,
            d: self.dimension,
            master_seed: self.master_seed,
            t_max: self.horizon,
            depth: self.depth_max,
            bridge_tol: self.bridge_tol,
            tracks: dumped,
        };
        serde_json::to_vec(&file).expect("snapshot serialization cannot fail")
    }

    /// Rebuild a field from a snapshot; subsequent queries agree bit-exactly
    /// with the original.
    pub fn load(bytes: &[u8]) -> Result<Self> {
        let file: SnapshotFile = serde_json::from_slice(bytes)
            .map_err(|e| Error::MalformedSnapshot(e.to_string()))?;
        if file.version != SNAPSHOT_VERSION {
            return Err(Error::SnapshotVersion {
                found: file.version,
                expected: SNAPSHOT_VERSION,
            });
        }
        if file.d == 0 || !(file.t_max > 0.0) || file.depth == 0 {
            return Err(Error::MalformedSnapshot("invalid header fields".into()));
        }
        let field = BrownianField::with_refinement(
            file.d,
            file.master_seed,
            file.t_max,
            file.depth,
            file.bridge_tol,
        );
        {
            let mut tracks = field.tracks.lock().unwrap();
            for dump in &file.tracks {
                if dump.site.len() != file.d {
                    return Err(Error::MalformedSnapshot(format!(
                        "site of dimension {} in a d={} field",
                        dump.site.len(),
                        file.d
                    )));
                }
                let mut track = Track::default();
                let mut prev = f64::NEG_INFINITY;
                for &(t, v) in &dump.samples {
                    if !(t >= 0.0 && t <= file.t_max) || t <= prev {
                        return Err(Error::MalformedSnapshot(format!(
                            "sample times not strictly increasing in [0, {}]",
                            file.t_max
                        )));
                    }
                    prev = t;
                    if t == 0.0 {
                        if v != 0.0 {
                            return Err(Error::MalformedSnapshot(
                                "track does not start at (0, 0)".into(),
                            ));
                        }
                        continue;
                    }
                    let (depth, k) = recover_node(t, file.t_max, file.depth).ok_or_else(|| {
                        Error::MalformedSnapshot(format!("sample time {t} is not a refinement node"))
                    })?;
                    track.nodes.insert(node_id(depth, k), v);
                }
                tracks.insert(SiteKey(dump.site.clone()), track);
            }
        }
        Ok(field)
    }
}

/// Find the canonical dyadic node whose time equals `t` bit-for-bit.
fn recover_node(t: f64, t_max: f64, depth_max: u8) -> Option<(u8, u64)> {
    let x = t / t_max;
    for depth in 0..=depth_max {
        let y = x * (1u64 << depth) as f64;
        let k = y.round();
        if k >= 1.0 && (y - k).abs() < 1e-3 {
            let k = k as u64;
            if k % 2 == 1 || (depth == 0 && k == 1) {
                let rebuilt = t_max * k as f64 * inv_pow2(depth);
                if rebuilt.to_bits() == t.to_bits() {
                    return Some((depth, k));
                }
            }
        }
    }
    None
}

impl Environment for BrownianField {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn value_at(&self, site: &SiteKey, t: f64) -> Result<f64> {
        if !t.is_finite() || t < 0.0 || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let t = t.min(self.horizon);
        if t == 0.0 {
            return Ok(0.0);
        }
        debug_assert_eq!(site.dim(), self.dimension, "site dimension mismatch");
        let mut tracks = self.tracks.lock().unwrap();
        let track = tracks.entry(site.clone()).or_default();
        self.descend(track, site, t)
    }
}

/// Diffusively rescaled read-only view of an environment.
pub struct Rescaled<'a, E: Environment> {
    base: &'a E,
    a: f64,
    sqrt_a: f64,
}

impl<E: Environment> Environment for Rescaled<'_, E> {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn horizon(&self) -> f64 {
        self.a * self.base.horizon()
    }

    fn value_at(&self, site: &SiteKey, t: f64) -> Result<f64> {
        Ok(self.sqrt_a * self.base.value_at(site, t / self.a)?)
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    version: u32,
    d: usize,
    master_seed: u64,
    t_max: f64,
    depth: u8,
    bridge_tol: f64,
    tracks: Vec<TrackDump>,
}

#[derive(Serialize, Deserialize)]
struct TrackDump {
    site: Vec<i32>,
    samples: Vec<(f64, f64)>,
}
