//! Experiment configuration: JSON or TOML on disk, flag overrides on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use polymerlab_core::SolverParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Generate an environment, snapshot, reload, audit bit equality.
    Env,
    /// Rate tables, variational free energy and jump-density maximizer.
    FreeEnergy,
    /// Overlaps and localization fractions along a disorder-strength grid.
    OverlapCurve,
    /// Per-seed overlap reports and favourite trajectories at one point.
    Localization,
    /// Ground-state growth constant study.
    GroundState,
    /// Empirical versus predicted jump-count rate function.
    Ldp,
    /// The full identity-check suite.
    Check,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub d: usize,
    pub kappa: f64,
    pub beta: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Box radius; derived from (κ, β, T) when absent.
    pub radius: Option<i32>,
    pub kernel_tol: f64,
    pub kernel_order_cap: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            d: 1,
            kappa: 1.0,
            beta: 1.0,
            t_final: 5.0,
            dt: 0.01,
            radius: None,
            kernel_tol: 1e-8,
            kernel_order_cap: 64,
        }
    }
}

impl SolverSection {
    pub fn params(&self) -> SolverParams {
        self.params_at_beta(self.beta)
    }

    pub fn params_at_beta(&self, beta: f64) -> SolverParams {
        SolverParams {
            d: self.d,
            kappa: self.kappa,
            beta,
            t_final: self.t_final,
            dt: self.dt,
            radius: self
                .radius
                .unwrap_or_else(|| SolverParams::auto_radius(self.kappa, beta, self.t_final)),
            kernel_tol: self.kernel_tol,
            kernel_order_cap: self.kernel_order_cap,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    /// Paths per partition-function estimate.
    pub m_z: usize,
    /// Paths per replica-overlap estimate (pairwise cost is quadratic).
    pub m_overlap: usize,
    /// Conditioned paths per Γ estimate.
    pub m_gamma: usize,
    pub smc_checkpoints: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { m_z: 20_000, m_overlap: 1_500, m_gamma: 600, smc_checkpoints: 50 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub beta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    /// Rescaling factors for scaling checks (kept at powers of two so the
    /// time mapping is exact in floating point).
    pub a_grid: Vec<f64>,
    pub beta2_over_kappa_grid: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            beta_grid: vec![0.5, 1.0],
            r_grid: (1..=14).map(|i| i as f64 * 0.25).collect(),
            a_grid: vec![0.25, 4.0],
            beta2_over_kappa_grid: vec![1.0, 4.0, 16.0, 64.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundStateSection {
    pub n_list: Vec<usize>,
    pub k_per_unit: usize,
    /// Horizon for Γ estimates.
    pub gamma_t: f64,
}

impl Default for GroundStateSection {
    fn default() -> Self {
        GroundStateSection { n_list: vec![2, 4, 8, 16], k_per_unit: 8, gamma_t: 4.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    /// Exact identities (scaling, sandwich, oracle equivalence).
    pub exact_scaling: f64,
    pub exact_sandwich: f64,
    pub exact_oracle: f64,
    pub consistency: f64,
    /// Statistical identities.
    pub ito_rel: f64,
    pub ibp_rel: f64,
    pub se_sigmas: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection {
            exact_scaling: 1e-9,
            exact_sandwich: 1e-12,
            exact_oracle: 1e-10,
            consistency: 1e-8,
            ito_rel: 0.02,
            ibp_rel: 0.05,
            se_sigmas: 3.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// Explicit environment seeds; when absent they are derived from
    /// `(master_seed, index)` for `seed_count` indices.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default = "default_seed_count")]
    pub seed_count: usize,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub grids: GridSection,
    #[serde(default)]
    pub ground_state: GroundStateSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Gate the exit code on statistical checks too.
    #[serde(default)]
    pub strict: bool,
}

fn default_master_seed() -> u64 {
    0x504f_4c59
}

fn default_seed_count() -> usize {
    100
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn minimal(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            master_seed: default_master_seed(),
            seeds: None,
            seed_count: default_seed_count(),
            solver: SolverSection::default(),
            sampler: SamplerSection::default(),
            grids: GridSection::default(),
            ground_state: GroundStateSection::default(),
            tolerances: ToleranceSection::default(),
            out_dir: default_out_dir(),
            threads: None,
            strict: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: ExperimentConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)
                .with_context(|| format!("schema error in {}", path.display()))?,
            Some("toml") => toml::from_str(&text)
                .with_context(|| format!("schema error in {}", path.display()))?,
            other => bail!(
                "config {} must end in .json or .toml (got {:?})",
                path.display(),
                other
            ),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(seeds) = &self.seeds {
            if seeds.is_empty() {
                bail!("explicit seed list must not be empty");
            }
            let mut sorted = seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != seeds.len() {
                bail!("environment seeds must be distinct");
            }
        } else if self.seed_count == 0 {
            bail!("seed_count must be positive");
        }
        if self.grids.beta_grid.is_empty()
            || self.grids.r_grid.is_empty()
            || self.grids.a_grid.is_empty()
            || self.grids.beta2_over_kappa_grid.is_empty()
        {
            bail!("grids must not be empty");
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("exact_scaling", t.exact_scaling),
            ("exact_sandwich", t.exact_sandwich),
            ("exact_oracle", t.exact_oracle),
            ("consistency", t.consistency),
            ("ito_rel", t.ito_rel),
            ("ibp_rel", t.ibp_rel),
            ("se_sigmas", t.se_sigmas),
        ] {
            if !(v > 0.0) {
                bail!("tolerance {name} must be positive, got {v}");
            }
        }
        self.solver
            .params()
            .validate()
            .map_err(|e| anyhow::anyhow!("solver section: {e}"))?;
        Ok(())
    }

    /// Environment seeds for this run.
    pub fn env_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(list) => list.clone(),
            None => (0..self.seed_count)
                .map(|i| polymerlab_core::rng::env_seed(self.master_seed, i as u64))
                .collect(),
        }
    }
}
