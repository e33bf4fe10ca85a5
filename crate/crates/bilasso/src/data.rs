//! Domain types shared by the sampler, the selection machinery, and the CLI.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Genotype matrix X (n×d) and phenotype matrix Y (n×c).
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array2<f64>,
}

impl Dataset {
    /// Strict constructor: every X entry must be one of {0, 1, 2}.
    pub fn new(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if let Some(((l, j), &v)) = x.indexed_iter().find(|(_, &v)| v != 0.0 && v != 1.0 && v != 2.0)
        {
            return Err(Error::InvalidData(format!(
                "X[{l},{j}] = {v} is not a genotype count in {{0,1,2}}; \
                 use the relaxed constructor for general covariates"
            )));
        }
        Self::new_relaxed(x, y)
    }

    /// Relaxed constructor: arbitrary real covariates (e.g. standardized X).
    pub fn new_relaxed(x: Array2<f64>, y: Array2<f64>) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but Y has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.nrows() == 0 || x.ncols() == 0 || y.ncols() == 0 {
            return Err(Error::InvalidData("n, d, c must all be at least 1".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry in X or Y".into()));
        }
        Ok(Self { x, y })
    }

    /// Center and scale each X column to mean 0, variance 1. Constant
    /// columns are left centered only. Returns a relaxed dataset.
    pub fn standardize_columns(mut self) -> Self {
        let n = self.x.nrows() as f64;
        for mut col in self.x.columns_mut() {
            let mean = col.sum() / n;
            col.mapv_inplace(|v| v - mean);
            let sd = (col.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                col.mapv_inplace(|v| v / sd);
            }
        }
        self
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn c(&self) -> usize {
        self.y.ncols()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn y(&self) -> ArrayView2<'_, f64> {
        self.y.view()
    }
}

/// One Markov-chain state.
#[derive(Debug, Clone)]
pub struct ModelState {
    /// d×c coefficient matrix.
    pub w: Array2<f64>,
    /// Per-group scale variables τ_k², length K.
    pub tau2: Vec<f64>,
    /// Per-SNP scale variables ω_i², length d.
    pub omega2: Vec<f64>,
    pub sigma2: f64,
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
}

impl ModelState {
    /// Prior precision d_i = 1/τ²_{k(i)} + 1/ω_i² for SNP i.
    pub fn prior_precision(&self, group_of_i: usize, i: usize) -> f64 {
        1.0 / self.tau2[group_of_i] + 1.0 / self.omega2[i]
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !self.tau2.iter().all(|&v| pos(v))
            || !self.omega2.iter().all(|&v| pos(v))
            || !pos(self.sigma2)
            || !pos(self.lambda1_sq)
            || !pos(self.lambda2_sq)
        {
            return Err(Error::InvalidParameter(
                "all scale variables must be finite and strictly positive".into(),
            ));
        }
        if self.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite entry in W".into()));
        }
        Ok(())
    }
}

/// Shape/rate parameters for the inverse-Gamma prior on σ² and the Gamma
/// hyperpriors on λ₁², λ₂² used by the fully-Bayes mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorConfig {
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub r1: f64,
    pub delta1: f64,
    pub r2: f64,
    pub delta2: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            a_sigma: 2.0,
            b_sigma: 1.0,
            r1: 1.0,
            delta1: 0.1,
            r2: 1.0,
            delta2: 0.1,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a_sigma,
            self.b_sigma,
            self.r1,
            self.delta1,
            self.r2,
            self.delta2,
        ];
        if all.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "all prior parameters must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Stored post-burn-in, thinned draws plus the per-draw per-observation
/// log densities log p(y_ℓ | W, σ²) needed for WAIC.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: Vec<ModelState>,
    /// `obs_log_density[s][l]` = log p(y_ℓ | W⁽ˢ⁾, σ²⁽ˢ⁾).
    pub obs_log_density: Vec<Vec<f64>>,
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub stream_id: u64,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}
