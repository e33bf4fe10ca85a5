//! Synthetic data generator.
//!
//! Uses the independent-Gamma perturbation of the scale priors:
//! τ_k² ~ Gamma((m_kc+1)/2, λ₁²/2) and ω_i² ~ Gamma((c+1)/2, λ₂²/2),
//! then w_ij ~ N(0, σ²(1/τ²_{k(i)} + 1/ω_i²)⁻¹), X uniform on {0,1,2},
//! and Y row-wise N_c(Wᵀx_ℓ, σ²I_c).

use ndarray::Array2;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::rng::SeededStream;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: usize,
    pub d: usize,
    /// Number of equal-sized groups; must divide `d`.
    pub num_groups: usize,
    pub c: usize,
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
    pub sigma2: f64,
    pub seed: u64,
}

impl SimConfig {
    /// n=500, d=200, K=20, c=5, λ₁²=λ₂²=2, σ²=2.
    pub fn case1(seed: u64) -> Self {
        Self {
            n: 500,
            d: 200,
            num_groups: 20,
            c: 5,
            lambda1_sq: 2.0,
            lambda2_sq: 2.0,
            sigma2: 2.0,
            seed,
        }
    }

    /// n=500, d=1500, K=150, c=5, λ₁²=λ₂²=2, σ²=2.
    pub fn case2(seed: u64) -> Self {
        Self {
            d: 1500,
            num_groups: 150,
            ..Self::case1(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.num_groups == 0 || self.c == 0 {
            return Err(Error::InvalidParameter(
                "n, d, K, c must all be positive".into(),
            ));
        }
        if self.d % self.num_groups != 0 {
            return Err(Error::InvalidParameter(format!(
                "K = {} must divide d = {}",
                self.num_groups, self.d
            )));
        }
        for (name, v) in [
            ("lambda1_sq", self.lambda1_sq),
            ("lambda2_sq", self.lambda2_sq),
            ("sigma2", self.sigma2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Simulation output: data, group structure, and all ground truth.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub data: Dataset,
    pub groups: GroupStructure,
    pub w_true: Array2<f64>,
    pub tau2_true: Vec<f64>,
    pub omega2_true: Vec<f64>,
}

pub fn simulate(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let mut stream = SeededStream::new(config.seed, 0);
    simulate_with_stream(config, &mut stream)
}

/// Same generator on a caller-provided stream (for substream control).
pub fn simulate_with_stream(config: &SimConfig, stream: &mut SeededStream) -> Result<SimOutput> {
    config.validate()?;
    let groups = GroupStructure::equal_sizes(config.d, config.num_groups)?;
    let c = config.c as f64;

    let tau2_true: Vec<f64> = (0..groups.num_groups())
        .map(|k| {
            let m_k = groups.size(k) as f64;
            stream.draw_gamma((m_k * c + 1.0) / 2.0, config.lambda1_sq / 2.0)
        })
        .collect::<Result<_>>()?;
    let omega2_true: Vec<f64> = (0..config.d)
        .map(|_| stream.draw_gamma((c + 1.0) / 2.0, config.lambda2_sq / 2.0))
        .collect::<Result<_>>()?;

    let mut w_true = Array2::<f64>::zeros((config.d, config.c));
    for i in 0..config.d {
        let prec = 1.0 / tau2_true[groups.group_of(i)] + 1.0 / omega2_true[i];
        let sd = (config.sigma2 / prec).sqrt();
        for j in 0..config.c {
            w_true[[i, j]] = sd * stream.standard_normal();
        }
    }

    let x = Array2::from_shape_fn((config.n, config.d), |_| stream.genotype());
    let mean = x.dot(&w_true);
    let noise_sd = config.sigma2.sqrt();
    let y = Array2::from_shape_fn((config.n, config.c), |(l, j)| {
        mean[[l, j]] + noise_sd * stream.standard_normal()
    });

    Ok(SimOutput {
        data: Dataset::new(x, y)?,
        groups,
        w_true,
        tau2_true,
        omega2_true,
    })
}
