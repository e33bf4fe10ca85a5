//! Tuning-parameter selection: WAIC with grid search, and the closed-form
//! marginal-likelihood approximation surface.
//!
//! WAIC = −2·lppd + 2·p_waic with
//! lppd = Σ_ℓ log( meanₛ p(y_ℓ | W⁽ˢ⁾, σ²⁽ˢ⁾) ) and
//! p_waic = Σ_ℓ varₛ( log p(y_ℓ | W⁽ˢ⁾, σ²⁽ˢ⁾) ).
//!
//! The marginal-likelihood approximation plugs the prior means
//! E[τ_k²] = (m_kc+1)/λ₁² and E[ω_i²] = (c+1)/λ₂² into the Gaussian
//! marginal of Y, giving (on the log scale)
//!
//! log p(Y|λ₁²,λ₂²) ≈ −(nc/2)log 2π + a_σ log b_σ + logΓ(nc/2+a_σ)
//!   − logΓ(a_σ) − ½log|B| − (nc/2+a_σ)·log(b_σ + ½YᵀB⁻¹Y)
//!
//! with B = I_c ⊗ (XAXᵀ + I_n) and A = Diag{(λ₂²/(c+1) + λ₁²/(m_{k(i)}c+1))⁻¹}.
//! The Kronecker structure reduces everything to one n×n (or, via the
//! Woodbury identity when d < n, one d×d) factorization shared by the c
//! phenotype columns.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::data::{ChainOutput, Dataset, PriorConfig};
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, GibbsConfig, LambdaMode};
use crate::groups::GroupStructure;
use crate::linalg::{chol_solve, cholesky_jitter, log_det_from_chol};
use crate::rng::SeededStream;

/// Candidate grid of (λ₁², λ₂²) values; each axis sorted strictly increasing.
#[derive(Debug, Clone)]
pub struct LambdaGrid {
    values1: Vec<f64>,
    values2: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values1: Vec<f64>, values2: Vec<f64>) -> Result<Self> {
        for (name, v) in [("values1", &values1), ("values2", &values2)] {
            if v.is_empty() {
                return Err(Error::InvalidParameter(format!("{name} is empty")));
            }
            if v.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly positive"
                )));
            }
            if v.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be strictly increasing"
                )));
            }
        }
        Ok(Self { values1, values2 })
    }

    /// n log-spaced points covering [lo, hi] on each axis.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0) || hi <= lo || n < 1 {
            return Err(Error::InvalidParameter(
                "log grid needs 0 < lo < hi and n >= 1".into(),
            ));
        }
        let vals: Vec<f64> = if n == 1 {
            vec![lo]
        } else {
            (0..n)
                .map(|i| {
                    (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp()
                })
                .collect()
        };
        Self::new(vals.clone(), vals)
    }

    /// The 15×15 log-spaced default covering [10⁻², 10³].
    pub fn default_grid() -> Self {
        Self::log_spaced(1e-2, 1e3, 15).unwrap()
    }

    pub fn values1(&self) -> &[f64] {
        &self.values1
    }

    pub fn values2(&self) -> &[f64] {
        &self.values2
    }

    /// All points in lexicographic (λ₁², λ₂²) order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.values1
            .iter()
            .flat_map(|&a| self.values2.iter().map(move |&b| (a, b)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.values1.len() * self.values2.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// lppd, p_waic, and WAIC from the stored per-draw per-observation log
/// densities of a chain. lppd uses log-sum-exp; p_waic uses the S−1 sample
/// variance.
pub fn waic_from_chain(chain: &ChainOutput) -> Result<(f64, f64, f64)> {
    waic_from_log_densities(&chain.obs_log_density)
}

/// Same computation from a raw S×n table of log densities.
pub fn waic_from_log_densities(log_dens: &[Vec<f64>]) -> Result<(f64, f64, f64)> {
    let s = log_dens.len();
    if s < 2 {
        return Err(Error::EmptyChain(format!(
            "WAIC needs at least 2 draws, got {s}"
        )));
    }
    let n = log_dens[0].len();
    if log_dens.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(
            "ragged log-density table".into(),
        ));
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for l in 0..n {
        let col = log_dens.iter().map(|row| row[l]);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = col.clone().map(|v| (v - max).exp()).sum();
        lppd += max + (sum_exp / s as f64).ln();
        let mean = col.clone().sum::<f64>() / s as f64;
        p_waic += col.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1) as f64;
    }
    Ok((lppd, p_waic, -2.0 * lppd + 2.0 * p_waic))
}

#[derive(Debug, Clone)]
pub struct WaicRow {
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
    pub lppd: f64,
    pub p_waic: f64,
    pub waic: f64,
    /// Sampler failure at this grid point, excluded from the argmin.
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct WaicTable {
    pub rows: Vec<WaicRow>,
    argmin: Option<usize>,
}

impl WaicTable {
    fn from_rows(rows: Vec<WaicRow>) -> Self {
        // rows are in lexicographic grid order; strict < keeps the first
        // (smallest-λ) minimizer on ties
        let mut argmin = None;
        for (i, row) in rows.iter().enumerate() {
            if row.error.is_some() {
                continue;
            }
            match argmin {
                None => argmin = Some(i),
                Some(j) if row.waic < rows[j].waic => argmin = Some(i),
                _ => {}
            }
        }
        Self { rows, argmin }
    }

    pub fn argmin(&self) -> Option<&WaicRow> {
        self.argmin.map(|i| &self.rows[i])
    }
}

/// One fixed-λ chain per grid point, in parallel with per-point RNG
/// substreams; the table is assembled in grid order independent of
/// scheduling.
pub fn waic_grid_search(
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
    grid: &LambdaGrid,
    gibbs_config: &GibbsConfig,
    seed: u64,
    stream_base: u64,
) -> Result<WaicTable> {
    let points = grid.points();
    let rows: Vec<WaicRow> = points
        .par_iter()
        .enumerate()
        .map(|(idx, &(l1, l2))| {
            let config = GibbsConfig {
                mode: LambdaMode::FixedLambda,
                lambda1_sq: l1,
                lambda2_sq: l2,
                ..gibbs_config.clone()
            };
            let mut stream = SeededStream::new(seed, stream_base + idx as u64);
            match run_chain(data, groups, prior, &config, &mut stream)
                .and_then(|chain| waic_from_chain(&chain))
            {
                Ok((lppd, p_waic, waic)) => WaicRow {
                    lambda1_sq: l1,
                    lambda2_sq: l2,
                    lppd,
                    p_waic,
                    waic,
                    error: None,
                },
                Err(e) => WaicRow {
                    lambda1_sq: l1,
                    lambda2_sq: l2,
                    lppd: f64::NAN,
                    p_waic: f64::NAN,
                    waic: f64::NAN,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(WaicTable::from_rows(rows))
}

fn a_diag(
    groups: &GroupStructure,
    c: usize,
    lambda1_sq: f64,
    lambda2_sq: f64,
) -> Array1<f64> {
    (0..groups.num_snps())
        .map(|i| {
            let m_k = groups.size(groups.group_of(i));
            1.0 / (lambda2_sq / (c + 1) as f64 + lambda1_sq / (m_k * c + 1) as f64)
        })
        .collect()
}

/// Log of the plug-in marginal-likelihood approximation.
pub fn ml_approx(
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
    lambda1_sq: f64,
    lambda2_sq: f64,
) -> Result<f64> {
    ml_approx_cached(data, groups, prior, lambda1_sq, lambda2_sq, None)
}

/// `xtx` may carry a precomputed XᵀX for the d ≤ n Woodbury path.
fn ml_approx_cached(
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
    lambda1_sq: f64,
    lambda2_sq: f64,
    xtx: Option<&Array2<f64>>,
) -> Result<f64> {
    if !(lambda1_sq > 0.0) || !(lambda2_sq > 0.0) {
        return Err(Error::InvalidParameter(
            "lambda1_sq and lambda2_sq must be strictly positive".into(),
        ));
    }
    prior.validate()?;
    if data.d() != groups.num_snps() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns but the group structure covers {} SNPs",
            data.d(),
            groups.num_snps()
        )));
    }
    let (n, d, c) = (data.n(), data.d(), data.c());
    let a = a_diag(groups, c, lambda1_sq, lambda2_sq);
    let x = data.x();
    let y = data.y();

    // log|XAXᵀ + I_n| and the c quadratic forms y⁽ʲ⁾ᵀ(XAXᵀ + I_n)⁻¹y⁽ʲ⁾,
    // on whichever side of n and d is smaller
    let (log_det_core, quad_sum) = if d <= n {
        // Woodbury: |XAXᵀ+I_n| = |A^{1/2}XᵀXA^{1/2} + I_d| and
        // yᵀ(XAXᵀ+I)⁻¹y = yᵀy − vᵀG⁻¹v with v = A^{1/2}Xᵀy
        let sqrt_a = a.mapv(f64::sqrt);
        let owned;
        let xtx = match xtx {
            Some(m) => m,
            None => {
                owned = x.t().dot(&x);
                &owned
            }
        };
        let mut g = xtx.clone();
        for i in 0..d {
            for j in 0..d {
                g[[i, j]] *= sqrt_a[i] * sqrt_a[j];
            }
            g[[i, i]] += 1.0;
        }
        let l = cholesky_jitter(&g)?;
        let xty = x.t().dot(&y);
        let mut quad_sum = 0.0;
        for j in 0..c {
            let v = &xty.column(j).to_owned() * &sqrt_a;
            let solved = chol_solve(&l, v.view());
            let y_ss: f64 = y.column(j).iter().map(|v| v * v).sum();
            quad_sum += y_ss - v.dot(&solved);
        }
        (log_det_from_chol(&l), quad_sum)
    } else {
        // direct n×n: XAXᵀ + I_n = (X√A)(X√A)ᵀ + I_n
        let sqrt_a = a.mapv(f64::sqrt);
        let xa = &x.to_owned() * &sqrt_a; // scales columns
        let mut b1 = xa.dot(&xa.t());
        for i in 0..n {
            b1[[i, i]] += 1.0;
        }
        let l = cholesky_jitter(&b1)?;
        let mut quad_sum = 0.0;
        for j in 0..c {
            let yj = y.column(j);
            quad_sum += yj.dot(&chol_solve(&l, yj));
        }
        (log_det_from_chol(&l), quad_sum)
    };

    let nc2 = (n * c) as f64 / 2.0;
    Ok(-nc2 * (2.0 * std::f64::consts::PI).ln()
        + prior.a_sigma * prior.b_sigma.ln()
        + ln_gamma(nc2 + prior.a_sigma)
        - ln_gamma(prior.a_sigma)
        - 0.5 * c as f64 * log_det_core
        - (nc2 + prior.a_sigma) * (prior.b_sigma + 0.5 * quad_sum).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryFlag {
    /// The argmax lies strictly inside the grid.
    Interior,
    /// The argmax lies on the grid boundary.
    Boundary,
    /// Every grid point ties (up to relative 1e-12).
    Tie,
}

#[derive(Debug, Clone)]
pub struct MlSurface {
    /// (λ₁², λ₂², log value) in lexicographic grid order.
    pub rows: Vec<(f64, f64, f64)>,
    pub argmax: (f64, f64, f64),
    pub boundary: BoundaryFlag,
}

impl MlSurface {
    /// max − min of the log surface.
    pub fn range(&self) -> f64 {
        let max = self.rows.iter().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
        let min = self.rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
        max - min
    }
}

/// Evaluate the log marginal-likelihood approximation over a grid.
pub fn ml_surface(
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
    grid: &LambdaGrid,
) -> Result<MlSurface> {
    let xtx = if data.d() <= data.n() {
        Some(data.x().t().dot(&data.x()))
    } else {
        None
    };
    let points = grid.points();
    let rows: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|&(l1, l2)| {
            ml_approx_cached(data, groups, prior, l1, l2, xtx.as_ref()).map(|v| (l1, l2, v))
        })
        .collect::<Result<_>>()?;

    let n2 = grid.values2.len();
    let mut best = 0usize;
    for (i, row) in rows.iter().enumerate() {
        if row.2 > rows[best].2 {
            best = i;
        }
    }
    let max = rows[best].2;
    let min = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let boundary = if (max - min).abs() <= 1e-12 * (1.0 + max.abs()) {
        BoundaryFlag::Tie
    } else {
        let (i1, i2) = (best / n2, best % n2);
        let on_edge = i1 == 0
            || i1 == grid.values1.len() - 1
            || i2 == 0
            || i2 == n2 - 1;
        if on_edge {
            BoundaryFlag::Boundary
        } else {
            BoundaryFlag::Interior
        }
    };
    Ok(MlSurface {
        argmax: rows[best],
        rows,
        boundary,
    })
}
