//! Exact log-density evaluations and the two penalty norms.

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::scalar::Real;

fn check_dims<S: Real>(
    y: ArrayView2<S>,
    x: ArrayView2<S>,
    w: ArrayView2<S>,
) -> Result<()> {
    if x.nrows() != y.nrows() || x.ncols() != w.nrows() || w.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "Y is {}x{}, X is {}x{}, W is {}x{}",
            y.nrows(),
            y.ncols(),
            x.nrows(),
            x.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    Ok(())
}

fn check_positive<S: Real>(name: &str, v: S) -> Result<()> {
    if !(v > S::zero()) || !v.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} must be strictly positive, got {v}"
        )));
    }
    Ok(())
}

/// Gaussian log likelihood Σ_ℓ log N_c(y_ℓ; Wᵀx_ℓ, σ²I_c)
/// = −(nc/2)·log(2πσ²) − ‖Y − XW‖²_F / (2σ²).
pub fn log_likelihood<S: Real>(
    y: ArrayView2<S>,
    x: ArrayView2<S>,
    w: ArrayView2<S>,
    sigma2: S,
) -> Result<S> {
    check_dims(y, x, w)?;
    check_positive("sigma2", sigma2)?;
    let nc = S::from_usize(y.len()).unwrap();
    let rss = residual_ss(y, x, w);
    let two = S::from_f64_c(2.0);
    let two_pi = S::from_f64_c(2.0 * std::f64::consts::PI);
    Ok(-(nc / two) * (two_pi * sigma2).ln() - rss / (two * sigma2))
}

/// ‖Y − XW‖²_F.
pub fn residual_ss<S: Real>(y: ArrayView2<S>, x: ArrayView2<S>, w: ArrayView2<S>) -> S {
    let resid = &y - &x.dot(&w);
    resid.iter().map(|&v| v * v).sum()
}

/// Per-observation log densities log p(y_ℓ | W, σ²), length n.
pub fn obs_log_densities<S: Real>(
    y: ArrayView2<S>,
    x: ArrayView2<S>,
    w: ArrayView2<S>,
    sigma2: S,
) -> Result<Array1<S>> {
    check_dims(y, x, w)?;
    check_positive("sigma2", sigma2)?;
    let c = S::from_usize(y.ncols()).unwrap();
    let two = S::from_f64_c(2.0);
    let two_pi = S::from_f64_c(2.0 * std::f64::consts::PI);
    let norm_const = -(c / two) * (two_pi * sigma2).ln();
    let resid = &y - &x.dot(&w);
    Ok(resid
        .rows()
        .into_iter()
        .map(|r| norm_const - r.iter().map(|&v| v * v).sum::<S>() / (two * sigma2))
        .collect())
}

/// The two penalty norms: g21 = Σ_k ‖W_{π_k,·}‖_F and l21 = Σ_i ‖W_{i,·}‖₂.
pub fn penalty_norms<S: Real>(
    w: ArrayView2<S>,
    groups: &GroupStructure,
) -> Result<(S, S)> {
    if w.nrows() != groups.num_snps() {
        return Err(Error::DimensionMismatch(format!(
            "W has {} rows but the group structure covers {} SNPs",
            w.nrows(),
            groups.num_snps()
        )));
    }
    let row_ss: Vec<S> = w
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| v * v).sum())
        .collect();
    let l21 = row_ss.iter().map(|&s| s.sqrt()).sum();
    let g21 = (0..groups.num_groups())
        .map(|k| {
            groups
                .members(k)
                .iter()
                .map(|&i| row_ss[i])
                .sum::<S>()
                .sqrt()
        })
        .sum();
    Ok((g21, l21))
}

/// Log of the marginal posterior [W | Y, σ², λ₁², λ₂²] up to an additive
/// constant:
/// −‖Y − XW‖²_F/(2σ²) − (λ₁/σ)‖W‖_{G2,1} − (λ₂/σ)‖W‖_{ℓ2,1}.
/// Its maximizer is the penalized estimator with γᵢ = 2σλᵢ.
pub fn log_marginal_posterior_w<S: Real>(
    y: ArrayView2<S>,
    x: ArrayView2<S>,
    w: ArrayView2<S>,
    sigma2: S,
    lambda1_sq: S,
    lambda2_sq: S,
    groups: &GroupStructure,
) -> Result<S> {
    check_dims(y, x, w)?;
    check_positive("sigma2", sigma2)?;
    check_positive("lambda1_sq", lambda1_sq)?;
    check_positive("lambda2_sq", lambda2_sq)?;
    let (g21, l21) = penalty_norms(w, groups)?;
    let sigma = sigma2.sqrt();
    let two = S::from_f64_c(2.0);
    Ok(-residual_ss(y, x, w) / (two * sigma2)
        - lambda1_sq.sqrt() / sigma * g21
        - lambda2_sq.sqrt() / sigma * l21)
}
