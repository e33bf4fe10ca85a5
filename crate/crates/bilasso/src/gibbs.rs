//! Gibbs sampler over (W, τ², ω², σ²), with λ₁², λ₂² either held fixed or
//! sampled under Gamma hyperpriors (fully Bayes).
//!
//! Full conditionals, with d_i = 1/τ²_{k(i)} + 1/ω_i²:
//!
//! * columns of W: w⁽ʲ⁾ ~ N(M⁻¹Xᵀy⁽ʲ⁾, σ²M⁻¹), M = XᵀX + Diag(d_i)
//! * τ_k²: GIG(½, λ₁², S_k/σ²) with S_k = Σ_{i∈π_k}‖W_{i,·}‖²; sampled via
//!   1/τ_k² ~ InverseGaussian(√(λ₁²σ²/S_k), λ₁²), with the exact
//!   Gamma(½, λ₁²/2) limit when S_k vanishes
//! * ω_i²: same with s_i = ‖W_{i,·}‖² and λ₂²
//! * σ²: InvGamma(a_σ + nc/2 + dc/2, b_σ + ½‖Y−XW‖²_F + ½Σᵢ dᵢ‖W_{i,·}‖²)
//! * λ₁² ~ Gamma(r₁ + Σ_k(m_kc+1)/2, δ₁ + ½Στ_k²),
//!   λ₂² ~ Gamma(r₂ + d(c+1)/2, δ₂ + ½Σω_i²)  (fully-Bayes mode only)
//!
//! Scan order is W → τ² → ω² → σ² → λ².

use ndarray::{Array1, Array2};

use crate::data::{ChainOutput, Dataset, ModelState, PriorConfig};
use crate::error::{Error, Result};
use crate::groups::GroupStructure;
use crate::likelihood::{obs_log_densities, residual_ss};
use crate::linalg::{chol_solve, cholesky_jitter, solve_lower_transpose};
use crate::rng::SeededStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaMode {
    /// λ₁², λ₂² stay at their configured values (WAIC / MCEM use).
    FixedLambda,
    /// λ₁², λ₂² are sampled under Gamma(rᵢ, δᵢ) hyperpriors.
    FullyBayes,
}

#[derive(Debug, Clone)]
pub struct GibbsConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub mode: LambdaMode,
    /// Fixed value in FixedLambda mode, initial value in FullyBayes mode.
    pub lambda1_sq: f64,
    pub lambda2_sq: f64,
    /// Below this block sum of squares the GIG conditional degenerates to
    /// its exact Gamma limit.
    pub eps_scale: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n_iter: 10_000,
            burn_in: 2_000,
            thin: 2,
            mode: LambdaMode::FixedLambda,
            lambda1_sq: 1.0,
            lambda2_sq: 1.0,
            eps_scale: 1e-12,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::InvalidParameter(format!(
                "burn_in ({}) must be less than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if !(self.lambda1_sq > 0.0) || !(self.lambda2_sq > 0.0) {
            return Err(Error::InvalidParameter(
                "lambda1_sq and lambda2_sq must be strictly positive".into(),
            ));
        }
        if !(self.eps_scale > 0.0) {
            return Err(Error::InvalidParameter("eps_scale must be positive".into()));
        }
        Ok(())
    }
}

/// XᵀX and XᵀY, computed once per chain and shared across updates.
pub(crate) struct DesignCache {
    pub xtx: Array2<f64>,
    pub xty: Array2<f64>,
}

impl DesignCache {
    pub fn new(data: &Dataset) -> Self {
        let x = data.x();
        Self {
            xtx: x.t().dot(&x),
            xty: x.t().dot(&data.y()),
        }
    }
}

/// Squared row norms s_i = ‖W_{i,·}‖².
pub(crate) fn row_scale_ss(w: &Array2<f64>) -> Vec<f64> {
    w.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v * v).sum())
        .collect()
}

/// Per-group sums S_k = Σ_{i∈π_k} s_i.
pub(crate) fn group_scale_ss(row_ss: &[f64], groups: &GroupStructure) -> Vec<f64> {
    (0..groups.num_groups())
        .map(|k| groups.members(k).iter().map(|&i| row_ss[i]).sum())
        .collect()
}

/// Conditional mean of W given the scales: M⁻¹XᵀY columnwise.
pub fn w_conditional_mean(
    state: &ModelState,
    data: &Dataset,
    groups: &GroupStructure,
) -> Result<Array2<f64>> {
    let cache = DesignCache::new(data);
    let (l, _) = factor_m(state, data.d(), groups, &cache)?;
    let mut mean = Array2::zeros((data.d(), data.c()));
    for j in 0..data.c() {
        mean.column_mut(j).assign(&chol_solve(&l, cache.xty.column(j)));
    }
    Ok(mean)
}

fn factor_m(
    state: &ModelState,
    d: usize,
    groups: &GroupStructure,
    cache: &DesignCache,
) -> Result<(Array2<f64>, ())> {
    let mut m = cache.xtx.clone();
    for i in 0..d {
        m[[i, i]] += state.prior_precision(groups.group_of(i), i);
    }
    Ok((cholesky_jitter(&m)?, ()))
}

fn update_w_cached(
    state: &ModelState,
    data: &Dataset,
    groups: &GroupStructure,
    cache: &DesignCache,
    stream: &mut SeededStream,
) -> Result<Array2<f64>> {
    let (d, c) = (data.d(), data.c());
    let (l, _) = factor_m(state, d, groups, cache)?;
    let sigma = state.sigma2.sqrt();
    let mut w = Array2::zeros((d, c));
    for j in 0..c {
        let mean = chol_solve(&l, cache.xty.column(j));
        let z: Array1<f64> = (0..d).map(|_| stream.standard_normal()).collect();
        // L⁻ᵀz has covariance M⁻¹
        let noise = solve_lower_transpose(&l, z.view());
        for i in 0..d {
            w[[i, j]] = mean[i] + sigma * noise[i];
        }
    }
    Ok(w)
}

/// Draw W from its columnwise Gaussian full conditional.
pub fn update_w(
    state: &ModelState,
    data: &Dataset,
    groups: &GroupStructure,
    stream: &mut SeededStream,
) -> Result<Array2<f64>> {
    update_w_cached(state, data, groups, &DesignCache::new(data), stream)
}

fn draw_gig_half(
    lambda_sq: f64,
    sigma2: f64,
    block_ss: f64,
    eps_scale: f64,
    stream: &mut SeededStream,
) -> Result<f64> {
    if block_ss < eps_scale {
        // exact b -> 0 limit of GIG(1/2, lambda_sq, b)
        stream.draw_gamma(0.5, lambda_sq / 2.0)
    } else {
        let mu = (lambda_sq * sigma2 / block_ss).sqrt();
        let x = stream.draw_inverse_gaussian(mu, lambda_sq)?;
        Ok(1.0 / x)
    }
}

/// Draw every τ_k² from its GIG(½, λ₁², S_k/σ²) full conditional.
pub fn update_tau2(
    state: &ModelState,
    groups: &GroupStructure,
    eps_scale: f64,
    stream: &mut SeededStream,
) -> Result<Vec<f64>> {
    let row_ss = row_scale_ss(&state.w);
    group_scale_ss(&row_ss, groups)
        .into_iter()
        .map(|s_k| draw_gig_half(state.lambda1_sq, state.sigma2, s_k, eps_scale, stream))
        .collect()
}

/// Draw every ω_i² from its GIG(½, λ₂², s_i/σ²) full conditional.
pub fn update_omega2(
    state: &ModelState,
    eps_scale: f64,
    stream: &mut SeededStream,
) -> Result<Vec<f64>> {
    row_scale_ss(&state.w)
        .into_iter()
        .map(|s_i| draw_gig_half(state.lambda2_sq, state.sigma2, s_i, eps_scale, stream))
        .collect()
}

/// Shape and rate of the inverse-Gamma full conditional of σ².
pub fn sigma2_posterior_params(
    state: &ModelState,
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
) -> (f64, f64) {
    let (n, d, c) = (data.n(), data.d(), data.c());
    let shape = prior.a_sigma + (n * c) as f64 / 2.0 + (d * c) as f64 / 2.0;
    let rss = residual_ss(data.y(), data.x(), state.w.view());
    let quad: f64 = row_scale_ss(&state.w)
        .iter()
        .enumerate()
        .map(|(i, s_i)| state.prior_precision(groups.group_of(i), i) * s_i)
        .sum();
    (shape, prior.b_sigma + 0.5 * rss + 0.5 * quad)
}

/// Draw σ² from its inverse-Gamma full conditional.
pub fn update_sigma2(
    state: &ModelState,
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
    stream: &mut SeededStream,
) -> Result<f64> {
    let (shape, rate) = sigma2_posterior_params(state, data, groups, prior);
    stream.draw_inverse_gamma(shape, rate)
}

/// Shape/rate pairs of the Gamma full conditionals of (λ₁², λ₂²).
pub fn lambda_posterior_params(
    state: &ModelState,
    groups: &GroupStructure,
    prior: &PriorConfig,
    c: usize,
) -> ((f64, f64), (f64, f64)) {
    let d = groups.num_snps();
    let shape1 = prior.r1
        + (0..groups.num_groups())
            .map(|k| (groups.size(k) * c + 1) as f64 / 2.0)
            .sum::<f64>();
    let rate1 = prior.delta1 + 0.5 * state.tau2.iter().sum::<f64>();
    let shape2 = prior.r2 + (d * (c + 1)) as f64 / 2.0;
    let rate2 = prior.delta2 + 0.5 * state.omega2.iter().sum::<f64>();
    ((shape1, rate1), (shape2, rate2))
}

/// Draw (λ₁², λ₂²) from their Gamma full conditionals (fully-Bayes mode).
pub fn update_lambdas(
    state: &ModelState,
    groups: &GroupStructure,
    prior: &PriorConfig,
    c: usize,
    stream: &mut SeededStream,
) -> Result<(f64, f64)> {
    let ((s1, r1), (s2, r2)) = lambda_posterior_params(state, groups, prior, c);
    Ok((stream.draw_gamma(s1, r1)?, stream.draw_gamma(s2, r2)?))
}

/// Columnwise ridge initialization: W from (XᵀX + I)⁻¹XᵀY, scales at their
/// approximate prior means, σ² at the ridge residual variance.
pub fn ridge_init(
    data: &Dataset,
    groups: &GroupStructure,
    config: &GibbsConfig,
) -> Result<ModelState> {
    let (d, c) = (data.d(), data.c());
    let cache = DesignCache::new(data);
    let mut m = cache.xtx.clone();
    for i in 0..d {
        m[[i, i]] += 1.0;
    }
    let l = cholesky_jitter(&m)?;
    let mut w = Array2::zeros((d, c));
    for j in 0..c {
        w.column_mut(j).assign(&chol_solve(&l, cache.xty.column(j)));
    }
    let rss = residual_ss(data.y(), data.x(), w.view());
    let sigma2 = (rss / (data.n() * c) as f64).max(1e-6);
    let tau2 = (0..groups.num_groups())
        .map(|k| (groups.size(k) * c + 1) as f64 / config.lambda1_sq)
        .collect();
    let omega2 = vec![(c + 1) as f64 / config.lambda2_sq; d];
    Ok(ModelState {
        w,
        tau2,
        omega2,
        sigma2,
        lambda1_sq: config.lambda1_sq,
        lambda2_sq: config.lambda2_sq,
    })
}

/// Run a systematic-scan Gibbs chain from the ridge initialization.
pub fn run_chain(
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
    config: &GibbsConfig,
    stream: &mut SeededStream,
) -> Result<ChainOutput> {
    config.validate()?;
    prior.validate()?;
    let init = ridge_init(data, groups, config)?;
    run_chain_from(data, groups, prior, config, init, stream)
}

/// Run a chain from an explicit initial state (used by MCEM warm starts).
pub fn run_chain_from(
    data: &Dataset,
    groups: &GroupStructure,
    prior: &PriorConfig,
    config: &GibbsConfig,
    init: ModelState,
    stream: &mut SeededStream,
) -> Result<ChainOutput> {
    config.validate()?;
    prior.validate()?;
    if data.d() != groups.num_snps() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} columns but the group structure covers {} SNPs",
            data.d(),
            groups.num_snps()
        )));
    }
    init.validate()?;
    let cache = DesignCache::new(data);
    let mut state = init;
    let n_keep = (config.n_iter - config.burn_in) / config.thin;
    let mut draws = Vec::with_capacity(n_keep);
    let mut obs_log_density = Vec::with_capacity(n_keep);
    for iter in 0..config.n_iter {
        let step = |e: Error| e.with_context(format!("gibbs iteration {iter}"));
        state.w = update_w_cached(&state, data, groups, &cache, stream).map_err(step)?;
        state.tau2 = update_tau2(&state, groups, config.eps_scale, stream).map_err(step)?;
        state.omega2 = update_omega2(&state, config.eps_scale, stream).map_err(step)?;
        state.sigma2 = update_sigma2(&state, data, groups, prior, stream).map_err(step)?;
        if config.mode == LambdaMode::FullyBayes {
            let (l1, l2) =
                update_lambdas(&state, groups, prior, data.c(), stream).map_err(step)?;
            state.lambda1_sq = l1;
            state.lambda2_sq = l2;
        }
        if iter >= config.burn_in && (iter - config.burn_in + 1) % config.thin == 0 {
            let ll = obs_log_densities(data.y(), data.x(), state.w.view(), state.sigma2)
                .map_err(step)?;
            obs_log_density.push(ll.to_vec());
            draws.push(state.clone());
        }
    }
    Ok(ChainOutput {
        draws,
        obs_log_density,
        n_iter: config.n_iter,
        burn_in: config.burn_in,
        thin: config.thin,
        seed: stream.seed(),
        stream_id: stream.stream_id(),
    })
}

/// Elementwise posterior means and equal-tailed 95% credible intervals.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub w_mean: Array2<f64>,
    pub w_lower: Array2<f64>,
    pub w_upper: Array2<f64>,
    pub sigma2_mean: f64,
    pub lambda1_sq_mean: f64,
    pub lambda2_sq_mean: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Summarize one or several pooled chains.
pub fn posterior_summary(draws: &[ModelState]) -> Result<PosteriorSummary> {
    if draws.is_empty() {
        return Err(Error::EmptyChain("no retained draws to summarize".into()));
    }
    let (d, c) = draws[0].w.dim();
    let s = draws.len() as f64;
    let mut w_mean = Array2::zeros((d, c));
    let mut w_lower = Array2::zeros((d, c));
    let mut w_upper = Array2::zeros((d, c));
    let mut buf = vec![0.0; draws.len()];
    for i in 0..d {
        for j in 0..c {
            for (t, st) in draws.iter().enumerate() {
                buf[t] = st.w[[i, j]];
            }
            w_mean[[i, j]] = buf.iter().sum::<f64>() / s;
            buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
            w_lower[[i, j]] = quantile(&buf, 0.025);
            w_upper[[i, j]] = quantile(&buf, 0.975);
        }
    }
    Ok(PosteriorSummary {
        w_mean,
        w_lower,
        w_upper,
        sigma2_mean: draws.iter().map(|s| s.sigma2).sum::<f64>() / s,
        lambda1_sq_mean: draws.iter().map(|s| s.lambda1_sq).sum::<f64>() / s,
        lambda2_sq_mean: draws.iter().map(|s| s.lambda2_sq).sum::<f64>() / s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::arr2;

    fn scalar_state(d1: f64) -> ModelState {
        // tau2 and omega2 chosen so 1/tau2 + 1/omega2 = d1
        ModelState {
            w: arr2(&[[0.0]]),
            tau2: vec![2.0 / d1],
            omega2: vec![2.0 / d1],
            sigma2: 1.0,
            lambda1_sq: 1.0,
            lambda2_sq: 1.0,
        }
    }

    fn scalar_data(xs: &[f64], ys: &[f64]) -> Dataset {
        let x = Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).unwrap();
        let y = Array2::from_shape_vec((ys.len(), 1), ys.to_vec()).unwrap();
        Dataset::new_relaxed(x, y).unwrap()
    }

    #[test]
    fn w_conditional_mean_scalar_case() {
        // n=3, d=1, c=1, X=(1,1,1)', y=(1,1,1)', sigma2=1, d1=1:
        // mean = 3/4, variance = 1/4
        let g = GroupStructure::new(1, vec![vec![0]]).unwrap();
        let data = scalar_data(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]);
        let state = scalar_state(1.0);
        let mean = w_conditional_mean(&state, &data, &g).unwrap();
        assert_relative_eq!(mean[[0, 0]], 0.75, epsilon = 1e-12);

        let mut stream = SeededStream::new(11, 0);
        let n = 40_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| update_w(&state, &data, &g, &mut stream).unwrap()[[0, 0]])
            .collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64;
        assert!((m - 0.75).abs() < 3.0 * (0.25f64 / n as f64).sqrt());
        assert!((var - 0.25).abs() < 0.01, "var {var}");
    }

    #[test]
    fn w_conditional_mean_is_zero_for_zero_data() {
        let g = GroupStructure::new(2, vec![vec![0, 1]]).unwrap();
        let x = arr2(&[[1.0, 0.5], [0.0, 1.0]]);
        let y = Array2::zeros((2, 2));
        let data = Dataset::new_relaxed(x, y).unwrap();
        let state = ModelState {
            w: Array2::zeros((2, 2)),
            tau2: vec![0.7],
            omega2: vec![1.3, 0.4],
            sigma2: 2.0,
            lambda1_sq: 1.0,
            lambda2_sq: 1.0,
        };
        let mean = w_conditional_mean(&state, &data, &g).unwrap();
        assert!(mean.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn infinite_prior_precision_collapses_w() {
        let g = GroupStructure::new(1, vec![vec![0]]).unwrap();
        let data = scalar_data(&[1.0, 1.0, 1.0], &[1.0, 1.0, 1.0]);
        let mut state = scalar_state(1.0);
        state.tau2 = vec![1e-14];
        state.omega2 = vec![1e-14];
        let mut stream = SeededStream::new(3, 0);
        let w = update_w(&state, &data, &g, &mut stream).unwrap();
        assert!(w[[0, 0]].abs() < 1e-5);
    }

    #[test]
    fn sigma2_shape_counting() {
        // n=1, c=1, d=1, a_sigma=2: shape = 2 + 1/2 + 1/2 = 3
        let g = GroupStructure::new(1, vec![vec![0]]).unwrap();
        let data = scalar_data(&[1.0], &[0.5]);
        let state = scalar_state(1.0);
        let prior = PriorConfig::default();
        let (shape, _) = sigma2_posterior_params(&state, &data, &g, &prior);
        assert_relative_eq!(shape, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma2_reduces_to_prior_for_zero_residual_and_zero_w() {
        let g = GroupStructure::new(1, vec![vec![0]]).unwrap();
        let data = scalar_data(&[1.0, 1.0], &[0.0, 0.0]);
        let state = scalar_state(0.5);
        let prior = PriorConfig::default();
        let (shape, rate) = sigma2_posterior_params(&state, &data, &g, &prior);
        // n=2, d=1, c=1: shape = a + (n+d)c/2, rate = b
        assert_relative_eq!(shape, prior.a_sigma + 1.5, epsilon = 1e-14);
        assert_relative_eq!(rate, prior.b_sigma, epsilon = 1e-14);
    }

    #[test]
    fn sigma2_draws_match_invgamma_moments() {
        let g = GroupStructure::new(1, vec![vec![0]]).unwrap();
        let data = scalar_data(&[1.0, 1.0, 1.0], &[1.0, 2.0, 0.5]);
        let mut state = scalar_state(1.0);
        state.w = arr2(&[[0.8]]);
        let prior = PriorConfig::default();
        let (shape, rate) = sigma2_posterior_params(&state, &data, &g, &prior);
        let mut stream = SeededStream::new(5, 0);
        let n = 200_000;
        let m = (0..n)
            .map(|_| update_sigma2(&state, &data, &g, &prior, &mut stream).unwrap())
            .sum::<f64>()
            / n as f64;
        let expect = rate / (shape - 1.0);
        // 3 SE of the inverse-gamma mean estimate
        let sd = (rate * rate / ((shape - 1.0).powi(2) * (shape - 2.0))).sqrt();
        assert!((m - expect).abs() < 3.0 * sd / (n as f64).sqrt(), "mean {m} vs {expect}");
    }

    #[test]
    fn lambda_posterior_bookkeeping() {
        // K=1, m=1, c=1, r1=1, delta1=1, tau2=1 -> Gamma(2, 1.5)
        let g = GroupStructure::new(1, vec![vec![0]]).unwrap();
        let state = ModelState {
            w: arr2(&[[0.0]]),
            tau2: vec![1.0],
            omega2: vec![1.0],
            sigma2: 1.0,
            lambda1_sq: 1.0,
            lambda2_sq: 1.0,
        };
        let prior = PriorConfig {
            r1: 1.0,
            delta1: 1.0,
            ..PriorConfig::default()
        };
        let ((s1, r1), _) = lambda_posterior_params(&state, &g, &prior, 1);
        assert_relative_eq!(s1, 2.0, epsilon = 1e-14);
        assert_relative_eq!(r1, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn lambda_posterior_shapes_at_paper_dimensions() {
        // d=200, K=20, c=5: shape1 = r1 + 510, shape2 = r2 + 600
        let g = GroupStructure::equal_sizes(200, 20).unwrap();
        let state = ModelState {
            w: Array2::zeros((200, 5)),
            tau2: vec![1.0; 20],
            omega2: vec![1.0; 200],
            sigma2: 1.0,
            lambda1_sq: 1.0,
            lambda2_sq: 1.0,
        };
        let prior = PriorConfig::default();
        let ((s1, _), (s2, _)) = lambda_posterior_params(&state, &g, &prior, 5);
        assert_relative_eq!(s1, prior.r1 + 510.0, epsilon = 1e-12);
        assert_relative_eq!(s2, prior.r2 + 600.0, epsilon = 1e-12);
    }

    #[test]
    fn gig_mean_identity_for_tau2() {
        // lambda1^2=2, sigma2=1, S_k=2: E[tau^2 | rest] = 1.5
        let g = GroupStructure::new(2, vec![vec![0, 1]]).unwrap();
        let state = ModelState {
            w: arr2(&[[1.0], [1.0]]), // S_1 = 2
            tau2: vec![1.0],
            omega2: vec![1.0, 1.0],
            sigma2: 1.0,
            lambda1_sq: 2.0,
            lambda2_sq: 2.0,
        };
        state.validate().unwrap();
        let mut stream = SeededStream::new(7, 0);
        let n = 400_000;
        let m = (0..n)
            .map(|_| update_tau2(&state, &g, 1e-12, &mut stream).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((m - 1.5).abs() < 0.02, "mean {m}");
    }

    #[test]
    fn zero_block_falls_back_to_gamma_limit() {
        // S_k = 0: conditional is Gamma(1/2, lambda1^2/2), mean 1/lambda1^2
        let g = GroupStructure::new(1, vec![vec![0]]).unwrap();
        let state = ModelState {
            w: arr2(&[[0.0]]),
            tau2: vec![1.0],
            omega2: vec![1.0],
            sigma2: 1.0,
            lambda1_sq: 4.0,
            lambda2_sq: 4.0,
        };
        let mut stream = SeededStream::new(9, 0);
        let n = 400_000;
        let m = (0..n)
            .map(|_| update_tau2(&state, &g, 1e-12, &mut stream).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((m - 0.25).abs() < 0.01, "mean {m}");
        let mo = (0..n)
            .map(|_| update_omega2(&state, 1e-12, &mut stream).unwrap()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mo - 0.25).abs() < 0.01, "mean {mo}");
    }

    #[test]
    fn chain_is_deterministic_and_respects_thinning() {
        let g = GroupStructure::new(2, vec![vec![0], vec![1]]).unwrap();
        let x = arr2(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let y = arr2(&[[1.0], [2.0], [3.0]]);
        let data = Dataset::new_relaxed(x, y).unwrap();
        let config = GibbsConfig {
            n_iter: 51,
            burn_in: 10,
            thin: 3,
            ..GibbsConfig::default()
        };
        let prior = PriorConfig::default();
        let run = |seed| {
            let mut s = SeededStream::new(seed, 0);
            run_chain(&data, &g, &prior, &config, &mut s).unwrap()
        };
        let a = run(42);
        let b = run(42);
        assert_eq!(a.len(), (51 - 10) / 3);
        for (sa, sb) in a.draws.iter().zip(&b.draws) {
            assert_eq!(sa.w, sb.w);
            assert_eq!(sa.sigma2.to_bits(), sb.sigma2.to_bits());
        }
        for st in &a.draws {
            st.validate().unwrap();
        }
        let c = run(43);
        assert_ne!(a.draws[0].w, c.draws[0].w);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = GibbsConfig {
            n_iter: 10,
            burn_in: 10,
            ..GibbsConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = GibbsConfig {
            thin: 0,
            ..GibbsConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn posterior_summary_degenerate_chain() {
        let state = ModelState {
            w: arr2(&[[1.5, -2.0]]),
            tau2: vec![1.0],
            omega2: vec![1.0],
            sigma2: 0.5,
            lambda1_sq: 2.0,
            lambda2_sq: 3.0,
        };
        let draws = vec![state.clone(); 10];
        let s = posterior_summary(&draws).unwrap();
        assert_eq!(s.w_mean, state.w);
        assert_eq!(s.w_lower, state.w);
        assert_eq!(s.w_upper, state.w);
        assert_relative_eq!(s.sigma2_mean, 0.5);
        assert!(posterior_summary(&[]).is_err());
    }

    #[test]
    fn credible_interval_contains_median() {
        let mut stream = SeededStream::new(1, 0);
        let draws: Vec<ModelState> = (0..200)
            .map(|_| ModelState {
                w: arr2(&[[stream.standard_normal()]]),
                tau2: vec![1.0],
                omega2: vec![1.0],
                sigma2: 1.0,
                lambda1_sq: 1.0,
                lambda2_sq: 1.0,
            })
            .collect();
        let s = posterior_summary(&draws).unwrap();
        let mut vals: Vec<f64> = draws.iter().map(|d| d.w[[0, 0]]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = vals[vals.len() / 2];
        assert!(s.w_lower[[0, 0]] <= median && median <= s.w_upper[[0, 0]]);
    }
}
