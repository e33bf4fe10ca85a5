//! Seeded random-variate generation for the samplers.
//!
//! Each chain or parallel worker owns one [`SeededStream`]. Streams with the
//! same `(seed, stream_id)` reproduce bit-identical variate sequences; the
//! stream id selects an independent ChaCha substream so parallel work is
//! reproducible regardless of scheduling.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SeededStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A sibling stream with a different substream id, for fanned-out work.
    pub fn substream(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    fn check_positive(name: &str, v: f64) -> Result<()> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be strictly positive, got {v}"
            )));
        }
        Ok(())
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    /// Uniform draw from {0, 1, 2}, as a float genotype code.
    pub fn genotype(&mut self) -> f64 {
        self.rng.gen_range(0u8..3) as f64
    }

    /// Gamma(shape, rate) with density ∝ x^{shape−1} e^{−rate·x}.
    pub fn draw_gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        Self::check_positive("shape", shape)?;
        Self::check_positive("rate", rate)?;
        let g = Gamma::new(shape, 1.0 / rate)
            .map_err(|e| Error::InvalidParameter(format!("gamma: {e}")))?;
        Ok(g.sample(&mut self.rng))
    }

    /// Inverse-Gamma(shape, rate): reciprocal of a Gamma(shape, rate) draw.
    pub fn draw_inverse_gamma(&mut self, shape: f64, rate: f64) -> Result<f64> {
        Ok(1.0 / self.draw_gamma(shape, rate)?)
    }

    /// Two-parameter inverse Gaussian IG(mu, lam) via the
    /// Michael–Schucany–Haas transformation with rejection.
    pub fn draw_inverse_gaussian(&mut self, mu: f64, lam: f64) -> Result<f64> {
        Self::check_positive("mu", mu)?;
        Self::check_positive("lam", lam)?;
        let v: f64 = self.standard_normal();
        let y = v * v;
        // Smaller root of the quadratic, written without cancellation:
        // x = mu (r - u) / (r + u) with u = mu*y, r = sqrt(u^2 + 4*lam*u),
        // and r - u = 4*lam*u / (r + u).
        let t = mu * y;
        let x = if t == 0.0 {
            mu
        } else {
            let r = (t * t + 4.0 * lam * t).sqrt();
            4.0 * mu * lam * t / ((r + t) * (r + t))
        };
        let u = self.uniform();
        if u <= mu / (mu + x) {
            Ok(x)
        } else {
            Ok(mu * mu / x)
        }
    }

    /// mean + chol_cov · z with z standard normal; `chol_cov` is a lower
    /// triangular Cholesky factor of the covariance.
    pub fn draw_mvn(
        &mut self,
        mean: ArrayView1<f64>,
        chol_cov: ArrayView2<f64>,
    ) -> Result<Array1<f64>> {
        let m = mean.len();
        if chol_cov.nrows() != m || chol_cov.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {m} but the factor is {}x{}",
                chol_cov.nrows(),
                chol_cov.ncols()
            )));
        }
        if (0..m).any(|i| !(chol_cov[[i, i]] > 0.0)) {
            return Err(Error::InvalidParameter(
                "Cholesky factor must have a strictly positive diagonal".into(),
            ));
        }
        let z: Array1<f64> = (0..m).map(|_| self.standard_normal()).collect();
        Ok(&mean + &chol_cov.dot(&z))
    }
}
