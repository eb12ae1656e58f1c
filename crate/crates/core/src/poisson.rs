use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// `rate^k · e^−rate / k!`, evaluated in log space so large `k` cannot
/// overflow.
pub fn poisson_pmf(rate: f64, k: i64) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(Error::InvalidParams(vec![format!(
            "Poisson rate must be finite and >= 0, got {rate}"
        )]));
    }
    if k < 0 {
        return Err(Error::InvalidParams(vec![format!(
            "Poisson count must be >= 0, got {k}"
        )]));
    }
    Ok(pmf_unchecked(rate, k as u64))
}

fn pmf_unchecked(rate: f64, k: u64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let k = k as f64;
    (k * rate.ln() - rate - ln_gamma(k + 1.0)).exp()
}

/// Per-slot harvest distribution with its pmf cached up to the buffer size.
#[derive(Debug, Clone)]
pub struct PoissonArrivals {
    rate: f64,
    pmf: Vec<f64>,
    /// `cdf[k] = Σ_{ℓ<k} pmf[ℓ]`, so `cdf[0] = 0`.
    cdf: Vec<f64>,
}

impl PoissonArrivals {
    /// Caches `pmf(0..=max_k)`.
    pub fn new(rate: f64, max_k: usize) -> Result<Self> {
        poisson_pmf(rate, 0)?;
        let pmf: Vec<f64> = (0..=max_k as u64).map(|k| pmf_unchecked(rate, k)).collect();
        let mut cdf = Vec::with_capacity(pmf.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(PoissonArrivals { rate, pmf, cdf })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Probability of exactly `k` arrivals; `k` must be within the cache.
    pub fn pmf(&self, k: usize) -> f64 {
        self.pmf[k]
    }

    /// `Pr{H ≥ k} = 1 − Σ_{ℓ<k} pmf(ℓ)`; an empty sum gives 1.
    pub fn tail(&self, k: usize) -> f64 {
        (1.0 - self.cdf[k]).max(0.0)
    }
}
