//! Empirical-vs-theoretical comparison helpers: KS distances, DKW bands,
//! and binomial cell tests.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("confidence must lie strictly inside (0, 1), got {0}")]
    InvalidConfidence(f64),
    #[error("empty sample")]
    EmptySample,
}

/// A sorted sample of real values.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySample);
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Right-continuous empirical CDF.
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.n() as f64
    }

    /// Fraction of the sample strictly below `x`.
    pub fn cdf_below(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v < x) as f64 / self.n() as f64
    }

    /// Kolmogorov-Smirnov distance against a (monotone) CDF:
    /// `sup_i max(|i/n - F(x_i)|, |(i-1)/n - F(x_i)|)`.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.n() as f64;
        let mut worst = 0.0f64;
        for (i, &x) in self.values.iter().enumerate() {
            let f = cdf(x);
            let hi = ((i + 1) as f64 / n - f).abs();
            let lo = (i as f64 / n - f).abs();
            worst = worst.max(hi).max(lo);
        }
        worst
    }
}

/// One-sided DKW half-width: `sqrt(ln(2 / (1 - confidence)) / (2 n))`.
pub fn dkw_band(n: usize, confidence: f64) -> Result<f64, StatsError> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidConfidence(confidence));
    }
    if n == 0 {
        return Err(StatsError::EmptySample);
    }
    Ok(((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt())
}

/// Binomial z-score `(observed - trials p) / sqrt(trials p (1 - p))`.
/// For degenerate `p` in {0, 1}: 0 on an exact match, infinity otherwise.
pub fn cell_test(observed: u64, trials: u64, p: f64) -> f64 {
    assert!(trials >= 1);
    assert!((0.0..=1.0).contains(&p));
    let expect = trials as f64 * p;
    if p == 0.0 || p == 1.0 {
        return if (observed as f64 - expect).abs() < 0.5 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    (observed as f64 - expect) / (trials as f64 * p * (1.0 - p)).sqrt()
}

/// Cell test for lattice-valued data whose cell boundary can carry atoms:
/// the theory value `p` is compared against the empirical interval
/// `[open count, closed count]` (cell interior vs cell closure) and the
/// returned z-score is the signed distance, in standard errors, from `p`
/// to that interval; 0 when `p` lies inside it.
pub fn interval_cell_test(observed_open: u64, observed_closed: u64, trials: u64, p: f64) -> f64 {
    assert!(observed_open <= observed_closed);
    let z_open = cell_test(observed_open, trials, p);
    let z_closed = cell_test(observed_closed, trials, p);
    if z_open <= 0.0 && z_closed >= 0.0 {
        0.0
    } else if z_open > 0.0 {
        z_open
    } else {
        z_closed
    }
}
