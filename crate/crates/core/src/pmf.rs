//! Finite-support step distributions on the integer lattice.
//!
//! Every exact computation in this crate works with a [`LatticePmf`]:
//! a sorted list of sites with strictly positive probabilities summing to
//! one. Zero-probability entries are stripped at construction so that the
//! stored support is the essential support (the aperiodicity test depends
//! on that).

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PmfError {
    #[error("negative probability {prob} at site {site}")]
    NegativeProb { site: i64, prob: f64 },
    #[error("probabilities sum to {sum:.12}, not 1")]
    NotNormalized { sum: f64 },
    #[error("empty support")]
    EmptySupport,
    #[error("pmf text parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Absolute slack accepted on the input mass before renormalizing.
const MASS_TOL: f64 = 1e-9;

/// A probability mass function with finite support on `Z`.
///
/// Immutable after construction and freely shareable across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf {
    support: Vec<i64>,
    probs: Vec<f64>,
    cum: Vec<f64>,
}

impl LatticePmf {
    /// Builds a pmf from `(site, probability)` entries.
    ///
    /// Entries are sorted, duplicates merged, and zero-probability entries
    /// stripped. The mass must be 1 within `1e-9`; it is then renormalized
    /// exactly.
    pub fn new(entries: &[(i64, f64)]) -> Result<Self, PmfError> {
        if entries.is_empty() {
            return Err(PmfError::EmptySupport);
        }
        for &(site, prob) in entries {
            if prob < 0.0 || !prob.is_finite() {
                return Err(PmfError::NegativeProb { site, prob });
            }
        }
        let mut merged: Vec<(i64, f64)> = Vec::with_capacity(entries.len());
        let mut sorted = entries.to_vec();
        sorted.sort_by_key(|e| e.0);
        for (site, prob) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == site => last.1 += prob,
                _ => merged.push((site, prob)),
            }
        }
        merged.retain(|e| e.1 > 0.0);
        if merged.is_empty() {
            return Err(PmfError::EmptySupport);
        }
        let sum: f64 = merged.iter().map(|e| e.1).sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(PmfError::NotNormalized { sum });
        }
        let support: Vec<i64> = merged.iter().map(|e| e.0).collect();
        let probs: Vec<f64> = merged.iter().map(|e| e.1 / sum).collect();
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in &probs {
            acc += p;
            cum.push(acc);
        }
        *cum.last_mut().unwrap() = 1.0;
        Ok(Self { support, probs, cum })
    }

    /// Point mass at `site`.
    pub fn point(site: i64) -> Self {
        Self::new(&[(site, 1.0)]).unwrap()
    }

    /// Exact-rational entry path: integer weights are normalized by their
    /// total before conversion, so laws like the uniform three-point pmf
    /// carry no decimal-literal rounding.
    pub fn from_weights(entries: &[(i64, u64)]) -> Result<Self, PmfError> {
        let total: u64 = entries.iter().map(|&(_, w)| w).sum();
        if total == 0 {
            return Err(PmfError::EmptySupport);
        }
        let scaled: Vec<(i64, f64)> = entries
            .iter()
            .map(|&(s, w)| (s, w as f64 / total as f64))
            .collect();
        Self::new(&scaled)
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min_site(&self) -> i64 {
        self.support[0]
    }

    pub fn max_site(&self) -> i64 {
        *self.support.last().unwrap()
    }

    /// Probability at `site` (0 off the support).
    pub fn prob_at(&self, site: i64) -> f64 {
        match self.support.binary_search(&site) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(s, p)| s as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.iter().map(|(s, p)| (s as f64 - m).powi(2) * p).sum()
    }

    /// `E[|X|^p]`, an exact finite sum.
    pub fn abs_moment(&self, p: f64) -> f64 {
        self.iter().map(|(s, q)| (s as f64).abs().powf(p) * q).sum()
    }

    /// `E[(X^+)^p]` where `X^+ = max(X, 0)`.
    pub fn pos_part_moment(&self, p: f64) -> f64 {
        self.iter()
            .filter(|&(s, _)| s > 0)
            .map(|(s, q)| (s as f64).powf(p) * q)
            .sum()
    }

    /// `E[((-X)^+)^p]`.
    pub fn neg_part_moment(&self, p: f64) -> f64 {
        self.iter()
            .filter(|&(s, _)| s < 0)
            .map(|(s, q)| (-s as f64).powf(p) * q)
            .sum()
    }

    /// The pmf of `-X`.
    pub fn mirrored(&self) -> Self {
        let entries: Vec<(i64, f64)> = self.iter().map(|(s, p)| (-s, p)).collect();
        Self::new(&entries).unwrap()
    }

    /// Distribution of the sum of two independent draws.
    pub fn convolve(&self, other: &Self) -> Self {
        let mut entries: Vec<(i64, f64)> = Vec::new();
        for (a, pa) in self.iter() {
            for (b, pb) in other.iter() {
                entries.push((a + b, pa * pb));
            }
        }
        Self::new(&entries).unwrap()
    }

    /// Strong aperiodicity: the support is not contained in `b + aZ` for
    /// any `a > 1`.
    pub fn is_strongly_aperiodic(&self) -> bool {
        let span = self.max_site() - self.min_site();
        if span == 0 {
            // a single site lies in b + aZ for every a
            return false;
        }
        // Only moduli up to the span can trap a support with >= 2 sites.
        for a in 2..=span {
            let b = self.support[0].rem_euclid(a);
            if self.support.iter().all(|&s| s.rem_euclid(a) == b) {
                return false;
            }
        }
        true
    }

    /// Draws one site. Deterministic given the rng state; the caller owns
    /// the state, so concurrent sampling is safe by construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.gen();
        // supports here are tiny; a linear scan beats binary search
        for (i, &c) in self.cum.iter().enumerate() {
            if u < c {
                return self.support[i];
            }
        }
        *self.support.last().unwrap()
    }

    /// Serializes as "site probability" lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (s, p) in self.iter() {
            out.push_str(&format!("{} {:.17e}\n", s, p));
        }
        out
    }

    /// Parses the text format: one "site probability" pair per line,
    /// `#` starts a comment, blank lines ignored.
    pub fn parse_text(text: &str) -> Result<Self, PmfError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let site = parts
                .next()
                .and_then(|t| t.parse::<i64>().ok())
                .ok_or_else(|| PmfError::Parse {
                    line: idx + 1,
                    msg: format!("bad site in {raw:?}"),
                })?;
            let prob = parts
                .next()
                .and_then(|t| t.parse::<f64>().ok())
                .ok_or_else(|| PmfError::Parse {
                    line: idx + 1,
                    msg: format!("bad probability in {raw:?}"),
                })?;
            if parts.next().is_some() {
                return Err(PmfError::Parse {
                    line: idx + 1,
                    msg: "expected exactly two fields".into(),
                });
            }
            entries.push((site, prob));
        }
        Self::new(&entries)
    }
}

/// Mean, variance, and one requested absolute moment of a pmf.
#[derive(Debug, Clone, Copy)]
pub struct MomentReport {
    pub mean: f64,
    pub variance: f64,
    /// `E[|X|^p]` for the `p` passed to [`moments`].
    pub abs_moment: f64,
    pub p: f64,
}

/// Exact moments over the finite support.
pub fn moments(pmf: &LatticePmf, p: f64) -> MomentReport {
    MomentReport {
        mean: pmf.mean(),
        variance: pmf.variance(),
        abs_moment: pmf.abs_moment(p),
        p,
    }
}

/// Centering tolerance used by the hypothesis check.
pub const CENTERED_TOL: f64 = 1e-12;

/// Outcome of checking the standing hypotheses on a `(mu, mu_prime)` pair.
///
/// `h1` (finite variance) and `h4` (the `3 + delta` one-sided moment) hold
/// automatically for finite-support pmfs; the report still carries the
/// moment values so they can be inspected.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
    pub h4: bool,
    pub mean_mu: f64,
    pub mean_mu_prime: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
    /// `E[(xi^+)^(3+delta)]` for `mu`.
    pub h4_moment_mu: f64,
    /// `E[((xi')^-)^(3+delta)]` for `mu_prime`.
    pub h4_moment_mu_prime: f64,
    pub delta: f64,
}

impl HypothesisReport {
    pub fn all_hold(&self) -> bool {
        self.h1 && self.h2 && self.h3 && self.h4
    }
}

/// Checks H1-H4 for the pair driving an oscillating walk.
pub fn check_hypotheses(mu: &LatticePmf, mu_prime: &LatticePmf, delta: f64) -> HypothesisReport {
    let mean_mu = mu.mean();
    let mean_mu_prime = mu_prime.mean();
    HypothesisReport {
        h1: true,
        h2: mean_mu.abs() <= CENTERED_TOL && mean_mu_prime.abs() <= CENTERED_TOL,
        h3: mu.is_strongly_aperiodic() && mu_prime.is_strongly_aperiodic(),
        h4: true,
        mean_mu,
        mean_mu_prime,
        sigma: mu.variance().sqrt(),
        sigma_prime: mu_prime.variance().sqrt(),
        h4_moment_mu: mu.pos_part_moment(3.0 + delta),
        h4_moment_mu_prime: mu_prime.neg_part_moment(3.0 + delta),
        delta,
    }
}
