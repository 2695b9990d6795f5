//! Exact simulation of the oscillating walk and Monte Carlo estimators of
//! its rescaled marginals.
//!
//! Reproducibility contract: every estimator is a pure function of
//! `(config.seed, shape parameters)`. Path `i` draws from a ChaCha stream
//! derived from `(seed, i)`, so results are independent of worker count
//! and scheduling; aggregation happens in path-index order.

use crate::pmf::{check_hypotheses, HypothesisReport, LatticePmf};
use crate::stats::{EmpiricalDistribution, StatsError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("limit-law estimators require the standing hypotheses: {0}")]
    HypothesesNotSatisfied(String),
    #[error("at least {min} paths required, got {paths}")]
    TooFewPaths { paths: usize, min: usize },
    #[error("an excursion exceeded the safety cap of {cap} steps (near-degenerate step law?)")]
    HorizonExceeded { cap: usize },
    #[error("times must satisfy 0 < t1 < t2 <= 1")]
    BadTimes,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Complete description of an oscillating-walk experiment.
#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub mu: LatticePmf,
    pub mu_prime: LatticePmf,
    pub alpha: f64,
    pub start: i64,
    pub seed: u64,
}

impl WalkConfig {
    /// Validates `alpha`; degenerate (uncentered or periodic) step laws
    /// are accepted for plain simulation, but the hypothesis report gates
    /// every limit-law estimator.
    pub fn new(
        mu: LatticePmf,
        mu_prime: LatticePmf,
        alpha: f64,
        start: i64,
        seed: u64,
    ) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(SimError::InvalidAlpha(alpha));
        }
        Ok(Self {
            mu,
            mu_prime,
            alpha,
            start,
            seed,
        })
    }

    pub fn hypotheses(&self) -> HypothesisReport {
        check_hypotheses(&self.mu, &self.mu_prime, 0.5)
    }

    pub fn sigma(&self) -> f64 {
        self.mu.variance().sqrt()
    }

    pub fn sigma_prime(&self) -> f64 {
        self.mu_prime.variance().sqrt()
    }

    fn require_hypotheses(&self) -> Result<(), SimError> {
        let h = self.hypotheses();
        if !(h.h1 && h.h2 && h.h3) {
            return Err(SimError::HypothesesNotSatisfied(format!(
                "H2 = {}, H3 = {}",
                h.h2, h.h3
            )));
        }
        Ok(())
    }

    /// RNG stream for path `path_idx`; `namespace` separates estimator
    /// families so they never share draws.
    fn rng(&self, namespace: u64, path_idx: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(namespace.wrapping_shl(40) ^ path_idx);
        rng
    }
}

/// One realized trajectory with its crossing times.
///
/// `crossings[k] = (C_k, X_{C_k})`, starting with `(0, start)`. From a
/// negative site the next crossing is the first entry into `>= 0`; from a
/// positive site the first entry into `<= 0`; from the origin it is the
/// very next step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathRecord {
    pub positions: Vec<i64>,
    pub crossings: Vec<(usize, i64)>,
}

#[derive(Clone)]
struct Stepper {
    mu: LatticePmf,
    mu_prime: LatticePmf,
    alpha: f64,
}

impl Stepper {
    fn of(cfg: &WalkConfig) -> Self {
        Self {
            mu: cfg.mu.clone(),
            mu_prime: cfg.mu_prime.clone(),
            alpha: cfg.alpha,
        }
    }

    #[inline]
    fn step(&self, pos: i64, rng: &mut ChaCha8Rng) -> i64 {
        if pos <= -1 {
            pos + self.mu.sample(rng)
        } else if pos >= 1 {
            pos + self.mu_prime.sample(rng)
        } else if rng.gen::<f64>() < self.alpha {
            self.mu.sample(rng)
        } else {
            self.mu_prime.sample(rng)
        }
    }
}

#[inline]
fn crossed(origin: i64, pos: i64) -> bool {
    if origin <= -1 {
        pos >= 0
    } else if origin >= 1 {
        pos <= 0
    } else {
        true
    }
}

/// Simulates `n` steps; deterministic given `(config.seed, n)`.
pub fn simulate_path(cfg: &WalkConfig, n: usize) -> PathRecord {
    let stepper = Stepper::of(cfg);
    let mut rng = cfg.rng(0, 0);
    let mut positions = Vec::with_capacity(n + 1);
    let mut crossings = vec![(0usize, cfg.start)];
    let mut pos = cfg.start;
    let mut origin = cfg.start;
    positions.push(pos);
    for i in 1..=n {
        pos = stepper.step(pos, &mut rng);
        positions.push(pos);
        if crossed(origin, pos) {
            crossings.push((i, pos));
            origin = pos;
        }
    }
    PathRecord {
        positions,
        crossings,
    }
}

/// Recomputes the crossing list from bare positions (offline replay).
pub fn recompute_crossings(positions: &[i64]) -> Vec<(usize, i64)> {
    let mut crossings = vec![(0usize, positions[0])];
    let mut origin = positions[0];
    for (i, &pos) in positions.iter().enumerate().skip(1) {
        if crossed(origin, pos) {
            crossings.push((i, pos));
            origin = pos;
        }
    }
    crossings
}

/// Collects `k` successive crossing positions after discarding `burn_in`
/// of them, from one path. Errors if any single excursion outlasts `cap`.
pub fn crossing_samples(
    cfg: &WalkConfig,
    burn_in: usize,
    k: usize,
    cap: usize,
) -> Result<Vec<i64>, SimError> {
    let stepper = Stepper::of(cfg);
    let mut rng = cfg.rng(1, 0);
    let mut pos = cfg.start;
    let mut out = Vec::with_capacity(k);
    for j in 0..burn_in + k {
        let mut steps = 0usize;
        let origin = pos;
        loop {
            pos = stepper.step(pos, &mut rng);
            steps += 1;
            if crossed(origin, pos) {
                break;
            }
            if steps >= cap {
                return Err(SimError::HorizonExceeded { cap });
            }
        }
        if j >= burn_in {
            out.push(pos);
        }
    }
    Ok(out)
}

/// Occupation counts of the crossing chain over many crossings, split
/// across `chains` independently seeded runs. Excursions longer than
/// `per_excursion_cap` are abandoned and redrawn from the same origin
/// (the count of such events is returned; each costs one crossing of
/// bias at most).
pub fn crossing_occupation(
    cfg: &WalkConfig,
    crossings: u64,
    burn_in: usize,
    per_excursion_cap: usize,
    chains: u64,
    workers: usize,
) -> (std::collections::BTreeMap<i64, u64>, u64) {
    let per_chain = crossings.div_ceil(chains);
    let results: Vec<(std::collections::BTreeMap<i64, u64>, u64)> = pool(workers).install(|| {
        (0..chains)
            .into_par_iter()
            .map(|chain| {
                let stepper = Stepper::of(cfg);
                let mut rng = cfg.rng(2, chain);
                let mut pos = cfg.start;
                let mut counts = std::collections::BTreeMap::new();
                let mut capped = 0u64;
                let mut collected = 0u64;
                let mut seen = 0usize;
                while collected < per_chain {
                    let origin = pos;
                    let mut steps = 0usize;
                    loop {
                        pos = stepper.step(pos, &mut rng);
                        steps += 1;
                        if crossed(origin, pos) {
                            break;
                        }
                        if steps >= per_excursion_cap {
                            // abandon and redraw this excursion
                            pos = origin;
                            capped += 1;
                            steps = 0;
                        }
                    }
                    seen += 1;
                    if seen > burn_in {
                        *counts.entry(pos).or_insert(0) += 1;
                        collected += 1;
                    }
                }
                (counts, capped)
            })
            .collect()
    });
    let mut counts = std::collections::BTreeMap::new();
    let mut capped = 0u64;
    for (c, cap) in results {
        for (site, n) in c {
            *counts.entry(site).or_insert(0) += n;
        }
        capped += cap;
    }
    (counts, capped)
}

/// The diffusively rescaled interpolated process built from a path.
///
/// At grid points `i/n` the value is `X_i / (sigma sqrt(n))` when
/// `X_i <= 0` and `X_i / (sigma' sqrt(n))` when `X_i >= 0` (consistent at
/// zero); between grid points the normalized values are interpolated
/// linearly.
pub struct ScaledProcess<'a> {
    path: &'a PathRecord,
    pub n: usize,
    sigma: f64,
    sigma_prime: f64,
}

impl<'a> ScaledProcess<'a> {
    pub fn new(path: &'a PathRecord, cfg: &WalkConfig, n: usize) -> Self {
        assert!(path.positions.len() > n, "path shorter than scaling horizon");
        Self {
            path,
            n,
            sigma: cfg.sigma(),
            sigma_prime: cfg.sigma_prime(),
        }
    }

    #[inline]
    fn normalized(&self, x: i64) -> f64 {
        let scale = if x <= 0 { self.sigma } else { self.sigma_prime };
        x as f64 / (scale * (self.n as f64).sqrt())
    }

    pub fn eval(&self, t: f64) -> f64 {
        assert!((0.0..=1.0).contains(&t));
        let nt = self.n as f64 * t;
        let i = nt.floor() as usize;
        let a = self.normalized(self.path.positions[i]);
        if i as f64 == nt {
            return a;
        }
        let b = self.normalized(self.path.positions[i + 1]);
        a + (nt - i as f64) * (b - a)
    }
}

/// Convenience wrapper over [`ScaledProcess::eval`] with `n` = path length.
pub fn scaled_eval(path: &PathRecord, cfg: &WalkConfig, t: f64) -> f64 {
    ScaledProcess::new(path, cfg, path.positions.len() - 1).eval(t)
}

fn pool(workers: usize) -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        b = b.num_threads(workers);
    }
    b.build().expect("thread pool")
}

const MIN_PATHS: usize = 1000;

/// Runs one path up to the last index needed to evaluate the rescaled
/// process at the given times, returning the values there.
#[inline]
fn path_values(
    cfg: &WalkConfig,
    stepper: &Stepper,
    namespace: u64,
    idx: u64,
    n: usize,
    times: &[f64],
) -> Vec<f64> {
    let mut rng = cfg.rng(namespace, idx);
    let sigma = cfg.sigma();
    let sigma_prime = cfg.sigma_prime();
    let rt = (n as f64).sqrt();
    let normalized = |x: i64| {
        let scale = if x <= 0 { sigma } else { sigma_prime };
        x as f64 / (scale * rt)
    };
    let mut out = Vec::with_capacity(times.len());
    let mut pos = cfg.start;
    let mut prev = pos;
    let mut step_idx = 0usize;
    for &t in times {
        let nt = n as f64 * t;
        let lo = nt.floor() as usize;
        let need = if lo as f64 == nt { lo } else { lo + 1 };
        while step_idx < need {
            prev = pos;
            pos = stepper.step(pos, &mut rng);
            step_idx += 1;
        }
        let v = if lo as f64 == nt {
            // pos holds X_{nt} exactly when step_idx == nt
            if step_idx == lo {
                normalized(pos)
            } else {
                normalized(prev)
            }
        } else {
            let a = normalized(prev);
            let b = normalized(pos);
            a + (nt - lo as f64) * (b - a)
        };
        out.push(v);
    }
    out
}

/// Empirical sample of the rescaled marginal `X^{(n)}(t)` over independent
/// paths. Deterministic given `(seed, paths)`, independent of `workers`.
pub fn mc_marginal(
    cfg: &WalkConfig,
    n: usize,
    t: f64,
    paths: usize,
    workers: usize,
) -> Result<EmpiricalDistribution, SimError> {
    cfg.require_hypotheses()?;
    if paths < MIN_PATHS {
        return Err(SimError::TooFewPaths {
            paths,
            min: MIN_PATHS,
        });
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(SimError::BadTimes);
    }
    let stepper = Stepper::of(cfg);
    let values: Vec<f64> = pool(workers).install(|| {
        (0..paths as u64)
            .into_par_iter()
            .map(|i| path_values(cfg, &stepper, 3, i, n, &[t])[0])
            .collect()
    });
    Ok(EmpiricalDistribution::from_samples(values)?)
}

/// Raw samples of the rescaled process at the given times, one row per
/// path, without the hypothesis gate: degenerate step laws simulate fine,
/// only the limit-law comparisons are gated.
pub fn mc_scaled_samples(
    cfg: &WalkConfig,
    n: usize,
    times: &[f64],
    paths: usize,
    workers: usize,
) -> Result<Vec<Vec<f64>>, SimError> {
    if times.is_empty()
        || times.windows(2).any(|w| w[0] > w[1])
        || times.iter().any(|&t| !(t > 0.0 && t <= 1.0))
    {
        return Err(SimError::BadTimes);
    }
    let stepper = Stepper::of(cfg);
    let times = times.to_vec();
    Ok(pool(workers).install(|| {
        (0..paths as u64)
            .into_par_iter()
            .map(|i| path_values(cfg, &stepper, 6, i, n, &times))
            .collect()
    }))
}

/// Joint empirical sample of `(X^{(n)}(t1), X^{(n)}(t2))`, in path order.
pub fn mc_fdd(
    cfg: &WalkConfig,
    n: usize,
    times: (f64, f64),
    paths: usize,
    workers: usize,
) -> Result<Vec<(f64, f64)>, SimError> {
    cfg.require_hypotheses()?;
    if paths < MIN_PATHS {
        return Err(SimError::TooFewPaths {
            paths,
            min: MIN_PATHS,
        });
    }
    let (t1, t2) = times;
    if !(t1 > 0.0 && t1 < t2 && t2 <= 1.0) {
        return Err(SimError::BadTimes);
    }
    let stepper = Stepper::of(cfg);
    Ok(pool(workers).install(|| {
        (0..paths as u64)
            .into_par_iter()
            .map(|i| {
                let v = path_values(cfg, &stepper, 4, i, n, &[t1, t2]);
                (v[0], v[1])
            })
            .collect()
    }))
}

/// Law-of-large-numbers and recurrence diagnostics over independent paths.
#[derive(Debug, Clone)]
pub struct LlnReport {
    pub n: usize,
    pub checkpoints: Vec<usize>,
    /// Per path: `max_{m in [n/2, n]} |X_m| / m`.
    pub late_ratio: Vec<f64>,
    /// Per path, visits to the origin up to each checkpoint.
    pub zero_visits: Vec<Vec<u64>>,
}

pub fn diagnostics_lln_recurrence(
    cfg: &WalkConfig,
    n: usize,
    paths: usize,
    workers: usize,
) -> Result<LlnReport, SimError> {
    cfg.require_hypotheses()?;
    let checkpoints: Vec<usize> = [1_000usize, 10_000, 100_000]
        .into_iter()
        .filter(|&c| c <= n)
        .collect();
    let stepper = Stepper::of(cfg);
    let rows: Vec<(f64, Vec<u64>)> = pool(workers).install(|| {
        (0..paths as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = cfg.rng(5, i);
                let mut pos = cfg.start;
                let mut visits = 0u64;
                let mut by_checkpoint = Vec::with_capacity(checkpoints.len());
                let mut ratio = 0.0f64;
                for m in 1..=n {
                    pos = stepper.step(pos, &mut rng);
                    if pos == 0 {
                        visits += 1;
                    }
                    if checkpoints.contains(&m) {
                        by_checkpoint.push(visits);
                    }
                    if m >= n / 2 {
                        ratio = ratio.max(pos.abs() as f64 / m as f64);
                    }
                }
                (ratio, by_checkpoint)
            })
            .collect()
    });
    Ok(LlnReport {
        n,
        checkpoints,
        late_ratio: rows.iter().map(|r| r.0).collect(),
        zero_visits: rows.into_iter().map(|r| r.1).collect(),
    })
}
