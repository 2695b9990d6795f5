//! Ladder-height laws of a centered lattice walk.
//!
//! For steps bounded above by `u`, the strict ascending ladder height lives
//! on `{1, ..., u}` and its generating function `chi(z)` satisfies
//! `1 - chi(z) = (1 - z) * prod_{i=1}^{u-1} (1 - z / rho_i)`, where the
//! `rho_i` are the `u - 1` largest-modulus roots of
//! `z^d * (1 - E[z^step])` after removing the double root at `z = 1`
//! (`d` is the maximal down-step). This gives the ladder pmf to machine
//! precision; the killed-walk DP and a direct episode sampler provide
//! independent cross-checks, since the DP route alone converges only like
//! `n^{-1/2}` in its horizon.

use crate::killed::{self, BuildOptions, KilledError, Retention, Side};
use crate::pmf::LatticePmf;
use num_complex::Complex64;
use rand::SeedableRng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderSide {
    /// Strict ascending ladder (first strict new maximum).
    Ascending,
    /// Strict descending ladder (first strict new minimum).
    Descending,
}

#[derive(Debug, Error)]
pub enum LadderError {
    #[error("pmf is not centered (mean {mean:.3e})")]
    NotCentered { mean: f64 },
    #[error("walk cannot ascend (no positive support)")]
    Degenerate,
    #[error(
        "residual ladder mass {residual:.3e} still above tol {tol:.1e} at horizon {horizon}"
    )]
    SlowConvergence {
        residual: f64,
        tol: f64,
        horizon: usize,
    },
    #[error("ladder factorization failed: {0}")]
    Factorization(String),
    #[error(transparent)]
    Killed(#[from] KilledError),
}

/// Distribution of the first strict ladder height, with the epoch tail
/// `P[l_1 > n]` as diagnostic data.
///
/// `heights` sums to `1 - residual_mass`; residual mass is reported, never
/// redistributed, so `mean_height` is exact for the exact route and a
/// lower bound (in absolute value) for the DP route.
#[derive(Debug, Clone)]
pub struct LadderLaw {
    side: LadderSide,
    heights: Vec<(i64, f64)>,
    pub residual_mass: f64,
    pub epoch_tail: Vec<f64>,
    pub mean_height: f64,
}

impl LadderLaw {
    pub fn side(&self) -> LadderSide {
        self.side
    }

    /// Height masses, ascending by site. Positive sites for the ascending
    /// ladder, negative for the descending one.
    pub fn heights(&self) -> &[(i64, f64)] {
        &self.heights
    }

    pub fn height_prob(&self, k: i64) -> f64 {
        self.heights
            .iter()
            .find(|&&(s, _)| s == k)
            .map_or(0.0, |&(_, p)| p)
    }

    /// `E[|height|]` over the captured mass.
    pub fn mean_abs_height(&self) -> f64 {
        self.mean_height.abs()
    }

    /// Renormalized view as a proper pmf; fails if the residual mass is
    /// too large for the pmf invariants.
    pub fn height_pmf(&self) -> Result<LatticePmf, crate::pmf::PmfError> {
        LatticePmf::new(&self.heights)
    }
}

/// Exact ladder law via root factorization. The epoch tail is filled by a
/// short DP run (default horizon 1024).
pub fn ladder_law_exact(pmf: &LatticePmf, side: LadderSide) -> Result<LadderLaw, LadderError> {
    ladder_law_exact_with_tail(pmf, side, 1024)
}

pub fn ladder_law_exact_with_tail(
    pmf: &LatticePmf,
    side: LadderSide,
    tail_horizon: usize,
) -> Result<LadderLaw, LadderError> {
    let mean = pmf.mean();
    if mean.abs() > 1e-9 {
        return Err(LadderError::NotCentered { mean });
    }
    let engine = match side {
        LadderSide::Ascending => pmf.clone(),
        LadderSide::Descending => pmf.mirrored(),
    };
    let q = ascending_ladder_heights(&engine)?;
    let epoch_tail = epoch_tail_dp(&engine, tail_horizon)?;
    let captured: f64 = q.iter().map(|&(_, p)| p).sum();
    let mean_up: f64 = q.iter().map(|&(k, p)| k as f64 * p).sum();
    let (heights, mean_height) = match side {
        LadderSide::Ascending => (q, mean_up),
        LadderSide::Descending => {
            let mut h: Vec<(i64, f64)> = q.into_iter().map(|(k, p)| (-k, p)).collect();
            h.sort_by_key(|e| e.0);
            (h, -mean_up)
        }
    };
    Ok(LadderLaw {
        side,
        heights,
        residual_mass: (1.0 - captured).max(0.0),
        epoch_tail,
        mean_height,
    })
}

/// Ladder law from the killed-walk DP alone: the walk is run from the
/// origin until either the survival mass drops under `tol` or
/// `max_horizon` is hit (`SlowConvergence`). The epoch tail decays like
/// `n^{-1/2}`, so the horizon needed grows like `tol^{-2}`; tolerances
/// below 1e-2 are already expensive and the exact route should be used
/// whenever the masses themselves are the goal.
pub fn ladder_law_dp(
    pmf: &LatticePmf,
    side: LadderSide,
    tol: f64,
    max_horizon: usize,
) -> Result<LadderLaw, LadderError> {
    let mean = pmf.mean();
    if mean.abs() > 1e-9 {
        return Err(LadderError::NotCentered { mean });
    }
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(LadderError::Factorization(format!(
            "tol must lie in (0, 1e-2], got {tol}"
        )));
    }
    let engine = match side {
        LadderSide::Ascending => pmf.clone(),
        LadderSide::Descending => pmf.mirrored(),
    };
    if engine.max_site() < 1 {
        return Err(LadderError::Degenerate);
    }
    // a strict first ascent from 0 is a first passage into {>= 1}, i.e. a
    // killed walk started one site below the barrier; grow the horizon
    // geometrically until the survival mass drops under tol
    let mut horizon_budget = 1024.min(max_horizon).max(1);
    let (table, horizon) = loop {
        let table = killed::build_killed_table_with(
            &engine,
            1,
            Side::Negative,
            horizon_budget,
            BuildOptions {
                depth_tol: 1e-12,
                retention: Retention::FinalOnly,
                max_width: None,
            },
        )?;
        let unresolved = |n: usize| table.survival(n) + table.truncated_cum_at(n);
        if let Some(cut) = (0..=horizon_budget).find(|&n| unresolved(n) < tol) {
            break (table, cut);
        }
        if horizon_budget >= max_horizon {
            return Err(LadderError::SlowConvergence {
                residual: table.survival(horizon_budget),
                tol,
                horizon: max_horizon,
            });
        }
        horizon_budget = (horizon_budget * 4).min(max_horizon);
    };
    let max_up = engine.max_site();
    let mut q = vec![0.0f64; max_up as usize];
    for n in 1..=horizon {
        for (w, p) in table.entrance_law(n) {
            q[w as usize] += p; // exit at w means ladder height w + 1
        }
    }
    let heights_asc: Vec<(i64, f64)> = q
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > 0.0)
        .map(|(w, &p)| (w as i64 + 1, p))
        .collect();
    let captured: f64 = heights_asc.iter().map(|&(_, p)| p).sum();
    let mean_up: f64 = heights_asc.iter().map(|&(k, p)| k as f64 * p).sum();
    let epoch_tail = table.survival_table()[..=horizon].to_vec();
    let (heights, mean_height) = match side {
        LadderSide::Ascending => (heights_asc, mean_up),
        LadderSide::Descending => {
            let mut h: Vec<(i64, f64)> = heights_asc.into_iter().map(|(k, p)| (-k, p)).collect();
            h.sort_by_key(|e| e.0);
            (h, -mean_up)
        }
    };
    Ok(LadderLaw {
        side,
        heights,
        residual_mass: (1.0 - captured).max(0.0),
        epoch_tail,
        mean_height,
    })
}

fn epoch_tail_dp(engine: &LatticePmf, horizon: usize) -> Result<Vec<f64>, LadderError> {
    if engine.max_site() < 1 {
        return Err(LadderError::Degenerate);
    }
    let table = killed::build_killed_table_with(
        engine,
        1,
        Side::Negative,
        horizon.max(1),
        BuildOptions {
            depth_tol: 1e-12,
            retention: Retention::FinalOnly,
            max_width: None,
        },
    )?;
    Ok(table.survival_table().to_vec())
}

/// Strict ascending ladder-height masses `(k, P[height = k])` for a
/// centered pmf, exact up to machine precision.
fn ascending_ladder_heights(pmf: &LatticePmf) -> Result<Vec<(i64, f64)>, LadderError> {
    let u = pmf.max_site();
    if u < 1 {
        return Err(LadderError::Degenerate);
    }
    let d = -pmf.min_site();
    if d < 1 {
        // no negative support: the first step up is the ladder height
        return Err(LadderError::Degenerate);
    }
    // Q(z) = z^d (1 - E[z^step]), coefficients by power of z
    let deg = (d + u) as usize;
    let mut coeffs = vec![0.0f64; deg + 1];
    coeffs[d as usize] = 1.0;
    for (s, p) in pmf.iter() {
        coeffs[(s + d) as usize] -= p;
    }
    // remove the double root at z = 1 (simple by centering: Q''(1) = -sigma^2)
    let r1 = deflate_at_one(&mut coeffs)?;
    let r2 = deflate_at_one(&mut coeffs)?;
    let scale: f64 = coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
    if r1.abs() > 1e-9 * scale || r2.abs() > 1e-9 * scale {
        return Err(LadderError::Factorization(format!(
            "non-negligible remainder deflating z=1: {r1:.3e}, {r2:.3e}"
        )));
    }
    let mut roots = durand_kerner(&coeffs)?;
    // near-circle double roots (periodic step laws) come back with tiny
    // imaginary dust; snap them to the real axis before classifying
    for r in roots.iter_mut() {
        if r.im.abs() < 1e-6 * (1.0 + r.re.abs()) {
            r.im = 0.0;
        }
    }
    // conjugate ordering keeps pairs adjacent under the modulus sort
    roots.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap()
            .then(b.re.partial_cmp(&a.re).unwrap())
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    let take = (u - 1) as usize;
    if roots.len() < take {
        return Err(LadderError::Factorization(format!(
            "expected at least {take} roots, found {}",
            roots.len()
        )));
    }
    if take > 0 && take < roots.len() {
        let (last, first_left) = (roots[take - 1], roots[take]);
        if last.im != 0.0 && (last.conj() - first_left).norm() < 1e-9 {
            return Err(LadderError::Factorization(
                "modulus cut splits a conjugate pair".into(),
            ));
        }
    }
    // 1 - chi(z) = (1 - z) prod (1 - z / rho_i)
    let mut poly: Vec<Complex64> = vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)];
    for rho in roots.iter().take(take) {
        poly = poly_mul_linear(&poly, -1.0 / rho);
    }
    let mut q = Vec::with_capacity(u as usize);
    let mut total = 0.0f64;
    for (k, c) in poly.iter().enumerate().skip(1) {
        if c.im.abs() > 1e-7 {
            return Err(LadderError::Factorization(format!(
                "complex ladder coefficient {c} at degree {k}"
            )));
        }
        let mut p = -c.re;
        if p < -1e-7 {
            return Err(LadderError::Factorization(format!(
                "negative ladder mass {p:.3e} at height {k}"
            )));
        }
        // drop numerical dust so that degenerate heights stay exact
        if p < 1e-9 {
            p = 0.0;
        }
        total += p;
        if p > 0.0 {
            q.push((k as i64, p));
        }
    }
    if (total - 1.0).abs() > 1e-7 {
        return Err(LadderError::Factorization(format!(
            "ladder masses sum to {total}"
        )));
    }
    for e in q.iter_mut() {
        e.1 /= total;
    }
    Ok(q)
}

/// Synthetic division by `(z - 1)`; returns the remainder.
fn deflate_at_one(coeffs: &mut Vec<f64>) -> Result<f64, LadderError> {
    if coeffs.len() < 2 {
        return Err(LadderError::Factorization("degree too small to deflate".into()));
    }
    let n = coeffs.len() - 1;
    let mut quot = vec![0.0f64; n];
    quot[n - 1] = coeffs[n];
    for k in (1..n).rev() {
        quot[k - 1] = coeffs[k] + quot[k];
    }
    let rem = coeffs[0] + quot[0];
    *coeffs = quot;
    Ok(rem)
}

fn poly_mul_linear(p: &[Complex64], a: Complex64) -> Vec<Complex64> {
    // multiply by (1 + a z)
    let mut out = vec![Complex64::new(0.0, 0.0); p.len() + 1];
    for (i, &c) in p.iter().enumerate() {
        out[i] += c;
        out[i + 1] += c * a;
    }
    out
}

/// All roots of a real polynomial (coefficients by ascending power) via
/// Durand-Kerner iteration; intended for the small degrees that arise from
/// finite step supports.
fn durand_kerner(coeffs: &[f64]) -> Result<Vec<Complex64>, LadderError> {
    let mut c = coeffs.to_vec();
    while c.last().is_some_and(|&v| v == 0.0) {
        c.pop();
    }
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = *c.last().unwrap();
    let monic: Vec<Complex64> = c.iter().map(|&v| Complex64::new(v / lead, 0.0)).collect();
    let eval = |z: Complex64| {
        let mut acc = Complex64::new(0.0, 0.0);
        for &co in monic.iter().rev() {
            acc = acc * z + co;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..deg).map(|i| seed.powu(i as u32 + 1)).collect();
    for _ in 0..512 {
        let mut worst = 0.0f64;
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                z[i] += Complex64::new(1e-8, 1e-8);
                worst = f64::INFINITY;
                continue;
            }
            let delta = eval(z[i]) / denom;
            z[i] -= delta;
            worst = worst.max(delta.norm());
        }
        if worst < 1e-15 {
            return Ok(z);
        }
    }
    // accept if the residuals are tiny even without step convergence
    if z.iter().all(|&zi| eval(zi).norm() < 1e-10) {
        return Ok(z);
    }
    Err(LadderError::Factorization("root iteration did not converge".into()))
}

/// Direct Monte Carlo of ladder episodes: counts of the first strict
/// ascent height among episodes completing within `cap` steps, plus the
/// number of censored episodes. An independent oracle for the exact and
/// DP routes.
pub fn ladder_episode_mc(
    pmf: &LatticePmf,
    side: LadderSide,
    episodes: u64,
    cap: usize,
    seed: u64,
) -> (Vec<(i64, u64)>, u64) {
    let engine = match side {
        LadderSide::Ascending => pmf.clone(),
        LadderSide::Descending => pmf.mirrored(),
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut counts: std::collections::BTreeMap<i64, u64> = std::collections::BTreeMap::new();
    let mut censored = 0u64;
    for _ in 0..episodes {
        let mut s: i64 = 0;
        let mut done = false;
        for _ in 0..cap {
            s += engine.sample(&mut rng);
            if s >= 1 {
                let h = match side {
                    LadderSide::Ascending => s,
                    LadderSide::Descending => -s,
                };
                *counts.entry(h).or_insert(0) += 1;
                done = true;
                break;
            }
        }
        if !done {
            censored += 1;
        }
    }
    (counts.into_iter().collect(), censored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pm1() -> LatticePmf {
        LatticePmf::new(&[(-1, 0.5), (1, 0.5)]).unwrap()
    }

    fn uniform3() -> LatticePmf {
        LatticePmf::new(&[(-1, 1.0 / 3.0), (0, 1.0 / 3.0), (1, 1.0 / 3.0)]).unwrap()
    }

    #[test]
    fn unit_upsteps_force_height_one() {
        for pmf in [pm1(), uniform3()] {
            let law = ladder_law_exact(&pmf, LadderSide::Ascending).unwrap();
            assert_eq!(law.heights(), &[(1, 1.0)]);
            assert_relative_eq!(law.mean_height, 1.0);
            assert!(law.residual_mass < 1e-12);
        }
    }

    #[test]
    fn two_point_asymmetric_heights() {
        let pmf = LatticePmf::new(&[(-1, 2.0 / 3.0), (2, 1.0 / 3.0)]).unwrap();
        let law = ladder_law_exact(&pmf, LadderSide::Ascending).unwrap();
        assert_eq!(law.heights().len(), 2);
        assert_relative_eq!(law.height_prob(1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(law.height_prob(2), 0.5, epsilon = 1e-12);
        assert_relative_eq!(law.mean_height, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn three_point_asymmetric_heights() {
        let pmf = LatticePmf::new(&[(-1, 0.5), (0, 0.25), (2, 0.25)]).unwrap();
        let law = ladder_law_exact(&pmf, LadderSide::Ascending).unwrap();
        assert_relative_eq!(law.height_prob(1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(law.height_prob(2), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn descending_mirrors_ascending() {
        let pmf = LatticePmf::new(&[(-1, 0.5), (0, 0.25), (2, 0.25)]).unwrap();
        let desc = ladder_law_exact(&pmf.mirrored(), LadderSide::Descending).unwrap();
        assert_relative_eq!(desc.height_prob(-1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(desc.height_prob(-2), 0.5, epsilon = 1e-12);
        assert_relative_eq!(desc.mean_height, -1.5, epsilon = 1e-12);
    }

    #[test]
    fn periodic_two_step_walk() {
        let pmf = LatticePmf::new(&[(-2, 0.5), (2, 0.5)]).unwrap();
        let law = ladder_law_exact(&pmf, LadderSide::Ascending).unwrap();
        assert_eq!(law.heights(), &[(2, 1.0)]);
    }

    #[test]
    fn dp_route_matches_exact_within_residual() {
        let pmf = LatticePmf::new(&[(-1, 0.5), (0, 0.25), (2, 0.25)]).unwrap();
        let exact = ladder_law_exact(&pmf, LadderSide::Ascending).unwrap();
        let dp = ladder_law_dp(&pmf, LadderSide::Ascending, 5e-3, 1 << 17).unwrap();
        assert!(dp.residual_mass < 5e-3);
        for (k, p) in exact.heights() {
            let diff = (dp.height_prob(*k) - p).abs();
            assert!(diff <= dp.residual_mass + 1e-12, "height {k}: diff {diff}");
        }
        // truncated mean is a lower bound
        assert!(dp.mean_height <= exact.mean_height + 1e-12);
    }

    #[test]
    fn dp_route_reports_slow_convergence() {
        let err = ladder_law_dp(&pm1(), LadderSide::Ascending, 1e-4, 512).unwrap_err();
        assert!(matches!(err, LadderError::SlowConvergence { .. }));
    }

    #[test]
    fn rejects_uncentered() {
        let pmf = LatticePmf::new(&[(-1, 0.6), (1, 0.4)]).unwrap();
        assert!(matches!(
            ladder_law_exact(&pmf, LadderSide::Ascending),
            Err(LadderError::NotCentered { .. })
        ));
    }

    #[test]
    fn epoch_tail_is_nonincreasing() {
        let law = ladder_law_exact(&uniform3(), LadderSide::Ascending).unwrap();
        for w in law.epoch_tail.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
        assert_relative_eq!(law.epoch_tail[0], 1.0);
    }

    #[test]
    fn mc_agrees_with_exact_on_short_episodes() {
        let pmf = LatticePmf::new(&[(-1, 0.5), (0, 0.25), (2, 0.25)]).unwrap();
        let exact = ladder_law_exact(&pmf, LadderSide::Ascending).unwrap();
        let episodes = 200_000u64;
        let cap = 4096;
        let (counts, censored) = ladder_episode_mc(&pmf, LadderSide::Ascending, episodes, cap, 11);
        for (k, c) in &counts {
            let p = exact.height_prob(*k);
            let n = episodes as f64;
            let se = (p * (1.0 - p) / n).sqrt();
            let obs = *c as f64 / n;
            // censoring removes ~P[l1 > cap] mass; allow for it on top of 3 SE
            let slack = 3.0 * se + censored as f64 / n;
            assert!((obs - p).abs() < slack, "height {k}: obs {obs} vs {p}");
        }
    }
}
