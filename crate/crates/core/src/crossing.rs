//! The sign-crossing sub-chain of an oscillating walk.
//!
//! Watch the walk only at the times it changes half-line: from a site
//! `x <= -1` the excursion runs on `mu`-steps until it first reaches
//! `>= 0`; from `x >= 1` it runs on `mu_prime`-steps until it first
//! reaches `<= 0`; from the origin the very next step is a crossing. The
//! positions at those times form a Markov chain whose kernel has a closed
//! form in the ladder potentials, and whose invariant measure `nu` feeds
//! the skew parameter
//! `gamma = c' nu(h'_d) / (c nu(h_a(-.)) + c' nu(h'_d))`.

use crate::ladder::LadderLaw;
use crate::pmf::LatticePmf;
use crate::renewal::{Convention, LimitConstants, RenewalError, RenewalTable};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CrossingError {
    #[error("row {row} leaks mass {defect:.3e} outside the window; enlarge M")]
    WindowTooSmall { row: i64, defect: f64 },
    #[error("power iteration did not reach tol (residual {residual:.3e} after {iterations} iterations)")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invariant measure pairs to zero against both renewal functions")]
    DegenerateMeasure,
    #[error("site {0} outside the window")]
    OutsideWindow(i64),
    #[error(transparent)]
    Renewal(#[from] RenewalError),
}

/// Row-stochastic crossing kernel on the window `[-M, M]`, with per-row
/// truncation defects tracked explicitly.
#[derive(Debug, Clone)]
pub struct CrossingKernel {
    m: i64,
    alpha: f64,
    rows: Vec<Vec<f64>>,
    row_defect: Vec<f64>,
}

/// Maximum tolerated per-row defect before the window is declared too
/// small.
const ROW_DEFECT_TOL: f64 = 1e-6;

/// Builds the crossing kernel from the exact ladder laws of `mu`
/// (ascending) and `mu_prime` (descending).
pub fn crossing_kernel(
    mu: &LatticePmf,
    mu_prime: &LatticePmf,
    alpha: f64,
    m: i64,
    asc: &LadderLaw,
    desc: &LadderLaw,
) -> Result<CrossingKernel, CrossingError> {
    assert!((0.0..=1.0).contains(&alpha), "alpha must lie in [0, 1]");
    assert!(m >= 1, "window must be nonempty");
    let size = (2 * m + 1) as usize;
    let asc_table = crate::renewal::potential(asc, m)?;
    let desc_table = crate::renewal::potential(desc, m)?;
    let asc_heights: Vec<(i64, f64)> = asc.heights().to_vec();
    let desc_heights: Vec<(i64, f64)> =
        desc.heights().iter().map(|&(k, p)| (k.abs(), p)).collect();

    let mut rows = vec![vec![0.0f64; size]; size];
    let mut row_defect = vec![0.0f64; size];
    let idx = |site: i64| (site + m) as usize;

    for x in 1..=m {
        // row -x: land at y >= 0 via sum over the prior ladder level t
        let mut placed = 0.0f64;
        for &(k, p) in &asc_heights {
            for t in 0..x {
                let y = t + k - x;
                if y < 0 {
                    continue;
                }
                let w = p * asc_table.u_at(t)?;
                if y <= m {
                    rows[idx(-x)][idx(y)] += w;
                    placed += w;
                }
            }
        }
        row_defect[idx(-x)] = 1.0 - placed;

        // row +x mirrors with the descending ladder of mu_prime
        let mut placed = 0.0f64;
        for &(k, p) in &desc_heights {
            for t in 0..x {
                let y = -(t + k - x);
                if y > 0 {
                    continue;
                }
                let w = p * desc_table.u_at(t)?;
                if y >= -m {
                    rows[idx(x)][idx(y)] += w;
                    placed += w;
                }
            }
        }
        row_defect[idx(x)] = 1.0 - placed;
    }

    // origin row: one mixture step
    let mut placed = 0.0f64;
    for (s, p) in mu.iter() {
        if s.abs() <= m {
            rows[idx(0)][idx(s)] += alpha * p;
            placed += alpha * p;
        }
    }
    for (s, p) in mu_prime.iter() {
        if s.abs() <= m {
            rows[idx(0)][idx(s)] += (1.0 - alpha) * p;
            placed += (1.0 - alpha) * p;
        }
    }
    row_defect[idx(0)] = 1.0 - placed;

    for site in -m..=m {
        let d = row_defect[idx(site)];
        if d > ROW_DEFECT_TOL {
            return Err(CrossingError::WindowTooSmall {
                row: site,
                defect: d,
            });
        }
    }

    Ok(CrossingKernel {
        m,
        alpha,
        rows,
        row_defect,
    })
}

impl CrossingKernel {
    pub fn window(&self) -> i64 {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn idx(&self, site: i64) -> usize {
        (site + self.m) as usize
    }

    pub fn contains(&self, site: i64) -> bool {
        site.abs() <= self.m
    }

    pub fn entry(&self, x: i64, y: i64) -> f64 {
        if !self.contains(x) || !self.contains(y) {
            return 0.0;
        }
        self.rows[self.idx(x)][self.idx(y)]
    }

    pub fn row(&self, x: i64) -> &[f64] {
        &self.rows[self.idx(x)]
    }

    /// Dense row-major view of the whole kernel.
    pub fn raw_rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row_defect(&self, x: i64) -> f64 {
        self.row_defect[self.idx(x)]
    }

    pub fn max_row_defect(&self) -> f64 {
        self.row_defect.iter().copied().fold(0.0, f64::max)
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> {
        -self.m..=self.m
    }
}

/// Invariant probability measure of the crossing chain on its essential
/// class.
#[derive(Debug, Clone)]
pub struct InvariantMeasure {
    m: i64,
    weights: Vec<f64>,
    pub support: Vec<i64>,
    pub iterations: usize,
    pub residual: f64,
}

impl InvariantMeasure {
    /// Assembles a measure directly from `(site, weight)` pairs.
    pub fn from_weights(m: i64, entries: &[(i64, f64)]) -> Self {
        let mut weights = vec![0.0f64; (2 * m + 1) as usize];
        for &(s, w) in entries {
            weights[(s + m) as usize] = w;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let support = entries
            .iter()
            .filter(|&&(_, w)| w > 0.0)
            .map(|&(s, _)| s)
            .collect();
        Self {
            m,
            weights,
            support,
            iterations: 0,
            residual: 0.0,
        }
    }

    pub fn weight_at(&self, site: i64) -> f64 {
        let idx = site + self.m;
        if idx < 0 || idx as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[idx as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let m = self.m;
        self.weights
            .iter()
            .enumerate()
            .filter(|&(_, &w)| w > 0.0)
            .map(move |(i, &w)| (i as i64 - m, w))
    }

    /// Total-variation distance to a map of site frequencies.
    pub fn tv_distance(&self, freq: &std::collections::BTreeMap<i64, f64>) -> f64 {
        let mut sites: std::collections::BTreeSet<i64> = freq.keys().copied().collect();
        sites.extend(self.iter().map(|(s, _)| s));
        0.5 * sites
            .into_iter()
            .map(|s| (self.weight_at(s) - freq.get(&s).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
    }
}

/// Left power iteration `nu <- nu C` with L1 normalization each sweep.
pub fn power_iteration(
    rows: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize, f64), CrossingError> {
    let n = rows.len();
    let mut nu = vec![1.0 / n as f64; n];
    let mut next = vec![0.0f64; n];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, w) in nu.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let row = &rows[i];
            for (j, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    next[j] += w * c;
                }
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        residual = nu
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum();
        std::mem::swap(&mut nu, &mut next);
        if residual <= tol {
            return Ok((nu, it, residual));
        }
    }
    Err(CrossingError::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

/// Computes `nu` by power iteration; geometric convergence is guaranteed
/// by the uniform minorization of the crossing kernel.
pub fn invariant_measure(
    kernel: &CrossingKernel,
    tol: f64,
) -> Result<InvariantMeasure, CrossingError> {
    invariant_measure_with(kernel, tol, 100_000)
}

pub fn invariant_measure_with(
    kernel: &CrossingKernel,
    tol: f64,
    max_iter: usize,
) -> Result<InvariantMeasure, CrossingError> {
    let (mut weights, iterations, residual) = power_iteration(&kernel.rows, tol, max_iter)?;
    // clear numerical dust off the essential class
    for w in weights.iter_mut() {
        if *w < 1e-14 {
            *w = 0.0;
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let m = kernel.m;
    let support: Vec<i64> = weights
        .iter()
        .enumerate()
        .filter(|&(_, &w)| w > 0.0)
        .map(|(i, _)| i as i64 - m)
        .collect();
    Ok(InvariantMeasure {
        m,
        weights,
        support,
        iterations,
        residual,
    })
}

/// L1 residual `||nu C - nu||_1` of a measure against the kernel.
pub fn fixed_point_residual(kernel: &CrossingKernel, nu: &InvariantMeasure) -> f64 {
    let n = kernel.rows.len();
    let mut image = vec![0.0f64; n];
    for (i, row) in kernel.rows.iter().enumerate() {
        let w = nu.weights[i];
        if w == 0.0 {
            continue;
        }
        for (j, &c) in row.iter().enumerate() {
            image[j] += w * c;
        }
    }
    image
        .iter()
        .zip(nu.weights.iter())
        .map(|(a, b)| (a - b).abs())
        .sum()
}

/// The unique closed communication class reachable from `start`,
/// restricted to the window (Kosaraju on the positive-entry digraph).
#[allow(clippy::needless_range_loop)]
pub fn essential_class(kernel: &CrossingKernel, start: i64) -> Result<Vec<i64>, CrossingError> {
    if !kernel.contains(start) {
        return Err(CrossingError::OutsideWindow(start));
    }
    let n = kernel.rows.len();
    let edge = |i: usize, j: usize| kernel.rows[i][j] > 1e-15;

    // forward DFS from start: reachability + finish order
    let s0 = kernel.idx(start);
    let mut reach = vec![false; n];
    let mut order: Vec<usize> = Vec::new();
    let mut stack: Vec<(usize, usize)> = vec![(s0, 0)];
    reach[s0] = true;
    while let Some(&(i, cursor)) = stack.last() {
        let mut pushed = false;
        for j in cursor..n {
            stack.last_mut().unwrap().1 = j + 1;
            if edge(i, j) && !reach[j] {
                reach[j] = true;
                stack.push((j, 0));
                pushed = true;
                break;
            }
        }
        if !pushed {
            order.push(i);
            stack.pop();
        }
    }

    // backward DFS in reverse finish order labels the SCCs
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0usize;
    for &v in order.iter().rev() {
        if comp[v] != usize::MAX {
            continue;
        }
        let mut st = vec![v];
        comp[v] = ncomp;
        while let Some(i) = st.pop() {
            for j in 0..n {
                if reach[j] && comp[j] == usize::MAX && edge(j, i) {
                    comp[j] = ncomp;
                    st.push(j);
                }
            }
        }
        ncomp += 1;
    }

    // the essential class is the reachable SCC with no outgoing edge
    let mut closed: Vec<Vec<i64>> = Vec::new();
    for c in 0..ncomp {
        let members: Vec<usize> = (0..n).filter(|&i| comp[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        let leaves = members
            .iter()
            .any(|&i| (0..n).any(|j| edge(i, j) && comp[j] != c));
        // a lone transient state without a self-loop is not a class
        let is_class = members.len() > 1 || edge(members[0], members[0]);
        if !leaves && is_class {
            closed.push(members.iter().map(|&i| i as i64 - kernel.m).collect());
        }
    }
    debug_assert!(closed.len() <= 1, "multiple closed classes in window");
    closed
        .pop()
        .map(|mut v| {
            v.sort_unstable();
            v
        })
        .ok_or(CrossingError::NoConvergence {
            iterations: 0,
            residual: f64::NAN,
        })
}

/// Skew parameter of the scaling limit:
/// `gamma = c' nu(h'_d) / (c nu(h_a(-.)) + c' nu(h'_d))`, pairing the
/// negative support of `nu` with the ascending renewal function of `mu`
/// and the positive support with the descending renewal function of
/// `mu_prime`. The origin contributes to neither sum.
pub fn gamma(
    nu: &InvariantMeasure,
    asc_table: &RenewalTable,
    desc_table: &RenewalTable,
    constants: &LimitConstants,
    convention: Convention,
) -> Result<f64, CrossingError> {
    let (neg, pos) = nu_renewal_pairings(nu, asc_table, desc_table, convention)?;
    let a = constants.c * neg;
    let b = constants.c_prime * pos;
    if a + b == 0.0 {
        return Err(CrossingError::DegenerateMeasure);
    }
    Ok(b / (a + b))
}

/// `nu`-weighted renewal pairings `(nu(h_a(-.)), nu(h'_d))`, the two
/// halves of the gamma denominator.
pub fn nu_renewal_pairings(
    nu: &InvariantMeasure,
    asc_table: &RenewalTable,
    desc_table: &RenewalTable,
    convention: Convention,
) -> Result<(f64, f64), CrossingError> {
    let mut neg = 0.0f64;
    let mut pos = 0.0f64;
    for (site, w) in nu.iter() {
        if site <= -1 {
            neg += w * asc_table.renewal_function(-site, convention)?;
        } else if site >= 1 {
            pos += w * desc_table.renewal_function(site, convention)?;
        }
    }
    Ok((neg, pos))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::{ladder_law_exact, LadderSide};
    use crate::renewal::{limit_constants, potential};
    use approx::assert_relative_eq;

    fn uniform3() -> LatticePmf {
        LatticePmf::new(&[(-1, 1.0 / 3.0), (0, 1.0 / 3.0), (1, 1.0 / 3.0)]).unwrap()
    }

    fn asym3() -> LatticePmf {
        LatticePmf::new(&[(-1, 0.5), (0, 0.25), (2, 0.25)]).unwrap()
    }

    fn build(mu: &LatticePmf, mu_prime: &LatticePmf, alpha: f64, m: i64) -> CrossingKernel {
        let asc = ladder_law_exact(mu, LadderSide::Ascending).unwrap();
        let desc = ladder_law_exact(mu_prime, LadderSide::Descending).unwrap();
        crossing_kernel(mu, mu_prime, alpha, m, &asc, &desc).unwrap()
    }

    fn gamma_of(mu: &LatticePmf, mu_prime: &LatticePmf, alpha: f64, m: i64) -> f64 {
        let asc = ladder_law_exact(mu, LadderSide::Ascending).unwrap();
        let desc = ladder_law_exact(mu_prime, LadderSide::Descending).unwrap();
        let kernel = crossing_kernel(mu, mu_prime, alpha, m, &asc, &desc).unwrap();
        let nu = invariant_measure(&kernel, 1e-13).unwrap();
        let asc_table = potential(&asc, m).unwrap();
        let desc_table = potential(&desc, m).unwrap();
        let k = limit_constants(mu, mu_prime, 1e-9).unwrap();
        gamma(&nu, &asc_table, &desc_table, &k, Convention::HalfOpen).unwrap()
    }

    #[test]
    fn uniform3_kernel_rows_are_deltas() {
        let k = build(&uniform3(), &uniform3(), 0.5, 16);
        for x in 1..=16 {
            assert_relative_eq!(k.entry(-x, 0), 1.0, epsilon = 1e-12);
            assert_relative_eq!(k.entry(x, 0), 1.0, epsilon = 1e-12);
            assert!(k.row_defect(-x).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_row_is_pure_mu_at_alpha_one() {
        let mu = asym3();
        let k = build(&mu, &uniform3(), 1.0, 16);
        for (s, p) in mu.iter() {
            assert_relative_eq!(k.entry(0, s), p, epsilon = 1e-14);
        }
        assert_relative_eq!(k.entry(0, 1), 0.0);
    }

    #[test]
    fn sign_structure() {
        let k = build(&asym3(), &uniform3(), 0.3, 24);
        for x in 1..=24i64 {
            for y in 1..=24i64 {
                assert_eq!(k.entry(x, y), 0.0);
                assert_eq!(k.entry(-x, -y), 0.0);
            }
        }
    }

    #[test]
    fn asym3_rows_match_hand_unrolled_values() {
        // ladder {1: 1/2, 2: 1/2}, U = (1, 1/2, 3/4, ...)
        let k = build(&asym3(), &uniform3(), 0.5, 16);
        assert_relative_eq!(k.entry(-1, 0), 0.5, epsilon = 1e-12);
        assert_relative_eq!(k.entry(-1, 1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(k.entry(-2, 0), 0.75, epsilon = 1e-12);
        assert_relative_eq!(k.entry(-2, 1), 0.25, epsilon = 1e-12);
        // unit down-steps on the positive side
        assert_relative_eq!(k.entry(3, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform3_invariant_measure() {
        let k = build(&uniform3(), &uniform3(), 0.5, 16);
        let nu = invariant_measure(&k, 1e-13).unwrap();
        assert_relative_eq!(nu.weight_at(0), 0.6, epsilon = 1e-10);
        assert_relative_eq!(nu.weight_at(-1), 0.2, epsilon = 1e-10);
        assert_relative_eq!(nu.weight_at(1), 0.2, epsilon = 1e-10);
        assert!(fixed_point_residual(&k, &nu) < 1e-12);
    }

    #[test]
    fn asym3_invariant_measure_alpha_one() {
        let k = build(&asym3(), &uniform3(), 1.0, 16);
        let nu = invariant_measure(&k, 1e-13).unwrap();
        assert_relative_eq!(nu.weight_at(-1), 0.25, epsilon = 1e-10);
        assert_relative_eq!(nu.weight_at(0), 0.5, epsilon = 1e-10);
        assert_relative_eq!(nu.weight_at(1), 0.125, epsilon = 1e-10);
        assert_relative_eq!(nu.weight_at(2), 0.125, epsilon = 1e-10);
    }

    #[test]
    fn extra_iterations_do_not_degrade_fixed_point() {
        let k = build(&asym3(), &uniform3(), 0.5, 16);
        let nu = invariant_measure(&k, 1e-13).unwrap();
        let r0 = fixed_point_residual(&k, &nu);
        let mut w: Vec<f64> = (-16..=16).map(|s| nu.weight_at(s)).collect();
        for _ in 0..10 {
            let mut next = vec![0.0; w.len()];
            for (i, wi) in w.iter().enumerate() {
                for (j, &c) in k.raw_rows()[i].iter().enumerate() {
                    next[j] += wi * c;
                }
            }
            let t: f64 = next.iter().sum();
            next.iter_mut().for_each(|v| *v /= t);
            w = next;
        }
        let mut drift = 0.0f64;
        for (i, s) in (-16..=16).enumerate() {
            drift += (w[i] - nu.weight_at(s)).abs();
        }
        assert!(drift <= r0.max(1e-12) * 20.0, "drift {drift} vs residual {r0}");
    }

    #[test]
    fn essential_class_uniform3() {
        let k = build(&uniform3(), &uniform3(), 0.5, 16);
        let class = essential_class(&k, 0).unwrap();
        assert_eq!(class, vec![-1, 0, 1]);
        assert_eq!(essential_class(&k, -1).unwrap(), class);
        // reached from any window site as well
        assert_eq!(essential_class(&k, -9).unwrap(), class);
    }

    #[test]
    fn gamma_special_cases() {
        assert_relative_eq!(gamma_of(&uniform3(), &uniform3(), 0.5, 32), 0.5, epsilon = 1e-11);
        // hand-computed skew parameter 3/5 for the asymmetric pair
        assert_relative_eq!(gamma_of(&asym3(), &uniform3(), 1.0, 32), 0.6, epsilon = 1e-10);
        assert_relative_eq!(gamma_of(&asym3(), &uniform3(), 0.0, 32), 0.6, epsilon = 1e-10);
    }

    #[test]
    fn gamma_mirror_identity() {
        let mu = asym3();
        let mp = uniform3();
        let g = gamma_of(&mu, &mp, 0.3, 32);
        let g_mirror = gamma_of(&mp.mirrored(), &mu.mirrored(), 0.3, 32);
        assert_relative_eq!(g + g_mirror, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn row_defects_negligible_at_every_window() {
        // landing sites are spatially bounded and the ladder laws exact,
        // so widening the window never uncovers missing mass
        for m in [16, 32, 64] {
            let k = build(&asym3(), &uniform3(), 0.5, m);
            assert!(k.max_row_defect() <= 1e-12, "M = {m}");
        }
    }

    #[test]
    fn window_too_small_is_detected() {
        let wide = LatticePmf::new(&[(-1, 0.8), (0, 0.1), (8, 0.1)]).unwrap();
        let asc = ladder_law_exact(&wide, LadderSide::Ascending).unwrap();
        let desc = ladder_law_exact(&uniform3(), LadderSide::Descending).unwrap();
        let err = crossing_kernel(&wide, &uniform3(), 0.5, 4, &asc, &desc).unwrap_err();
        assert!(matches!(err, CrossingError::WindowTooSmall { .. }));
    }

    #[test]
    fn no_convergence_error_path() {
        let k = build(&uniform3(), &uniform3(), 0.5, 8);
        let err = invariant_measure_with(&k, 1e-16, 2).unwrap_err();
        assert!(matches!(err, CrossingError::NoConvergence { .. }));
    }

    #[test]
    fn permutation_equivariance_of_power_iteration() {
        let k = build(&asym3(), &uniform3(), 0.5, 4);
        let n = k.raw_rows().len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let mut permuted = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                permuted[perm[i]][perm[j]] = k.raw_rows()[i][j];
            }
        }
        let (nu, _, _) = power_iteration(k.raw_rows(), 1e-13, 100_000).unwrap();
        let (nu_p, _, _) = power_iteration(&permuted, 1e-13, 100_000).unwrap();
        for i in 0..n {
            assert_relative_eq!(nu[i], nu_p[perm[i]], epsilon = 1e-10);
        }
    }

    #[test]
    fn degenerate_measure_error() {
        let nu = InvariantMeasure::from_weights(16, &[(0, 1.0)]);
        let asc = ladder_law_exact(&uniform3(), LadderSide::Ascending).unwrap();
        let t = potential(&asc, 16).unwrap();
        let consts = limit_constants(&uniform3(), &uniform3(), 1e-9).unwrap();
        let err = gamma(&nu, &t, &t, &consts, Convention::HalfOpen).unwrap_err();
        assert!(matches!(err, CrossingError::DegenerateMeasure));
    }
}
