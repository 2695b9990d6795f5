//! The operator renewal sequence of the crossing chain.
//!
//! `C_n(x, y) = P_x[first crossing at time n, landing at y]` and the
//! convolution family `H_0 = I`, `H_n = sum_{j<=n} C_j H_{n-j}`, whose
//! entries sum the probabilities of hitting `(n, y)` at *some* crossing.
//!
//! Structure used throughout: every crossing lands in the finite core set
//! (negative-side exits, positive-side exits, and the origin mixture
//! support), so all `H_n` columns vanish off the core and the convolution
//! recursion closes on core-indexed matrices. Full-window rows are
//! reconstructed on demand; nothing quadratic in the horizon is stored.

use crate::crossing::{CrossingKernel, InvariantMeasure};
use crate::killed::{self, BuildOptions, KilledError, Retention, Side, SiteVec};
use crate::ladder::LadderLaw;
use crate::pmf::LatticePmf;
use crate::renewal::{self, RenewalError};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("window M = {m} cannot hold the crossing core (needs {needed})")]
    WindowTooSmall { m: i64, needed: i64 },
    #[error(transparent)]
    Killed(#[from] KilledError),
    #[error(transparent)]
    Renewal(#[from] RenewalError),
}

/// Weight `w(x) = 1 + |x|^{1+delta}` of the polynomially weighted
/// function space the crossing operators act on.
#[derive(Debug, Clone, Copy)]
pub struct WeightedNorm {
    pub delta: f64,
}

impl WeightedNorm {
    pub fn new(delta: f64) -> Self {
        assert!(delta > 0.0, "delta must be positive");
        Self { delta }
    }

    #[inline]
    pub fn weight(&self, x: i64) -> f64 {
        1.0 + (x.abs() as f64).powf(1.0 + self.delta)
    }
}

/// Weighted row norm `sup_x sum_y |A(x, y)| w(y) / w(x)` of a dense
/// window matrix.
pub fn mat_weighted_norm(mat: &Mat, norm: &WeightedNorm) -> f64 {
    let mut sup = 0.0f64;
    for x in -mat.m..=mat.m {
        let mut s = 0.0;
        for y in -mat.m..=mat.m {
            let v = mat.get(x, y);
            if v != 0.0 {
                s += v.abs() * norm.weight(y);
            }
        }
        sup = sup.max(s / norm.weight(x));
    }
    sup
}

/// Dense matrix on the window `[-M, M]^2`.
#[derive(Debug, Clone)]
pub struct Mat {
    pub m: i64,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(m: i64) -> Self {
        let size = (2 * m + 1) as usize;
        Self {
            m,
            data: vec![0.0; size * size],
        }
    }

    pub fn identity(m: i64) -> Self {
        let mut out = Self::zeros(m);
        for x in -m..=m {
            out.set(x, x, 1.0);
        }
        out
    }

    #[inline]
    fn idx(&self, x: i64, y: i64) -> usize {
        let size = (2 * self.m + 1) as usize;
        (x + self.m) as usize * size + (y + self.m) as usize
    }

    #[inline]
    pub fn get(&self, x: i64, y: i64) -> f64 {
        if x.abs() > self.m || y.abs() > self.m {
            0.0
        } else {
            self.data[self.idx(x, y)]
        }
    }

    #[inline]
    pub fn set(&mut self, x: i64, y: i64, v: f64) {
        let i = self.idx(x, y);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, x: i64, y: i64, v: f64) {
        let i = self.idx(x, y);
        self.data[i] += v;
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!(self.m, other.m);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Dense product, for small test oracles.
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.m, other.m);
        let m = self.m;
        let size = (2 * m + 1) as usize;
        let mut out = Mat::zeros(m);
        for i in 0..size {
            for k in 0..size {
                let a = self.data[i * size + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..size {
                    out.data[i * size + j] += a * other.data[k * size + j];
                }
            }
        }
        out
    }
}

/// Time-resolved crossing rows for one starting site.
#[derive(Debug, Clone)]
struct CnRow {
    exit_lo: i64,
    width: usize,
    /// `per_n[(n-1) * width + (y - exit_lo)] = C_n(x, y)`.
    per_n: Vec<f64>,
    /// `P_x[C_1 > n]` for `n = 0..=n_max`.
    survival: Vec<f64>,
    /// Surviving spatial mass at the horizon, user coordinates.
    alive_final: SiteVec,
}

/// The sequence `C_1..C_{n_max}` on a window, with per-row survival tails
/// retained so that tail sums need no extra passes.
#[derive(Debug, Clone)]
pub struct CnSeq {
    m: i64,
    n_max: usize,
    mix: Vec<(i64, f64)>,
    /// Index `i` holds the row of `x = -(i+1)`.
    neg: Vec<CnRow>,
    /// Index `i` holds the row of `x = +(i+1)`.
    pos: Vec<CnRow>,
}

fn row_from_table(table: &killed::KilledWalkTable, exit_lo: i64, width: usize) -> CnRow {
    let n_max = table.horizon();
    let mut per_n = vec![0.0f64; n_max * width];
    for n in 1..=n_max {
        for (y, p) in table.entrance_law(n) {
            per_n[(n - 1) * width + (y - exit_lo) as usize] = p;
        }
    }
    CnRow {
        exit_lo,
        width,
        per_n,
        survival: table.survival_table().to_vec(),
        alive_final: table.alive_final(),
    }
}

/// Builds all `C_n` rows on the window `[-M, M]` up to horizon `n_max`.
pub fn build_cn(
    mu: &LatticePmf,
    mu_prime: &LatticePmf,
    alpha: f64,
    m: i64,
    n_max: usize,
    depth_tol: f64,
) -> Result<CnSeq, OperatorError> {
    let needed = core_sites(mu, mu_prime)
        .iter()
        .map(|s| s.abs())
        .max()
        .unwrap_or(0);
    if m < needed {
        return Err(OperatorError::WindowTooSmall { m, needed });
    }
    let neg_width = mu.max_site().max(1) as usize;
    let pos_width = (-mu_prime.min_site()).max(1) as usize;
    let opts = BuildOptions {
        depth_tol,
        retention: Retention::FinalOnly,
        max_width: None,
    };
    let neg: Result<Vec<CnRow>, OperatorError> = (1..=m)
        .into_par_iter()
        .map(|x| {
            let t = killed::build_killed_table_with(mu, x, Side::Negative, n_max, opts.clone())?;
            Ok(row_from_table(&t, 0, neg_width))
        })
        .collect();
    let pos: Result<Vec<CnRow>, OperatorError> = (1..=m)
        .into_par_iter()
        .map(|x| {
            let t =
                killed::build_killed_table_with(mu_prime, x, Side::Positive, n_max, opts.clone())?;
            Ok(row_from_table(&t, 1 - pos_width as i64, pos_width))
        })
        .collect();
    let mut mix: std::collections::BTreeMap<i64, f64> = Default::default();
    for (s, p) in mu.iter() {
        *mix.entry(s).or_insert(0.0) += alpha * p;
    }
    for (s, p) in mu_prime.iter() {
        *mix.entry(s).or_insert(0.0) += (1.0 - alpha) * p;
    }
    Ok(CnSeq {
        m,
        n_max,
        mix: mix.into_iter().filter(|&(_, p)| p > 0.0).collect(),
        neg: neg?,
        pos: pos?,
    })
}

/// Every site a crossing can land on: negative-side exits, positive-side
/// exits, and the origin mixture support.
pub fn core_sites(mu: &LatticePmf, mu_prime: &LatticePmf) -> Vec<i64> {
    let mut set = std::collections::BTreeSet::new();
    for y in 0..mu.max_site().max(1) {
        set.insert(y);
    }
    for y in (1 - (-mu_prime.min_site()).max(1))..=0 {
        set.insert(y);
    }
    for (s, _) in mu.iter() {
        set.insert(s);
    }
    for (s, _) in mu_prime.iter() {
        set.insert(s);
    }
    set.into_iter().collect()
}

impl CnSeq {
    pub fn window(&self) -> i64 {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.n_max
    }

    pub fn mix(&self) -> &[(i64, f64)] {
        &self.mix
    }

    fn row(&self, x: i64) -> Option<&CnRow> {
        if x <= -1 && -x <= self.m {
            Some(&self.neg[(-x - 1) as usize])
        } else if x >= 1 && x <= self.m {
            Some(&self.pos[(x - 1) as usize])
        } else {
            None
        }
    }

    pub fn entry(&self, n: usize, x: i64, y: i64) -> f64 {
        assert!(n >= 1 && n <= self.n_max);
        if x == 0 {
            if n == 1 {
                return self
                    .mix
                    .iter()
                    .find(|&&(s, _)| s == y)
                    .map_or(0.0, |&(_, p)| p);
            }
            return 0.0;
        }
        match self.row(x) {
            Some(r) => {
                let off = y - r.exit_lo;
                if off < 0 || off as usize >= r.width {
                    0.0
                } else {
                    r.per_n[(n - 1) * r.width + off as usize]
                }
            }
            None => 0.0,
        }
    }

    /// Nonzero entries of the row of `x` at time `n`.
    pub fn row_entries(&self, n: usize, x: i64) -> Vec<(i64, f64)> {
        assert!(n >= 1 && n <= self.n_max);
        if x == 0 {
            return if n == 1 { self.mix.clone() } else { Vec::new() };
        }
        match self.row(x) {
            Some(r) => (0..r.width)
                .filter_map(|i| {
                    let v = r.per_n[(n - 1) * r.width + i];
                    (v != 0.0).then_some((r.exit_lo + i as i64, v))
                })
                .collect(),
            None => Vec::new(),
        }
    }

    /// `P_x[C_1 = n]`.
    pub fn exit_prob(&self, n: usize, x: i64) -> f64 {
        if x == 0 {
            return if n == 1 {
                self.mix.iter().map(|&(_, p)| p).sum()
            } else {
                0.0
            };
        }
        match self.row(x) {
            Some(r) => (0..r.width).map(|i| r.per_n[(n - 1) * r.width + i]).sum(),
            None => 0.0,
        }
    }

    /// `P_x[C_1 > n]`.
    pub fn survival(&self, n: usize, x: i64) -> f64 {
        if x == 0 {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        match self.row(x) {
            Some(r) => r.survival[n],
            None => 0.0,
        }
    }

    /// Surviving spatial mass of the row of `x` at the horizon.
    pub fn alive_final(&self, x: i64) -> Option<&SiteVec> {
        self.row(x).map(|r| &r.alive_final)
    }

    /// Dense window matrix of `C_n`.
    pub fn matrix(&self, n: usize) -> Mat {
        let mut out = Mat::zeros(self.m);
        for x in -self.m..=self.m {
            for (y, v) in self.row_entries(n, x) {
                if y.abs() <= self.m {
                    out.set(x, y, v);
                }
            }
        }
        out
    }

    /// Finite-window weighted row norm of `C_n`.
    pub fn weighted_norm(&self, n: usize, norm: &WeightedNorm) -> f64 {
        let mut sup = 0.0f64;
        for x in -self.m..=self.m {
            let mut s = 0.0;
            for (y, v) in self.row_entries(n, x) {
                s += v.abs() * norm.weight(y);
            }
            sup = sup.max(s / norm.weight(x));
        }
        sup
    }
}

/// The renewal convolution `H_n` held on the crossing core.
#[derive(Debug)]
pub struct OperatorSeq {
    pub cn: CnSeq,
    core: Vec<i64>,
    /// `a[n]` is `H_n` restricted to core rows and columns, `k x k`
    /// row-major.
    a: Vec<Vec<f64>>,
}

/// Builds `H_n` for `n = 0..=horizon` by the core-closed recursion.
#[allow(clippy::needless_range_loop)]
pub fn build_hn(cn: CnSeq, mu: &LatticePmf, mu_prime: &LatticePmf) -> OperatorSeq {
    let core = core_sites(mu, mu_prime);
    let k = core.len();
    let n_max = cn.n_max;
    // core-restricted C_n as dense k x k per n
    let mut core_c = vec![vec![0.0f64; k * k]; n_max + 1];
    for (zi, &z) in core.iter().enumerate() {
        for n in 1..=n_max {
            for (y, v) in cn.row_entries(n, z) {
                if let Ok(yi) = core.binary_search(&y) {
                    core_c[n][zi * k + yi] = v;
                }
            }
        }
    }
    let mut a = vec![vec![0.0f64; k * k]; n_max + 1];
    for i in 0..k {
        a[0][i * k + i] = 1.0;
    }
    for n in 1..=n_max {
        let (head, tail) = a.split_at_mut(n);
        let an = &mut tail[0];
        for j in 1..=n {
            let cj = &core_c[j];
            let h = &head[n - j];
            for zi in 0..k {
                for wi in 0..k {
                    let c = cj[zi * k + wi];
                    if c == 0.0 {
                        continue;
                    }
                    let hrow = &h[wi * k..(wi + 1) * k];
                    let arow = &mut an[zi * k..(zi + 1) * k];
                    for yi in 0..k {
                        arow[yi] += c * hrow[yi];
                    }
                }
            }
        }
    }
    OperatorSeq { cn, core, a }
}

impl OperatorSeq {
    pub fn core(&self) -> &[i64] {
        &self.core
    }

    pub fn horizon(&self) -> usize {
        self.cn.n_max
    }

    /// `H_n(x, y)`; zero off the core columns for `n >= 1`.
    pub fn hn_entry(&self, n: usize, x: i64, y: i64) -> f64 {
        if n == 0 {
            return if x == y { 1.0 } else { 0.0 };
        }
        let Ok(yi) = self.core.binary_search(&y) else {
            return 0.0;
        };
        if let Ok(xi) = self.core.binary_search(&x) {
            return self.a[n][xi * self.core.len() + yi];
        }
        self.hn_row(n, x)[yi]
    }

    /// Full row of `H_n` for any window site, on core columns.
    pub fn hn_row(&self, n: usize, x: i64) -> Vec<f64> {
        let k = self.core.len();
        if n == 0 {
            let mut out = vec![0.0; k];
            if let Ok(xi) = self.core.binary_search(&x) {
                out[xi] = 1.0;
            }
            return out;
        }
        if let Ok(xi) = self.core.binary_search(&x) {
            return self.a[n][xi * k..(xi + 1) * k].to_vec();
        }
        let mut out = vec![0.0f64; k];
        for j in 1..=n {
            for (w, c) in self.cn.row_entries(j, x) {
                if let Ok(wi) = self.core.binary_search(&w) {
                    let h = &self.a[n - j][wi * k..(wi + 1) * k];
                    for yi in 0..k {
                        out[yi] += c * h[yi];
                    }
                }
            }
        }
        out
    }

    /// Dense window matrix of `H_n`.
    pub fn hn_matrix(&self, n: usize) -> Mat {
        let m = self.cn.m;
        if n == 0 {
            return Mat::identity(m);
        }
        let mut out = Mat::zeros(m);
        for x in -m..=m {
            let row = self.hn_row(n, x);
            for (yi, &v) in row.iter().enumerate() {
                let y = self.core[yi];
                if y.abs() <= m && v != 0.0 {
                    out.set(x, y, v);
                }
            }
        }
        out
    }

    /// Replays `H_n - sum_j C_j H_{n-j}` on the full window; a data
    /// integrity check (the recursion itself defines `H_n`).
    pub fn renewal_identity_residual(&self, n: usize) -> f64 {
        assert!(n >= 1);
        let lhs = self.hn_matrix(n);
        let mut rhs = Mat::zeros(self.cn.m);
        for j in 1..=n {
            let h = if n - j == 0 {
                None
            } else {
                Some(())
            };
            for x in -self.cn.m..=self.cn.m {
                for (w, c) in self.cn.row_entries(j, x) {
                    match h {
                        None => {
                            if w.abs() <= self.cn.m {
                                rhs.add(x, w, c);
                            }
                        }
                        Some(()) => {
                            let hw = self.hn_row(n - j, w);
                            for (yi, &v) in hw.iter().enumerate() {
                                let y = self.core[yi];
                                if v != 0.0 && y.abs() <= self.cn.m {
                                    rhs.add(x, y, c * v);
                                }
                            }
                        }
                    }
                }
            }
        }
        lhs.max_abs_diff(&rhs)
    }
}

/// Naive dense convolution oracle for small horizons, independent of the
/// core-closed recursion.
pub fn hn_dense_oracle(cn: &CnSeq, up_to: usize) -> Vec<Mat> {
    let m = cn.m;
    let mut h: Vec<Mat> = vec![Mat::identity(m)];
    for n in 1..=up_to {
        let mut acc = Mat::zeros(m);
        for j in 1..=n {
            let prod = cn.matrix(j).matmul(&h[n - j]);
            for x in -m..=m {
                for y in -m..=m {
                    let v = prod.get(x, y);
                    if v != 0.0 {
                        acc.add(x, y, v);
                    }
                }
            }
        }
        h.push(acc);
    }
    h
}

/// `r_n = sum_x nu(x) P_x[C_1 = n]` for `n = 1..=horizon` (index 0 unused).
pub fn rn_sequence(cn: &CnSeq, nu: &InvariantMeasure) -> Vec<f64> {
    let mut r = vec![0.0f64; cn.n_max + 1];
    for (x, w) in nu.iter() {
        for (n, rn) in r.iter_mut().enumerate().skip(1) {
            *rn += w * cn.exit_prob(n, x);
        }
    }
    r
}

/// `sum_{j > n} r_j`, evaluated through the survival tails.
pub fn rn_tail(cn: &CnSeq, nu: &InvariantMeasure, n: usize) -> f64 {
    nu.iter().map(|(x, w)| w * cn.survival(n, x)).sum()
}

/// Diagnostics of the rank-one renewal limit `sqrt(n) H_n -> nu(y) / cc`
/// with `cc = 2 pi (c nu(h_a(-.)) + c' nu(h'_d))`.
#[derive(Debug, Clone)]
pub struct RenewalLimitReport {
    pub c_limit: f64,
    pub rows: Vec<RenewalLimitRow>,
}

#[derive(Debug, Clone)]
pub struct RenewalLimitRow {
    pub n: usize,
    /// Max over core `(x, y), (x', y')` with `nu > 0` of
    /// `|H_n(x,y) nu(y') / (H_n(x',y') nu(y)) - 1|` (convention-free).
    pub ratio_spread: f64,
    /// Max over the same sites of `|sqrt(n) H_n(x,y) cc / nu(y) - 1|`.
    pub abs_err: f64,
}

pub fn verify_renewal_limit(
    seq: &OperatorSeq,
    nu: &InvariantMeasure,
    c_limit: f64,
    ns: &[usize],
    core_radius: i64,
) -> RenewalLimitReport {
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let xs: Vec<i64> = (-core_radius..=core_radius).collect();
        let mut scaled: Vec<(f64, f64)> = Vec::new(); // (sqrt(n) H / nu(y), same)
        let mut abs_err = 0.0f64;
        for &x in &xs {
            let row = seq.hn_row(n, x);
            for (yi, &v) in row.iter().enumerate() {
                let y = seq.core[yi];
                if y.abs() > core_radius {
                    continue;
                }
                let w = nu.weight_at(y);
                if w <= 0.0 {
                    continue;
                }
                let r = (n as f64).sqrt() * v / w;
                scaled.push((r, r));
                abs_err = abs_err.max((r * c_limit - 1.0).abs());
            }
        }
        let lo = scaled.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = scaled.iter().map(|p| p.0).fold(0.0f64, f64::max);
        rows.push(RenewalLimitRow {
            n,
            ratio_spread: if lo > 0.0 { hi / lo - 1.0 } else { f64::INFINITY },
            abs_err,
        });
    }
    RenewalLimitReport { c_limit, rows }
}

/// Max entry error of `sum_{n <= N} C_n + (alive tail projected through
/// the closed-form kernel)` against the kernel itself: the strong Markov
/// property at the horizon ties the DP route to the algebraic route.
pub fn cn_sum_vs_kernel(
    cn: &CnSeq,
    kernel: &CrossingKernel,
    asc: &LadderLaw,
    desc: &LadderLaw,
) -> Result<f64, OperatorError> {
    // depth needed for the tail projection
    let mut depth = 1i64;
    for x in (-cn.m..=cn.m).filter(|&x| x != 0) {
        if let Some(av) = cn.alive_final(x) {
            for (s, p) in av.iter() {
                if p > 0.0 {
                    depth = depth.max(s.abs());
                }
            }
        }
    }
    let asc_table = renewal::potential(asc, depth + 1)?;
    let desc_table = renewal::potential(desc, depth + 1)?;
    let asc_heights: Vec<(i64, f64)> = asc.heights().to_vec();
    let desc_heights: Vec<(i64, f64)> =
        desc.heights().iter().map(|&(k, p)| (k.abs(), p)).collect();

    // eventual landing law from a surviving site: the kernel formula with
    // ladder level t = |landing - z| - height
    let landing_neg = |z: i64, y: i64| -> Result<f64, OperatorError> {
        let mut v = 0.0;
        for &(k, p) in &asc_heights {
            let level = y - z - k;
            if (0..-z).contains(&level) {
                v += p * asc_table.u_at(level)?;
            }
        }
        Ok(v)
    };
    let landing_pos = |z: i64, y: i64| -> Result<f64, OperatorError> {
        let mut v = 0.0;
        for &(k, p) in &desc_heights {
            let level = z - y - k;
            if (0..z).contains(&level) {
                v += p * desc_table.u_at(level)?;
            }
        }
        Ok(v)
    };
    let max_up = asc_heights.iter().map(|&(k, _)| k).max().unwrap_or(1);
    let max_down = desc_heights.iter().map(|&(k, _)| k).max().unwrap_or(1);

    let mut worst = 0.0f64;
    for x in -cn.m..=cn.m {
        // partial sum over n plus the projected tail
        let mut total: std::collections::BTreeMap<i64, f64> = Default::default();
        for n in 1..=cn.n_max {
            for (y, v) in cn.row_entries(n, x) {
                *total.entry(y).or_insert(0.0) += v;
            }
        }
        if x != 0 {
            if let Some(av) = cn.alive_final(x) {
                for (z, p) in av.iter() {
                    if p == 0.0 {
                        continue;
                    }
                    if x <= -1 {
                        for y in 0..max_up {
                            let lv = landing_neg(z, y)?;
                            if lv > 0.0 {
                                *total.entry(y).or_insert(0.0) += p * lv;
                            }
                        }
                    } else {
                        for y in (1 - max_down)..=0 {
                            let lv = landing_pos(z, y)?;
                            if lv > 0.0 {
                                *total.entry(y).or_insert(0.0) += p * lv;
                            }
                        }
                    }
                }
            }
        }
        for y in -kernel.window()..=kernel.window() {
            let got = total.get(&y).copied().unwrap_or(0.0);
            let expect = kernel.entry(x, y);
            worst = worst.max((got - expect).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::{ladder_law_exact, LadderSide};
    use approx::assert_relative_eq;

    fn uniform3() -> LatticePmf {
        LatticePmf::new(&[(-1, 1.0 / 3.0), (0, 1.0 / 3.0), (1, 1.0 / 3.0)]).unwrap()
    }

    fn asym3() -> LatticePmf {
        LatticePmf::new(&[(-1, 0.5), (0, 0.25), (2, 0.25)]).unwrap()
    }

    #[test]
    fn core_sites_of_the_reference_pair() {
        assert_eq!(core_sites(&asym3(), &uniform3()), vec![-1, 0, 1, 2]);
        assert_eq!(core_sites(&uniform3(), &uniform3()), vec![-1, 0, 1]);
    }

    #[test]
    fn one_step_exit_from_minus_one() {
        let cn = build_cn(&uniform3(), &uniform3(), 0.5, 8, 16, 1e-12).unwrap();
        // a single up-step exits at the origin with probability 1/3
        assert_relative_eq!(cn.entry(1, -1, 0), 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(cn.exit_prob(1, -1), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn origin_row_vanishes_after_one_step() {
        let cn = build_cn(&asym3(), &uniform3(), 0.7, 8, 16, 1e-12).unwrap();
        let mix_mass: f64 = cn.mix().iter().map(|&(_, p)| p).sum();
        assert_relative_eq!(mix_mass, 1.0, epsilon = 1e-12);
        assert_relative_eq!(cn.exit_prob(1, 0), 1.0, epsilon = 1e-12);
        for n in 2..=16 {
            assert_eq!(cn.exit_prob(n, 0), 0.0);
        }
    }

    #[test]
    fn sign_structure_of_cn() {
        let cn = build_cn(&asym3(), &uniform3(), 0.5, 8, 12, 1e-12).unwrap();
        for n in 1..=12 {
            for x in 1..=8i64 {
                for (y, v) in cn.row_entries(n, x) {
                    assert!(y <= 0 || v == 0.0);
                }
                for (y, v) in cn.row_entries(n, -x) {
                    assert!(y >= 0 || v == 0.0);
                }
            }
        }
    }

    #[test]
    fn row_sums_exhaust_to_survival() {
        let cn = build_cn(&asym3(), &uniform3(), 0.5, 8, 2048, 1e-12).unwrap();
        for x in [-5i64, -1, 2, 7] {
            let absorbed: f64 = (1..=2048).map(|n| cn.exit_prob(n, x)).sum();
            // slack covers the tracked depth truncation (<= depth_tol * n)
            assert_relative_eq!(absorbed + cn.survival(2048, x), 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn h1_is_c1_and_h2_is_c2_plus_c1_squared() {
        let cn = build_cn(&asym3(), &uniform3(), 0.5, 8, 8, 1e-12).unwrap();
        let seq = build_hn(cn, &asym3(), &uniform3());
        let h1 = seq.hn_matrix(1);
        let c1 = seq.cn.matrix(1);
        assert!(h1.max_abs_diff(&c1) < 1e-15);
        let h2 = seq.hn_matrix(2);
        let mut expect = seq.cn.matrix(2);
        let c1c1 = c1.matmul(&c1);
        for x in -8..=8 {
            for y in -8..=8 {
                expect.add(x, y, c1c1.get(x, y));
            }
        }
        assert!(h2.max_abs_diff(&expect) < 1e-14);
    }

    #[test]
    fn core_recursion_matches_dense_oracle() {
        let cn = build_cn(&asym3(), &uniform3(), 0.3, 8, 16, 1e-12).unwrap();
        let dense = hn_dense_oracle(&cn, 16);
        let seq = build_hn(cn, &asym3(), &uniform3());
        #[allow(clippy::needless_range_loop)]
        for n in 0..=16 {
            let fast = seq.hn_matrix(n);
            assert!(
                fast.max_abs_diff(&dense[n]) < 1e-12,
                "mismatch at n = {n}"
            );
        }
    }

    #[test]
    fn renewal_identity_replay() {
        let cn = build_cn(&asym3(), &uniform3(), 0.5, 8, 64, 1e-12).unwrap();
        let seq = build_hn(cn, &asym3(), &uniform3());
        for n in [1usize, 7, 33, 64] {
            assert!(seq.renewal_identity_residual(n) < 1e-12);
        }
    }

    #[test]
    fn weighted_norm_examples() {
        let norm = WeightedNorm::new(0.5);
        assert_relative_eq!(mat_weighted_norm(&Mat::identity(6), &norm), 1.0);
        assert_relative_eq!(mat_weighted_norm(&Mat::zeros(6), &norm), 0.0);
        assert_relative_eq!(norm.weight(0), 1.0);
        assert_relative_eq!(norm.weight(-3), norm.weight(3));
    }

    #[test]
    fn rn_sequence_of_the_symmetric_pair() {
        use crate::crossing::{crossing_kernel, invariant_measure};
        let mu = uniform3();
        let asc = ladder_law_exact(&mu, LadderSide::Ascending).unwrap();
        let desc = ladder_law_exact(&mu, LadderSide::Descending).unwrap();
        let kernel = crossing_kernel(&mu, &mu, 0.5, 8, &asc, &desc).unwrap();
        let nu = invariant_measure(&kernel, 1e-13).unwrap();
        let cn = build_cn(&mu, &mu, 0.5, 8, 256, 1e-12).unwrap();
        let r = rn_sequence(&cn, &nu);
        // r_1 = nu(-1)/3 + nu(0) + nu(1)/3 = 11/15
        assert_relative_eq!(r[1], 11.0 / 15.0, epsilon = 1e-9);
        assert!(r.iter().all(|&v| v >= 0.0));
        // tail at n equals 1 - partial sums
        let partial: f64 = r[1..=64].iter().sum();
        assert_relative_eq!(rn_tail(&cn, &nu, 64), 1.0 - partial, epsilon = 1e-10);
    }

    #[test]
    fn window_too_small_for_core() {
        let err = build_cn(&asym3(), &uniform3(), 0.5, 1, 8, 1e-12).unwrap_err();
        assert!(matches!(err, OperatorError::WindowTooSmall { .. }));
    }
}
