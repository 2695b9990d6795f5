//! Exact dynamic programming for walks killed on crossing a half-line.
//!
//! The negative-side table tracks a walk started at `-x` (with `x >= 1`)
//! that moves by `mu`-steps while it stays at sites `<= -1` and is absorbed
//! the first time it reaches a site `>= 0`. The positive-side table is the
//! mirror image: started at `+x`, stepping by `mu_prime`, alive on sites
//! `>= 1`, absorbed on first entry into `<= 0`. Both absorption boundaries
//! include the origin; the origin belongs to neither strict half-line, so
//! an excursion ends there on either side.
//!
//! The alive vector is truncated at its deep end with an explicit per-step
//! mass budget; truncated mass is tracked, never silently dropped, so the
//! balance `alive + absorbed + truncated = 1` can be audited at every step.

use crate::pmf::LatticePmf;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Started at `-x`, alive on `<= -1`, absorbed on `>= 0`.
    Negative,
    /// Started at `+x`, alive on `>= 1`, absorbed on `<= 0`.
    Positive,
}

#[derive(Debug, Error)]
pub enum KilledError {
    #[error("start offset must be >= 1, got {0}")]
    InvalidStart(i64),
    #[error("depth_tol must lie in (0, 1e-6], got {0}")]
    InvalidDepthTol(f64),
    #[error("horizon must be >= 1")]
    InvalidHorizon,
    #[error("spatial window capped at {max_width} sites cannot hold per-step truncation below {depth_tol} (step {step})")]
    TruncationBudgetExceeded {
        step: usize,
        max_width: usize,
        depth_tol: f64,
    },
}

/// A sub-probability vector over a contiguous site range `[lo, lo+len)`.
#[derive(Debug, Clone, Default)]
pub struct SiteVec {
    pub lo: i64,
    pub probs: Vec<f64>,
}

impl SiteVec {
    pub fn get(&self, site: i64) -> f64 {
        let idx = site - self.lo;
        if idx < 0 || idx as usize >= self.probs.len() {
            0.0
        } else {
            self.probs[idx as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.lo + i as i64, p))
    }

    fn mirrored(&self) -> SiteVec {
        let hi = self.lo + self.probs.len() as i64 - 1;
        SiteVec {
            lo: -hi,
            probs: self.probs.iter().rev().copied().collect(),
        }
    }
}

/// What the builder keeps besides survival and absorption marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    /// Keep the alive vector at every step (needed for bridge queries).
    Full,
    /// Keep only the final alive vector.
    FinalOnly,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub depth_tol: f64,
    pub retention: Retention,
    /// Optional cap on the alive-window width; exceeding it while the
    /// per-step truncation budget cannot be met is an error.
    pub max_width: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            depth_tol: 1e-12,
            retention: Retention::Full,
            max_width: None,
        }
    }
}

/// DP table for a killed one-sided walk.
///
/// All site-indexed accessors speak user coordinates for the table's side;
/// internally everything is stored in negative-side form.
#[derive(Debug, Clone)]
pub struct KilledWalkTable {
    side: Side,
    x: i64,
    horizon: usize,
    depth_tol: f64,
    survival: Vec<f64>,
    absorbed_total: Vec<f64>,
    absorbed: Vec<SiteVec>,
    alive_hist: Option<Vec<SiteVec>>,
    alive_final: SiteVec,
    truncated_cum: Vec<f64>,
}

/// Builds the table with default options (full alive history retained).
pub fn build_killed_table(
    pmf: &LatticePmf,
    x: i64,
    side: Side,
    horizon: usize,
    depth_tol: f64,
) -> Result<KilledWalkTable, KilledError> {
    build_killed_table_with(
        pmf,
        x,
        side,
        horizon,
        BuildOptions {
            depth_tol,
            ..BuildOptions::default()
        },
    )
}

pub fn build_killed_table_with(
    pmf: &LatticePmf,
    x: i64,
    side: Side,
    horizon: usize,
    opts: BuildOptions,
) -> Result<KilledWalkTable, KilledError> {
    if x < 1 {
        return Err(KilledError::InvalidStart(x));
    }
    if !(opts.depth_tol > 0.0 && opts.depth_tol <= 1e-6) {
        return Err(KilledError::InvalidDepthTol(opts.depth_tol));
    }
    if horizon == 0 {
        return Err(KilledError::InvalidHorizon);
    }
    let engine_pmf = match side {
        Side::Negative => pmf.clone(),
        Side::Positive => pmf.mirrored(),
    };
    let mut t = run_negative_engine(&engine_pmf, x, horizon, &opts)?;
    t.side = side;
    Ok(t)
}

fn run_negative_engine(
    pmf: &LatticePmf,
    x: i64,
    horizon: usize,
    opts: &BuildOptions,
) -> Result<KilledWalkTable, KilledError> {
    let steps: Vec<(i64, f64)> = pmf.iter().collect();
    let max_up = pmf.max_site().max(0);

    let mut alive = SiteVec {
        lo: -x,
        probs: vec![1.0],
    };
    let mut survival = Vec::with_capacity(horizon + 1);
    let mut absorbed_total = Vec::with_capacity(horizon + 1);
    let mut absorbed = Vec::with_capacity(horizon + 1);
    let mut truncated_cum = Vec::with_capacity(horizon + 1);
    let mut alive_hist = match opts.retention {
        Retention::Full => Some(Vec::with_capacity(horizon + 1)),
        Retention::FinalOnly => None,
    };

    survival.push(1.0);
    absorbed_total.push(0.0);
    absorbed.push(SiteVec::default());
    truncated_cum.push(0.0);
    if let Some(h) = alive_hist.as_mut() {
        h.push(alive.clone());
    }

    let mut truncated = 0.0f64;

    for n in 1..=horizon {
        // next alive window: [lo + min_step, -1]
        let next_lo = alive.lo + pmf.min_site().min(0);
        let next_len = (-next_lo) as usize; // sites next_lo..=-1
        let mut next = vec![0.0f64; next_len];
        // exits land in [0, max_up - 1]
        let mut exit = vec![0.0f64; max_up.max(1) as usize];
        let mut exited = 0.0f64;

        for (i, &p) in alive.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let s = alive.lo + i as i64;
            for &(d, q) in &steps {
                let t = s + d;
                let m = p * q;
                if t >= 0 {
                    exit[t as usize] += m;
                    exited += m;
                } else {
                    next[(t - next_lo) as usize] += m;
                }
            }
        }

        // trim the deep tail under the per-step budget
        let mut drop_to = 0usize;
        let mut leaked = 0.0f64;
        while drop_to < next.len() {
            let candidate = leaked + next[drop_to];
            if candidate > opts.depth_tol {
                break;
            }
            leaked = candidate;
            drop_to += 1;
        }
        if let Some(cap) = opts.max_width {
            if next.len() - drop_to > cap {
                return Err(KilledError::TruncationBudgetExceeded {
                    step: n,
                    max_width: cap,
                    depth_tol: opts.depth_tol,
                });
            }
        }
        if drop_to > 0 {
            next.drain(..drop_to);
            truncated += leaked;
        }
        alive = SiteVec {
            lo: next_lo + drop_to as i64,
            probs: next,
        };

        let trimmed_exit = trim_sitevec(SiteVec { lo: 0, probs: exit });
        survival.push(alive.total());
        absorbed_total.push(exited);
        absorbed.push(trimmed_exit);
        truncated_cum.push(truncated);
        if let Some(h) = alive_hist.as_mut() {
            h.push(alive.clone());
        }
    }

    Ok(KilledWalkTable {
        side: Side::Negative,
        x,
        horizon,
        depth_tol: opts.depth_tol,
        survival,
        absorbed_total,
        absorbed,
        alive_hist,
        alive_final: alive,
        truncated_cum,
    })
}

fn trim_sitevec(mut v: SiteVec) -> SiteVec {
    while v.probs.last().is_some_and(|&p| p == 0.0) {
        v.probs.pop();
    }
    let lead = v.probs.iter().take_while(|&&p| p == 0.0).count();
    if lead > 0 && lead < v.probs.len() {
        v.probs.drain(..lead);
        v.lo += lead as i64;
    }
    v
}

impl KilledWalkTable {
    pub fn side(&self) -> Side {
        self.side
    }

    /// Start offset `x >= 1`; the actual start site is `-x` or `+x`.
    pub fn start_offset(&self) -> i64 {
        self.x
    }

    pub fn start_site(&self) -> i64 {
        match self.side {
            Side::Negative => -self.x,
            Side::Positive => self.x,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn depth_tol(&self) -> f64 {
        self.depth_tol
    }

    /// `P[tau > n]` for `n = 0..=horizon`; non-increasing.
    pub fn survival_table(&self) -> &[f64] {
        &self.survival
    }

    pub fn survival(&self, n: usize) -> f64 {
        self.survival[n]
    }

    /// `P[tau = n]`.
    pub fn exit_time_prob(&self, n: usize) -> f64 {
        self.absorbed_total[n]
    }

    /// Overshoot distribution at exact exit time `n`, in user coordinates:
    /// sites `>= 0` for the negative side, `<= 0` for the positive side.
    pub fn entrance_law(&self, n: usize) -> Vec<(i64, f64)> {
        assert!(n <= self.horizon, "entrance_law: n={n} beyond horizon");
        let v = &self.absorbed[n];
        let mut out: Vec<(i64, f64)> = match self.side {
            Side::Negative => v.iter().filter(|&(_, p)| p > 0.0).collect(),
            Side::Positive => v.mirrored().iter().filter(|&(_, p)| p > 0.0).collect(),
        };
        out.sort_by_key(|e| e.0);
        out
    }

    /// Raw absorbed vector at time `n` in user coordinates.
    pub fn absorbed_at(&self, n: usize) -> SiteVec {
        match self.side {
            Side::Negative => self.absorbed[n].clone(),
            Side::Positive => self.absorbed[n].mirrored(),
        }
    }

    /// `P[tau > n, position = -y]` (negative side) or `= +y` (positive),
    /// for `y >= 1`. Requires full retention.
    pub fn bridge_probability(&self, n: usize, y: i64) -> f64 {
        assert!(n <= self.horizon, "bridge_probability: n beyond horizon");
        assert!(y >= 1, "bridge_probability: y must be >= 1");
        let hist = self
            .alive_hist
            .as_ref()
            .expect("bridge_probability requires Retention::Full");
        hist[n].get(-y)
    }

    /// Alive vector at time `n` in user coordinates.
    pub fn alive_snapshot(&self, n: usize) -> SiteVec {
        let hist = self
            .alive_hist
            .as_ref()
            .expect("alive_snapshot requires Retention::Full");
        match self.side {
            Side::Negative => hist[n].clone(),
            Side::Positive => hist[n].mirrored(),
        }
    }

    pub fn alive_final(&self) -> SiteVec {
        match self.side {
            Side::Negative => self.alive_final.clone(),
            Side::Positive => self.alive_final.mirrored(),
        }
    }

    pub fn truncated_mass(&self) -> f64 {
        *self.truncated_cum.last().unwrap()
    }

    /// Cumulative truncated mass up to time `n`.
    pub fn truncated_cum_at(&self, n: usize) -> f64 {
        self.truncated_cum[n]
    }

    /// Max over `n` of `|alive + absorbed + truncated - 1|`.
    pub fn mass_balance_error(&self) -> f64 {
        let mut acc = 0.0f64;
        let mut worst = 0.0f64;
        for n in 0..=self.horizon {
            acc += self.absorbed_total[n];
            let err = (self.survival[n] + acc + self.truncated_cum[n] - 1.0).abs();
            worst = worst.max(err);
        }
        worst
    }
}

/// Statistics for the classical first-passage upper bounds: the normalized
/// survival, exit-time, and bridge suprema should stay bounded and settle
/// flat in `n`.
#[derive(Debug, Clone)]
pub struct UpperBoundReport {
    pub sup_survival: f64,
    pub sup_exit: f64,
    pub sup_bridge: f64,
    /// Relative variation of each statistic over `n` in `[N/2, N]`,
    /// maximized over starts.
    pub late_variation_survival: f64,
    pub late_variation_exit: f64,
}

/// Scans `sqrt(n) P[tau > n] / (1+x)`, `n^{3/2} P[tau = n] / (1+x)` and
/// `n^{3/2} P[tau > n, at -y] / ((1+x)(1+y))` over `x <= x_max`, `n <= horizon`.
pub fn verify_upper_bounds(
    pmf: &LatticePmf,
    x_max: i64,
    horizon: usize,
    depth_tol: f64,
) -> Result<UpperBoundReport, KilledError> {
    let mut sup_survival = 0.0f64;
    let mut sup_exit = 0.0f64;
    let mut sup_bridge = 0.0f64;
    let mut late_variation_survival = 0.0f64;
    let mut late_variation_exit = 0.0f64;

    for x in 1..=x_max {
        let table = build_killed_table(pmf, x, Side::Negative, horizon, depth_tol)?;
        let wx = 1.0 + x as f64;
        let (mut lo_s, mut hi_s) = (f64::INFINITY, 0.0f64);
        let (mut lo_e, mut hi_e) = (f64::INFINITY, 0.0f64);
        for n in 1..=horizon {
            let nf = n as f64;
            let s = nf.sqrt() * table.survival(n) / wx;
            let e = nf.powf(1.5) * table.exit_time_prob(n) / wx;
            sup_survival = sup_survival.max(s);
            sup_exit = sup_exit.max(e);
            if n >= horizon / 2 {
                lo_s = lo_s.min(s);
                hi_s = hi_s.max(s);
                lo_e = lo_e.min(e);
                hi_e = hi_e.max(e);
            }
        }
        if horizon >= 2 && lo_s.is_finite() && lo_s > 0.0 {
            late_variation_survival = late_variation_survival.max(hi_s / lo_s - 1.0);
        }
        if horizon >= 2 && lo_e.is_finite() && lo_e > 0.0 {
            late_variation_exit = late_variation_exit.max(hi_e / lo_e - 1.0);
        }
        for n in [horizon / 2, horizon] {
            if n == 0 {
                continue;
            }
            let snap = table.alive_snapshot(n);
            for (site, p) in snap.iter() {
                let y = -site;
                let b = (n as f64).powf(1.5) * p / (wx * (1.0 + y as f64));
                sup_bridge = sup_bridge.max(b);
            }
        }
    }

    Ok(UpperBoundReport {
        sup_survival,
        sup_exit,
        sup_bridge,
        late_variation_survival,
        late_variation_exit,
    })
}
