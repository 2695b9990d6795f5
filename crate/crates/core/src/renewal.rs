//! Ladder-height potentials, renewal functions, and first-passage limit
//! constants.
//!
//! The potential of a ladder law is `U(t) = sum_n mu_+^{*n}({t})`; the
//! renewal function is its running sum. Two interval conventions are in
//! circulation for that sum: `h(x) = U[0, x]` ("closed") and
//! `h(x) = U[0, x-1]` ("half-open"). Only one of them is consistent with
//! the exact first-passage asymptotics of the simple +-1 walk, and only
//! that one makes the skew parameter independent of the mixing weight at
//! the origin, so [`resolve_convention`] pins the choice against the DP
//! oracle instead of guessing.

use crate::killed::{self, Side};
use crate::ladder::{self, LadderError, LadderLaw, LadderSide};
use crate::pmf::LatticePmf;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `h(x) = U[0, x]`.
    Closed,
    /// `h(x) = U[0, x-1]`.
    HalfOpen,
}

#[derive(Debug, Error)]
pub enum RenewalError {
    #[error("renewal function queried at x = {x} beyond table size {x_max}")]
    OutOfTable { x: i64, x_max: i64 },
    #[error("ladder residual mass {0:.3e} too large for an accurate potential")]
    ResidualTooLarge(f64),
    #[error(transparent)]
    Ladder(#[from] LadderError),
}

/// Potential values `U(0..=x_max)` of a ladder law together with prefix
/// sums for O(1) renewal-function queries.
///
/// Sites are stored by absolute height, so the same table serves the
/// ascending law of `mu` and the (mirrored) descending law of `mu_prime`.
#[derive(Debug, Clone)]
pub struct RenewalTable {
    u: Vec<f64>,
    prefix: Vec<f64>,
    pub mean_abs_height: f64,
}

/// Builds the potential by the renewal recursion
/// `U(t) = 1_{t=0} + sum_s mu_+(s) U(t-s)`.
pub fn potential(law: &LadderLaw, x_max: i64) -> Result<RenewalTable, RenewalError> {
    if law.residual_mass > 1e-9 {
        return Err(RenewalError::ResidualTooLarge(law.residual_mass));
    }
    let steps: Vec<(i64, f64)> = law
        .heights()
        .iter()
        .map(|&(k, p)| (k.abs(), p))
        .collect();
    let n = x_max.max(0) as usize;
    let mut u = vec![0.0f64; n + 1];
    for t in 0..=n {
        let mut v = if t == 0 { 1.0 } else { 0.0 };
        for &(s, p) in &steps {
            let s = s as usize;
            if s <= t {
                v += p * u[t - s];
            }
        }
        u[t] = v;
    }
    let mut prefix = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    for &v in &u {
        acc += v;
        prefix.push(acc);
    }
    Ok(RenewalTable {
        u,
        prefix,
        mean_abs_height: law.mean_abs_height(),
    })
}

impl RenewalTable {
    pub fn x_max(&self) -> i64 {
        self.u.len() as i64 - 1
    }

    /// `U(t)` for `t >= 0` (0 for negative `t`).
    pub fn u_at(&self, t: i64) -> Result<f64, RenewalError> {
        if t < 0 {
            return Ok(0.0);
        }
        if t > self.x_max() {
            return Err(RenewalError::OutOfTable {
                x: t,
                x_max: self.x_max(),
            });
        }
        Ok(self.u[t as usize])
    }

    pub fn u_values(&self) -> &[f64] {
        &self.u
    }

    /// Renewal function `h(x)`: the partial sum of `U` over `[0, x]`
    /// (closed) or `[0, x-1]` (half-open); 0 for `x < 0` and, under the
    /// half-open convention, also for `x = 0`.
    pub fn renewal_function(&self, x: i64, convention: Convention) -> Result<f64, RenewalError> {
        let upper = match convention {
            Convention::Closed => x,
            Convention::HalfOpen => x - 1,
        };
        if upper < 0 {
            return Ok(0.0);
        }
        if upper > self.x_max() {
            return Err(RenewalError::OutOfTable {
                x,
                x_max: self.x_max(),
            });
        }
        Ok(self.prefix[upper as usize])
    }

    /// Entrywise residual of `U = delta_0 + mu_+ * U` over the table.
    pub fn renewal_identity_residual(&self, law: &LadderLaw) -> f64 {
        let mut worst = 0.0f64;
        for t in 0..=self.x_max() {
            let mut v = if t == 0 { 1.0 } else { 0.0 };
            for &(k, p) in law.heights() {
                let s = k.abs();
                if s <= t {
                    v += p * self.u[(t - s) as usize];
                }
            }
            worst = worst.max((v - self.u[t as usize]).abs());
        }
        worst
    }
}

/// Monotonicity and growth diagnostics for a renewal table.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub monotone: bool,
    /// `h(x_max) / x_max`.
    pub slope_at_end: f64,
    /// Renewal-theorem target `1 / E[|height|]`.
    pub slope_limit: f64,
    /// Relative deviation of `U(t)` from the target over the last quarter.
    pub tail_deviation: f64,
}

pub fn check_growth(table: &RenewalTable) -> GrowthReport {
    let x_max = table.x_max();
    assert!(x_max >= 16, "check_growth needs x_max >= 16");
    let monotone = table.u.iter().all(|&v| v >= -1e-15);
    let slope_limit = 1.0 / table.mean_abs_height;
    let slope_at_end = table.prefix[x_max as usize] / (x_max as f64 + 1.0);
    let start = (3 * x_max / 4) as usize;
    let tail_deviation = table.u[start..]
        .iter()
        .map(|&v| (v / slope_limit - 1.0).abs())
        .fold(0.0f64, f64::max);
    GrowthReport {
        monotone,
        slope_at_end,
        slope_limit,
        tail_deviation,
    }
}

/// The constants `c = E[S_{l_1}] / (sigma sqrt(2 pi))` and
/// `c' = E[-S'_{l'_1}] / (sigma' sqrt(2 pi))` entering every
/// first-passage asymptotic.
#[derive(Debug, Clone, Copy)]
pub struct LimitConstants {
    pub c: f64,
    pub c_prime: f64,
    pub mean_ascending: f64,
    pub mean_descending: f64,
    pub sigma: f64,
    pub sigma_prime: f64,
}

/// Computes the limit constants from the exact ladder laws; `tol` bounds
/// the accepted ladder residual.
pub fn limit_constants(
    mu: &LatticePmf,
    mu_prime: &LatticePmf,
    tol: f64,
) -> Result<LimitConstants, RenewalError> {
    let asc = ladder::ladder_law_exact(mu, LadderSide::Ascending)?;
    let desc = ladder::ladder_law_exact(mu_prime, LadderSide::Descending)?;
    limit_constants_from_laws(mu, mu_prime, &asc, &desc, tol)
}

pub fn limit_constants_from_laws(
    mu: &LatticePmf,
    mu_prime: &LatticePmf,
    asc: &LadderLaw,
    desc: &LadderLaw,
    tol: f64,
) -> Result<LimitConstants, RenewalError> {
    if asc.residual_mass > tol || desc.residual_mass > tol {
        return Err(RenewalError::ResidualTooLarge(
            asc.residual_mass.max(desc.residual_mass),
        ));
    }
    let sigma = mu.variance().sqrt();
    let sigma_prime = mu_prime.variance().sqrt();
    let root_2pi = (2.0 * std::f64::consts::PI).sqrt();
    Ok(LimitConstants {
        c: asc.mean_height / (sigma * root_2pi),
        c_prime: desc.mean_abs_height() / (sigma_prime * root_2pi),
        mean_ascending: asc.mean_height,
        mean_descending: desc.mean_abs_height(),
        sigma,
        sigma_prime,
    })
}

/// Outcome of pinning the interval convention against the +-1 oracle.
#[derive(Debug, Clone, Copy)]
pub struct ConventionReport {
    pub resolved: Convention,
    /// Max relative error of `sqrt(n) P[tau(-x) > n]` against
    /// `2 c h(x)` over `x = 1..=3` under the half-open convention.
    pub half_open_err: f64,
    /// Same statistic under the closed convention.
    pub closed_err: f64,
}

/// Resolves the renewal-function convention by comparing the killed-walk
/// DP for the +-1 step law against `2 c h(x) / sqrt(n)` under both
/// conventions. Exactly one matches; asymmetric pmfs then inherit it.
pub fn resolve_convention() -> Result<ConventionReport, RenewalError> {
    let pm1 = LatticePmf::new(&[(-1, 0.5), (1, 0.5)]).expect("static pmf");
    let law = ladder::ladder_law_exact(&pm1, LadderSide::Ascending)?;
    let table = potential(&law, 8)?;
    let constants = limit_constants(&pm1, &pm1, 1e-9)?;
    let horizon = 4096usize;
    let mut half_open_err = 0.0f64;
    let mut closed_err = 0.0f64;
    for x in 1..=3i64 {
        let t = killed::build_killed_table_with(
            &pm1,
            x,
            Side::Negative,
            horizon,
            killed::BuildOptions {
                depth_tol: 1e-12,
                retention: killed::Retention::FinalOnly,
                max_width: None,
            },
        )
        .map_err(LadderError::from)?;
        let observed = (horizon as f64).sqrt() * t.survival(horizon);
        for (convention, err) in [
            (Convention::HalfOpen, &mut half_open_err),
            (Convention::Closed, &mut closed_err),
        ] {
            let predicted = 2.0 * constants.c * table.renewal_function(x, convention)?;
            *err = err.max((observed / predicted - 1.0).abs());
        }
    }
    let resolved = if half_open_err < closed_err {
        Convention::HalfOpen
    } else {
        Convention::Closed
    };
    Ok(ConventionReport {
        resolved,
        half_open_err,
        closed_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::{ladder_law_exact, LadderSide};
    use approx::assert_relative_eq;

    fn law_of(pmf: &[(i64, f64)]) -> LadderLaw {
        let p = LatticePmf::new(pmf).unwrap();
        ladder_law_exact(&p, LadderSide::Ascending).unwrap()
    }

    #[test]
    fn delta_one_potential_is_counting_measure() {
        let law = law_of(&[(-1, 0.5), (1, 0.5)]);
        let t = potential(&law, 32).unwrap();
        for x in 0..=32 {
            assert_relative_eq!(t.u_at(x).unwrap(), 1.0, epsilon = 1e-12);
        }
        assert_relative_eq!(t.renewal_function(5, Convention::Closed).unwrap(), 6.0);
        assert_relative_eq!(t.renewal_function(5, Convention::HalfOpen).unwrap(), 5.0);
        assert_relative_eq!(t.renewal_function(-3, Convention::Closed).unwrap(), 0.0);
        assert_relative_eq!(t.renewal_function(0, Convention::HalfOpen).unwrap(), 0.0);
    }

    #[test]
    fn delta_two_potential_alternates() {
        let law = law_of(&[(-2, 0.5), (2, 0.5)]);
        let t = potential(&law, 16).unwrap();
        for x in 0..=16 {
            let expect = if x % 2 == 0 { 1.0 } else { 0.0 };
            assert_relative_eq!(t.u_at(x).unwrap(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn half_half_potential_prefix() {
        // ladder law {1: 1/2, 2: 1/2} from the {-1: 2/3, 2: 1/3} step law
        let law = law_of(&[(-1, 2.0 / 3.0), (2, 1.0 / 3.0)]);
        let t = potential(&law, 64).unwrap();
        assert_relative_eq!(t.u_at(0).unwrap(), 1.0);
        assert_relative_eq!(t.u_at(1).unwrap(), 0.5);
        assert_relative_eq!(t.u_at(2).unwrap(), 0.75);
        assert_relative_eq!(t.u_at(3).unwrap(), 0.625);
        assert_relative_eq!(t.renewal_function(2, Convention::Closed).unwrap(), 2.25);
        // renewal theorem: U -> 1/1.5
        assert_relative_eq!(t.u_at(64).unwrap(), 2.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn renewal_identity_holds() {
        let law = law_of(&[(-1, 0.5), (0, 0.25), (2, 0.25)]);
        let t = potential(&law, 256).unwrap();
        assert!(t.renewal_identity_residual(&law) < 1e-12);
    }

    #[test]
    fn growth_report() {
        let law = law_of(&[(-1, 2.0 / 3.0), (2, 1.0 / 3.0)]);
        let t = potential(&law, 256).unwrap();
        let g = check_growth(&t);
        assert!(g.monotone);
        assert_relative_eq!(g.slope_limit, 2.0 / 3.0, epsilon = 1e-12);
        assert!((g.slope_at_end - g.slope_limit).abs() / g.slope_limit < 0.05);
        assert!(g.tail_deviation < 0.02);
    }

    #[test]
    fn out_of_table_is_an_error() {
        let law = law_of(&[(-1, 0.5), (1, 0.5)]);
        let t = potential(&law, 8).unwrap();
        assert!(matches!(
            t.renewal_function(9, Convention::Closed),
            Err(RenewalError::OutOfTable { .. })
        ));
    }

    #[test]
    fn limit_constants_examples() {
        let u3 = LatticePmf::new(&[(-1, 1.0 / 3.0), (0, 1.0 / 3.0), (1, 1.0 / 3.0)]).unwrap();
        let k = limit_constants(&u3, &u3, 1e-9).unwrap();
        assert_relative_eq!(k.mean_ascending, 1.0, epsilon = 1e-12);
        assert_relative_eq!(k.c, 0.48860, epsilon = 1e-4);
        assert_relative_eq!(k.c, k.c_prime, epsilon = 1e-12);

        let pm1 = LatticePmf::new(&[(-1, 0.5), (1, 0.5)]).unwrap();
        let k = limit_constants(&pm1, &pm1, 1e-9).unwrap();
        assert_relative_eq!(k.c, 0.39894, epsilon = 1e-4);
    }

    #[test]
    fn convention_resolves_to_half_open() {
        let r = resolve_convention().unwrap();
        assert_eq!(r.resolved, Convention::HalfOpen);
        assert!(r.half_open_err < 0.03, "half-open err {}", r.half_open_err);
        assert!(r.closed_err > 0.3, "closed err {}", r.closed_err);
    }
}
