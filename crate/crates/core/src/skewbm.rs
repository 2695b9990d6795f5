//! Closed-form limit laws: the skew Brownian heat kernel, its marginal and
//! two-time densities, and the Brownian meander / excursion marginals that
//! govern conditioned excursions.
//!
//! Conventions: `sign(0) = 0`, so the skew correction vanishes on the null
//! set `y = 0` and the kernel satisfies the flip identity
//! `p^g_t(x, y) = p^{1-g}_t(-x, -y)` exactly.

use crate::quad::{integrate, Bound, QuadratureNotConverged};
use statrs::function::erf;

/// `N(0, t)` density at `x`.
pub fn gaussian_density(t: f64, x: f64) -> f64 {
    (-(x * x) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Skew Brownian motion with excursion sign bias `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct SkewKernel {
    pub gamma: f64,
}

impl SkewKernel {
    pub fn new(gamma: f64) -> Self {
        assert!((0.0..=1.0).contains(&gamma), "gamma must lie in [0, 1]");
        Self { gamma }
    }

    /// Transition density
    /// `p^g_t(x, y) = p_t(x, y) + (2g - 1) sign(y) p_t(0, |x| + |y|)`.
    pub fn heat_kernel(&self, t: f64, x: f64, y: f64) -> f64 {
        assert!(t > 0.0);
        let base = gaussian_density(t, y - x);
        let corr = (2.0 * self.gamma - 1.0)
            * (y.signum() * ((y != 0.0) as i32 as f64))
            * gaussian_density(t, x.abs() + y.abs());
        base + corr
    }

    /// Marginal density at time `t` started from the origin.
    pub fn marginal_density(&self, t: f64, u: f64) -> f64 {
        self.heat_kernel(t, 0.0, u)
    }

    /// `P[W(t) <= q | W(0) = start]`, in closed Gaussian-CDF form.
    pub fn marginal_cdf(&self, t: f64, start: f64, q: f64) -> f64 {
        assert!(t > 0.0);
        let rt = t.sqrt();
        let base = normal_cdf((q - start) / rt);
        let ax = start.abs();
        let neg_part = -(1.0 - normal_cdf((ax - q.min(0.0)) / rt));
        let pos_part = if q > 0.0 {
            normal_cdf((ax + q) / rt) - normal_cdf(ax / rt)
        } else {
            0.0
        };
        (base + (2.0 * self.gamma - 1.0) * (neg_part + pos_part)).clamp(0.0, 1.0)
    }

    /// Two-time density from the origin:
    /// `p^g_{t1}(0, u) p^g_{t2 - t1}(u, v)`.
    pub fn fdd_density(&self, t1: f64, t2: f64, u: f64, v: f64) -> f64 {
        assert!(0.0 < t1 && t1 < t2);
        self.heat_kernel(t1, 0.0, u) * self.heat_kernel(t2 - t1, u, v)
    }

    /// `int_a^b p^g_t(x, v) dv` over a possibly unbounded interval.
    pub fn kernel_interval(&self, t: f64, x: f64, a: Bound, b: Bound) -> f64 {
        let cdf = |bound: Bound| match bound {
            Bound::NegInf => 0.0,
            Bound::PosInf => 1.0,
            Bound::Finite(q) => self.marginal_cdf_from(t, x, q),
        };
        (cdf(b) - cdf(a)).max(0.0)
    }

    fn marginal_cdf_from(&self, t: f64, x: f64, q: f64) -> f64 {
        self.marginal_cdf(t, x, q)
    }

    /// Probability that `(W(t1), W(t2))` falls in `urange x vrange`,
    /// by adaptive quadrature in `u` of the exact inner `v`-mass.
    pub fn quad_cell(
        &self,
        t1: f64,
        t2: f64,
        urange: (Bound, Bound),
        vrange: (Bound, Bound),
    ) -> Result<f64, QuadratureNotConverged> {
        assert!(0.0 < t1 && t1 < t2);
        let dt = t2 - t1;
        let g = *self;
        integrate(
            move |u| g.marginal_density(t1, u) * g.kernel_interval(dt, u, vrange.0, vrange.1),
            urange.0,
            urange.1,
            1e-9,
        )
    }
}

/// Brownian meander marginal at time `t`: the Rayleigh density
/// `(u / t) exp(-u^2 / (2 t))` on `u > 0`.
pub fn meander_density(t: f64, u: f64) -> f64 {
    assert!(t > 0.0 && u >= 0.0);
    (u / t) * (-(u * u) / (2.0 * t)).exp()
}

pub fn meander_cdf(t: f64, q: f64) -> f64 {
    if q <= 0.0 {
        0.0
    } else {
        1.0 - (-(q * q) / (2.0 * t)).exp()
    }
}

/// Marginal at time `s` of a Brownian excursion over `[0, t]` (the bridge
/// from 0 to 0 conditioned positive), as a density in the physical value:
/// `2 u^2 t^{3/2} exp(-u^2 t / (2 s (t - s))) / (sqrt(2 pi) (s (t - s))^{3/2})`.
pub fn excursion_bridge_density(s: f64, t: f64, u: f64) -> f64 {
    assert!(0.0 < s && s < t);
    if u < 0.0 {
        return 0.0;
    }
    let lambda = t / (2.0 * s * (t - s));
    let norm = 2.0 * t.powf(1.5)
        / ((2.0 * std::f64::consts::PI).sqrt() * (s * (t - s)).powf(1.5));
    norm * u * u * (-lambda * u * u).exp()
}

pub fn excursion_bridge_cdf(s: f64, t: f64, q: f64) -> f64 {
    assert!(0.0 < s && s < t);
    if q <= 0.0 {
        return 0.0;
    }
    let lambda = t / (2.0 * s * (t - s));
    let norm = 2.0 * t.powf(1.5)
        / ((2.0 * std::f64::consts::PI).sqrt() * (s * (t - s)).powf(1.5));
    let part = -q * (-lambda * q * q).exp() / (2.0 * lambda)
        + (std::f64::consts::PI).sqrt() / (4.0 * lambda.powf(1.5)) * erf::erf(lambda.sqrt() * q);
    (norm * part).clamp(0.0, 1.0)
}
