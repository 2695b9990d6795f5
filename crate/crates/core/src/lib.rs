//! Oscillating random walks on `Z` and their skew-Brownian scaling limits.
//!
//! An oscillating walk moves by i.i.d. steps from `mu` while it is at a
//! negative site, by steps from `mu_prime` while it is at a positive site,
//! and by an `alpha`-mixture of the two when it sits at the origin. This
//! crate provides the computable objects attached to such a walk:
//!
//! - [`pmf`]: finite-support lattice step distributions, moments, and the
//!   standing hypotheses (centering, strong aperiodicity, moment bounds);
//! - [`killed`]: exact dynamic-programming tables for walks killed on
//!   crossing a half-line (survival, entrance laws, bridges, ladder laws);
//! - [`ladder`]: exact ladder-height distributions via polynomial
//!   factorization of the step generating function;
//! - [`renewal`]: ladder-height potentials, renewal functions, and the
//!   first-passage limit constants;
//! - [`crossing`]: the sign-crossing sub-chain, its kernel, invariant
//!   measure, and the skew parameter `gamma`;
//! - [`operators`]: the time-resolved crossing operators `C_n`, the renewal
//!   convolution `H_n`, and the `sqrt(n) * H_n` limit diagnostics;
//! - [`simulate`]: reproducible high-throughput path simulation and Monte
//!   Carlo estimators of the rescaled process;
//! - [`skewbm`]: skew-Brownian heat kernel, marginal/joint limit densities,
//!   Brownian meander and excursion marginals, and quadrature oracles;
//! - [`stats`]: empirical CDFs, Kolmogorov-Smirnov distances, DKW bands,
//!   and binomial cell tests.

pub mod crossing;
pub mod killed;
pub mod ladder;
pub mod operators;
pub mod pmf;
pub mod quad;
pub mod renewal;
pub mod simulate;
pub mod skewbm;
pub mod stats;

pub use crossing::{CrossingKernel, InvariantMeasure};
pub use killed::{KilledWalkTable, Side};
pub use ladder::{LadderLaw, LadderSide};
pub use pmf::{LatticePmf, MomentReport};
pub use renewal::{Convention, LimitConstants, RenewalTable};
pub use simulate::{PathRecord, WalkConfig};
pub use skewbm::SkewKernel;
pub use stats::EmpiricalDistribution;
