//! Shared fixtures: the model zoo and the exhaustive path-enumeration
//! oracle the DP tables are checked against.

#![allow(dead_code)]

use oscwalk::killed::{KilledWalkTable, Side};
use oscwalk::pmf::LatticePmf;
use std::collections::BTreeMap;

pub fn pm1() -> LatticePmf {
    LatticePmf::new(&[(-1, 0.5), (1, 0.5)]).unwrap()
}

pub fn uniform3() -> LatticePmf {
    LatticePmf::new(&[(-1, 1.0 / 3.0), (0, 1.0 / 3.0), (1, 1.0 / 3.0)]).unwrap()
}

pub fn uniform5() -> LatticePmf {
    LatticePmf::new(&[(-2, 0.2), (-1, 0.2), (0, 0.2), (1, 0.2), (2, 0.2)]).unwrap()
}

/// Centered, strongly aperiodic, asymmetric; ladder law {1: 1/2, 2: 1/2}.
pub fn asym3() -> LatticePmf {
    LatticePmf::new(&[(-1, 0.5), (0, 0.25), (2, 0.25)]).unwrap()
}

/// Mirror image of [`asym3`].
pub fn asym3_mirror() -> LatticePmf {
    asym3().mirrored()
}

/// The reference asymmetric pair (skew parameter exactly 3/5).
pub fn pair_a() -> (LatticePmf, LatticePmf) {
    (asym3(), uniform3())
}

/// Exhaustive enumeration of a killed negative-side walk: every path from
/// `-x` over steps of `pmf`, killed on reaching `>= 0`. Path weights are
/// accumulated in exact integer arithmetic (numerators over a common
/// denominator), so the oracle carries no rounding of its own beyond one
/// final division per entry.
pub struct EnumOracle {
    pub survival: Vec<f64>,
    /// `absorbed[n][w] = P[tau = n, exit site w >= 0]`.
    pub absorbed: Vec<BTreeMap<i64, f64>>,
    /// `alive[n][s] = P[tau > n, position s <= -1]`.
    pub alive: Vec<BTreeMap<i64, f64>>,
}

/// Expresses the pmf as integer weights over a small common denominator.
fn integer_weights(pmf: &LatticePmf) -> (Vec<(i64, u64)>, u64) {
    for denom in 1..=720u64 {
        let mut weights = Vec::with_capacity(pmf.support().len());
        let mut ok = true;
        for (s, p) in pmf.iter() {
            let w = p * denom as f64;
            if (w - w.round()).abs() < 1e-9 && w.round() >= 1.0 {
                weights.push((s, w.round() as u64));
            } else {
                ok = false;
                break;
            }
        }
        if ok {
            return (weights, denom);
        }
    }
    panic!("pmf probabilities are not small rationals");
}

pub fn enumerate_negative(pmf: &LatticePmf, x: i64, n_max: usize) -> EnumOracle {
    let (steps, denom) = integer_weights(pmf);
    let mut absorbed = vec![BTreeMap::<i64, u64>::new(); n_max + 1];
    let mut alive = vec![BTreeMap::<i64, u64>::new(); n_max + 1];
    fn rec(
        steps: &[(i64, u64)],
        pos: i64,
        depth: usize,
        weight: u64,
        n_max: usize,
        absorbed: &mut [BTreeMap<i64, u64>],
        alive: &mut [BTreeMap<i64, u64>],
    ) {
        *alive[depth].entry(pos).or_insert(0) += weight;
        if depth == n_max {
            return;
        }
        for &(s, w) in steps {
            let t = pos + s;
            if t >= 0 {
                *absorbed[depth + 1].entry(t).or_insert(0) += weight * w;
            } else {
                rec(steps, t, depth + 1, weight * w, n_max, absorbed, alive);
            }
        }
    }
    rec(&steps, -x, 0, 1, n_max, &mut absorbed, &mut alive);
    let scale: Vec<f64> = (0..=n_max as u32)
        .map(|n| (denom as f64).powi(n as i32))
        .collect();
    let to_f64 = |maps: Vec<BTreeMap<i64, u64>>| -> Vec<BTreeMap<i64, f64>> {
        maps.into_iter()
            .enumerate()
            .map(|(n, m)| {
                m.into_iter()
                    .map(|(site, c)| (site, c as f64 / scale[n]))
                    .collect()
            })
            .collect()
    };
    let survival = alive
        .iter()
        .enumerate()
        .map(|(n, m)| m.values().sum::<u64>() as f64 / scale[n])
        .collect();
    EnumOracle {
        survival,
        absorbed: to_f64(absorbed),
        alive: to_f64(alive),
    }
}

/// Compares a DP table (either side) against the enumeration oracle of
/// its mirrored engine, entry by entry.
pub fn assert_table_matches_oracle(table: &KilledWalkTable, oracle: &EnumOracle, tol: f64) {
    let n_max = table.horizon();
    let flip = match table.side() {
        Side::Negative => 1i64,
        Side::Positive => -1,
    };
    for n in 0..=n_max {
        let s = (table.survival(n) - oracle.survival[n]).abs();
        assert!(s <= tol, "survival mismatch {s:.3e} at n = {n}");
        if n >= 1 {
            let law: BTreeMap<i64, f64> = table
                .entrance_law(n)
                .into_iter()
                .map(|(w, p)| (flip * w, p))
                .collect();
            let mut sites: Vec<i64> = law.keys().copied().collect();
            sites.extend(oracle.absorbed[n].keys().copied());
            for w in sites {
                let a = law.get(&w).copied().unwrap_or(0.0);
                let b = oracle.absorbed[n].get(&w).copied().unwrap_or(0.0);
                assert!((a - b).abs() <= tol, "entrance mismatch at n={n}, w={w}");
            }
        }
        for (&site, &p) in &oracle.alive[n] {
            let got = table.bridge_probability(n, -site);
            assert!(
                (got - p).abs() <= tol,
                "bridge mismatch at n={n}, site={site}: {got} vs {p}"
            );
        }
    }
}
