//! Cross-checks between the operator sequence, the closed-form kernel,
//! and direct simulation.

mod common;

use common::*;
use oscwalk::crossing::{crossing_kernel, invariant_measure};
use oscwalk::ladder::{ladder_law_exact, LadderSide};
use oscwalk::operators::{build_cn, build_hn, cn_sum_vs_kernel};
use oscwalk::simulate::{simulate_path, WalkConfig};

#[test]
fn summed_cn_reproduce_the_kernel_small_window() {
    let (mu, mp) = pair_a();
    let asc = ladder_law_exact(&mu, LadderSide::Ascending).unwrap();
    let desc = ladder_law_exact(&mp, LadderSide::Descending).unwrap();
    let kernel = crossing_kernel(&mu, &mp, 0.5, 16, &asc, &desc).unwrap();
    let cn = build_cn(&mu, &mp, 0.5, 16, 1024, 1e-12).unwrap();
    let err = cn_sum_vs_kernel(&cn, &kernel, &asc, &desc).unwrap();
    assert!(err < 1e-8, "entry error {err:.3e}");
}

#[test]
fn h3_matches_direct_simulation() {
    // H_3(x, y) sums P_x[some crossing at time 3, X_3 = y]; estimate it by
    // brute-force path simulation and compare per landing site
    let (mu, mp) = pair_a();
    let cn = build_cn(&mu, &mp, 0.5, 8, 8, 1e-12).unwrap();
    let seq = build_hn(cn, &mu, &mp);
    let x0 = -1i64;
    let paths: u64 = 2_000_000;
    let mut counts: std::collections::BTreeMap<i64, u64> = Default::default();
    for i in 0..paths {
        let cfg = WalkConfig::new(mu.clone(), mp.clone(), 0.5, x0, 10_000 + i).unwrap();
        let path = simulate_path(&cfg, 3);
        if let Some(&(_, y)) = path.crossings.iter().find(|&&(c, _)| c == 3) {
            *counts.entry(y).or_insert(0) += 1;
        }
    }
    for &y in seq.core() {
        let p = seq.hn_entry(3, x0, y);
        let obs = counts.get(&y).copied().unwrap_or(0);
        let z = oscwalk::stats::cell_test(obs, paths, p);
        assert!(z.abs() <= 3.5, "H_3({x0}, {y}) = {p:.6}: z = {z:.2}");
    }
}

#[test]
fn symmetric_pair_hn_equals_plain_convolution() {
    // with mu = mu' the oscillating walk is an ordinary random walk and
    // every visit to the origin happens at a crossing time, so
    // H_n(0, 0) = P[S_n = 0] and H_n(0, +-1) = P[S_{n-1} = 0] / 3,
    // both computable by exact convolution powers
    let mu = uniform3();
    let cn = build_cn(&mu, &mu, 0.5, 16, 256, 1e-12).unwrap();
    let seq = build_hn(cn, &mu, &mu);
    let mut at_zero = vec![1.0f64]; // P[S_n = 0] by direct convolution
    {
        let mut dist = std::collections::BTreeMap::from([(0i64, 1.0f64)]);
        for _ in 1..=256 {
            let mut next: std::collections::BTreeMap<i64, f64> = Default::default();
            for (&s, &p) in &dist {
                for (d, q) in mu.iter() {
                    *next.entry(s + d).or_insert(0.0) += p * q;
                }
            }
            dist = next;
            at_zero.push(dist.get(&0).copied().unwrap_or(0.0));
        }
    }
    for n in [1usize, 2, 3, 17, 64, 255] {
        let h00 = seq.hn_entry(n, 0, 0);
        assert!(
            (h00 - at_zero[n]).abs() < 1e-11,
            "H_{n}(0,0) = {h00} vs convolution {}",
            at_zero[n]
        );
        let h01 = seq.hn_entry(n, 0, 1);
        assert!(
            (h01 - at_zero[n - 1] / 3.0).abs() < 1e-11,
            "H_{n}(0,1) mismatch"
        );
    }
}

#[test]
fn crossing_chain_occupation_matches_nu_midscale() {
    let (mu, mp) = pair_a();
    let asc = ladder_law_exact(&mu, LadderSide::Ascending).unwrap();
    let desc = ladder_law_exact(&mp, LadderSide::Descending).unwrap();
    let kernel = crossing_kernel(&mu, &mp, 0.5, 32, &asc, &desc).unwrap();
    let nu = invariant_measure(&kernel, 1e-13).unwrap();
    let cfg = WalkConfig::new(mu, mp, 0.5, 0, 777).unwrap();
    let (counts, capped) =
        oscwalk::simulate::crossing_occupation(&cfg, 200_000, 500, 1 << 20, 4, 0);
    let total: u64 = counts.values().sum();
    let freq: std::collections::BTreeMap<i64, f64> = counts
        .iter()
        .map(|(&s, &c)| (s, c as f64 / total as f64))
        .collect();
    let tv = nu.tv_distance(&freq);
    assert!(tv < 0.02, "TV distance {tv:.4} (capped {capped})");
}
