//! The DP tables against brute-force path enumeration on small horizons.

mod common;

use common::*;
use oscwalk::killed::{build_killed_table, Side};

#[test]
fn negative_side_matches_enumeration() {
    for pmf in [pm1(), uniform3(), asym3()] {
        for x in 1..=3 {
            let oracle = enumerate_negative(&pmf, x, 12);
            let table = build_killed_table(&pmf, x, Side::Negative, 12, 1e-12).unwrap();
            assert_table_matches_oracle(&table, &oracle, 1e-12);
        }
    }
}

#[test]
fn positive_side_matches_enumeration_of_the_mirror() {
    for pmf in [uniform3(), asym3(), asym3_mirror()] {
        for x in 1..=3 {
            let oracle = enumerate_negative(&pmf.mirrored(), x, 12);
            let table = build_killed_table(&pmf, x, Side::Positive, 12, 1e-12).unwrap();
            assert_table_matches_oracle(&table, &oracle, 1e-12);
        }
    }
}

#[test]
fn time_reversal_of_killed_bridges() {
    // staying-positive bridge probabilities are invariant under reversing
    // the path and mirroring the step law
    let pmf = asym3();
    let n = 8;
    for (a, b) in [(1i64, 1i64), (1, 2), (2, 3)] {
        let fwd = build_killed_table(&pmf, a, Side::Negative, n, 1e-12).unwrap();
        let bwd = build_killed_table(&pmf.mirrored(), b, Side::Negative, n, 1e-12).unwrap();
        let p_fwd = fwd.bridge_probability(n, b);
        let p_bwd = bwd.bridge_probability(n, a);
        assert!(
            (p_fwd - p_bwd).abs() < 1e-14,
            "reversal mismatch: {p_fwd} vs {p_bwd}"
        );
    }
}
