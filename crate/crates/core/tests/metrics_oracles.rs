mod oracles;

use fedcref::metrics::acc;
use proptest::prelude::*;

#[test]
fn hungarian_matches_exhaustive_search() {
    oracles::check_hungarian(1000, 77).unwrap();
}

#[test]
fn acc_matches_brute_force_and_invariants() {
    oracles::check_acc(1000, 78).unwrap();
}

#[test]
fn components_match_bfs_reachability() {
    oracles::check_components(500, 79).unwrap();
}

proptest! {
    #[test]
    fn acc_ignores_label_values(labels in prop::collection::vec(0usize..4, 1..30), offset in 1usize..100) {
        let shifted: Vec<usize> = labels.iter().map(|l| l * 7 + offset).collect();
        prop_assert_eq!(acc(&labels, &shifted).unwrap(), 1.0);
    }

    #[test]
    fn acc_is_at_least_the_identity_agreement(
        pairs in prop::collection::vec((0usize..3, 0usize..3), 1..30)
    ) {
        let (a, b): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let same = a.iter().zip(&b).filter(|(x, y)| x == y).count() as f64 / a.len() as f64;
        prop_assert!(acc(&a, &b).unwrap() + 1e-12 >= same);
    }
}
