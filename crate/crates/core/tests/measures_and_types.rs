use macex_core::prob::{conditional_entropy, conditional_mutual_information, entropy, kl_divergence};
use macex_core::types::{enumerate_types, type_class_size};
use macex_core::{Alphabet, Dist, JointDist};
use num_bigint::BigUint;
use proptest::prelude::*;

fn joint(raw: &[f64], sizes: [usize; 4]) -> JointDist {
    let s: f64 = raw.iter().sum();
    let axes = ["U", "X", "Y", "X~"]
        .iter()
        .zip(sizes)
        .map(|(l, k)| Alphabet::new(*l, k).unwrap())
        .collect();
    JointDist::new(axes, raw.iter().map(|v| v / s).collect()).unwrap()
}

fn weights(cells: usize) -> impl Strategy<Value = Vec<f64>> {
    // a few exact zeros keep the support edge cases in play
    prop::collection::vec(prop_oneof![3 => 0.01..1.0f64, 1 => Just(0.0)], cells)
        .prop_filter("nonzero mass", |v| v.iter().sum::<f64>() > 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn information_identities(raw in weights(2 * 2 * 3 * 2)) {
        let v = joint(&raw, [2, 2, 3, 2]);
        let mi = |a: &[&str], b: &[&str], c: &[&str]| conditional_mutual_information(&v, a, b, c).unwrap();
        for (a, b, c) in [
            (&["X"][..], &["Y"][..], &["U"][..]),
            (&["X~"][..], &["X", "Y"][..], &["U"][..]),
            (&["X"][..], &["X~"][..], &[][..]),
        ] {
            prop_assert!(mi(a, b, c) >= -1e-12);
        }
        // chain rule I(X~∧Y|U) + I(X~∧X|UY) = I(X~∧XY|U)
        let lhs = mi(&["X~"], &["Y"], &["U"]) + mi(&["X~"], &["X"], &["U", "Y"]);
        prop_assert!((lhs - mi(&["X~"], &["X", "Y"], &["U"])).abs() <= 1e-10);
        // conditioning reduces entropy
        let h = |t: &[&str], g: &[&str]| conditional_entropy(&v, t, g).unwrap();
        prop_assert!(h(&["Y"], &["X"]) <= h(&["Y"], &[]) + 1e-12);
        prop_assert!(h(&["Y"], &["X", "U"]) <= h(&["Y"], &["U"]) + 1e-12);
        let marginal = v.marginalize(&["Y"]).unwrap();
        let d = Dist::new(Alphabet::new("Y", 3).unwrap(), marginal.probs().to_vec()).unwrap();
        prop_assert_eq!(kl_divergence(&d, &d).unwrap(), 0.0);
        prop_assert!((entropy(&d) - h(&["Y"], &[])).abs() < 1e-12);
    }
}

#[test]
fn type_class_sizes_cover_every_sequence() {
    for k in 1..=3usize {
        let axes = [Alphabet::new("A", k).unwrap()];
        for n in 1..=10u32 {
            let total: BigUint = enumerate_types(n, &axes).unwrap().map(|t| type_class_size(&t)).sum();
            assert_eq!(total, BigUint::from(k).pow(n), "k = {k}, n = {n}");
        }
    }
    // joint alphabet of two binary axes
    let axes = [Alphabet::new("A", 2).unwrap(), Alphabet::new("B", 2).unwrap()];
    for n in 1..=8u32 {
        let total: BigUint = enumerate_types(n, &axes).unwrap().map(|t| type_class_size(&t)).sum();
        assert_eq!(total, BigUint::from(4u32).pow(n));
    }
}
