//! Printing then parsing any element is the identity.

use proptest::prelude::*;

use twistgeo::algebra::Algebra;
use twistgeo::sampling::{moyal3_geometry, moyal_algebra, torus_algebra, Sampler};
use twistgeo::scalars::GaussianRational;
use twistgeo_cli::expr::{parse_expression, print_element};

fn roundtrip(alg: &Algebra, seed: u64) {
    let mut s = Sampler::new(seed);
    s.max_degree = 4;
    s.max_terms = 5;
    for _ in 0..8 {
        let mut a = s.element(alg);
        let b = s.element(alg);
        a = a.add(&alg.star(&a, &b).scale_scalar(&GaussianRational::new(
            num_rational::BigRational::new(1.into(), 3.into()),
            num_rational::BigRational::new((-2).into(), 5.into()),
        )));
        let text = print_element(alg.kind(), &a);
        let (back, warnings) = parse_expression(&text, alg).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert!(warnings.is_empty());
        assert_eq!(back, a, "{text}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moyal_elements_roundtrip(seed in any::<u64>(), order in 0usize..=3) {
        roundtrip(&moyal_algebra(order), seed);
    }

    #[test]
    fn torus_elements_roundtrip(seed in any::<u64>(), order in 0usize..=2) {
        roundtrip(&torus_algebra(order, GaussianRational::from_ratio(1, 2)), seed);
    }

    #[test]
    fn three_dimensional_elements_roundtrip(seed in any::<u64>()) {
        roundtrip(moyal3_geometry(2).alg(), seed);
    }
}
