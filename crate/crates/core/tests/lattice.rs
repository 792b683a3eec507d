use proptest::prelude::*;

use chronicap_core::codec::encode_chronicle;
use chronicap_core::oracle::lattice::{join_law_failure, sample_triple};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn join_is_a_semilattice(seed in any::<u64>()) {
        let [a, b, c] = sample_triple(seed);
        prop_assert_eq!(join_law_failure(&a, &b, &c), None);
    }

    #[test]
    fn join_of_prefix_is_the_longer(seed in any::<u64>()) {
        let [a, _, _] = sample_triple(seed);
        let head: chronicap_core::GroupChronicle = a
            .topological()
            .into_iter()
            .take(a.len() / 2)
            .collect::<Result<_, _>>()
            .unwrap();
        prop_assert_eq!(encode_chronicle(&a.join(&head)), encode_chronicle(&a));
    }
}
