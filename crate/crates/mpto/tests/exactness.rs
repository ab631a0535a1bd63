//! Condensed primary states equal the elementary ones on random instances.

use mpto::instances::{pipeline_state_error, random_conduction};
use mpto::sparse::Backend;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn direct_states_agree(seed in any::<u64>()) {
        let inst = random_conduction(seed, 12, 4).unwrap();
        let err = pipeline_state_error(&inst, Backend::Direct).unwrap();
        prop_assert!(err < 1e-9, "relative error {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn iterative_states_agree(seed in any::<u64>()) {
        let inst = random_conduction(seed, 10, 3).unwrap();
        let err = pipeline_state_error(&inst, Backend::Iterative).unwrap();
        prop_assert!(err < 1e-7, "relative error {err:e}");
    }
}
