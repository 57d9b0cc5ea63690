mod common;

use proptest::prelude::*;
use proptest::test_runner::RngSeed;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: common::TRIALS as u32,
        rng_seed: RngSeed::Fixed(0x1e55),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn model_operator_is_monotone(seed in any::<u64>()) {
        common::monotonicity(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn frozen_solve_is_independent_of_start(seed in any::<u64>()) {
        common::uniqueness(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn jacobian_matches_forward_differences(seed in any::<u64>()) {
        common::jacobian_fd(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn lorentz_holder_pairing(seed in any::<u64>()) {
        common::holder_pairing(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn distribution_and_excess_are_nonincreasing(seed in any::<u64>()) {
        common::distribution_monotone(seed).map_err(TestCaseError::fail)?;
    }
}
