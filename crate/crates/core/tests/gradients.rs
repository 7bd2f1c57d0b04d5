mod common;

use common::{joint_gradient_error, kgc_gradient_error, owe_gradient_error};
use openlink::inductive::Mode;
use proptest::prelude::*;

const TOL: f64 = 1e-3;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_world_gradient_matches_finite_differences(seed in 1000u64..100_000) {
        let e = kgc_gradient_error(seed);
        prop_assert!(e <= TOL, "relative error {e}");
    }

    #[test]
    fn joint_gradient_matches_finite_differences(seed in 1000u64..100_000, multi: bool) {
        let mode = if multi { Mode::Multi } else { Mode::Single };
        let e = joint_gradient_error(seed, mode);
        prop_assert!(e <= TOL, "relative error {e}");
    }

    #[test]
    fn owe_gradient_matches_finite_differences(seed in 1000u64..100_000, multi: bool) {
        let mode = if multi { Mode::Multi } else { Mode::Single };
        let e = owe_gradient_error(seed, mode);
        prop_assert!(e <= TOL, "relative error {e}");
    }
}
