mod common;

use common::{split_case, split_violations};
use openlink::builder::BuildError;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_satisfies_every_partition_check(seed in 100u64..1_000_000) {
        let case = split_case(seed);
        match case.run() {
            Ok(bundle) => {
                let v = split_violations(&case, &bundle);
                prop_assert!(v.is_empty(), "{v:?}");
                prop_assert_eq!(&case.run().unwrap(), &bundle);
            }
            Err(BuildError::EmptySplit(_)) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn different_seeds_give_different_splits() {
    let mut case = split_case(7);
    let a = case.run().unwrap();
    case.config.seed ^= 0x9e37_79b9;
    let b = case.run().unwrap();
    assert_ne!(a, b);
}
