//! Properties over randomly generated models: textual round trips and
//! agreement between the interpreter and the lowered transition system.

mod common;

use common::{gen_model, lowering_agrees, round_trips};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn model_text_round_trips(seed in any::<u64>()) {
        let r = round_trips(&gen_model(seed));
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn lowering_agrees_with_the_interpreter(seed in any::<u64>()) {
        let r = lowering_agrees(&gen_model(seed), seed, 100);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    }
}
