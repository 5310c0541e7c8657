mod common;

use cgm_core::random::{random_model, RandomConfig};

#[test]
fn random_models_agree_with_brute_force() {
    let cfg = RandomConfig::default();
    for i in 0..500 {
        let m = random_model(11, i, &cfg);
        if let Err(e) = common::compare_with_oracle(&m) {
            panic!("model {i}: {e}\n{}", cgm_core::print(&m));
        }
    }
}
