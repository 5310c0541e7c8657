use cgm_core::fixture::meeting_scheduler;
use cgm_core::json::{model_from_json, model_to_json};
use cgm_core::random::{random_model, random_model_text, RandomConfig};
use cgm_core::{load, print, Cgm};
use proptest::prelude::*;

fn assert_roundtrips(m: &Cgm) {
    let text = print(m);
    let back = load(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    assert_eq!(&back, m, "{text}");
    assert_eq!(print(&back), text);

    let json = model_to_json(m);
    let back = model_from_json(&json).unwrap_or_else(|e| panic!("{e}\n{json}"));
    assert_eq!(&back, m, "{json}");
    assert_eq!(model_to_json(&back), json);
}

#[test]
fn fixture_roundtrips() {
    assert_roundtrips(&meeting_scheduler());
}

#[test]
fn generated_models_roundtrip() {
    let cfg = RandomConfig::default();
    let mut n = 0;
    for i in 0.. {
        if let Ok(m) = load(&random_model_text(5, i, &cfg)) {
            assert_roundtrips(&m);
            n += 1;
            if n == 200 {
                break;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rationals_survive(index in 0u64..10_000, num in -10_000i64..10_000, den in 1i64..1000, dec in 0u32..10_000) {
        let mut text = print(&random_model(9, index, &RandomConfig::default()));
        text.push_str(&format!(
            "attr ratio;\ngoal extra penalty {}.{:04};\nset extra.ratio sat {num}/{den} deny {}/{den};\nobjective half min (1/2*ratio - 1/3);\n",
            num.abs(), dec, -num
        ));
        let m = load(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
        assert_roundtrips(&m);
    }
}
