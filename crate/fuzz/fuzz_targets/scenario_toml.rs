#![no_main]

use hetero2st::datagen::ScenarioSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = ScenarioSpec::from_toml_str(text) else {
        return;
    };
    let back = ScenarioSpec::from_toml_str(&spec.to_toml_string().expect("valid specs serialize"))
        .expect("serialized specs parse");
    assert_eq!(back, spec);
});
