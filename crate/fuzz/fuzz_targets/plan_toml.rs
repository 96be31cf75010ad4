#![no_main]

use hetero2st::harness::ExperimentPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(plan) = ExperimentPlan::from_toml_str(text) else {
        return;
    };
    let back = ExperimentPlan::from_toml_str(&plan.to_toml_string().expect("valid plans serialize"))
        .expect("serialized plans parse");
    assert_eq!(back, plan);
});
