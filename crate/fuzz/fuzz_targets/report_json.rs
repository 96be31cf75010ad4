#![no_main]

use hetero2st::hetero::TestReport;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(reports) = serde_json::from_slice::<Vec<TestReport>>(data) else {
        return;
    };
    let text = serde_json::to_string(&reports).expect("reports serialize");
    let back: Vec<TestReport> = serde_json::from_str(&text).expect("serialized reports parse");
    assert_eq!(back, reports);
});
