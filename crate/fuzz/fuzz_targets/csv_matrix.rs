#![no_main]

use hetero2st::io::{matrix_to_csv, parse_matrix_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = parse_matrix_csv(text) else {
        return;
    };
    let written = matrix_to_csv(&m.cloud, m.header.as_deref()).expect("parsed matrices serialize");
    let back = parse_matrix_csv(&written).expect("written matrices parse");
    assert_eq!(back.cloud, m.cloud);
});
