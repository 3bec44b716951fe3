#![no_main]

use hrlt_core::data::{parse_pos_sidecar, write_pos_sidecar};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let tags = parse_pos_sidecar(text);
    assert_eq!(parse_pos_sidecar(&write_pos_sidecar(&tags)), tags);
});
