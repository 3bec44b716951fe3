#![no_main]

use hrlt_core::data::{format_line, parse_line};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rec) = parse_line(text, 1) {
        let again = parse_line(&format_line(&rec.tokens, &rec.triplets), 1).expect("formatted line parses");
        assert_eq!(again, rec);
    }
});
