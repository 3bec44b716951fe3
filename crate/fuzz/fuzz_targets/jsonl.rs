#![no_main]

use hrlt_core::data::{parse_jsonl, write_jsonl, PosProvider};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sentences) = parse_jsonl(text, "fuzz", &PosProvider::Heuristic) {
        let again = parse_jsonl(&write_jsonl(&sentences), "fuzz", &PosProvider::Heuristic).expect("written corpus parses");
        assert_eq!(again, sentences);
    }
});
