#![no_main]

use hrlt_core::{bio_labels_for, decode_span, BioTag};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let tags: Vec<BioTag> = data.iter().map(|b| BioTag::from_index(usize::from(b % 3)).unwrap()).collect();
    if let Some(span) = decode_span(&tags) {
        assert_eq!(bio_labels_for(span, tags.len()).unwrap(), tags);
    }
});
