#![no_main]

use hrlt_core::encoder::EncodingCache;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cache) = EncodingCache::from_bytes(data) {
        let bytes = cache.to_bytes();
        let again = EncodingCache::from_bytes(&bytes).expect("re-encoded cache decodes");
        assert_eq!(again.to_bytes(), bytes);
    }
});
