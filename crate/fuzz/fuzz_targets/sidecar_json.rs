#![no_main]

use adaptinf::harness::dataset::parse_sidecar;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(meta) = parse_sidecar(text) {
        assert!(meta.adaptive_cols.iter().all(|&c| c >= 1));
    }
});
