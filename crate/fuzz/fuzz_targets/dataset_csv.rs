#![no_main]

use adaptinf::harness::dataset::parse_dataset_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((x, y)) = parse_dataset_csv(text) {
        assert_eq!(x.nrows(), y.len());
        assert!(x.iter().chain(y.iter()).all(|v| v.is_finite()));
    }
});
