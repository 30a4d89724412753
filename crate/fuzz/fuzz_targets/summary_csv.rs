#![no_main]

use adaptinf::harness::output::{parse_summary_csv, write_summary};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_summary_csv(text) {
        let mut buf = Vec::new();
        write_summary(&mut buf, &rows).expect("in-memory write");
        let again = parse_summary_csv(std::str::from_utf8(&buf).unwrap()).expect("rewrite parses");
        assert_eq!(again.len(), rows.len());
    }
});
