#![no_main]

use adaptinf::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        // anything accepted must echo back to the same config
        let echo = cfg.to_toml_string().expect("valid config serializes");
        let again = ExperimentConfig::from_toml_str(&echo).expect("echo parses");
        assert_eq!(again, cfg);
    }
});
