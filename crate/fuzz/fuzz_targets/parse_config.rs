#![no_main]

use libfuzzer_sys::fuzz_target;
use reflected_fb::harness::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text) {
        // accepted configs re-emit to something that parses to the same digest
        let canonical = config.canonical_json().unwrap();
        let again = parse_config(&canonical).unwrap();
        assert_eq!(config.digest().unwrap(), again.digest().unwrap());
    }
});
