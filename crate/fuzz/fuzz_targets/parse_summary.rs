#![no_main]

use libfuzzer_sys::fuzz_target;
use reflected_fb::harness::parse_summary;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(summary) = parse_summary(text) {
        let _ = summary.all_lemmas_hold();
    }
});
