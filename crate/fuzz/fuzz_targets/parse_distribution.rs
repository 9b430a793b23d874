#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(dist) = mms::json::parse_distribution(text) {
        let doc = mms::json::distribution_to_json(&dist);
        let back = mms::json::parse_distribution(&doc).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::distribution_to_json(&back));
    }
});
