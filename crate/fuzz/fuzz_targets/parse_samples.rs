#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(samples) = mms::json::parse_samples(text) {
        let doc = mms::json::samples_to_json(&samples);
        let back = mms::json::parse_samples(&doc).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::samples_to_json(&back));
    }
});
