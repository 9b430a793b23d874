#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = mms::json::parse_semicharacter(text) {
        let doc = mms::json::semicharacter_to_json(&spec);
        let back = mms::json::parse_semicharacter(&doc).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::semicharacter_to_json(&back));
    }
});
