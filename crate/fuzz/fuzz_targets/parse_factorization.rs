#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(f) = mms::json::parse_factorization(text) {
        let doc = mms::json::factorization_to_json(&f);
        let back = mms::json::parse_factorization(&doc).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::factorization_to_json(&back));
    }
});
