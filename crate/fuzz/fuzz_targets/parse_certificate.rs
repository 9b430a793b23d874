#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cert) = mms::json::parse_certificate(text) {
        let doc = mms::json::certificate_to_json(&cert);
        let back = mms::json::parse_certificate(&doc).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::certificate_to_json(&back));
    }
});
