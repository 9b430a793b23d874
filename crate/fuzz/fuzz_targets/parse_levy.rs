#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(levy) = mms::json::parse_levy(text) {
        let doc = mms::json::levy_to_json(&levy);
        let back = mms::json::parse_levy(&doc).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::levy_to_json(&back));
    }
});
