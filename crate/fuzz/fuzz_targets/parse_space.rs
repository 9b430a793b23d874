#![no_main]

use libfuzzer_sys::fuzz_target;

// A space document must either be rejected with an error or parse into a
// validated space whose canonical serialization round-trips bit for bit.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(space) = mms::json::parse_space(text) {
        let doc = mms::json::space_to_json(&space);
        let back = mms::json::parse_space(&doc).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::space_to_json(&back));
    }
});
