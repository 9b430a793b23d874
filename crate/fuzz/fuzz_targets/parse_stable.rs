#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = mms::json::parse_stable(text, 0.001) {
        // Serialization always embeds tail_tol, so the default passed on the
        // reparse must not matter.
        let doc = mms::json::stable_to_json(&spec);
        let back = mms::json::parse_stable(&doc, 0.5).expect("canonical form must reparse");
        assert_eq!(doc, mms::json::stable_to_json(&back));
    }
});
