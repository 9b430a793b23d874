#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((panel, _z)) = mms::json::parse_panel(text) {
        // Every accepted entry must individually survive a round trip.
        for spec in &panel {
            let doc = mms::json::semicharacter_to_json(spec);
            mms::json::parse_semicharacter(&doc).expect("panel entry must reparse");
        }
    }
});
