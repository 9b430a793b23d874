#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((mu1, mu2, dist)) = mms::json::parse_prohorov_input(text) {
        // The parser promises a square matrix matching the measure lengths.
        assert_eq!(mu1.len(), mu2.len());
        assert_eq!(dist.len(), mu1.len());
        assert!(dist.iter().all(|row| row.len() == mu1.len()));
    }
});
