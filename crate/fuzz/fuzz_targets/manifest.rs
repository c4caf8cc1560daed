#![no_main]

use libfuzzer_sys::fuzz_target;
use xmodal::data::parse_manifest;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = parse_manifest(text) {
            // whatever parses must survive a round trip
            assert_eq!(parse_manifest(&m.to_text()).unwrap(), m);
        }
    }
});
