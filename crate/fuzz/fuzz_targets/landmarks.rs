#![no_main]

use libfuzzer_sys::fuzz_target;
use xmodal::data::parse_landmarks;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(l) = parse_landmarks(text) {
            l.validate().unwrap();
        }
    }
});
