#![no_main]

use libfuzzer_sys::fuzz_target;
use xmodal::features::FacialPointTemplate;

// Input: point file, a NUL byte, then the landmark file.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (points, landmarks) = text.split_once('\0').unwrap_or((text, ""));
    let _ = FacialPointTemplate::from_text(points, landmarks);
});
