#![no_main]

use libfuzzer_sys::fuzz_target;
use xmodal::data::parse_pgm;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = parse_pgm(data) {
        assert_eq!(img.pixels.len(), img.width * img.height);
        // rescaled samples land within half a grey level, then re-encode exactly
        let once = parse_pgm(&img.to_pgm()).unwrap();
        assert!(once
            .pixels
            .iter()
            .zip(&img.pixels)
            .all(|(a, b)| (a - b).abs() <= 0.5));
        assert_eq!(parse_pgm(&once.to_pgm()).unwrap(), once);
    }
});
