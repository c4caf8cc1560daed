#![no_main]

use libfuzzer_sys::fuzz_target;
use xmodal::data::{load_model, save_model};

fuzz_target!(|data: &[u8]| {
    if let Ok(a) = load_model(data) {
        assert_eq!(load_model(&save_model(&a)).unwrap(), a);
    }
});
