#![no_main]

use libfuzzer_sys::fuzz_target;
use xmodal::data::FeatureStore;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = FeatureStore::from_bytes(data) {
        assert_eq!(s.to_bytes(), data);
    }
});
