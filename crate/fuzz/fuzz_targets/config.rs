#![no_main]

use libfuzzer_sys::fuzz_target;
use xmodal::pipeline::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = PipelineConfig::from_toml(text) {
            assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        }
    }
});
