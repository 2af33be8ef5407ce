#![no_main]
use libfuzzer_sys::fuzz_target;

use decoctl::config::ExperimentConfig;

// File references resolve against a directory that does not exist.
fuzz_target!(|data: &[u8]| {
    if let Ok(value) = serde_json::from_slice(data) {
        if let Ok(cfg) = ExperimentConfig::from_value(value, std::path::Path::new("/nonexistent")) {
            let _ = cfg.validate();
        }
    }
});
