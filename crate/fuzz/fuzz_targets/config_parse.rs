#![no_main]

use formkac::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

// Arbitrary bytes must never panic the config parser; valid parses must
// also survive validation and model construction.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ExperimentConfig::from_str(text) {
            let _ = cfg.build_model();
            let _ = cfg.x0_vector();
            let _ = cfg.seed();
        }
    }
});
