#![no_main]

use libfuzzer_sys::fuzz_target;
use mcs_alloc::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = ScenarioConfig::from_toml_str(text) {
        config.validate().expect("parsed configs are valid");
    }
});
