#![no_main]

use libfuzzer_sys::fuzz_target;
use mcs_alloc::scenario::parse_towers;

fuzz_target!(|data: &[u8]| {
    if let Ok(towers) = parse_towers(data) {
        for t in towers {
            assert!(t.lat.is_finite() && t.lon.is_finite());
        }
    }
});
