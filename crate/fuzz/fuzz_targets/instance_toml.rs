#![no_main]

use libfuzzer_sys::fuzz_target;
use mcs_alloc::scenario::{instance_from_str, instance_to_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = instance_from_str(text) {
        // Anything accepted must survive a save/load cycle unchanged.
        let saved = instance_to_string(&file).expect("accepted instance serializes");
        let again = instance_from_str(&saved).expect("saved instance loads");
        assert_eq!(again, file);
    }
});
