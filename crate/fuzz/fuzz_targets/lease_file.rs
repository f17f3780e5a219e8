#![no_main]

use libfuzzer_sys::fuzz_target;
use testbed_core::discovery::{LeaseRegistry, DEFAULT_POOL};

fuzz_target!(|data: &[u8]| {
    let (first, last) = DEFAULT_POOL;
    if let Ok(reg) = LeaseRegistry::load(first, last, data) {
        assert!(reg.is_consistent());
        let mut saved = Vec::new();
        reg.save(&mut saved).unwrap();
        assert_eq!(LeaseRegistry::load(first, last, &saved[..]).unwrap(), reg);
    }
});
