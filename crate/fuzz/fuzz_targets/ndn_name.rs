#![no_main]

use libfuzzer_sys::fuzz_target;
use testbed_core::ndn::Name;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(name) = text.parse::<Name>() {
        assert_eq!(name.to_string().parse::<Name>().unwrap(), name);
    }
});
