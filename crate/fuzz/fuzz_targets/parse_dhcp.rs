#![no_main]

use libfuzzer_sys::fuzz_target;
use testbed_core::discovery::parse_dhcp_message;

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = parse_dhcp_message(data) {
        assert_eq!(msg.encode(), data);
    }
});
