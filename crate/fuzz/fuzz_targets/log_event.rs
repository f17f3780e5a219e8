#![no_main]

use libfuzzer_sys::fuzz_target;
use testbed_core::logrepo::Event;

fuzz_target!(|data: &[u8]| {
    let Ok(msg) = std::str::from_utf8(data) else { return };
    if let Some(ev) = Event::parse(msg) {
        // numbers get rounded on the way out, but the shape must survive
        let line = ev.to_string();
        assert!(Event::parse(&line).is_some(), "{line:?}");
    }
});
