#![no_main]

use libfuzzer_sys::fuzz_target;
use testbed_core::emulator::parse_experiment_spec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_experiment_spec(text) {
        let again = parse_experiment_spec(&spec.to_json()).expect("serialized spec parses");
        assert_eq!(again, spec);
    }
});
