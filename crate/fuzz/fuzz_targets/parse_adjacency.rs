#![no_main]

use libfuzzer_sys::fuzz_target;
use testbed_core::topo::parse_adjacency;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(topo) = parse_adjacency(text) {
        // a stored topology must read back as itself
        let again = parse_adjacency(&topo.to_json()).expect("serialized topology parses");
        assert_eq!(again, topo);
    }
});
