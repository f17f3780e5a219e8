#![no_main]

use std::net::{IpAddr, Ipv4Addr};

use libfuzzer_sys::fuzz_target;
use testbed_core::logrepo::LogStore;

// Split the input into datagrams on newlines and feed them all in.
fuzz_target!(|data: &[u8]| {
    let mut store = LogStore::new();
    let src = IpAddr::V4(Ipv4Addr::new(10, 0, 0, 10));
    let mut n = 0;
    for (t, datagram) in data.split(|b| *b == b'\n').enumerate() {
        let _ = store.ingest_datagram(datagram, src, t as i64);
        n += 1;
    }
    assert_eq!(store.total_received(), n);
    assert_eq!(store.len() + store.quarantine().len(), n as usize);
});
