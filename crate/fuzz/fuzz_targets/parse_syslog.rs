#![no_main]

use libfuzzer_sys::fuzz_target;
use testbed_core::logrepo::parse_syslog;

fuzz_target!(|data: &[u8]| {
    if let Ok(rec) = parse_syslog(data) {
        let line = rec.to_string();
        let again = parse_syslog(line.as_bytes()).expect("canonical line parses");
        assert_eq!(again, rec);
        assert_eq!(again.to_string(), line);
    }
});
