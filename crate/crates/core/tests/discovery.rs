use std::net::Ipv4Addr;

use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use testbed_core::discovery::{
    parse_dhcp_message, DhcpError, DhcpMessage, DhcpOption, LeaseRegistry, MacAddr, MessageType,
    OsType,
};

/// DISCOVER built byte by byte: header, cookie, option 53, option 60, option 55, end.
fn hand_encoded_discover(mac: [u8; 6], vci: &str) -> Vec<u8> {
    let mut b = vec![1u8, 1, 6, 0];
    b.extend_from_slice(&[0xde, 0xad, 0xbe, 0xef]); // xid
    b.extend_from_slice(&[0, 3]); // secs
    b.extend_from_slice(&[0x80, 0]); // broadcast flag
    b.extend_from_slice(&[0u8; 16]); // ciaddr..giaddr
    b.extend_from_slice(&mac);
    b.extend_from_slice(&[0u8; 10]);
    b.extend_from_slice(&[0u8; 64 + 128]);
    assert_eq!(b.len(), 236);
    b.extend_from_slice(&[0x63, 0x82, 0x53, 0x63]);
    b.extend_from_slice(&[53, 1, 1]);
    b.push(60);
    b.push(vci.len() as u8);
    b.extend_from_slice(vci.as_bytes());
    b.extend_from_slice(&[55, 3, 1, 3, 6]);
    b.push(255);
    b
}

#[test]
fn hand_encoded_vectors_map_to_os_types() {
    let cases = [
        ("ubuntu-22.04", OsType::Ubuntu),
        ("Ubuntu Server", OsType::Ubuntu),
        ("macOS-14.2", OsType::Mac),
        ("pi-bookworm", OsType::Pi),
        ("raspbian", OsType::Pi),
        ("windows", OsType::Unknown),
        ("", OsType::Unknown),
    ];
    let mut reg = LeaseRegistry::default_pool();
    let now = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    for (i, (vci, os)) in cases.iter().enumerate() {
        let mac = [0x02, 0, 0, 0, 0, i as u8];
        let bytes = hand_encoded_discover(mac, vci);
        let msg = parse_dhcp_message(&bytes).unwrap();
        assert_eq!(msg.message_type, Some(MessageType::Discover));
        assert_eq!(msg.xid, 0xdeadbeef);
        assert_eq!(msg.secs, 3);
        assert_eq!(msg.flags, 0x8000);
        assert_eq!(msg.mac(), mac);
        assert_eq!(msg.vendor_class(), *vci);
        assert_eq!(msg.option(55), Some(&[1u8, 3, 6][..]));
        assert_eq!(msg.encode(), bytes, "re-encoding is byte exact");

        let lease = reg.handle_discover(&msg, now).unwrap();
        assert_eq!(lease.os_type, *os, "{vci}");
        assert_eq!(lease.ip, Ipv4Addr::new(10, 0, 0, 10 + i as u8));
        assert_eq!(lease.mac, MacAddr(mac));
    }
}

#[test]
fn truncation_yields_typed_errors() {
    let full = hand_encoded_discover([2, 0, 0, 0, 0, 1], "ubuntu");
    assert_eq!(parse_dhcp_message(&full[..100]), Err(DhcpError::TooShort(100)));
    assert_eq!(parse_dhcp_message(&full[..239]), Err(DhcpError::TooShort(239)));

    let mut bad_cookie = full.clone();
    bad_cookie[237] = 0;
    assert_eq!(parse_dhcp_message(&bad_cookie), Err(DhcpError::MissingCookie));

    // cut inside the vendor class payload: 240 cookie, 243 option 60 code, 244 len, 245.. data
    let err = parse_dhcp_message(&full[..247]).unwrap_err();
    assert_eq!(
        err,
        DhcpError::TruncatedOption {
            code: 60,
            declared: 6,
            remaining: 2
        }
    );
    assert_eq!(err.kind(), "truncated_option");

    // length byte missing altogether
    let err = parse_dhcp_message(&full[..244]).unwrap_err();
    assert_eq!(err.kind(), "truncated_option");

    // everything present except the end marker
    let err = parse_dhcp_message(&full[..full.len() - 1]).unwrap_err();
    assert_eq!(err, DhcpError::MissingTerminator);

    // every prefix fails with a typed error, never a panic
    for n in 0..full.len() {
        assert!(parse_dhcp_message(&full[..n]).is_err(), "prefix {n}");
    }
}

fn options() -> impl Strategy<Value = Vec<DhcpOption>> {
    let opt = prop_oneof![
        1 => Just(DhcpOption { code: 0, payload: vec![] }),
        6 => (1u8..255, prop::collection::vec(any::<u8>(), 0..40))
            .prop_map(|(code, payload)| DhcpOption { code, payload }),
    ];
    prop::collection::vec(opt, 0..12)
}

proptest! {
    #[test]
    fn options_round_trip(
        xid in any::<u32>(),
        mac in any::<[u8; 6]>(),
        opts in options(),
        trailing in prop::collection::vec(Just(0u8), 0..8),
    ) {
        let mut msg = DhcpMessage::request(xid, mac, opts);
        msg.trailing = trailing;
        let bytes = msg.encode();
        let parsed = parse_dhcp_message(&bytes).unwrap();
        prop_assert_eq!(&parsed, &msg);
        prop_assert_eq!(parsed.encode(), bytes);
    }

    #[test]
    fn arbitrary_bytes_never_panic(raw in prop::collection::vec(any::<u8>(), 0..400)) {
        let _ = parse_dhcp_message(&raw);
    }

    #[test]
    fn arbitrary_option_sections_never_panic(tail in prop::collection::vec(any::<u8>(), 0..300)) {
        let mut bytes = hand_encoded_discover([2, 0, 0, 0, 0, 9], "pi")[..240].to_vec();
        bytes.extend_from_slice(&tail);
        if let Ok(msg) = parse_dhcp_message(&bytes) {
            prop_assert_eq!(msg.encode(), bytes);
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Discover(u8, u8),
    Release(u8),
}

fn ops() -> impl Strategy<Value = Vec<Op>> {
    let op = prop_oneof![
        3 => (0u8..20, 0u8..4).prop_map(|(m, os)| Op::Discover(m, os)),
        1 => (0u8..20).prop_map(Op::Release),
    ];
    prop::collection::vec(op, 0..80)
}

fn apply(reg: &mut LeaseRegistry, ops: &[Op]) -> Vec<Option<Ipv4Addr>> {
    let now = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let vcis = ["ubuntu", "mac", "pi", "other"];
    ops.iter()
        .map(|op| match *op {
            Op::Discover(m, os) => {
                let opts = vec![
                    DhcpOption { code: 53, payload: vec![1] },
                    DhcpOption { code: 60, payload: vcis[os as usize].as_bytes().to_vec() },
                ];
                let msg = DhcpMessage::request(7, [2, 0, 0, 0, 0, m], opts);
                reg.handle_discover(&msg, now).ok().map(|l| l.ip)
            }
            Op::Release(m) => reg.release(&MacAddr([2, 0, 0, 0, 0, m])).map(|l| l.ip),
        })
        .collect()
}

proptest! {
    #[test]
    fn lease_invariants_hold_and_replay_is_deterministic(ops in ops()) {
        // small pool so exhaustion is exercised
        let first = Ipv4Addr::new(10, 0, 0, 10);
        let last = Ipv4Addr::new(10, 0, 0, 17);
        let mut a = LeaseRegistry::new(first, last).unwrap();
        let mut b = LeaseRegistry::new(first, last).unwrap();
        let out_a = apply(&mut a, &ops);
        let out_b = apply(&mut b, &ops);
        prop_assert_eq!(out_a, out_b);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.is_consistent());
        prop_assert!(a.len() as u64 <= a.pool_size());

        let ips: Vec<Ipv4Addr> = a.leases().map(|l| l.ip).collect();
        let mut dedup = ips.clone();
        dedup.dedup();
        prop_assert_eq!(&ips, &dedup);

        let mut file = Vec::new();
        a.save(&mut file).unwrap();
        let loaded = LeaseRegistry::load(first, last, &file[..]).unwrap();
        prop_assert_eq!(loaded, a);
    }
}

#[test]
fn pool_exhaustion_after_241_nodes() {
    let mut reg = LeaseRegistry::default_pool();
    assert_eq!(reg.pool_size(), 241);
    let now = Utc::now();
    for i in 0..241u32 {
        let b = i.to_be_bytes();
        let msg = DhcpMessage::request(i, [2, 0, b[0], b[1], b[2], b[3]], vec![DhcpOption { code: 53, payload: vec![1] }]);
        reg.handle_discover(&msg, now).unwrap();
    }
    let msg = DhcpMessage::request(0, [2, 1, 0, 0, 0, 0], vec![DhcpOption { code: 53, payload: vec![1] }]);
    assert!(reg.handle_discover(&msg, now).is_err());
    assert!(reg.is_consistent());
}
