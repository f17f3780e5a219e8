use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::net::Ipv4Addr;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{DhcpMessage, MessageType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d, e, g] = self.0;
        write!(f, "{a:02x}:{b:02x}:{c:02x}:{d:02x}:{e:02x}:{g:02x}")
    }
}

impl FromStr for MacAddr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 6 {
            return Err(format!("invalid MAC address {s:?}"));
        }
        let mut mac = [0u8; 6];
        for (slot, part) in mac.iter_mut().zip(parts) {
            *slot = u8::from_str_radix(part, 16).map_err(|_| format!("invalid MAC address {s:?}"))?;
        }
        Ok(MacAddr(mac))
    }
}

impl Serialize for MacAddr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Operating system reported through the vendor class identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OsType {
    Ubuntu,
    Mac,
    Pi,
    Unknown,
}

impl OsType {
    /// Case-insensitive prefix match on the vendor class.
    pub fn from_vendor_class(vci: &str) -> OsType {
        let v = vci.trim().to_ascii_lowercase();
        if v.starts_with("ubuntu") {
            OsType::Ubuntu
        } else if v.starts_with("mac") {
            OsType::Mac
        } else if v.starts_with("pi") || v.starts_with("raspb") {
            OsType::Pi
        } else {
            OsType::Unknown
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaseRecord {
    pub mac: MacAddr,
    pub ip: Ipv4Addr,
    pub vci: String,
    pub os_type: OsType,
    pub issued_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum LeaseError {
    #[error("address pool exhausted")]
    PoolExhausted,
    #[error("message type {0:?} is not DISCOVER or REQUEST")]
    UnexpectedMessageType(Option<MessageType>),
    #[error("invalid pool {0}-{1}")]
    InvalidPool(Ipv4Addr, Ipv4Addr),
    #[error("lease file line {line}: {reason}")]
    BadLeaseFile { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub const DEFAULT_POOL: (Ipv4Addr, Ipv4Addr) = (Ipv4Addr::new(10, 0, 0, 10), Ipv4Addr::new(10, 0, 0, 250));

/// Active leases. Single writer; clone it for a read snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaseRegistry {
    first: u32,
    last: u32,
    by_mac: BTreeMap<MacAddr, LeaseRecord>,
    by_ip: BTreeMap<Ipv4Addr, MacAddr>,
}

impl LeaseRegistry {
    pub fn new(first: Ipv4Addr, last: Ipv4Addr) -> Result<Self, LeaseError> {
        if u32::from(first) > u32::from(last) {
            return Err(LeaseError::InvalidPool(first, last));
        }
        Ok(LeaseRegistry {
            first: first.into(),
            last: last.into(),
            by_mac: BTreeMap::new(),
            by_ip: BTreeMap::new(),
        })
    }

    /// `10.0.0.10 - 10.0.0.250`, aligned with the addresses routes are compiled for.
    pub fn default_pool() -> Self {
        LeaseRegistry::new(DEFAULT_POOL.0, DEFAULT_POOL.1).expect("valid pool")
    }

    pub fn pool_size(&self) -> u64 {
        (self.last - self.first) as u64 + 1
    }

    pub fn len(&self) -> usize {
        self.by_mac.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_mac.is_empty()
    }

    pub fn get(&self, mac: &MacAddr) -> Option<&LeaseRecord> {
        self.by_mac.get(mac)
    }

    /// Leases in address order.
    pub fn leases(&self) -> impl Iterator<Item = &LeaseRecord> {
        self.by_ip.values().map(|mac| &self.by_mac[mac])
    }

    fn lowest_free(&self) -> Option<Ipv4Addr> {
        (self.first..=self.last)
            .map(Ipv4Addr::from)
            .find(|ip| !self.by_ip.contains_key(ip))
    }

    /// Assign or renew a lease for the sender of a DISCOVER/REQUEST.
    pub fn handle_discover(
        &mut self,
        msg: &DhcpMessage,
        now: DateTime<Utc>,
    ) -> Result<LeaseRecord, LeaseError> {
        if !matches!(
            msg.message_type,
            Some(MessageType::Discover) | Some(MessageType::Request)
        ) {
            return Err(LeaseError::UnexpectedMessageType(msg.message_type));
        }
        let mac = MacAddr(msg.mac());
        let vci = msg.vendor_class();
        let ip = match self.by_mac.get(&mac) {
            Some(existing) => existing.ip,
            None => self.lowest_free().ok_or(LeaseError::PoolExhausted)?,
        };
        let lease = LeaseRecord {
            mac,
            ip,
            os_type: OsType::from_vendor_class(&vci),
            vci,
            issued_at: now,
        };
        self.by_ip.insert(ip, mac);
        self.by_mac.insert(mac, lease.clone());
        Ok(lease)
    }

    pub fn release(&mut self, mac: &MacAddr) -> Option<LeaseRecord> {
        let lease = self.by_mac.remove(mac)?;
        self.by_ip.remove(&lease.ip);
        Some(lease)
    }

    /// One JSON object per line, in address order.
    pub fn save<W: Write>(&self, mut w: W) -> io::Result<()> {
        for lease in self.leases() {
            serde_json::to_writer(&mut w, lease)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuild a registry from a lease file written by [`LeaseRegistry::save`].
    pub fn load<R: BufRead>(
        first: Ipv4Addr,
        last: Ipv4Addr,
        reader: R,
    ) -> Result<Self, LeaseError> {
        let mut reg = LeaseRegistry::new(first, last)?;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| LeaseError::BadLeaseFile {
                line: i + 1,
                reason,
            };
            let lease: LeaseRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let ip = u32::from(lease.ip);
            if ip < reg.first || ip > reg.last {
                return Err(bad(format!("{} outside pool", lease.ip)));
            }
            if reg.by_ip.contains_key(&lease.ip) || reg.by_mac.contains_key(&lease.mac) {
                return Err(bad("duplicate lease".into()));
            }
            reg.by_ip.insert(lease.ip, lease.mac);
            reg.by_mac.insert(lease.mac, lease);
        }
        Ok(reg)
    }

    /// Both indexes agree and no address or MAC is leased twice.
    pub fn is_consistent(&self) -> bool {
        self.by_mac.len() == self.by_ip.len()
            && self.by_ip.iter().all(|(ip, mac)| {
                self.by_mac.get(mac).is_some_and(|l| l.ip == *ip)
                    && (self.first..=self.last).contains(&u32::from(*ip))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discovery::DhcpOption;
    use chrono::TimeZone;

    fn discover(mac_tail: u16, vci: &str) -> DhcpMessage {
        let [hi, lo] = mac_tail.to_be_bytes();
        let mut options = vec![DhcpOption {
            code: 53,
            payload: vec![1],
        }];
        if !vci.is_empty() {
            options.push(DhcpOption {
                code: 60,
                payload: vci.as_bytes().to_vec(),
            });
        }
        DhcpMessage::request(1, [0x02, 0, 0, 0, hi, lo], options)
    }

    fn at(s: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_700_000_000 + s, 0).unwrap()
    }

    #[test]
    fn first_node_gets_lowest_address() {
        let mut reg = LeaseRegistry::default_pool();
        let lease = reg.handle_discover(&discover(1, "ubuntu"), at(0)).unwrap();
        assert_eq!(lease.ip, Ipv4Addr::new(10, 0, 0, 10));
        assert_eq!(lease.os_type, OsType::Ubuntu);
    }

    #[test]
    fn same_mac_keeps_its_address() {
        let mut reg = LeaseRegistry::default_pool();
        let a = reg.handle_discover(&discover(1, "pi"), at(0)).unwrap();
        reg.handle_discover(&discover(2, "mac"), at(1)).unwrap();
        let again = reg.handle_discover(&discover(1, "pi"), at(5)).unwrap();
        assert_eq!(a.ip, again.ip);
        assert_eq!(again.issued_at, at(5));
        assert_eq!(reg.len(), 2);
        assert!(reg.is_consistent());
    }

    #[test]
    fn pool_exhaustion() {
        let mut reg = LeaseRegistry::default_pool();
        assert_eq!(reg.pool_size(), 241);
        for i in 0..241 {
            reg.handle_discover(&discover(i, ""), at(0)).unwrap();
        }
        assert!(matches!(
            reg.handle_discover(&discover(241, ""), at(0)),
            Err(LeaseError::PoolExhausted)
        ));
        assert!(reg.is_consistent());
    }

    #[test]
    fn released_address_is_reused() {
        let mut reg = LeaseRegistry::default_pool();
        reg.handle_discover(&discover(1, ""), at(0)).unwrap();
        reg.handle_discover(&discover(2, ""), at(0)).unwrap();
        reg.release(&MacAddr([0x02, 0, 0, 0, 0, 1])).unwrap();
        let lease = reg.handle_discover(&discover(3, ""), at(0)).unwrap();
        assert_eq!(lease.ip, Ipv4Addr::new(10, 0, 0, 10));
    }

    #[test]
    fn os_type_mapping() {
        for (vci, os) in [
            ("ubuntu", OsType::Ubuntu),
            ("Ubuntu-22.04", OsType::Ubuntu),
            ("MAC", OsType::Mac),
            ("macOS 14", OsType::Mac),
            ("pi", OsType::Pi),
            ("Raspbian", OsType::Pi),
            ("PiOS", OsType::Pi),
            ("", OsType::Unknown),
            ("windows", OsType::Unknown),
        ] {
            assert_eq!(OsType::from_vendor_class(vci), os, "{vci}");
        }
    }

    #[test]
    fn rejects_other_message_types() {
        let mut reg = LeaseRegistry::default_pool();
        let mut msg = discover(1, "");
        msg.message_type = Some(MessageType::Release);
        assert!(matches!(
            reg.handle_discover(&msg, at(0)),
            Err(LeaseError::UnexpectedMessageType(_))
        ));
    }

    #[test]
    fn lease_file_round_trip() {
        let mut reg = LeaseRegistry::default_pool();
        reg.handle_discover(&discover(1, "ubuntu"), at(0)).unwrap();
        reg.handle_discover(&discover(2, "raspbian"), at(1)).unwrap();
        let mut buf = Vec::new();
        reg.save(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"mac":"02:00:00:00:00:01","ip":"10.0.0.10","vci":"ubuntu","os_type":"ubuntu","issued_at":"#));
        let loaded = LeaseRegistry::load(
            Ipv4Addr::new(10, 0, 0, 10),
            Ipv4Addr::new(10, 0, 0, 250),
            buf.as_slice(),
        )
        .unwrap();
        assert_eq!(loaded, reg);
    }

    #[test]
    fn lease_file_with_duplicate_ip_is_rejected() {
        let line = r#"{"mac":"02:00:00:00:00:01","ip":"10.0.0.10","vci":"","os_type":"unknown","issued_at":"2024-01-01T00:00:00Z"}"#;
        let dup = r#"{"mac":"02:00:00:00:00:02","ip":"10.0.0.10","vci":"","os_type":"unknown","issued_at":"2024-01-01T00:00:00Z"}"#;
        let text = format!("{line}\n{dup}\n");
        let err = LeaseRegistry::load(
            Ipv4Addr::new(10, 0, 0, 10),
            Ipv4Addr::new(10, 0, 0, 250),
            text.as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(err, LeaseError::BadLeaseFile { line: 2, .. }));
    }
}
