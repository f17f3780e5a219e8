//! DHCPv4 message decoding: 236-byte fixed header, magic cookie, options.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FIXED_HEADER_LEN: usize = 236;
pub const MAGIC_COOKIE: [u8; 4] = [99, 130, 83, 99];

pub const OPTION_PAD: u8 = 0;
pub const OPTION_MESSAGE_TYPE: u8 = 53;
pub const OPTION_VENDOR_CLASS: u8 = 60;
pub const OPTION_END: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DhcpError {
    #[error("message is {0} bytes, shorter than header plus cookie")]
    TooShort(usize),
    #[error("magic cookie missing")]
    MissingCookie,
    #[error("option {code} declares {declared} bytes but only {remaining} remain")]
    TruncatedOption {
        code: u8,
        declared: usize,
        remaining: usize,
    },
    #[error("options are not terminated by code 255")]
    MissingTerminator,
}

impl DhcpError {
    pub fn kind(&self) -> &'static str {
        match self {
            DhcpError::TooShort(_) => "too_short",
            DhcpError::MissingCookie => "missing_cookie",
            DhcpError::TruncatedOption { .. } => "truncated_option",
            DhcpError::MissingTerminator => "missing_terminator",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MessageType {
    Discover,
    Offer,
    Request,
    Decline,
    Ack,
    Nak,
    Release,
    Inform,
    Other(u8),
}

impl From<u8> for MessageType {
    fn from(v: u8) -> Self {
        match v {
            1 => MessageType::Discover,
            2 => MessageType::Offer,
            3 => MessageType::Request,
            4 => MessageType::Decline,
            5 => MessageType::Ack,
            6 => MessageType::Nak,
            7 => MessageType::Release,
            8 => MessageType::Inform,
            other => MessageType::Other(other),
        }
    }
}

impl From<MessageType> for u8 {
    fn from(t: MessageType) -> u8 {
        match t {
            MessageType::Discover => 1,
            MessageType::Offer => 2,
            MessageType::Request => 3,
            MessageType::Decline => 4,
            MessageType::Ack => 5,
            MessageType::Nak => 6,
            MessageType::Release => 7,
            MessageType::Inform => 8,
            MessageType::Other(v) => v,
        }
    }
}

/// One option as it appeared on the wire. Pad options are kept (code 0, no payload).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DhcpOption {
    pub code: u8,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DhcpMessage {
    pub op: u8,
    pub htype: u8,
    pub hlen: u8,
    pub hops: u8,
    pub xid: u32,
    pub secs: u16,
    pub flags: u16,
    pub ciaddr: Ipv4Addr,
    pub yiaddr: Ipv4Addr,
    pub siaddr: Ipv4Addr,
    pub giaddr: Ipv4Addr,
    pub chaddr: [u8; 16],
    pub sname: Vec<u8>,
    pub file: Vec<u8>,
    /// Options in wire order, excluding the end marker.
    pub options: Vec<DhcpOption>,
    /// Bytes following the end marker (usually zero padding).
    pub trailing: Vec<u8>,
    pub message_type: Option<MessageType>,
}

impl DhcpMessage {
    /// A minimal BOOTREQUEST for `mac` carrying the given options.
    pub fn request(xid: u32, mac: [u8; 6], options: Vec<DhcpOption>) -> Self {
        let mut chaddr = [0u8; 16];
        chaddr[..6].copy_from_slice(&mac);
        let message_type = find_message_type(&options);
        DhcpMessage {
            op: 1,
            htype: 1,
            hlen: 6,
            hops: 0,
            xid,
            secs: 0,
            flags: 0,
            ciaddr: Ipv4Addr::UNSPECIFIED,
            yiaddr: Ipv4Addr::UNSPECIFIED,
            siaddr: Ipv4Addr::UNSPECIFIED,
            giaddr: Ipv4Addr::UNSPECIFIED,
            chaddr,
            sname: vec![0; 64],
            file: vec![0; 128],
            options,
            trailing: Vec::new(),
            message_type,
        }
    }

    pub fn mac(&self) -> [u8; 6] {
        let mut mac = [0u8; 6];
        mac.copy_from_slice(&self.chaddr[..6]);
        mac
    }

    pub fn option(&self, code: u8) -> Option<&[u8]> {
        self.options
            .iter()
            .find(|o| o.code == code)
            .map(|o| o.payload.as_slice())
    }

    /// Vendor Class Identifier (option 60), empty when absent.
    pub fn vendor_class(&self) -> String {
        self.option(OPTION_VENDOR_CLASS)
            .map(|v| String::from_utf8_lossy(v).into_owned())
            .unwrap_or_default()
    }

    /// The options section as it goes on the wire: options, end marker, trailing bytes.
    pub fn encode_options(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for opt in &self.options {
            out.push(opt.code);
            if opt.code != OPTION_PAD {
                out.push(opt.payload.len() as u8);
                out.extend_from_slice(&opt.payload);
            }
        }
        out.push(OPTION_END);
        out.extend_from_slice(&self.trailing);
        out
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_HEADER_LEN + 64);
        out.extend_from_slice(&[self.op, self.htype, self.hlen, self.hops]);
        out.extend_from_slice(&self.xid.to_be_bytes());
        out.extend_from_slice(&self.secs.to_be_bytes());
        out.extend_from_slice(&self.flags.to_be_bytes());
        for addr in [self.ciaddr, self.yiaddr, self.siaddr, self.giaddr] {
            out.extend_from_slice(&addr.octets());
        }
        out.extend_from_slice(&self.chaddr);
        let mut fixed = |field: &[u8], len: usize| {
            let mut buf = field.to_vec();
            buf.resize(len, 0);
            out.extend_from_slice(&buf);
        };
        fixed(&self.sname, 64);
        fixed(&self.file, 128);
        out.extend_from_slice(&MAGIC_COOKIE);
        out.extend_from_slice(&self.encode_options());
        out
    }
}

fn find_message_type(options: &[DhcpOption]) -> Option<MessageType> {
    options
        .iter()
        .find(|o| o.code == OPTION_MESSAGE_TYPE)
        .and_then(|o| o.payload.first())
        .map(|&v| MessageType::from(v))
}

fn be16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn ipv4(b: &[u8]) -> Ipv4Addr {
    Ipv4Addr::new(b[0], b[1], b[2], b[3])
}

/// Decode one DHCP message.
pub fn parse_dhcp_message(bytes: &[u8]) -> Result<DhcpMessage, DhcpError> {
    if bytes.len() < FIXED_HEADER_LEN + MAGIC_COOKIE.len() {
        return Err(DhcpError::TooShort(bytes.len()));
    }
    let h = &bytes[..FIXED_HEADER_LEN];
    if bytes[FIXED_HEADER_LEN..FIXED_HEADER_LEN + 4] != MAGIC_COOKIE {
        return Err(DhcpError::MissingCookie);
    }

    let mut options = Vec::new();
    let mut rest = &bytes[FIXED_HEADER_LEN + 4..];
    let trailing = loop {
        let Some((&code, after)) = rest.split_first() else {
            return Err(DhcpError::MissingTerminator);
        };
        match code {
            OPTION_END => break after.to_vec(),
            OPTION_PAD => {
                options.push(DhcpOption {
                    code,
                    payload: Vec::new(),
                });
                rest = after;
            }
            _ => {
                let Some((&len, body)) = after.split_first() else {
                    return Err(DhcpError::TruncatedOption {
                        code,
                        declared: 1,
                        remaining: 0,
                    });
                };
                let len = len as usize;
                if len > body.len() {
                    return Err(DhcpError::TruncatedOption {
                        code,
                        declared: len,
                        remaining: body.len(),
                    });
                }
                options.push(DhcpOption {
                    code,
                    payload: body[..len].to_vec(),
                });
                rest = &body[len..];
            }
        }
    };

    let mut chaddr = [0u8; 16];
    chaddr.copy_from_slice(&h[28..44]);
    let message_type = find_message_type(&options);
    Ok(DhcpMessage {
        op: h[0],
        htype: h[1],
        hlen: h[2],
        hops: h[3],
        xid: u32::from_be_bytes([h[4], h[5], h[6], h[7]]),
        secs: be16(&h[8..10]),
        flags: be16(&h[10..12]),
        ciaddr: ipv4(&h[12..16]),
        yiaddr: ipv4(&h[16..20]),
        siaddr: ipv4(&h[20..24]),
        giaddr: ipv4(&h[24..28]),
        chaddr,
        sname: h[44..108].to_vec(),
        file: h[108..236].to_vec(),
        options,
        trailing,
        message_type,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// DISCOVER encoded byte by byte, independent of `DhcpMessage::encode`.
    fn hand_encoded_discover(vci: Option<&[u8]>) -> Vec<u8> {
        let mut b = vec![0u8; FIXED_HEADER_LEN];
        b[0] = 1; // BOOTREQUEST
        b[1] = 1; // ethernet
        b[2] = 6;
        b[4..8].copy_from_slice(&[0x39, 0x03, 0xf3, 0x26]);
        b[10] = 0x80; // broadcast flag
        b[28..34].copy_from_slice(&[0x00, 0x05, 0x3c, 0x04, 0x8d, 0x59]);
        b.extend_from_slice(&[99, 130, 83, 99]);
        b.extend_from_slice(&[53, 1, 1]);
        if let Some(vci) = vci {
            b.push(60);
            b.push(vci.len() as u8);
            b.extend_from_slice(vci);
        }
        b.extend_from_slice(&[55, 2, 1, 3]);
        b.push(255);
        b
    }

    #[test]
    fn discover_with_vendor_class() {
        let msg = parse_dhcp_message(&hand_encoded_discover(Some(b"ubuntu"))).unwrap();
        assert_eq!(msg.message_type, Some(MessageType::Discover));
        assert_eq!(msg.vendor_class(), "ubuntu");
        assert_eq!(msg.xid, 0x3903_f326);
        assert_eq!(msg.flags, 0x8000);
        assert_eq!(msg.mac(), [0x00, 0x05, 0x3c, 0x04, 0x8d, 0x59]);
        assert_eq!(msg.options.len(), 3);
    }

    #[test]
    fn discover_without_vendor_class() {
        let msg = parse_dhcp_message(&hand_encoded_discover(None)).unwrap();
        assert_eq!(msg.vendor_class(), "");
    }

    #[test]
    fn truncated_option() {
        let mut b = hand_encoded_discover(None);
        b.truncate(FIXED_HEADER_LEN + 4);
        b.extend_from_slice(&[60, 10, b'a', b'b', b'c']);
        assert_eq!(
            parse_dhcp_message(&b),
            Err(DhcpError::TruncatedOption {
                code: 60,
                declared: 10,
                remaining: 3
            })
        );
        // length byte itself missing
        b.truncate(FIXED_HEADER_LEN + 4);
        b.push(60);
        assert_eq!(parse_dhcp_message(&b).unwrap_err().kind(), "truncated_option");
    }

    #[test]
    fn missing_cookie_and_terminator() {
        let mut b = hand_encoded_discover(None);
        b[FIXED_HEADER_LEN] = 0;
        assert_eq!(parse_dhcp_message(&b), Err(DhcpError::MissingCookie));

        let mut b = hand_encoded_discover(None);
        b.pop();
        assert_eq!(parse_dhcp_message(&b), Err(DhcpError::MissingTerminator));

        assert_eq!(parse_dhcp_message(&[0u8; 100]), Err(DhcpError::TooShort(100)));
    }

    #[test]
    fn pads_and_trailing_bytes_round_trip() {
        let mut b = hand_encoded_discover(Some(b"pi"));
        b.pop();
        b.extend_from_slice(&[0, 0, 255, 0, 0, 0]);
        let msg = parse_dhcp_message(&b).unwrap();
        assert_eq!(msg.trailing, vec![0, 0, 0]);
        assert_eq!(msg.encode_options(), b[FIXED_HEADER_LEN + 4..].to_vec());
        assert_eq!(msg.encode(), b);
    }

    #[test]
    fn request_builder_encodes_parsable_message() {
        let msg = DhcpMessage::request(
            7,
            [1, 2, 3, 4, 5, 6],
            vec![
                DhcpOption { code: 53, payload: vec![3] },
                DhcpOption { code: 60, payload: b"mac".to_vec() },
            ],
        );
        let parsed = parse_dhcp_message(&msg.encode()).unwrap();
        assert_eq!(parsed, msg);
        assert_eq!(parsed.message_type, Some(MessageType::Request));
    }
}
