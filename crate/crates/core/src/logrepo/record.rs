//! Structured syslog lines: `<PRI>VERSION TIMESTAMP HOST APP PROCID MSGID SD [MSG]`.

use std::fmt;

use chrono::{DateTime, FixedOffset, SecondsFormat};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NIL: &str = "-";
const MAX_PRI: u16 = 191;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyslogError {
    #[error("missing '<PRI>' header")]
    MissingPri,
    #[error("invalid PRI value")]
    InvalidPri,
    #[error("PRI {0} exceeds 191")]
    PriOutOfRange(u16),
    #[error("invalid version")]
    InvalidVersion,
    #[error("unparseable timestamp {0:?}")]
    InvalidTimestamp(String),
    #[error("missing or invalid {0} field")]
    InvalidField(&'static str),
    #[error("malformed structured data")]
    InvalidStructuredData,
    #[error("message is not valid UTF-8")]
    InvalidEncoding,
}

impl SyslogError {
    pub fn kind(&self) -> &'static str {
        match self {
            SyslogError::MissingPri => "missing_pri",
            SyslogError::InvalidPri => "invalid_pri",
            SyslogError::PriOutOfRange(_) => "pri_out_of_range",
            SyslogError::InvalidVersion => "invalid_version",
            SyslogError::InvalidTimestamp(_) => "invalid_timestamp",
            SyslogError::InvalidField(_) => "invalid_field",
            SyslogError::InvalidStructuredData => "invalid_structured_data",
            SyslogError::InvalidEncoding => "invalid_encoding",
        }
    }
}

/// Syslog severity, 0 (emergency) to 7 (debug).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Severity(u8);

impl Severity {
    pub const EMERGENCY: Severity = Severity(0);
    pub const ALERT: Severity = Severity(1);
    pub const CRITICAL: Severity = Severity(2);
    pub const ERROR: Severity = Severity(3);
    pub const WARNING: Severity = Severity(4);
    pub const NOTICE: Severity = Severity(5);
    pub const INFO: Severity = Severity(6);
    pub const DEBUG: Severity = Severity(7);

    pub fn new(level: u8) -> Option<Severity> {
        (level <= 7).then_some(Severity(level))
    }

    pub fn level(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Severity {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        Severity::new(v).ok_or_else(|| format!("severity {v} out of range 0-7"))
    }
}

impl From<Severity> for u8 {
    fn from(s: Severity) -> u8 {
        s.0
    }
}

/// The parsed content of one syslog line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyslogRecord {
    pub facility: u8,
    pub severity: Severity,
    pub version: u16,
    /// `None` for the nil value `-`.
    pub timestamp: Option<DateTime<FixedOffset>>,
    pub host: String,
    pub app: String,
    pub procid: String,
    pub msgid: String,
    /// Raw structured-data section, empty for `-`.
    pub structured_data: String,
    pub msg: String,
}

impl SyslogRecord {
    pub fn new(facility: u8, severity: Severity, host: &str, app: &str, msg: &str) -> Self {
        SyslogRecord {
            facility,
            severity,
            version: 1,
            timestamp: None,
            host: host.to_string(),
            app: app.to_string(),
            procid: String::new(),
            msgid: String::new(),
            structured_data: String::new(),
            msg: msg.to_string(),
        }
    }

    pub fn priority(&self) -> u16 {
        self.facility as u16 * 8 + self.severity.level() as u16
    }
}

fn nil_or(s: &str) -> &str {
    if s.is_empty() {
        NIL
    } else {
        s
    }
}

impl fmt::Display for SyslogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>{} ", self.priority(), self.version)?;
        match &self.timestamp {
            Some(ts) => f.write_str(&ts.to_rfc3339_opts(SecondsFormat::AutoSi, true))?,
            None => f.write_str(NIL)?,
        }
        write!(
            f,
            " {} {} {} {} {}",
            nil_or(&self.host),
            nil_or(&self.app),
            nil_or(&self.procid),
            nil_or(&self.msgid),
            nil_or(&self.structured_data)
        )?;
        if !self.msg.is_empty() {
            write!(f, " {}", self.msg)?;
        }
        Ok(())
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.buf.get(self.pos) == Some(&b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Bytes up to the next space (not consumed) or end of input.
    fn token(&mut self) -> &'a [u8] {
        let rest = self.rest();
        let len = rest.iter().position(|&b| b == b' ').unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn space(&mut self, field: &'static str) -> Result<(), SyslogError> {
        if self.eat(b' ') {
            Ok(())
        } else {
            Err(SyslogError::InvalidField(field))
        }
    }
}

fn header_field(
    cur: &mut Cursor<'_>,
    field: &'static str,
    max_len: usize,
) -> Result<String, SyslogError> {
    cur.space(field)?;
    let tok = cur.token();
    if tok.is_empty() || tok.len() > max_len || !tok.iter().all(|b| (33..=126).contains(b)) {
        return Err(SyslogError::InvalidField(field));
    }
    Ok(if tok == NIL.as_bytes() {
        String::new()
    } else {
        // printable ASCII checked above
        String::from_utf8(tok.to_vec()).expect("ascii")
    })
}

fn parse_pri(cur: &mut Cursor<'_>) -> Result<u16, SyslogError> {
    if !cur.eat(b'<') {
        return Err(SyslogError::MissingPri);
    }
    let rest = cur.rest();
    let digits = rest.iter().take_while(|b| b.is_ascii_digit()).count();
    if digits == 0 || digits > 3 || rest.get(digits) != Some(&b'>') {
        return Err(SyslogError::InvalidPri);
    }
    if digits > 1 && rest[0] == b'0' {
        return Err(SyslogError::InvalidPri);
    }
    let pri: u16 = std::str::from_utf8(&rest[..digits])
        .expect("digits")
        .parse()
        .expect("at most three digits");
    cur.pos += digits + 1;
    if pri > MAX_PRI {
        return Err(SyslogError::PriOutOfRange(pri));
    }
    Ok(pri)
}

fn parse_version(cur: &mut Cursor<'_>) -> Result<u16, SyslogError> {
    let tok = cur.token();
    let valid = (1..=3).contains(&tok.len())
        && tok.iter().all(u8::is_ascii_digit)
        && tok[0] != b'0';
    if !valid {
        return Err(SyslogError::InvalidVersion);
    }
    Ok(std::str::from_utf8(tok).expect("digits").parse().expect("small"))
}

fn parse_timestamp(cur: &mut Cursor<'_>) -> Result<Option<DateTime<FixedOffset>>, SyslogError> {
    cur.space("timestamp")?;
    let tok = cur.token();
    if tok == NIL.as_bytes() {
        return Ok(None);
    }
    let text = String::from_utf8_lossy(tok);
    // Only the upper-case 'T' separator is allowed in syslog timestamps.
    if tok.len() < 11 || tok[10] != b'T' {
        return Err(SyslogError::InvalidTimestamp(text.into_owned()));
    }
    DateTime::parse_from_rfc3339(&text)
        .map(Some)
        .map_err(|_| SyslogError::InvalidTimestamp(text.into_owned()))
}

/// Length of the structured-data section at the start of `buf`.
fn structured_data_len(buf: &[u8]) -> Result<usize, SyslogError> {
    if buf.first() == Some(&b'-') {
        return match buf.get(1) {
            None | Some(b' ') => Ok(1),
            _ => Err(SyslogError::InvalidStructuredData),
        };
    }
    let is_name_char = |b: u8| (33..=126).contains(&b) && !matches!(b, b'=' | b']' | b'"' | b' ');
    let mut i = 0;
    let mut elements = 0;
    while buf.get(i) == Some(&b'[') {
        i += 1;
        let id_start = i;
        while buf.get(i).is_some_and(|&b| is_name_char(b)) {
            i += 1;
        }
        if i == id_start {
            return Err(SyslogError::InvalidStructuredData);
        }
        loop {
            match buf.get(i) {
                Some(b']') => {
                    i += 1;
                    break;
                }
                Some(b' ') => {
                    i += 1;
                    let name_start = i;
                    while buf.get(i).is_some_and(|&b| is_name_char(b)) {
                        i += 1;
                    }
                    if i == name_start || buf.get(i) != Some(&b'=') || buf.get(i + 1) != Some(&b'"')
                    {
                        return Err(SyslogError::InvalidStructuredData);
                    }
                    i += 2;
                    loop {
                        match buf.get(i) {
                            Some(b'\\') => {
                                if buf.get(i + 1).is_none() {
                                    return Err(SyslogError::InvalidStructuredData);
                                }
                                i += 2;
                            }
                            Some(b'"') => {
                                i += 1;
                                break;
                            }
                            Some(_) => i += 1,
                            None => return Err(SyslogError::InvalidStructuredData),
                        }
                    }
                }
                _ => return Err(SyslogError::InvalidStructuredData),
            }
        }
        elements += 1;
    }
    if elements == 0 || !matches!(buf.get(i), None | Some(b' ')) {
        return Err(SyslogError::InvalidStructuredData);
    }
    Ok(i)
}

/// Parse one syslog line. Never panics; every input yields a record or a typed error.
pub fn parse_syslog(line: &[u8]) -> Result<SyslogRecord, SyslogError> {
    let mut cur = Cursor { buf: line, pos: 0 };
    let pri = parse_pri(&mut cur)?;
    let version = parse_version(&mut cur)?;
    let timestamp = parse_timestamp(&mut cur)?;
    let host = header_field(&mut cur, "hostname", 255)?;
    let app = header_field(&mut cur, "app-name", 48)?;
    let procid = header_field(&mut cur, "procid", 128)?;
    let msgid = header_field(&mut cur, "msgid", 32)?;

    cur.space("structured-data")?;
    let sd_len = structured_data_len(cur.rest())?;
    let sd = &cur.rest()[..sd_len];
    let structured_data = if sd == NIL.as_bytes() {
        String::new()
    } else {
        std::str::from_utf8(sd)
            .map_err(|_| SyslogError::InvalidEncoding)?
            .to_string()
    };
    cur.pos += sd_len;

    let msg = if cur.eat(b' ') {
        std::str::from_utf8(cur.rest())
            .map_err(|_| SyslogError::InvalidEncoding)?
            .to_string()
    } else {
        String::new()
    };

    Ok(SyslogRecord {
        facility: (pri / 8) as u8,
        severity: Severity((pri % 8) as u8),
        version,
        timestamp,
        host,
        app,
        procid,
        msgid,
        structured_data,
        msg,
    })
}
