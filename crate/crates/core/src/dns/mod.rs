//! The DNS message subset used by mDNS and DNS-SD.
//!
//! Messages are plain values. [`encode`] produces RFC 1035 wire bytes with
//! optional 2-byte suffix compression, [`decode`] parses them back, and
//! [`measure`] reports the encoded size without building the buffer.
//! Only class IN is modelled; the mDNS cache-flush and unicast-response bits
//! are accepted on decode and dropped.

mod name;
mod wire;

use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};

use thiserror::Error;

pub use name::{Name, MAX_LABEL_LEN, MAX_NAME_LEN};
pub use wire::{decode, encode, measure};

/// Size of the fixed message header.
pub const HEADER_LEN: usize = 12;

/// Longest TXT character-string.
pub const MAX_TXT_STRING: usize = 255;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("domain name longer than 255 bytes")]
    NameTooLong,
    #[error("label longer than 63 bytes")]
    LabelTooLong,
    #[error("empty label inside a domain name")]
    EmptyLabel,
    #[error("invalid escape sequence in domain name")]
    BadEscape,
    #[error("TXT character-string longer than 255 bytes")]
    TxtStringTooLong,
    #[error("TXT record without character-strings")]
    EmptyTxt,
    #[error("rdata longer than 65535 bytes")]
    RdataTooLong,
    #[error("more than 65535 entries in one section")]
    TooManyRecords,
    #[error("message truncated at offset {0}")]
    Truncated(usize),
    #[error("bad compression pointer at offset {0}")]
    BadPointer(usize),
    #[error("unsupported label type at offset {0}")]
    BadLabelType(usize),
    #[error("malformed rdata for type {rtype} at offset {offset}")]
    MalformedRdata { rtype: u16, offset: usize },
}

/// Whether the encoder may replace repeated name suffixes with pointers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compression {
    #[default]
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RecordType {
    A,
    Ns,
    Cname,
    Ptr,
    Txt,
    Aaaa,
    Srv,
    Other(u16),
}

impl RecordType {
    pub fn code(self) -> u16 {
        match self {
            RecordType::A => 1,
            RecordType::Ns => 2,
            RecordType::Cname => 5,
            RecordType::Ptr => 12,
            RecordType::Txt => 16,
            RecordType::Aaaa => 28,
            RecordType::Srv => 33,
            RecordType::Other(c) => c,
        }
    }

    pub fn from_code(code: u16) -> Self {
        match code {
            1 => RecordType::A,
            2 => RecordType::Ns,
            5 => RecordType::Cname,
            12 => RecordType::Ptr,
            16 => RecordType::Txt,
            28 => RecordType::Aaaa,
            33 => RecordType::Srv,
            c => RecordType::Other(c),
        }
    }
}

impl fmt::Display for RecordType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordType::A => f.write_str("A"),
            RecordType::Ns => f.write_str("NS"),
            RecordType::Cname => f.write_str("CNAME"),
            RecordType::Ptr => f.write_str("PTR"),
            RecordType::Txt => f.write_str("TXT"),
            RecordType::Aaaa => f.write_str("AAAA"),
            RecordType::Srv => f.write_str("SRV"),
            RecordType::Other(c) => write!(f, "TYPE{c}"),
        }
    }
}

impl std::str::FromStr for RecordType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "A" => RecordType::A,
            "NS" => RecordType::Ns,
            "CNAME" => RecordType::Cname,
            "PTR" => RecordType::Ptr,
            "TXT" => RecordType::Txt,
            "AAAA" => RecordType::Aaaa,
            "SRV" => RecordType::Srv,
            other => match other.strip_prefix("TYPE").and_then(|n| n.parse().ok()) {
                Some(code) => RecordType::from_code(code),
                None => return Err(format!("unknown record type {s:?}")),
            },
        })
    }
}

/// Response codes used by this crate.
pub mod rcode {
    pub const NOERROR: u8 = 0;
    pub const FORMERR: u8 = 1;
    pub const SERVFAIL: u8 = 2;
    pub const NXDOMAIN: u8 = 3;
    pub const NOTIMP: u8 = 4;
}

/// Header flags. Section counts are derived from the message body on encode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Header {
    pub id: u16,
    pub qr: bool,
    /// 4 bits.
    pub opcode: u8,
    pub aa: bool,
    pub tc: bool,
    pub rd: bool,
    pub ra: bool,
    /// 4 bits.
    pub rcode: u8,
}

impl Header {
    pub(crate) fn flags(&self) -> u16 {
        let mut v = 0u16;
        if self.qr {
            v |= 0x8000;
        }
        v |= ((self.opcode & 0x0f) as u16) << 11;
        if self.aa {
            v |= 0x0400;
        }
        if self.tc {
            v |= 0x0200;
        }
        if self.rd {
            v |= 0x0100;
        }
        if self.ra {
            v |= 0x0080;
        }
        v | (self.rcode & 0x0f) as u16
    }

    pub(crate) fn from_flags(id: u16, v: u16) -> Self {
        Header {
            id,
            qr: v & 0x8000 != 0,
            opcode: ((v >> 11) & 0x0f) as u8,
            aa: v & 0x0400 != 0,
            tc: v & 0x0200 != 0,
            rd: v & 0x0100 != 0,
            ra: v & 0x0080 != 0,
            rcode: (v & 0x0f) as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub name: Name,
    pub qtype: RecordType,
}

impl Question {
    pub fn new(name: Name, qtype: RecordType) -> Self {
        Question { name, qtype }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RData {
    A(Ipv4Addr),
    Aaaa(Ipv6Addr),
    Ptr(Name),
    Ns(Name),
    Cname(Name),
    /// `weight` carries what DNS-SD deployments sometimes call capacity.
    Srv {
        priority: u16,
        weight: u16,
        port: u16,
        target: Name,
    },
    Txt(Vec<Vec<u8>>),
    /// Any type outside the supported subset, kept verbatim.
    Unknown {
        rtype: u16,
        data: Vec<u8>,
    },
}

impl RData {
    pub fn rtype(&self) -> RecordType {
        match self {
            RData::A(_) => RecordType::A,
            RData::Aaaa(_) => RecordType::Aaaa,
            RData::Ptr(_) => RecordType::Ptr,
            RData::Ns(_) => RecordType::Ns,
            RData::Cname(_) => RecordType::Cname,
            RData::Srv { .. } => RecordType::Srv,
            RData::Txt(_) => RecordType::Txt,
            RData::Unknown { rtype, .. } => RecordType::from_code(*rtype),
        }
    }

    /// TXT strings joined into one lossy UTF-8 string, `None` for other types.
    pub fn txt_joined(&self) -> Option<String> {
        match self {
            RData::Txt(parts) => Some(
                parts
                    .iter()
                    .map(|p| String::from_utf8_lossy(p))
                    .collect::<String>(),
            ),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub name: Name,
    pub ttl: u32,
    pub data: RData,
}

impl Record {
    pub fn new(name: Name, ttl: u32, data: RData) -> Self {
        Record { name, ttl, data }
    }

    pub fn rtype(&self) -> RecordType {
        self.data.rtype()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Message {
    pub header: Header,
    pub questions: Vec<Question>,
    pub answers: Vec<Record>,
    pub authority: Vec<Record>,
    pub additional: Vec<Record>,
}

impl Message {
    pub fn query(id: u16, question: Question) -> Self {
        Message {
            header: Header {
                id,
                ..Header::default()
            },
            questions: vec![question],
            ..Message::default()
        }
    }

    /// A response skeleton echoing the query's id and questions.
    pub fn response_to(query: &Message) -> Self {
        Message {
            header: Header {
                id: query.header.id,
                qr: true,
                opcode: query.header.opcode,
                aa: true,
                rd: query.header.rd,
                ..Header::default()
            },
            questions: query.questions.clone(),
            ..Message::default()
        }
    }

    /// `(qdcount, ancount, nscount, arcount)` as they will be encoded.
    pub fn counts(&self) -> (usize, usize, usize, usize) {
        (
            self.questions.len(),
            self.answers.len(),
            self.authority.len(),
            self.additional.len(),
        )
    }
}

/// Drops the authority and additional sections. Questions and answers are
/// left untouched.
pub fn strip_optional_sections(msg: &Message) -> Message {
    Message {
        header: msg.header,
        questions: msg.questions.clone(),
        answers: msg.answers.clone(),
        authority: Vec::new(),
        additional: Vec::new(),
    }
}
