use std::collections::HashMap;
use std::net::{Ipv4Addr, Ipv6Addr};

use super::{
    CodecError, Compression, Header, Message, Name, Question, RData, Record, RecordType,
    HEADER_LEN, MAX_NAME_LEN, MAX_TXT_STRING,
};

const CLASS_IN: u16 = 1;
const POINTER_TAG: u8 = 0xc0;
/// Offsets above this cannot be the target of a 14-bit pointer.
const MAX_POINTER_OFFSET: usize = 0x3fff;

trait Sink {
    fn pos(&self) -> usize;
    fn put(&mut self, bytes: &[u8]);
    fn patch_u16(&mut self, at: usize, v: u16);
}

impl Sink for Vec<u8> {
    fn pos(&self) -> usize {
        self.len()
    }
    fn put(&mut self, bytes: &[u8]) {
        self.extend_from_slice(bytes);
    }
    fn patch_u16(&mut self, at: usize, v: u16) {
        self[at..at + 2].copy_from_slice(&v.to_be_bytes());
    }
}

struct Counter(usize);

impl Sink for Counter {
    fn pos(&self) -> usize {
        self.0
    }
    fn put(&mut self, bytes: &[u8]) {
        self.0 += bytes.len();
    }
    fn patch_u16(&mut self, _: usize, _: u16) {}
}

struct Encoder<S> {
    out: S,
    compression: Compression,
    suffixes: HashMap<Vec<Vec<u8>>, u16>,
}

impl<S: Sink> Encoder<S> {
    fn u16(&mut self, v: u16) {
        self.out.put(&v.to_be_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.out.put(&v.to_be_bytes());
    }

    /// Writes `name`, pointing at an earlier copy of any suffix when allowed.
    /// Every suffix written out in full is remembered for later names.
    fn name(&mut self, name: &Name, may_point: bool) {
        let lower = name.lowercase_labels();
        for i in 0..lower.len() {
            let suffix = &lower[i..];
            if may_point && self.compression == Compression::On {
                if let Some(&off) = self.suffixes.get(suffix) {
                    self.u16(0xc000 | off);
                    return;
                }
            }
            let here = self.out.pos();
            if here <= MAX_POINTER_OFFSET {
                self.suffixes.entry(suffix.to_vec()).or_insert(here as u16);
            }
            let label = &name.labels()[i];
            self.out.put(&[label.len() as u8]);
            self.out.put(label);
        }
        self.out.put(&[0]);
    }

    fn count(&mut self, n: usize) -> Result<(), CodecError> {
        let n = u16::try_from(n).map_err(|_| CodecError::TooManyRecords)?;
        self.u16(n);
        Ok(())
    }

    fn message(&mut self, msg: &Message) -> Result<(), CodecError> {
        self.u16(msg.header.id);
        self.u16(msg.header.flags());
        self.count(msg.questions.len())?;
        self.count(msg.answers.len())?;
        self.count(msg.authority.len())?;
        self.count(msg.additional.len())?;
        for q in &msg.questions {
            self.name(&q.name, true);
            self.u16(q.qtype.code());
            self.u16(CLASS_IN);
        }
        for rr in msg
            .answers
            .iter()
            .chain(&msg.authority)
            .chain(&msg.additional)
        {
            self.record(rr)?;
        }
        Ok(())
    }

    fn record(&mut self, rr: &Record) -> Result<(), CodecError> {
        self.name(&rr.name, true);
        self.u16(rr.rtype().code());
        self.u16(CLASS_IN);
        self.u32(rr.ttl);
        let len_at = self.out.pos();
        self.u16(0);
        let start = self.out.pos();
        match &rr.data {
            RData::A(addr) => self.out.put(&addr.octets()),
            RData::Aaaa(addr) => self.out.put(&addr.octets()),
            RData::Ptr(n) | RData::Ns(n) | RData::Cname(n) => self.name(n, true),
            RData::Srv {
                priority,
                weight,
                port,
                target,
            } => {
                self.u16(*priority);
                self.u16(*weight);
                self.u16(*port);
                // RFC 2782: the target is never compressed, though later
                // names may still point into it.
                self.name(target, false);
            }
            RData::Txt(parts) => {
                if parts.is_empty() {
                    return Err(CodecError::EmptyTxt);
                }
                for p in parts {
                    if p.len() > MAX_TXT_STRING {
                        return Err(CodecError::TxtStringTooLong);
                    }
                    self.out.put(&[p.len() as u8]);
                    self.out.put(p);
                }
            }
            RData::Unknown { data, .. } => self.out.put(data),
        }
        let len = self.out.pos() - start;
        let len = u16::try_from(len).map_err(|_| CodecError::RdataTooLong)?;
        self.out.patch_u16(len_at, len);
        Ok(())
    }
}

/// Encodes `msg` as RFC 1035 wire bytes. Section counts come from the
/// section lengths, not from any stored value.
pub fn encode(msg: &Message, compression: Compression) -> Result<Vec<u8>, CodecError> {
    let mut enc = Encoder {
        out: Vec::with_capacity(512),
        compression,
        suffixes: HashMap::new(),
    };
    enc.message(msg)?;
    Ok(enc.out)
}

/// Size of `encode(msg, compression)` without allocating the output.
pub fn measure(msg: &Message, compression: Compression) -> Result<usize, CodecError> {
    let mut enc = Encoder {
        out: Counter(0),
        compression,
        suffixes: HashMap::new(),
    };
    enc.message(msg)?;
    Ok(enc.out.0)
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or(CodecError::Truncated(self.pos))?;
        if end > self.buf.len() {
            return Err(CodecError::Truncated(self.pos));
        }
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, CodecError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, CodecError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Reads a possibly compressed name. Each pointer must land past the
    /// header and strictly before the segment it was read from, so jumps
    /// only move backwards and the walk terminates whatever the input.
    fn name(&mut self) -> Result<Name, CodecError> {
        let mut labels: Vec<Vec<u8>> = Vec::new();
        let mut wire_len = 1usize;
        let mut cursor = self.pos;
        let mut resume: Option<usize> = None;
        let mut segment = self.pos;
        loop {
            let len = *self.buf.get(cursor).ok_or(CodecError::Truncated(cursor))?;
            match len & POINTER_TAG {
                0x00 => {
                    if len == 0 {
                        cursor += 1;
                        break;
                    }
                    let start = cursor + 1;
                    let end = start + len as usize;
                    if end > self.buf.len() {
                        return Err(CodecError::Truncated(cursor));
                    }
                    wire_len += len as usize + 1;
                    if wire_len > MAX_NAME_LEN {
                        return Err(CodecError::NameTooLong);
                    }
                    labels.push(self.buf[start..end].to_vec());
                    cursor = end;
                }
                POINTER_TAG => {
                    let lo = *self
                        .buf
                        .get(cursor + 1)
                        .ok_or(CodecError::Truncated(cursor))?;
                    let target = (((len & 0x3f) as usize) << 8) | lo as usize;
                    if target >= segment || target < HEADER_LEN {
                        return Err(CodecError::BadPointer(cursor));
                    }
                    segment = target;
                    if resume.is_none() {
                        resume = Some(cursor + 2);
                    }
                    cursor = target;
                }
                _ => return Err(CodecError::BadLabelType(cursor)),
            }
        }
        self.pos = resume.unwrap_or(cursor);
        Name::from_labels(labels)
    }

    fn question(&mut self) -> Result<Question, CodecError> {
        let name = self.name()?;
        let qtype = RecordType::from_code(self.u16()?);
        let _class = self.u16()?;
        Ok(Question { name, qtype })
    }

    fn record(&mut self) -> Result<Record, CodecError> {
        let name = self.name()?;
        let rtype = self.u16()?;
        let _class = self.u16()?;
        let ttl = self.u32()?;
        let rdlen = self.u16()? as usize;
        let start = self.pos;
        let end = start + rdlen;
        if end > self.buf.len() {
            return Err(CodecError::Truncated(start));
        }
        let malformed = CodecError::MalformedRdata {
            rtype,
            offset: start,
        };
        let data = match RecordType::from_code(rtype) {
            RecordType::A => {
                let b: [u8; 4] = self
                    .take(rdlen)?
                    .try_into()
                    .map_err(|_| malformed.clone())?;
                RData::A(Ipv4Addr::from(b))
            }
            RecordType::Aaaa => {
                let b: [u8; 16] = self
                    .take(rdlen)?
                    .try_into()
                    .map_err(|_| malformed.clone())?;
                RData::Aaaa(Ipv6Addr::from(b))
            }
            RecordType::Ptr => RData::Ptr(self.bounded_name(end, &malformed)?),
            RecordType::Ns => RData::Ns(self.bounded_name(end, &malformed)?),
            RecordType::Cname => RData::Cname(self.bounded_name(end, &malformed)?),
            RecordType::Srv => {
                if rdlen < 7 {
                    return Err(malformed);
                }
                let priority = self.u16()?;
                let weight = self.u16()?;
                let port = self.u16()?;
                let target = self.bounded_name(end, &malformed)?;
                RData::Srv {
                    priority,
                    weight,
                    port,
                    target,
                }
            }
            RecordType::Txt => {
                if rdlen == 0 {
                    return Err(malformed);
                }
                let mut parts = Vec::new();
                while self.pos < end {
                    let n = self.u8()? as usize;
                    if self.pos + n > end {
                        return Err(malformed);
                    }
                    parts.push(self.take(n)?.to_vec());
                }
                RData::Txt(parts)
            }
            RecordType::Other(code) => RData::Unknown {
                rtype: code,
                data: self.take(rdlen)?.to_vec(),
            },
        };
        if self.pos != end {
            return Err(malformed);
        }
        Ok(Record { name, ttl, data })
    }

    fn bounded_name(&mut self, end: usize, malformed: &CodecError) -> Result<Name, CodecError> {
        let n = self.name()?;
        if self.pos > end {
            return Err(malformed.clone());
        }
        Ok(n)
    }
}

/// Parses a complete message, following compression pointers.
pub fn decode(bytes: &[u8]) -> Result<Message, CodecError> {
    if bytes.len() < HEADER_LEN {
        return Err(CodecError::Truncated(bytes.len()));
    }
    let mut d = Decoder { buf: bytes, pos: 0 };
    let id = d.u16()?;
    let flags = d.u16()?;
    let qd = d.u16()?;
    let an = d.u16()?;
    let ns = d.u16()?;
    let ar = d.u16()?;
    let header = Header::from_flags(id, flags);
    // Each entry needs at least 5 bytes, which caps allocation on hostile counts.
    let cap = |n: u16| (n as usize).min(bytes.len() / 5);
    let mut questions = Vec::with_capacity(cap(qd));
    for _ in 0..qd {
        questions.push(d.question()?);
    }
    let mut section = |n: u16| -> Result<Vec<Record>, CodecError> {
        let mut v = Vec::with_capacity(cap(n));
        for _ in 0..n {
            v.push(d.record()?);
        }
        Ok(v)
    };
    let answers = section(an)?;
    let authority = section(ns)?;
    let additional = section(ar)?;
    Ok(Message {
        header,
        questions,
        answers,
        authority,
        additional,
    })
}
