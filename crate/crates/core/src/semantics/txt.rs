//! Service metadata and its TXT encodings.
//!
//! Joined form: `rt=light;ins=2;lt=86400;model=dimmer;if=EIB;area=1;value;onoff`.
//! Key/value tokens use `=`, bare tokens are service verbs, `;` separates
//! tokens. The grouped form splits the same tokens into an interface string,
//! a resource-type string and a verbs string.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::SemanticsError;
use crate::dns::MAX_TXT_STRING;

const RESERVED_KEYS: [&str; 5] = ["rt", "ins", "lt", "model", "if"];

/// Single-character keys used by [`compact_txt`], paired with the field
/// they stand for.
pub const COMPACT_KEYS: [(char, &str); 5] = [
    ('r', "rt"),
    ('i', "ins"),
    ('l', "lt"),
    ('m', "model"),
    ('f', "if"),
];

/// Separates the key/value part of a compact string from its verbs.
pub const COMPACT_VERB_SEPARATOR: char = '|';

/// Prefix protecting extra keys that would otherwise read as compact keys.
const COMPACT_ESCAPE: char = '~';

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceMetadata {
    pub rt: String,
    pub ins: u32,
    pub lt: u32,
    #[serde(default)]
    pub model: String,
    #[serde(rename = "if", default)]
    pub interface: String,
    #[serde(default)]
    pub verbs: Vec<String>,
    /// Technology-specific addressing such as `housecode` or `deviceID`.
    #[serde(default)]
    pub extra: IndexMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TxtMode {
    /// One joined character-string.
    #[default]
    Single,
    /// Interface, resource-type and verb groups as separate strings.
    Multi,
}

fn bad(msg: impl Into<String>) -> SemanticsError {
    SemanticsError::InvalidMetadata(msg.into())
}

fn check_value(what: &str, v: &str) -> Result<(), SemanticsError> {
    if v.contains(';') || v.contains(COMPACT_VERB_SEPARATOR) {
        return Err(bad(format!("{what} contains a separator: {v:?}")));
    }
    Ok(())
}

impl ServiceMetadata {
    pub fn new(rt: impl Into<String>, ins: u32, lt: u32) -> Self {
        ServiceMetadata {
            rt: rt.into(),
            ins,
            lt,
            model: String::new(),
            interface: String::new(),
            verbs: Vec::new(),
            extra: IndexMap::new(),
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    pub fn with_interface(mut self, interface: impl Into<String>) -> Self {
        self.interface = interface.into();
        self
    }

    pub fn with_verbs<I, S>(mut self, verbs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.verbs = verbs.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_extra(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.extra.insert(key.into(), value.into());
        self
    }

    pub fn validate(&self) -> Result<(), SemanticsError> {
        if self.rt.is_empty() {
            return Err(SemanticsError::MissingResourceType);
        }
        if self.lt == 0 {
            return Err(bad("lifetime must be positive"));
        }
        check_value("rt", &self.rt)?;
        check_value("model", &self.model)?;
        check_value("if", &self.interface)?;
        for verb in &self.verbs {
            if verb.is_empty() || verb.contains('=') {
                return Err(bad(format!("invalid verb {verb:?}")));
            }
            check_value("verb", verb)?;
        }
        for (k, v) in &self.extra {
            if k.is_empty() || k.contains('=') || RESERVED_KEYS.contains(&k.as_str()) {
                return Err(bad(format!("invalid extra key {k:?}")));
            }
            check_value("extra key", k)?;
            check_value("extra value", v)?;
        }
        Ok(())
    }

    fn core_tokens(&self) -> Vec<String> {
        vec![
            format!("rt={}", self.rt),
            format!("ins={}", self.ins),
            format!("lt={}", self.lt),
            format!("model={}", self.model),
        ]
    }

    fn interface_tokens(&self) -> Vec<String> {
        std::iter::once(format!("if={}", self.interface))
            .chain(self.extra.iter().map(|(k, v)| format!("{k}={v}")))
            .collect()
    }
}

fn checked(s: String) -> Result<Vec<u8>, SemanticsError> {
    if s.len() > MAX_TXT_STRING {
        return Err(SemanticsError::StringTooLong(s.len()));
    }
    Ok(s.into_bytes())
}

/// Serializes metadata into TXT character-strings.
pub fn to_txt(meta: &ServiceMetadata, mode: TxtMode) -> Result<Vec<Vec<u8>>, SemanticsError> {
    meta.validate()?;
    match mode {
        TxtMode::Single => {
            let mut tokens = meta.core_tokens();
            tokens.extend(meta.interface_tokens());
            tokens.extend(meta.verbs.iter().cloned());
            Ok(vec![checked(tokens.join(";"))?])
        }
        TxtMode::Multi => {
            let mut out = vec![
                checked(meta.interface_tokens().join(";"))?,
                checked(meta.core_tokens().join(";"))?,
            ];
            if !meta.verbs.is_empty() {
                out.push(checked(meta.verbs.join(";"))?);
            }
            Ok(out)
        }
    }
}

fn parse_u32(field: &'static str, v: &str) -> Result<u32, SemanticsError> {
    v.parse().map_err(|_| SemanticsError::InvalidNumber {
        field,
        value: v.to_string(),
    })
}

/// Parses TXT strings in either layout. Tokens without `=` become verbs and
/// unrecognised keys land in `extra`.
pub fn from_txt<S: AsRef<[u8]>>(strings: &[S]) -> Result<ServiceMetadata, SemanticsError> {
    let mut rt = None;
    let mut ins = None;
    let mut lt = None;
    let mut model = String::new();
    let mut interface = String::new();
    let mut verbs = Vec::new();
    let mut extra = IndexMap::new();
    for s in strings {
        let text = String::from_utf8_lossy(s.as_ref());
        for token in text.split(';').filter(|t| !t.is_empty()) {
            match token.split_once('=') {
                None => verbs.push(token.to_string()),
                Some(("", _)) => return Err(bad(format!("token without key: {token:?}"))),
                Some((k, v)) => match k {
                    "rt" => rt = Some(v.to_string()),
                    "ins" => ins = Some(parse_u32("ins", v)?),
                    "lt" => lt = Some(parse_u32("lt", v)?),
                    "model" => model = v.to_string(),
                    "if" => interface = v.to_string(),
                    _ => {
                        extra.insert(k.to_string(), v.to_string());
                    }
                },
            }
        }
    }
    let rt = rt
        .filter(|r| !r.is_empty())
        .ok_or(SemanticsError::MissingResourceType)?;
    Ok(ServiceMetadata {
        rt,
        ins: ins.ok_or(SemanticsError::MissingField("ins"))?,
        lt: lt.ok_or(SemanticsError::MissingField("lt"))?,
        model,
        interface,
        verbs,
        extra,
    })
}

/// Output of [`compact_txt`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompactTxt {
    pub bytes: Vec<u8>,
    /// Set when trailing extra entries (then verbs) were dropped to stay
    /// within one 255-byte character-string.
    pub truncated: bool,
}

fn compact_key(k: &str) -> String {
    let single = k.len() == 1 && COMPACT_KEYS.iter().any(|(c, _)| k.starts_with(*c));
    if single || k.starts_with(COMPACT_ESCAPE) {
        format!("{COMPACT_ESCAPE}{k}")
    } else {
        k.to_string()
    }
}

fn render_compact(meta: &ServiceMetadata, extra: usize, verbs: usize) -> String {
    let mut s = format!(
        "r={};i={};l={};m={};f={}",
        meta.rt, meta.ins, meta.lt, meta.model, meta.interface
    );
    for (k, v) in meta.extra.iter().take(extra) {
        s.push(';');
        s.push_str(&compact_key(k));
        s.push('=');
        s.push_str(v);
    }
    if verbs > 0 {
        s.push(COMPACT_VERB_SEPARATOR);
        s.push_str(&meta.verbs[..verbs].join(";"));
    }
    s
}

/// Shortens the joined form with one-letter keys (see [`COMPACT_KEYS`]).
/// Extra keys are kept verbatim and verbs follow a `|`.
pub fn compact_txt(meta: &ServiceMetadata) -> CompactTxt {
    let mut extra = meta.extra.len();
    let mut verbs = meta.verbs.len();
    loop {
        let s = render_compact(meta, extra, verbs);
        if s.len() <= MAX_TXT_STRING || (extra == 0 && verbs == 0) {
            let truncated = extra < meta.extra.len() || verbs < meta.verbs.len();
            let mut bytes = s.into_bytes();
            bytes.truncate(MAX_TXT_STRING);
            return CompactTxt { bytes, truncated };
        }
        if extra > 0 {
            extra -= 1;
        } else {
            verbs -= 1;
        }
    }
}

/// Inverse of [`compact_txt`].
pub fn expand_txt(bytes: &[u8]) -> Result<ServiceMetadata, SemanticsError> {
    let text = String::from_utf8_lossy(bytes);
    let (pairs, verbs) = match text.split_once(COMPACT_VERB_SEPARATOR) {
        Some((p, v)) => (p, Some(v)),
        None => (text.as_ref(), None),
    };
    let mut out = ServiceMetadata::new(String::new(), 0, 0);
    let (mut seen_ins, mut seen_lt) = (false, false);
    for token in pairs.split(';').filter(|t| !t.is_empty()) {
        let (k, v) = token
            .split_once('=')
            .ok_or_else(|| bad(format!("compact token without value: {token:?}")))?;
        match k {
            "r" => out.rt = v.to_string(),
            "i" => {
                out.ins = parse_u32("ins", v)?;
                seen_ins = true;
            }
            "l" => {
                out.lt = parse_u32("lt", v)?;
                seen_lt = true;
            }
            "m" => out.model = v.to_string(),
            "f" => out.interface = v.to_string(),
            _ => {
                let key = k.strip_prefix(COMPACT_ESCAPE).unwrap_or(k);
                out.extra.insert(key.to_string(), v.to_string());
            }
        }
    }
    if let Some(v) = verbs {
        out.verbs = v
            .split(';')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
    }
    if out.rt.is_empty() {
        return Err(SemanticsError::MissingResourceType);
    }
    if !seen_ins {
        return Err(SemanticsError::MissingField("ins"));
    }
    if !seen_lt {
        return Err(SemanticsError::MissingField("lt"));
    }
    Ok(out)
}
