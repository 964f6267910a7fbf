//! CoRE link format (RFC 6690) and its JSON mapping.

use serde_json::{Map, Value};

use super::SemanticsError;

/// One `<uri>;attr=value;...` link. Attributes keep first-appearance order;
/// a repeated attribute collects all of its values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinkEntry {
    pub href: String,
    pub attrs: Vec<(String, Vec<String>)>,
}

impl LinkEntry {
    pub fn new(href: impl Into<String>) -> Self {
        LinkEntry {
            href: href.into(),
            attrs: Vec::new(),
        }
    }

    /// Appends a value, merging into an existing attribute of the same name.
    pub fn push_attr(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.attrs.iter_mut().find(|(k, _)| *k == key) {
            Some((_, values)) => values.push(value),
            None => self.attrs.push((key, vec![value])),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.push_attr(key, value);
        self
    }

    /// First value of `key`. Flag attributes yield `Some("")`.
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.values(key).and_then(|v| v.first()).map(String::as_str)
    }

    pub fn values(&self, key: &str) -> Option<&[String]> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_slice())
    }
}

fn is_ptoken(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b"!#$%&'()*+-./:<=>?@[]^_`{|}~".contains(&b)
}

fn is_parmname(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b"!#$&+-.^_`|~*".contains(&b)
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> SemanticsError {
        SemanticsError::SyntaxError {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn expect(&mut self, b: u8) -> Result<(), SemanticsError> {
        if self.peek() == Some(b) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected '{}'", b as char)))
        }
    }

    fn take_while(&mut self, f: impl Fn(u8) -> bool) -> &'a str {
        let start = self.pos;
        while self.pos < self.s.len() && f(self.s[self.pos]) {
            self.pos += 1;
        }
        // callers only accept ASCII predicates or stop on ASCII delimiters
        std::str::from_utf8(&self.s[start..self.pos]).unwrap_or_default()
    }

    fn link(&mut self) -> Result<LinkEntry, SemanticsError> {
        self.expect(b'<')?;
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos] != b'>' {
            self.pos += 1;
        }
        let href = std::str::from_utf8(&self.s[start..self.pos])
            .map_err(|_| self.err("URI is not UTF-8"))?
            .to_string();
        self.expect(b'>')?;
        if href.is_empty() {
            return Err(SemanticsError::SyntaxError {
                offset: start,
                message: "empty URI reference".into(),
            });
        }
        let mut entry = LinkEntry::new(href);
        loop {
            self.skip_ws();
            if self.peek() != Some(b';') {
                break;
            }
            self.pos += 1;
            self.skip_ws();
            let name = self.take_while(is_parmname).to_string();
            if name.is_empty() {
                return Err(self.err("expected attribute name"));
            }
            let value = if self.peek() == Some(b'=') {
                self.pos += 1;
                if self.peek() == Some(b'"') {
                    self.quoted()?
                } else {
                    let v = self.take_while(is_ptoken);
                    if v.is_empty() {
                        return Err(self.err("expected attribute value"));
                    }
                    v.to_string()
                }
            } else {
                String::new()
            };
            entry.push_attr(name, value);
        }
        Ok(entry)
    }

    fn quoted(&mut self) -> Result<String, SemanticsError> {
        self.expect(b'"')?;
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated quoted string")),
                Some(b'"') => {
                    self.pos += 1;
                    break;
                }
                Some(b'\\') => {
                    self.pos += 1;
                    let c = self.peek().ok_or_else(|| self.err("dangling escape"))?;
                    out.push(c);
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
        String::from_utf8(out).map_err(|_| self.err("quoted string is not UTF-8"))
    }
}

/// Parses a comma-separated list of links. Whitespace around separators is
/// ignored; value-less attributes such as `obs` get an empty value.
pub fn parse_link_format(text: &str) -> Result<Vec<LinkEntry>, SemanticsError> {
    let mut p = Parser {
        s: text.as_bytes(),
        pos: 0,
    };
    let mut out = Vec::new();
    p.skip_ws();
    if p.peek().is_none() {
        return Ok(out);
    }
    loop {
        out.push(p.link()?);
        p.skip_ws();
        match p.peek() {
            None => return Ok(out),
            Some(b',') => {
                p.pos += 1;
                p.skip_ws();
            }
            Some(_) => return Err(p.err("expected ',' or ';'")),
        }
    }
}

fn render_value(out: &mut String, v: &str) {
    if v.bytes().all(is_ptoken) {
        out.push_str(v);
        return;
    }
    out.push('"');
    for c in v.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
}

/// Renders links back to link format. Values made only of token characters
/// stay bare, anything else is quoted; empty values render as flags.
pub fn render_link_format(entries: &[LinkEntry]) -> String {
    let mut out = String::new();
    for (i, e) in entries.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('<');
        out.push_str(&e.href);
        out.push('>');
        for (k, values) in &e.attrs {
            for v in values {
                out.push(';');
                out.push_str(k);
                if !v.is_empty() {
                    out.push('=');
                    render_value(&mut out, v);
                }
            }
        }
    }
    out
}

fn entry_to_json(e: &LinkEntry) -> Value {
    let mut obj = Map::new();
    obj.insert("href".into(), Value::String(e.href.clone()));
    for (k, values) in &e.attrs {
        if k == "href" {
            continue;
        }
        let v = match values.as_slice() {
            [one] => Value::String(one.clone()),
            many => Value::Array(many.iter().cloned().map(Value::String).collect()),
        };
        obj.insert(k.clone(), v);
    }
    Value::Object(obj)
}

/// Maps links to a JSON array of objects: `href` first, then one member per
/// attribute in order, with repeated attributes as arrays of strings.
pub fn link_list_to_json(entries: &[LinkEntry]) -> String {
    Value::Array(entries.iter().map(entry_to_json).collect()).to_string()
}

/// Inverse of [`link_list_to_json`].
pub fn json_to_link_list(json: &str) -> Result<Vec<LinkEntry>, SemanticsError> {
    let bad = |m: &str| SemanticsError::InvalidJson(m.to_string());
    let value: Value = serde_json::from_str(json).map_err(|e| bad(&e.to_string()))?;
    let items = value.as_array().ok_or_else(|| bad("expected an array"))?;
    items
        .iter()
        .map(|item| {
            let obj = item.as_object().ok_or_else(|| bad("expected an object"))?;
            let href = obj
                .get("href")
                .and_then(Value::as_str)
                .ok_or_else(|| bad("missing href"))?;
            let mut e = LinkEntry::new(href);
            for (k, v) in obj.iter().filter(|(k, _)| *k != "href") {
                match v {
                    Value::String(s) => e.push_attr(k.clone(), s.clone()),
                    Value::Array(vs) => {
                        for s in vs {
                            let s = s.as_str().ok_or_else(|| bad("non-string value"))?;
                            e.push_attr(k.clone(), s);
                        }
                    }
                    _ => return Err(bad("attribute values must be strings")),
                }
            }
            Ok(e)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text() {
        assert_eq!(parse_link_format("").unwrap(), vec![]);
        assert_eq!(parse_link_format("  \n").unwrap(), vec![]);
        assert_eq!(link_list_to_json(&[]), "[]");
    }

    #[test]
    fn quoted_and_token_values() {
        let links = parse_link_format(r#"</sensors>;ct=40;title="Sensor Index""#).unwrap();
        assert_eq!(links[0].href, "/sensors");
        assert_eq!(links[0].attr("ct"), Some("40"));
        assert_eq!(links[0].attr("title"), Some("Sensor Index"));
    }

    #[test]
    fn flags_and_duplicates() {
        let links = parse_link_format(r#"</t>;obs;rel="a";rel=b"#).unwrap();
        assert_eq!(links[0].attr("obs"), Some(""));
        assert_eq!(links[0].values("rel").unwrap(), ["a", "b"]);
        let json: Value = serde_json::from_str(&link_list_to_json(&links)).unwrap();
        assert_eq!(json[0]["rel"], serde_json::json!(["a", "b"]));
        assert_eq!(json[0]["obs"], "");
    }

    #[test]
    fn syntax_errors_report_offsets() {
        match parse_link_format("</a>;rt=\"x").unwrap_err() {
            SemanticsError::SyntaxError { offset, .. } => assert_eq!(offset, 10),
            e => panic!("{e:?}"),
        }
        assert!(parse_link_format("</a> </b>").is_err());
        assert!(parse_link_format("<>").is_err());
        assert!(parse_link_format("/a").is_err());
    }

    #[test]
    fn render_quotes_when_needed() {
        let e = LinkEntry::new("/s")
            .with_attr("rt", "simple.sen")
            .with_attr("title", "a \"b\", c");
        let text = render_link_format(std::slice::from_ref(&e));
        assert_eq!(text, r#"</s>;rt=simple.sen;title="a \"b\", c""#);
        assert_eq!(parse_link_format(&text).unwrap(), vec![e]);
    }

    #[test]
    fn json_round_trip() {
        let e = LinkEntry::new("/x")
            .with_attr("rel", "a")
            .with_attr("rel", "b");
        let back = json_to_link_list(&link_list_to_json(std::slice::from_ref(&e))).unwrap();
        assert_eq!(back, vec![e]);
    }
}
