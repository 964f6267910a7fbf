//! The shared semantic layer: service metadata carried in TXT records,
//! CoRE link-format documents and their JSON mapping, and the CoRE
//! interface vocabulary.

mod interface;
mod link;
mod txt;

use thiserror::Error;

pub use interface::{interface_allows, InterfaceKind, Method};
pub use link::{
    json_to_link_list, link_list_to_json, parse_link_format, render_link_format, LinkEntry,
};
pub use txt::{
    compact_txt, expand_txt, from_txt, to_txt, CompactTxt, ServiceMetadata, TxtMode, COMPACT_KEYS,
    COMPACT_VERB_SEPARATOR,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("metadata has no resource type")]
    MissingResourceType,
    #[error("metadata is missing the {0} field")]
    MissingField(&'static str),
    #[error("field {field} is not an unsigned integer: {value:?}")]
    InvalidNumber { field: &'static str, value: String },
    #[error("invalid metadata: {0}")]
    InvalidMetadata(String),
    #[error("TXT character-string of {0} bytes exceeds 255")]
    StringTooLong(usize),
    #[error("link-format syntax error at byte {offset}: {message}")]
    SyntaxError { offset: usize, message: String },
    #[error("invalid link JSON: {0}")]
    InvalidJson(String),
}
