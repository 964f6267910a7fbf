use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Get,
    Put,
    Post,
    Delete,
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "GET" => Ok(Method::Get),
            "PUT" => Ok(Method::Put),
            "POST" => Ok(Method::Post),
            "DELETE" => Ok(Method::Delete),
            _ => Err(format!("unknown method {s:?}")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Get => "GET",
            Method::Put => "PUT",
            Method::Post => "POST",
            Method::Delete => "DELETE",
        })
    }
}

/// CoRE interface descriptions (`if=` values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterfaceKind {
    LinkList,
    Batch,
    LinkedBatch,
    Sensor,
    Parameter,
    ReadOnlyParameter,
    Actuator,
    Binding,
}

impl InterfaceKind {
    pub const ALL: [InterfaceKind; 8] = [
        InterfaceKind::LinkList,
        InterfaceKind::Batch,
        InterfaceKind::LinkedBatch,
        InterfaceKind::Sensor,
        InterfaceKind::Parameter,
        InterfaceKind::ReadOnlyParameter,
        InterfaceKind::Actuator,
        InterfaceKind::Binding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InterfaceKind::LinkList => "core.ll",
            InterfaceKind::Batch => "core.b",
            InterfaceKind::LinkedBatch => "core.lb",
            InterfaceKind::Sensor => "core.s",
            InterfaceKind::Parameter => "core.p",
            InterfaceKind::ReadOnlyParameter => "core.rp",
            InterfaceKind::Actuator => "core.a",
            InterfaceKind::Binding => "core.bnd",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Batch and Linked Batch list some methods as "where applicable";
    /// those are treated as allowed.
    pub fn allowed_methods(self) -> &'static [Method] {
        use Method::*;
        match self {
            InterfaceKind::LinkList => &[Get],
            InterfaceKind::Batch => &[Get, Put, Post],
            InterfaceKind::LinkedBatch => &[Get, Put, Post, Delete],
            InterfaceKind::Sensor => &[Get],
            InterfaceKind::Parameter => &[Get, Put],
            InterfaceKind::ReadOnlyParameter => &[Get],
            InterfaceKind::Actuator => &[Get, Put, Post],
            InterfaceKind::Binding => &[Get, Post, Delete],
        }
    }
}

/// Whether `method` may be used on a resource exposing `kind`. Unknown
/// method names are never allowed.
pub fn interface_allows(kind: InterfaceKind, method: &str) -> bool {
    method
        .parse::<Method>()
        .map(|m| kind.allowed_methods().contains(&m))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sensor_and_binding() {
        assert!(interface_allows(InterfaceKind::Sensor, "GET"));
        assert!(!interface_allows(InterfaceKind::Sensor, "PUT"));
        assert!(interface_allows(InterfaceKind::Binding, "DELETE"));
        assert!(!interface_allows(InterfaceKind::Binding, "FETCH"));
    }

    #[test]
    fn names_round_trip() {
        for k in InterfaceKind::ALL {
            assert_eq!(InterfaceKind::from_name(k.name()), Some(k));
        }
        assert_eq!(InterfaceKind::from_name("core.x"), None);
    }
}
