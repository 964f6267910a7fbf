//! The query DSL: a JSON tree in the style of `{"query": {"filtered": ...}}`.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::summary::PointerSummary;
use super::DigcoveryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Domain,
    Instance,
    /// Full instance name, `instance.domain`.
    Name,
    ServicePath,
    Rt,
    Latitude,
    Longitude,
    Revision,
}

impl Field {
    pub const ALL: [Field; 8] = [
        Field::Domain,
        Field::Instance,
        Field::Name,
        Field::ServicePath,
        Field::Rt,
        Field::Latitude,
        Field::Longitude,
        Field::Revision,
    ];

    pub fn parse(s: &str) -> Option<Field> {
        Some(match s {
            "domain" => Field::Domain,
            "instance" => Field::Instance,
            "name" => Field::Name,
            "service_path" | "path" => Field::ServicePath,
            "rt" => Field::Rt,
            "latitude" | "lat" | "geo.lat" => Field::Latitude,
            "longitude" | "lon" | "geo.lon" => Field::Longitude,
            "revision" => Field::Revision,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Field::Domain => "domain",
            Field::Instance => "instance",
            Field::Name => "name",
            Field::ServicePath => "service_path",
            Field::Rt => "rt",
            Field::Latitude => "latitude",
            Field::Longitude => "longitude",
            Field::Revision => "revision",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Field::Latitude | Field::Longitude | Field::Revision)
    }

    /// DNS-name fields compare case-insensitively.
    fn folds_case(self) -> bool {
        matches!(
            self,
            Field::Domain | Field::Instance | Field::Name | Field::ServicePath
        )
    }

    /// The normalized keyword value of `s`, if this is a keyword field.
    pub fn keyword(self, s: &PointerSummary) -> Option<String> {
        let v = match self {
            Field::Domain => s.domain.to_string(),
            Field::Instance => s.instance.clone(),
            Field::Name => s.instance_name()?.to_string(),
            Field::ServicePath => s.service_path.to_string(),
            Field::Rt => s.rt.clone(),
            _ => return None,
        };
        Some(self.normalize(&v))
    }

    pub fn numeric(self, s: &PointerSummary) -> Option<f64> {
        match self {
            Field::Latitude => s.geo.map(|g| g.lat),
            Field::Longitude => s.geo.map(|g| g.lon),
            Field::Revision => Some(s.revision as f64),
            _ => None,
        }
    }

    pub fn normalize(self, v: &str) -> String {
        let v = v
            .strip_suffix('.')
            .filter(|_| self.folds_case())
            .unwrap_or(v);
        if self.folds_case() {
            v.to_ascii_lowercase()
        } else {
            v.to_string()
        }
    }
}

/// A scalar operand: keyword fields take strings, numeric fields numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Str(String),
}

impl Scalar {
    fn canonical(&self) -> String {
        match self {
            Scalar::Num(n) => format!("n:{}", n + 0.0),
            Scalar::Str(s) => format!("s:{s}"),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Scalar::Num(n) => Some(*n),
            Scalar::Str(s) => s.parse().ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Query {
    MatchAll,
    Term {
        field: Field,
        value: Scalar,
    },
    Prefix {
        field: Field,
        value: String,
    },
    /// Glob over the field value: `*` any run, `?` one character.
    Wildcard {
        field: Field,
        pattern: String,
    },
    /// Inclusive at both ends; a missing bound is open.
    Range {
        field: Field,
        from: Option<Scalar>,
        to: Option<Scalar>,
    },
    /// Numeric range evaluated per document rather than from the index.
    NumericRange {
        field: Field,
        from: Option<f64>,
        to: Option<f64>,
    },
    GeoRange {
        lat_from: f64,
        lat_to: f64,
        lon_from: f64,
        lon_to: f64,
    },
    Bool {
        must: Vec<Query>,
        should: Vec<Query>,
        must_not: Vec<Query>,
    },
    And(Vec<Query>),
    Or(Vec<Query>),
    Not(Box<Query>),
    Filtered {
        query: Box<Query>,
        filter: Box<Query>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    MatchAll,
    Term,
    Prefix,
    Wildcard,
    Range,
    NumericRange,
    GeoRange,
    Script,
    Bool,
    And,
    Or,
    Not,
    Filtered,
}

impl NodeKind {
    pub const ALL: [NodeKind; 13] = [
        NodeKind::MatchAll,
        NodeKind::Term,
        NodeKind::Prefix,
        NodeKind::Wildcard,
        NodeKind::Range,
        NodeKind::NumericRange,
        NodeKind::GeoRange,
        NodeKind::Script,
        NodeKind::Bool,
        NodeKind::And,
        NodeKind::Or,
        NodeKind::Not,
        NodeKind::Filtered,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cacheability {
    CachedByDefault,
    NotCached,
}

/// Default caching policy per node kind. Term, prefix and range results
/// are kept; geo, numeric range, script and the combinators are not.
pub fn cacheability(kind: NodeKind) -> Cacheability {
    match kind {
        NodeKind::Term | NodeKind::Prefix | NodeKind::Range => Cacheability::CachedByDefault,
        _ => Cacheability::NotCached,
    }
}

impl Query {
    pub fn kind(&self) -> NodeKind {
        match self {
            Query::MatchAll => NodeKind::MatchAll,
            Query::Term { .. } => NodeKind::Term,
            Query::Prefix { .. } => NodeKind::Prefix,
            Query::Wildcard { .. } => NodeKind::Wildcard,
            Query::Range { .. } => NodeKind::Range,
            Query::NumericRange { .. } => NodeKind::NumericRange,
            Query::GeoRange { .. } => NodeKind::GeoRange,
            Query::Bool { .. } => NodeKind::Bool,
            Query::And(_) => NodeKind::And,
            Query::Or(_) => NodeKind::Or,
            Query::Not(_) => NodeKind::Not,
            Query::Filtered { .. } => NodeKind::Filtered,
        }
    }

    pub fn term(field: Field, value: impl Into<String>) -> Query {
        Query::Term {
            field,
            value: Scalar::Str(value.into()),
        }
    }

    pub fn range(field: Field, from: f64, to: f64) -> Query {
        Query::Range {
            field,
            from: Some(Scalar::Num(from)),
            to: Some(Scalar::Num(to)),
        }
    }

    /// Checks operand types and bound order throughout the tree.
    pub fn validate(&self) -> Result<(), DigcoveryError> {
        let bad = |m: String| Err(DigcoveryError::MalformedQuery(m));
        match self {
            Query::MatchAll => Ok(()),
            Query::Term { field, value } => {
                if field.is_numeric() && value.as_f64().is_none() {
                    return bad(format!("term on {} needs a number", field.as_str()));
                }
                if !field.is_numeric() && matches!(value, Scalar::Num(_)) {
                    return bad(format!("term on {} needs a string", field.as_str()));
                }
                Ok(())
            }
            Query::Prefix { field, .. } if field.is_numeric() => {
                bad(format!("prefix on numeric field {}", field.as_str()))
            }
            Query::Prefix { .. } => Ok(()),
            Query::Wildcard { field, pattern } => {
                if field.is_numeric() {
                    bad(format!("wildcard on numeric field {}", field.as_str()))
                } else if pattern.is_empty() {
                    bad("empty wildcard pattern".into())
                } else {
                    Ok(())
                }
            }
            Query::Range { field, from, to } => {
                for b in [from, to].into_iter().flatten() {
                    match (field.is_numeric(), b) {
                        (true, Scalar::Num(n)) if n.is_finite() => {}
                        (false, Scalar::Str(_)) => {}
                        _ => return bad(format!("bad bound {b:?} for {}", field.as_str())),
                    }
                }
                let ordered = match (from, to) {
                    (Some(Scalar::Num(a)), Some(Scalar::Num(b))) => a <= b,
                    (Some(Scalar::Str(a)), Some(Scalar::Str(b))) => {
                        field.normalize(a) <= field.normalize(b)
                    }
                    _ => true,
                };
                if ordered {
                    Ok(())
                } else {
                    bad(format!("range on {} has from > to", field.as_str()))
                }
            }
            Query::NumericRange { field, from, to } => {
                if !field.is_numeric() {
                    return bad(format!("numeric_range on keyword field {}", field.as_str()));
                }
                if from.iter().chain(to).any(|x| !x.is_finite()) {
                    return bad("non-finite bound".into());
                }
                match (from, to) {
                    (Some(a), Some(b)) if a > b => bad("numeric_range has from > to".into()),
                    _ => Ok(()),
                }
            }
            Query::GeoRange {
                lat_from,
                lat_to,
                lon_from,
                lon_to,
            } => {
                if [lat_from, lat_to, lon_from, lon_to]
                    .iter()
                    .any(|x| !x.is_finite())
                {
                    return bad("non-finite geo bound".into());
                }
                if lat_from > lat_to || lon_from > lon_to {
                    return bad("geo_range has from > to".into());
                }
                Ok(())
            }
            Query::Bool {
                must,
                should,
                must_not,
            } => must
                .iter()
                .chain(should)
                .chain(must_not)
                .try_for_each(Query::validate),
            Query::And(qs) | Query::Or(qs) => qs.iter().try_for_each(Query::validate),
            Query::Not(q) => q.validate(),
            Query::Filtered { query, filter } => {
                query.validate()?;
                filter.validate()
            }
        }
    }

    /// Canonical cache key for cacheable nodes.
    pub fn cache_key(&self) -> Option<String> {
        if cacheability(self.kind()) != Cacheability::CachedByDefault {
            return None;
        }
        let norm = |f: &Field, s: &Scalar| match s {
            Scalar::Str(v) => Scalar::Str(f.normalize(v)).canonical(),
            Scalar::Num(_) => s.canonical(),
        };
        let bound = |f: &Field, b: &Option<Scalar>| b.as_ref().map_or("*".into(), |s| norm(f, s));
        Some(match self {
            Query::Term { field, value } => {
                let v = if field.is_numeric() {
                    Scalar::Num(value.as_f64().unwrap_or(f64::NAN)).canonical()
                } else {
                    norm(field, value)
                };
                format!("term|{}|{v}", field.as_str())
            }
            Query::Prefix { field, value } => {
                format!("prefix|{}|{}", field.as_str(), field.normalize(value))
            }
            Query::Range { field, from, to } => format!(
                "range|{}|{}|{}",
                field.as_str(),
                bound(field, from),
                bound(field, to)
            ),
            _ => unreachable!("only term, prefix and range are cacheable"),
        })
    }

    /// Parses the JSON DSL. A top-level `{"query": ...}` wrapper is
    /// optional.
    pub fn from_json(v: &Value) -> Result<Query, DigcoveryError> {
        let inner = match v.as_object() {
            Some(o) if o.len() == 1 && o.contains_key("query") => &o["query"],
            _ => v,
        };
        let q = parse_node(inner)?;
        q.validate()?;
        Ok(q)
    }

    pub fn from_json_str(s: &str) -> Result<Query, DigcoveryError> {
        let v: Value =
            serde_json::from_str(s).map_err(|e| DigcoveryError::MalformedQuery(e.to_string()))?;
        Query::from_json(&v)
    }
}

fn malformed<T>(m: impl Into<String>) -> Result<T, DigcoveryError> {
    Err(DigcoveryError::MalformedQuery(m.into()))
}

fn single(v: &Value, what: &str) -> Result<(String, Value), DigcoveryError> {
    match v.as_object() {
        Some(o) if o.len() == 1 => {
            let (k, v) = o.iter().next().expect("one key");
            Ok((k.clone(), v.clone()))
        }
        _ => malformed(format!("{what} needs an object with exactly one key")),
    }
}

fn field(name: &str) -> Result<Field, DigcoveryError> {
    Field::parse(name).map_or_else(|| malformed(format!("unknown field {name}")), Ok)
}

fn scalar(v: &Value) -> Result<Scalar, DigcoveryError> {
    match v {
        Value::Number(n) => Ok(Scalar::Num(n.as_f64().expect("json numbers are finite"))),
        Value::String(s) => Ok(Scalar::Str(s.clone())),
        _ => malformed(format!("expected a string or number, got {v}")),
    }
}

fn bounds(o: &Map<String, Value>) -> Result<(Option<Scalar>, Option<Scalar>), DigcoveryError> {
    let pick = |a: &str, b: &str| o.get(a).or_else(|| o.get(b)).map(scalar).transpose();
    for k in o.keys() {
        if !matches!(k.as_str(), "from" | "to" | "gte" | "lte") {
            return malformed(format!("unsupported range key {k}"));
        }
    }
    Ok((pick("from", "gte")?, pick("to", "lte")?))
}

fn number(s: Option<Scalar>) -> Result<Option<f64>, DigcoveryError> {
    match s {
        None => Ok(None),
        Some(Scalar::Num(n)) => Ok(Some(n)),
        Some(Scalar::Str(s)) => malformed(format!("expected a number, got {s:?}")),
    }
}

fn list(v: &Value) -> Result<Vec<Query>, DigcoveryError> {
    match v {
        Value::Array(a) => a.iter().map(parse_node).collect(),
        Value::Object(o) if o.len() == 1 && o.contains_key("filters") => list(&o["filters"]),
        Value::Object(_) => Ok(vec![parse_node(v)?]),
        _ => malformed("expected a query or a list of queries"),
    }
}

fn parse_node(v: &Value) -> Result<Query, DigcoveryError> {
    let (kind, body) = single(v, "query node")?;
    match kind.as_str() {
        "match_all" => Ok(Query::MatchAll),
        "term" => {
            let (f, val) = single(&body, "term")?;
            Ok(Query::Term {
                field: field(&f)?,
                value: scalar(&val)?,
            })
        }
        "prefix" | "wildcard" => {
            let (f, val) = single(&body, &kind)?;
            let Value::String(s) = val else {
                return malformed(format!("{kind} needs a string"));
            };
            let field = field(&f)?;
            Ok(if kind == "prefix" {
                Query::Prefix { field, value: s }
            } else {
                Query::Wildcard { field, pattern: s }
            })
        }
        "range" | "numeric_range" => {
            let (f, val) = single(&body, &kind)?;
            let Value::Object(o) = val else {
                return malformed(format!("{kind} needs an object of bounds"));
            };
            let field = field(&f)?;
            let (from, to) = bounds(&o)?;
            Ok(if kind == "range" {
                Query::Range { field, from, to }
            } else {
                Query::NumericRange {
                    field,
                    from: number(from)?,
                    to: number(to)?,
                }
            })
        }
        "geo_range" => {
            let o = body
                .as_object()
                .map_or_else(|| malformed("geo_range needs an object"), Ok)?;
            let axis = |names: [&str; 2]| -> Result<(f64, f64), DigcoveryError> {
                let b = names
                    .iter()
                    .find_map(|n| o.get(*n))
                    .and_then(Value::as_object)
                    .map_or_else(|| malformed(format!("geo_range needs {}", names[0])), Ok)?;
                let (from, to) = bounds(b)?;
                match (number(from)?, number(to)?) {
                    (Some(a), Some(b)) => Ok((a, b)),
                    _ => malformed("geo_range bounds need both from and to"),
                }
            };
            let (lat_from, lat_to) = axis(["latitude", "lat"])?;
            let (lon_from, lon_to) = axis(["longitude", "lon"])?;
            Ok(Query::GeoRange {
                lat_from,
                lat_to,
                lon_from,
                lon_to,
            })
        }
        "bool" => {
            let o = body
                .as_object()
                .map_or_else(|| malformed("bool needs an object"), Ok)?;
            let mut must = Vec::new();
            let mut should = Vec::new();
            let mut must_not = Vec::new();
            for (k, v) in o {
                let target = match k.as_str() {
                    "must" => &mut must,
                    "should" => &mut should,
                    "must_not" => &mut must_not,
                    _ => return malformed(format!("unsupported bool clause {k}")),
                };
                *target = list(v)?;
            }
            Ok(Query::Bool {
                must,
                should,
                must_not,
            })
        }
        "and" => Ok(Query::And(list(&body)?)),
        "or" => Ok(Query::Or(list(&body)?)),
        "not" => {
            let inner = match body.as_object() {
                Some(o) if o.len() == 1 && o.contains_key("filter") => &o["filter"],
                _ => &body,
            };
            Ok(Query::Not(Box::new(parse_node(inner)?)))
        }
        "filtered" => {
            let o = body
                .as_object()
                .map_or_else(|| malformed("filtered needs an object"), Ok)?;
            for k in o.keys() {
                if k != "query" && k != "filter" {
                    return malformed(format!("unsupported filtered key {k}"));
                }
            }
            let query = o
                .get("query")
                .map(parse_node)
                .transpose()?
                .unwrap_or(Query::MatchAll);
            let filter = o
                .get("filter")
                .map(parse_node)
                .transpose()?
                .unwrap_or(Query::MatchAll);
            Ok(Query::Filtered {
                query: Box::new(query),
                filter: Box::new(filter),
            })
        }
        "script" => malformed("script queries are not supported"),
        other => malformed(format!("unknown query node {other}")),
    }
}

/// `*` matches any run of characters and `?` exactly one.
pub fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}
