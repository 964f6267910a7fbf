//! Seeded generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::net::{Ipv4Addr, Ipv6Addr};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;

use digstack_core::digcovery::{Field, PointerSummary, Query, Scalar};
use digstack_core::digrectory::GeoPoint;
use digstack_core::dns::{Header, Message, Name, Question, RData, Record, RecordType};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn name(s: &str) -> Name {
    s.parse().unwrap()
}

// ---- DNS messages ----

const LABEL_POOL: [&str; 8] = [
    "rd",
    "esiot",
    "com",
    "light1",
    "_coap",
    "_udp",
    "Light_Lab",
    "x",
];

fn label(r: &mut ChaCha8Rng) -> Vec<u8> {
    if r.gen_bool(0.6) {
        return LABEL_POOL.choose(r).unwrap().as_bytes().to_vec();
    }
    let len = if r.gen_bool(0.05) {
        63
    } else {
        r.gen_range(1..12)
    };
    (0..len).map(|_| r.gen()).collect()
}

pub fn random_name(r: &mut ChaCha8Rng) -> Name {
    let n = r.gen_range(0..5);
    Name::from_labels((0..n).map(|_| label(r))).unwrap()
}

fn random_rdata(r: &mut ChaCha8Rng) -> RData {
    match r.gen_range(0..8) {
        0 => RData::A(Ipv4Addr::from(r.gen::<u32>())),
        1 => RData::Aaaa(Ipv6Addr::from(r.gen::<u128>())),
        2 => RData::Ptr(random_name(r)),
        3 => RData::Ns(random_name(r)),
        4 => RData::Cname(random_name(r)),
        5 => RData::Srv {
            priority: r.gen(),
            weight: r.gen(),
            port: r.gen(),
            target: random_name(r),
        },
        6 => {
            let n = r.gen_range(1..4);
            RData::Txt(
                (0..n)
                    .map(|_| {
                        let len = r.gen_range(0..40);
                        (0..len).map(|_| r.gen()).collect()
                    })
                    .collect(),
            )
        }
        _ => {
            let rtype = *[13u16, 99, 257, 65280].choose(r).unwrap();
            let len = r.gen_range(0..20);
            RData::Unknown {
                rtype,
                data: (0..len).map(|_| r.gen()).collect(),
            }
        }
    }
}

fn records(r: &mut ChaCha8Rng, max: usize) -> Vec<Record> {
    let n = r.gen_range(0..=max);
    (0..n)
        .map(|_| Record::new(random_name(r), r.gen(), random_rdata(r)))
        .collect()
}

pub fn random_message(r: &mut ChaCha8Rng) -> Message {
    let qtypes = [
        RecordType::A,
        RecordType::Ptr,
        RecordType::Srv,
        RecordType::Txt,
        RecordType::Aaaa,
        RecordType::Other(255),
    ];
    Message {
        header: Header {
            id: r.gen(),
            qr: r.gen(),
            opcode: r.gen_range(0..16),
            aa: r.gen(),
            tc: r.gen(),
            rd: r.gen(),
            ra: r.gen(),
            rcode: r.gen_range(0..16),
        },
        questions: (0..r.gen_range(0..3))
            .map(|_| Question::new(random_name(r), *qtypes.choose(r).unwrap()))
            .collect(),
        answers: records(r, 4),
        authority: records(r, 2),
        additional: records(r, 3),
    }
}

// ---- pointer summaries and queries ----

pub const DOMAINS: [&str; 6] = [
    "rd.esiot.com",
    "hall.esiot.com",
    "lab.um.es",
    "campus.um.es",
    "home.example",
    "Plant.Example",
];
pub const PATHS: [&str; 6] = [
    "_light._coap._udp",
    "_lamp._sub._coap._udp",
    "_temp._coap._udp",
    "_hvac._http._tcp",
    "_light._coap._tcp",
    "_epc._udp",
];
pub const RTS: [&str; 6] = ["light", "Light", "temperature", "humidity", "lamp", "rfid"];

pub fn random_summary(r: &mut ChaCha8Rng, domains: &[&str]) -> PointerSummary {
    let domain = *domains.choose(r).unwrap();
    let stem = ["light", "Lamp", "thermo", "sensor", "tag"]
        .choose(r)
        .unwrap();
    PointerSummary {
        instance: format!("{stem}_{}", r.gen_range(0..400)),
        service_path: name(PATHS.choose(r).unwrap()),
        domain: name(domain),
        rt: RTS.choose(r).unwrap().to_string(),
        geo: r.gen_bool(0.8).then(|| GeoPoint {
            lat: 37.99 + r.gen_range(0..200) as f64 * 0.0001,
            lon: -1.15 + r.gen_range(0..200) as f64 * 0.0001,
        }),
        revision: r.gen_range(1..50),
        removed: false,
    }
}

fn scalar_for(r: &mut ChaCha8Rng, f: Field) -> Scalar {
    match f {
        Field::Latitude => Scalar::Num(37.99 + r.gen_range(0..200) as f64 * 0.0001),
        Field::Longitude => Scalar::Num(-1.15 + r.gen_range(0..200) as f64 * 0.0001),
        Field::Revision => Scalar::Num(r.gen_range(0..50) as f64),
        Field::Domain => Scalar::Str(DOMAINS.choose(r).unwrap().to_string()),
        Field::ServicePath => Scalar::Str(PATHS.choose(r).unwrap().to_string()),
        Field::Rt => Scalar::Str(RTS.choose(r).unwrap().to_string()),
        Field::Instance => Scalar::Str(format!("light_{}", r.gen_range(0..400))),
        Field::Name => Scalar::Str(format!(
            "light_{}.{}",
            r.gen_range(0..400),
            DOMAINS.choose(r).unwrap()
        )),
    }
}

fn ordered(r: &mut ChaCha8Rng, f: Field) -> (Scalar, Scalar) {
    let a = scalar_for(r, f);
    let b = scalar_for(r, f);
    let le = match (&a, &b) {
        (Scalar::Num(x), Scalar::Num(y)) => x <= y,
        (Scalar::Str(x), Scalar::Str(y)) => keyword_norm(f, x) <= keyword_norm(f, y),
        _ => unreachable!(),
    };
    if le {
        (a, b)
    } else {
        (b, a)
    }
}

pub fn random_leaf(r: &mut ChaCha8Rng) -> Query {
    let f = *Field::ALL.choose(r).unwrap();
    let keyword = !matches!(f, Field::Latitude | Field::Longitude | Field::Revision);
    match r.gen_range(0..7) {
        0 => Query::Term {
            field: f,
            value: scalar_for(r, f),
        },
        1 if keyword => {
            let Scalar::Str(s) = scalar_for(r, f) else {
                unreachable!()
            };
            let cut = r.gen_range(0..=s.len().min(6));
            Query::Prefix {
                field: f,
                value: s[..cut].to_string(),
            }
        }
        2 if keyword => {
            let Scalar::Str(s) = scalar_for(r, f) else {
                unreachable!()
            };
            let mut p: String = s
                .chars()
                .map(|c| if r.gen_bool(0.15) { '?' } else { c })
                .collect();
            let cut = r.gen_range(0..=p.len());
            p.replace_range(
                cut.min(p.len())..(cut + r.gen_range(0..4)).min(p.len()),
                "*",
            );
            if p.is_empty() {
                p.push('*');
            }
            Query::Wildcard {
                field: f,
                pattern: p,
            }
        }
        3 => {
            let (a, b) = ordered(r, f);
            Query::Range {
                field: f,
                from: r.gen_bool(0.85).then_some(a),
                to: r.gen_bool(0.85).then_some(b),
            }
        }
        4 if !keyword => {
            let (Scalar::Num(a), Scalar::Num(b)) = ordered(r, f) else {
                unreachable!()
            };
            Query::NumericRange {
                field: f,
                from: Some(a),
                to: Some(b),
            }
        }
        5 => {
            let (Scalar::Num(a), Scalar::Num(b)) = ordered(r, Field::Latitude) else {
                unreachable!()
            };
            let (Scalar::Num(c), Scalar::Num(d)) = ordered(r, Field::Longitude) else {
                unreachable!()
            };
            Query::GeoRange {
                lat_from: a,
                lat_to: b,
                lon_from: c,
                lon_to: d,
            }
        }
        _ => Query::Term {
            field: f,
            value: scalar_for(r, f),
        },
    }
}

pub fn random_query(r: &mut ChaCha8Rng, depth: u32) -> Query {
    if depth == 0 || r.gen_bool(0.35) {
        return random_leaf(r);
    }
    let some = |r: &mut ChaCha8Rng, max: usize| -> Vec<Query> {
        (0..r.gen_range(0..=max))
            .map(|_| random_query(r, depth - 1))
            .collect()
    };
    match r.gen_range(0..6) {
        0 => Query::Bool {
            must: some(r, 2),
            should: some(r, 3),
            must_not: some(r, 2),
        },
        1 => Query::And(some(r, 3)),
        2 => Query::Or(some(r, 3)),
        3 => Query::Not(Box::new(random_query(r, depth - 1))),
        4 => Query::Filtered {
            query: Box::new(random_query(r, depth - 1)),
            filter: Box::new(random_query(r, depth - 1)),
        },
        _ => Query::MatchAll,
    }
}

// ---- linear-scan oracle ----

fn keyword_norm(f: Field, v: &str) -> String {
    match f {
        Field::Rt => v.to_string(),
        _ => v.trim_end_matches('.').to_lowercase(),
    }
}

fn keyword_of(f: Field, s: &PointerSummary) -> Option<String> {
    let raw = match f {
        Field::Domain => s.domain.to_string(),
        Field::Instance => s.instance.clone(),
        Field::Name => format!("{}.{}", s.instance, s.domain),
        Field::ServicePath => s.service_path.to_string(),
        Field::Rt => s.rt.clone(),
        _ => return None,
    };
    Some(keyword_norm(f, &raw))
}

fn number_of(f: Field, s: &PointerSummary) -> Option<f64> {
    match f {
        Field::Latitude => s.geo.map(|g| g.lat),
        Field::Longitude => s.geo.map(|g| g.lon),
        Field::Revision => Some(s.revision as f64),
        _ => None,
    }
}

thread_local! {
    static GLOBS: std::cell::RefCell<std::collections::HashMap<String, Regex>> =
        Default::default();
}

fn glob_match(p: &str, text: &str) -> bool {
    GLOBS.with(|g| {
        g.borrow_mut()
            .entry(p.to_string())
            .or_insert_with(|| glob_regex(p))
            .is_match(text)
    })
}

fn glob_regex(p: &str) -> Regex {
    let mut re = String::from("^");
    for c in p.chars() {
        match c {
            '*' => re.push_str(".*"),
            '?' => re.push('.'),
            c => re.push_str(&regex::escape(&c.to_string())),
        }
    }
    re.push('$');
    Regex::new(&re).unwrap()
}

fn in_bounds<T: PartialOrd>(x: &T, lo: Option<&T>, hi: Option<&T>) -> bool {
    lo.is_none_or(|l| x >= l) && hi.is_none_or(|h| x <= h)
}

/// Evaluates `q` against one summary, straight from the definitions.
pub fn oracle(q: &Query, s: &PointerSummary) -> bool {
    match q {
        Query::MatchAll => true,
        Query::Term { field, value } => match value {
            Scalar::Num(x) => number_of(*field, s) == Some(*x),
            Scalar::Str(v) if field.is_numeric() => number_of(*field, s) == v.parse::<f64>().ok(),
            Scalar::Str(v) => keyword_of(*field, s) == Some(keyword_norm(*field, v)),
        },
        Query::Prefix { field, value } => {
            keyword_of(*field, s).is_some_and(|k| k.starts_with(&keyword_norm(*field, value)))
        }
        Query::Wildcard { field, pattern } => {
            keyword_of(*field, s).is_some_and(|k| glob_match(&keyword_norm(*field, pattern), &k))
        }
        Query::Range { field, from, to } => {
            if field.is_numeric() {
                let num = |b: &Option<Scalar>| match b {
                    Some(Scalar::Num(x)) => Some(*x),
                    _ => None,
                };
                number_of(*field, s)
                    .is_some_and(|x| in_bounds(&x, num(from).as_ref(), num(to).as_ref()))
            } else {
                let st = |b: &Option<Scalar>| match b {
                    Some(Scalar::Str(x)) => Some(keyword_norm(*field, x)),
                    _ => None,
                };
                keyword_of(*field, s)
                    .is_some_and(|k| in_bounds(&k, st(from).as_ref(), st(to).as_ref()))
            }
        }
        Query::NumericRange { field, from, to } => {
            number_of(*field, s).is_some_and(|x| in_bounds(&x, from.as_ref(), to.as_ref()))
        }
        Query::GeoRange {
            lat_from,
            lat_to,
            lon_from,
            lon_to,
        } => s.geo.is_some_and(|g| {
            in_bounds(&g.lat, Some(lat_from), Some(lat_to))
                && in_bounds(&g.lon, Some(lon_from), Some(lon_to))
        }),
        Query::Bool {
            must,
            should,
            must_not,
        } => {
            must.iter().all(|m| oracle(m, s))
                && (!must.is_empty() || should.is_empty() || should.iter().any(|q| oracle(q, s)))
                && !must_not.iter().any(|q| oracle(q, s))
        }
        Query::And(qs) => qs.iter().all(|q| oracle(q, s)),
        Query::Or(qs) => qs.iter().any(|q| oracle(q, s)),
        Query::Not(q) => !oracle(q, s),
        Query::Filtered { query, filter } => oracle(query, s) && oracle(filter, s),
    }
}

/// Identity triples of every summary matching `q`, in result order.
pub fn linear_scan<'a>(
    q: &Query,
    corpus: impl IntoIterator<Item = &'a PointerSummary>,
) -> Vec<(Name, String, Name)> {
    let mut out: Vec<(Name, String, Name)> = corpus
        .into_iter()
        .filter(|s| oracle(q, s))
        .map(|s| {
            (
                s.domain.clone(),
                s.instance.to_lowercase(),
                s.service_path.clone(),
            )
        })
        .collect();
    out.sort();
    out.dedup();
    out
}
