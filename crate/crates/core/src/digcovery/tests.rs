use super::*;
use crate::fixtures::{CAMPUS_GEO_QUERY, LAB_DOMAIN};

fn name(s: &str) -> Name {
    s.parse().unwrap()
}

fn summary(
    domain: &str,
    instance: &str,
    path: &str,
    rt: &str,
    geo: Option<(f64, f64)>,
) -> PointerSummary {
    PointerSummary {
        instance: instance.into(),
        service_path: name(path),
        domain: name(domain),
        rt: rt.into(),
        geo: geo.map(|(lat, lon)| GeoPoint { lat, lon }),
        revision: 1,
        removed: false,
    }
}

fn domain(d: &str) -> DomainRecord {
    DomainRecord {
        domain: name(d),
        endpoint: DirectoryEndpoint {
            host: "155.54.210.159".into(),
            dns_port: 5300,
            http_port: None,
        },
        owner: "lab".into(),
        created: 0,
    }
}

/// Three lights and two thermometers on campus.
fn fixture() -> Digcovery {
    let mut dc = Digcovery::new();
    dc.register_domain(domain(LAB_DOMAIN)).unwrap();
    dc.register_domain(domain("hall.esiot.com")).unwrap();
    dc.ingest(
        &name(LAB_DOMAIN),
        &[
            summary(
                LAB_DOMAIN,
                "light_lab",
                "_light._coap._udp",
                "light",
                Some((37.998, -1.141)),
            ),
            summary(
                LAB_DOMAIN,
                "light_desk",
                "_light._coap._udp",
                "light",
                Some((37.9985, -1.1415)),
            ),
            summary(
                LAB_DOMAIN,
                "thermo_lab",
                "_temp._coap._udp",
                "temperature",
                Some((38.010, -1.141)),
            ),
        ],
    )
    .unwrap();
    dc.ingest(
        &name("hall.esiot.com"),
        &[
            summary(
                "hall.esiot.com",
                "light_hall",
                "_light._coap._tcp",
                "light",
                Some((37.998, -1.150)),
            ),
            summary(
                "hall.esiot.com",
                "thermo_hall",
                "_temp._coap._udp",
                "temperature",
                None,
            ),
        ],
    )
    .unwrap();
    dc
}

fn instances(hits: &[Hit]) -> Vec<&str> {
    hits.iter().map(|h| h.instance.as_str()).collect()
}

#[test]
fn domains_are_unique_and_required() {
    let mut dc = fixture();
    assert_eq!(
        dc.register_domain(domain(LAB_DOMAIN)),
        Err(DigcoveryError::DuplicateDomain(name(LAB_DOMAIN)))
    );
    let s = summary("x.example", "a", "_a._udp", "a", None);
    assert_eq!(
        dc.ingest(&name("x.example"), std::slice::from_ref(&s)),
        Err(DigcoveryError::UnknownDomain(name("x.example")))
    );
    assert!(matches!(
        dc.ingest(&name(LAB_DOMAIN), &[s]),
        Err(DigcoveryError::InvalidSummary(_))
    ));
}

#[test]
fn replay_is_idempotent() {
    let mut dc = fixture();
    let batch = [summary(
        LAB_DOMAIN,
        "light_lab",
        "_light._coap._udp",
        "light",
        Some((37.998, -1.141)),
    )];
    assert_eq!(dc.ingest(&name(LAB_DOMAIN), &batch).unwrap(), 0);
    assert_eq!(dc.len(), 5);
}

#[test]
fn removal_and_stale_readd() {
    let mut dc = fixture();
    let mut gone = summary(LAB_DOMAIN, "light_lab", "_light._coap._udp", "light", None);
    gone.revision = 2;
    gone.removed = true;
    assert_eq!(dc.ingest(&name(LAB_DOMAIN), &[gone]).unwrap(), 1);
    assert_eq!(dc.len(), 4);
    let old = summary(LAB_DOMAIN, "light_lab", "_light._coap._udp", "light", None);
    assert_eq!(dc.ingest(&name(LAB_DOMAIN), &[old]).unwrap(), 0);
    assert_eq!(dc.len(), 4);
}

#[test]
fn snapshot_replaces_domain() {
    let mut dc = fixture();
    let only = summary(
        LAB_DOMAIN,
        "thermo_lab",
        "_temp._coap._udp",
        "temperature",
        Some((38.010, -1.141)),
    );
    assert_eq!(
        dc.ingest_snapshot(&name(LAB_DOMAIN), std::slice::from_ref(&only))
            .unwrap(),
        0
    );
    assert_eq!(dc.len(), 3);
    // a restarted directory counts revisions from 1 again
    let back = summary(LAB_DOMAIN, "light_lab", "_light._coap._udp", "light", None);
    assert_eq!(dc.ingest(&name(LAB_DOMAIN), &[back]).unwrap(), 1);
}

#[test]
fn term_and_order() {
    let dc = fixture();
    let hits = dc.execute(&Query::term(Field::Rt, "light")).unwrap();
    assert_eq!(instances(&hits), ["light_hall", "light_desk", "light_lab"]);
}

#[test]
fn empty_bool_matches_all() {
    let dc = fixture();
    let q = Query::Bool {
        must: vec![],
        should: vec![],
        must_not: vec![],
    };
    assert_eq!(dc.execute(&q).unwrap().len(), 5);
}

#[test]
fn bool_should_only_when_must_empty() {
    let dc = fixture();
    let should = vec![Query::term(Field::Instance, "light_lab")];
    let q = Query::Bool {
        must: vec![],
        should: should.clone(),
        must_not: vec![],
    };
    assert_eq!(instances(&dc.execute(&q).unwrap()), ["light_lab"]);
    let q = Query::Bool {
        must: vec![Query::term(Field::Rt, "light")],
        should,
        must_not: vec![Query::term(Field::Domain, "hall.esiot.com")],
    };
    assert_eq!(
        instances(&dc.execute(&q).unwrap()),
        ["light_desk", "light_lab"]
    );
}

#[test]
fn campus_geo_query() {
    let dc = fixture();
    let q = Query::from_json_str(CAMPUS_GEO_QUERY).unwrap();
    assert_eq!(
        instances(&dc.execute(&q).unwrap()),
        ["light_desk", "light_lab"]
    );
    let geo = Query::GeoRange {
        lat_from: 37.997,
        lat_to: 37.999,
        lon_from: -1.142,
        lon_to: -1.140,
    };
    assert_eq!(dc.execute(&geo).unwrap(), dc.execute(&q).unwrap());
}

#[test]
fn keyword_ranges_and_prefixes() {
    let dc = fixture();
    let q = Query::Range {
        field: Field::Rt,
        from: Some(Scalar::Str("l".into())),
        to: Some(Scalar::Str("m".into())),
    };
    assert_eq!(dc.execute(&q).unwrap().len(), 3);
    let q = Query::Prefix {
        field: Field::ServicePath,
        value: "_TEMP.".into(),
    };
    assert_eq!(dc.execute(&q).unwrap().len(), 2);
    let q = Query::Wildcard {
        field: Field::Name,
        pattern: "light_*.rd.esiot.com".into(),
    };
    assert_eq!(dc.execute(&q).unwrap().len(), 2);
}

#[test]
fn bad_queries_are_rejected() {
    let dc = fixture();
    assert!(matches!(
        dc.execute(&Query::range(Field::Latitude, 2.0, 1.0)),
        Err(DigcoveryError::MalformedQuery(_))
    ));
}

#[test]
fn cacheability_table() {
    use Cacheability::*;
    for (k, want) in [
        (NodeKind::Term, CachedByDefault),
        (NodeKind::Prefix, CachedByDefault),
        (NodeKind::Range, CachedByDefault),
        (NodeKind::GeoRange, NotCached),
        (NodeKind::NumericRange, NotCached),
        (NodeKind::Script, NotCached),
        (NodeKind::And, NotCached),
        (NodeKind::Or, NotCached),
        (NodeKind::Not, NotCached),
        (NodeKind::Bool, NotCached),
    ] {
        assert_eq!(cacheability(k), want, "{k:?}");
    }
}

#[test]
fn shared_term_hits_cache() {
    let dc = fixture();
    let cache = FilterCache::default();
    let t = Query::term(Field::Rt, "light");
    let q1 = Query::Bool {
        must: vec![t.clone()],
        should: vec![],
        must_not: vec![],
    };
    let q2 = Query::Bool {
        must: vec![t],
        should: vec![],
        must_not: vec![Query::term(Field::Domain, "hall.esiot.com")],
    };
    let (_, s1) = dc.execute_cached(&q1, &cache).unwrap();
    assert_eq!((s1.hits, s1.misses), (0, 1));
    let (r2, s2) = dc.execute_cached(&q2, &cache).unwrap();
    assert_eq!((s2.hits, s2.misses), (1, 1));
    assert_eq!(r2, dc.execute(&q2).unwrap());
}

#[test]
fn geo_is_never_cached() {
    let dc = fixture();
    let cache = FilterCache::default();
    let geo = Query::GeoRange {
        lat_from: 37.0,
        lat_to: 39.0,
        lon_from: -2.0,
        lon_to: 0.0,
    };
    for _ in 0..2 {
        let (_, s) = dc.execute_cached(&geo, &cache).unwrap();
        assert_eq!((s.hits, s.misses), (0, 0));
    }
    assert!(cache.is_empty());
}

#[test]
fn cache_invalidates_on_ingest() {
    let mut dc = fixture();
    let cache = FilterCache::default();
    let q = Query::term(Field::Rt, "light");
    assert_eq!(dc.execute_cached(&q, &cache).unwrap().0.len(), 3);
    dc.ingest(
        &name(LAB_DOMAIN),
        &[summary(
            LAB_DOMAIN,
            "light_door",
            "_light._coap._udp",
            "light",
            None,
        )],
    )
    .unwrap();
    let (hits, stats) = dc.execute_cached(&q, &cache).unwrap();
    assert_eq!(hits.len(), 4);
    assert_eq!(stats.hits, 0);
}

#[test]
fn pattern_semantics() {
    let p = PathPattern::parse("*.*._udp").unwrap();
    assert!(p.matches(&name("_light._coap._udp")));
    assert!(!p.matches(&name("_lamp._sub._coap._udp")));
    assert!(!p.matches(&name("_light._coap._tcp")));
    let tail = PathPattern::parse("_light.*").unwrap();
    assert!(tail.matches(&name("_light._coap._udp")));
    assert!(tail.matches(&name("_light._udp")));
    assert!(!tail.matches(&name("_light")));
    assert!(PathPattern::parse("*.*")
        .unwrap()
        .matches(&name("_a._b._c._d")));
    assert!(matches!(
        PathPattern::parse(""),
        Err(DigcoveryError::MalformedPattern(_))
    ));
    assert!(matches!(
        PathPattern::parse("a..b"),
        Err(DigcoveryError::MalformedPattern(_))
    ));
}

#[test]
fn discover_domains() {
    let dc = fixture();
    let d = dc.discover("_light._coap._udp").unwrap();
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].domain, name(LAB_DOMAIN));
    assert_eq!(d[0].services, 2);
    let all: Vec<Name> = dc
        .discover("*.*")
        .unwrap()
        .into_iter()
        .map(|m| m.domain)
        .collect();
    assert_eq!(all, vec![name("hall.esiot.com"), name(LAB_DOMAIN)]);
}

#[test]
fn dns_front_redirects() {
    use crate::dns::Question;
    let dc = fixture();
    let q = Message::query(3, Question::new(name("_light._coap._udp"), RecordType::Ptr));
    let r = dc.respond(&q);
    assert_eq!(r.header.rcode, rcode::NOERROR);
    assert_eq!(r.answers.len(), 1);
    assert_eq!(r.answers[0].data, RData::Ptr(name(LAB_DOMAIN)));
    assert_eq!(r.additional.len(), 1);
    let q = Message::query(4, Question::new(name("_fan._udp"), RecordType::Ptr));
    assert_eq!(dc.respond(&q).header.rcode, rcode::NXDOMAIN);
}

#[test]
fn pagination() {
    let dc = fixture();
    let p = dc
        .execute_page(
            &Query::MatchAll,
            Page {
                offset: 1,
                limit: 2,
            },
        )
        .unwrap();
    assert_eq!(p.total, 5);
    assert_eq!(p.hits.len(), 2);
    assert_eq!(p.hits[0].instance, "thermo_hall");
    assert_eq!(Page::default().limit, 100);
}

#[test]
fn distance_sort() {
    let dc = fixture();
    let mut hits = dc.execute(&Query::MatchAll).unwrap();
    sort_by_distance(
        &mut hits,
        GeoPoint {
            lat: 37.998,
            lon: -1.141,
        },
    );
    assert_eq!(hits[0].instance, "light_lab");
    assert_eq!(hits.last().unwrap().instance, "thermo_hall");
    let d = approx_distance_km(
        GeoPoint { lat: 0.0, lon: 0.0 },
        GeoPoint { lat: 1.0, lon: 0.0 },
    );
    assert!((d - 111.19).abs() < 0.01);
}
