//! Reference data for the lab deployment under `rd.esiot.com`: the SRV and
//! TXT exchanges for the lab light in optimized and full form, the lamp's
//! lmDNS profile, and two CoRE link-format documents.

use std::net::{Ipv4Addr, Ipv6Addr};

use crate::digrectory::{DirectoryEntry, GeoPoint};
use crate::dns::{Header, Message, Name, Question, RData, Record, RecordType};
use crate::lmdns::SmartObjectProfile;
use crate::semantics::{to_txt, ServiceMetadata, TxtMode};

pub const LAB_DOMAIN: &str = "rd.esiot.com";
pub const LAB_INSTANCE: &str = "light_lab";
pub const LAB_HOST: &str = "light1.rd.esiot.com";
pub const LAB_HOST_V4: Ipv4Addr = Ipv4Addr::new(155, 54, 210, 163);
pub const LAB_HOST_V6: Ipv6Addr = Ipv6Addr::new(0x2001, 0x720, 0x1710, 0, 0, 0, 0, 0x11);
pub const DIRECTORY_V4: Ipv4Addr = Ipv4Addr::new(155, 54, 210, 159);
pub const DIRECTORY_V6: Ipv6Addr =
    Ipv6Addr::new(0x2001, 0x720, 0x1710, 0, 0x216, 0x3eff, 0xfe00, 0x9);

fn name(s: &str) -> Name {
    s.parse().expect("fixture names are valid")
}

fn response(id: u16, question: Question) -> Message {
    Message {
        header: Header {
            id,
            qr: true,
            rd: true,
            ra: true,
            ..Header::default()
        },
        questions: vec![question],
        ..Message::default()
    }
}

fn lab_srv(ttl: u32) -> Record {
    Record::new(
        name("light_lab.rd.esiot.com"),
        ttl,
        RData::Srv {
            priority: 0,
            weight: 0,
            port: 1234,
            target: name(LAB_HOST),
        },
    )
}

fn delegation(ttl: u32) -> Vec<Record> {
    vec![Record::new(
        name(LAB_DOMAIN),
        ttl,
        RData::Ns(name(LAB_DOMAIN)),
    )]
}

/// SRV answer for the lab light with authority and additional omitted.
pub fn srv_response_optimized() -> Message {
    let mut m = response(
        6373,
        Question::new(name("light_lab.rd.esiot.com"), RecordType::Srv),
    );
    m.answers.push(lab_srv(604800));
    m
}

/// The same SRV answer as a stock DNS server sends it: NS authority and
/// A/AAAA glue for both the host and the directory.
pub fn srv_response_full() -> Message {
    let mut m = response(
        9950,
        Question::new(name("light_lab.rd.esiot.com"), RecordType::Srv),
    );
    m.answers.push(lab_srv(602400));
    m.authority = delegation(602400);
    m.additional = vec![
        Record::new(name(LAB_HOST), 602512, RData::A(LAB_HOST_V4)),
        Record::new(name(LAB_HOST), 602400, RData::Aaaa(LAB_HOST_V6)),
        Record::new(name(LAB_DOMAIN), 602400, RData::A(DIRECTORY_V4)),
        Record::new(name(LAB_DOMAIN), 602400, RData::Aaaa(DIRECTORY_V6)),
    ];
    m
}

/// The dimmer light on the EIB bus.
pub fn dimmer_light_metadata() -> ServiceMetadata {
    ServiceMetadata::new("light", 2, 86400)
        .with_model("dimmer")
        .with_interface("EIB")
        .with_extra("area", "1")
        .with_extra("zone", "2")
        .with_extra("deviceID", "3")
        .with_verbs(["value", "onoff"])
}

/// The X10 lamp.
pub fn x10_lamp_metadata() -> ServiceMetadata {
    ServiceMetadata::new("light", 1, 86400)
        .with_model("normal")
        .with_interface("X10")
        .with_extra("housecode", "A")
        .with_extra("unitcode", "5")
        .with_verbs(["onoff", "status", "dimmer"])
}

/// One joined TXT record for the dimmer light.
pub fn txt_response_joined() -> Message {
    let mut m = response(19187, Question::new(name(LAB_HOST), RecordType::Txt));
    let parts = to_txt(&dimmer_light_metadata(), TxtMode::Single).expect("valid metadata");
    m.answers
        .push(Record::new(name(LAB_HOST), 604800, RData::Txt(parts)));
    m
}

/// Three grouped TXT records for the X10 lamp, plus authority and the
/// directory's address records.
pub fn txt_response_multi() -> Message {
    let owner = name("light_lab.rd.esiot.com");
    let mut m = response(24910, Question::new(owner.clone(), RecordType::Txt));
    for part in to_txt(&x10_lamp_metadata(), TxtMode::Multi).expect("valid metadata") {
        m.answers
            .push(Record::new(owner.clone(), 604800, RData::Txt(vec![part])));
    }
    m.authority = delegation(604800);
    m.additional = vec![
        Record::new(name(LAB_DOMAIN), 604800, RData::A(DIRECTORY_V4)),
        Record::new(name(LAB_DOMAIN), 604800, RData::Aaaa(DIRECTORY_V6)),
    ];
    m
}

/// PTR paths for the lab lamp: its type, three service subtypes and its
/// technology subtype.
pub fn lab_lamp_paths() -> Vec<Name> {
    [
        "_lamp._sub._coap._udp",
        "_status._lamp._sub._coap._udp",
        "_onoff._lamp._sub._coap._udp",
        "_dimmer._lamp._sub._coap._udp",
        "_x10._lamp._sub._coap._udp",
    ]
    .into_iter()
    .map(name)
    .collect()
}

pub fn lab_lamp_profile() -> SmartObjectProfile {
    let mut paths = lab_lamp_paths();
    let service_path = paths.remove(0);
    SmartObjectProfile {
        instance: LAB_INSTANCE.into(),
        domain: name(LAB_DOMAIN),
        hostname: name(LAB_HOST),
        service_path,
        aliases: paths,
        meta: dimmer_light_metadata(),
        port: 1234,
        priority: 0,
        capacity: 0,
        addr6: LAB_HOST_V6,
        addr4: Some(LAB_HOST_V4),
        answer_a: false,
        ttl: 604800,
    }
}

/// The lab light as a directory entry, seen at time `now`.
pub fn lab_light_entry(now: u64) -> DirectoryEntry {
    DirectoryEntry {
        instance: LAB_INSTANCE.into(),
        domain: name(LAB_DOMAIN),
        ptr_paths: vec![name("_light._coap._udp")],
        srv: crate::digrectory::SrvTarget {
            priority: 0,
            capacity: 0,
            port: 1234,
            target: name(LAB_HOST),
        },
        meta: dimmer_light_metadata(),
        addrs: vec![LAB_HOST_V6.into(), LAB_HOST_V4.into()],
        geo: Some(GeoPoint {
            lat: 37.998,
            lon: -1.141,
        }),
        ttl: 604800,
        last_seen: now,
        origin: "lmdns".into(),
    }
}

/// `/.well-known/core` of a simple sensor/actuator node.
pub const WELL_KNOWN_CORE: &str = r#"</s>;rt="simple.sen";if="core.b",
</s/lt>;rt="simple.sen.lt";if="core.s",
</s/tmp>;rt="simple.sen.tmp";if="core.s";obs,
</s/hum>;rt="simple.sen.hum";if="core.s",
</a>;rt="simple.act";if="core.b",
</a/1/led>;rt="simple.act.led";if="core.a",
</a/2/led>;rt="simple.act.led";if="core.a",
</d>;rt="simple.dev";if="core.ll",
</l>;if="core.lb""#;

/// A sensor index with anchored links.
pub const SENSOR_INDEX_LINKS: &str = r#"</sensors>;ct=40;title="Sensor Index",
</sensors/temp>;rt="temperature-c";if="sensor",
</sensors/light>;rt="light-lux";if="sensor",
<http://www.example.com/sensors/t123>;anchor="/sensors/temp";rel="describedby",
</t>;anchor="/sensors/temp";rel="alternate""#;

/// JSON mapping of [`SENSOR_INDEX_LINKS`].
pub const SENSOR_INDEX_JSON: &str = r#"[{"href":"/sensors","ct":"40","title":"Sensor Index"},
  {"href":"/sensors/temp","rt":"temperature-c","if":"sensor"},
  {"href":"/sensors/light","rt":"light-lux","if":"sensor"},
  {"href":"http://www.example.com/sensors/t123","anchor":"/sensors/temp","rel":"describedby"},
  {"href":"/t","anchor":"/sensors/temp","rel":"alternate"}]"#;

/// The geo query over the campus street, as accepted by the query API.
pub const CAMPUS_GEO_QUERY: &str = r#"{
  "query": {
    "filtered": {
      "query":  { "range": { "latitude":  { "from": 37.997, "to": 37.999 } } },
      "filter": { "range": { "longitude": { "from": -1.142, "to": -1.140 } } }
    }
  }
}"#;
