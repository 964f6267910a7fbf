use std::collections::{BTreeMap, VecDeque};
use std::net::{Ipv6Addr, SocketAddr, SocketAddrV6};
use std::time::Duration;

use super::{frames_required, FrameBudget, MessageCost, TransmissionReport};
use crate::dns::{self, RecordType};
use crate::lmdns::{
    Destination, Incoming, SmartObjectProfile, Transport, TransportError, MDNS_PORT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Sent by the directory side of the link.
    Query,
    /// Sent by a smart object.
    Reply,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionEntry {
    pub direction: Direction,
    pub bytes: usize,
    pub frames: usize,
    /// Type of the first question, when the packet decodes.
    pub qtype: Option<RecordType>,
    pub at: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub log: Vec<TransmissionEntry>,
    pub report: TransmissionReport,
}

impl LinkStats {
    pub fn queries(&self) -> usize {
        self.count(Direction::Query, None)
    }

    pub fn replies(&self) -> usize {
        self.count(Direction::Reply, None)
    }

    pub fn queries_of(&self, qtype: RecordType) -> usize {
        self.count(Direction::Query, Some(qtype))
    }

    pub fn replies_of(&self, qtype: RecordType) -> usize {
        self.count(Direction::Reply, Some(qtype))
    }

    fn count(&self, dir: Direction, qtype: Option<RecordType>) -> usize {
        self.log
            .iter()
            .filter(|e| e.direction == dir && (qtype.is_none() || e.qtype == qtype))
            .count()
    }

    pub fn by_type(&self, dir: Direction) -> BTreeMap<RecordType, usize> {
        let mut m = BTreeMap::new();
        for e in self.log.iter().filter(|e| e.direction == dir) {
            if let Some(t) = e.qtype {
                *m.entry(t).or_default() += 1;
            }
        }
        m
    }
}

struct SimAgent {
    addr: SocketAddr,
    profile: SmartObjectProfile,
    online: bool,
}

/// A single-threaded broadcast link with a logical clock. The directory
/// side uses it as its [`Transport`]; attached smart objects answer
/// synchronously and their replies queue up with a fixed latency.
pub struct SimLink {
    budget: FrameBudget,
    clock: Duration,
    latency: Duration,
    agents: Vec<SimAgent>,
    inbox: VecDeque<(Duration, Incoming)>,
    stats: LinkStats,
}

impl SimLink {
    pub fn new(budget: FrameBudget) -> Self {
        SimLink {
            budget,
            clock: Duration::ZERO,
            latency: Duration::from_millis(1),
            agents: Vec::new(),
            inbox: VecDeque::new(),
            stats: LinkStats::default(),
        }
    }

    /// Attaches a smart object and returns its link-local address.
    pub fn attach(&mut self, profile: SmartObjectProfile) -> SocketAddr {
        let n = self.agents.len() as u16 + 1;
        let ip = Ipv6Addr::new(0xfe80, 0, 0, 0, 0, 0, n / 0x100, n % 0x100 + 1);
        let addr = SocketAddr::V6(SocketAddrV6::new(ip, MDNS_PORT, 0, 0));
        self.agents.push(SimAgent {
            addr,
            profile,
            online: true,
        });
        addr
    }

    pub fn set_online(&mut self, addr: SocketAddr, online: bool) {
        if let Some(a) = self.agents.iter_mut().find(|a| a.addr == addr) {
            a.online = online;
        }
    }

    pub fn set_online_by_instance(&mut self, instance: &str, online: bool) {
        for a in self
            .agents
            .iter_mut()
            .filter(|a| a.profile.instance == instance)
        {
            a.online = online;
        }
    }

    pub fn profiles(&self) -> impl Iterator<Item = &SmartObjectProfile> {
        self.agents.iter().map(|a| &a.profile)
    }

    pub fn advance(&mut self, by: Duration) {
        self.clock += by;
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    pub fn take_stats(&mut self) -> LinkStats {
        std::mem::take(&mut self.stats)
    }

    pub fn budget(&self) -> &FrameBudget {
        &self.budget
    }

    fn record(&mut self, direction: Direction, packet: &[u8]) {
        let qtype = dns::decode(packet)
            .ok()
            .and_then(|m| m.questions.first().map(|q| q.qtype));
        let frames = frames_required(packet.len(), &self.budget);
        self.stats.log.push(TransmissionEntry {
            direction,
            bytes: packet.len(),
            frames,
            qtype,
            at: self.clock,
        });
        let budget = self.budget;
        self.stats.report.push(
            MessageCost {
                bytes: packet.len(),
                frames,
            },
            &budget,
        );
    }
}

impl Transport for SimLink {
    fn send(&mut self, dest: Destination, packet: &[u8]) -> Result<(), TransportError> {
        self.record(Direction::Query, packet);
        let multicast = matches!(dest, Destination::Multicast);
        let mut replies = Vec::new();
        for agent in self.agents.iter().filter(|a| a.online) {
            let addressed = match dest {
                Destination::Multicast => true,
                Destination::Unicast(to) => to == agent.addr,
            };
            if !addressed {
                continue;
            }
            if let Some(reply) = agent.profile.handle_packet(packet) {
                replies.push((agent.addr, reply));
            }
        }
        for (k, (from, reply)) in replies.into_iter().enumerate() {
            self.record(Direction::Reply, &reply);
            let arrival = self.clock + self.latency * (k as u32 + 1);
            self.inbox.push_back((
                arrival,
                Incoming {
                    bytes: reply,
                    from,
                    multicast,
                },
            ));
        }
        Ok(())
    }

    fn recv(&mut self, window: Duration) -> Result<Option<Incoming>, TransportError> {
        let deadline = self.clock + window;
        match self.inbox.front() {
            Some((arrival, _)) if *arrival <= deadline => {
                let (arrival, pkt) = self.inbox.pop_front().expect("front exists");
                self.clock = self.clock.max(arrival);
                Ok(Some(pkt))
            }
            _ => {
                self.clock = deadline;
                Ok(None)
            }
        }
    }

    fn now(&self) -> Duration {
        self.clock
    }
}
