use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::num::NonZeroUsize;
use std::ops::Bound;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use std::sync::{Arc, Mutex};

use fixedbitset::FixedBitSet;
use lru::LruCache;
use serde::{Deserialize, Serialize};

use super::query::{glob_match, Field, Query, Scalar};
use super::summary::{DocKey, PointerSummary};

/// Sparse posting list for one field value.
type Postings = BTreeSet<u32>;
/// Dense evaluation result over slab ids.
pub(crate) type DocSet = FixedBitSet;

/// f64 with a total order; `-0.0` is folded into `0.0` on construction.
#[derive(Debug, Clone, Copy)]
struct Num(f64);

impl Num {
    fn new(x: f64) -> Self {
        Num(x + 0.0)
    }
}

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Num {}
impl PartialOrd for Num {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Num {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

static NEXT_INDEX_ID: AtomicU64 = AtomicU64::new(1);

/// Field to value to posting set, over a slab of summaries.
pub(crate) struct Index {
    id: u64,
    docs: Vec<Option<PointerSummary>>,
    keys: BTreeMap<DocKey, u32>,
    free: Vec<u32>,
    live: FixedBitSet,
    keyword: HashMap<Field, BTreeMap<String, Postings>>,
    numeric: HashMap<Field, BTreeMap<Num, Postings>>,
    generations: [u64; Field::ALL.len()],
}

impl Index {
    pub fn new() -> Self {
        Index {
            id: NEXT_INDEX_ID.fetch_add(1, AtomicOrdering::Relaxed),
            docs: Vec::new(),
            keys: BTreeMap::new(),
            free: Vec::new(),
            live: FixedBitSet::new(),
            keyword: HashMap::new(),
            numeric: HashMap::new(),
            generations: [0; Field::ALL.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn get(&self, key: &DocKey) -> Option<&PointerSummary> {
        self.keys
            .get(key)
            .and_then(|&id| self.docs[id as usize].as_ref())
    }

    /// Live summaries in result order.
    pub fn iter(&self) -> impl Iterator<Item = &PointerSummary> {
        self.keys
            .values()
            .filter_map(|&id| self.docs[id as usize].as_ref())
    }

    pub fn keys_in_domain<'a>(
        &'a self,
        domain: &'a crate::dns::Name,
    ) -> impl Iterator<Item = &'a DocKey> + 'a {
        self.keys.keys().filter(move |k| &k.domain == domain)
    }

    fn all(&self) -> DocSet {
        self.live.clone()
    }

    fn empty(&self) -> DocSet {
        FixedBitSet::with_capacity(self.docs.len())
    }

    fn gather<'a>(&self, sets: impl Iterator<Item = &'a Postings>) -> DocSet {
        let mut out = self.empty();
        for s in sets {
            for &id in s {
                out.insert(id as usize);
            }
        }
        out
    }

    fn post(&mut self, id: u32, s: &PointerSummary, add: bool) {
        for f in Field::ALL {
            let touched = if let Some(v) = f.keyword(s) {
                let m = self.keyword.entry(f).or_default();
                if add {
                    m.entry(v).or_default().insert(id);
                } else if let Some(set) = m.get_mut(&v) {
                    set.remove(&id);
                    if set.is_empty() {
                        m.remove(&v);
                    }
                }
                true
            } else if let Some(x) = f.numeric(s) {
                let m = self.numeric.entry(f).or_default();
                let x = Num::new(x);
                if add {
                    m.entry(x).or_default().insert(id);
                } else if let Some(set) = m.get_mut(&x) {
                    set.remove(&id);
                    if set.is_empty() {
                        m.remove(&x);
                    }
                }
                true
            } else {
                false
            };
            if touched {
                self.generations[f.index()] += 1;
            }
        }
    }

    /// Inserts or replaces the summary under its key.
    pub fn upsert(&mut self, s: PointerSummary) {
        let key = s.key();
        if let Some(&id) = self.keys.get(&key) {
            let old = self.docs[id as usize]
                .take()
                .expect("keyed slot is occupied");
            self.post(id, &old, false);
            self.post(id, &s, true);
            self.docs[id as usize] = Some(s);
            return;
        }
        let id = match self.free.pop() {
            Some(id) => id,
            None => {
                self.docs.push(None);
                (self.docs.len() - 1) as u32
            }
        };
        self.post(id, &s, true);
        self.docs[id as usize] = Some(s);
        self.keys.insert(key, id);
        self.live.grow(self.docs.len());
        self.live.insert(id as usize);
    }

    pub fn remove(&mut self, key: &DocKey) -> Option<PointerSummary> {
        let id = self.keys.remove(key)?;
        let old = self.docs[id as usize]
            .take()
            .expect("keyed slot is occupied");
        self.post(id, &old, false);
        self.live.set(id as usize, false);
        self.free.push(id);
        Some(old)
    }

    /// Results in (domain, instance, service path) order.
    pub fn collect(&self, set: &DocSet) -> Vec<&PointerSummary> {
        self.keys
            .values()
            .filter(|&&id| set.contains(id as usize))
            .filter_map(|&id| self.docs[id as usize].as_ref())
            .collect()
    }

    fn keyword_range(&self, f: Field, lo: Bound<String>, hi: Bound<String>) -> DocSet {
        let Some(m) = self.keyword.get(&f) else {
            return self.empty();
        };
        if matches!((&lo, &hi), (Bound::Included(a), Bound::Included(b)) if a > b) {
            return self.empty();
        }
        self.gather(m.range((lo, hi)).map(|(_, s)| s))
    }

    fn numeric_range(&self, f: Field, from: Option<f64>, to: Option<f64>) -> DocSet {
        let Some(m) = self.numeric.get(&f) else {
            return self.empty();
        };
        let lo = from.map_or(Bound::Unbounded, |x| Bound::Included(Num::new(x)));
        let hi = to.map_or(Bound::Unbounded, |x| Bound::Included(Num::new(x)));
        if let (Bound::Included(a), Bound::Included(b)) = (&lo, &hi) {
            if a > b {
                return self.empty();
            }
        }
        self.gather(m.range((lo, hi)).map(|(_, s)| s))
    }

    fn scan(&self, pred: impl Fn(&PointerSummary) -> bool) -> DocSet {
        let mut out = self.empty();
        for (id, d) in self.docs.iter().enumerate() {
            if d.as_ref().is_some_and(&pred) {
                out.insert(id);
            }
        }
        out
    }

    /// Evaluates a validated query. `cache` is consulted for cacheable
    /// nodes.
    pub fn eval(&self, q: &Query, mut cache: Option<(&FilterCache, &mut CacheStats)>) -> DocSet {
        if let (Some(key), Some((c, stats))) = (q.cache_key(), cache.as_mut()) {
            let gen = self.generation_of(q);
            if let Some(hit) = c.lookup(&key, self.id, gen) {
                stats.record(key, true);
                return (*hit).clone();
            }
            let set = self.eval_node(q, None);
            c.store(key.clone(), self.id, gen, Arc::new(set.clone()));
            stats.record(key, false);
            return set;
        }
        self.eval_node(q, cache)
    }

    fn generation_of(&self, q: &Query) -> u64 {
        match q {
            Query::Term { field, .. }
            | Query::Prefix { field, .. }
            | Query::Range { field, .. } => self.generations[field.index()],
            _ => 0,
        }
    }

    fn eval_node(&self, q: &Query, mut cache: Option<(&FilterCache, &mut CacheStats)>) -> DocSet {
        let mut sub = |q: &Query| self.eval(q, cache.as_mut().map(|(c, s)| (*c, &mut **s)));
        match q {
            Query::MatchAll => self.all(),
            Query::Term { field, value } => {
                if field.is_numeric() {
                    let x = value.as_f64();
                    self.numeric_range(*field, x, x)
                } else {
                    let Scalar::Str(v) = value else {
                        return self.empty();
                    };
                    self.gather(
                        self.keyword
                            .get(field)
                            .and_then(|m| m.get(&field.normalize(v)))
                            .into_iter(),
                    )
                }
            }
            Query::Prefix { field, value } => {
                let p = field.normalize(value);
                let Some(m) = self.keyword.get(field) else {
                    return self.empty();
                };
                self.gather(
                    m.range::<String, _>((Bound::Included(&p), Bound::Unbounded))
                        .take_while(|(k, _)| k.starts_with(&p))
                        .map(|(_, s)| s),
                )
            }
            Query::Wildcard { field, pattern } => {
                let p = field.normalize(pattern);
                let Some(m) = self.keyword.get(field) else {
                    return self.empty();
                };
                self.gather(m.iter().filter(|(k, _)| glob_match(&p, k)).map(|(_, s)| s))
            }
            Query::Range { field, from, to } => {
                if field.is_numeric() {
                    self.numeric_range(
                        *field,
                        from.as_ref().and_then(Scalar::as_f64),
                        to.as_ref().and_then(Scalar::as_f64),
                    )
                } else {
                    let b = |s: &Option<Scalar>| match s {
                        Some(Scalar::Str(v)) => Bound::Included(field.normalize(v)),
                        _ => Bound::Unbounded,
                    };
                    self.keyword_range(*field, b(from), b(to))
                }
            }
            Query::NumericRange { field, from, to } => {
                let (from, to) = (*from, *to);
                self.scan(|s| {
                    field
                        .numeric(s)
                        .is_some_and(|x| from.is_none_or(|a| x >= a) && to.is_none_or(|b| x <= b))
                })
            }
            Query::GeoRange {
                lat_from,
                lat_to,
                lon_from,
                lon_to,
            } => self.scan(|s| {
                s.geo.is_some_and(|g| {
                    (*lat_from..=*lat_to).contains(&g.lat) && (*lon_from..=*lon_to).contains(&g.lon)
                })
            }),
            Query::Bool {
                must,
                should,
                must_not,
            } => {
                let mut acc = self.all();
                for m in must {
                    acc.intersect_with(&sub(m));
                }
                if must.is_empty() && !should.is_empty() {
                    let mut any = self.empty();
                    for s in should {
                        any.union_with(&sub(s));
                    }
                    acc.intersect_with(&any);
                }
                for n in must_not {
                    acc.difference_with(&sub(n));
                }
                acc
            }
            Query::And(qs) => {
                let mut acc = self.all();
                for q in qs {
                    acc.intersect_with(&sub(q));
                }
                acc
            }
            Query::Or(qs) => {
                let mut acc = self.empty();
                for q in qs {
                    acc.union_with(&sub(q));
                }
                acc
            }
            Query::Not(q) => {
                let mut acc = self.all();
                acc.difference_with(&sub(q));
                acc
            }
            Query::Filtered { query, filter } => {
                let mut acc = sub(query);
                acc.intersect_with(&sub(filter));
                acc
            }
        }
    }
}

struct CachedSet {
    index: u64,
    generation: u64,
    docs: Arc<DocSet>,
}

pub const DEFAULT_CACHE_CAPACITY: usize = 1024;

/// LRU cache of filter results, keyed by canonical node key. Entries
/// remember the index and field generation they were computed against and
/// are ignored once either moves on.
pub struct FilterCache {
    inner: Mutex<LruCache<String, CachedSet>>,
    counters: Mutex<BTreeMap<String, u64>>,
}

impl Default for FilterCache {
    fn default() -> Self {
        FilterCache::new(DEFAULT_CACHE_CAPACITY)
    }
}

impl FilterCache {
    /// A capacity of zero is treated as one.
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("non-zero");
        FilterCache {
            inner: Mutex::new(LruCache::new(cap)),
            counters: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn capacity(&self) -> usize {
        self.inner.lock().expect("cache lock").cap().get()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn keys(&self) -> Vec<String> {
        self.inner
            .lock()
            .expect("cache lock")
            .iter()
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Total hits per key since creation.
    pub fn hit_counts(&self) -> BTreeMap<String, u64> {
        self.counters.lock().expect("cache lock").clone()
    }

    pub fn clear(&self) {
        self.inner.lock().expect("cache lock").clear();
    }

    fn lookup(&self, key: &str, index: u64, generation: u64) -> Option<Arc<DocSet>> {
        let mut c = self.inner.lock().expect("cache lock");
        let e = c.get(key)?;
        if e.index != index || e.generation != generation {
            c.pop(key);
            return None;
        }
        let docs = e.docs.clone();
        drop(c);
        *self
            .counters
            .lock()
            .expect("cache lock")
            .entry(key.to_string())
            .or_default() += 1;
        Some(docs)
    }

    fn store(&self, key: String, index: u64, generation: u64, docs: Arc<DocSet>) {
        self.inner.lock().expect("cache lock").put(
            key,
            CachedSet {
                index,
                generation,
                docs,
            },
        );
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeCacheEvent {
    pub key: String,
    pub hit: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
    pub nodes: Vec<NodeCacheEvent>,
}

impl CacheStats {
    fn record(&mut self, key: String, hit: bool) {
        if hit {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
        self.nodes.push(NodeCacheEvent { key, hit });
    }
}
