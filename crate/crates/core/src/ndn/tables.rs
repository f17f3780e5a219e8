//! FIB, PIT and Content Store.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{DataPacket, FaceId, Name};
use crate::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NextHop {
    pub face: FaceId,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FibEntry {
    pub prefix: Name,
    pub next_hops: Vec<NextHop>,
}

#[derive(Debug, Default, Clone)]
struct FibNode {
    entry: Option<FibEntry>,
    children: HashMap<String, FibNode>,
}

/// Name-prefix table, stored as a component tree so lookups walk the name once.
#[derive(Debug, Default, Clone)]
pub struct Fib {
    root: FibNode,
    len: usize,
}

impl Fib {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add `face` as a next hop of `prefix`, or update its cost if already present.
    pub fn add_next_hop(&mut self, prefix: &Name, face: FaceId, cost: f64) {
        let mut node = &mut self.root;
        for c in prefix.components() {
            // look up before inserting so existing components don't allocate
            if !node.children.contains_key(c) {
                node.children.insert(c.clone(), FibNode::default());
            }
            node = node.children.get_mut(c).expect("present");
        }
        let entry = node.entry.get_or_insert_with(|| {
            self.len += 1;
            FibEntry {
                prefix: prefix.clone(),
                next_hops: Vec::new(),
            }
        });
        match entry.next_hops.iter_mut().find(|h| h.face == face) {
            Some(hop) => hop.cost = cost,
            None => entry.next_hops.push(NextHop { face, cost }),
        }
    }

    /// Remove a whole entry.
    pub fn remove(&mut self, prefix: &Name) -> Option<FibEntry> {
        let mut node = &mut self.root;
        for c in prefix.components() {
            node = node.children.get_mut(c)?;
        }
        let removed = node.entry.take();
        if removed.is_some() {
            self.len -= 1;
        }
        removed
    }

    pub fn get(&self, prefix: &Name) -> Option<&FibEntry> {
        let mut node = &self.root;
        for c in prefix.components() {
            node = node.children.get(c)?;
        }
        node.entry.as_ref()
    }

    /// Longest component-wise prefix of `name` that has an entry.
    pub fn longest_prefix_match(&self, name: &Name) -> Option<&FibEntry> {
        let mut node = &self.root;
        let mut best = node.entry.as_ref();
        for c in name.components() {
            match node.children.get(c) {
                Some(child) => {
                    node = child;
                    if node.entry.is_some() {
                        best = node.entry.as_ref();
                    }
                }
                None => break,
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Entries in no particular order.
    pub fn iter(&self) -> impl Iterator<Item = &FibEntry> + '_ {
        let mut stack = vec![&self.root];
        std::iter::from_fn(move || {
            while let Some(node) = stack.pop() {
                stack.extend(node.children.values());
                if node.entry.is_some() {
                    return node.entry.as_ref();
                }
            }
            None
        })
    }

    /// Entries sorted by prefix.
    pub fn entries(&self) -> Vec<&FibEntry> {
        let mut out: Vec<&FibEntry> = self.iter().collect();
        out.sort_by(|a, b| a.prefix.cmp(&b.prefix));
        out
    }
}

pub fn fib_lpm<'a>(fib: &'a Fib, name: &Name) -> Option<&'a FibEntry> {
    fib.longest_prefix_match(name)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PitEntry {
    pub name: Name,
    pub in_faces: BTreeSet<FaceId>,
    pub out_faces: BTreeSet<FaceId>,
    pub nonces: BTreeSet<u32>,
    pub expiry: SimTime,
}

/// Pending interests keyed by exact name.
#[derive(Debug, Default, Clone)]
pub struct Pit {
    entries: HashMap<Name, PitEntry>,
}

impl Pit {
    pub fn get(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub fn get_mut(&mut self, name: &Name) -> Option<&mut PitEntry> {
        self.entries.get_mut(name)
    }

    pub fn insert(&mut self, entry: PitEntry) {
        self.entries.insert(entry.name.clone(), entry);
    }

    pub fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Remove every entry with `expiry <= now`, returned in name order.
    pub fn sweep(&mut self, now: SimTime) -> Vec<PitEntry> {
        let expired: Vec<Name> = self
            .entries
            .values()
            .filter(|e| e.expiry <= now)
            .map(|e| e.name.clone())
            .collect();
        let mut removed: Vec<PitEntry> = expired
            .iter()
            .filter_map(|n| self.entries.remove(n))
            .collect();
        removed.sort_by(|a, b| a.name.cmp(&b.name));
        removed
    }

    pub fn iter(&self) -> impl Iterator<Item = &PitEntry> {
        self.entries.values()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsEntry {
    pub name: Name,
    pub data: DataPacket,
    pub inserted_at: SimTime,
    pub last_used: SimTime,
    #[serde(skip)]
    stamp: u64,
}

/// Exact-name cache with least-recently-used eviction.
#[derive(Debug, Clone)]
pub struct ContentStore {
    capacity: usize,
    entries: HashMap<Name, CsEntry>,
    // use stamp -> name; the smallest stamp is the LRU victim
    recency: BTreeMap<u64, Name>,
    next_stamp: u64,
}

impl ContentStore {
    pub const DEFAULT_CAPACITY: usize = 1000;

    pub fn new(capacity: usize) -> Self {
        ContentStore {
            capacity,
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            next_stamp: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    fn stamp(&mut self) -> u64 {
        self.next_stamp += 1;
        self.next_stamp
    }

    /// Look up `name`, refreshing its recency on a hit.
    pub fn lookup(&mut self, name: &Name, now: SimTime) -> Option<&DataPacket> {
        let stamp = self.stamp();
        let entry = self.entries.get_mut(name)?;
        self.recency.remove(&entry.stamp);
        entry.stamp = stamp;
        entry.last_used = now;
        self.recency.insert(stamp, name.clone());
        Some(&entry.data)
    }

    /// Insert or refresh `data`; returns the evicted names.
    pub fn insert(&mut self, data: DataPacket, now: SimTime) -> Vec<Name> {
        if self.capacity == 0 {
            return Vec::new();
        }
        let stamp = self.stamp();
        let name = data.name.clone();
        if let Some(old) = self.entries.remove(&name) {
            self.recency.remove(&old.stamp);
        }
        self.entries.insert(
            name.clone(),
            CsEntry {
                name: name.clone(),
                data,
                inserted_at: now,
                last_used: now,
                stamp,
            },
        );
        self.recency.insert(stamp, name);
        let mut evicted = Vec::new();
        while self.entries.len() > self.capacity {
            let (_, victim) = self.recency.pop_first().expect("recency tracks entries");
            self.entries.remove(&victim);
            evicted.push(victim);
        }
        evicted
    }

    /// Names from least to most recently used.
    pub fn lru_order(&self) -> Vec<Name> {
        self.recency.values().cloned().collect()
    }
}

impl Default for ContentStore {
    fn default() -> Self {
        ContentStore::new(Self::DEFAULT_CAPACITY)
    }
}
