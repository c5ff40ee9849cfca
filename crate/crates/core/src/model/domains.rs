use std::collections::{BTreeMap, BTreeSet};

use crate::diagnostics::{DiagCode, Diagnostic, Location};

/// Named failure domains. A leaf belongs to at most one named domain; leaves
/// outside every set are their own singleton domain.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainMap {
    domains: BTreeMap<String, BTreeSet<String>>,
}

impl DomainMap {
    pub fn new() -> Self {
        DomainMap::default()
    }

    pub fn from_groups<I, N, L, M>(groups: I) -> Self
    where
        I: IntoIterator<Item = (N, L)>,
        N: Into<String>,
        L: IntoIterator<Item = M>,
        M: Into<String>,
    {
        let mut map = DomainMap::new();
        for (name, leaves) in groups {
            map.insert(name, leaves);
        }
        map
    }

    pub fn insert<N, L, M>(&mut self, name: N, leaves: L)
    where
        N: Into<String>,
        L: IntoIterator<Item = M>,
        M: Into<String>,
    {
        self.domains
            .entry(name.into())
            .or_default()
            .extend(leaves.into_iter().map(Into::into));
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.domains.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn members(&self, domain: &str) -> Option<&BTreeSet<String>> {
        self.domains.get(domain)
    }

    pub fn domain_of(&self, leaf: &str) -> Option<&str> {
        self.domains
            .iter()
            .find(|(_, members)| members.contains(leaf))
            .map(|(name, _)| name.as_str())
    }

    /// Disjointness and non-emptiness.
    pub fn check(&self, field: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (name, members) in &self.domains {
            if members.is_empty() {
                out.push(Diagnostic::warning(
                    DiagCode::DomainOverlap,
                    format!("domain `{name}` has no members"),
                    Location::Field(format!("{field}.{name}")),
                ));
            }
            for leaf in members {
                if let Some(prev) = owner.insert(leaf, name) {
                    out.push(Diagnostic::error(
                        DiagCode::DomainOverlap,
                        format!("leaf `{leaf}` is in both `{prev}` and `{name}`"),
                        Location::Field(format!("{field}.{name}")),
                    ));
                }
            }
        }
        out
    }

    /// Union of groupings: two leaves grouped by either input share a domain
    /// in the output, closed transitively. Domains with the same name in both
    /// inputs are the same domain. The merged domain is named by joining its
    /// contributing names with `+`.
    pub fn merge(&self, other: &DomainMap) -> DomainMap {
        let mut uf = UnionFind::default();
        for map in [self, other] {
            for (name, members) in &map.domains {
                let parts: Vec<String> = name.split('+').map(|p| format!("#{p}")).collect();
                let anchor = uf.id(&parts[0]);
                for part in &parts[1..] {
                    let id = uf.id(part);
                    uf.union(anchor, id);
                }
                for leaf in members {
                    let id = uf.id(&format!("@{leaf}"));
                    uf.union(anchor, id);
                }
            }
        }
        let mut components: BTreeMap<usize, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
        for (key, id) in uf.keys.clone() {
            let root = uf.find(id);
            let entry = components.entry(root).or_default();
            let (tag, rest) = key.split_at(1);
            if tag == "#" {
                entry.0.insert(rest.to_string());
            } else {
                entry.1.insert(rest.to_string());
            }
        }
        let mut merged = DomainMap::new();
        for (names, leaves) in components.into_values() {
            if leaves.is_empty() {
                continue;
            }
            let name = names.into_iter().collect::<Vec<_>>().join("+");
            merged.insert(name, leaves);
        }
        merged
    }
}

#[derive(Default)]
struct UnionFind {
    keys: BTreeMap<String, usize>,
    parent: Vec<usize>,
}

impl UnionFind {
    fn id(&mut self, key: &str) -> usize {
        if let Some(&id) = self.keys.get(key) {
            return id;
        }
        let id = self.parent.len();
        self.parent.push(id);
        self.keys.insert(key.to_string(), id);
        id
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Merges the spec's inline domains with the model's, most correlated wins.
pub fn merge_domains(spec_domains: &DomainMap, model_domains: &DomainMap) -> DomainMap {
    spec_domains.merge(model_domains)
}
