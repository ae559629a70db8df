use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::markup::LinkFragment;

/// Redirect title → target title, validated to be acyclic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedirectMap {
    edges: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedirectCycle(pub Vec<String>);

impl std::fmt::Display for RedirectCycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0.join(" -> "))
    }
}

impl RedirectMap {
    pub fn new(edges: impl IntoIterator<Item = (String, String)>) -> Result<Self, RedirectCycle> {
        let map = RedirectMap {
            edges: edges.into_iter().collect(),
        };
        map.check_acyclic()?;
        Ok(map)
    }

    fn check_acyclic(&self) -> Result<(), RedirectCycle> {
        let mut done: HashSet<&str> = HashSet::new();
        for start in self.edges.keys() {
            if done.contains(start.as_str()) {
                continue;
            }
            let mut path: Vec<&str> = vec![start];
            let mut on_path: HashSet<&str> = HashSet::from([start.as_str()]);
            let mut cur = start.as_str();
            while let Some(next) = self.edges.get(cur) {
                let next = next.as_str();
                if done.contains(next) {
                    break;
                }
                if on_path.contains(next) {
                    let from = path.iter().position(|t| *t == next).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        path[from..].iter().map(|s| s.to_string()).collect();
                    cycle.push(next.to_string());
                    return Err(RedirectCycle(cycle));
                }
                path.push(next);
                on_path.insert(next);
                cur = next;
            }
            done.extend(path);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn is_redirect(&self, title: &str) -> bool {
        self.edges.contains_key(title)
    }

    /// Follows redirects to a fixed point.
    pub fn resolve<'a>(&'a self, title: &'a str) -> &'a str {
        let mut cur = title;
        while let Some(next) = self.edges.get(cur) {
            cur = next;
        }
        cur
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

/// Rewrites every link target to its canonical title. Mentions and spans are
/// left untouched.
pub fn resolve_redirects(links: Vec<LinkFragment>, redirects: &RedirectMap) -> Vec<LinkFragment> {
    links
        .into_iter()
        .map(|mut link| {
            let resolved = redirects.resolve(&link.target);
            if resolved != link.target {
                link.target = resolved.to_string();
            }
            link
        })
        .collect()
}
