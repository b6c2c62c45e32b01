//! Trails: ternary trees with tagged leaves recording one run's choices.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::eval::ChoiceLog;
use crate::syntax::{AlphaEnv, Base, Syntax, Term};

/// A selection path `.n1.n2...nk` with every `ni` in 1..=3.
/// Ordering is lexicographic, so a prefix sorts before its extensions.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SelPath(pub Vec<u8>);

impl SelPath {
    pub fn root() -> Self {
        SelPath(Vec::new())
    }

    pub fn child(&self, k: u8) -> Self {
        let mut v = self.0.clone();
        v.push(k);
        SelPath(v)
    }

    pub fn is_prefix_of(&self, other: &SelPath) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Neither path is a prefix of the other (equal paths are related).
    pub fn independent(&self, other: &SelPath) -> bool {
        !self.is_prefix_of(other) && !other.is_prefix_of(self)
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Display for SelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for k in &self.0 {
            write!(f, ".{k}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<&[u8]> for SelPath {
    fn from(p: &[u8]) -> Self {
        SelPath(p.to_vec())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trail {
    Empty,
    Leaf(Base, Arc<Term>),
    Node(Arc<Trail>, Arc<Trail>, Arc<Trail>),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrailError {
    #[error("choice sites {0} and {1} overlap")]
    PrefixClash(SelPath, SelPath),
}

impl Trail {
    pub fn leaf(tag: Base, value: Arc<Term>) -> Trail {
        Trail::Leaf(tag, value)
    }

    pub fn node(a: Trail, b: Trail, c: Trail) -> Trail {
        Trail::Node(Arc::new(a), Arc::new(b), Arc::new(c))
    }

    /// The child at index `k`; leaves and the empty tree have only empty children.
    pub fn child(&self, k: u8) -> Trail {
        match self {
            Trail::Node(a, b, c) => match k {
                1 => (**a).clone(),
                2 => (**b).clone(),
                3 => (**c).clone(),
                _ => panic!("selection index {k} out of range"),
            },
            _ => Trail::Empty,
        }
    }

    /// `τ..p`.
    pub fn select(&self, p: &[u8]) -> Trail {
        let mut cur = self.clone();
        for &k in p {
            cur = cur.child(k);
            if cur == Trail::Empty {
                break;
            }
        }
        cur
    }

    /// Replaces the subtree at `p` by `sub`, creating missing nodes.
    pub fn update(&self, p: &[u8], sub: Trail) -> Trail {
        let Some((&k, rest)) = p.split_first() else {
            return sub;
        };
        let (a, b, c) = match self {
            Trail::Node(a, b, c) => (a.clone(), b.clone(), c.clone()),
            _ => {
                let e = Arc::new(Trail::Empty);
                (e.clone(), e.clone(), e)
            }
        };
        let replace = |t: &Arc<Trail>| Arc::new(t.update(rest, sub.clone()));
        match k {
            1 => Trail::Node(replace(&a), b, c),
            2 => Trail::Node(a, replace(&b), c),
            3 => Trail::Node(a, b, replace(&c)),
            _ => panic!("selection index {k} out of range"),
        }
    }

    /// `unpack_B τ`: the root value when tagged `B`, otherwise `nil`.
    pub fn unpack(&self, b: Base) -> Arc<Term> {
        match self {
            Trail::Leaf(tag, v) if *tag == b => v.clone(),
            _ => Term::nil(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Trail::Empty | Trail::Leaf(..) => 0,
            Trail::Node(a, b, c) => 1 + a.depth().max(b.depth()).max(c.depth()),
        }
    }

    pub fn for_each_value(&self, f: &mut dyn FnMut(&Arc<Term>)) {
        match self {
            Trail::Empty => {}
            Trail::Leaf(_, v) => f(v),
            Trail::Node(a, b, c) => {
                a.for_each_value(f);
                b.for_each_value(f);
                c.for_each_value(f);
            }
        }
    }

    pub(crate) fn alpha_with(&self, other: &Trail, env: &mut AlphaEnv) -> bool {
        match (self, other) {
            (Trail::Empty, Trail::Empty) => true,
            (Trail::Leaf(b1, v1), Trail::Leaf(b2, v2)) => b1 == b2 && v1.alpha_with(v2, env),
            (Trail::Node(a1, b1, c1), Trail::Node(a2, b2, c2)) => {
                a1.alpha_with(a2, env) && b1.alpha_with(b2, env) && c1.alpha_with(c2, env)
            }
            _ => false,
        }
    }
}

/// Installs every logged choice as a leaf at its site.
pub fn trail_of_log(log: &ChoiceLog) -> Result<Trail, TrailError> {
    let entries = &log.entries;
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            if !a.site.independent(&b.site) {
                return Err(TrailError::PrefixClash(a.site.clone(), b.site.clone()));
            }
        }
    }
    Ok(entries.iter().fold(Trail::Empty, |t, e| {
        t.update(e.site.as_slice(), Trail::leaf(e.tag, e.value.clone()))
    }))
}
