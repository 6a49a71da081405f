//! Labels of finite subsystems and their canonical text form.
//!
//! Lattice labels print as `L{1,2,3}`, Gaussian labels as `G(f;K={1,2})`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sorted, duplicate-free finite set of site or coordinate indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "Vec<u32>", into = "Vec<u32>")]
pub struct IndexSet(Vec<u32>);

impl From<Vec<u32>> for IndexSet {
    fn from(v: Vec<u32>) -> Self {
        Self::new(v)
    }
}

impl From<IndexSet> for Vec<u32> {
    fn from(s: IndexSet) -> Self {
        s.0
    }
}

impl IndexSet {
    pub fn new(mut idx: Vec<u32>) -> Self {
        idx.sort_unstable();
        idx.dedup();
        Self(idx)
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn range(lo: u32, hi_exclusive: u32) -> Self {
        Self((lo..hi_exclusive).collect())
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: u32) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Position of `i` in sorted order.
    pub fn position(&self, i: u32) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        // both sorted: merge walk
        let mut it = other.0.iter();
        'outer: for x in &self.0 {
            for y in it.by_ref() {
                if y == x {
                    continue 'outer;
                }
                if y > x {
                    return false;
                }
            }
            return false;
        }
        true
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let mut v = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() || j < other.0.len() {
            match (self.0.get(i), other.0.get(j)) {
                (Some(a), Some(b)) if a == b => {
                    v.push(*a);
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a < b => {
                    v.push(*a);
                    i += 1;
                }
                (Some(_), Some(b)) => {
                    v.push(*b);
                    j += 1;
                }
                (Some(a), None) => {
                    v.push(*a);
                    i += 1;
                }
                (None, Some(b)) => {
                    v.push(*b);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        IndexSet(v)
    }

    /// Elements of `self` not in `other`.
    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.iter().copied().filter(|x| !other.contains(*x)).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<u32> for IndexSet {
    fn from_iter<T: IntoIterator<Item = u32>>(iter: T) -> Self {
        IndexSet::new(iter.into_iter().collect())
    }
}

/// A finite physical subsystem.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    /// A finite set of lattice sites.
    Lattice(IndexSet),
    /// A finite set of configuration coordinates together with an opaque
    /// momentum tag. The tag carries no structure beyond equality.
    Gaussian { tag: String, coords: IndexSet },
}

impl Label {
    pub fn lattice<I: IntoIterator<Item = u32>>(sites: I) -> Self {
        Label::Lattice(sites.into_iter().collect())
    }

    pub fn gaussian<I: IntoIterator<Item = u32>>(tag: &str, coords: I) -> Self {
        Label::Gaussian { tag: tag.to_owned(), coords: coords.into_iter().collect() }
    }

    pub fn indices(&self) -> &IndexSet {
        match self {
            Label::Lattice(s) => s,
            Label::Gaussian { coords, .. } => coords,
        }
    }

    /// A label of the same kind with a different index set.
    pub fn with_indices(&self, idx: IndexSet) -> Label {
        match self {
            Label::Lattice(_) => Label::Lattice(idx),
            Label::Gaussian { tag, .. } => Label::Gaussian { tag: tag.clone(), coords: idx },
        }
    }

    pub fn size(&self) -> usize {
        self.indices().len()
    }

    pub fn same_kind(&self, other: &Label) -> bool {
        match (self, other) {
            (Label::Lattice(_), Label::Lattice(_)) => true,
            (Label::Gaussian { tag: a, .. }, Label::Gaussian { tag: b, .. }) => a == b,
            _ => false,
        }
    }

    fn check_kind(&self, other: &Label) -> Result<()> {
        if self.same_kind(other) {
            Ok(())
        } else {
            Err(Error::IncomparableLabels { a: self.clone(), b: other.clone() })
        }
    }

    /// `self ≤ other`: inclusion of index sets.
    pub fn leq(&self, other: &Label) -> Result<bool> {
        self.check_kind(other)?;
        Ok(self.indices().is_subset(other.indices()))
    }

    /// Least upper bound: union of index sets.
    pub fn join(&self, other: &Label) -> Result<Label> {
        self.check_kind(other)?;
        Ok(self.with_indices(self.indices().union(other.indices())))
    }
}

/// `a ≤ b` in the directed set.
pub fn leq(a: &Label, b: &Label) -> Result<bool> {
    a.leq(b)
}

/// Upper bound of `a` and `b`.
pub fn join(a: &Label, b: &Label) -> Result<Label> {
    a.join(b)
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Lattice(s) => write!(f, "L{s}"),
            Label::Gaussian { tag, coords } => write!(f, "G({tag};K={coords})"),
        }
    }
}

fn parse_set(s: &str) -> Result<IndexSet> {
    let inner = s
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| Error::Parse(format!("expected {{..}}, got `{s}`")))?;
    if inner.trim().is_empty() {
        return Ok(IndexSet::empty());
    }
    let mut v = Vec::new();
    for part in inner.split(',') {
        let i: u32 = part.trim().parse().map_err(|_| Error::Parse(format!("bad index `{part}`")))?;
        v.push(i);
    }
    let set = IndexSet::new(v.clone());
    if set.len() != v.len() {
        return Err(Error::Parse(format!("duplicate index in `{s}`")));
    }
    Ok(set)
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix('L') {
            return Ok(Label::Lattice(parse_set(rest)?));
        }
        if let Some(rest) = s.strip_prefix("G(").and_then(|r| r.strip_suffix(')')) {
            let (tag, k) = rest
                .split_once(';')
                .ok_or_else(|| Error::Parse(format!("missing `;` in `{s}`")))?;
            let k = k
                .trim()
                .strip_prefix("K=")
                .ok_or_else(|| Error::Parse(format!("missing `K=` in `{s}`")))?;
            if tag.is_empty() || tag.contains(['(', ')', ';']) {
                return Err(Error::Parse(format!("bad tag in `{s}`")));
            }
            return Ok(Label::Gaussian { tag: tag.to_owned(), coords: parse_set(k)? });
        }
        Err(Error::Parse(format!("unrecognized label `{s}`")))
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(v: &[u32]) -> Label {
        Label::lattice(v.iter().copied())
    }

    #[test]
    fn leq_examples() {
        assert!(l(&[1, 2]).leq(&l(&[1, 2, 3])).unwrap());
        assert!(l(&[1, 2]).leq(&l(&[1, 2])).unwrap());
        assert!(!l(&[1, 4]).leq(&l(&[1, 2, 3])).unwrap());
    }

    #[test]
    fn join_examples() {
        assert_eq!(l(&[1, 2]).join(&l(&[2, 3])).unwrap(), l(&[1, 2, 3]));
        assert_eq!(l(&[1]).join(&l(&[1])).unwrap(), l(&[1]));
        assert_eq!(l(&[]).join(&l(&[5])).unwrap(), l(&[5]));
    }

    #[test]
    fn mixed_kinds_are_incomparable() {
        let g = Label::gaussian("f", [1]);
        assert!(matches!(l(&[1]).leq(&g), Err(Error::IncomparableLabels { .. })));
        assert!(matches!(g.join(&l(&[1])), Err(Error::IncomparableLabels { .. })));
        let h = Label::gaussian("h", [1, 2]);
        assert!(g.leq(&h).is_err());
    }

    #[test]
    fn text_form() {
        assert_eq!(l(&[3, 1, 2]).to_string(), "L{1,2,3}");
        assert_eq!(Label::gaussian("f", [2, 1]).to_string(), "G(f;K={1,2})");
        assert_eq!("L{}".parse::<Label>().unwrap(), l(&[]));
        assert_eq!("G(f;K={1,2})".parse::<Label>().unwrap(), Label::gaussian("f", [1, 2]));
        assert!("L{1,1}".parse::<Label>().is_err());
        assert!("X{1}".parse::<Label>().is_err());
        assert!("G(f;{1})".parse::<Label>().is_err());
        let json = serde_json::to_string(&l(&[0, 4])).unwrap();
        assert_eq!(json, "\"L{0,4}\"");
        assert_eq!(serde_json::from_str::<Label>(&json).unwrap(), l(&[0, 4]));
    }

    proptest! {
        #[test]
        fn text_form_round_trips(v in proptest::collection::vec(0u32..40, 0..8), gauss in any::<bool>()) {
            let lab = if gauss { Label::gaussian("k0", v) } else { Label::lattice(v) };
            prop_assert_eq!(lab.to_string().parse::<Label>().unwrap(), lab);
        }

        #[test]
        fn order_and_join_laws(
            a in proptest::collection::vec(0u32..12, 0..6),
            b in proptest::collection::vec(0u32..12, 0..6),
            c in proptest::collection::vec(0u32..12, 0..6),
        ) {
            let (a, b, c) = (Label::lattice(a), Label::lattice(b), Label::lattice(c));
            let ab = a.join(&b).unwrap();
            prop_assert!(a.leq(&ab).unwrap() && b.leq(&ab).unwrap());
            prop_assert_eq!(&ab, &b.join(&a).unwrap());
            prop_assert_eq!(ab.join(&c).unwrap(), a.join(&b.join(&c).unwrap()).unwrap());
            prop_assert!(a.leq(&a).unwrap());
            if a.leq(&b).unwrap() && b.leq(&c).unwrap() {
                prop_assert!(a.leq(&c).unwrap());
            }
            if a.leq(&b).unwrap() && b.leq(&a).unwrap() {
                prop_assert_eq!(&a, &b);
            }
            // subset test agrees with a brute-force membership check
            let brute = a.indices().iter().all(|i| b.indices().contains(i));
            prop_assert_eq!(a.leq(&b).unwrap(), brute);
        }
    }
}
