//! The directed set of subsystems: finite subsets of a bounded index universe,
//! ordered by inclusion with union as join.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{IndexSet, Label};
use crate::rng;

/// Chain sampler identifier recorded in reports.
pub const CHAIN_SAMPLER: &str = "shuffle-prefix-v1";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FamilyKind {
    Lattice,
    Gaussian { tag: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedFamily {
    kind: FamilyKind,
    universe: IndexSet,
}

impl DirectedFamily {
    pub fn lattice(universe: IndexSet) -> Self {
        Self { kind: FamilyKind::Lattice, universe }
    }

    pub fn gaussian(tag: &str, universe: IndexSet) -> Self {
        Self { kind: FamilyKind::Gaussian { tag: tag.to_owned() }, universe }
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn universe(&self) -> &IndexSet {
        &self.universe
    }

    pub fn label(&self, idx: IndexSet) -> Label {
        match &self.kind {
            FamilyKind::Lattice => Label::Lattice(idx),
            FamilyKind::Gaussian { tag } => Label::Gaussian { tag: tag.clone(), coords: idx },
        }
    }

    pub fn top(&self) -> Label {
        self.label(self.universe.clone())
    }

    pub fn bottom(&self) -> Label {
        self.label(IndexSet::empty())
    }

    /// Whether `l` is a label of this family.
    pub fn contains(&self, l: &Label) -> bool {
        let kind_ok = match (&self.kind, l) {
            (FamilyKind::Lattice, Label::Lattice(_)) => true,
            (FamilyKind::Gaussian { tag }, Label::Gaussian { tag: t, .. }) => tag == t,
            _ => false,
        };
        kind_ok && l.indices().is_subset(&self.universe)
    }

    pub fn check(&self, l: &Label) -> Result<()> {
        if self.contains(l) {
            Ok(())
        } else {
            Err(Error::ForeignLabel(l.clone()))
        }
    }

    pub fn leq(&self, a: &Label, b: &Label) -> Result<bool> {
        a.leq(b)
    }

    pub fn join(&self, a: &Label, b: &Label) -> Result<Label> {
        a.join(b)
    }

    /// Every label of the family (2^|universe| of them), smallest first.
    pub fn all_labels(&self) -> Vec<Label> {
        let u = self.universe.as_slice();
        assert!(u.len() <= 20, "universe too large to enumerate");
        let mut out: Vec<Label> = (0u32..(1 << u.len()))
            .map(|mask| {
                self.label(u.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, &i)| i).collect())
            })
            .collect();
        out.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
        out
    }

    /// Every triple `lo ≤ mid ≤ hi` (4^|universe| of them).
    pub fn all_triples(&self) -> Vec<(Label, Label, Label)> {
        let u = self.universe.as_slice();
        assert!(u.len() <= 10, "universe too large to enumerate triples");
        let n = u.len();
        let total = 4usize.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        for code in 0..total {
            // digit per index: 0 absent, 1 in hi only, 2 in mid, 3 in lo
            let (mut lo, mut mid, mut hi) = (Vec::new(), Vec::new(), Vec::new());
            for (k, &i) in u.iter().enumerate() {
                let d = (code >> (2 * k)) & 3;
                if d >= 1 {
                    hi.push(i);
                }
                if d >= 2 {
                    mid.push(i);
                }
                if d >= 3 {
                    lo.push(i);
                }
            }
            out.push((self.label(IndexSet::new(lo)), self.label(IndexSet::new(mid)), self.label(IndexSet::new(hi))));
        }
        out
    }

    /// Deterministic strictly ascending chains.
    ///
    /// Each chain shuffles the universe and takes nested prefixes whose sizes
    /// are a sorted random sample of `1..=|universe|`; chain length is
    /// `min(max_len, |universe|)` (at least 1, a singleton `{}` chain when the
    /// universe is empty).
    pub fn sample_chains(&self, count: usize, max_len: usize, seed: u64) -> Vec<Vec<Label>> {
        let mut rng = rng::stream(seed, "directed/chains");
        let u: Vec<u32> = self.universe.iter().collect();
        let len = max_len.max(1).min(u.len().max(1));
        (0..count.max(1))
            .map(|_| {
                if u.is_empty() {
                    return vec![self.bottom()];
                }
                let mut order = u.clone();
                order.shuffle(&mut rng);
                let mut sizes: Vec<usize> = (1..=u.len()).collect();
                sizes.shuffle(&mut rng);
                let mut sizes = sizes[..len].to_vec();
                sizes.sort_unstable();
                sizes.iter().map(|&s| self.label(order[..s].iter().copied().collect())).collect()
            })
            .collect()
    }

    /// Triples `lo ≤ mid ≤ hi` drawn from random chains. Roughly one in eight
    /// is degenerate (`lo = mid` or `mid = hi`), exercising triviality clauses.
    pub fn sample_triples(&self, count: usize, seed: u64) -> Vec<(Label, Label, Label)> {
        let mut rng = rng::stream(seed, "directed/triples");
        let chains = self.sample_chains(count, 3, seed);
        chains
            .into_iter()
            .map(|c| {
                let mut c = c;
                while c.len() < 3 {
                    let last = c.last().cloned().unwrap();
                    c.push(last);
                }
                match rng.random_range(0..8) {
                    0 => (c[0].clone(), c[0].clone(), c[2].clone()),
                    1 => (c[0].clone(), c[2].clone(), c[2].clone()),
                    _ => (c[0].clone(), c[1].clone(), c[2].clone()),
                }
            })
            .collect()
    }

    /// Pairs `lo ≤ hi` with `lo` a uniformly random subset of a random `hi`.
    /// `max_hi` bounds the size of `hi`.
    pub fn sample_pairs(&self, count: usize, max_hi: usize, seed: u64) -> Vec<(Label, Label)> {
        let mut rng = rng::stream(seed, "directed/pairs");
        let u: Vec<u32> = self.universe.iter().collect();
        let cap = max_hi.min(u.len());
        (0..count)
            .map(|_| {
                let size = if cap == 0 { 0 } else { rng.random_range(1..=cap) };
                let mut order = u.clone();
                order.shuffle(&mut rng);
                let hi: Vec<u32> = order[..size].to_vec();
                let lo: Vec<u32> = hi.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
                (self.label(IndexSet::new(lo)), self.label(IndexSet::new(hi)))
            })
            .collect()
    }
}
