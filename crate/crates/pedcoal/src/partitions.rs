//! Partitions of `[n]` and their grouped (diploid) variant.
//!
//! Leaf labels are `0..n` in code and `1..=n` in the text format
//! (`"{1,3|2}"`). Blocks are bitsets: one inline word covers `n <= 64`,
//! larger `n` spills to the heap behind the same API.

use std::fmt;
use std::str::FromStr;

use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

/// A set of leaf labels.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Block {
    words: SmallVec<[u64; 1]>,
}

impl Block {
    pub fn empty(n: usize) -> Self {
        Block { words: smallvec![0; n.div_ceil(64)] }
    }

    pub fn singleton(n: usize, e: usize) -> Self {
        let mut b = Block::empty(n);
        b.insert(e);
        b
    }

    pub fn from_elems(n: usize, elems: &[usize]) -> Self {
        let mut b = Block::empty(n);
        for &e in elems {
            b.insert(e);
        }
        b
    }

    #[inline]
    pub fn insert(&mut self, e: usize) {
        self.words[e / 64] |= 1 << (e % 64);
    }

    #[inline]
    pub fn contains(&self, e: usize) -> bool {
        self.words.get(e / 64).is_some_and(|w| w >> (e % 64) & 1 == 1)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Smallest element.
    pub fn least(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn union_with(&mut self, other: &Block) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn intersects(&self, other: &Block) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &Block) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// Elements in increasing order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let t = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(i * 64 + t)
            })
        })
    }

    fn restricted(&self, m: usize) -> Block {
        let mut b = Block::empty(m);
        for (i, w) in b.words.iter_mut().enumerate() {
            *w = self.words[i];
        }
        if m % 64 != 0 {
            if let Some(last) = b.words.last_mut() {
                *last &= (1u64 << (m % 64)) - 1;
            }
        }
        b
    }
}

/// A partition of `[n]` in canonical order: blocks sorted by least element.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Partition {
    n: usize,
    blocks: Vec<Block>,
}

impl Partition {
    /// Build from explicit blocks of 0-based labels; validates and canonicalizes.
    pub fn new(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = Block::empty(n);
        let mut out = Vec::with_capacity(blocks.len());
        for b in blocks {
            if b.is_empty() {
                return Err(Error::Partition("empty block".into()));
            }
            let mut blk = Block::empty(n);
            for e in b {
                if e >= n {
                    return Err(Error::Partition(format!("label {} outside [{}]", e + 1, n)));
                }
                if seen.contains(e) {
                    return Err(Error::Partition(format!("label {} appears twice", e + 1)));
                }
                seen.insert(e);
                blk.insert(e);
            }
            out.push(blk);
        }
        if seen.len() != n {
            return Err(Error::Partition("blocks do not cover [n]".into()));
        }
        Ok(Partition::from_blocks_unchecked(n, out))
    }

    pub(crate) fn from_blocks_unchecked(n: usize, mut blocks: Vec<Block>) -> Self {
        blocks.sort_unstable_by_key(|b| b.least());
        Partition { n, blocks }
    }

    /// Elements with equal labels share a block.
    pub fn from_labels<T: Ord + Copy>(labels: &[T]) -> Self {
        let n = labels.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by_key(|&i| (labels[i], i));
        let mut blocks: Vec<Block> = Vec::new();
        let mut prev: Option<T> = None;
        for i in idx {
            if prev != Some(labels[i]) {
                blocks.push(Block::empty(n));
                prev = Some(labels[i]);
            }
            blocks.last_mut().unwrap().insert(i);
        }
        Partition::from_blocks_unchecked(n, blocks)
    }

    /// All singletons, the coalescent's starting state.
    pub fn singletons(n: usize) -> Self {
        Partition { n, blocks: (0..n).map(|e| Block::singleton(n, e)).collect() }
    }

    /// The single block `[n]`.
    pub fn one_block(n: usize) -> Self {
        if n == 0 {
            return Partition { n, blocks: vec![] };
        }
        let mut b = Block::empty(n);
        for e in 0..n {
            b.insert(e);
        }
        Partition { n, blocks: vec![b] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of blocks.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Block::len).collect()
    }

    pub fn is_singletons(&self) -> bool {
        self.blocks.len() == self.n
    }

    /// Index of the block holding `e`.
    pub fn block_of(&self, e: usize) -> usize {
        self.blocks.iter().position(|b| b.contains(e)).expect("label in range")
    }

    /// Block lists as 0-based labels.
    pub fn to_vecs(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| b.iter().collect()).collect()
    }

    /// Merge each group of block indices into one block. Indices `>= len()` are ignored.
    pub fn merge_groups<G: AsRef<[usize]>>(&self, groups: &[G]) -> Partition {
        let b = self.blocks.len();
        let mut target: Vec<usize> = (0..b).collect();
        for g in groups {
            let g = g.as_ref();
            let Some(&root) = g.iter().filter(|&&i| i < b).min() else { continue };
            for &i in g {
                if i < b {
                    target[i] = root;
                }
            }
        }
        let mut merged: Vec<Option<Block>> = self.blocks.iter().cloned().map(Some).collect();
        for i in 0..b {
            let t = target[i];
            if t != i {
                let blk = merged[i].take().unwrap();
                merged[t].as_mut().unwrap().union_with(&blk);
            }
        }
        Partition::from_blocks_unchecked(self.n, merged.into_iter().flatten().collect())
    }

    /// Merge blocks `i` and `j`.
    pub fn merge_pair(&self, i: usize, j: usize) -> Partition {
        self.merge_groups(&[[i, j]])
    }

    /// The `alpha`-coagulator: blocks of `self` whose indices share a block of `alpha` merge.
    pub fn coagulate(&self, alpha: &Partition) -> Partition {
        let b = self.blocks.len();
        let groups: Vec<Vec<usize>> = alpha
            .blocks
            .iter()
            .map(|a| a.iter().take_while(|&i| i < b).collect::<Vec<_>>())
            .filter(|g| g.len() >= 2)
            .collect();
        self.merge_groups(&groups)
    }

    /// Whether every block of `self` lies inside a block of `coarse`.
    pub fn is_finer_than(&self, coarse: &Partition) -> bool {
        self.n == coarse.n
            && self
                .blocks
                .iter()
                .all(|b| coarse.blocks.iter().any(|c| b.is_subset(c)))
    }

    /// For a coarsening `eta` of `self`: which block of `eta` each block of `self` falls in.
    pub fn grouping_in(&self, eta: &Partition) -> Option<Vec<usize>> {
        if self.n != eta.n {
            return None;
        }
        self.blocks
            .iter()
            .map(|b| eta.blocks.iter().position(|c| b.is_subset(c)))
            .collect()
    }

    /// `eta` is `self` with exactly two blocks merged.
    pub fn is_pair_coalescence(&self, eta: &Partition) -> bool {
        eta.len() + 1 == self.len() && self.is_finer_than(eta)
    }

    /// Trace on `[m]`.
    pub fn restrict(&self, m: usize) -> Result<Partition> {
        if m == 0 || m > self.n {
            return Err(Error::Partition(format!("restriction to [{m}] of a partition of [{}]", self.n)));
        }
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.restricted(m))
            .filter(|b| !b.is_empty())
            .collect();
        Ok(Partition::from_blocks_unchecked(m, blocks))
    }

    /// Every coarsening of `self` (including itself), by grouping block indices.
    pub fn coarsenings(&self) -> Vec<Partition> {
        set_partitions(self.len()).into_iter().map(|alpha| self.coagulate(&alpha)).collect()
    }
}

/// All partitions of `[b]`, each in canonical form.
pub fn set_partitions(b: usize) -> Vec<Partition> {
    // restricted growth strings
    let mut out = Vec::new();
    let mut rgs = vec![0usize; b];
    fn rec(i: usize, maxv: usize, rgs: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if i == rgs.len() {
            out.push(Partition::from_labels(rgs));
            return;
        }
        for v in 0..=maxv + 1 {
            rgs[i] = v;
            rec(i + 1, maxv.max(v), rgs, out);
        }
    }
    if b == 0 {
        return vec![Partition::singletons(0)];
    }
    rec(1, 0, &mut rgs, &mut out);
    out
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, b) in self.blocks.iter().enumerate() {
            if k > 0 {
                write!(f, "|")?;
            }
            write_block(f, b)?;
        }
        write!(f, "}}")
    }
}

fn write_block(f: &mut fmt::Formatter<'_>, b: &Block) -> fmt::Result {
    for (k, e) in b.iter().enumerate() {
        if k > 0 {
            write!(f, ",")?;
        }
        write!(f, "{}", e + 1)?;
    }
    Ok(())
}

fn parse_block(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(v) if v >= 1 => Ok(v - 1),
            _ => Err(Error::Partition(format!("bad label {t:?}"))),
        })
        .collect()
}

impl FromStr for Partition {
    type Err = Error;

    /// `"{1,3|2}"`; `n` is the largest label.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| Error::Partition(format!("expected {{...}}, got {s:?}")))?;
        if inner.trim().is_empty() {
            return Ok(Partition::singletons(0));
        }
        let blocks = inner.split('|').map(parse_block).collect::<Result<Vec<_>>>()?;
        let n = blocks.iter().flatten().max().map_or(0, |m| m + 1);
        Partition::new(n, blocks)
    }
}

/// A partition whose blocks may additionally be paired: two blocks in one
/// pair sit on the two chromosomes of one diploid individual.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct GroupedPartition {
    partition: Partition,
    pairs: Vec<(usize, usize)>,
}

impl GroupedPartition {
    /// `pairs` are block indices of the canonical `partition`.
    pub fn new(partition: Partition, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let b = partition.len();
        let mut used = vec![false; b];
        let mut norm = Vec::with_capacity(pairs.len());
        for (i, j) in pairs {
            let (i, j) = (i.min(j), i.max(j));
            if i == j || j >= b {
                return Err(Error::Partition(format!("bad pair ({}, {})", i + 1, j + 1)));
            }
            if used[i] || used[j] {
                return Err(Error::Partition("block paired twice".into()));
            }
            used[i] = true;
            used[j] = true;
            norm.push((i, j));
        }
        norm.sort_unstable();
        Ok(GroupedPartition { partition, pairs: norm })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Number of pairs.
    pub fn x(&self) -> usize {
        self.pairs.len()
    }

    /// Erase the pairing.
    pub fn complete_dispersion(&self) -> Partition {
        self.partition.clone()
    }

    pub fn is_dispersed(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl From<Partition> for GroupedPartition {
    fn from(p: Partition) -> Self {
        GroupedPartition { partition: p, pairs: vec![] }
    }
}

impl fmt::Display for GroupedPartition {
    /// Paired blocks are wrapped in parentheses: `"{(1|2),4|3}"`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks = self.partition.blocks();
        let partner: Vec<Option<usize>> = (0..blocks.len())
            .map(|k| self.pairs.iter().find_map(|&(i, j)| (i == k).then_some(j).or((j == k).then_some(i))))
            .collect();
        write!(f, "{{")?;
        let mut first = true;
        for (k, b) in blocks.iter().enumerate() {
            if partner[k].is_some_and(|p| p < k) {
                continue;
            }
            if !first {
                write!(f, "|")?;
            }
            first = false;
            match partner[k] {
                Some(p) => {
                    write!(f, "(")?;
                    write_block(f, b)?;
                    write!(f, "|")?;
                    write_block(f, &blocks[p])?;
                    write!(f, ")")?;
                }
                None => write_block(f, b)?,
            }
        }
        write!(f, "}}")
    }
}
