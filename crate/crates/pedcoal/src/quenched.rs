//! Gene lineages traced backwards through one fixed pedigree.
//!
//! Every ancestral gene sits at a [`GenePosition`]. One step moves it to a
//! Mendelian coin's chromosome of its parent of record; genes that meet stay
//! together. Loci on the same pedigree differ only in their coin streams.

pub mod oracle;

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::partitions::{Block, GroupedPartition, Partition};
use crate::pedigree::{Pedigree, PedigreeSlice};
use crate::rng::{stream, Purpose, Stream};

/// Chromosome `0` or `1` of an individual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GenePosition {
    pub chromosome: u8,
    pub individual: u32,
}

impl GenePosition {
    pub fn new(chromosome: u8, individual: u32) -> Self {
        GenePosition { chromosome, individual }
    }

    fn key(&self) -> (u32, u8) {
        (self.individual, self.chromosome)
    }
}

impl fmt::Display for GenePosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.chromosome, self.individual + 1)
    }
}

/// Distinct ancestral genes of a sample of `n`, each with the sample labels it carries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LineageSet {
    n: usize,
    population: usize,
    generation: u64,
    /// Sorted by (individual, chromosome); positions are pairwise distinct.
    classes: Vec<(GenePosition, Block)>,
}

impl LineageSet {
    /// Place the blocks of `xi0`: pair `k` goes to chromosomes 0 and 1 of
    /// individual `k`, the remaining blocks to chromosome 0 of fresh individuals.
    pub fn init_sample(xi0: &GroupedPartition, population: usize) -> Result<Self> {
        let p = xi0.partition();
        let needed = p.len() - xi0.x();
        if needed > population {
            return Err(Error::Input(format!(
                "sample needs {needed} individuals but the population has {population}"
            )));
        }
        let mut paired = vec![false; p.len()];
        let mut classes = Vec::with_capacity(p.len());
        for (k, &(a, b)) in xi0.pairs().iter().enumerate() {
            classes.push((GenePosition::new(0, k as u32), p.blocks()[a].clone()));
            classes.push((GenePosition::new(1, k as u32), p.blocks()[b].clone()));
            paired[a] = true;
            paired[b] = true;
        }
        let mut next = xi0.x() as u32;
        for (k, blk) in p.blocks().iter().enumerate() {
            if !paired[k] {
                classes.push((GenePosition::new(0, next), blk.clone()));
                next += 1;
            }
        }
        classes.sort_by_key(|c| c.0.key());
        Ok(LineageSet { n: p.n(), population, generation: 0, classes })
    }

    /// Build from explicit positions of the sample labels; equal positions form one class.
    pub fn from_positions(positions: &[GenePosition], population: usize) -> Result<Self> {
        if let Some(p) = positions.iter().find(|p| p.individual as usize >= population || p.chromosome > 1) {
            return Err(Error::Input(format!("position {p} outside the population of {population}")));
        }
        let n = positions.len();
        let mut classes: Vec<(GenePosition, Block)> = Vec::new();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| positions[i].key());
        for i in order {
            match classes.last_mut() {
                Some(c) if c.0 == positions[i] => c.1.insert(i),
                _ => classes.push((positions[i], Block::singleton(n, i))),
            }
        }
        Ok(LineageSet { n, population, generation: 0, classes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Number of distinct ancestral genes.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[(GenePosition, Block)] {
        &self.classes
    }

    /// Position of every sample label (with repeats once coalesced).
    pub fn positions(&self) -> Vec<GenePosition> {
        let mut out = vec![GenePosition::new(0, 0); self.n];
        for (pos, blk) in &self.classes {
            for e in blk.iter() {
                out[e] = *pos;
            }
        }
        out
    }

    /// One generation back: one coin per distinct gene. Returns whether any genes met.
    pub fn step<R: Rng + ?Sized>(&mut self, slice: &PedigreeSlice, rng: &mut R) -> bool {
        debug_assert_eq!(slice.n(), self.population);
        for (pos, _) in self.classes.iter_mut() {
            let parent = slice.parent(pos.chromosome, pos.individual as usize);
            *pos = GenePosition::new(rng.random::<bool>() as u8, parent);
        }
        self.generation += 1;
        self.settle()
    }

    /// Step with explicit coins, one per class in current order.
    pub fn step_with(&mut self, slice: &PedigreeSlice, coins: &[bool]) -> bool {
        for ((pos, _), &c) in self.classes.iter_mut().zip(coins) {
            let parent = slice.parent(pos.chromosome, pos.individual as usize);
            *pos = GenePosition::new(c as u8, parent);
        }
        self.generation += 1;
        self.settle()
    }

    fn settle(&mut self) -> bool {
        self.classes.sort_by_key(|c| c.0.key());
        let before = self.classes.len();
        let mut out: Vec<(GenePosition, Block)> = Vec::with_capacity(before);
        for (pos, blk) in self.classes.drain(..) {
            match out.last_mut() {
                Some(c) if c.0 == pos => c.1.union_with(&blk),
                _ => out.push((pos, blk)),
            }
        }
        self.classes = out;
        self.classes.len() < before
    }

    /// The partition of the sample into ancestral genes.
    pub fn partition(&self) -> Partition {
        Partition::from_blocks_unchecked(self.n, self.classes.iter().map(|c| c.1.clone()).collect())
    }

    /// The state as a grouped partition: genes sharing an individual are paired.
    pub fn state(&self) -> GroupedPartition {
        let p = self.partition();
        let index_of = |blk: &Block| p.block_of(blk.least().expect("nonempty class"));
        let pairs = self
            .classes
            .windows(2)
            .filter(|w| w[0].0.individual == w[1].0.individual)
            .map(|w| (index_of(&w[0].1), index_of(&w[1].1)))
            .collect();
        GroupedPartition::new(p, pairs).expect("classes in one individual occupy distinct chromosomes")
    }
}

/// A coalescence event: the generation it happened and the partition after it.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeEvent {
    pub generation: u64,
    pub time: f64,
    pub state: Partition,
}

/// Jump history of the ancestral partition of one locus.
#[derive(Clone, Debug, PartialEq)]
pub struct GenealogyTree {
    pub initial: Partition,
    pub events: Vec<TreeEvent>,
    /// Last generation looked at.
    pub end_generation: u64,
    /// Time scale: rescaled time is `generation * c_n`.
    pub c_n: f64,
    /// Stopped at the horizon before reaching a single ancestor.
    pub censored: bool,
}

impl GenealogyTree {
    pub fn n(&self) -> usize {
        self.initial.n()
    }

    pub fn final_state(&self) -> &Partition {
        self.events.last().map_or(&self.initial, |e| &e.state)
    }

    /// Generation at which a single ancestor is reached.
    pub fn mrca_generation(&self) -> Option<u64> {
        if self.initial.len() <= 1 {
            return Some(0);
        }
        self.events.last().filter(|e| e.state.len() == 1).map(|e| e.generation)
    }

    pub fn mrca_time(&self) -> Option<f64> {
        self.mrca_generation().map(|g| g as f64 * self.c_n)
    }

    /// Generation at which labels `i` and `j` first share an ancestor.
    pub fn pair_generation(&self, i: usize, j: usize) -> Option<u64> {
        if self.initial.block_of(i) == self.initial.block_of(j) {
            return Some(0);
        }
        self.events.iter().find(|e| e.state.block_of(i) == e.state.block_of(j)).map(|e| e.generation)
    }

    /// Rescaled coalescence times of all pairs `i < j`, `None` when censored.
    pub fn pair_times(&self) -> Vec<Option<f64>> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.pair_generation(i, j).map(|g| g as f64 * self.c_n));
            }
        }
        out
    }

    /// `(rescaled time, state after)` for every event.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, &Partition)> + '_ {
        self.events.iter().map(|e| (e.time, &e.state))
    }

    /// Line format: a header `n <n> c_n <c> end <g> censored <bool> initial <partition>`,
    /// then one `generation time merges` line per event, where merges lists the
    /// groups of previous blocks that merged, e.g. `{1}+{3,4} {2}+{5}`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "n {} c_n {} end {} censored {} initial {}",
            self.n(),
            self.c_n,
            self.end_generation,
            self.censored,
            self.initial
        )?;
        let mut prev = &self.initial;
        for e in &self.events {
            let groups = prev.grouping_in(&e.state).expect("events coarsen");
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); e.state.len()];
            for (k, g) in groups.into_iter().enumerate() {
                members[g].push(k);
            }
            let text: Vec<String> = members
                .iter()
                .filter(|m| m.len() > 1)
                .map(|m| m.iter().map(|&k| block_text(&prev.blocks()[k])).collect::<Vec<_>>().join("+"))
                .collect();
            writeln!(w, "{}\t{}\t{}", e.generation, e.time, text.join(" "))?;
            prev = &e.state;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Input("empty tree file".into()))??;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 10 || f[0] != "n" || f[2] != "c_n" || f[4] != "end" || f[6] != "censored" || f[8] != "initial" {
            return Err(Error::Input(format!("bad tree header: {header}")));
        }
        let bad = |s: &str| Error::Input(format!("bad tree field: {s}"));
        let n: usize = f[1].parse().map_err(|_| bad(f[1]))?;
        let c_n: f64 = f[3].parse().map_err(|_| bad(f[3]))?;
        let end_generation: u64 = f[5].parse().map_err(|_| bad(f[5]))?;
        let censored: bool = f[7].parse().map_err(|_| bad(f[7]))?;
        let initial: Partition = f[9].parse()?;
        if initial.n() != n {
            return Err(bad(f[9]));
        }
        let mut events = Vec::new();
        let mut state = initial.clone();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(g), Some(t), Some(m)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(bad(&line));
            };
            let generation: u64 = g.parse().map_err(|_| bad(g))?;
            let time: f64 = t.parse().map_err(|_| bad(t))?;
            let mut groups: Vec<Vec<usize>> = Vec::new();
            for group in m.split_whitespace() {
                let mut idx = Vec::new();
                for blk in group.split('+') {
                    let elems = parse_block(blk).ok_or_else(|| bad(blk))?;
                    let k = state.block_of(*elems.first().ok_or_else(|| bad(blk))?);
                    if state.blocks()[k].iter().collect::<Vec<_>>() != elems {
                        return Err(bad(blk));
                    }
                    idx.push(k);
                }
                groups.push(idx);
            }
            state = state.merge_groups(&groups);
            events.push(TreeEvent { generation, time, state: state.clone() });
        }
        Ok(GenealogyTree { initial, events, end_generation, c_n, censored })
    }
}

fn block_text(b: &Block) -> String {
    let v: Vec<String> = b.iter().map(|e| (e + 1).to_string()).collect();
    format!("{{{}}}", v.join(","))
}

fn parse_block(s: &str) -> Option<Vec<usize>> {
    let inner = s.strip_prefix('{')?.strip_suffix('}')?;
    inner.split(',').map(|x| x.trim().parse::<usize>().ok().filter(|&v| v >= 1).map(|v| v - 1)).collect()
}

/// How far to run a locus.
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Pair coalescence probability used for rescaled time.
    pub c_n: f64,
    /// Maximum number of generations.
    pub horizon: u64,
    /// Stop once a single ancestor remains; stopping earlier marks the tree censored.
    pub stop_at_mrca: bool,
    /// Generations at which to record the state.
    pub record_at: Vec<u64>,
}

impl RunOptions {
    /// Run to the MRCA with the default horizon of `50 / c_N` generations.
    pub fn to_mrca(c_n: f64) -> Self {
        RunOptions { c_n, horizon: default_horizon(c_n), stop_at_mrca: true, record_at: Vec::new() }
    }
}

/// `ceil(50 / c_N)` generations.
pub fn default_horizon(c_n: f64) -> u64 {
    (50.0 / c_n).ceil() as u64
}

/// One locus: its genealogy and the states at the requested generations.
#[derive(Clone, Debug)]
pub struct LocusRun {
    pub tree: GenealogyTree,
    pub trajectory: Vec<(u64, GroupedPartition)>,
}

struct Walker {
    lineages: LineageSet,
    tree: GenealogyTree,
    trajectory: Vec<(u64, GroupedPartition)>,
    record: std::iter::Peekable<std::vec::IntoIter<u64>>,
    rng: Stream,
    done: bool,
}

impl Walker {
    fn new(lineages: LineageSet, opts: &RunOptions, rng: Stream) -> Self {
        let mut record = opts.record_at.clone();
        record.sort_unstable();
        record.dedup();
        let mut w = Walker {
            tree: GenealogyTree {
                initial: lineages.partition(),
                events: Vec::new(),
                end_generation: 0,
                c_n: opts.c_n,
                censored: false,
            },
            lineages,
            trajectory: Vec::new(),
            record: record.into_iter().peekable(),
            rng,
            done: false,
        };
        w.observe(opts);
        w
    }

    fn observe(&mut self, opts: &RunOptions) {
        let g = self.lineages.generation();
        while self.record.next_if(|&r| r <= g).is_some() {
            self.trajectory.push((g, self.lineages.state()));
        }
        let finished = opts.stop_at_mrca && self.lineages.len() <= 1 && self.record.peek().is_none();
        if finished || g >= opts.horizon {
            self.done = true;
            self.tree.end_generation = g;
            self.tree.censored = opts.stop_at_mrca && self.lineages.len() > 1;
        }
    }

    fn advance(&mut self, slice: &PedigreeSlice, opts: &RunOptions) {
        if self.lineages.step(slice, &mut self.rng) {
            let g = self.lineages.generation();
            self.tree.events.push(TreeEvent { generation: g, time: g as f64 * opts.c_n, state: self.lineages.partition() });
        }
        self.observe(opts);
    }

    fn finish(self) -> LocusRun {
        LocusRun { tree: self.tree, trajectory: self.trajectory }
    }
}

/// Coin stream of locus `locus` on the pedigree with seed `pedigree_seed`.
pub fn locus_stream(seed: u64, pedigree_seed: u64, locus: u64) -> Stream {
    stream(seed, Purpose::Locus, pedigree_seed, locus)
}

/// Trace one locus through `pedigree` with coins from `rng`.
pub fn run_locus(pedigree: &Pedigree, xi0: &GroupedPartition, opts: &RunOptions, rng: Stream) -> Result<LocusRun> {
    let mut w = Walker::new(LineageSet::init_sample(xi0, pedigree.n())?, opts, rng);
    let mut g = 0;
    while !w.done {
        w.advance(&pedigree.slice(g), opts);
        g += 1;
    }
    Ok(w.finish())
}

/// Trace several loci through one pedigree in lockstep: each generation's slice is
/// built once. Locus `l` uses [`locus_stream`]`(seed, pedigree.seed(), l)`, so the
/// result equals running each locus alone.
pub fn run_loci(
    pedigree: &Pedigree,
    xi0: &GroupedPartition,
    loci: impl IntoIterator<Item = u64>,
    opts: &RunOptions,
    seed: u64,
) -> Result<Vec<LocusRun>> {
    let start = LineageSet::init_sample(xi0, pedigree.n())?;
    let mut walkers: Vec<Walker> = loci
        .into_iter()
        .map(|l| Walker::new(start.clone(), opts, locus_stream(seed, pedigree.seed(), l)))
        .collect();
    let mut g = 0;
    while walkers.iter().any(|w| !w.done) {
        let slice = pedigree.slice(g);
        for w in walkers.iter_mut().filter(|w| !w.done) {
            w.advance(&slice, opts);
        }
        g += 1;
    }
    Ok(walkers.into_iter().map(Walker::finish).collect())
}

/// Write `generation<TAB>state` lines.
pub fn write_trajectory<W: Write>(mut w: W, trajectory: &[(u64, GroupedPartition)]) -> Result<()> {
    for (g, s) in trajectory {
        writeln!(w, "{g}\t{s}")?;
    }
    Ok(())
}
