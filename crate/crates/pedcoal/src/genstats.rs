//! Branch-length spectra, site-frequency spectra and the split of the variance
//! of the total tree length into within- and between-pedigree parts.
//!
//! The δ-model lives here too: a pedigree is just a list of times of large
//! families, at which every block joins chromosome A or B of the successful
//! parent with probability `psi / 4` each.

use std::io::Write;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::limit::CoalescentRun;
use crate::partitions::Partition;
use crate::quenched::GenealogyTree;
use crate::rng::{stream, Purpose, Stream};
use crate::stats::MeanVar;

/// Anything with a jump history of partitions.
pub trait Genealogy {
    fn initial(&self) -> &Partition;
    /// `(time, state after)` in time order.
    fn jump_list(&self) -> Vec<(f64, &Partition)>;
    /// End of observation when the run did not reach a single block.
    fn censored_at(&self) -> Option<f64>;
}

impl Genealogy for CoalescentRun {
    fn initial(&self) -> &Partition {
        &self.initial
    }

    fn jump_list(&self) -> Vec<(f64, &Partition)> {
        self.jumps.iter().map(|(t, p)| (*t, p)).collect()
    }

    fn censored_at(&self) -> Option<f64> {
        self.censored.then_some(self.end_time)
    }
}

impl Genealogy for GenealogyTree {
    fn initial(&self) -> &Partition {
        &self.initial
    }

    fn jump_list(&self) -> Vec<(f64, &Partition)> {
        self.jumps().collect()
    }

    fn censored_at(&self) -> Option<f64> {
        self.censored.then_some(self.end_generation as f64 * self.c_n)
    }
}

/// `l[i - 1]`: total length of branches subtending exactly `i` of the `n` leaves.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchSpectrum {
    pub l: Vec<f64>,
    pub t_total: f64,
    pub censored: bool,
}

impl BranchSpectrum {
    pub fn n(&self) -> usize {
        self.l.len() + 1
    }

    /// `L_i / T_total`.
    pub fn normalized(&self) -> Vec<f64> {
        self.l.iter().map(|x| x / self.t_total).collect()
    }

    /// Infinite-sites mutations at rate `theta / 2` per unit of branch length:
    /// `l[i]` becomes the number of sites carried by `i + 1` samples.
    pub fn mutate<R: Rng + ?Sized>(&self, theta: f64, rng: &mut R) -> BranchSpectrum {
        let l: Vec<f64> = self
            .l
            .iter()
            .map(|&x| if x > 0.0 { Poisson::new(theta / 2.0 * x).map_or(0.0, |d| d.sample(rng)) } else { 0.0 })
            .collect();
        BranchSpectrum { t_total: l.iter().sum(), l, censored: self.censored }
    }
}

/// Spectrum of a genealogy; censored runs give the spectrum up to the censoring time.
pub fn branch_spectrum<G: Genealogy + ?Sized>(run: &G) -> BranchSpectrum {
    let initial = run.initial();
    let n = initial.n();
    let mut l = vec![0.0; n.saturating_sub(1)];
    let mut add = |p: &Partition, dt: f64| {
        for b in p.blocks() {
            let s = b.len();
            if s < n {
                l[s - 1] += dt;
            }
        }
    };
    let mut t = 0.0;
    let mut state = initial;
    let jumps = run.jump_list();
    for (tj, p) in &jumps {
        add(state, tj - t);
        t = *tj;
        state = p;
    }
    let censored = run.censored_at();
    if let Some(end) = censored {
        add(state, end - t);
    }
    let t_total = l.iter().sum();
    BranchSpectrum { l, t_total, censored: censored.is_some() }
}

/// Running sums for the ratio estimator `sum L_i / sum T_total`.
#[derive(Clone, Debug)]
pub struct SfsAccumulator {
    sum_l: Vec<f64>,
    sum_l2: Vec<f64>,
    sum_lt: Vec<f64>,
    sum_t: f64,
    sum_t2: f64,
    loci: u64,
    censored: u64,
}

/// A normalized site-frequency spectrum with delta-method standard errors.
#[derive(Clone, Debug, Serialize)]
pub struct Sfs {
    pub proportions: Vec<f64>,
    pub stderr: Vec<f64>,
    pub loci: u64,
    pub censored: u64,
}

impl SfsAccumulator {
    pub fn new(n: usize) -> Self {
        let m = n.saturating_sub(1);
        SfsAccumulator {
            sum_l: vec![0.0; m],
            sum_l2: vec![0.0; m],
            sum_lt: vec![0.0; m],
            sum_t: 0.0,
            sum_t2: 0.0,
            loci: 0,
            censored: 0,
        }
    }

    /// Censored spectra are counted but left out.
    pub fn push(&mut self, s: &BranchSpectrum) {
        if s.censored {
            self.censored += 1;
            return;
        }
        for (i, &x) in s.l.iter().enumerate() {
            self.sum_l[i] += x;
            self.sum_l2[i] += x * x;
            self.sum_lt[i] += x * s.t_total;
        }
        self.sum_t += s.t_total;
        self.sum_t2 += s.t_total * s.t_total;
        self.loci += 1;
    }

    pub fn merge(&mut self, o: &SfsAccumulator) {
        for i in 0..self.sum_l.len() {
            self.sum_l[i] += o.sum_l[i];
            self.sum_l2[i] += o.sum_l2[i];
            self.sum_lt[i] += o.sum_lt[i];
        }
        self.sum_t += o.sum_t;
        self.sum_t2 += o.sum_t2;
        self.loci += o.loci;
        self.censored += o.censored;
    }

    pub fn loci(&self) -> u64 {
        self.loci
    }

    pub fn estimate(&self) -> Result<Sfs> {
        if self.loci == 0 {
            return Err(Error::Input("no uncensored genealogy to estimate the SFS from".into()));
        }
        let m = self.loci as f64;
        let tbar = self.sum_t / m;
        let proportions: Vec<f64> = self.sum_l.iter().map(|l| l / self.sum_t).collect();
        let stderr = proportions
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                if self.loci < 2 {
                    return f64::NAN;
                }
                let ss = self.sum_l2[i] - 2.0 * r * self.sum_lt[i] + r * r * self.sum_t2;
                (ss.max(0.0) / (m - 1.0) / m).sqrt() / tbar
            })
            .collect();
        Ok(Sfs { proportions, stderr, loci: self.loci, censored: self.censored })
    }
}

/// Pooled SFS of a collection of spectra.
pub fn sfs_estimate<'a>(spectra: impl IntoIterator<Item = &'a BranchSpectrum>) -> Result<Sfs> {
    let mut it = spectra.into_iter().peekable();
    let n = it.peek().map(|s| s.n()).ok_or_else(|| Error::Input("no spectra".into()))?;
    let mut acc = SfsAccumulator::new(n);
    for s in it {
        acc.push(s);
    }
    acc.estimate()
}

/// Kingman expectation: `SFS_i = (1/i) / H_{n-1}`.
pub fn kingman_sfs(n: usize) -> Vec<f64> {
    let h: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    (1..n).map(|i| 1.0 / i as f64 / h).collect()
}

/// Total variation distance between two spectra.
pub fn sfs_distance(a: &[f64], b: &[f64]) -> f64 {
    crate::stats::total_variation(a, b)
}

/// Time scale of the δ-model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DeltaMode {
    /// Large families at rate `lambda`, Kingman pair rate 1.
    Finite { lambda: f64 },
    /// Large families at rate 1 and no Kingman component: the `lambda -> infinity`
    /// limit in units of the event rate.
    Limit,
}

/// The δ-model with a Kingman component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaModel {
    pub psi: f64,
    pub mode: DeltaMode,
}

impl DeltaModel {
    pub fn new(psi: f64, mode: DeltaMode) -> Result<Self> {
        if !(psi > 0.0 && psi <= 1.0) {
            return param(format!("psi must lie in (0, 1], got {psi}"));
        }
        if let DeltaMode::Finite { lambda } = mode {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return param(format!("lambda must be positive, got {lambda}"));
            }
        }
        Ok(DeltaModel { psi, mode })
    }

    /// `lambda = inf` gives the limit mode.
    pub fn with_lambda(psi: f64, lambda: f64) -> Result<Self> {
        let mode = if lambda == f64::INFINITY { DeltaMode::Limit } else { DeltaMode::Finite { lambda } };
        DeltaModel::new(psi, mode)
    }

    pub fn event_rate(&self) -> f64 {
        match self.mode {
            DeltaMode::Finite { lambda } => lambda,
            DeltaMode::Limit => 1.0,
        }
    }

    pub fn kingman_rate(&self) -> f64 {
        match self.mode {
            DeltaMode::Finite { .. } => 1.0,
            DeltaMode::Limit => 0.0,
        }
    }

    /// Probability that an event merges something among `b` blocks.
    pub fn effective_prob(&self, b: usize) -> f64 {
        let p = self.psi / 4.0;
        let e = 1.0 - 2.0 * p;
        let b = b as i32;
        let none = e.powi(b) + 2.0 * b as f64 * p * e.powi(b - 1) + (b * (b - 1)) as f64 * p * p * e.powi((b - 2).max(0));
        if b < 2 {
            0.0
        } else {
            (1.0 - none).clamp(0.0, 1.0)
        }
    }
}

const CHUNK: u64 = 1024;

/// Event times of one δ-pedigree, generated lazily in fixed chunks so that a time
/// does not depend on how far the pedigree has been read.
#[derive(Clone, Debug)]
pub struct EventTimes {
    seed: u64,
    pedigree: u64,
    rate: f64,
    times: Vec<f64>,
}

impl EventTimes {
    pub fn new(seed: u64, pedigree: u64, rate: f64) -> Self {
        EventTimes { seed, pedigree, rate, times: Vec::new() }
    }

    fn grow(&mut self) {
        let chunk = self.times.len() as u64 / CHUNK;
        let mut rng = stream(self.seed, Purpose::EventTimes, self.pedigree, chunk);
        let mut t = self.times.last().copied().unwrap_or(0.0);
        for _ in 0..CHUNK {
            let e: f64 = Exp1.sample(&mut rng);
            t += e / self.rate;
            self.times.push(t);
        }
    }

    /// Time of event `k` (0-based).
    pub fn get(&mut self, k: usize) -> f64 {
        while self.times.len() <= k {
            self.grow();
        }
        self.times[k]
    }

    /// Index of the first event after `t`, starting the search at `from`.
    pub fn first_after(&mut self, t: f64, from: usize) -> usize {
        while self.times.last().is_none_or(|&last| last <= t) {
            self.grow();
        }
        from + self.times[from..].partition_point(|&s| s <= t)
    }
}

/// Direct simulation of one locus: every event visits every block.
pub fn delta_model_locus<R: Rng + ?Sized>(
    model: &DeltaModel,
    events: &mut EventTimes,
    n: usize,
    rng: &mut R,
) -> CoalescentRun {
    let p = model.psi / 4.0;
    let mut state = Partition::singletons(n);
    let mut jumps = Vec::new();
    let mut t = 0.0;
    let mut k = 0;
    while state.len() > 1 {
        let b = state.len();
        let kr = model.kingman_rate() * (b * (b - 1) / 2) as f64;
        let tk = if kr > 0.0 { t + { let e: f64 = Exp1.sample(rng); e } / kr } else { f64::INFINITY };
        let te = events.get(k);
        if tk < te {
            t = tk;
            let i = rng.random_range(0..b);
            let mut j = rng.random_range(0..b - 1);
            if j >= i {
                j += 1;
            }
            state = state.merge_pair(i, j);
            jumps.push((t, state.clone()));
            continue;
        }
        t = te;
        k += 1;
        let (mut a, mut bb) = (Vec::new(), Vec::new());
        for blk in 0..b {
            let u: f64 = rng.random();
            if u < p {
                a.push(blk);
            } else if u < 2.0 * p {
                bb.push(blk);
            }
        }
        if a.len() > 1 || bb.len() > 1 {
            state = state.merge_groups(&[a, bb]);
            jumps.push((t, state.clone()));
        }
    }
    CoalescentRun { initial: Partition::singletons(n), jumps, samples: Vec::new(), c: model.kingman_rate(), end_time: t, censored: false }
}

/// `X ~ Binomial(m, p)` conditioned on `X >= 2`.
fn binomial_at_least_two<R: Rng + ?Sized>(m: u64, p: f64, rng: &mut R) -> u64 {
    let q = 1.0 - p;
    let p0 = q.powi(m as i32);
    let p1 = m as f64 * p * q.powi(m as i32 - 1);
    let tail = 1.0 - p0 - p1;
    if tail > 0.3 {
        let bin = Binomial::new(m, p).expect("valid binomial");
        loop {
            let x = bin.sample(rng);
            if x >= 2 {
                return x;
            }
        }
    }
    // inverse cdf from 2 upwards
    let mut u = rng.random::<f64>() * tail;
    let mut pk = m as f64 * (m as f64 - 1.0) / 2.0 * p * p * q.powi(m as i32 - 2);
    let mut k = 2;
    while k < m && u >= pk {
        u -= pk;
        pk *= (m - k) as f64 / (k + 1) as f64 * p / q;
        k += 1;
    }
    k
}

/// Group sizes `(a, b)` on chromosomes A and B at an event among `blocks` blocks,
/// conditioned on a merger.
fn effective_counts<R: Rng + ?Sized>(model: &DeltaModel, blocks: usize, rng: &mut R) -> (usize, usize) {
    let m = blocks as u64;
    let p = model.psi / 4.0;
    let e = 1.0 - 2.0 * p;
    // split {a >= 2} and {a <= 1, b >= 2}
    let q = 1.0 - p;
    let pa0 = q.powi(blocks as i32);
    let pa1 = blocks as f64 * p * q.powi(blocks as i32 - 1);
    let p_a2 = (1.0 - pa0 - pa1).max(0.0);
    let pb = p / q;
    let b_at_least_two = |m: u64| {
        let r = 1.0 - pb;
        (1.0 - r.powi(m as i32) - m as f64 * pb * r.powi(m as i32 - 1)).max(0.0)
    };
    let w0 = pa0 * b_at_least_two(m);
    let w1 = if m >= 1 { pa1 * b_at_least_two(m - 1) } else { 0.0 };
    let total = p_a2 + w0 + w1;
    let u = rng.random::<f64>() * total;
    let _ = e;
    if u < p_a2 {
        let a = binomial_at_least_two(m, p, rng);
        let rest = m - a;
        let b = if rest > 0 { Binomial::new(rest, pb).expect("valid").sample(rng) } else { 0 };
        (a as usize, b as usize)
    } else {
        let a = if u < p_a2 + w0 { 0 } else { 1 };
        let b = binomial_at_least_two(m - a, pb, rng);
        (a as usize, b as usize)
    }
}

/// Block sizes with per-size counts, for fast spectrum accumulation.
struct SizeState {
    sizes: Vec<u32>,
    count: Vec<u32>,
    l: Vec<f64>,
    t: f64,
}

impl SizeState {
    fn new(n: usize) -> Self {
        let mut count = vec![0; n + 1];
        count[1] = n as u32;
        SizeState { sizes: vec![1; n], count, l: vec![0.0; n.saturating_sub(1)], t: 0.0 }
    }

    fn advance(&mut self, t: f64) {
        let dt = t - self.t;
        let n = self.l.len() + 1;
        for s in 1..n {
            if self.count[s] > 0 {
                self.l[s - 1] += self.count[s] as f64 * dt;
            }
        }
        self.t = t;
    }

    /// Merge a uniformly chosen group of `a` blocks and another of `b`.
    fn merge_random<R: Rng + ?Sized>(&mut self, a: usize, b: usize, rng: &mut R) {
        let len = self.sizes.len();
        let k = a + b;
        for i in 0..k {
            let j = rng.random_range(i..len);
            self.sizes.swap(i, j);
        }
        let mut merged = [0u32; 2];
        for (g, range) in [(0, 0..a), (1, a..k)] {
            if range.len() < 2 {
                continue;
            }
            for i in range {
                self.count[self.sizes[i] as usize] -= 1;
                merged[g] += self.sizes[i];
                self.sizes[i] = 0;
            }
        }
        self.sizes.retain(|&s| s > 0);
        for m in merged {
            if m > 0 {
                self.count[m as usize] += 1;
                self.sizes.push(m);
            }
        }
    }
}

/// Branch spectrum of one δ-model locus, skipping events that merge nothing.
pub fn delta_spectrum<R: Rng + ?Sized>(model: &DeltaModel, events: &mut EventTimes, n: usize, rng: &mut R) -> BranchSpectrum {
    let mut st = SizeState::new(n);
    let mut k = 0usize;
    while st.sizes.len() > 1 {
        let b = st.sizes.len();
        let q = model.effective_prob(b);
        let te = if q > 0.0 {
            let u = 1.0 - rng.random::<f64>();
            let skip = if q >= 1.0 { 0.0 } else { (u.ln() / (-q).ln_1p()).floor() };
            if skip < 1e15 {
                Some(k + skip as usize)
            } else {
                None
            }
        } else {
            None
        };
        let te_time = te.map_or(f64::INFINITY, |idx| events.get(idx));
        let kr = model.kingman_rate() * (b * (b - 1) / 2) as f64;
        let tk = if kr > 0.0 { st.t + { let e: f64 = Exp1.sample(rng); e } / kr } else { f64::INFINITY };
        if tk < te_time {
            st.advance(tk);
            st.merge_random(2, 0, rng);
            k = events.first_after(tk, k);
        } else {
            let idx = te.expect("an event or a Kingman merger happens");
            st.advance(te_time);
            let (a, bb) = effective_counts(model, b, rng);
            st.merge_random(a, bb, rng);
            k = idx + 1;
        }
    }
    let t_total = st.l.iter().sum();
    BranchSpectrum { l: st.l, t_total, censored: false }
}

/// Locus coin stream of the δ-model.
pub fn delta_locus_stream(seed: u64, pedigree: u64, locus: u64) -> Stream {
    stream(seed, Purpose::Locus, pedigree, locus)
}

/// Spectra of loci `loci` on δ-pedigree `pedigree`.
pub fn delta_pedigree_spectra(
    model: &DeltaModel,
    seed: u64,
    pedigree: u64,
    n: usize,
    loci: std::ops::Range<u64>,
) -> Vec<BranchSpectrum> {
    let mut events = EventTimes::new(seed, pedigree, model.event_rate());
    loci.map(|l| delta_spectrum(model, &mut events, n, &mut delta_locus_stream(seed, pedigree, l))).collect()
}

/// The variance of `T_total` split by the law of total variance.
#[derive(Clone, Debug, Serialize)]
pub struct VarianceDecomposition {
    pub psi: f64,
    pub total: f64,
    pub total_se: f64,
    pub within: f64,
    pub within_se: f64,
    /// `total - within`, clamped at 0.
    pub between: f64,
    /// Variance of per-pedigree means minus `within / L`.
    pub between_direct: f64,
    pub between_direct_se: f64,
    pub clamped: bool,
    pub pedigrees: u64,
    pub loci: u64,
    pub annealed_reps: u64,
}

impl VarianceDecomposition {
    pub fn within_fraction(&self) -> f64 {
        self.within / self.total
    }

    pub fn between_fraction(&self) -> f64 {
        self.between / self.total
    }
}

/// Pedigree ids used for the annealed replicates, disjoint from `0..P`.
pub const ANNEALED_BASE: u64 = 1 << 40;

/// `T_total` of loci `0..loci` on δ-pedigree `pedigree`.
pub fn pedigree_ttotals(model: &DeltaModel, n: usize, seed: u64, pedigree: u64, loci: u64) -> Vec<f64> {
    delta_pedigree_spectra(model, seed, pedigree, n, 0..loci).iter().map(|s| s.t_total).collect()
}

/// `T_total` of one locus on each of `reps` fresh pedigrees.
pub fn annealed_ttotals(model: &DeltaModel, n: usize, seed: u64, reps: u64) -> Vec<f64> {
    (0..reps).into_par_iter().map(|r| pedigree_ttotals(model, n, seed, ANNEALED_BASE + r, 1)[0]).collect()
}

/// Estimate both variance components for the δ-model.
///
/// `total` uses one locus on each of `annealed_reps` fresh pedigrees; `within` is
/// the mean over `pedigrees` pedigrees of the sample variance over `loci` loci.
pub fn variance_decomposition(
    model: &DeltaModel,
    n: usize,
    pedigrees: u64,
    loci: u64,
    annealed_reps: u64,
    seed: u64,
) -> Result<VarianceDecomposition> {
    if pedigrees < 2 || loci < 2 || annealed_reps < 2 {
        return param("variance decomposition needs at least 2 pedigrees, 2 loci and 2 annealed replicates");
    }
    let per: Vec<MeanVar> =
        (0..pedigrees).into_par_iter().map(|p| pedigree_ttotals(model, n, seed, p, loci).into_iter().collect()).collect();
    let annealed = annealed_ttotals(model, n, seed, annealed_reps);
    Ok(decompose(model.psi, &per, &annealed))
}

/// Combine per-pedigree locus statistics and annealed draws.
pub fn decompose(psi: f64, per_pedigree: &[MeanVar], annealed: &[f64]) -> VarianceDecomposition {
    let tot: MeanVar = annealed.iter().copied().collect();
    let r = annealed.len() as f64;
    let m4 = annealed.iter().map(|x| (x - tot.mean()).powi(4)).sum::<f64>() / r;
    let total = tot.var();
    let total_se = ((m4 - total * total * (r - 3.0) / (r - 1.0)) / r).max(0.0).sqrt();
    let vars: MeanVar = per_pedigree.iter().map(|m| m.var()).collect();
    let means: MeanVar = per_pedigree.iter().map(|m| m.mean()).collect();
    let loci = per_pedigree.first().map_or(0, |m| m.count());
    let within = vars.mean();
    let between_direct = means.var() - within / loci as f64;
    let raw = total - within;
    VarianceDecomposition {
        psi,
        total,
        total_se,
        within,
        within_se: vars.se(),
        between: raw.max(0.0),
        between_direct,
        between_direct_se: (2.0 / (means.count() as f64 - 1.0)).sqrt() * means.var(),
        clamped: raw < 0.0,
        pedigrees: per_pedigree.len() as u64,
        loci,
        annealed_reps: annealed.len() as u64,
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// One spectrum in `sfs.csv`.
#[derive(Clone, Debug)]
pub struct SfsRecord {
    pub psi: Option<f64>,
    pub lambda: Option<f64>,
    /// A pedigree index or `pooled`.
    pub pedigree_id: String,
    pub sfs: Sfs,
}

/// `sfs.csv`: `psi, lambda, pedigree_id, i, proportion, stderr`.
pub fn write_sfs_csv<W: Write>(w: W, rows: &[SfsRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["psi", "lambda", "pedigree_id", "i", "proportion", "stderr"])?;
    for r in rows {
        for (k, (p, se)) in r.sfs.proportions.iter().zip(&r.sfs.stderr).enumerate() {
            out.write_record([opt(r.psi), opt(r.lambda), r.pedigree_id.clone(), (k + 1).to_string(), p.to_string(), se.to_string()])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `ttotal.csv`: `psi, pedigree_id, locus_id, T_total`.
pub fn write_ttotal_csv<'a, W: Write>(w: W, rows: impl IntoIterator<Item = (Option<f64>, &'a str, u64, f64)>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["psi", "pedigree_id", "locus_id", "T_total"])?;
    for (psi, p, l, t) in rows {
        out.write_record([opt(psi), p.to_string(), l.to_string(), t.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// `vardecomp.csv`, one row per decomposition.
pub fn write_vardecomp_csv<W: Write>(w: W, rows: &[VarianceDecomposition]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "psi",
        "total",
        "within",
        "between",
        "within_fraction",
        "between_fraction",
        "total_se",
        "within_se",
        "between_direct",
        "between_direct_se",
        "clamped",
        "pedigrees",
        "loci",
        "annealed_reps",
    ])?;
    for d in rows {
        out.write_record([
            d.psi.to_string(),
            d.total.to_string(),
            d.within.to_string(),
            d.between.to_string(),
            d.within_fraction().to_string(),
            d.between_fraction().to_string(),
            d.total_se.to_string(),
            d.within_se.to_string(),
            d.between_direct.to_string(),
            d.between_direct_se.to_string(),
            d.clamped.to_string(),
            d.pedigrees.to_string(),
            d.loci.to_string(),
            d.annealed_reps.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
