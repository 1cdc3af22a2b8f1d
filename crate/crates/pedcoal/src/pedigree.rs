//! Diploid Cannings pedigrees.
//!
//! A generation is an [`OffspringMatrix`] (joint offspring counts of parent
//! couples) turned into a [`PedigreeSlice`] by a uniform matching of children
//! to couples plus one fair role coin per child. A [`Pedigree`] regenerates
//! slice `g` on demand from `(seed, g)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Binomial, Gamma, Hypergeometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::paintbox::Paintbox;
use crate::rng::{stream, Purpose, Stream};
use crate::stats::MeanVar;

/// Joint offspring numbers `V_ij` of one generation, stored sparsely for `i < j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OffspringMatrix {
    n: usize,
    entries: Vec<(u32, u32, u32)>,
    totals: Vec<u32>,
}

impl OffspringMatrix {
    /// Validating constructor; duplicate pairs are added up.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize, u32)>) -> Result<Self> {
        let mut boxes = Vec::new();
        for (i, j, v) in entries {
            if i == j {
                return Err(Error::Input(format!("selfing entry V[{i},{i}]")));
            }
            if i >= n || j >= n {
                return Err(Error::Input(format!("entry ({i},{j}) outside population of {n}")));
            }
            let (a, b) = (i.min(j) as u32, i.max(j) as u32);
            boxes.extend(std::iter::repeat_n((a, b), v as usize));
        }
        if boxes.len() != n {
            return Err(Error::Input(format!("offspring total {} differs from N = {n}", boxes.len())));
        }
        Ok(OffspringMatrix::from_boxes(n, &mut boxes))
    }

    /// One `(i, j)` box per child with `i < j`; `boxes` is sorted in place.
    fn from_boxes(n: usize, boxes: &mut [(u32, u32)]) -> Self {
        boxes.sort_unstable();
        let mut entries: Vec<(u32, u32, u32)> = Vec::new();
        let mut totals = vec![0u32; n];
        for &(i, j) in boxes.iter() {
            totals[i as usize] += 1;
            totals[j as usize] += 1;
            match entries.last_mut() {
                Some(e) if e.0 == i && e.1 == j => e.2 += 1,
                _ => entries.push((i, j, 1)),
            }
        }
        OffspringMatrix { n, entries, totals }
    }

    /// Population size `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Nonzero `(i, j, V_ij)` with `i < j`, sorted.
    pub fn entries(&self) -> &[(u32, u32, u32)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        let key = (i.min(j) as u32, i.max(j) as u32);
        self.entries
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map_or(0, |k| self.entries[k].2)
    }

    /// Total offspring numbers `V_i`.
    pub fn totals(&self) -> &[u32] {
        &self.totals
    }

    /// `E[(V_1)_2] / (8(N-1))` given this matrix: the pair coalescence probability
    /// of two lineages in distinct individuals.
    pub fn pair_coalescence_prob(&self) -> f64 {
        mean_falling2(&self.totals) / (8.0 * (self.n as f64 - 1.0))
    }

    /// Ranked offspring frequencies mapped through `phi`: `V_(i) / 4N`, each twice.
    pub fn generation_paintbox(&self) -> Paintbox {
        paintbox_from_totals(&self.totals)
    }

    /// Squared norm of [`Self::generation_paintbox`] without building it.
    pub fn paintbox_l2sq(&self) -> f64 {
        l2sq_from_totals(&self.totals)
    }

    /// Reproducibility digest.
    pub fn digest(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ self.n as u64;
        for &(i, j, v) in &self.entries {
            for x in [i, j, v] {
                h ^= x as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    /// The boxes in canonical order: couple `(i, j)` repeated `V_ij` times.
    pub fn boxes(&self) -> Vec<(u32, u32)> {
        self.entries
            .iter()
            .flat_map(|&(i, j, v)| std::iter::repeat_n((i, j), v as usize))
            .collect()
    }
}

fn mean_falling2(totals: &[u32]) -> f64 {
    let s: f64 = totals.iter().map(|&v| v as f64 * (v as f64 - 1.0)).sum();
    s / totals.len() as f64
}

pub(crate) fn paintbox_from_totals(totals: &[u32]) -> Paintbox {
    let four_n = 4.0 * totals.len() as f64;
    Paintbox::new(totals.iter().filter(|&&v| v > 0).flat_map(|&v| {
        let x = v as f64 / four_n;
        [x, x]
    }))
    .expect("offspring frequencies lie in the simplex")
}

pub(crate) fn l2sq_from_totals(totals: &[u32]) -> f64 {
    let n = totals.len() as f64;
    totals.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / (8.0 * n * n)
}

/// One realized generation: the 0-parent and 1-parent of every child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PedigreeSlice {
    pub p0: Vec<u32>,
    pub p1: Vec<u32>,
    pub source_digest: u64,
}

impl PedigreeSlice {
    pub fn n(&self) -> usize {
        self.p0.len()
    }

    /// Parent of child `k` in role `c`.
    #[inline]
    pub fn parent(&self, c: u8, k: usize) -> u32 {
        if c == 0 {
            self.p0[k]
        } else {
            self.p1[k]
        }
    }
}

/// Balls in boxes: shuffle the boxes, child `k` takes box `k`, a fair coin decides roles.
pub fn realize_slice<R: Rng + ?Sized>(v: &OffspringMatrix, rng: &mut R) -> PedigreeSlice {
    let mut boxes = v.boxes();
    boxes.shuffle(rng);
    let mut p0 = Vec::with_capacity(v.n);
    let mut p1 = Vec::with_capacity(v.n);
    let mut bits = 0u64;
    for (k, &(i, j)) in boxes.iter().enumerate() {
        if k % 64 == 0 {
            bits = rng.random();
        }
        let swap = bits >> (k % 64) & 1 == 1;
        let (a, b) = if swap { (j, i) } else { (i, j) };
        p0.push(a);
        p1.push(b);
    }
    PedigreeSlice { p0, p1, source_digest: v.digest() }
}

/// Realize a slice from an explicit box order and role coins (`true` swaps the
/// canonical `(i < j)` order). Used by exact enumeration.
pub fn realize_with(v: &OffspringMatrix, boxes: &[(u32, u32)], swaps: &[bool]) -> PedigreeSlice {
    let (p0, p1) = boxes
        .iter()
        .zip(swaps)
        .map(|(&(i, j), &s)| if s { (j, i) } else { (i, j) })
        .unzip();
    PedigreeSlice { p0, p1, source_digest: v.digest() }
}

/// Fitness law of the random-fitness model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum FitnessLaw {
    /// Gamma(shape, 1): finite variance.
    Gamma { shape: f64 },
    /// `P(W >= z) = c_w z^-alpha` for `z >= c_w^(1/alpha)`.
    Pareto { alpha: f64, c_w: f64 },
}

/// Law of the potential offspring number of a couple, given that it is positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum OffspringLaw {
    /// Geometric on `{1, 2, ...}` with the given mean.
    Geometric { mean: f64 },
    /// `P(X >= k) ~ c_x k^-alpha`.
    ParetoTail { alpha: f64, c_x: f64 },
}

/// Inner sex-1 by sex-2 offspring array of the two-sex model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "inner", rename_all = "snake_case")]
pub enum TwoSexInner {
    /// Every child picks a uniform sex-1 and a uniform sex-2 parent.
    WrightFisher,
    /// With probability `lambda / N` one sex-1 individual has `floor(beta N)`
    /// children with uniform sex-2 partners; the rest is two-sex Wright-Fisher.
    Star { lambda: f64, beta: f64 },
}

/// The catalog of diploid Cannings models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CanningsModel {
    WrightFisher { n: usize },
    RandomFitness { n: usize, fitness: FitnessLaw },
    GwCouples { n: usize, c: f64, offspring: OffspringLaw },
    LargeFamilyCouple { n: usize, psi: f64, gamma: f64 },
    LargeFamilyIndividual { n: usize, psi: f64, gamma: f64 },
    TwoSex { n: usize, r: f64, inner: TwoSexInner },
}

/// Counters for redraws that keep conditional laws exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Redraws {
    /// Fitness vectors with `Z_N = 0`.
    pub zero_fitness: u64,
    /// Galton-Watson generations with fewer than `N` potential offspring.
    pub short_generation: u64,
}

fn check_psi_gamma(n: usize, psi: f64, gamma: f64) -> Result<()> {
    if !(psi > 0.0 && psi <= 1.0) {
        return param(format!("psi must lie in (0, 1], got {psi}"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    if (psi * n as f64).floor() < 1.0 {
        return param(format!("floor(psi N) = 0 for psi = {psi}, N = {n}"));
    }
    Ok(())
}

impl CanningsModel {
    pub fn population(&self) -> usize {
        match *self {
            CanningsModel::WrightFisher { n }
            | CanningsModel::RandomFitness { n, .. }
            | CanningsModel::GwCouples { n, .. }
            | CanningsModel::LargeFamilyCouple { n, .. }
            | CanningsModel::LargeFamilyIndividual { n, .. }
            | CanningsModel::TwoSex { n, .. } => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CanningsModel::WrightFisher { .. } => "wright_fisher",
            CanningsModel::RandomFitness { .. } => "random_fitness",
            CanningsModel::GwCouples { .. } => "gw_couples",
            CanningsModel::LargeFamilyCouple { .. } => "large_family_couple",
            CanningsModel::LargeFamilyIndividual { .. } => "large_family_individual",
            CanningsModel::TwoSex { .. } => "two_sex",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.population();
        if n < 2 {
            return param(format!("population size must be at least 2, got {n}"));
        }
        match self {
            CanningsModel::WrightFisher { .. } => {}
            CanningsModel::RandomFitness { fitness, .. } => match *fitness {
                FitnessLaw::Gamma { shape } if !(shape > 0.0) => {
                    return param(format!("gamma fitness shape must be positive, got {shape}"))
                }
                FitnessLaw::Pareto { alpha, c_w } if !(alpha > 0.0 && c_w > 0.0) => {
                    return param(format!("pareto fitness needs alpha, c_w > 0, got {alpha}, {c_w}"))
                }
                _ => {}
            },
            CanningsModel::GwCouples { c, offspring, .. } => {
                if !(*c > 0.0) || *c > n as f64 {
                    return param(format!("couple rate c must lie in (0, N], got {c}"));
                }
                match *offspring {
                    OffspringLaw::Geometric { mean } if !(mean > 2.0 / c) => {
                        return param(format!("offspring mean must exceed 2/c = {}, got {mean}", 2.0 / c))
                    }
                    OffspringLaw::ParetoTail { alpha, c_x } if !(alpha > 1.0 && alpha < 2.0 && c_x > 0.0) => {
                        return param(format!("pareto offspring tail needs alpha in (1,2), c_x > 0, got {alpha}, {c_x}"))
                    }
                    _ => {}
                }
            }
            CanningsModel::LargeFamilyCouple { psi, gamma, .. } => {
                if n < 4 {
                    return param("large family of a couple needs N >= 4");
                }
                check_psi_gamma(n, *psi, *gamma)?;
            }
            CanningsModel::LargeFamilyIndividual { psi, gamma, .. } => {
                if n < 3 {
                    return param("large family of an individual needs N >= 3");
                }
                check_psi_gamma(n, *psi, *gamma)?;
            }
            CanningsModel::TwoSex { r, inner, .. } => {
                if !(*r > 0.0 && *r < 1.0) {
                    return param(format!("sex ratio r must lie in (0, 1), got {r}"));
                }
                let a = (r * n as f64).floor() as usize;
                if a == 0 || a == n {
                    return param(format!("floor(rN) = {a} leaves a sex empty"));
                }
                if let TwoSexInner::Star { lambda, beta } = *inner {
                    if !(beta > 0.0 && beta < 1.0) {
                        return param(format!("beta must lie in (0, 1), got {beta}"));
                    }
                    if !(lambda > 0.0 && lambda <= n as f64) {
                        return param(format!("lambda must lie in (0, N], got {lambda}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Draw one offspring matrix.
    pub fn sample_matrix<R: Rng + ?Sized>(&self, rng: &mut R) -> OffspringMatrix {
        let mut boxes = Vec::with_capacity(self.population());
        self.sample_boxes(rng, &mut boxes, &mut Redraws::default());
        OffspringMatrix::from_boxes(self.population(), &mut boxes)
    }

    /// Draw one offspring matrix, counting redraws.
    pub fn sample_matrix_counted<R: Rng + ?Sized>(&self, rng: &mut R, redraws: &mut Redraws) -> OffspringMatrix {
        let mut boxes = Vec::with_capacity(self.population());
        self.sample_boxes(rng, &mut boxes, redraws);
        OffspringMatrix::from_boxes(self.population(), &mut boxes)
    }

    /// One `(i < j)` couple per child, in no particular order.
    pub fn sample_boxes<R: Rng + ?Sized>(&self, rng: &mut R, boxes: &mut Vec<(u32, u32)>, redraws: &mut Redraws) {
        boxes.clear();
        let n = self.population();
        match self {
            CanningsModel::WrightFisher { .. } => wf_boxes(rng, n, None, n, boxes),
            CanningsModel::RandomFitness { fitness, .. } => fitness_boxes(rng, n, fitness, boxes, redraws),
            CanningsModel::GwCouples { c, offspring, .. } => gw_boxes(rng, n, *c, offspring, boxes, redraws),
            CanningsModel::LargeFamilyCouple { psi, gamma, .. } => {
                let m = large_family_size(rng, n, *psi, *gamma);
                let i1 = rng.random_range(0..n);
                let mut i2 = rng.random_range(0..n - 1);
                if i2 >= i1 {
                    i2 += 1;
                }
                let pair = (i1.min(i2) as u32, i1.max(i2) as u32);
                boxes.extend(std::iter::repeat_n(pair, m));
                let others: Vec<u32> = (0..n as u32).filter(|&k| k != pair.0 && k != pair.1).collect();
                wf_boxes(rng, n - 2, Some(&others), n - m, boxes);
            }
            CanningsModel::LargeFamilyIndividual { psi, gamma, .. } => {
                let m = large_family_size(rng, n, *psi, *gamma);
                let i1 = rng.random_range(0..n);
                for _ in 0..m {
                    let mut j = rng.random_range(0..n - 1);
                    if j >= i1 {
                        j += 1;
                    }
                    boxes.push((i1.min(j) as u32, i1.max(j) as u32));
                }
                let others: Vec<u32> = (0..n as u32).filter(|&k| k != i1 as u32).collect();
                wf_boxes(rng, n - 1, Some(&others), n - m, boxes);
            }
            CanningsModel::TwoSex { r, inner, .. } => {
                let a = (r * n as f64).floor() as usize;
                let o = sample_two_sex_inner(rng, n, a, inner);
                let v = two_sex_wrap(n, a, &o, rng).expect("inner array has total N");
                boxes.extend(v.boxes());
            }
        }
    }

    /// Closed-form pair coalescence probability where one is known.
    pub fn c_n_exact(&self) -> Option<f64> {
        let n = self.population() as f64;
        let falling2 = match self {
            CanningsModel::WrightFisher { .. } => return Some(1.0 / (2.0 * n)),
            CanningsModel::LargeFamilyCouple { psi, gamma, .. } => {
                let p = n.powf(-gamma);
                let m = (psi * n).floor();
                let wf = |k: f64| k * (k - 1.0) * 4.0 / ((n - 2.0) * (n - 2.0));
                let outside = (n - 2.0) / n;
                p * (2.0 / n * m * (m - 1.0) + outside * wf(n - m)) + (1.0 - p) * outside * wf(n - 1.0)
            }
            CanningsModel::LargeFamilyIndividual { psi, gamma, .. } => {
                let p = n.powf(-gamma);
                let m = (psi * n).floor();
                // not I_1: partner draws Bin(m, 1/(N-1)) plus Wright-Fisher Bin(N-m, 2/(N-1))
                let other = |m: f64| {
                    let (a, qa) = (m, 1.0 / (n - 1.0));
                    let (b, qb) = (n - m, 2.0 / (n - 1.0));
                    a * (a - 1.0) * qa * qa + 2.0 * a * qa * b * qb + b * (b - 1.0) * qb * qb
                };
                let term = |m: f64| m * (m - 1.0) / n + (n - 1.0) / n * other(m);
                p * term(m) + (1.0 - p) * term(1.0)
            }
            CanningsModel::TwoSex { r, inner: TwoSexInner::WrightFisher, .. } => {
                let a = (r * n).floor();
                (n - 1.0) * (1.0 / a + 1.0 / (n - a))
            }
            _ => return None,
        };
        Some(falling2 / (8.0 * (n - 1.0)))
    }
}

fn large_family_size<R: Rng + ?Sized>(rng: &mut R, n: usize, psi: f64, gamma: f64) -> usize {
    if rng.random::<f64>() < (n as f64).powf(-gamma) {
        (psi * n as f64).floor() as usize
    } else {
        1
    }
}

/// `k` children, each with a uniform couple of distinct parents among `parents`
/// (or `0..m` when `None`).
fn wf_boxes<R: Rng + ?Sized>(rng: &mut R, m: usize, parents: Option<&[u32]>, k: usize, boxes: &mut Vec<(u32, u32)>) {
    for _ in 0..k {
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        let (a, b) = match parents {
            Some(p) => (p[a], p[b]),
            None => (a as u32, b as u32),
        };
        boxes.push((a.min(b), a.max(b)));
    }
}

fn fitness_boxes<R: Rng + ?Sized>(rng: &mut R, n: usize, law: &FitnessLaw, boxes: &mut Vec<(u32, u32)>, redraws: &mut Redraws) {
    let weights = loop {
        let w: Vec<f64> = match *law {
            FitnessLaw::Gamma { shape } => {
                let g = Gamma::new(shape, 1.0).expect("validated shape");
                (0..n).map(|_| g.sample(rng)).collect()
            }
            FitnessLaw::Pareto { alpha, c_w } => {
                (0..n).map(|_| (c_w / (1.0 - rng.random::<f64>())).powf(1.0 / alpha)).collect()
            }
        };
        // Z_N > 0 iff at least two positive weights
        if w.iter().filter(|&&x| x > 0.0).count() >= 2 && w.iter().all(|x| x.is_finite()) {
            break w;
        }
        redraws.zero_fitness += 1;
    };
    let idx = WeightedIndex::new(&weights).expect("positive finite weights");
    for _ in 0..n {
        let (a, b) = loop {
            let a = idx.sample(rng);
            let b = idx.sample(rng);
            if a != b {
                break (a as u32, b as u32);
            }
        };
        boxes.push((a.min(b), a.max(b)));
    }
}

fn sample_offspring<R: Rng + ?Sized>(rng: &mut R, law: &OffspringLaw) -> u64 {
    match *law {
        OffspringLaw::Geometric { mean } => {
            let p = 1.0 / mean;
            let u = 1.0 - rng.random::<f64>();
            1 + (u.ln() / (1.0 - p).ln()).floor() as u64
        }
        OffspringLaw::ParetoTail { alpha, c_x } => {
            let u = 1.0 - rng.random::<f64>();
            let x = (c_x / u).powf(1.0 / alpha).ceil();
            (x.min(1e15) as u64).max(1)
        }
    }
}

fn gw_boxes<R: Rng + ?Sized>(rng: &mut R, n: usize, c: f64, law: &OffspringLaw, boxes: &mut Vec<(u32, u32)>, redraws: &mut Redraws) {
    let couples = (n * (n - 1) / 2) as u64;
    let q = (c / n as f64).min(1.0);
    let (pairs, xs) = loop {
        let k = Binomial::new(couples, q).expect("valid").sample(rng);
        let chosen = rand::seq::index::sample(rng, couples as usize, k as usize);
        let mut pairs: Vec<usize> = chosen.into_iter().collect();
        pairs.sort_unstable();
        let xs: Vec<u64> = pairs.iter().map(|_| sample_offspring(rng, law)).collect();
        if xs.iter().sum::<u64>() >= n as u64 {
            break (pairs, xs);
        }
        redraws.short_generation += 1;
    };
    let mut pool: u64 = xs.iter().sum();
    let mut left = n as u64;
    for (&lin, &x) in pairs.iter().zip(&xs) {
        if left == 0 {
            break;
        }
        let h = if x == pool {
            left
        } else {
            Hypergeometric::new(pool, x, left).expect("valid").sample(rng)
        };
        pool -= x;
        left -= h;
        let (i, j) = couple_of_index(lin);
        boxes.extend(std::iter::repeat_n((i as u32, j as u32), h as usize));
    }
}

/// Inverse of the row-major enumeration of couples `(i < j)`: index `j(j-1)/2 + i`.
fn couple_of_index(k: usize) -> (usize, usize) {
    let mut j = ((1.0 + (1.0 + 8.0 * k as f64).sqrt()) / 2.0).floor() as usize;
    while j * (j - 1) / 2 > k {
        j -= 1;
    }
    while (j + 1) * j / 2 <= k {
        j += 1;
    }
    (k - j * (j - 1) / 2, j)
}

/// Draw the inner `a x (N - a)` array as `(k, l, O_kl)` entries.
pub fn sample_two_sex_inner<R: Rng + ?Sized>(rng: &mut R, n: usize, a: usize, inner: &TwoSexInner) -> Vec<(usize, usize, u32)> {
    let b = n - a;
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(n);
    let wf = |rng: &mut R, k: usize, cells: &mut Vec<(usize, usize)>| {
        for _ in 0..k {
            cells.push((rng.random_range(0..a), rng.random_range(0..b)));
        }
    };
    match *inner {
        TwoSexInner::WrightFisher => wf(rng, n, &mut cells),
        TwoSexInner::Star { lambda, beta } => {
            if rng.random::<f64>() < lambda / n as f64 {
                let m = (beta * n as f64).floor() as usize;
                let star = rng.random_range(0..a);
                for _ in 0..m {
                    cells.push((star, rng.random_range(0..b)));
                }
                wf(rng, n - m, &mut cells);
            } else {
                wf(rng, n, &mut cells);
            }
        }
    }
    cells.sort_unstable();
    let mut out: Vec<(usize, usize, u32)> = Vec::new();
    for (k, l) in cells {
        match out.last_mut() {
            Some(e) if e.0 == k && e.1 == l => e.2 += 1,
            _ => out.push((k, l, 1)),
        }
    }
    out
}

/// Embed a sex-1 by sex-2 offspring array into an `N x N` offspring matrix by
/// drawing a uniform set of `a` sex-1 individuals.
pub fn two_sex_wrap<R: Rng + ?Sized>(n: usize, a: usize, o: &[(usize, usize, u32)], rng: &mut R) -> Result<OffspringMatrix> {
    if a == 0 || a >= n {
        return param(format!("sex-1 count {a} must lie in [1, N-1]"));
    }
    let total: u64 = o.iter().map(|e| e.2 as u64).sum();
    if total != n as u64 {
        return Err(Error::Input(format!("inner offspring total {total} differs from N = {n}")));
    }
    let mut sex1 = rand::seq::index::sample(rng, n, a).into_vec();
    sex1.sort_unstable();
    let mut is1 = vec![false; n];
    for &i in &sex1 {
        is1[i] = true;
    }
    let sex2: Vec<usize> = (0..n).filter(|&i| !is1[i]).collect();
    let mut entries = Vec::with_capacity(o.len());
    for &(k, l, v) in o {
        if k >= a || l >= n - a {
            return Err(Error::Input(format!("inner entry ({k},{l}) outside {a} x {}", n - a)));
        }
        entries.push((sex1[k], sex2[l], v));
    }
    OffspringMatrix::from_entries(n, entries)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub reps: u64,
    /// Closed form, when the model has one.
    pub exact: Option<f64>,
}

/// Monte Carlo estimate of `c_N = E[(V_1)_2] / (8(N-1))`.
///
/// Each draw contributes the average of `(V_i)_2` over all individuals, which is
/// unbiased by exchangeability. Draw `r` uses stream `(seed, Estimate, r)`.
pub fn pair_coalescence_prob(model: &CanningsModel, reps: u64, seed: u64) -> Estimate {
    let n = model.population();
    let chunk = 4096u64;
    let nchunks = reps.div_ceil(chunk);
    let acc = (0..nchunks)
        .into_par_iter()
        .map(|c| {
            let mut mv = MeanVar::default();
            let mut boxes = Vec::with_capacity(n);
            let mut totals = vec![0u32; n];
            let mut redraws = Redraws::default();
            for r in c * chunk..((c + 1) * chunk).min(reps) {
                let mut rng = stream(seed, Purpose::Estimate, r, 0);
                model.sample_boxes(&mut rng, &mut boxes, &mut redraws);
                totals.iter_mut().for_each(|t| *t = 0);
                for &(i, j) in &boxes {
                    totals[i as usize] += 1;
                    totals[j as usize] += 1;
                }
                mv.push(mean_falling2(&totals));
            }
            mv
        })
        .collect::<Vec<_>>()
        .iter()
        .fold(MeanVar::default(), |mut a, b| {
            a.merge(b);
            a
        });
    let scale = 8.0 * (n as f64 - 1.0);
    Estimate { value: acc.mean() / scale, se: acc.se() / scale, reps, exact: model.c_n_exact() }
}

/// `c_N` to use for rescaling: closed form if known, else a Monte Carlo estimate.
pub fn c_n(model: &CanningsModel, reps: u64, seed: u64) -> Estimate {
    match model.c_n_exact() {
        Some(c) => Estimate { value: c, se: 0.0, reps: 0, exact: Some(c) },
        None => pair_coalescence_prob(model, reps, seed),
    }
}

/// A pedigree: generation `g` is regenerated on demand from stream `(seed, Pedigree, g)`.
#[derive(Clone, Debug)]
pub struct Pedigree {
    model: CanningsModel,
    seed: u64,
}

impl Pedigree {
    pub fn new(model: CanningsModel, seed: u64) -> Result<Self> {
        model.validate()?;
        Ok(Pedigree { model, seed })
    }

    pub fn model(&self) -> &CanningsModel {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.model.population()
    }

    fn rng(&self, g: u64) -> Stream {
        stream(self.seed, Purpose::Pedigree, g, 0)
    }

    /// Offspring matrix of generation `g` (parents in generation `g + 1` backwards).
    pub fn matrix(&self, g: u64) -> OffspringMatrix {
        self.model.sample_matrix(&mut self.rng(g))
    }

    /// Slice of generation `g`.
    pub fn slice(&self, g: u64) -> PedigreeSlice {
        self.generation(g).1
    }

    /// Matrix and slice of generation `g`, from one stream.
    pub fn generation(&self, g: u64) -> (OffspringMatrix, PedigreeSlice) {
        let mut rng = self.rng(g);
        let v = self.model.sample_matrix(&mut rng);
        let s = realize_slice(&v, &mut rng);
        (v, s)
    }

    /// Total offspring numbers of generation `g`, skipping the sort of the full matrix.
    pub fn totals(&self, g: u64) -> Vec<u32> {
        let mut boxes = Vec::with_capacity(self.n());
        self.model.sample_boxes(&mut self.rng(g), &mut boxes, &mut Redraws::default());
        let mut totals = vec![0u32; self.n()];
        for &(i, j) in &boxes {
            totals[i as usize] += 1;
            totals[j as usize] += 1;
        }
        totals
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_models(n: usize) -> Vec<CanningsModel> {
        vec![
            CanningsModel::WrightFisher { n },
            CanningsModel::RandomFitness { n, fitness: FitnessLaw::Gamma { shape: 2.0 } },
            CanningsModel::RandomFitness { n, fitness: FitnessLaw::Pareto { alpha: 1.5, c_w: 1.0 } },
            CanningsModel::GwCouples { n, c: 2.0, offspring: OffspringLaw::Geometric { mean: 3.0 } },
            CanningsModel::GwCouples { n, c: 2.0, offspring: OffspringLaw::ParetoTail { alpha: 1.5, c_x: 2.0 } },
            CanningsModel::LargeFamilyCouple { n, psi: 0.5, gamma: 0.5 },
            CanningsModel::LargeFamilyIndividual { n, psi: 0.5, gamma: 0.5 },
            CanningsModel::TwoSex { n, r: 0.4, inner: TwoSexInner::WrightFisher },
            CanningsModel::TwoSex { n, r: 0.5, inner: TwoSexInner::Star { lambda: 2.0, beta: 0.5 } },
        ]
    }

    fn check_invariants(v: &OffspringMatrix) {
        let n = v.n();
        let total: u32 = v.entries().iter().map(|e| e.2).sum();
        assert_eq!(total as usize, n);
        assert!(v.entries().iter().all(|e| e.0 < e.1 && (e.1 as usize) < n));
        assert_eq!(v.totals().iter().map(|&x| x as usize).sum::<usize>(), 2 * n);
    }

    #[test]
    fn couple_index_round_trip() {
        let mut k = 0;
        for j in 1..60 {
            for i in 0..j {
                assert_eq!(couple_of_index(k), (i, j));
                k += 1;
            }
        }
    }

    #[test]
    fn wright_fisher_n6_invariants() {
        let m = CanningsModel::WrightFisher { n: 6 };
        let mut rng = stream(1, Purpose::Misc, 0, 0);
        for _ in 0..1000 {
            check_invariants(&m.sample_matrix(&mut rng));
        }
    }

    #[test]
    fn slices_match_their_matrix() {
        for model in all_models(40) {
            let ped = Pedigree::new(model.clone(), 5).unwrap();
            for g in 0..20 {
                let (v, s) = ped.generation(g);
                check_invariants(&v);
                assert!(s.p0.iter().zip(&s.p1).all(|(a, b)| a != b));
                let again = OffspringMatrix::from_entries(
                    v.n(),
                    s.p0.iter().zip(&s.p1).map(|(&a, &b)| (a as usize, b as usize, 1)),
                )
                .unwrap();
                assert_eq!(again, v, "{}", model.name());
                assert_eq!(ped.slice(g), s);
                assert_eq!(ped.matrix(g), v);
                assert_eq!(ped.totals(g), v.totals());
                assert_eq!(s.source_digest, v.digest());
            }
        }
    }

    #[test]
    fn single_box_type() {
        let n = 10;
        let v = OffspringMatrix::from_entries(n, [(3, 7, n as u32)]).unwrap();
        let mut rng = stream(2, Purpose::Misc, 0, 0);
        let reps = 20_000;
        let mut p0_is_3 = 0;
        for _ in 0..reps {
            let s = realize_slice(&v, &mut rng);
            for k in 0..n {
                let pair = (s.p0[k].min(s.p1[k]), s.p0[k].max(s.p1[k]));
                assert_eq!(pair, (3, 7));
            }
            p0_is_3 += (s.p0[0] == 3) as u32;
        }
        let f = p0_is_3 as f64 / reps as f64;
        assert!((f - 0.5).abs() < 3.0 * (0.25 / reps as f64).sqrt());
    }

    #[test]
    fn matrix_validation() {
        assert!(OffspringMatrix::from_entries(3, [(0, 0, 3)]).is_err());
        assert!(OffspringMatrix::from_entries(3, [(0, 1, 2)]).is_err());
        assert!(OffspringMatrix::from_entries(3, [(0, 5, 3)]).is_err());
        let v = OffspringMatrix::from_entries(3, [(1, 0, 2), (0, 1, 1)]).unwrap();
        assert_eq!(v.get(0, 1), 3);
        assert_eq!(v.get(1, 2), 0);
    }

    #[test]
    fn parameter_domains() {
        assert!(Pedigree::new(CanningsModel::LargeFamilyCouple { n: 100, psi: 1.5, gamma: 1.0 }, 0).is_err());
        assert!(Pedigree::new(CanningsModel::LargeFamilyCouple { n: 100, psi: 0.5, gamma: 0.0 }, 0).is_err());
        assert!(Pedigree::new(CanningsModel::WrightFisher { n: 1 }, 0).is_err());
        assert!(Pedigree::new(CanningsModel::TwoSex { n: 10, r: 1.0, inner: TwoSexInner::WrightFisher }, 0).is_err());
        let e = Pedigree::new(CanningsModel::LargeFamilyIndividual { n: 100, psi: 1.5, gamma: 1.0 }, 0).unwrap_err();
        assert!(e.to_string().contains("psi"));
    }

    #[test]
    fn conditional_c_n_examples() {
        // a ring: every individual has two children
        let n = 8;
        let ring = OffspringMatrix::from_entries(n, (0..n).map(|i| (i, (i + 1) % n, 1))).unwrap();
        assert!(ring.totals().iter().all(|&v| v == 2));
        assert!((ring.pair_coalescence_prob() - 1.0 / (4.0 * (n as f64 - 1.0))).abs() < 1e-15);
    }

    #[test]
    fn generation_paintbox_examples() {
        let ring = OffspringMatrix::from_entries(4, (0..4).map(|i| (i, (i + 1) % 4, 1))).unwrap();
        let x = ring.generation_paintbox();
        assert_eq!(x.weights(), &[0.125; 8]);
        let n = 1000;
        let fam = OffspringMatrix::from_entries(n, [(0, 1, n as u32)]).unwrap();
        assert_eq!(fam.generation_paintbox().weights(), &[0.25; 4]);
        assert!((fam.paintbox_l2sq() - fam.generation_paintbox().l2sq()).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_monte_carlo() {
        for model in [
            CanningsModel::WrightFisher { n: 30 },
            CanningsModel::LargeFamilyCouple { n: 30, psi: 0.6, gamma: 0.5 },
            CanningsModel::LargeFamilyIndividual { n: 30, psi: 0.6, gamma: 0.5 },
            CanningsModel::TwoSex { n: 30, r: 0.3, inner: TwoSexInner::WrightFisher },
        ] {
            let est = pair_coalescence_prob(&model, 200_000, 17);
            let exact = est.exact.unwrap();
            assert!((est.value - exact).abs() < 4.0 * est.se, "{}: {} vs {exact} (se {})", model.name(), est.value, est.se);
        }
    }

    #[test]
    fn no_multiple_offspring_gives_zero() {
        assert_eq!(mean_falling2(&[1, 1, 0, 1]), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn every_model_satisfies_the_constraints(seed in any::<u64>(), n in 4usize..60) {
            for model in all_models(n) {
                if model.validate().is_err() {
                    continue;
                }
                let mut rng = stream(seed, Purpose::Misc, n as u64, 0);
                check_invariants(&model.sample_matrix(&mut rng));
            }
        }

        #[test]
        fn two_sex_never_pairs_same_sex(seed in any::<u64>(), n in 4usize..40, r in 0.1f64..0.9) {
            let a = ((r * n as f64).floor() as usize).clamp(1, n - 1);
            let mut rng = stream(seed, Purpose::Misc, 0, 0);
            let o = sample_two_sex_inner(&mut rng, n, a, &TwoSexInner::WrightFisher);
            let v = two_sex_wrap(n, a, &o, &mut rng).unwrap();
            // sex-1 individuals form an independent set of the couple graph, and so do sex-2
            let mut adj = vec![Vec::new(); n];
            for &(i, j, _) in v.entries() {
                adj[i as usize].push(j as usize);
                adj[j as usize].push(i as usize);
            }
            let mut side: Vec<Option<bool>> = vec![None; n];
            for s in 0..n {
                if side[s].is_some() {
                    continue;
                }
                side[s] = Some(true);
                let mut todo = vec![s];
                while let Some(u) = todo.pop() {
                    let c = side[u].unwrap();
                    for &w in &adj[u] {
                        match side[w] {
                            Some(d) => prop_assert_ne!(c, d),
                            None => {
                                side[w] = Some(!c);
                                todo.push(w);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn two_sex_rejects_wrong_total() {
        let mut rng = stream(3, Purpose::Misc, 0, 0);
        assert!(two_sex_wrap(4, 2, &[(0, 0, 3)], &mut rng).is_err());
    }
}
