//! Paintboxes: finite nonincreasing weight vectors in the simplex, the
//! chromosome-doubling map `phi`, exact merger probabilities and merger sampling.

use std::fmt;

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::partitions::Partition;

/// Tolerance for the simplex constraint.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Label given to a block that landed in the leftover interval.
const DUST: usize = usize::MAX;

/// Nonzero weights in nonincreasing order; the remaining mass `1 - l1` is the dust interval.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Paintbox {
    w: SmallVec<[f64; 4]>,
    cum: SmallVec<[f64; 4]>,
    l1: f64,
    l2sq: f64,
}

impl Paintbox {
    pub fn new(weights: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut w: SmallVec<[f64; 4]> = SmallVec::new();
        for x in weights {
            if !x.is_finite() || x < -SIMPLEX_TOL || x > 1.0 + SIMPLEX_TOL {
                return Err(Error::Paintbox(format!("weight {x} outside [0,1]")));
            }
            let x = x.clamp(0.0, 1.0);
            if x > 0.0 {
                w.push(x);
            }
        }
        w.sort_unstable_by(|a, b| b.total_cmp(a));
        let total: f64 = w.iter().sum();
        if total > 1.0 + SIMPLEX_TOL {
            return Err(Error::Paintbox(format!("total mass {total} exceeds 1")));
        }
        Ok(Paintbox::from_sorted(w))
    }

    /// `w` must be positive and nonincreasing.
    fn from_sorted(w: SmallVec<[f64; 4]>) -> Self {
        let mut cum = SmallVec::with_capacity(w.len());
        let (mut l1, mut l2sq) = (0.0, 0.0);
        for &x in &w {
            l1 += x;
            l2sq += x * x;
            cum.push(l1);
        }
        Paintbox { w, cum, l1: l1.min(1.0), l2sq }
    }

    /// The zero paintbox.
    pub fn empty() -> Self {
        Paintbox::default()
    }

    /// `k` equal weights `x`.
    pub fn uniform(k: usize, x: f64) -> Result<Self> {
        Paintbox::new(std::iter::repeat_n(x, k))
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `|x|_1`
    pub fn l1(&self) -> f64 {
        self.l1
    }

    /// `<x,x>`
    pub fn l2sq(&self) -> f64 {
        self.l2sq
    }

    /// Euclidean norm, used by the epsilon cutoff.
    pub fn norm(&self) -> f64 {
        self.l2sq.sqrt()
    }

    /// Each weight split in two halves: a parent passes on either of its two chromosomes.
    pub fn phi(&self) -> Paintbox {
        let w = self.w.iter().flat_map(|&x| [x / 2.0, x / 2.0]).collect();
        Paintbox::from_sorted(w)
    }

    /// Exact probability that a paintbox merger takes `xi` to `eta`.
    ///
    /// Returns 0 when `eta` is not a coarsening of `xi`.
    pub fn prob(&self, xi: &Partition, eta: &Partition) -> f64 {
        let Some(grouping) = xi.grouping_in(eta) else { return 0.0 };
        let mut counts = vec![0usize; eta.len()];
        for g in grouping {
            counts[g] += 1;
        }
        let groups: Vec<usize> = counts.iter().copied().filter(|&k| k >= 2).collect();
        let singles = counts.iter().filter(|&&k| k == 1).count();
        self.prob_groups(&groups, singles)
    }

    /// Merger probability for `groups` (sizes >= 2, each into its own bucket) while
    /// `singles` other blocks stay apart.
    pub fn prob_groups(&self, groups: &[usize], singles: usize) -> f64 {
        let r = groups.len();
        assert!(r < 24, "too many merging groups for exact evaluation");
        let s = singles;
        let masks = 1usize << r;
        // dp[mask * (s + 1) + t]: groups in `mask` and `t` singles placed in distinct buckets
        let mut dp = vec![0.0f64; masks * (s + 1)];
        dp[0] = 1.0;
        for &w in &self.w {
            let pw: Vec<f64> = groups.iter().map(|&k| w.powi(k as i32)).collect();
            for mask in (0..masks).rev() {
                for t in (0..=s).rev() {
                    let cur = dp[mask * (s + 1) + t];
                    if cur == 0.0 {
                        continue;
                    }
                    for (j, &pj) in pw.iter().enumerate() {
                        if mask & (1 << j) == 0 {
                            dp[(mask | 1 << j) * (s + 1) + t] += cur * pj;
                        }
                    }
                    if t < s {
                        dp[mask * (s + 1) + t + 1] += cur * w;
                    }
                }
            }
        }
        let dust = (1.0 - self.l1).max(0.0);
        let full = masks - 1;
        let mut total = 0.0;
        // C(s,t) t! = s! / (s-t)!
        let mut falling = 1.0;
        for t in 0..=s {
            total += dp[full * (s + 1) + t] * falling * dust.powi((s - t) as i32);
            falling *= (s - t) as f64;
        }
        total.clamp(0.0, 1.0)
    }

    /// Non-coalescence functional: `-ln p(x; singletons, singletons)` for `n` blocks.
    pub fn g_nc(&self, n: usize) -> f64 {
        -self.no_merge_prob(n).ln()
    }

    /// Probability that `n` blocks all stay apart.
    pub fn no_merge_prob(&self, n: usize) -> f64 {
        if n <= 1 || self.w.is_empty() {
            return 1.0;
        }
        // e[t]: elementary symmetric polynomials of the weights
        let mut e = vec![0.0f64; n + 1];
        e[0] = 1.0;
        for &w in &self.w {
            for t in (1..=n).rev() {
                e[t] += e[t - 1] * w;
            }
        }
        let dust = (1.0 - self.l1).max(0.0);
        let mut total = 0.0;
        let mut falling = 1.0;
        for (t, et) in e.iter().enumerate() {
            total += et * falling * dust.powi((n - t) as i32);
            falling *= (n - t) as f64;
        }
        total.clamp(0.0, 1.0)
    }

    /// Bucket of a uniform draw, or `None` for the dust.
    #[inline]
    fn bucket(&self, u: f64) -> Option<usize> {
        if u >= self.l1 {
            return None;
        }
        let k = if self.cum.len() <= 8 {
            self.cum.iter().position(|&c| u < c).unwrap_or(self.cum.len() - 1)
        } else {
            self.cum.partition_point(|&c| c <= u).min(self.cum.len() - 1)
        };
        Some(k)
    }

    /// Throw `b` blocks into the paintbox. `labels[i]` is the bucket of block `i`;
    /// blocks in the dust get pairwise distinct labels.
    pub fn assign<R: Rng + ?Sized>(&self, b: usize, rng: &mut R, labels: &mut Vec<usize>) {
        labels.clear();
        for i in 0..b {
            let u: f64 = rng.random();
            labels.push(self.bucket(u).unwrap_or(DUST - i));
        }
    }

    /// One paintbox merger on `b` blocks, as a partition of `[b]`.
    pub fn sample_merger<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> Partition {
        let mut labels = Vec::with_capacity(b);
        self.assign(b, rng, &mut labels);
        Partition::from_labels(&labels)
    }
}

/// Whether any two labels coincide.
pub fn has_collision(labels: &[usize]) -> bool {
    if labels.len() <= 16 {
        for i in 0..labels.len() {
            for j in 0..i {
                if labels[i] == labels[j] {
                    return true;
                }
            }
        }
        false
    } else {
        let mut v = labels.to_vec();
        v.sort_unstable();
        v.windows(2).any(|p| p[0] == p[1])
    }
}

impl fmt::Display for Paintbox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, w) in self.w.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{w}")?;
        }
        write!(f, ")")
    }
}
