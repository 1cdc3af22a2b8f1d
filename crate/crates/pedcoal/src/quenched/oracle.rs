//! Exact rational one-step laws for tiny populations.
//!
//! [`enumerate_step`] walks every box order, role coin and Mendelian coin of one
//! generation; [`transition_prob`] and [`aggregated_transition_prob`] evaluate the
//! closed formulas in terms of `E[prod (V^_i)_k | V]`, where `V^_i` counts the
//! children whose 0-parent is `i`.

use std::collections::HashMap;

use num_rational::Ratio;

use super::LineageSet;
use crate::partitions::{GroupedPartition, Partition};
use crate::pedigree::{realize_with, OffspringMatrix};

pub type Q = Ratio<i128>;

fn falling(x: i128, k: usize) -> i128 {
    (0..k as i128).map(|t| x - t).product()
}

fn binom(n: i128, k: i128) -> i128 {
    (0..k).fold(1, |acc, t| acc * (n - t) / (t + 1))
}

/// Every permutation of `0..n`, in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Exact law of the state after one step from `lineages`, given `V`.
///
/// All `N!` box orders are enumerated; role coins are enumerated for the
/// individuals that carry lineages (the others cannot matter), and one Mendelian
/// coin per distinct gene.
pub fn enumerate_step(v: &OffspringMatrix, lineages: &LineageSet) -> HashMap<GroupedPartition, Q> {
    let n = v.n();
    assert!(n <= 8, "exhaustive enumeration is for N <= 8");
    let boxes = v.boxes();
    let mut hosts: Vec<usize> = lineages.classes().iter().map(|c| c.0.individual as usize).collect();
    hosts.dedup();
    let b = lineages.len();
    let mut law: HashMap<GroupedPartition, i128> = HashMap::new();
    let mut total = 0i128;
    let mut order = vec![(0u32, 0u32); n];
    let mut swaps = vec![false; n];
    for perm in permutations(n) {
        for (k, &p) in perm.iter().enumerate() {
            order[k] = boxes[p];
        }
        for roles in 0u32..1 << hosts.len() {
            for (t, &h) in hosts.iter().enumerate() {
                swaps[h] = roles >> t & 1 == 1;
            }
            let slice = realize_with(v, &order, &swaps);
            for coins in 0u32..1 << b {
                let c: Vec<bool> = (0..b).map(|t| coins >> t & 1 == 1).collect();
                let mut next = lineages.clone();
                next.step_with(&slice, &c);
                *law.entry(next.state()).or_default() += 1;
                total += 1;
            }
        }
    }
    law.into_iter().map(|(k, c)| (k, Q::new(c, total))).collect()
}

/// Joint law of `(V^_1, ..., V^_N)`: every couple's children split Binomial(V_ij, 1/2).
pub fn zero_parent_counts(v: &OffspringMatrix) -> Vec<(Q, Vec<i128>)> {
    let mut acc: Vec<(Q, Vec<i128>)> = vec![(Q::from_integer(1), vec![0; v.n()])];
    for &(i, j, c) in v.entries() {
        let c = c as i128;
        let mut next = Vec::with_capacity(acc.len() * (c as usize + 1));
        for (p, vh) in &acc {
            for w in 0..=c {
                let mut vh = vh.clone();
                vh[i as usize] += w;
                vh[j as usize] += c - w;
                next.push((*p * Q::new(binom(c, w), 1 << c), vh));
            }
        }
        acc = next;
    }
    acc
}

fn group_sizes(xi: &Partition, eta: &Partition) -> Option<Vec<usize>> {
    let grouping = xi.grouping_in(eta)?;
    let mut k = vec![0usize; eta.len()];
    for g in grouping {
        k[g] += 1;
    }
    Some(k)
}

/// Injective maps `[r] -> [m]`.
fn injections(r: usize, m: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], r: usize, f: &mut impl FnMut(&[usize])) {
        if cur.len() == r {
            f(cur);
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(cur, used, r, f);
                cur.pop();
                used[x] = false;
            }
        }
    }
    rec(&mut Vec::with_capacity(r), &mut vec![false; m], r, f);
}

/// Probability of moving from `xi` to `eta` (both with every gene in its own
/// individual) in one generation given `V`: groups of sizes `k_l` merge into
/// genes of `r` distinct parents.
pub fn transition_prob(v: &OffspringMatrix, xi: &Partition, eta: &Partition) -> Q {
    let Some(k) = group_sizes(xi, eta) else { return Q::from_integer(0) };
    let (n, r, b) = (v.n(), eta.len(), xi.len());
    let law = zero_parent_counts(v);
    let mut sum = Q::from_integer(0);
    injections(r, n, &mut |is| {
        for (p, vh) in &law {
            let prod: i128 = is.iter().zip(&k).map(|(&i, &kl)| falling(vh[i], kl)).product();
            sum += *p * prod;
        }
    });
    let pow2 = Q::new(1, 1 << (b - r));
    sum * pow2 / Q::from_integer(falling(n as i128, b))
}

/// Probability that after one generation from `xi` the complete dispersion of the
/// state equals `eta`: the merged groups land on `r` distinct genes.
pub fn aggregated_transition_prob(v: &OffspringMatrix, xi: &Partition, eta: &Partition) -> Q {
    let Some(k) = group_sizes(xi, eta) else { return Q::from_integer(0) };
    let (n, r, b) = (v.n(), eta.len(), xi.len());
    let law = zero_parent_counts(v);
    let mut sum = Q::from_integer(0);
    injections(r, 2 * n, &mut |genes| {
        // gene g is chromosome g / n of individual g % n
        let mut ktilde = vec![0usize; n];
        for (&g, &kl) in genes.iter().zip(&k) {
            ktilde[g % n] += kl;
        }
        for (p, vh) in &law {
            let prod: i128 = ktilde.iter().enumerate().map(|(i, &kt)| falling(vh[i], kt)).product();
            sum += *p * prod;
        }
    });
    sum / Q::from_integer(1 << b) / Q::from_integer(falling(n as i128, b))
}
