//! Exact one-generation transition law of a few lineages in a small pedigree,
//! by enumerating every box order, parent role and Mendelian coin.
//!
//! ```text
//! cargo run --example transition_oracle
//! ```

use pedcoal::partitions::{GroupedPartition, Partition};
use pedcoal::pedigree::OffspringMatrix;
use pedcoal::quenched::oracle::{enumerate_step, transition_prob};
use pedcoal::quenched::LineageSet;

fn main() -> pedcoal::Result<()> {
    // N = 4: couple (1,2) has two children, (3,4) one, (1,4) one
    let v = OffspringMatrix::from_entries(4, [(0, 1, 2), (2, 3, 1), (0, 3, 1)])?;
    println!("totals V_i = {:?}", v.totals());
    let xi0 = GroupedPartition::from(Partition::singletons(3));
    let lineages = LineageSet::init_sample(&xi0, v.n())?;
    let law = enumerate_step(&v, &lineages);
    let mut rows: Vec<_> = law.iter().collect();
    rows.sort_by_key(|(eta, _)| eta.to_string());
    for (eta, p) in rows {
        println!("  -> {eta}: {p}");
    }
    let xi = Partition::singletons(3);
    for eta in ["{1,2|3}", "{1,2,3}"] {
        let eta: Partition = eta.parse()?;
        println!("closed form {xi} -> {eta}: {}", transition_prob(&v, &xi, &eta));
    }
    Ok(())
}
