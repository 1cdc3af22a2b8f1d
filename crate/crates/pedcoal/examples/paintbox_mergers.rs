//! Partitions, paintboxes and the merger law they induce.
//!
//! ```text
//! cargo run --example paintbox_mergers
//! ```

use pedcoal::paintbox::Paintbox;
use pedcoal::partitions::{set_partitions, Partition};
use pedcoal::rng::{stream, Purpose};
use std::collections::HashMap;

fn main() -> pedcoal::Result<()> {
    let xi: Partition = "{1,2|3|4}".parse()?;
    let eta: Partition = "{1,2,3|4}".parse()?;
    println!("xi = {xi}, eta = {eta}, grouping of xi in eta: {:?}", xi.grouping_in(&eta));

    // one large family in a couple: ψ/4 on each of its four chromosomes
    let x = Paintbox::uniform(4, 0.25)?;
    println!("x = {x}, <x,x> = {}", x.l2sq());
    let y = x.phi();
    println!("phi(x) = {y}, <y,y> = {}", y.l2sq());

    let b = 3;
    let start = Partition::singletons(b);
    let mut total = 0.0;
    for eta in set_partitions(b) {
        let p = y.prob(&start, &eta);
        total += p;
        println!("  p(y; {start} -> {eta}) = {p:.6}");
    }
    println!("sum = {total}");

    let mut rng = stream(1, Purpose::Misc, 0, 0);
    let mut seen: HashMap<Partition, u32> = HashMap::new();
    let draws = 100_000;
    for _ in 0..draws {
        *seen.entry(y.sample_merger(b, &mut rng)).or_default() += 1;
    }
    let mut rows: Vec<_> = seen.into_iter().collect();
    rows.sort_by(|a, b| a.0.to_string().cmp(&b.0.to_string()));
    for (eta, k) in rows {
        println!("  sampled {eta}: {:.4} (exact {:.4})", k as f64 / draws as f64, y.prob(&start, &eta));
    }
    Ok(())
}
