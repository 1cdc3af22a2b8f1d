//! The limiting coalescents of the large-family models: rates, a sampled
//! paintbox path, and the two exact samplers on that path.
//!
//! ```text
//! cargo run --release --example limit_coalescent
//! ```

use pedcoal::limit::{run_flow, run_intensity, run_jump_hold, sample_psi, PathSource, RunSpec, XiIntensity};
use pedcoal::partitions::Partition;
use pedcoal::rng::{stream, Purpose};
use pedcoal::stats::MeanVar;

fn main() -> pedcoal::Result<()> {
    for psi in [0.5, 1.0] {
        let xi = XiIntensity::large_family_couple(psi, 1.0)?;
        println!(
            "{xi}: atom rate {:.4}, c_pair {:.4}, total pair rate {:.4}",
            xi.atom_rate().unwrap(),
            xi.c_pair(),
            xi.atom_pair_rate().unwrap() + xi.c_pair()
        );
        let pair: MeanVar = (0..100_000)
            .filter_map(|k| run_intensity(&xi, &Partition::singletons(2), &RunSpec::default(), &mut stream(1, Purpose::Coalescent, k, 0)).ok()?.mrca_time())
            .collect();
        println!("  annealed pair MRCA {:.4} ± {:.4}", pair.mean(), pair.se());
    }

    let xi = XiIntensity::large_family_couple(1.0, 1.0)?;
    let path = sample_psi(&xi, 20.0, stream(2, Purpose::Psi, 0, 0))?;
    println!("\nfixed path: {} atoms on [0, 20]", path.len());
    let xi0 = Partition::singletons(4);
    let (mut flow, mut hold) = (MeanVar::default(), MeanVar::default());
    for k in 0..50_000 {
        let a = run_flow(&mut PathSource::new(&path), Some(20.0), xi.c_pair(), &xi0, &RunSpec::default(), &mut stream(2, Purpose::Coalescent, k, 0));
        let b = run_jump_hold(&mut PathSource::new(&path), Some(20.0), xi.c_pair(), &xi0, &RunSpec::default(), &mut stream(2, Purpose::Coalescent, k, 1));
        flow.extend(a.mrca_time());
        hold.extend(b.mrca_time());
    }
    println!("quenched MRCA of 4: flow {:.4} ± {:.4}, jump-hold {:.4} ± {:.4}", flow.mean(), flow.se(), hold.mean(), hold.se());

    let one = run_flow(&mut PathSource::new(&path), Some(20.0), xi.c_pair(), &Partition::singletons(5), &RunSpec::default(), &mut stream(3, Purpose::Coalescent, 0, 0));
    one.write_text(std::io::stdout())?;
    Ok(())
}
