//! On one large-family pedigree, run the ε-naive chain on the generation grid
//! and the limit on the pedigree's own paintbox path, and compare pair times.
//!
//! ```text
//! cargo run --release --example naive_vs_limit
//! ```

use pedcoal::limit::{empirical_path, run_flow, run_naive, PathSource, RunSpec, XiIntensity};
use pedcoal::partitions::Partition;
use pedcoal::pedigree::{CanningsModel, Pedigree};
use pedcoal::quenched::default_horizon;
use pedcoal::rng::{stream, Purpose};
use pedcoal::stats::{ks_two_sample, ks_two_sample_critical};

fn main() -> pedcoal::Result<()> {
    let model = CanningsModel::LargeFamilyCouple { n: 2000, psi: 1.0, gamma: 1.0 };
    let c_n = model.c_n_exact().expect("closed form");
    let c_pair = XiIntensity::for_model(&model).expect("catalog limit")?.c_pair();
    let ped = Pedigree::new(model, 5)?;
    let generations = default_horizon(c_n);
    let path = empirical_path(&ped, c_n, generations, Some(0.1))?;
    println!("c_N = {c_n:.3e}, c_pair = {c_pair:.4}, {} large-family generations in {generations}", path.len());

    let xi0 = Partition::singletons(2);
    let spec = RunSpec::default();
    let (mut naive, mut limit) = (Vec::new(), Vec::new());
    for k in 0..10_000 {
        let a = run_naive(&path, c_n, c_pair, &xi0, generations, &spec, &mut stream(5, Purpose::Coalescent, k, 0))?;
        let b = run_flow(&mut PathSource::new(&path), Some(path.horizon()), c_pair, &xi0, &spec, &mut stream(5, Purpose::Coalescent, k, 1));
        naive.extend(a.mrca_time());
        limit.extend(b.mrca_time());
    }
    let d = ks_two_sample(&naive, &limit);
    println!("KS {d:.4}, critical value at 0.001: {:.4}", ks_two_sample_critical(naive.len(), limit.len(), 1e-3));
    Ok(())
}
