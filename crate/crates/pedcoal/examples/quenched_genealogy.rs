//! Trace many unlinked loci through one fixed Wright-Fisher pedigree and
//! compare the rescaled pair coalescence times with Exp(1).
//!
//! ```text
//! cargo run --release --example quenched_genealogy
//! ```

use pedcoal::genstats::{branch_spectrum, kingman_sfs, sfs_estimate};
use pedcoal::partitions::{GroupedPartition, Partition};
use pedcoal::pedigree::{CanningsModel, Pedigree};
use pedcoal::quenched::{run_loci, RunOptions};
use pedcoal::stats::ks_one_sample;

fn main() -> pedcoal::Result<()> {
    let model = CanningsModel::WrightFisher { n: 500 };
    let c_n = model.c_n_exact().expect("closed form");
    let ped = Pedigree::new(model, 11)?;
    let n = 6;
    let xi0 = GroupedPartition::from(Partition::singletons(n));
    let runs = run_loci(&ped, &xi0, 0..2000, &RunOptions::to_mrca(c_n), 11)?;

    println!("first locus:");
    runs[0].tree.write_text(std::io::stdout())?;

    let times: Vec<f64> = runs.iter().flat_map(|r| r.tree.pair_times()).flatten().collect();
    let ks = ks_one_sample(&times, |t| 1.0 - (-t).exp());
    println!("\n{} pair times, KS distance to Exp(1): {ks:.4}", times.len());

    let spectra: Vec<_> = runs.iter().map(|r| branch_spectrum(&r.tree)).collect();
    let sfs = sfs_estimate(&spectra)?;
    for (i, (p, k)) in sfs.proportions.iter().zip(kingman_sfs(n)).enumerate() {
        println!("  SFS_{} = {p:.4} ± {:.4}  (Kingman {k:.4})", i + 1, sfs.stderr[i]);
    }
    Ok(())
}
