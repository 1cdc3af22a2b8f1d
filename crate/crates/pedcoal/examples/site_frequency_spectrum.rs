//! Pedigree-wise site-frequency spectra of the δ-model: with strong large
//! families (ψ = 0.9) each pedigree has its own SFS; with ψ = 0.1 they agree.
//!
//! ```text
//! cargo run --release --example site_frequency_spectrum -- [loci]
//! ```

use pedcoal::cli::{delta_sfs, max_pairwise_tv};
use pedcoal::genstats::{kingman_sfs, sfs_distance, DeltaModel};

fn main() -> pedcoal::Result<()> {
    let loci = std::env::args().nth(1).map_or(20_000, |a| a.parse().expect("integer"));
    let n = 100;
    for lambda in [1e6, 1.0] {
        for psi in [0.1, 0.5, 0.9] {
            let model = DeltaModel::with_lambda(psi, lambda)?;
            let (per, pooled) = delta_sfs(&model, n, 5, loci, None, 8)?;
            let spectra: Vec<Vec<f64>> = per.iter().map(|a| a.estimate().map(|s| s.proportions)).collect::<pedcoal::Result<_>>()?;
            let pooled = pooled.estimate()?;
            println!(
                "lambda {lambda:>7} psi {psi}: SFS_1..3 of pedigree 0 = {:.3?}, max pairwise TV {:.4}, pooled vs Kingman TV {:.4}",
                &spectra[0][..3],
                max_pairwise_tv(&spectra),
                sfs_distance(&pooled.proportions, &kingman_sfs(n))
            );
        }
    }
    Ok(())
}
