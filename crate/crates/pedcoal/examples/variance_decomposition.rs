//! Split the variance of the total tree length into within- and
//! between-pedigree parts for the δ-model (n = 100, lambda = 1e6).
//!
//! ```text
//! cargo run --release --example variance_decomposition -- [pedigrees] [loci]
//! ```

use pedcoal::genstats::{variance_decomposition, DeltaModel};

fn main() -> pedcoal::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<u64>().expect("integer argument"));
    let pedigrees = args.next().unwrap_or(100);
    let loci = args.next().unwrap_or(200);
    println!("psi   var(T_total)  within  between  clamped");
    for psi in [0.1, 0.25, 0.5, 0.75, 1.0] {
        let model = DeltaModel::with_lambda(psi, 1e6)?;
        let d = variance_decomposition(&model, 100, pedigrees, loci, pedigrees * loci / 10, 2024)?;
        println!("{psi:<5} {:<13.4e} {:<7.4} {:<8.4} {}", d.total, d.within_fraction(), d.between_fraction(), d.clamped);
    }
    Ok(())
}
