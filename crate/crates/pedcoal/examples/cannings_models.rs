//! Sample offspring matrices from the Cannings models and estimate the pair
//! coalescence probability `c_N`.
//!
//! ```text
//! cargo run --release --example cannings_models
//! ```

use pedcoal::pedigree::{c_n, pair_coalescence_prob, CanningsModel, FitnessLaw, Pedigree, TwoSexInner};
use pedcoal::rng::{stream, Purpose};

fn main() -> pedcoal::Result<()> {
    let n = 200;
    let models = [
        CanningsModel::WrightFisher { n },
        CanningsModel::RandomFitness { n, fitness: FitnessLaw::Gamma { shape: 2.0 } },
        CanningsModel::LargeFamilyCouple { n, psi: 0.5, gamma: 1.0 },
        CanningsModel::LargeFamilyIndividual { n, psi: 0.5, gamma: 1.0 },
        CanningsModel::TwoSex { n, r: 0.5, inner: TwoSexInner::WrightFisher },
    ];
    println!("{:<26} {:>12} {:>12} {:>10}", "model", "exact c_N", "MC c_N", "MC se");
    for m in &models {
        m.validate()?;
        let est = pair_coalescence_prob(m, 200_000, 7);
        let exact = m.c_n_exact().map_or("-".to_string(), |c| format!("{c:.6}"));
        println!("{:<26} {exact:>12} {:>12.6} {:>10.2e}", m.name(), est.value, est.se);
    }

    // one matrix, its paintbox and its realized parent table
    let m = CanningsModel::LargeFamilyCouple { n: 10, psi: 0.8, gamma: 1.0 };
    let v = m.sample_matrix(&mut stream(3, Purpose::Misc, 0, 0));
    println!("\nN = 10 large-family matrix: {:?}", v.entries());
    println!("generation paintbox {}", v.generation_paintbox());
    let ped = Pedigree::new(m.clone(), 3)?;
    let s = ped.slice(0);
    for c in 0..s.n() {
        println!("  child {} <- parents ({}, {})", c + 1, s.p0[c] + 1, s.p1[c] + 1);
    }
    println!("c_N used for rescaling: {:?}", c_n(&m, 10_000, 3));
    Ok(())
}
