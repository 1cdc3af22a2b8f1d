use pedcoal::partitions::{set_partitions, Partition};
use pedcoal::pedigree::{CanningsModel, OffspringMatrix};
use pedcoal::quenched::oracle::{aggregated_transition_prob, enumerate_step, transition_prob, Q};
use pedcoal::quenched::{GenePosition, LineageSet};
use pedcoal::rng::{stream, Purpose};
use rand::Rng;

fn check(v: &OffspringMatrix, xi: &Partition, positions: &[GenePosition]) {
    let ls = LineageSet::from_positions(positions, v.n()).unwrap();
    assert_eq!(&ls.partition(), xi);
    let law = enumerate_step(v, &ls);
    let total: Q = law.values().copied().sum();
    assert_eq!(total, Q::from_integer(1));
    for eta in xi.coarsenings() {
        let dispersed: Q = law.iter().filter(|(s, _)| s.is_dispersed() && s.partition() == &eta).map(|x| *x.1).sum();
        let any: Q = law.iter().filter(|(s, _)| s.partition() == &eta).map(|x| *x.1).sum();
        assert_eq!(dispersed, transition_prob(v, xi, &eta), "V = {:?}, {xi} -> {eta}", v.entries());
        assert_eq!(any, aggregated_transition_prob(v, xi, &eta), "V = {:?}, {xi} -> {eta}", v.entries());
    }
}

/// Put the blocks of `xi` in distinct individuals on random chromosomes.
fn placement(xi: &Partition, n: usize, rng: &mut impl Rng) -> Vec<GenePosition> {
    let mut ind: Vec<u32> = (0..n as u32).collect();
    for i in (1..ind.len()).rev() {
        ind.swap(i, rng.random_range(0..=i));
    }
    let chrom: Vec<u8> = (0..xi.len()).map(|_| rng.random_range(0..2)).collect();
    (0..xi.n()).map(|e| {
        let k = xi.block_of(e);
        GenePosition::new(chrom[k], ind[k])
    }).collect()
}

#[test]
fn enumerated_steps_match_formulas() {
    let mut rng = stream(2024, Purpose::Misc, 0, 0);
    let mut cases = vec![
        OffspringMatrix::from_entries(3, [(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap(),
        OffspringMatrix::from_entries(4, [(0, 1, 4)]).unwrap(),
        OffspringMatrix::from_entries(5, [(0, 1, 3), (2, 3, 1), (3, 4, 1)]).unwrap(),
    ];
    for n in [4, 5, 6] {
        for model in [
            CanningsModel::WrightFisher { n },
            CanningsModel::LargeFamilyCouple { n, psi: 0.5, gamma: 0.1 },
        ] {
            cases.push(model.sample_matrix(&mut rng));
        }
    }
    for v in &cases {
        for m in 1..=3 {
            for xi in set_partitions(m) {
                if xi.len() > v.n() {
                    continue;
                }
                let pos = placement(&xi, v.n(), &mut rng);
                check(v, &xi, &pos);
            }
        }
    }
}
