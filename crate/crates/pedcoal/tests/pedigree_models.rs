use pedcoal::pedigree::{pair_coalescence_prob, realize_slice, CanningsModel, OffspringMatrix, TwoSexInner};
use pedcoal::rng::{stream, Purpose};
use pedcoal::stats::{ks_two_sample, ks_two_sample_critical};
use rayon::prelude::*;

#[test]
fn large_family_event_frequency() {
    let n = 1000;
    let model = CanningsModel::LargeFamilyCouple { n, psi: 0.5, gamma: 1.0 };
    let draws = 200_000u64;
    let events: u64 = (0..draws)
        .into_par_iter()
        .map(|r| {
            let v = model.sample_matrix(&mut stream(1, Purpose::Misc, r, 0));
            v.entries().iter().any(|e| e.2 as usize >= n / 4) as u64
        })
        .sum();
    let p = 1.0 / n as f64;
    let f = events as f64 / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((f - p).abs() < 4.0 * se, "event frequency {f}");
}

#[test]
fn closed_form_c_n_matches_monte_carlo() {
    let n = 40;
    for model in [
        CanningsModel::WrightFisher { n },
        CanningsModel::LargeFamilyCouple { n, psi: 0.6, gamma: 0.5 },
        CanningsModel::LargeFamilyIndividual { n, psi: 0.6, gamma: 0.5 },
        CanningsModel::TwoSex { n, r: 0.5, inner: TwoSexInner::WrightFisher },
    ] {
        let est = pair_coalescence_prob(&model, 400_000, 2);
        let exact = model.c_n_exact().unwrap();
        assert!((est.value - exact).abs() < 4.0 * est.se, "{}: {} vs {exact}", model.name(), est.value);
    }
}

#[test]
fn constant_offspring_gives_quarter_over_n_minus_one() {
    // a ring of couples, every individual with two children
    let n = 6usize;
    let v = OffspringMatrix::from_entries(n, (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 1))).unwrap();
    assert!(v.totals().iter().all(|&t| t == 2));
    assert!((v.pair_coalescence_prob() - 1.0 / (4.0 * (n as f64 - 1.0))).abs() < 1e-15);
    let y = v.generation_paintbox();
    assert!(y.weights().iter().all(|&w| (w - 1.0 / 12.0).abs() < 1e-15));
}

#[test]
fn single_couple_roles_are_fair() {
    let n = 50;
    let v = OffspringMatrix::from_entries(n, [(0, 1, n as u32)]).unwrap();
    let mut first = 0;
    let reps = 400;
    for r in 0..reps {
        let s = realize_slice(&v, &mut stream(3, Purpose::Misc, r, 0));
        for c in 0..n {
            let pair = (s.p0[c].min(s.p1[c]), s.p0[c].max(s.p1[c]));
            assert_eq!(pair, (0, 1));
            first += (s.p0[c] == 0) as u32;
        }
    }
    let total = (reps as usize * n) as f64;
    let f = first as f64 / total;
    assert!((f - 0.5).abs() < 4.0 * (0.25 / total).sqrt());
}

fn leading_weights(model: &CanningsModel, seed: u64, draws: u64) -> Vec<f64> {
    (0..draws)
        .into_par_iter()
        .map(|r| model.sample_matrix(&mut stream(seed, Purpose::Misc, r, 0)).generation_paintbox().weights()[0])
        .collect()
}

#[test]
fn two_sex_star_matches_individual_model() {
    // star events happen with probability lambda / N = 2 / N, so the individual
    // model is run with N^-gamma = 2 / N; the star's own background children
    // shift its weight by O(1/N), below resolution at N = 1000
    let n = 1000;
    let psi = 0.5;
    let star = CanningsModel::TwoSex { n, r: 0.5, inner: TwoSexInner::Star { lambda: 2.0, beta: psi } };
    let gamma = 1.0 - 2f64.ln() / (n as f64).ln();
    let individual = CanningsModel::LargeFamilyIndividual { n, psi, gamma };
    let draws = 100_000;
    let a = leading_weights(&star, 4, draws);
    let b = leading_weights(&individual, 5, draws);
    let d = ks_two_sample(&a, &b);
    assert!(d < ks_two_sample_critical(a.len(), b.len(), 1e-3), "KS {d}");
}
