mod common;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use riesz_eq::density::random_words;
use riesz_eq::energy::{
    ballmass_radii, interval_tree, potential_at, potential_by_ballmass, EnergyForm,
};
use riesz_eq::equilibrium::{default_max_iter, solve};
use riesz_eq::fractal::{moran_dimension, AttractorPoint, BasePoint, CellTree};
use riesz_eq::measure::{cell_discrepancy, CellMeasure};

use common::{asymmetric_ifs, cantor, cantor_ifs, direct_interval_energy};

#[test]
fn interval_energy_matches_direct_double_sum() {
    let tree = interval_tree(9).unwrap();
    let s = 0.5;
    let form = EnergyForm::assemble_interval(tree.clone(), s).unwrap();
    let eq = solve(&form, None, 1e-8, default_max_iter(&form)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let raw: Vec<f64> = (0..tree.len()).map(|_| rng.gen::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let random = CellMeasure::new(tree.clone(), raw.iter().map(|v| v / total).collect()).unwrap();
    for mu in [&eq.weights, &random, &CellMeasure::uniform(tree.clone())] {
        let fast = form.energy(mu).unwrap();
        let direct = direct_interval_energy(&tree, mu.weights(), s);
        assert!((fast / direct - 1.0).abs() < 1e-6, "{fast} vs {direct}");
    }
}

#[test]
fn interval_energy_other_exponents() {
    let tree = interval_tree(6).unwrap();
    let u = CellMeasure::uniform(tree.clone());
    for s in [0.1, 0.3, 0.7, 0.9] {
        let form = EnergyForm::assemble_interval(tree.clone(), s).unwrap();
        let direct = direct_interval_energy(&tree, u.weights(), s);
        let fast = form.energy(&u).unwrap();
        assert!(
            (fast / direct - 1.0).abs() < 1e-6,
            "s={s}: {fast} vs {direct}"
        );
        // density 1/2 on [-1, 1]
        let exact = 2.0f64.powf(1.0 - s) / ((1.0 - s) * (2.0 - s));
        assert!(
            (fast / exact - 1.0).abs() < 1e-10,
            "s={s}: {fast} vs {exact}"
        );
    }
}

#[test]
fn dual_potentials_agree_on_cantor() {
    let tree = cantor(8);
    let ifs = tree.ifs().clone();
    let lam = CellMeasure::natural(tree.clone());
    for s in [0.3, 0.5, 0.6] {
        for w in random_words(&ifs, 10, 8, 21) {
            let x = AttractorPoint::of_cell(&ifs, w);
            let direct = potential_at(&lam, &x, s).unwrap();
            let (r0, r1) = ballmass_radii(&lam, &x).unwrap();
            let bm = potential_by_ballmass(&lam, &x, s, r0, r1).unwrap();
            let rel = (bm.value / direct - 1.0).abs();
            assert!(rel < 1e-3, "s={s}: relative error {rel}");
            assert!(
                (bm.value - direct).abs() <= bm.error_bar,
                "s={s}: outside error bar"
            );
        }
    }
}

#[test]
fn moran_reference_values() {
    let d = moran_dimension(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
    assert!((d - 2f64.ln() / 3f64.ln()).abs() < 1e-10);
    let d = moran_dimension(&[0.5, 0.25]).unwrap();
    let expected = (2.0 / (5f64.sqrt() - 1.0)).log2();
    assert!((d - expected).abs() < 1e-10);
    // natural weights of the asymmetric set are (t^2, t) in ascending-scale order
    let t = (5f64.sqrt() - 1.0) / 2.0;
    let lam = asymmetric_ifs().natural_weights().to_vec();
    assert!((lam[0] - t * t).abs() < 1e-12 && (lam[1] - t).abs() < 1e-12);
}

#[test]
fn rescaled_copy_obeys_scaling_law() {
    let ifs = cantor_ifs();
    let small = Arc::new(ifs.dilated(1.0 / 3.0).unwrap());
    let a = cantor(8);
    let b = Arc::new(CellTree::build(small, 8, BasePoint::Barycenter).unwrap());
    for s in [0.3, 0.5, 0.6] {
        let fa = EnergyForm::assemble(a.clone(), s, 3).unwrap();
        let fb = EnergyForm::assemble(b.clone(), s, 3).unwrap();
        let ra = solve(&fa, None, 1e-10, default_max_iter(&fa)).unwrap();
        let rb = solve(&fb, None, 1e-10, default_max_iter(&fb)).unwrap();
        let ratio = rb.energy_value / ra.energy_value;
        assert!(
            (ratio / 3f64.powf(s) - 1.0).abs() < 1e-6,
            "s={s}: ratio {ratio}"
        );
        let diff = ra
            .weights
            .weights()
            .iter()
            .zip(rb.weights.weights())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "s={s}: masses differ by {diff}");
    }
}

#[test]
fn natural_measure_is_a_fixed_point_of_the_discrepancy() {
    let tree = cantor(6);
    let lam = CellMeasure::natural(tree.clone());
    for m in 0..=6 {
        assert_eq!(cell_discrepancy(&lam, &lam, m).unwrap(), 0.0);
    }
}
