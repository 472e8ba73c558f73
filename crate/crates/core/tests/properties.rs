mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riesz_eq::energy::EnergyForm;
use riesz_eq::equilibrium::{random_probability, solve, W_FLOOR};
use riesz_eq::fractal::{moran_dimension, BasePoint, CellTree, Ifs, Similitude};
use riesz_eq::harness::{self, Experiment, ExperimentConfig, SGridSpec, Spacing};
use riesz_eq::measure::CellMeasure;

use common::{cantor, cantor_ifs};

/// Homotheties with the given scales laid out left to right with equal gaps.
fn spaced_line_ifs(scales: &[f64]) -> Ifs {
    let gap = (1.0 - scales.iter().sum::<f64>()) / (scales.len() - 1) as f64;
    let mut at = 0.0;
    let maps = scales
        .iter()
        .map(|&l| {
            let m = Similitude::homothety(l, &[at]).unwrap();
            at += l + gap;
            m
        })
        .collect();
    Ifs::new(maps).unwrap().validated().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn equal_scales_give_log_ratio(n in 2usize..7, frac in 0.05..0.95f64) {
        let l = frac / n as f64;
        let d = moran_dimension(&vec![l; n]).unwrap();
        prop_assert!((d - (n as f64).ln() / (1.0 / l).ln()).abs() < 1e-10);
    }

    #[test]
    fn natural_weights_refine_consistently(a in 0.1..0.4f64, b in 0.1..0.4f64, c in 0.05..0.2f64) {
        let ifs = Arc::new(spaced_line_ifs(&[a, b, c]));
        let fine = Arc::new(CellTree::build(ifs.clone(), 4, BasePoint::Barycenter).unwrap());
        let coarse = CellTree::build(ifs, 3, BasePoint::Barycenter).unwrap();
        let lam = CellMeasure::natural(fine);
        let agg = lam.level_masses(3).unwrap();
        for (x, y) in agg.iter().zip(coarse.natural_weights()) {
            prop_assert!((x - y).abs() < 1e-15);
        }
        prop_assert!((lam.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spatial_rescaling_scales_energy(factor in 0.1..3.0f64, s in 0.1..0.6f64) {
        let base = cantor(4);
        let scaled = Arc::new(
            CellTree::build(Arc::new(cantor_ifs().dilated(factor).unwrap()), 4, BasePoint::Barycenter).unwrap(),
        );
        let e0 = EnergyForm::assemble(base.clone(), s, 2).unwrap().energy(&CellMeasure::natural(base)).unwrap();
        let e1 = EnergyForm::assemble(scaled.clone(), s, 2).unwrap().energy(&CellMeasure::natural(scaled)).unwrap();
        prop_assert!((e1 / e0 / factor.powf(-s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_form_symmetric_and_bounded_below(s in 0.1..0.62f64, seed in 0u64..1000) {
        let tree = cantor(4);
        let form = EnergyForm::assemble(tree.clone(), s, 2).unwrap();
        let n = form.len();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(form.entry(a, b), form.entry(b, a));
            }
        }
        let floor = form.matrix().iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(floor > 0.0);
        let mu = random_probability(&tree, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(form.energy(&mu).unwrap() >= floor);
    }

    #[test]
    fn solver_certificate_and_monotone_trace(s in 0.1..0.62f64, seed in 0u64..1000) {
        let tree = cantor(5);
        let form = EnergyForm::assemble(tree.clone(), s, 2).unwrap();
        let init = random_probability(&tree, &mut ChaCha8Rng::seed_from_u64(seed));
        let tol = 1e-9;
        let r = solve(&form, Some(&init), tol, 10_000).unwrap();
        prop_assert!(r.converged);
        let w = r.weights.weights();
        prop_assert!(w.iter().all(|v| *v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for pair in r.energy_trace.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-13));
        }
        let g = form.apply(w);
        let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = g.iter().zip(w).filter(|(_, w)| **w > W_FLOOR).map(|(g, _)| *g).fold(0.0, f64::max);
        let support_lo = g.iter().zip(w).filter(|(_, w)| **w > W_FLOOR).map(|(g, _)| *g).fold(f64::INFINITY, f64::min);
        prop_assert!((hi - support_lo) / support_lo <= tol);
        prop_assert!((support_lo - lo) / support_lo <= tol);
    }

    #[test]
    fn resolved_grids_stay_inside(lo in 0.01..0.6f64, span in 0.0..0.6f64, count in 1usize..8, log in any::<bool>()) {
        let d = 2f64.ln() / 3f64.ln();
        let spec = SGridSpec {
            min: Some(lo),
            max: Some(lo + span),
            count: Some(count),
            spacing: if log { Spacing::LogGap } else { Spacing::Linear },
            ..Default::default()
        };
        if let Ok(grid) = spec.resolve(d) {
            prop_assert!(grid.iter().all(|s| *s > 0.0 && *s < d));
            prop_assert!(grid.windows(2).all(|w| w[1] > w[0]));
        } else {
            prop_assert!(lo + span >= d);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn exit_code_zero_iff_checks_pass(offset in -3e-10..3e-10f64) {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::default();
        cfg.set_fractal(cantor_ifs().to_definition());
        cfg.expected_dimension = Some(2f64.ln() / 3f64.ln() + offset);
        cfg.out = dir.path().to_path_buf();
        let report = harness::run(Experiment::Dim, &cfg).unwrap();
        let all = report.checks.iter().all(|c| c.passed);
        prop_assert_eq!(report.exit_code() == 0, all);
        if offset.abs() < 0.9e-10 {
            prop_assert!(all);
        } else if offset.abs() > 1.1e-10 {
            prop_assert!(!all);
        }
    }
}
