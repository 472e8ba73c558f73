#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use riesz_eq::fractal::{BasePoint, CellTree, Ifs, Similitude};

pub fn cantor_ifs() -> Arc<Ifs> {
    Arc::new(
        Ifs::new(vec![
            Similitude::homothety(1.0 / 3.0, &[0.0]).unwrap(),
            Similitude::homothety(1.0 / 3.0, &[2.0 / 3.0]).unwrap(),
        ])
        .unwrap()
        .validated()
        .unwrap(),
    )
}

pub fn asymmetric_ifs() -> Arc<Ifs> {
    Arc::new(
        Ifs::new(vec![
            Similitude::homothety(0.5, &[0.5]).unwrap(),
            Similitude::homothety(0.25, &[0.0]).unwrap(),
        ])
        .unwrap()
        .validated()
        .unwrap(),
    )
}

pub fn tree(ifs: &Arc<Ifs>, level: usize) -> Arc<CellTree> {
    Arc::new(CellTree::build(ifs.clone(), level, BasePoint::Barycenter).unwrap())
}

pub fn cantor(level: usize) -> Arc<CellTree> {
    tree(&cantor_ifs(), level)
}

/// Repository config directory.
pub fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Composite Simpson rule with `panels` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// `∫∫ |x - y|^{-s}` over `[0, h] x [kh, (k+1)h]` as a one-dimensional integral
/// against the overlap triangle, with `u = t^{1/(1-s)}` removing the singularity at 0.
pub fn pair_integral(k: usize, h: f64, s: f64) -> f64 {
    let c = k as f64 * h;
    let tri = |u: f64| (h - (u - c).abs()).max(0.0);
    let smooth = |a: f64, b: f64| simpson(|u| u.powf(-s) * tri(u), a, b, 2000);
    let m = 1.0 / (1.0 - s);
    let from_zero = |b: f64| simpson(|t| tri(t.powf(m)) * m, 0.0, b.powf(1.0 / m), 2000);
    match k {
        0 => 2.0 * from_zero(h),
        1 => from_zero(h) + smooth(h, 2.0 * h),
        _ => smooth(c - h, c) + smooth(c, c + h),
    }
}

/// Energy of cell masses `w` on the equal-cell interval tree, summed pair by pair.
pub fn direct_interval_energy(tree: &CellTree, w: &[f64], s: f64) -> f64 {
    let n = tree.len();
    let h = 2.0 / n as f64;
    let table: Vec<f64> = (0..n).map(|k| pair_integral(k, h, s) / (h * h)).collect();
    let mut total = 0.0;
    for a in 0..n {
        for b in 0..n {
            let k = ((tree.center(a)[0] - tree.center(b)[0]).abs() / h).round() as usize;
            total += w[a] * w[b] * table[k];
        }
    }
    total
}
