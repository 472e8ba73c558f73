//! Measures on the attractor represented by level-`M` cell weights.
//!
//! Below level `M` a cell's weight is split among its children in the
//! natural proportions `L_i^d`, so every cell measure is a finite mixture of
//! rescaled copies of the natural measure. That is exact for the natural
//! measure itself and is the discretization model for everything else.

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::fractal::{AttractorPoint, CellTree, Ifs, Point, Similitude, Word};
use crate::{Error, Result};

/// Default relative resolution for ball-mass queries.
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

const PROBABILITY_TOL: f64 = 1e-10;
const MAX_DESCENT_DEPTH: usize = 4000;

#[derive(Debug, Clone)]
pub struct CellMeasure {
    tree: Arc<CellTree>,
    /// `levels[m]` holds the masses of the level-`m` cells; `levels[M]` are the weights.
    levels: Vec<Vec<f64>>,
    probability: bool,
}

impl CellMeasure {
    /// Any finite nonnegative weights; sub-probability and scaled measures are allowed.
    pub fn new(tree: Arc<CellTree>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != tree.len() {
            return Err(Error::invalid(format!(
                "{} weights for a tree of {} cells",
                weights.len(),
                tree.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid(format!(
                "weight {w} is not a finite nonnegative number"
            )));
        }
        let n = tree.ifs().len();
        let m = tree.level();
        let mut levels = vec![Vec::new(); m + 1];
        levels[m] = weights;
        for k in (0..m).rev() {
            let size = n.pow(k as u32);
            let mut agg = vec![0.0; size];
            for (j, w) in levels[k + 1].iter().enumerate() {
                agg[j % size] += w;
            }
            levels[k] = agg;
        }
        let total = levels[0][0];
        Ok(CellMeasure {
            tree,
            levels,
            probability: (total - 1.0).abs() < PROBABILITY_TOL,
        })
    }

    /// Weights that must sum to one.
    pub fn probability(tree: Arc<CellTree>, weights: Vec<f64>) -> Result<Self> {
        let mu = Self::new(tree, weights)?;
        if !mu.probability {
            return Err(Error::invalid(format!(
                "weights sum to {} rather than 1",
                mu.total()
            )));
        }
        Ok(mu)
    }

    /// The natural measure: weight `scale(alpha)^d` on every cell.
    pub fn natural(tree: Arc<CellTree>) -> Self {
        let w = tree.natural_weights().to_vec();
        Self::new(tree, w).expect("natural weights are valid")
    }

    /// Weights `f_alpha * lambda_alpha` for a density against the natural measure.
    pub fn from_density(tree: Arc<CellTree>, density: &[f64]) -> Result<Self> {
        if density.len() != tree.len() {
            return Err(Error::invalid("density length does not match the tree"));
        }
        let w = density
            .iter()
            .zip(tree.natural_weights())
            .map(|(f, l)| f * l)
            .collect();
        Self::new(tree, w)
    }

    /// Density given on a coarser level `m`, extended as a cell-wise constant.
    pub fn from_coarse_density(tree: Arc<CellTree>, m: usize, density: &[f64]) -> Result<Self> {
        let n = tree.ifs().len();
        if m > tree.level() || density.len() != n.pow(m as u32) {
            return Err(Error::invalid("coarse density does not match level"));
        }
        let size = density.len();
        let fine: Vec<f64> = (0..tree.len()).map(|idx| density[idx % size]).collect();
        Self::from_density(tree, &fine)
    }

    pub fn point_mass(tree: Arc<CellTree>, idx: usize) -> Result<Self> {
        if idx >= tree.len() {
            return Err(Error::invalid("cell index out of range"));
        }
        let mut w = vec![0.0; tree.len()];
        w[idx] = 1.0;
        Self::new(tree, w)
    }

    pub fn uniform(tree: Arc<CellTree>) -> Self {
        let n = tree.len();
        Self::new(tree, vec![1.0 / n as f64; n]).expect("uniform weights are valid")
    }

    pub fn tree(&self) -> &Arc<CellTree> {
        &self.tree
    }

    pub fn weights(&self) -> &[f64] {
        &self.levels[self.tree.level()]
    }

    pub fn into_weights(mut self) -> Vec<f64> {
        self.levels.pop().unwrap_or_default()
    }

    pub fn total(&self) -> f64 {
        self.levels[0][0]
    }

    /// False for sub-probability and otherwise rescaled measures.
    pub fn is_probability(&self) -> bool {
        self.probability
    }

    /// Masses `mu(phi_alpha(A))` of all words of length `m <= M`.
    pub fn level_masses(&self, m: usize) -> Result<&[f64]> {
        self.levels
            .get(m)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::invalid(format!("level {m} exceeds tree level")))
    }

    /// Mass of any cell, including cells below level `M` (natural splitting).
    pub fn cell_mass(&self, word: &Word) -> f64 {
        let mut c = Cursor::root(self);
        for &i in word.indices().iter().rev() {
            c = c.child(self, i as usize);
        }
        c.mass
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.tree.clone(),
            self.weights().iter().map(|w| w * factor).collect(),
        )
    }

    pub(crate) fn same_tree(&self, other: &CellMeasure) -> bool {
        Arc::ptr_eq(&self.tree, &other.tree) || self.tree.same_as(&other.tree)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "word,weight")?;
        for (idx, w) in self.weights().iter().enumerate() {
            writeln!(out, "{},{:.16e}", self.tree.word(idx), w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(tree: Arc<CellTree>, input: R) -> Result<Self> {
        let n = tree.ifs().len();
        let mut weights = vec![f64::NAN; tree.len()];
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let (word, weight) = line.split_once(',').ok_or_else(|| {
                Error::invalid(format!("line {}: expected word,weight", lineno + 1))
            })?;
            let word: Word = word.parse()?;
            if word.len() != tree.level() || word.indices().iter().any(|&i| i as usize >= n) {
                return Err(Error::invalid(format!(
                    "line {}: word {word} not in tree",
                    lineno + 1
                )));
            }
            let w: f64 = weight
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("line {}: bad weight", lineno + 1)))?;
            weights[word.index(n)] = w;
        }
        if weights.iter().any(|w| w.is_nan()) {
            return Err(Error::invalid("measure file does not list every cell"));
        }
        Self::new(tree, weights)
    }
}

/// Position in the (infinite) cell hierarchy during a descent: the global
/// word has length `len`, its last `min(len, M)` letters index `levels`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cursor {
    len: usize,
    idx: usize,
    pub(crate) mass: f64,
}

impl Cursor {
    pub(crate) fn root(mu: &CellMeasure) -> Self {
        Cursor {
            len: 0,
            idx: 0,
            mass: mu.total(),
        }
    }

    /// The cell `(i, word)`: letter `i` applied innermost.
    pub(crate) fn child(self, mu: &CellMeasure, i: usize) -> Self {
        let m = mu.tree.level();
        if self.len < m {
            let n = mu.tree.ifs().len();
            let idx = i * n.pow(self.len as u32) + self.idx;
            Cursor {
                len: self.len + 1,
                idx,
                mass: mu.levels[self.len + 1][idx],
            }
        } else {
            Cursor {
                len: self.len + 1,
                idx: self.idx,
                mass: self.mass * mu.tree.ifs().natural_weights()[i],
            }
        }
    }
}

/// A closed ball `B(center, radius)` and the relative cell size at which
/// straddling cells are decided by their representative point.
#[derive(Debug, Clone, PartialEq)]
pub struct BallQuery {
    pub center: Point,
    pub radius: f64,
    pub resolution: f64,
}

impl BallQuery {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        Self::with_resolution(center, radius, DEFAULT_RESOLUTION)
    }

    pub fn with_resolution(center: Point, radius: f64, resolution: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!(
                "ball radius {radius} must be positive"
            )));
        }
        if !(resolution > 0.0 && resolution < 1.0) {
            return Err(Error::invalid(format!(
                "resolution {resolution} outside (0, 1)"
            )));
        }
        Ok(BallQuery {
            center,
            radius,
            resolution,
        })
    }
}

struct Descent<'a> {
    mu: &'a CellMeasure,
    ifs: &'a Ifs,
    base: &'a Point,
    x: &'a Point,
    r: f64,
    stop_diam: f64,
}

impl Descent<'_> {
    fn run(&self, map: &Similitude, cursor: Cursor, depth: usize) -> f64 {
        if cursor.mass == 0.0 {
            return 0.0;
        }
        let dist = (map.apply(self.base) - self.x).norm();
        let diam = map.scale() * self.ifs.attractor_diam();
        if dist + diam <= self.r {
            return cursor.mass;
        }
        if dist - diam > self.r {
            return 0.0;
        }
        if diam < self.stop_diam || depth >= MAX_DESCENT_DEPTH {
            return if dist <= self.r { cursor.mass } else { 0.0 };
        }
        self.ifs
            .maps()
            .iter()
            .enumerate()
            .map(|(i, phi)| self.run(&map.compose(phi), cursor.child(self.mu, i), depth + 1))
            .sum()
    }
}

/// `mu(B(x, r))` by recursive descent over the cell hierarchy.
///
/// Cells wholly inside count fully, cells wholly outside not at all, and
/// cells straddling the sphere are split until smaller than
/// `resolution * r`, then decided by their representative point.
pub fn ball_mass(mu: &CellMeasure, q: &BallQuery) -> f64 {
    let tree = mu.tree();
    let ifs = tree.ifs();
    let d = Descent {
        mu,
        ifs,
        base: tree.base_point(),
        x: &q.center,
        r: q.radius,
        stop_diam: q.resolution * q.radius,
    };
    d.run(
        &Similitude::identity(ifs.ambient_dim()),
        Cursor::root(mu),
        0,
    )
}

/// `mu(B(x, r))` for a coded point, zooming into the deepest cell that
/// contains the ball before descending, so tiny radii keep full precision.
pub fn ball_mass_at(mu: &CellMeasure, x: &AttractorPoint, r: f64, resolution: f64) -> f64 {
    if !(r > 0.0) {
        return 0.0;
    }
    let tree = mu.tree();
    let ifs = tree.ifs();
    let Some(gap) = ifs.separation_gap() else {
        let q = BallQuery {
            center: x.position(ifs),
            radius: r,
            resolution,
        };
        return ball_mass(mu, &q);
    };
    let letters = x.word.indices();
    let k = letters.len();
    let scales = ifs.scales();
    let mut cursor = Cursor::root(mu);
    let mut rr = r;
    let mut stripped = 0;
    // B(y, rr) ∩ A lies inside the child holding y while rr < gap.
    while stripped < k && rr < gap {
        let letter = letters[k - 1 - stripped] as usize;
        cursor = cursor.child(mu, letter);
        rr /= scales[letter];
        stripped += 1;
    }
    let mut center = None;
    if stripped == k && x.tail_fixed {
        while rr < gap && cursor.mass > 0.0 {
            cursor = cursor.child(mu, 0);
            rr /= scales[0];
        }
        center = Some(x.local.clone());
    }
    if cursor.mass == 0.0 {
        return 0.0;
    }
    let center = center.unwrap_or_else(|| {
        let chain = x.chain(ifs);
        chain[k - stripped].clone()
    });
    let d = Descent {
        mu,
        ifs,
        base: tree.base_point(),
        x: &center,
        r: rr,
        stop_diam: resolution * rr,
    };
    d.run(&Similitude::identity(ifs.ambient_dim()), cursor, 0)
}

/// `max_alpha |mu(phi_alpha(A)) - nu(phi_alpha(A))|` over words of length `m`.
pub fn cell_discrepancy(mu: &CellMeasure, nu: &CellMeasure, m: usize) -> Result<f64> {
    if !mu.same_tree(nu) {
        return Err(Error::TreeMismatch);
    }
    let a = mu.level_masses(m)?;
    let b = nu.level_masses(m)?;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// `f_alpha = w_alpha / lambda_alpha`, the density against the natural measure.
pub fn radon_nikodym_wrt_natural(mu: &CellMeasure) -> Vec<f64> {
    mu.weights()
        .iter()
        .zip(mu.tree().natural_weights())
        .map(|(w, l)| w / l)
        .collect()
}

/// `sum_alpha f_alpha^2 lambda_alpha`, the discrete `∫ (dmu/dlambda)^2 dlambda`.
pub fn density_square_norm(mu: &CellMeasure) -> f64 {
    radon_nikodym_wrt_natural(mu)
        .iter()
        .zip(mu.tree().natural_weights())
        .map(|(f, l)| f * f * l)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::{BasePoint, Similitude};
    use proptest::prelude::*;

    fn cantor_ifs() -> Arc<Ifs> {
        Arc::new(
            Ifs::new(vec![
                Similitude::homothety(1.0 / 3.0, &[0.0]).unwrap(),
                Similitude::homothety(1.0 / 3.0, &[2.0 / 3.0]).unwrap(),
            ])
            .unwrap()
            .validate(4)
            .unwrap(),
        )
    }

    fn cantor_tree(level: usize) -> Arc<CellTree> {
        Arc::new(CellTree::build(cantor_ifs(), level, BasePoint::FixedPoint).unwrap())
    }

    fn pt(x: f64) -> Point {
        Point::from_vec(vec![x])
    }

    #[test]
    fn natural_measure_examples() {
        let lam = CellMeasure::natural(cantor_tree(2));
        assert!(lam.weights().iter().all(|w| (w - 0.25).abs() < 1e-15));
        assert!(lam.is_probability());

        let ifs = Arc::new(
            Ifs::new(vec![
                Similitude::homothety(0.5, &[0.5]).unwrap(),
                Similitude::homothety(0.25, &[0.0]).unwrap(),
            ])
            .unwrap(),
        );
        let tree = Arc::new(CellTree::build(ifs, 1, BasePoint::FixedPoint).unwrap());
        let lam = CellMeasure::natural(tree);
        let t = (5f64.sqrt() - 1.0) / 2.0;
        assert!((lam.weights()[0] - t * t).abs() < 1e-12);
        assert!((lam.weights()[1] - t).abs() < 1e-12);
        assert!((lam.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_weights() {
        let tree = cantor_tree(1);
        assert!(CellMeasure::new(tree.clone(), vec![0.5]).is_err());
        assert!(CellMeasure::new(tree.clone(), vec![-0.1, 1.1]).is_err());
        assert!(CellMeasure::probability(tree.clone(), vec![0.2, 0.2]).is_err());
        let sub = CellMeasure::new(tree, vec![0.2, 0.2]).unwrap();
        assert!(!sub.is_probability());
    }

    #[test]
    fn ball_mass_cantor_examples() {
        let lam = CellMeasure::natural(cantor_tree(2));
        let q = |r| BallQuery::new(pt(0.0), r).unwrap();
        assert!((ball_mass(&lam, &q(1.0 / 3.0)) - 0.5).abs() < 1e-14);
        assert!((ball_mass(&lam, &q(1.0)) - 1.0).abs() < 1e-14);
        assert!((ball_mass(&lam, &q(1.0 / 9.0)) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn ball_mass_matches_brute_force_sum() {
        // Level-8 cells are shorter than any gap used here, so membership of
        // the left endpoint decides each cell exactly.
        let lam8 = CellMeasure::natural(cantor_tree(8));
        let coarse = CellMeasure::natural(cantor_tree(2));
        for &(x, r) in &[
            (0.0, 1.0 / 9.0),
            (2.0 / 3.0, 0.25),
            (2.0 / 9.0, 0.4),
            (1.0, 0.05),
        ] {
            let brute: f64 = (0..lam8.tree().len())
                .filter(|&i| {
                    let c = lam8.tree().center(i)[0];
                    let len = lam8.tree().scale(i);
                    (c - x).abs() <= r && (c + len - x).abs() <= r
                })
                .map(|i| lam8.weights()[i])
                .sum();
            let q = BallQuery::with_resolution(pt(x), r, 1e-4).unwrap();
            let got = ball_mass(&coarse, &q);
            assert!(
                (got - brute).abs() < 2.0 * 0.5f64.powi(8),
                "x={x} r={r}: {got} vs {brute}"
            );
        }
    }

    #[test]
    fn zoomed_ball_mass_agrees_with_coordinates() {
        let ifs = cantor_ifs();
        let tree = cantor_tree(4);
        let f = [1.5, 0.5];
        let mu = CellMeasure::from_coarse_density(tree.clone(), 1, &f).unwrap();
        for word in ["1.2.1.2.2", "2.2.1", "1.1.1.1.1.2.1"] {
            let p = AttractorPoint::of_cell(&ifs, word.parse().unwrap());
            let x = p.position(&ifs);
            for r in [1e-4, 3e-3, 0.05, 0.2, 0.9] {
                let a = ball_mass_at(&mu, &p, r, 1e-4);
                let b = ball_mass(
                    &mu,
                    &BallQuery::with_resolution(x.clone(), r, 1e-4).unwrap(),
                );
                assert!(
                    (a - b).abs() < 1e-3 * b.max(1e-12) + 1e-14,
                    "{word} r={r}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn zoom_reaches_tiny_radii() {
        // lambda(B(0, 3^-k)) = 2^-k exactly
        let ifs = cantor_ifs();
        let lam = CellMeasure::natural(cantor_tree(3));
        let p = AttractorPoint::of_cell(&ifs, Word::empty());
        for k in [5, 40, 200] {
            let m = ball_mass_at(&lam, &p, 3f64.powi(-k), 1e-3);
            assert!((m / 0.5f64.powi(k) - 1.0).abs() < 1e-10, "k={k}");
        }
    }

    #[test]
    fn natural_self_similarity_of_ball_mass() {
        let ifs = cantor_ifs();
        let lam = CellMeasure::natural(cantor_tree(3));
        let x = pt(2.0 / 9.0);
        for (i, phi) in ifs.maps().iter().enumerate() {
            let l = ifs.scales()[i];
            let r = 0.1;
            let inner = ball_mass(
                &lam,
                &BallQuery::with_resolution(x.clone(), r, 1e-5).unwrap(),
            );
            let outer = ball_mass(
                &lam,
                &BallQuery::with_resolution(phi.apply(&x), l * r, 1e-5).unwrap(),
            );
            let ld = ifs.natural_weights()[i];
            assert!((outer - ld * inner).abs() < 1e-12);
        }
    }

    #[test]
    fn discrepancy_examples() {
        let tree = cantor_tree(2);
        let lam = CellMeasure::natural(tree.clone());
        let delta = CellMeasure::point_mass(tree.clone(), 0).unwrap();
        assert_eq!(cell_discrepancy(&lam, &lam, 2).unwrap(), 0.0);
        assert!((cell_discrepancy(&lam, &delta, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(cell_discrepancy(&lam, &delta, 3).is_err());
        let other = CellMeasure::natural(cantor_tree(2));
        assert!(matches!(
            cell_discrepancy(&lam, &other, 1),
            Err(Error::TreeMismatch)
        ));
    }

    #[test]
    fn radon_nikodym_examples() {
        let tree = cantor_tree(1);
        let lam = CellMeasure::natural(tree.clone());
        assert!(radon_nikodym_wrt_natural(&lam)
            .iter()
            .all(|f| (f - 1.0).abs() < 1e-15));
        let mu = CellMeasure::new(tree, vec![0.75, 0.25]).unwrap();
        let f = radon_nikodym_wrt_natural(&mu);
        assert_eq!(f, vec![1.5, 0.5]);
        assert!((density_square_norm(&mu) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn csv_round_trip() {
        let tree = cantor_tree(3);
        let w: Vec<f64> = (0..8).map(|i| (i as f64 + 1.0).sqrt() / 3.0).collect();
        let mu = CellMeasure::new(tree.clone(), w).unwrap();
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("word,weight\n1.1.1,"));
        let back = CellMeasure::read_csv(tree.clone(), buf.as_slice()).unwrap();
        assert_eq!(back.weights(), mu.weights());
        assert!(CellMeasure::read_csv(tree, "word,weight\n1.1.1,0.5\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn ball_mass_monotone_in_radius(x_idx in 0usize..64, a in 0.001..1.0f64, b in 0.001..1.0f64) {
            let tree = cantor_tree(6);
            let mu = CellMeasure::from_coarse_density(tree.clone(), 1, &[1.5, 0.5]).unwrap();
            let x = tree.center(x_idx).clone();
            let (r1, r2) = if a < b { (a, b) } else { (b, a) };
            let m1 = ball_mass(&mu, &BallQuery::new(x.clone(), r1).unwrap());
            let m2 = ball_mass(&mu, &BallQuery::new(x.clone(), r2).unwrap());
            prop_assert!(m1 <= m2 + 1e-15);
            let full = ball_mass(&mu, &BallQuery::new(x, 1.01).unwrap());
            prop_assert!((full - 1.0).abs() < 1e-12);
        }

        #[test]
        fn discrepancy_is_a_metric(seed in prop::collection::vec(0.01..1.0f64, 24), m in 0usize..=3) {
            let tree = cantor_tree(3);
            let make = |s: &[f64]| {
                let t: f64 = s.iter().sum();
                CellMeasure::new(tree.clone(), s.iter().map(|v| v / t).collect()).unwrap()
            };
            let (a, b, c) = (make(&seed[..8]), make(&seed[8..16]), make(&seed[16..]));
            let ab = cell_discrepancy(&a, &b, m).unwrap();
            let ba = cell_discrepancy(&b, &a, m).unwrap();
            let bc = cell_discrepancy(&b, &c, m).unwrap();
            let ac = cell_discrepancy(&a, &c, m).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!(ac <= ab + bc + 1e-15);
            prop_assert_eq!(cell_discrepancy(&a, &a, m).unwrap(), 0.0);
            // coarser partitions never increase the discrepancy by more than the sum over children
            if m > 0 {
                let coarse = cell_discrepancy(&a, &b, m - 1).unwrap();
                prop_assert!(coarse <= 2.0 * ab + 1e-15);
            }
        }

        #[test]
        fn density_recovers_weights(seed in prop::collection::vec(0.01..1.0f64, 8)) {
            let tree = cantor_tree(3);
            let mu = CellMeasure::new(tree.clone(), seed.clone()).unwrap();
            let f = radon_nikodym_wrt_natural(&mu);
            let back = CellMeasure::from_density(tree, &f).unwrap();
            for (x, y) in back.weights().iter().zip(mu.weights()) {
                prop_assert!((x - y).abs() <= 1e-15 * y.abs());
            }
        }
    }
}
