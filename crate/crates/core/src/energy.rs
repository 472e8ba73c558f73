//! Riesz `s`-energy on cell measures.
//!
//! The quadratic form `Q` has off-diagonal entries `|c_a - c_b|^{-s}` (with
//! near pairs refined through their sub-cells) and a diagonal obtained from
//! the self-similar fixed point for the uniform within-cell profile:
//! `Q_aa = L_a^{-s} E_s`, `E_s = OffDiag(lambda) / (1 - sum_a lambda_a^2 L_a^{-s})`.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fit::{linear_fit, LinearFit};
use crate::fractal::{
    point_cloud, AttractorPoint, BasePoint, CellTree, Ifs, Point, Similitude, Word,
};
use crate::measure::{ball_mass_at, CellMeasure, Cursor};
use crate::{Error, Result};

/// Pairs closer than this many summed diameters are refined.
pub const NEAR_PAIR_THETA: f64 = 4.0;
pub const DEFAULT_NEAR_PAIR_DEPTH: usize = 3;
/// Cells narrower than this fraction of their distance are lumped at their barycenter.
pub const DEFAULT_FAR_RATIO: f64 = 0.01;
pub const DEFAULT_NODES_PER_DECADE: usize = 256;
/// Ball-mass resolution used by the ball-mass potential.
pub const DEFAULT_POTENTIAL_RESOLUTION: f64 = 1e-6;

const REFINED_POINT_BUDGET: usize = 1 << 24;
/// Largest dense matrix, in entries, a form may hold.
pub const MATRIX_ENTRY_BUDGET: usize = 1 << 25;
const MAX_FAR_DEPTH: usize = 200;

#[inline]
fn kernel(dist: f64, s: f64) -> f64 {
    (-s * dist.ln()).exp()
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_matrix_budget(n: usize) -> Result<()> {
    let needed = n.saturating_mul(n);
    if needed > MATRIX_ENTRY_BUDGET {
        return Err(Error::Resource {
            what: "energy matrix entries",
            needed,
            budget: MATRIX_ENTRY_BUDGET,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct EnergyForm {
    s: f64,
    tree: Arc<CellTree>,
    /// Row-major `n x n` matrix of `Q`, diagonal included.
    q: Vec<f64>,
    diag: Vec<f64>,
    base_energy: f64,
    near_pair_depth: usize,
}

impl EnergyForm {
    pub fn assemble(tree: Arc<CellTree>, s: f64, near_pair_depth: usize) -> Result<Self> {
        let d = tree.dimension();
        if !(s > 0.0 && s < d) {
            return Err(Error::invalid(format!(
                "s = {s} must lie in (0, d) with d = {d}"
            )));
        }
        let ifs = tree.ifs().clone();
        let n = tree.len();
        check_matrix_budget(n)?;
        let dim = ifs.ambient_dim();
        let n_sub = ifs.len().pow(near_pair_depth as u32);
        let needed = n.saturating_mul(n_sub).saturating_mul(dim);
        if needed > REFINED_POINT_BUDGET {
            return Err(Error::Resource {
                what: "near-pair refinement points",
                needed,
                budget: REFINED_POINT_BUDGET,
            });
        }
        let local = point_cloud(ifs.maps(), tree.base_point(), near_pair_depth);
        let sub_weights: Vec<f64> = (0..n_sub)
            .map(|k| {
                Word::from_index(k, ifs.len(), near_pair_depth)
                    .indices()
                    .iter()
                    .map(|&i| ifs.natural_weights()[i as usize])
                    .product()
            })
            .collect();
        let sub_points: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let m = tree.cell_map(a);
                local
                    .iter()
                    .flat_map(|p| m.apply(p).iter().copied().collect::<Vec<_>>())
                    .collect()
            })
            .collect();

        let refined = |a: usize, b: usize| -> f64 {
            let (pa, pb) = (&sub_points[a], &sub_points[b]);
            let mut acc = 0.0;
            for (u, wu) in sub_weights.iter().enumerate() {
                let xu = &pa[u * dim..(u + 1) * dim];
                let mut row = 0.0;
                for (v, wv) in sub_weights.iter().enumerate() {
                    row += wv * kernel(dist(xu, &pb[v * dim..(v + 1) * dim]), s);
                }
                acc += wu * row;
            }
            acc
        };

        let diam: Vec<f64> = (0..n).map(|a| tree.diam(a)).collect();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let ca = tree.center(a).as_slice();
                (a + 1..n)
                    .map(|b| {
                        let r = dist(ca, tree.center(b).as_slice());
                        if near_pair_depth > 0 && r < NEAR_PAIR_THETA * (diam[a] + diam[b]) {
                            refined(a, b)
                        } else {
                            kernel(r, s)
                        }
                    })
                    .collect()
            })
            .collect();

        let mut q = vec![0.0; n * n];
        for (a, row) in upper.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                let b = a + 1 + k;
                q[a * n + b] = *v;
                q[b * n + a] = *v;
            }
        }
        let lam = tree.natural_weights();
        // Row sums are collected before the final sum so the result is run-to-run identical.
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|a| {
                lam[a]
                    * q[a * n..(a + 1) * n]
                        .iter()
                        .zip(lam)
                        .map(|(v, l)| v * l)
                        .sum::<f64>()
            })
            .collect();
        let off: f64 = rows.iter().sum();
        // 1 - sum lambda_a^2 L_a^{-s} = sum lambda_a (1 - L_a^{d-s}), written to avoid cancellation near s = d.
        let denom: f64 = (0..n)
            .map(|a| -lam[a] * ((d - s) * tree.scale(a).ln()).exp_m1())
            .sum();
        if !(denom > 0.0) {
            return Err(Error::InternalConsistency(format!(
                "self-energy denominator {denom} is not positive"
            )));
        }
        let base_energy = off / denom;
        let diag: Vec<f64> = (0..n)
            .map(|a| kernel(tree.scale(a), s) * base_energy)
            .collect();
        for (a, v) in diag.iter().enumerate() {
            q[a * n + a] = *v;
        }
        let form = EnergyForm {
            s,
            tree,
            q,
            diag,
            base_energy,
            near_pair_depth,
        };
        form.check_entries()?;
        Ok(form)
    }

    /// Exact cell-integral form for an interval attractor centred at the base point.
    ///
    /// Entries are `h_a^{-1} h_b^{-1} ∫∫_{I_a x I_b} |x - y|^{-s}`, the energy of
    /// piecewise-uniform densities, so no near-pair refinement is needed.
    pub fn assemble_interval(tree: Arc<CellTree>, s: f64) -> Result<Self> {
        let ifs = tree.ifs();
        if ifs.ambient_dim() != 1 || (ifs.dimension() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "interval assembly needs a one-dimensional interval IFS",
            ));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::invalid(format!("s = {s} must lie in (0, 1)")));
        }
        let n = tree.len();
        check_matrix_budget(n)?;
        let half = ifs.attractor_diam() / 2.0;
        let cells: Vec<(f64, f64)> = (0..n)
            .map(|a| {
                let c = tree.center(a)[0];
                let h = tree.scale(a) * half;
                (c - h, c + h)
            })
            .collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let (a1, b1) = cells[a];
                (0..n)
                    .map(|b| {
                        let (a2, b2) = cells[b];
                        interval_pair_integral(a1, b1, a2, b2, s) / ((b1 - a1) * (b2 - a2))
                    })
                    .collect()
            })
            .collect();
        let mut q = vec![0.0; n * n];
        for a in 0..n {
            for b in a..n {
                let v = if a == b {
                    rows[a][a]
                } else {
                    0.5 * (rows[a][b] + rows[b][a])
                };
                q[a * n + b] = v;
                q[b * n + a] = v;
            }
        }
        let diag: Vec<f64> = (0..n).map(|a| q[a * n + a]).collect();
        let base_energy = diag[0] / kernel(tree.scale(0), s);
        let form = EnergyForm {
            s,
            tree,
            q,
            diag,
            base_energy,
            near_pair_depth: 0,
        };
        form.check_entries()?;
        Ok(form)
    }

    fn check_entries(&self) -> Result<()> {
        if let Some(v) = self.q.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InternalConsistency(format!(
                "kernel entry {v} is not positive and finite"
            )));
        }
        Ok(())
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn tree(&self) -> &Arc<CellTree> {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matrix(&self) -> &[f64] {
        &self.q
    }

    pub fn row(&self, a: usize) -> &[f64] {
        let n = self.len();
        &self.q[a * n..(a + 1) * n]
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.q[a * self.len() + b]
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// `E_s`, the energy of the natural (or uniform interval) measure under this form.
    pub fn base_energy(&self) -> f64 {
        self.base_energy
    }

    pub fn near_pair_depth(&self) -> usize {
        self.near_pair_depth
    }

    /// `Q w` for raw weights.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let n = self.len();
        let work = |a: usize| self.row(a).iter().zip(w).map(|(q, x)| q * x).sum::<f64>();
        if n >= 256 {
            (0..n).into_par_iter().map(work).collect()
        } else {
            (0..n).map(work).collect()
        }
    }

    /// `u^T Q v` for raw weights.
    pub fn quadratic(&self, u: &[f64], v: &[f64]) -> f64 {
        self.apply(v).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    fn check(&self, mu: &CellMeasure) -> Result<()> {
        if Arc::ptr_eq(&self.tree, mu.tree()) || self.tree.same_as(mu.tree()) {
            Ok(())
        } else {
            Err(Error::TreeMismatch)
        }
    }

    pub fn energy(&self, mu: &CellMeasure) -> Result<f64> {
        self.check(mu)?;
        Ok(self.quadratic(mu.weights(), mu.weights()))
    }

    pub fn bilinear(&self, mu: &CellMeasure, nu: &CellMeasure) -> Result<f64> {
        self.check(mu)?;
        self.check(nu)?;
        Ok(self.quadratic(mu.weights(), nu.weights()))
    }

    /// Cell potentials `Q w`; each value averages the kernel over the cell.
    pub fn potential(&self, mu: &CellMeasure) -> Result<PotentialField> {
        self.check(mu)?;
        Ok(PotentialField {
            s: self.s,
            values: self.apply(mu.weights()),
        })
    }
}

/// `∫_{a1}^{b1} ∫_{a2}^{b2} |x - y|^{-s} dy dx` in closed form.
pub fn interval_pair_integral(a1: f64, b1: f64, a2: f64, b2: f64, s: f64) -> f64 {
    let g = |u: f64| {
        let u = u.abs();
        if u == 0.0 {
            0.0
        } else {
            ((2.0 - s) * u.ln()).exp() / ((1.0 - s) * (2.0 - s))
        }
    };
    -g(b2 - b1) + g(a2 - b1) + g(b2 - a1) - g(a2 - a1)
}

/// The IFS `x -> x/2 - 1/2`, `x -> x/2 + 1/2` with attractor `[-1, 1]`.
pub fn interval_ifs() -> Result<Ifs> {
    Ifs::with_diameter(
        vec![
            Similitude::homothety(0.5, &[-0.5])?,
            Similitude::homothety(0.5, &[0.5])?,
        ],
        2.0,
    )
}

/// `2^level` equal cells on `[-1, 1]`, centred at their midpoints.
pub fn interval_tree(level: usize) -> Result<Arc<CellTree>> {
    Ok(Arc::new(CellTree::build(
        Arc::new(interval_ifs()?),
        level,
        BasePoint::Barycenter,
    )?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    pub s: f64,
    pub values: Vec<f64>,
}

impl PotentialField {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Far-field sum over a cell in pulled-back coordinates: `z = phi_tau^{-1}(y)`.
struct FarField<'a> {
    mu: &'a CellMeasure,
    ifs: &'a Ifs,
    bary: &'a Point,
    s: f64,
    ratio: f64,
}

impl FarField<'_> {
    fn sum(&self, z: &Point, scale: f64, cursor: Cursor, depth: usize) -> f64 {
        if cursor.mass == 0.0 {
            return 0.0;
        }
        let r = scale * (z - self.bary).norm();
        let diam = scale * self.ifs.attractor_diam();
        if diam < self.ratio * r || depth >= MAX_FAR_DEPTH {
            return cursor.mass * kernel(r, self.s);
        }
        self.ifs
            .maps()
            .iter()
            .enumerate()
            .map(|(i, phi)| {
                self.sum(
                    &phi.apply_inverse(z),
                    scale * phi.scale(),
                    cursor.child(self.mu, i),
                    depth + 1,
                )
            })
            .sum()
    }

    /// Contribution of the children of a cell other than `skip`, seen from local point `y`.
    fn siblings(&self, y: &Point, cursor: Cursor, skip: usize) -> f64 {
        self.ifs
            .maps()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(i, phi)| {
                self.sum(
                    &phi.apply_inverse(y),
                    phi.scale(),
                    cursor.child(self.mu, i),
                    1,
                )
            })
            .sum()
    }
}

/// `U_s^mu(x)` at a fixed-tail point by direct summation.
///
/// The attractor is split into the rings `phi_{sigma_k}(A) \ phi_{sigma_{k+1}}(A)`
/// along the coding of `x`; each ring is a far field at scale `L_{sigma_k}`.
/// Once the coding is all `1`s inside the natural regime the rings repeat
/// with ratio `L_1^{d-s}` and the remainder is summed in closed form.
pub fn potential_at(mu: &CellMeasure, x: &AttractorPoint, s: f64) -> Result<f64> {
    potential_at_with(mu, x, s, DEFAULT_FAR_RATIO)
}

pub fn potential_at_with(
    mu: &CellMeasure,
    x: &AttractorPoint,
    s: f64,
    far_ratio: f64,
) -> Result<f64> {
    let tree = mu.tree();
    let ifs = tree.ifs();
    let d = ifs.dimension();
    if !(s > 0.0 && s < d) {
        return Err(Error::invalid(format!(
            "s = {s} must lie in (0, d) with d = {d}"
        )));
    }
    ifs.require_gap()?;
    if !x.tail_fixed {
        return Err(Error::invalid(
            "direct potential needs a point with a fixed tail",
        ));
    }
    let far = FarField {
        mu,
        ifs,
        bary: ifs.barycenter(),
        s,
        ratio: far_ratio,
    };
    let p = x.padded(x.word.len().max(tree.level()));
    let letters = p.word.indices();
    let len = letters.len();
    let chain = p.chain(ifs);
    let mut cursor = Cursor::root(mu);
    let mut scale = 1.0;
    let mut acc = 0.0;
    for k in 0..len {
        let next = letters[len - 1 - k] as usize;
        acc += kernel(scale, s) * far.siblings(&chain[len - k], cursor, next);
        cursor = cursor.child(mu, next);
        scale *= ifs.scales()[next];
    }
    let q = (-(d - s) * ifs.scales()[0].ln()).exp().recip();
    let ring = far.siblings(&p.local, cursor, 0);
    acc += kernel(scale, s) * ring / (1.0 - q);
    Ok(acc)
}

/// The ball-mass integral `s ∫ mu(B(x, r)) r^{-s-1} dr` with its head treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallMassPotential {
    pub value: f64,
    /// Contribution assigned to `(0, r_min)`.
    pub head: f64,
    /// True when the head was summed exactly by self-similarity.
    pub head_exact: bool,
    /// Trapezoid error bound for a monotone step integrand: `h/2 sum |f_{i+1} - f_i|`.
    pub quadrature_bound: f64,
    /// Quadrature bound plus the head uncertainty, which is the whole head when inexact.
    pub error_bar: f64,
}

/// Potential from ball masses: trapezoid in `ln r` on `[r_min, r_max]`, the
/// exact tail `mu(A) r_max^{-s}` beyond, and a head on `(0, r_min)`.
///
/// For fixed-tail points whose zoomed cell is natural at `r_min` the head is
/// the geometric series of the first band `[r_min, r_min / L_1]`; otherwise
/// it is estimated from `mu(B(x, r_min)) ~ r^d` and flagged inexact.
pub fn potential_by_ballmass(
    mu: &CellMeasure,
    x: &AttractorPoint,
    s: f64,
    r_min: f64,
    r_max: f64,
) -> Result<BallMassPotential> {
    potential_by_ballmass_with(
        mu,
        x,
        s,
        r_min,
        r_max,
        DEFAULT_NODES_PER_DECADE,
        DEFAULT_POTENTIAL_RESOLUTION,
    )
}

pub fn potential_by_ballmass_with(
    mu: &CellMeasure,
    x: &AttractorPoint,
    s: f64,
    r_min: f64,
    r_max: f64,
    nodes_per_decade: usize,
    resolution: f64,
) -> Result<BallMassPotential> {
    BallMassProfile::new(mu, x, r_min, r_max, nodes_per_decade, resolution)?.potential(s)
}

/// Ball masses `mu(B(x, r))` on the log grid used by the ball-mass
/// potential; one profile serves every `s`.
#[derive(Debug, Clone)]
pub struct BallMassProfile {
    t0: f64,
    h: f64,
    /// Number of grid steps in the first band `[r_min, r_min / L_1]`.
    band: usize,
    masses: Vec<f64>,
    total: f64,
    l1: f64,
    d: f64,
    exact_head: bool,
}

impl BallMassProfile {
    pub fn new(
        mu: &CellMeasure,
        x: &AttractorPoint,
        r_min: f64,
        r_max: f64,
        nodes_per_decade: usize,
        resolution: f64,
    ) -> Result<Self> {
        let tree = mu.tree();
        let ifs = tree.ifs();
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::invalid(format!(
                "invalid radius range [{r_min}, {r_max}]"
            )));
        }
        if r_max < ifs.attractor_diam() {
            return Err(Error::invalid("r_max must cover the attractor"));
        }
        if nodes_per_decade < 2 {
            return Err(Error::invalid("need at least two nodes per decade"));
        }
        let l1 = ifs.scales()[0];
        let band = ((nodes_per_decade as f64) * (1.0 / l1).log10())
            .ceil()
            .max(2.0) as usize;
        let h = (1.0 / l1).ln() / band as f64;
        let t0 = r_min.ln();
        let count = (((r_max.ln() - t0) / h).ceil() as usize + 1).max(band + 1);
        let masses: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|i| ball_mass_at(mu, x, (t0 + i as f64 * h).exp(), resolution))
            .collect();
        let natural_len = x.word.len().max(tree.level());
        let zoom_scale = x.padded(natural_len).scale(ifs);
        let exact_head =
            x.tail_fixed && ifs.separation_gap().is_some_and(|g| r_min < zoom_scale * g);
        Ok(BallMassProfile {
            t0,
            h,
            band,
            masses,
            total: mu.total(),
            l1,
            d: ifs.dimension(),
            exact_head,
        })
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.masses.len())
            .map(|i| (self.t0 + i as f64 * self.h).exp())
            .collect()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn potential(&self, s: f64) -> Result<BallMassPotential> {
        let d = self.d;
        if !(s > 0.0 && s < d) {
            return Err(Error::invalid(format!(
                "s = {s} must lie in (0, d) with d = {d}"
            )));
        }
        let h = self.h;
        let f: Vec<f64> = self
            .masses
            .iter()
            .enumerate()
            .map(|(i, m)| s * m * (-s * (self.t0 + i as f64 * h)).exp())
            .collect();
        let count = f.len();
        let trap = |a: usize, b: usize| -> f64 {
            h * (f[a..b].iter().sum::<f64>() + f[a + 1..=b].iter().sum::<f64>()) / 2.0
        };
        let variation = |a: usize, b: usize| -> f64 {
            0.5 * h
                * f[a..=b]
                    .windows(2)
                    .map(|w| (w[1] - w[0]).abs())
                    .sum::<f64>()
        };
        let body = trap(0, count - 1);
        let tail = self.total * (-s * (self.t0 + (count - 1) as f64 * h)).exp();
        let quadrature_bound = variation(0, count - 1);
        let (head, head_error) = if self.exact_head {
            let q = (-(d - s) * self.l1.ln()).exp().recip();
            let ratio = q / (1.0 - q);
            (trap(0, self.band) * ratio, variation(0, self.band) * ratio)
        } else {
            let head = f[0] / (d - s);
            (head, head)
        };
        Ok(BallMassPotential {
            value: head + body + tail,
            head,
            head_exact: self.exact_head,
            quadrature_bound,
            error_bar: quadrature_bound + head_error,
        })
    }
}

/// Radii for the ball-mass potential at a fixed-tail point, chosen so the
/// head is exact: `r_min` half the natural zoom threshold, `r_max = diam A`.
pub fn ballmass_radii(mu: &CellMeasure, x: &AttractorPoint) -> Result<(f64, f64)> {
    let ifs = mu.tree().ifs();
    let gap = ifs.require_gap()?;
    let len = x.word.len().max(mu.tree().level());
    let r_min = 0.5 * x.padded(len).scale(ifs) * gap;
    Ok((r_min, ifs.attractor_diam()))
}

/// One point of a normalized energy curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyPoint {
    pub s: f64,
    pub energy: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub dimension: f64,
    pub points: Vec<EnergyPoint>,
    /// Fit `a + b (d - s)` over the last `fit_points` points; `a` is the limit.
    pub fit: Option<LinearFit>,
}

impl EnergyCurve {
    pub fn limit(&self) -> Option<f64> {
        self.fit.map(|f| f.intercept)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "s,energy,normalized_energy,extrapolated_limit,fit_residual"
        )?;
        let (a, res) = self
            .fit
            .map_or((f64::NAN, f64::NAN), |f| (f.intercept, f.residual));
        for p in &self.points {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.6e}",
                p.s, p.energy, p.normalized, a, res
            )?;
        }
        Ok(())
    }
}

pub const DEFAULT_FIT_POINTS: usize = 3;

/// Extrapolates `(d - s) I_s` over the last `fit_points` grid values.
pub fn extrapolate_in_gap(d: f64, points: &[EnergyPoint], fit_points: usize) -> Option<LinearFit> {
    let tail = &points[points.len().saturating_sub(fit_points.max(2))..];
    let xs: Vec<f64> = tail.iter().map(|p| d - p.s).collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.normalized).collect();
    linear_fit(&xs, &ys)
}

/// `(d - s) I_s(mu)` over a grid for several measures, assembling once per `s`.
pub fn normalized_energy_curves(
    tree: &Arc<CellTree>,
    measures: &[CellMeasure],
    s_grid: &[f64],
    near_pair_depth: usize,
    fit_points: usize,
) -> Result<Vec<EnergyCurve>> {
    let d = tree.dimension();
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("s grid must be strictly increasing"));
    }
    let mut per_measure = vec![Vec::with_capacity(s_grid.len()); measures.len()];
    for &s in s_grid {
        let form = EnergyForm::assemble(tree.clone(), s, near_pair_depth)?;
        for (mu, pts) in measures.iter().zip(per_measure.iter_mut()) {
            let e = form.energy(mu)?;
            pts.push(EnergyPoint {
                s,
                energy: e,
                normalized: (d - s) * e,
            });
        }
    }
    Ok(per_measure
        .into_iter()
        .map(|points| EnergyCurve {
            dimension: d,
            fit: extrapolate_in_gap(d, &points, fit_points),
            points,
        })
        .collect())
}

pub fn normalized_energy_curve(
    tree: &Arc<CellTree>,
    mu: &CellMeasure,
    s_grid: &[f64],
    near_pair_depth: usize,
) -> Result<EnergyCurve> {
    let mut v = normalized_energy_curves(
        tree,
        std::slice::from_ref(mu),
        s_grid,
        near_pair_depth,
        DEFAULT_FIT_POINTS,
    )?;
    Ok(v.remove(0))
}
