//! Discrete equilibrium measures: `min w^T Q w` over the probability simplex.
//!
//! Frank–Wolfe steps with away steps move between faces of the simplex; on
//! each new support the face minimizer is found exactly with a Cholesky
//! solve of `Q_SS v = 1`, stepping back to the boundary when it leaves the
//! simplex. The optimality test is the discrete Frostman condition.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyForm;
use crate::fractal::{AttractorPoint, CellTree};
use crate::measure::{ball_mass_at, cell_discrepancy, CellMeasure};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Weights at or below this count as off the support.
pub const W_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub weights: CellMeasure,
    pub energy_value: f64,
    pub frostman_gap: f64,
    pub iterations: usize,
    pub s: f64,
    pub level: usize,
    pub converged: bool,
    /// Energy after every iteration, starting with the initial point.
    pub energy_trace: Vec<f64>,
}

/// The JSON-facing part of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub s: f64,
    pub level: usize,
    pub energy: f64,
    pub frostman_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub weights_ref: String,
}

impl SolveResult {
    pub fn record(&self, weights_ref: impl Into<String>) -> SolveRecord {
        SolveRecord {
            s: self.s,
            level: self.level,
            energy: self.energy_value,
            frostman_gap: self.frostman_gap,
            iterations: self.iterations,
            converged: self.converged,
            weights_ref: weights_ref.into(),
        }
    }
}

pub fn default_max_iter(form: &EnergyForm) -> usize {
    200 * form.len()
}

/// Relative Frostman gap `(max_{support} g - min_all g) / min_all g` and the two indices.
fn frostman(g: &[f64], w: &[f64]) -> (f64, usize, usize) {
    let mut jmin = 0;
    for (j, v) in g.iter().enumerate() {
        if *v < g[jmin] {
            jmin = j;
        }
    }
    let mut amax = None::<usize>;
    for (j, v) in g.iter().enumerate() {
        if w[j] > W_FLOOR && amax.is_none_or(|a| *v > g[a]) {
            amax = Some(j);
        }
    }
    let amax = amax.unwrap_or(jmin);
    ((g[amax] - g[jmin]) / g[jmin], jmin, amax)
}

struct State<'a> {
    form: &'a EnergyForm,
    w: Vec<f64>,
    qw: Vec<f64>,
}

impl State<'_> {
    fn energy(&self) -> f64 {
        self.w.iter().zip(&self.qw).map(|(a, b)| a * b).sum()
    }

    fn refresh(&mut self) {
        self.qw = self.form.apply(&self.w);
    }

    fn support(&self) -> Vec<usize> {
        (0..self.w.len()).filter(|&i| self.w[i] > W_FLOOR).collect()
    }

    /// Exact minimizer on the face spanned by `support`, clipped to the simplex.
    /// Returns the number of clipping steps taken.
    fn polish(&mut self, mut support: Vec<usize>) -> Result<usize> {
        let mut steps = 0;
        for i in 0..self.w.len() {
            if self.w[i] <= W_FLOOR {
                self.w[i] = 0.0;
            }
        }
        loop {
            let k = support.len();
            let sub = DMatrix::from_fn(k, k, |a, b| self.form.entry(support[a], support[b]));
            let chol = sub.cholesky().ok_or_else(|| {
                Error::InternalConsistency(
                    "energy form is not positive definite on the support; increase the level"
                        .into(),
                )
            })?;
            let v = chol.solve(&DVector::from_element(k, 1.0));
            let total: f64 = v.iter().sum();
            let target: Vec<f64> = v.iter().map(|x| x / total).collect();
            if target.iter().all(|x| *x > 0.0) {
                for (a, &i) in support.iter().enumerate() {
                    self.w[i] = target[a];
                }
                break;
            }
            let mut gamma = 1.0;
            let mut hit = 0;
            for (a, &i) in support.iter().enumerate() {
                let d = target[a] - self.w[i];
                if d < 0.0 && -self.w[i] / d < gamma {
                    gamma = -self.w[i] / d;
                    hit = a;
                }
            }
            for (a, &i) in support.iter().enumerate() {
                self.w[i] += gamma * (target[a] - self.w[i]);
            }
            self.w[support[hit]] = 0.0;
            support.remove(hit);
            steps += 1;
        }
        let total: f64 = self.w.iter().sum();
        self.w.iter_mut().for_each(|x| *x /= total);
        self.refresh();
        Ok(steps)
    }
}

/// Minimizes the energy over probability cell measures.
///
/// Without `init` the natural measure is used. Never reports success past
/// `max_iter`; a non-positive curvature along a step is an error.
pub fn solve(
    form: &EnergyForm,
    init: Option<&CellMeasure>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveResult> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let tree = form.tree().clone();
    let w0 = match init {
        Some(mu) => {
            if !(Arc::ptr_eq(mu.tree(), &tree) || mu.tree().same_as(&tree)) {
                return Err(Error::TreeMismatch);
            }
            if !mu.is_probability() {
                return Err(Error::invalid(
                    "initial measure must be a probability measure",
                ));
            }
            mu.weights().to_vec()
        }
        None => tree.natural_weights().to_vec(),
    };
    let mut st = State {
        form,
        w: w0,
        qw: Vec::new(),
    };
    st.refresh();
    let mut trace = vec![st.energy()];
    let mut iterations = 0;
    let mut polished: Option<Vec<usize>> = None;
    let (gap, converged) = loop {
        let support = st.support();
        if polished.as_ref() != Some(&support) {
            let g: Vec<f64> = st.qw.iter().map(|v| 2.0 * v).collect();
            if frostman(&g, &st.w).0 >= tol && iterations < max_iter {
                let before = st.energy();
                let steps = st.polish(support)?;
                iterations += steps;
                let after = st.energy();
                // Face minimizers never raise the energy; rounding may reach a few ulps.
                if after <= before * (1.0 + 1e-13) {
                    trace.push(after.min(before));
                } else {
                    return Err(Error::InternalConsistency(
                        "face solve increased the energy; the form is ill-conditioned".into(),
                    ));
                }
                iterations += 1;
            }
            polished = Some(st.support());
        }
        let g: Vec<f64> = st.qw.iter().map(|v| 2.0 * v).collect();
        let (gap, j, a) = frostman(&g, &st.w);
        if gap < tol {
            break (gap, true);
        }
        if iterations >= max_iter {
            break (gap, false);
        }
        let f = st.energy();
        let gw = 2.0 * f;
        let fw_slope = g[j] - gw;
        let away_slope = gw - g[a];
        let take_fw = fw_slope <= away_slope || st.w[a] >= 1.0;
        let (slope, curvature, gamma_max) = if take_fw {
            (fw_slope, form.entry(j, j) - 2.0 * st.qw[j] + f, 1.0)
        } else {
            (
                away_slope,
                f - 2.0 * st.qw[a] + form.entry(a, a),
                st.w[a] / (1.0 - st.w[a]),
            )
        };
        if !(curvature > 0.0) {
            return Err(Error::InternalConsistency(format!(
                "non-positive curvature {curvature:e} along a descent step; increase the level"
            )));
        }
        let gamma = (-slope / (2.0 * curvature)).clamp(0.0, gamma_max);
        let col = form.row(if take_fw { j } else { a });
        if take_fw {
            for i in 0..st.w.len() {
                st.w[i] *= 1.0 - gamma;
                st.qw[i] = (1.0 - gamma) * st.qw[i] + gamma * col[i];
            }
            st.w[j] += gamma;
        } else {
            for i in 0..st.w.len() {
                st.w[i] *= 1.0 + gamma;
                st.qw[i] = (1.0 + gamma) * st.qw[i] - gamma * col[i];
            }
            st.w[a] -= gamma;
            if gamma == gamma_max {
                st.w[a] = 0.0;
            }
        }
        iterations += 1;
        trace.push(st.energy());
    };
    let weights = CellMeasure::probability(tree.clone(), st.w)?;
    let energy_value = form.energy(&weights)?;
    Ok(SolveResult {
        weights,
        energy_value,
        frostman_gap: gap.max(0.0),
        iterations,
        s: form.s(),
        level: tree.level(),
        converged,
        energy_trace: trace,
    })
}

/// Random interior probability weights (normalized exponentials).
pub fn random_probability(tree: &Arc<CellTree>, rng: &mut impl Rng) -> CellMeasure {
    let raw: Vec<f64> = (0..tree.len())
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    CellMeasure::probability(tree.clone(), raw.into_iter().map(|x| x / total).collect())
        .expect("normalized weights")
}

/// Solves twice from independent random starts; returns the level-`M` cell-mass discrepancy.
pub fn uniqueness_check(form: &EnergyForm, tol: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tree = form.tree();
    let a = random_probability(tree, &mut rng);
    let b = random_probability(tree, &mut rng);
    let max_iter = default_max_iter(form);
    let ra = solve(form, Some(&a), tol, max_iter)?;
    let rb = solve(form, Some(&b), tol, max_iter)?;
    if !(ra.converged && rb.converged) {
        return Err(Error::Unconverged(
            "uniqueness check solve did not converge".into(),
        ));
    }
    cell_discrepancy(&ra.weights, &rb.weights, tree.level())
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub results: Vec<SolveResult>,
    pub coarse_level: usize,
    /// Level-`coarse_level` cell masses for each solved `s`.
    pub coarse_masses: Vec<Vec<f64>>,
    /// False when the sweep stopped at an unconverged solve.
    pub complete: bool,
}

/// Solves on an increasing grid, warm-starting from the previous solution and
/// retrying cold once on failure.
pub fn sweep(
    tree: &Arc<CellTree>,
    s_grid: &[f64],
    tol: f64,
    coarse_level: usize,
    near_pair_depth: usize,
) -> Result<SweepResult> {
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("s grid must be strictly increasing"));
    }
    if coarse_level > tree.level() {
        return Err(Error::invalid("coarse level exceeds tree level"));
    }
    let mut out = SweepResult {
        results: Vec::new(),
        coarse_level,
        coarse_masses: Vec::new(),
        complete: true,
    };
    for &s in s_grid {
        let form = EnergyForm::assemble(tree.clone(), s, near_pair_depth)?;
        let max_iter = default_max_iter(&form);
        let warm = out.results.last().map(|r| r.weights.clone());
        let mut res = solve(&form, warm.as_ref(), tol, max_iter)?;
        if !res.converged && warm.is_some() {
            res = solve(&form, None, tol, max_iter)?;
        }
        let ok = res.converged;
        out.coarse_masses
            .push(res.weights.level_masses(coarse_level)?.to_vec());
        out.results.push(res);
        if !ok {
            out.complete = false;
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProfile {
    pub s: f64,
    pub radii: Vec<f64>,
    /// `ratios[i][k] = mu(B(x_i, r_k)) / r_k^s`.
    pub ratios: Vec<Vec<f64>>,
    pub k_hat: f64,
}

/// Growth ratios `mu(B(x, r)) / r^s` over sample points and radii, and their supremum.
pub fn growth_profile(
    mu: &CellMeasure,
    s: f64,
    samples: &[AttractorPoint],
    radii: &[f64],
    resolution: f64,
) -> Result<GrowthProfile> {
    if samples.is_empty() || radii.is_empty() {
        return Err(Error::invalid("growth profile needs samples and radii"));
    }
    if radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("radii must be positive"));
    }
    use rayon::prelude::*;
    let ratios: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|x| {
            radii
                .iter()
                .map(|&r| ball_mass_at(mu, x, r, resolution) / r.powf(s))
                .collect()
        })
        .collect();
    let k_hat = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok(GrowthProfile {
        s,
        radii: radii.to_vec(),
        ratios,
        k_hat,
    })
}
