//! Average densities, order-two densities and the constants built from them.
//!
//! Everything is in units of the natural measure: `Theta(mu, x, r) =
//! mu(B(x, r)) / r^d` with `mu` a (sub-)probability cell measure.

use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    ballmass_radii, BallMassProfile, DEFAULT_NODES_PER_DECADE, DEFAULT_POTENTIAL_RESOLUTION,
};
use crate::fit::{linear_fit, mad, median, poly_fit};
use crate::fractal::{AttractorPoint, Ifs, Word};
use crate::measure::{ball_mass_at, CellMeasure, DEFAULT_RESOLUTION};
use crate::{Error, Result};

/// Quadrature density for the logarithmic averages.
pub const DEFAULT_DENSITY_NODES_PER_DECADE: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityProfile {
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
}

impl DensityProfile {
    /// `max - min` of `theta` over radii below `r_below`.
    pub fn oscillation(&self, r_below: f64) -> f64 {
        let vals: Vec<f64> = self
            .radii
            .iter()
            .zip(&self.theta)
            .filter(|(r, _)| **r <= r_below)
            .map(|(_, t)| *t)
            .collect();
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

/// `Theta(mu, x, r)` on the given radii.
pub fn theta_profile(
    mu: &CellMeasure,
    x: &AttractorPoint,
    radii: &[f64],
    resolution: f64,
) -> Result<DensityProfile> {
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::invalid("radii must be positive"));
    }
    let d = mu.tree().dimension();
    let theta = radii
        .par_iter()
        .map(|&r| ball_mass_at(mu, x, r, resolution) / r.powf(d))
        .collect();
    Ok(DensityProfile {
        radii: radii.to_vec(),
        theta,
    })
}

/// Logarithmic averages `A(eps) = |ln eps|^{-1} ∫_eps^{diam A} Theta(r) dr / r`
/// and their extrapolation `a + b / |ln eps| -> a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTwoEstimate {
    pub epsilons: Vec<f64>,
    pub averages: Vec<f64>,
    pub extrapolated: f64,
    pub slope: f64,
    pub residual: f64,
}

impl OrderTwoEstimate {
    /// The fit residual, reported as the estimate's uncertainty.
    pub fn uncertainty(&self) -> f64 {
        self.residual
    }
}

/// Smallest radius at which ball masses around `x` are trustworthy.
fn resolution_floor(ifs: &Ifs, x: &AttractorPoint) -> f64 {
    if x.tail_fixed {
        0.0
    } else {
        x.scale(ifs) * ifs.attractor_diam() * 1e-6
    }
}

pub fn order_two_density(
    mu: &CellMeasure,
    x: &AttractorPoint,
    eps: &[f64],
) -> Result<OrderTwoEstimate> {
    order_two_density_with(
        mu,
        x,
        eps,
        DEFAULT_DENSITY_NODES_PER_DECADE,
        DEFAULT_RESOLUTION,
    )
}

pub fn order_two_density_with(
    mu: &CellMeasure,
    x: &AttractorPoint,
    eps: &[f64],
    nodes_per_decade: usize,
    resolution: f64,
) -> Result<OrderTwoEstimate> {
    let ifs = mu.tree().ifs();
    let top = ifs.attractor_diam();
    if eps.len() < 2 {
        return Err(Error::invalid("need at least two epsilons"));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) || eps[0] >= top.min(1.0) || eps[eps.len() - 1] <= 0.0 {
        return Err(Error::invalid(
            "epsilons must decrease within (0, min(1, diam A))",
        ));
    }
    let floor = resolution_floor(ifs, x);
    if eps[eps.len() - 1] < floor {
        return Err(Error::invalid(format!(
            "smallest epsilon {:e} is below the resolution floor {floor:e}",
            eps[eps.len() - 1]
        )));
    }
    // Log grid from diam A down through every epsilon, each epsilon a node.
    let mut t = vec![top.ln()];
    let mut marks = Vec::with_capacity(eps.len());
    for &e in eps {
        let (a, b) = (*t.last().unwrap(), e.ln());
        let steps = ((a - b) / std::f64::consts::LN_10 * nodes_per_decade as f64)
            .ceil()
            .max(1.0) as usize;
        for k in 1..=steps {
            t.push(a + (b - a) * k as f64 / steps as f64);
        }
        marks.push(t.len() - 1);
    }
    let d = ifs.dimension();
    let theta: Vec<f64> = t
        .par_iter()
        .map(|&ln_r| {
            let r = ln_r.exp();
            ball_mass_at(mu, x, r, resolution) / (d * ln_r).exp()
        })
        .collect();
    let mut cumulative = vec![0.0; t.len()];
    for i in 1..t.len() {
        cumulative[i] = cumulative[i - 1] + 0.5 * (t[i - 1] - t[i]) * (theta[i - 1] + theta[i]);
    }
    let averages: Vec<f64> = marks
        .iter()
        .zip(eps)
        .map(|(&m, e)| cumulative[m] / e.ln().abs())
        .collect();
    let xs: Vec<f64> = eps.iter().map(|e| 1.0 / e.ln().abs()).collect();
    let fit =
        linear_fit(&xs, &averages).ok_or_else(|| Error::invalid("degenerate epsilon sequence"))?;
    Ok(OrderTwoEstimate {
        epsilons: eps.to_vec(),
        averages,
        extrapolated: fit.intercept,
        slope: fit.slope,
        residual: fit.residual,
    })
}

/// Epsilons spaced by whole periods `L_1^k` of the fixed tail, ending at `eps_min`.
pub fn tail_periodic_epsilons(ifs: &Ifs, eps_min: f64, count: usize) -> Vec<f64> {
    let l1 = ifs.scales()[0];
    (0..count)
        .rev()
        .map(|k| eps_min / l1.powi(k as i32))
        .collect()
}

/// Order-two density at a fixed-tail point from epsilons deep in its tail regime.
pub fn order_two_density_at_tail(
    mu: &CellMeasure,
    x: &AttractorPoint,
    periods: usize,
) -> Result<OrderTwoEstimate> {
    let ifs = mu.tree().ifs();
    let gap = ifs.require_gap()?;
    let len = x.word.len().max(mu.tree().level());
    let start = x.padded(len).scale(ifs) * gap * 0.5;
    let l1 = ifs.scales()[0];
    let eps_min = start * l1.powi(periods as i32);
    let eps = tail_periodic_epsilons(ifs, eps_min, periods / 2 + 1);
    order_two_density(mu, x, &eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DTilde {
    pub value: f64,
    /// Median absolute deviation of the per-point estimates.
    pub uncertainty: f64,
    pub estimates: Vec<f64>,
}

/// Random deep words, sampled letter by letter with natural probabilities.
pub fn random_words(ifs: &Ifs, count: usize, len: usize, seed: u64) -> Vec<Word> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = ifs.natural_weights();
    (0..count)
        .map(|_| {
            let letters = (0..len)
                .map(|_| {
                    let mut u: f64 = rng.gen();
                    let mut i = 0;
                    while i + 1 < p.len() && u >= p[i] {
                        u -= p[i];
                        i += 1;
                    }
                    i as u16
                })
                .collect();
            Word::from_indices(letters)
        })
        .collect()
}

/// Typical order-two density of the natural measure, `D~`.
///
/// Each sample is a `lambda`-random word of `word_len` letters; its average is
/// taken over `[eps_min, 1e-1 diam A]` with `eps_min` at the word's own scale,
/// so the fixed tail of the representative never enters.
pub fn d_tilde_constant(
    lam: &CellMeasure,
    samples: usize,
    word_len: usize,
    seed: u64,
) -> Result<DTilde> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let ifs = lam.tree().ifs();
    let words = random_words(ifs, samples, word_len, seed);
    let top = 0.1 * ifs.attractor_diam().min(1.0);
    let estimates: Vec<f64> = words
        .into_par_iter()
        .map(|w| {
            let x = AttractorPoint::of_cell(ifs, w);
            let eps_min = x.scale(ifs) * ifs.attractor_diam();
            let eps = crate::fit::log_space(top, eps_min, 8);
            order_two_density(lam, &x, &eps).map(|e| e.extrapolated)
        })
        .collect::<Result<_>>()?;
    Ok(DTilde {
        value: median(&estimates),
        uncertainty: mad(&estimates),
        estimates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialLimit {
    pub s_grid: Vec<f64>,
    /// `(d - s) U_s(x)` per grid point.
    pub normalized: Vec<f64>,
    /// Error bars of the normalized values.
    pub error_bars: Vec<f64>,
    pub limit: f64,
    /// Change in the limit when the fit drops one degree and its farthest point.
    pub uncertainty: f64,
}

/// Default extrapolation for potential limits: quadratic in `d - s` through the last three points.
pub const DEFAULT_LIMIT_POINTS: usize = 3;
pub const DEFAULT_LIMIT_DEGREE: usize = 2;

/// Polynomial extrapolation to `d - s = 0` over the last `points` values,
/// with the spread against the next lower model as its uncertainty.
pub fn extrapolate_to_dimension(
    gaps: &[f64],
    values: &[f64],
    points: usize,
    degree: usize,
) -> Result<(f64, f64)> {
    let k = points.min(gaps.len());
    if k <= degree || degree == 0 {
        return Err(Error::invalid(
            "not enough grid points for the extrapolation degree",
        ));
    }
    let start = gaps.len() - k;
    let fit = poly_fit(&gaps[start..], &values[start..], degree)
        .ok_or_else(|| Error::invalid("degenerate s grid"))?;
    let lower = poly_fit(&gaps[start + 1..], &values[start + 1..], degree - 1)
        .ok_or_else(|| Error::invalid("degenerate s grid"))?;
    let a = fit.coeffs[0];
    Ok((a, (a - lower.coeffs[0]).abs() + fit.residual))
}

/// `lim_{s -> d} (d - s) U_s(x)` from ball-mass potentials on an increasing grid.
pub fn normalized_potential_limit(
    mu: &CellMeasure,
    x: &AttractorPoint,
    s_grid: &[f64],
    points: usize,
    degree: usize,
) -> Result<PotentialLimit> {
    let d = mu.tree().dimension();
    if s_grid.len() < 2 || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("s grid must increase and have two points"));
    }
    let (r_min, r_max) = ballmass_radii(mu, x)?;
    let profile = BallMassProfile::new(
        mu,
        x,
        r_min,
        r_max,
        DEFAULT_NODES_PER_DECADE,
        DEFAULT_POTENTIAL_RESOLUTION,
    )?;
    let mut normalized = Vec::with_capacity(s_grid.len());
    let mut error_bars = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let p = profile.potential(s)?;
        normalized.push((d - s) * p.value);
        error_bars.push((d - s) * p.error_bar);
    }
    let gaps: Vec<f64> = s_grid.iter().map(|s| d - s).collect();
    let (limit, uncertainty) = extrapolate_to_dimension(&gaps, &normalized, points, degree)?;
    Ok(PotentialLimit {
        s_grid: s_grid.to_vec(),
        normalized,
        error_bars,
        limit,
        uncertainty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AhlforsConstants {
    pub c1: f64,
    pub c2: f64,
}

/// Extremes of `Theta(lambda, x, r)` over sample points and radii.
pub fn ahlfors_constants(
    lam: &CellMeasure,
    samples: &[AttractorPoint],
    radii: &[f64],
) -> Result<AhlforsConstants> {
    if samples.is_empty() || radii.is_empty() {
        return Err(Error::invalid("need samples and radii"));
    }
    let top = lam.tree().ifs().attractor_diam();
    if radii.iter().any(|r| !(*r > 0.0 && *r <= top)) {
        return Err(Error::invalid("radii must lie in (0, diam A]"));
    }
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for x in samples {
        let p = theta_profile(lam, x, radii, DEFAULT_RESOLUTION)?;
        for t in p.theta {
            c1 = c1.min(t);
            c2 = c2.max(t);
        }
    }
    Ok(AhlforsConstants { c1, c2 })
}

/// CSV rows `x_id,r,theta` for several profiles.
pub fn write_profiles_csv<W: Write>(profiles: &[DensityProfile], mut out: W) -> Result<()> {
    writeln!(out, "x_id,r,theta")?;
    for (i, p) in profiles.iter().enumerate() {
        for (r, t) in p.radii.iter().zip(&p.theta) {
            writeln!(out, "{i},{r:.12e},{t:.12e}")?;
        }
    }
    Ok(())
}

/// CSV rows `x_id,eps,average` for several order-two estimates.
pub fn write_averages_csv<W: Write>(estimates: &[OrderTwoEstimate], mut out: W) -> Result<()> {
    writeln!(out, "x_id,eps,average")?;
    for (i, e) in estimates.iter().enumerate() {
        for (r, a) in e.epsilons.iter().zip(&e.averages) {
            writeln!(out, "{i},{r:.12e},{a:.12e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::log_space;
    use crate::fractal::{BasePoint, CellTree, Similitude};
    use std::sync::Arc;

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

    fn natural(level: usize) -> CellMeasure {
        CellMeasure::natural(Arc::new(
            CellTree::build(cantor_ifs(), level, BasePoint::Barycenter).unwrap(),
        ))
    }

    #[test]
    fn theta_at_zero_is_one_on_triadic_radii() {
        let lam = natural(4);
        let x = AttractorPoint::of_cell(lam.tree().ifs(), Word::empty());
        let radii: Vec<f64> = (1..30).map(|k| 3f64.powi(-k)).collect();
        let p = theta_profile(&lam, &x, &radii, 1e-3).unwrap();
        assert!(p.theta.iter().all(|t| (t - 1.0).abs() < 1e-9));
        let full = theta_profile(&lam, &x, &[lam.tree().ifs().attractor_diam()], 1e-3).unwrap();
        let diam = lam.tree().ifs().attractor_diam();
        assert!((full.theta[0] - diam.powf(-lam.tree().dimension())).abs() < 1e-12);
    }

    #[test]
    fn averaging_damps_oscillation() {
        let lam = natural(6);
        let ifs = lam.tree().ifs().clone();
        let w = random_words(&ifs, 1, 40, 5).remove(0);
        let x = AttractorPoint::of_cell(&ifs, w);
        let radii = log_space(1e-1, 1e-12, 400);
        let prof = theta_profile(&lam, &x, &radii, 1e-3).unwrap();
        let eps = log_space(1e-6, 1e-12, 6);
        let est = order_two_density(&lam, &x, &eps).unwrap();
        let spread = est
            .averages
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            - est.averages.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(spread < prof.oscillation(1e-1));
    }

    #[test]
    fn linear_in_the_measure() {
        let lam = natural(4);
        let ifs = lam.tree().ifs().clone();
        let x = AttractorPoint::of_cell(&ifs, "1.2.1".parse().unwrap());
        let eps = log_space(1e-2, 1e-6, 5);
        let a = order_two_density(&lam, &x, &eps).unwrap();
        let b = order_two_density(&lam.scaled(2.5).unwrap(), &x, &eps).unwrap();
        assert!((b.extrapolated / a.extrapolated - 2.5).abs() < 1e-12);
    }

    #[test]
    fn constant_profile_gives_constant_average() {
        // Theta is exactly 1 on triadic radii at 0 but not between them; the
        // average over whole periods is still a constant-plus-1/|ln eps| form.
        let lam = natural(4);
        let x = AttractorPoint::of_cell(lam.tree().ifs(), Word::empty());
        let est = order_two_density_at_tail(&lam, &x, 12).unwrap();
        assert!(est.residual < 1e-6 * est.extrapolated);
    }

    #[test]
    fn doubled_density_doubles_estimate() {
        let lam = natural(5);
        let tree = lam.tree().clone();
        let ifs = tree.ifs().clone();
        let mu = CellMeasure::from_coarse_density(tree, 1, &[2.0, 0.0]).unwrap();
        let x = AttractorPoint::of_cell(&ifs, "2.1.2.1.2.1".parse().unwrap());
        let a = order_two_density_at_tail(&lam, &x, 10).unwrap();
        let b = order_two_density_at_tail(&mu, &x, 10).unwrap();
        assert!((b.extrapolated / a.extrapolated - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_epsilons() {
        let lam = natural(3);
        let x = AttractorPoint::of_cell(lam.tree().ifs(), Word::empty());
        assert!(order_two_density(&lam, &x, &[1e-3, 1e-2]).is_err());
        assert!(order_two_density(&lam, &x, &[1e-3]).is_err());
        let loose = AttractorPoint {
            tail_fixed: false,
            ..AttractorPoint::of_cell(lam.tree().ifs(), "1.2".parse().unwrap())
        };
        assert!(order_two_density(&lam, &loose, &[1e-2, 1e-9]).is_err());
    }

    #[test]
    fn ahlfors_brackets_one() {
        let lam = natural(6);
        let ifs = lam.tree().ifs().clone();
        let mut xs: Vec<_> = random_words(&ifs, 8, 20, 1)
            .into_iter()
            .map(|w| AttractorPoint::of_cell(&ifs, w))
            .collect();
        xs.push(AttractorPoint::of_cell(&ifs, Word::empty()));
        let radii: Vec<f64> = (1..12)
            .map(|k| 3f64.powi(-k))
            .chain(log_space(0.5, 1e-5, 40))
            .collect();
        let c = ahlfors_constants(&lam, &xs, &radii).unwrap();
        assert!(0.0 < c.c1 && c.c1 <= 1.0 + 1e-9 && c.c2 >= 1.0 - 1e-9 && c.c2 < f64::INFINITY);
    }

    #[test]
    fn mirror_points_agree() {
        let lam = natural(5);
        let ifs = lam.tree().ifs().clone();
        let w = "1.2.2.1.2.1.1.2.2.2.1";
        let mirror: String = w
            .chars()
            .map(|c| match c {
                '1' => '2',
                '2' => '1',
                c => c,
            })
            .collect();
        let eps = log_space(1e-2, 1e-5, 6);
        // the mirror of phi_w(0) is phi_w'(1); locate both without fixed tails
        let x = AttractorPoint::of_cell(&ifs, w.parse().unwrap());
        let xm_pos = 1.0 - x.position(&ifs)[0];
        let xm = AttractorPoint::locate(&ifs, &crate::fractal::Point::from_vec(vec![xm_pos]), 11)
            .unwrap();
        assert_eq!(xm.word.to_string(), mirror);
        let a = order_two_density(&lam, &x, &eps).unwrap();
        let b = order_two_density(&lam, &xm, &eps).unwrap();
        assert!((a.extrapolated - b.extrapolated).abs() < 1e-6 * a.extrapolated);
    }

    #[test]
    fn potential_limit_positive() {
        let lam = natural(4);
        let ifs = lam.tree().ifs().clone();
        let x = AttractorPoint::of_cell(&ifs, "1.2".parse().unwrap());
        let d = lam.tree().dimension();
        let grid: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|g| d - g).collect();
        let lim = normalized_potential_limit(&lam, &x, &grid, 3, 2).unwrap();
        assert!(lim.limit > 0.0 && lim.normalized.iter().all(|v| *v > 0.0));
    }
}
