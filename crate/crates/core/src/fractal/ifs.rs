use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{moran_dimension, Point, Similitude};
use crate::{Error, Result};

/// Default level of the point cloud used to bound the attractor diameter.
pub const DEFAULT_DIAMETER_LEVEL: usize = 6;

/// Point clouds are capped at this many points.
const CLOUD_BUDGET: usize = 4096;

/// JSON form of an IFS: `{ "ambient_dim": p, "maps": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalDefinition {
    pub ambient_dim: usize,
    pub maps: Vec<MapDefinition>,
    /// Known attractor diameter; overrides the cloud estimate when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDefinition {
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonal: Option<Vec<Vec<f64>>>,
    pub translation: Vec<f64>,
}

/// An iterated function system of contracting similitudes.
///
/// Maps are kept sorted by ascending scale, so word letter `0` is always the
/// map with the smallest contraction ratio `L_1`.
#[derive(Debug, Clone)]
pub struct Ifs {
    maps: Vec<Similitude>,
    scales: Vec<f64>,
    natural: Vec<f64>,
    ambient_dim: usize,
    dimension: f64,
    attractor_diam: f64,
    fixed_point: Point,
    barycenter: Point,
    cloud: Vec<Point>,
    cloud_diam: f64,
    separation_gap: Option<f64>,
}

impl Ifs {
    pub fn new(maps: Vec<Similitude>) -> Result<Self> {
        Self::build(maps, None, DEFAULT_DIAMETER_LEVEL)
    }

    /// Same as [`Ifs::new`] with an explicitly known attractor diameter.
    pub fn with_diameter(maps: Vec<Similitude>, diameter: f64) -> Result<Self> {
        if !(diameter > 0.0 && diameter.is_finite()) {
            return Err(Error::invalid(format!(
                "diameter {diameter} must be positive"
            )));
        }
        Self::build(maps, Some(diameter), DEFAULT_DIAMETER_LEVEL)
    }

    pub fn with_diameter_level(maps: Vec<Similitude>, level: usize) -> Result<Self> {
        Self::build(maps, None, level)
    }

    fn build(mut maps: Vec<Similitude>, diameter: Option<f64>, level: usize) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::invalid("an IFS needs at least two maps"));
        }
        if maps.len() > u16::MAX as usize {
            return Err(Error::invalid("too many maps"));
        }
        let p = maps[0].dim();
        if maps.iter().any(|m| m.dim() != p) {
            return Err(Error::invalid("maps act on different ambient dimensions"));
        }
        maps.sort_by(|a, b| a.scale().total_cmp(&b.scale()));
        let scales: Vec<f64> = maps.iter().map(Similitude::scale).collect();
        let dimension = moran_dimension(&scales)?;
        let natural: Vec<f64> = scales.iter().map(|l| l.powf(dimension)).collect();
        let fixed_point = maps[0].fixed_point();

        // The barycenter of the natural measure solves b = sum_i w_i phi_i(b).
        let mut a = DMatrix::<f64>::identity(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        for (m, w) in maps.iter().zip(&natural) {
            a -= m.orthogonal() * (w * m.scale());
            rhs += m.translation() * *w;
        }
        let barycenter = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InternalConsistency("barycenter system is singular".into()))?;

        let n = maps.len();
        let mut level = level.max(1);
        while level > 1 && n.pow(level as u32) > CLOUD_BUDGET {
            level -= 1;
        }
        let cloud = point_cloud(&maps, &fixed_point, level);
        let l_max = scales[n - 1];
        let cell_ratio = l_max.powi(level as i32);

        let attractor_diam = match diameter {
            Some(d) => d,
            None => {
                // diam A <= m + 2 L_max^level diam A, with m the cloud diameter.
                if 2.0 * cell_ratio >= 1.0 {
                    return Err(Error::invalid(
                        "diameter level too coarse for a certified diameter bound",
                    ));
                }
                let m = max_pairwise(&cloud);
                let est = m / (1.0 - 2.0 * cell_ratio);
                if !(est > 0.0) {
                    return Err(Error::invalid("attractor is a single point"));
                }
                est
            }
        };

        Ok(Ifs {
            maps,
            scales,
            natural,
            ambient_dim: p,
            dimension,
            attractor_diam,
            fixed_point,
            barycenter,
            cloud,
            cloud_diam: cell_ratio * attractor_diam,
            separation_gap: None,
        })
    }

    pub fn from_definition(def: &FractalDefinition) -> Result<Self> {
        let p = def.ambient_dim;
        if p == 0 {
            return Err(Error::invalid("ambient_dim must be positive"));
        }
        let maps = def
            .maps
            .iter()
            .map(|m| {
                if m.translation.len() != p {
                    return Err(Error::invalid(format!(
                        "translation has length {} but ambient_dim is {p}",
                        m.translation.len()
                    )));
                }
                let orth = match &m.orthogonal {
                    None => DMatrix::identity(p, p),
                    Some(rows) => {
                        if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                            return Err(Error::invalid("orthogonal matrix has the wrong shape"));
                        }
                        DMatrix::from_fn(p, p, |i, j| rows[i][j])
                    }
                };
                Similitude::new(m.scale, orth, DVector::from_column_slice(&m.translation))
            })
            .collect::<Result<Vec<_>>>()?;
        match def.diameter {
            Some(d) => Self::with_diameter(maps, d),
            None => Self::new(maps),
        }
    }

    pub fn to_definition(&self) -> FractalDefinition {
        let p = self.ambient_dim;
        FractalDefinition {
            ambient_dim: p,
            maps: self
                .maps
                .iter()
                .map(|m| MapDefinition {
                    scale: m.scale(),
                    orthogonal: Some(
                        (0..p)
                            .map(|i| (0..p).map(|j| m.orthogonal()[(i, j)]).collect())
                            .collect(),
                    ),
                    translation: m.translation().iter().cloned().collect(),
                })
                .collect(),
            diameter: Some(self.attractor_diam),
        }
    }

    /// Certifies strict separation and records the gap.
    ///
    /// The gap is `min |c_a - c_b| - diam_a - diam_b` over pairs of
    /// level-`probe_level` cells lying in different level-1 cells, a lower
    /// bound on `min_i dist(phi_i(A), A \ phi_i(A))`.
    pub fn validate(mut self, probe_level: usize) -> Result<Self> {
        let gap = self.separation_lower_bound(probe_level)?;
        if !(gap > 0.0) {
            return Err(Error::SeparationViolation { gap });
        }
        self.separation_gap = Some(gap);
        Ok(self)
    }

    /// Validation at the largest probe level whose cloud fits the point budget (at most 6).
    pub fn validated(self) -> Result<Self> {
        let n = self.len();
        let mut level = 6usize;
        while level > 2 && n.pow(level as u32) > 2048 {
            level -= 1;
        }
        self.validate(level)
    }

    pub fn separation_lower_bound(&self, probe_level: usize) -> Result<f64> {
        if probe_level < 2 {
            return Err(Error::invalid("probe level must be at least 2"));
        }
        let n = self.len();
        let count = n
            .checked_pow(probe_level as u32)
            .filter(|c| *c <= 1 << 16)
            .ok_or(Error::Resource {
                what: "separation probe cells",
                needed: usize::MAX,
                budget: 1 << 16,
            })?;
        let points = point_cloud(&self.maps, &self.fixed_point, probe_level);
        let radii: Vec<f64> = (0..count)
            .map(|idx| {
                super::Word::from_index(idx, n, probe_level).scale(&self.scales)
                    * self.attractor_diam
            })
            .collect();
        let mut gap = f64::INFINITY;
        for a in 0..count {
            for b in (a + 1)..count {
                if a % n == b % n {
                    continue;
                }
                let g = (&points[a] - &points[b]).norm() - radii[a] - radii[b];
                gap = gap.min(g);
            }
        }
        Ok(gap)
    }

    /// Lower bound on `dist(y, A)` from the internal point cloud.
    pub(crate) fn distance_lower_bound(&self, y: &Point) -> f64 {
        let nearest = self
            .cloud
            .iter()
            .map(|c| (c - y).norm())
            .fold(f64::INFINITY, f64::min);
        nearest - self.cloud_diam
    }

    /// The same IFS conjugated by `x -> factor * x` (attractor scaled by `factor`).
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("dilation factor must be positive"));
        }
        let maps = self.maps.iter().map(|m| m.dilated(factor)).collect();
        let mut out = Self::with_diameter(maps, self.attractor_diam * factor)?;
        out.separation_gap = self.separation_gap.map(|g| g * factor);
        Ok(out)
    }

    pub fn maps(&self) -> &[Similitude] {
        &self.maps
    }

    pub fn map(&self, i: usize) -> &Similitude {
        &self.maps[i]
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// `L_i^d` for each map.
    pub fn natural_weights(&self) -> &[f64] {
        &self.natural
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dimension(&self) -> f64 {
        self.dimension
    }

    pub fn attractor_diam(&self) -> f64 {
        self.attractor_diam
    }

    /// Fixed point of the map with the smallest scale; lies on the attractor.
    pub fn fixed_point(&self) -> &Point {
        &self.fixed_point
    }

    /// Barycenter of the natural measure.
    pub fn barycenter(&self) -> &Point {
        &self.barycenter
    }

    pub fn separation_gap(&self) -> Option<f64> {
        self.separation_gap
    }

    pub(crate) fn require_gap(&self) -> Result<f64> {
        self.separation_gap
            .ok_or_else(|| Error::invalid("IFS has not been validated for strict separation"))
    }

    /// The constant `W = 2 diam A / (L_1 K)` of the copies construction.
    pub fn copies_constant(&self) -> Result<f64> {
        Ok(2.0 * self.attractor_diam / (self.scales[0] * self.require_gap()?))
    }
}

/// Images `phi_alpha(base)` over all words of length `level`, in lexicographic order.
pub(crate) fn point_cloud(maps: &[Similitude], base: &Point, level: usize) -> Vec<Point> {
    let mut pts = vec![base.clone()];
    for _ in 0..level {
        let mut next = Vec::with_capacity(pts.len() * maps.len());
        for p in &pts {
            for m in maps {
                next.push(m.apply(p));
            }
        }
        pts = next;
    }
    pts
}

fn max_pairwise(points: &[Point]) -> f64 {
    use rayon::prelude::*;
    (0..points.len())
        .into_par_iter()
        .map(|a| {
            points[a + 1..]
                .iter()
                .map(|q| (&points[a] - q).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cantor() -> Ifs {
        Ifs::new(vec![
            Similitude::homothety(1.0 / 3.0, &[0.0]).unwrap(),
            Similitude::homothety(1.0 / 3.0, &[2.0 / 3.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn cantor_basics() {
        let ifs = cantor();
        assert!((ifs.dimension() - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!(ifs.fixed_point()[0].abs() < 1e-15);
        assert!((ifs.barycenter()[0] - 0.5).abs() < 1e-14);
        // certified upper bound, tight to the cloud cell size
        assert!(ifs.attractor_diam() >= 1.0);
        assert!(ifs.attractor_diam() < 1.0 + 3.0 / 729.0);
    }

    #[test]
    fn cantor_separation_probe_four() {
        let ifs = cantor().validate(4).unwrap();
        let gap = ifs.separation_gap().unwrap();
        assert!(gap >= 1.0 / 3.0 - 2.0 * (1.0f64 / 3.0).powi(4) * 1.0);
        assert!(gap < 1.0 / 3.0);
        assert!(cantor().validate(1).is_err());
    }

    #[test]
    fn touching_halves_rejected() {
        let ifs = Ifs::new(vec![
            Similitude::homothety(0.5, &[0.0]).unwrap(),
            Similitude::homothety(0.5, &[0.5]).unwrap(),
        ])
        .unwrap();
        match ifs.validate(4) {
            Err(Error::SeparationViolation { gap }) => assert!(gap <= 0.0),
            other => panic!("expected separation violation, got {other:?}"),
        }
    }

    #[test]
    fn planar_corner_ifs_separated() {
        let corners = [[0.0, 0.0], [0.8, 0.0], [0.0, 0.8], [0.8, 0.8]];
        let maps = corners
            .iter()
            .map(|t| Similitude::homothety(0.2, t).unwrap())
            .collect();
        let ifs = Ifs::new(maps).unwrap().validate(4).unwrap();
        let gap = ifs.separation_gap().unwrap();
        assert!(gap > 0.0 && gap < 0.6);
        assert!((ifs.dimension() - 4f64.ln() / 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn maps_sorted_by_scale() {
        let ifs = Ifs::new(vec![
            Similitude::homothety(0.5, &[0.5]).unwrap(),
            Similitude::homothety(0.25, &[0.0]).unwrap(),
        ])
        .unwrap();
        assert_eq!(ifs.scales(), &[0.25, 0.5]);
        let sum: f64 = ifs.natural_weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn definition_round_trip() {
        let json = r#"{"ambient_dim":1,"maps":[{"scale":0.3333333333333333,"translation":[0.0]},
                      {"scale":0.3333333333333333,"translation":[0.6666666666666666]}]}"#;
        let def: FractalDefinition = serde_json::from_str(json).unwrap();
        let ifs = Ifs::from_definition(&def).unwrap();
        assert_eq!(ifs.len(), 2);
        let again = Ifs::from_definition(&ifs.to_definition()).unwrap();
        assert_eq!(again.attractor_diam(), ifs.attractor_diam());
        let bad = r#"{"ambient_dim":2,"maps":[{"scale":0.3,"translation":[0.0]},{"scale":0.3,"translation":[0.5]}]}"#;
        let def: FractalDefinition = serde_json::from_str(bad).unwrap();
        assert!(Ifs::from_definition(&def).is_err());
    }
}
