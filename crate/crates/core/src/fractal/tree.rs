use std::sync::Arc;

use rayon::prelude::*;

use super::{Ifs, Point, Similitude, Word};
use crate::{Error, Result};

/// Maximum number of cells a tree may hold unless a budget is given explicitly.
pub const DEFAULT_CELL_BUDGET: usize = 1 << 16;

/// Point of `A` (or its hull) whose images represent the cells.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePoint {
    /// Fixed point of `phi_1`; always on the attractor.
    FixedPoint,
    /// Barycenter of the natural measure; best for kernel quadrature.
    Barycenter,
    Custom(Point),
}

impl BasePoint {
    pub fn resolve(&self, ifs: &Ifs) -> Result<Point> {
        match self {
            BasePoint::FixedPoint => Ok(ifs.fixed_point().clone()),
            BasePoint::Barycenter => Ok(ifs.barycenter().clone()),
            BasePoint::Custom(p) => {
                if p.len() != ifs.ambient_dim() {
                    Err(Error::invalid("base point has the wrong dimension"))
                } else {
                    Ok(p.clone())
                }
            }
        }
    }
}

/// All level-`M` cells `phi_alpha(A)` in lexicographic word order.
#[derive(Debug, Clone)]
pub struct CellTree {
    ifs: Arc<Ifs>,
    level: usize,
    base_point: Point,
    maps: Vec<Similitude>,
    centers: Vec<Point>,
    scales: Vec<f64>,
    natural: Vec<f64>,
}

impl CellTree {
    pub fn build(ifs: Arc<Ifs>, level: usize, base: BasePoint) -> Result<Self> {
        Self::build_with_budget(ifs, level, base, DEFAULT_CELL_BUDGET)
    }

    pub fn build_with_budget(
        ifs: Arc<Ifs>,
        level: usize,
        base: BasePoint,
        budget: usize,
    ) -> Result<Self> {
        let n = ifs.len();
        let count =
            n.checked_pow(level as u32)
                .filter(|c| *c <= budget)
                .ok_or(Error::Resource {
                    what: "cell tree",
                    needed: n.checked_pow(level as u32).unwrap_or(usize::MAX),
                    budget,
                })?;
        let base_point = base.resolve(&ifs)?;
        let d = ifs.dimension();

        // Level k+1 word (tau, j) sits at idx(tau) * N + j and has map phi_j o phi_tau.
        let mut maps = vec![Similitude::identity(ifs.ambient_dim())];
        for _ in 0..level {
            maps = maps
                .par_iter()
                .flat_map_iter(|m| ifs.maps().iter().map(move |phi| phi.compose(m)))
                .collect();
        }
        debug_assert_eq!(maps.len(), count);
        let centers: Vec<Point> = maps.par_iter().map(|m| m.apply(&base_point)).collect();
        let scales: Vec<f64> = maps.iter().map(Similitude::scale).collect();
        let natural: Vec<f64> = scales.iter().map(|l| l.powf(d)).collect();

        Ok(CellTree {
            ifs,
            level,
            base_point,
            maps,
            centers,
            scales,
            natural,
        })
    }

    pub fn ifs(&self) -> &Arc<Ifs> {
        &self.ifs
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn base_point(&self) -> &Point {
        &self.base_point
    }

    pub fn word(&self, idx: usize) -> Word {
        Word::from_index(idx, self.ifs.len(), self.level)
    }

    pub fn center(&self, idx: usize) -> &Point {
        &self.centers[idx]
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn cell_map(&self, idx: usize) -> &Similitude {
        &self.maps[idx]
    }

    pub fn scale(&self, idx: usize) -> f64 {
        self.scales[idx]
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Upper bound on the diameter of cell `idx`.
    pub fn diam(&self, idx: usize) -> f64 {
        self.scales[idx] * self.ifs.attractor_diam()
    }

    /// `lambda_alpha = scale(alpha)^d`.
    pub fn natural_weight(&self, idx: usize) -> f64 {
        self.natural[idx]
    }

    pub fn natural_weights(&self) -> &[f64] {
        &self.natural
    }

    pub fn dimension(&self) -> f64 {
        self.ifs.dimension()
    }

    /// True when both trees describe the same cells.
    pub fn same_as(&self, other: &CellTree) -> bool {
        std::ptr::eq(self, other)
            || (self.level == other.level
                && Arc::ptr_eq(&self.ifs, &other.ifs)
                && self.base_point == other.base_point)
    }
}
