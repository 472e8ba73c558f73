//! Strictly self-similar sets: similitudes, the IFS, cell trees and coding.
//!
//! Words follow the composition convention `phi_alpha = phi_{i_M} o ... o phi_{i_1}`:
//! the first index of a word is the innermost map, the last index picks the
//! level-1 cell. Lexicographic word order treats `i_1` as the most significant
//! digit, so the level-`m` cell containing a level-`M` cell `idx` is
//! `idx % N^m`.

mod coding;
mod ifs;
mod similitude;
mod tree;
mod word;

pub use coding::{code_point, copies_cell, AttractorPoint};
pub(crate) use ifs::point_cloud;
pub use ifs::{FractalDefinition, Ifs, MapDefinition, DEFAULT_DIAMETER_LEVEL};
pub use similitude::{Point, Similitude};
pub use tree::{BasePoint, CellTree, DEFAULT_CELL_BUDGET};
pub use word::Word;

use crate::{Error, Result};

/// Solves the Moran equation `sum_i L_i^d = 1` for `d > 0`.
///
/// Bisection on the strictly decreasing map `d -> sum L_i^d` followed by a
/// Newton polish that never leaves the bracket.
pub fn moran_dimension(scales: &[f64]) -> Result<f64> {
    if scales.len() < 2 {
        return Err(Error::invalid(
            "the Moran equation needs at least two scales",
        ));
    }
    if let Some(bad) = scales.iter().find(|l| !(**l > 0.0 && **l < 1.0)) {
        return Err(Error::invalid(format!("scale {bad} is outside (0, 1)")));
    }
    let f = |d: f64| scales.iter().map(|l| l.powf(d)).sum::<f64>() - 1.0;
    let df = |d: f64| scales.iter().map(|l| l.powf(d) * l.ln()).sum::<f64>();

    let l_max = scales.iter().cloned().fold(0.0, f64::max);
    let mut lo = 0.0;
    // N * L_max^hi = 1, so f(hi) <= 0.
    let mut hi = (scales.len() as f64).ln() / (1.0 / l_max).ln();
    if f(hi) >= 0.0 {
        return Ok(hi);
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut d = 0.5 * (lo + hi);
    for _ in 0..50 {
        let v = f(d);
        if v.abs() < 1e-15 {
            break;
        }
        if v > 0.0 {
            lo = d;
        } else {
            hi = d;
        }
        let mut next = d - v / df(d);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == d {
            break;
        }
        d = next;
    }
    if f(d).abs() >= 1e-12 {
        return Err(Error::InternalConsistency(format!(
            "Moran solve stalled at d = {d} with residual {:e}",
            f(d)
        )));
    }
    Ok(d)
}
