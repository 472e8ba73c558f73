use super::{Ifs, Point, Word};
use crate::{Error, Result};

/// Absolute tolerance, in units of the attractor diameter, for membership tests.
const MEMBERSHIP_TOL: f64 = 1e-9;

/// Codes `x` by greedy descent: at each level the child whose inverse image
/// stays nearest the attractor is chosen.
///
/// The returned word has length `depth` and satisfies `x in phi_word(A)` up to
/// tolerance. The first map chosen is the outermost one, i.e. the last index.
pub fn code_point(ifs: &Ifs, x: &Point, depth: usize) -> Result<Word> {
    if depth == 0 {
        return Err(Error::invalid("coding depth must be at least 1"));
    }
    if x.len() != ifs.ambient_dim() {
        return Err(Error::invalid("point has the wrong dimension"));
    }
    let tol0 = MEMBERSHIP_TOL * ifs.attractor_diam();
    let lb = ifs.distance_lower_bound(x);
    if lb > tol0 {
        return Err(Error::PointOffAttractor {
            distance: lb,
            depth: 0,
        });
    }
    let mut y = x.clone();
    let mut magnification = 1.0;
    let mut outer_first = Vec::with_capacity(depth);
    for k in 0..depth {
        let mut best: Option<(f64, usize, Point)> = None;
        for (i, m) in ifs.maps().iter().enumerate() {
            let yi = m.apply_inverse(&y);
            let dist = ifs.distance_lower_bound(&yi);
            if best.as_ref().is_none_or(|b| dist < b.0) {
                best = Some((dist, i, yi));
            }
        }
        let (dist, i, yi) = best.expect("IFS has maps");
        magnification /= ifs.scales()[i];
        if dist > tol0 * magnification {
            return Err(Error::PointOffAttractor {
                distance: dist,
                depth: k + 1,
            });
        }
        outer_first.push(i as u16);
        y = yi;
    }
    outer_first.reverse();
    Ok(Word::from_indices(outer_first))
}

/// The cell `A'` of the copies construction for the ball `B(x, r)`.
///
/// Returns the empty word (`A' = A`) when `r >= L_1 K`; otherwise the level
/// `M - 1` cell containing `x`, where `M` is minimal with
/// `scale(cell_M(x)) * K < r`. Then `B(x, r) ∩ A ⊂ A'` and `diam A' < W r`.
pub fn copies_cell(ifs: &Ifs, x: &Point, r: f64) -> Result<Word> {
    if !(r > 0.0) {
        return Err(Error::invalid("radius must be positive"));
    }
    let gap = ifs.require_gap()?;
    let l1 = ifs.scales()[0];
    if r >= l1 * gap {
        return Ok(Word::empty());
    }
    let l_max = ifs.scales()[ifs.len() - 1];
    // scale(cell_M) <= L_max^M, so this depth always reaches the minimal M.
    let depth = ((r / gap).ln() / l_max.ln()).ceil().max(1.0) as usize + 1;
    let code = code_point(ifs, x, depth)?;
    let n_len = code.len();
    let mut scale = 1.0;
    for m in 1..=n_len {
        scale *= ifs.scales()[code.indices()[n_len - m] as usize];
        if scale * gap < r {
            return Ok(code.ancestor(m - 1));
        }
    }
    Err(Error::InternalConsistency(
        "copies depth bound was not reached".into(),
    ))
}

/// A point `phi_word(local)` of the attractor, kept in coded form.
///
/// Carrying the word lets ball masses and potentials zoom into deep cells in
/// local coordinates without losing precision. When `tail_fixed` is set,
/// `local` is the fixed point of `phi_1` and the point's coding continues with
/// the letter `1` forever, which makes its small-scale geometry exactly
/// self-similar.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractorPoint {
    pub word: Word,
    pub local: Point,
    pub tail_fixed: bool,
}

impl AttractorPoint {
    /// The representative `phi_word(x_0)` with `x_0` the fixed point of `phi_1`.
    pub fn of_cell(ifs: &Ifs, word: Word) -> Self {
        AttractorPoint {
            word,
            local: ifs.fixed_point().clone(),
            tail_fixed: true,
        }
    }

    /// Codes an arbitrary point of the attractor to `depth` letters.
    pub fn locate(ifs: &Ifs, x: &Point, depth: usize) -> Result<Self> {
        let word = code_point(ifs, x, depth)?;
        let mut local = x.clone();
        for &i in word.indices().iter().rev() {
            local = ifs.map(i as usize).apply_inverse(&local);
        }
        Ok(AttractorPoint {
            word,
            local,
            tail_fixed: false,
        })
    }

    pub fn position(&self, ifs: &Ifs) -> Point {
        self.word
            .indices()
            .iter()
            .fold(self.local.clone(), |x, &i| ifs.map(i as usize).apply(&x))
    }

    /// Positions after applying the first `k` maps, for `k = 0..=len`.
    pub(crate) fn chain(&self, ifs: &Ifs) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.word.len() + 1);
        out.push(self.local.clone());
        for &i in self.word.indices() {
            let next = ifs.map(i as usize).apply(out.last().unwrap());
            out.push(next);
        }
        out
    }

    /// Extends a fixed-tail word with inner `1`s up to `len`; same point.
    pub fn padded(&self, len: usize) -> Self {
        if !self.tail_fixed {
            return self.clone();
        }
        AttractorPoint {
            word: self.word.padded_inner(0, len),
            local: self.local.clone(),
            tail_fixed: true,
        }
    }

    pub fn scale(&self, ifs: &Ifs) -> f64 {
        self.word.scale(ifs.scales())
    }
}
