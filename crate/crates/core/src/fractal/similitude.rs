use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub type Point = DVector<f64>;

/// A contracting similarity `x -> scale * orthogonal * x + translation`.
#[derive(Debug, Clone, PartialEq)]
pub struct Similitude {
    scale: f64,
    orthogonal: DMatrix<f64>,
    translation: Point,
}

impl Similitude {
    pub fn new(scale: f64, orthogonal: DMatrix<f64>, translation: Point) -> Result<Self> {
        if !(scale > 0.0 && scale < 1.0) {
            return Err(Error::invalid(format!(
                "similitude scale {scale} outside (0, 1)"
            )));
        }
        let p = translation.len();
        if p == 0 || orthogonal.nrows() != p || orthogonal.ncols() != p {
            return Err(Error::invalid(format!(
                "orthogonal part is {}x{} but translation has dimension {p}",
                orthogonal.nrows(),
                orthogonal.ncols()
            )));
        }
        let defect = (orthogonal.transpose() * &orthogonal - DMatrix::identity(p, p)).amax();
        if !(defect < 1e-10) {
            return Err(Error::invalid(format!(
                "orthogonal part is not orthogonal (|Q^T Q - I|_max = {defect:e})"
            )));
        }
        Ok(Similitude {
            scale,
            orthogonal,
            translation,
        })
    }

    /// Homothety with identity orthogonal part.
    pub fn homothety(scale: f64, translation: &[f64]) -> Result<Self> {
        let p = translation.len();
        Self::new(
            scale,
            DMatrix::identity(p, p),
            DVector::from_column_slice(translation),
        )
    }

    pub fn identity(p: usize) -> Self {
        Similitude {
            scale: 1.0,
            orthogonal: DMatrix::identity(p, p),
            translation: DVector::zeros(p),
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn orthogonal(&self) -> &DMatrix<f64> {
        &self.orthogonal
    }

    pub fn translation(&self) -> &Point {
        &self.translation
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &Point) -> Point {
        (&self.orthogonal * x) * self.scale + &self.translation
    }

    pub fn apply_inverse(&self, y: &Point) -> Point {
        self.orthogonal.transpose() * (y - &self.translation) / self.scale
    }

    /// `self o inner`.
    pub fn compose(&self, inner: &Similitude) -> Similitude {
        Similitude {
            scale: self.scale * inner.scale,
            orthogonal: &self.orthogonal * &inner.orthogonal,
            translation: self.apply(&inner.translation),
        }
    }

    /// The unique fixed point `(I - scale * O)^{-1} t`.
    pub fn fixed_point(&self) -> Point {
        let p = self.dim();
        let a = DMatrix::identity(p, p) - &self.orthogonal * self.scale;
        a.lu()
            .solve(&self.translation)
            .expect("I - sO is invertible for a contraction")
    }

    /// Conjugate by the dilation `x -> factor * x`.
    pub fn dilated(&self, factor: f64) -> Similitude {
        Similitude {
            scale: self.scale,
            orthogonal: self.orthogonal.clone(),
            translation: &self.translation * factor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rotation(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn rejects_bad_parts() {
        assert!(Similitude::homothety(1.0, &[0.0]).is_err());
        assert!(Similitude::homothety(0.0, &[0.0]).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(Similitude::new(0.5, skew, DVector::zeros(2)).is_err());
        assert!(Similitude::new(0.5, DMatrix::identity(3, 3), DVector::zeros(2)).is_err());
    }

    #[test]
    fn fixed_point_is_fixed() {
        let m = Similitude::new(0.4, rotation(0.7), DVector::from_vec(vec![0.3, -0.2])).unwrap();
        let x = m.fixed_point();
        assert!((m.apply(&x) - &x).amax() < 1e-14);
    }

    proptest! {
        #[test]
        fn distances_scale(theta in 0.0..6.3f64, scale in 0.05..0.95f64,
                           tx in -1.0..1.0f64, ty in -1.0..1.0f64,
                           a in prop::array::uniform4(-2.0..2.0f64)) {
            let m = Similitude::new(scale, rotation(theta), DVector::from_vec(vec![tx, ty])).unwrap();
            let x = DVector::from_vec(vec![a[0], a[1]]);
            let y = DVector::from_vec(vec![a[2], a[3]]);
            let lhs = (m.apply(&x) - m.apply(&y)).norm();
            prop_assert!((lhs - scale * (x.clone() - &y).norm()).abs() < 1e-12);
            prop_assert!((m.apply_inverse(&m.apply(&x)) - &x).amax() < 1e-12);
        }

        #[test]
        fn compose_matches_sequential(t1 in 0.0..6.3f64, t2 in 0.0..6.3f64,
                                      x0 in -1.0..1.0f64, x1 in -1.0..1.0f64) {
            let a = Similitude::new(0.3, rotation(t1), DVector::from_vec(vec![0.1, 0.2])).unwrap();
            let b = Similitude::new(0.6, rotation(t2), DVector::from_vec(vec![-0.4, 0.5])).unwrap();
            let x = DVector::from_vec(vec![x0, x1]);
            let seq = a.apply(&b.apply(&x));
            prop_assert!((a.compose(&b).apply(&x) - seq).amax() < 1e-14);
        }
    }
}
