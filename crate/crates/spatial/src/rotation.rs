use nalgebra::{Matrix6, SMatrix};

use crate::{Mat3, SpatialError, Vec3};

/// Skew-symmetric matrix `(*v)` such that `(*v) w = v × w`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula for `e^{angle (*axis)}`.
pub fn rot_exp(axis: &Vec3, angle: f64) -> Result<Dcm, SpatialError> {
    let norm = axis.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(SpatialError::NonUnitAxis { norm });
    }
    Ok(Dcm(rodrigues(&(axis / norm), angle)))
}

pub(crate) fn rodrigues(axis: &Vec3, angle: f64) -> Mat3 {
    let k = skew(axis);
    let (s, c) = angle.sin_cos();
    Mat3::identity() + k * s + k * k * (1.0 - c)
}

/// Direction cosine matrix `P_{a/b}`: columns are the axes of `a` in `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(Mat3);

impl Dcm {
    pub fn identity() -> Self {
        Dcm(Mat3::identity())
    }

    /// Accepts `m` only if `mᵀm = I` and `det m = +1` within 1e-12.
    pub fn from_matrix(m: Mat3) -> Result<Self, SpatialError> {
        Self::from_matrix_with_tolerance(m, 1e-12)
    }

    /// Same check with a caller-chosen tolerance (used for hand-typed input).
    pub fn from_matrix_with_tolerance(m: Mat3, tol: f64) -> Result<Self, SpatialError> {
        let orthonormality = (m.transpose() * m - Mat3::identity()).amax();
        let det = m.determinant();
        if !(orthonormality <= tol) || !((det - 1.0).abs() <= tol) {
            return Err(SpatialError::NotOrthonormal { orthonormality, det });
        }
        Ok(Dcm(m))
    }

    /// Nearest rotation to `m` (polar projection), for inputs known to be
    /// rotations up to rounding.
    pub fn orthonormalized(m: Mat3) -> Result<Self, SpatialError> {
        let svd = m.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        Self::from_matrix(u * vt)
    }

    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Dcm(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Dcm {
        Dcm(self.0.transpose())
    }

    /// `P_{a/c} = P_{b/c} · P_{a/b}`, i.e. `self` is `P_{b/c}`.
    pub fn compose(&self, inner: &Dcm) -> Dcm {
        Dcm(self.0 * inner.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn apply_transpose(&self, v: &Vec3) -> Vec3 {
        self.0.tr_mul(v)
    }

    /// `P^{×2} = diag(P, P)`, the augmented DCM for dual vectors.
    pub fn augmented_dual(&self) -> Matrix6<f64> {
        let mut out = Matrix6::zeros();
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.0);
        out.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.0);
        out
    }

    /// `P^{18} = diag(P^{×2}, P^{×2}, P, 1₃)`; the Euler-angle slot is untouched.
    pub fn augmented_motion(&self) -> SMatrix<f64, 18, 18> {
        let mut out = SMatrix::<f64, 18, 18>::zeros();
        for block in 0..5 {
            out.fixed_view_mut::<3, 3>(3 * block, 3 * block)
                .copy_from(&self.0);
        }
        out.fixed_view_mut::<3, 3>(15, 15)
            .copy_from(&Mat3::identity());
        out
    }

    /// Rotation angle in radians (0..=π).
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }
}

impl std::ops::Mul for Dcm {
    type Output = Dcm;
    fn mul(self, rhs: Dcm) -> Dcm {
        self.compose(&rhs)
    }
}
