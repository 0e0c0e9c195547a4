use std::fmt;
use std::str::FromStr;

use crate::rotation::{rodrigues, Dcm};
use crate::{Mat3, SpatialError, Vec3, SINGULARITY_TOLERANCE};

/// Intrinsic Tait-Bryan rotation sequence, named in application order.
///
/// `Zyx` is the aerospace 3-2-1 (yaw, pitch, roll) sequence:
/// `P_{b/i} = R_z(ψ) R_y(θ) R_x(φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EulerSequence {
    Xyz,
    Xzy,
    Yxz,
    Yzx,
    Zxy,
    #[default]
    Zyx,
}

impl EulerSequence {
    pub const ALL: [EulerSequence; 6] = [
        EulerSequence::Xyz,
        EulerSequence::Xzy,
        EulerSequence::Yxz,
        EulerSequence::Yzx,
        EulerSequence::Zxy,
        EulerSequence::Zyx,
    ];

    /// Axis indices in application order.
    pub fn axes(self) -> [usize; 3] {
        match self {
            EulerSequence::Xyz => [0, 1, 2],
            EulerSequence::Xzy => [0, 2, 1],
            EulerSequence::Yxz => [1, 0, 2],
            EulerSequence::Yzx => [1, 2, 0],
            EulerSequence::Zxy => [2, 0, 1],
            EulerSequence::Zyx => [2, 1, 0],
        }
    }

    /// The axis whose angle carries the chart singularity.
    pub fn middle_axis(self) -> usize {
        self.axes()[1]
    }

    // +1 for cyclic orderings of (x, y, z).
    fn parity(self) -> f64 {
        let [i, j, _] = self.axes();
        if (i + 1) % 3 == j {
            1.0
        } else {
            -1.0
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EulerSequence::Xyz => "xyz",
            EulerSequence::Xzy => "xzy",
            EulerSequence::Yxz => "yxz",
            EulerSequence::Yzx => "yzx",
            EulerSequence::Zxy => "zxy",
            EulerSequence::Zyx => "zyx",
        }
    }
}

impl fmt::Display for EulerSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EulerSequence {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "xyz" | "123" | "1-2-3" => Ok(EulerSequence::Xyz),
            "xzy" | "132" | "1-3-2" => Ok(EulerSequence::Xzy),
            "yxz" | "213" | "2-1-3" => Ok(EulerSequence::Yxz),
            "yzx" | "231" | "2-3-1" => Ok(EulerSequence::Yzx),
            "zxy" | "312" | "3-1-2" => Ok(EulerSequence::Zxy),
            "zyx" | "321" | "3-2-1" => Ok(EulerSequence::Zyx),
            other => Err(format!("unknown Euler sequence `{other}`")),
        }
    }
}

/// Attitude chart: one angle per axis plus the sequence that combines them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    /// Rotation angles about x, y and z (rad), regardless of sequence.
    pub angles: Vec3,
    pub sequence: EulerSequence,
}

impl EulerAngles {
    pub fn new(angles: Vec3, sequence: EulerSequence) -> Self {
        EulerAngles { angles, sequence }
    }

    pub fn zero(sequence: EulerSequence) -> Self {
        EulerAngles {
            angles: Vec3::zeros(),
            sequence,
        }
    }

    /// Angle of the middle rotation (pitch for 3-2-1).
    pub fn middle(&self) -> f64 {
        self.angles[self.sequence.middle_axis()]
    }

    pub fn check_chart(&self) -> Result<(), SpatialError> {
        let pitch = self.middle();
        if pitch.cos().abs() < SINGULARITY_TOLERANCE.sin() {
            return Err(SpatialError::GimbalSingularity {
                angle: pitch,
                tolerance: SINGULARITY_TOLERANCE,
            });
        }
        Ok(())
    }
}

fn elementary(axis: usize, angle: f64) -> Mat3 {
    let mut e = Vec3::zeros();
    e[axis] = 1.0;
    rodrigues(&e, angle)
}

/// `P_{./i}(Θ)`: product of the elementary rotations in sequence order.
pub fn euler_to_dcm(theta: &EulerAngles) -> Dcm {
    let [i, j, k] = theta.sequence.axes();
    let a = &theta.angles;
    Dcm::from_matrix_unchecked(elementary(i, a[i]) * elementary(j, a[j]) * elementary(k, a[k]))
}

/// Inverse of [`euler_to_dcm`]; fails near the middle-angle singularity.
pub fn dcm_to_euler(p: &Dcm, sequence: EulerSequence) -> Result<EulerAngles, SpatialError> {
    let [i, j, k] = sequence.axes();
    let eps = sequence.parity();
    let m = p.matrix();
    let s = eps * m[(i, k)];
    let c = (m[(i, i)] * m[(i, i)] + m[(i, j)] * m[(i, j)]).sqrt();
    let mut angles = Vec3::zeros();
    angles[j] = s.atan2(c);
    angles[i] = (-eps * m[(j, k)]).atan2(m[(k, k)]);
    angles[k] = (-eps * m[(i, j)]).atan2(m[(i, i)]);
    let out = EulerAngles { angles, sequence };
    out.check_chart()?;
    Ok(out)
}

/// `E(Θ)` such that `ω_body = E(Θ) Θ̇`.
pub fn gamma_inverse(theta: &EulerAngles) -> Mat3 {
    let [i, j, k] = theta.sequence.axes();
    let a = &theta.angles;
    let rj = elementary(j, a[j]);
    let rk = elementary(k, a[k]);
    let mut out = Mat3::zeros();
    let mut e = Vec3::zeros();
    e[i] = 1.0;
    out.set_column(i, &(rk.transpose() * rj.transpose() * e));
    let mut e = Vec3::zeros();
    e[j] = 1.0;
    out.set_column(j, &(rk.transpose() * e));
    let mut e = Vec3::zeros();
    e[k] = 1.0;
    out.set_column(k, &e);
    out
}

/// `Γ(Θ)` such that `Θ̇ = Γ(Θ) ω_body`.
pub fn gamma(theta: &EulerAngles) -> Result<Mat3, SpatialError> {
    theta.check_chart()?;
    let e = gamma_inverse(theta);
    e.try_inverse().ok_or(SpatialError::GimbalSingularity {
        angle: theta.middle(),
        tolerance: SINGULARITY_TOLERANCE,
    })
}
