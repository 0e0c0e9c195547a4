use std::fmt;

/// Projection frame tag carried by twists, accelerations and wrenches.
///
/// Frame 0 is the inertial frame; the assembly layer hands out one id per body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct FrameId(pub u32);

impl FrameId {
    pub const INERTIAL: FrameId = FrameId(0);

    pub fn body(index: usize) -> FrameId {
        FrameId(index as u32 + 1)
    }

    pub fn check(self, other: FrameId) -> Result<(), crate::SpatialError> {
        if self == other {
            Ok(())
        } else {
            Err(crate::SpatialError::FrameMismatch {
                expected: self,
                found: other,
            })
        }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == FrameId::INERTIAL {
            write!(f, "R_i")
        } else {
            write!(f, "R_{}", self.0)
        }
    }
}
