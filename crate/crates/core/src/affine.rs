//! Affine expressions in the stacked fast unknowns of a system.
//!
//! For a fixed slow state every block equation is affine in the fast
//! variables (spatial accelerations, joint accelerations, interconnection
//! wrenches), so they can be carried symbolically as `L f + c`.

use nalgebra::{DMatrix, DVector, Matrix6xX, RowDVector};

use crate::{Mat6, Vec6};

/// Six-row affine expression `L f + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine6 {
    pub lin: Matrix6xX<f64>,
    pub cst: Vec6,
}

/// Scalar affine expression `l f + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineScalar {
    pub lin: RowDVector<f64>,
    pub cst: f64,
}

impl Affine6 {
    pub fn zeros(n: usize) -> Self {
        Affine6 {
            lin: Matrix6xX::zeros(n),
            cst: Vec6::zeros(),
        }
    }

    pub fn constant(cst: Vec6, n: usize) -> Self {
        Affine6 {
            lin: Matrix6xX::zeros(n),
            cst,
        }
    }

    /// The six unknowns starting at column `offset`.
    pub fn unknowns(offset: usize, n: usize) -> Self {
        let mut lin = Matrix6xX::zeros(n);
        for i in 0..6 {
            lin[(i, offset + i)] = 1.0;
        }
        Affine6 {
            lin,
            cst: Vec6::zeros(),
        }
    }

    pub fn width(&self) -> usize {
        self.lin.ncols()
    }

    /// Adds `direction * f[column]`.
    pub fn add_column(&mut self, column: usize, direction: &Vec6) {
        let mut c = self.lin.column_mut(column);
        c += direction;
    }

    pub fn add_constant(&mut self, v: &Vec6) {
        self.cst += v;
    }

    pub fn premul(&self, m: &Mat6) -> Affine6 {
        Affine6 {
            lin: m * &self.lin,
            cst: m * self.cst,
        }
    }

    pub fn scaled(&self, k: f64) -> Affine6 {
        Affine6 {
            lin: &self.lin * k,
            cst: self.cst * k,
        }
    }

    /// `sᵀ (L f + c)`.
    pub fn project(&self, s: &Vec6) -> AffineScalar {
        AffineScalar {
            lin: s.transpose() * &self.lin,
            cst: s.dot(&self.cst),
        }
    }

    pub fn eval(&self, f: &DVector<f64>) -> Vec6 {
        &self.lin * f + self.cst
    }

    pub fn is_constant(&self) -> bool {
        self.lin.iter().all(|x| *x == 0.0)
    }
}

impl AffineScalar {
    pub fn constant(cst: f64, n: usize) -> Self {
        AffineScalar {
            lin: RowDVector::zeros(n),
            cst,
        }
    }

    pub fn add_column(&mut self, column: usize, k: f64) {
        self.lin[column] += k;
    }

    pub fn eval(&self, f: &DVector<f64>) -> f64 {
        (&self.lin * f)[0] + self.cst
    }
}

impl std::ops::Add<&Affine6> for &Affine6 {
    type Output = Affine6;
    fn add(self, rhs: &Affine6) -> Affine6 {
        Affine6 {
            lin: &self.lin + &rhs.lin,
            cst: self.cst + rhs.cst,
        }
    }
}

impl std::ops::Sub<&Affine6> for &Affine6 {
    type Output = Affine6;
    fn sub(self, rhs: &Affine6) -> Affine6 {
        Affine6 {
            lin: &self.lin - &rhs.lin,
            cst: self.cst - rhs.cst,
        }
    }
}

impl std::ops::AddAssign<&Affine6> for Affine6 {
    fn add_assign(&mut self, rhs: &Affine6) {
        self.lin += &rhs.lin;
        self.cst += rhs.cst;
    }
}

impl std::ops::Neg for Affine6 {
    type Output = Affine6;
    fn neg(self) -> Affine6 {
        Affine6 {
            lin: -self.lin,
            cst: -self.cst,
        }
    }
}

/// Row collector for the residual equations `A f + c = 0`.
#[derive(Debug, Clone)]
pub struct FastRows {
    pub(crate) lin: DMatrix<f64>,
    pub(crate) cst: DVector<f64>,
    next: usize,
}

impl FastRows {
    pub fn new(n: usize) -> Self {
        FastRows {
            lin: DMatrix::zeros(n, n),
            cst: DVector::zeros(n),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.next
    }

    pub fn is_empty(&self) -> bool {
        self.next == 0
    }

    pub fn push6(&mut self, e: &Affine6) {
        let r = self.next;
        self.lin.view_mut((r, 0), (6, e.width())).copy_from(&e.lin);
        self.cst.rows_mut(r, 6).copy_from(&e.cst);
        self.next += 6;
    }

    pub fn push1(&mut self, e: &AffineScalar) {
        let r = self.next;
        self.lin.row_mut(r).copy_from(&e.lin);
        self.cst[r] = e.cst;
        self.next += 1;
    }
}
