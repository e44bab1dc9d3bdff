//! Truncated two-mode Fock space and dense ladder operators.
//!
//! States |n1, n2> are flattened mode-1 major: `flat = n1 * (n_max_2 + 1) + n2`.
//! Every operator builder in the crate follows this ordering, and [`tensor`]
//! places the mode-1 factor on the left so that `tensor(a, I)` acts on mode 1.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Tolerance used by [`ComplexOperator::assert_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockBasis {
    n_max_1: usize,
    n_max_2: usize,
}

impl FockBasis {
    pub fn new(n_max_1: usize, n_max_2: usize) -> Result<Self> {
        if n_max_1 < 1 {
            return Err(Error::InvalidCutoff(n_max_1));
        }
        if n_max_2 < 1 {
            return Err(Error::InvalidCutoff(n_max_2));
        }
        Ok(FockBasis { n_max_1, n_max_2 })
    }

    /// Same cutoff on both cavities.
    pub fn symmetric(n_max: usize) -> Result<Self> {
        Self::new(n_max, n_max)
    }

    pub fn n_max_1(&self) -> usize {
        self.n_max_1
    }

    pub fn n_max_2(&self) -> usize {
        self.n_max_2
    }

    pub fn dim(&self) -> usize {
        (self.n_max_1 + 1) * (self.n_max_2 + 1)
    }

    /// Flat index of |n1, n2>, or `None` when either number exceeds its cutoff.
    pub fn index(&self, n1: usize, n2: usize) -> Option<usize> {
        (n1 <= self.n_max_1 && n2 <= self.n_max_2).then(|| n1 * (self.n_max_2 + 1) + n2)
    }

    /// Inverse of [`FockBasis::index`].
    pub fn state(&self, flat: usize) -> Option<(usize, usize)> {
        (flat < self.dim()).then(|| (flat / (self.n_max_2 + 1), flat % (self.n_max_2 + 1)))
    }

    pub fn states(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.dim()).map(move |k| (k / (self.n_max_2 + 1), k % (self.n_max_2 + 1)))
    }
}

/// Dense complex square matrix on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexOperator {
    mat: DMatrix<C64>,
}

impl ComplexOperator {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        Ok(ComplexOperator { mat })
    }

    /// Builds an operator from a row-major closure.
    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexOperator {
            mat: DMatrix::from_fn(dim, dim, f),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        ComplexOperator {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        ComplexOperator {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        ComplexOperator {
            mat: self.mat.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        ComplexOperator {
            mat: self.mat.transpose(),
        }
    }

    pub fn conj(&self) -> Self {
        ComplexOperator {
            mat: self.mat.map(|z| z.conj()),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexOperator { mat: &self.mat * s }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        ComplexOperator {
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Induced infinity norm (maximum absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        self.mat
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// max |A - A^dagger|.
    pub fn hermitian_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn assert_hermitian(&self) -> Result<()> {
        let dev = self.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            Err(Error::NotHermitian(dev))
        } else {
            Ok(())
        }
    }

    /// <bra|A|ket> between flat basis indices.
    pub fn matrix_element(&self, bra: usize, ket: usize) -> C64 {
        self.mat[(bra, ket)]
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }
}

impl Add for &ComplexOperator {
    type Output = ComplexOperator;
    fn add(self, rhs: &ComplexOperator) -> ComplexOperator {
        ComplexOperator {
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &ComplexOperator {
    type Output = ComplexOperator;
    fn sub(self, rhs: &ComplexOperator) -> ComplexOperator {
        ComplexOperator {
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, rhs: &ComplexOperator) -> ComplexOperator {
        ComplexOperator {
            mat: &self.mat * &rhs.mat,
        }
    }
}

/// Single-mode annihilation operator: sqrt(k) at (k-1, k).
pub fn annihilation(n_max: usize) -> Result<ComplexOperator> {
    if n_max < 1 {
        return Err(Error::InvalidCutoff(n_max));
    }
    Ok(ComplexOperator::from_fn(n_max + 1, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

pub fn creation(n_max: usize) -> Result<ComplexOperator> {
    annihilation(n_max).map(|a| a.adjoint())
}

/// `a†a`, built as an exact integer diagonal.
pub fn number(n_max: usize) -> Result<ComplexOperator> {
    if n_max < 1 {
        return Err(Error::InvalidCutoff(n_max));
    }
    Ok(ComplexOperator::from_fn(n_max + 1, |r, c| {
        if r == c {
            C64::new(r as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

/// Kronecker product, `a` acting on mode 1 and `b` on mode 2.
pub fn tensor(a: &ComplexOperator, b: &ComplexOperator) -> ComplexOperator {
    ComplexOperator {
        mat: a.mat.kronecker(&b.mat),
    }
}

/// Annihilation operators `(a1, a2)` on the flat two-mode index space.
pub fn two_mode_ops(basis: &FockBasis) -> (ComplexOperator, ComplexOperator) {
    // cutoffs were validated by FockBasis::new
    let a = annihilation(basis.n_max_1()).expect("validated cutoff");
    let b = annihilation(basis.n_max_2()).expect("validated cutoff");
    let i1 = ComplexOperator::identity(basis.n_max_1() + 1);
    let i2 = ComplexOperator::identity(basis.n_max_2() + 1);
    (tensor(&a, &i2), tensor(&i1, &b))
}

/// Column vector with a single unit entry at |n1, n2>.
pub fn basis_vector(basis: &FockBasis, n1: usize, n2: usize) -> Option<nalgebra::DVector<C64>> {
    let k = basis.index(n1, n2)?;
    let mut v = nalgebra::DVector::zeros(basis.dim());
    v[k] = C64::new(1.0, 0.0);
    Some(v)
}
