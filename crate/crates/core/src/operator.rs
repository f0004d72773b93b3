//! Dense complex operators on V, V (x) V and V (x) V (x) V with explicit
//! tensor-factor bookkeeping.

use crate::error::{Error, Result};
use ndarray::Array2;
use num_complex::Complex64;

/// Dense square operator together with the dimensions of the tensor factors
/// it acts on. `factor_dims` has one entry per factor; the total dimension is
/// their product.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    data: Array2<Complex64>,
    factor_dims: Vec<usize>,
}

impl DenseOperator {
    pub fn from_array(data: Array2<Complex64>, factor_dims: Vec<usize>) -> Result<Self> {
        let dim: usize = factor_dims.iter().product();
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::Internal(format!(
                "operator is {}x{} but factor dims {:?} give {}",
                data.nrows(),
                data.ncols(),
                factor_dims,
                dim
            )));
        }
        Ok(DenseOperator { data, factor_dims })
    }

    pub fn zeros(factor_dims: Vec<usize>) -> Self {
        let dim: usize = factor_dims.iter().product();
        DenseOperator {
            data: Array2::zeros((dim, dim)),
            factor_dims,
        }
    }

    pub fn identity(factor_dims: Vec<usize>) -> Self {
        let dim: usize = factor_dims.iter().product();
        DenseOperator {
            data: Array2::eye(dim),
            factor_dims,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_factors(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn kron(&self, other: &DenseOperator) -> DenseOperator {
        let mut dims = self.factor_dims.clone();
        dims.extend_from_slice(&other.factor_dims);
        DenseOperator {
            data: ndarray::linalg::kron(&self.data, &other.data),
            factor_dims: dims,
        }
    }

    pub fn dot(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator {
            data: self.data.dot(&other.data),
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn scale(&self, c: Complex64) -> DenseOperator {
        DenseOperator {
            data: self.data.mapv(|x| c * x),
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn add(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator {
            data: &self.data + &other.data,
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn sub(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator {
            data: &self.data - &other.data,
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn add_scaled_assign(&mut self, c: Complex64, other: &DenseOperator) {
        self.data.zip_mut_with(&other.data, |x, &y| *x += c * y);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diag().sum()
    }

    /// Inverse, valid only for monomial-with-phases or diagonal-conjugation
    /// operators we construct (permutation times diagonal). Falls back to the
    /// conjugate transpose when the operator is unitary up to scale; callers
    /// in this crate only invert unitaries times nonzero scalars.
    pub fn try_unitary_inverse(&self) -> Result<DenseOperator> {
        // For X with X X^dagger = s Id, the inverse is X^dagger / s.
        let xd = self.dagger();
        let prod = self.data.dot(&xd.data);
        let s = prod.diag().sum() / Complex64::new(self.dim() as f64, 0.0);
        if s.norm() < 1e-14 {
            return Err(Error::Internal("singular operator".into()));
        }
        let off = {
            let mut m = prod;
            for i in 0..self.dim() {
                m[(i, i)] -= s;
            }
            m.iter().map(|x| x.norm()).fold(0.0, f64::max)
        };
        if off > 1e-10 * s.norm() {
            return Err(Error::Internal(
                "operator is not unitary up to scale; cannot invert cheaply".into(),
            ));
        }
        Ok(xd.scale(Complex64::new(1.0, 0.0) / s))
    }

    /// Inverse of a monomial matrix (exactly one nonzero entry per row and
    /// column), which covers every transition operator this crate builds:
    /// permutations, diagonals and their products.
    pub fn monomial_inverse(&self) -> Result<DenseOperator> {
        let n = self.dim();
        let mut inv = Array2::zeros((n, n));
        let mut seen_cols = vec![false; n];
        for i in 0..n {
            let mut hit = None;
            for j in 0..n {
                if self.data[(i, j)].norm() > 1e-13 {
                    if hit.is_some() {
                        return Err(Error::Internal("not a monomial matrix".into()));
                    }
                    hit = Some(j);
                }
            }
            let j = hit.ok_or_else(|| Error::Internal("singular monomial matrix".into()))?;
            if seen_cols[j] {
                return Err(Error::Internal("not a monomial matrix".into()));
            }
            seen_cols[j] = true;
            inv[(j, i)] = Complex64::new(1.0, 0.0) / self.data[(i, j)];
        }
        DenseOperator::from_array(inv, self.factor_dims.clone())
    }

    pub fn dagger(&self) -> DenseOperator {
        DenseOperator {
            data: self.data.t().mapv(|x| x.conj()),
            factor_dims: self.factor_dims.clone(),
        }
    }

    pub fn transpose(&self) -> DenseOperator {
        DenseOperator {
            data: self.data.t().to_owned(),
            factor_dims: self.factor_dims.clone(),
        }
    }
}

/// Swap operator P on V (x) V, P(x (x) y) = y (x) x.
pub fn swap(dim: usize) -> DenseOperator {
    let mut m = Array2::zeros((dim * dim, dim * dim));
    for i in 0..dim {
        for j in 0..dim {
            m[(j * dim + i, i * dim + j)] = Complex64::new(1.0, 0.0);
        }
    }
    DenseOperator {
        data: m,
        factor_dims: vec![dim, dim],
    }
}

/// Embed a two-leg operator into legs (j,k) of V (x) V (x) V.
pub fn embed_pair(r: &DenseOperator, legs: (usize, usize), dim: usize) -> Result<DenseOperator> {
    if r.dim() != dim * dim {
        return Err(Error::Internal("embed_pair: dimension mismatch".into()));
    }
    let id = DenseOperator::identity(vec![dim]);
    let r3 = match legs {
        (1, 2) => r.kron(&id),
        (2, 3) => id.kron(r),
        (1, 3) => {
            let p23 = DenseOperator::identity(vec![dim]).kron(&swap(dim));
            p23.dot(&r.kron(&id)).dot(&p23)
        }
        _ => return Err(Error::Internal(format!("embed_pair: bad legs {:?}", legs))),
    };
    DenseOperator::from_array(r3.data().clone(), vec![dim, dim, dim])
}

/// Embed a one-leg operator on the given leg (1-based) of V^{(x) n}.
pub fn embed_single(x: &DenseOperator, leg: usize, n: usize, dim: usize) -> DenseOperator {
    let mut out = DenseOperator::identity(vec![1]);
    for k in 1..=n {
        if k == leg {
            out = out.kron(x);
        } else {
            out = out.kron(&DenseOperator::identity(vec![dim]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn swap_squares_to_identity() {
        let p = swap(3);
        let p2 = p.dot(&p);
        let id = DenseOperator::identity(vec![3, 3]);
        assert!(p2.sub(&id).max_abs() < 1e-15);
    }

    #[test]
    fn embed_13_conjugation() {
        // A (x) B on legs (1,3) must act as A on leg 1, B on leg 3.
        let mut a = DenseOperator::zeros(vec![2]);
        a.data_mut()[(0, 1)] = Complex64::new(1.0, 0.0);
        let mut b = DenseOperator::zeros(vec![2]);
        b.data_mut()[(1, 0)] = Complex64::new(2.0, 0.0);
        let ab = a.kron(&b);
        let emb = embed_pair(&ab, (1, 3), 2).unwrap();
        let id = DenseOperator::identity(vec![2]);
        let direct = a.kron(&id).kron(&b);
        assert!(emb.sub(&direct).max_abs() < 1e-15);
    }
}
