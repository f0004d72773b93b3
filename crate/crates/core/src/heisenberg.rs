//! The finite Heisenberg group: clock and shift matrices, the projective
//! T_a basis with its cocycle kappa, the mixed tensor basis of gl(p) (x)
//! gl(l), and the interleaving permutation.

use crate::error::{Error, Result};
use crate::operator::DenseOperator;
use ndarray::Array2;
use num_complex::Complex64;

fn e_m_f(x: f64, m: i64) -> Complex64 {
    Complex64::new(0.0, 2.0 * std::f64::consts::PI * x / m as f64).exp()
}

/// Point of the lattice Gamma_m = (Z/mZ)^2, stored reduced:
/// 0 <= a1, a2 < m. Equality is mod-m equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LatticeIndex {
    a1: i64,
    a2: i64,
    m: i64,
}

impl LatticeIndex {
    pub fn new(a1: i64, a2: i64, m: i64) -> Result<Self> {
        if m < 1 {
            return Err(Error::Domain(format!("lattice order must be >= 1, got {m}")));
        }
        Ok(LatticeIndex {
            a1: a1.rem_euclid(m),
            a2: a2.rem_euclid(m),
            m,
        })
    }

    pub fn a1(&self) -> i64 {
        self.a1
    }
    pub fn a2(&self) -> i64 {
        self.a2
    }
    pub fn order(&self) -> i64 {
        self.m
    }
    pub fn is_zero(&self) -> bool {
        self.a1 == 0 && self.a2 == 0
    }

    /// Reduced mod-m sum.
    pub fn add(&self, other: &LatticeIndex) -> Result<LatticeIndex> {
        if self.m != other.m {
            return Err(Error::LatticeMismatch(self.m, other.m));
        }
        LatticeIndex::new(self.a1 + other.a1, self.a2 + other.a2, self.m)
    }

    pub fn neg(&self) -> LatticeIndex {
        LatticeIndex::new(-self.a1, -self.a2, self.m).expect("order unchanged")
    }

    /// All m^2 points of Gamma_m.
    pub fn all(m: i64) -> Vec<LatticeIndex> {
        let mut v = Vec::with_capacity((m * m) as usize);
        for a1 in 0..m {
            for a2 in 0..m {
                v.push(LatticeIndex { a1, a2, m });
            }
        }
        v
    }

    /// Gamma_m with (0,0) removed.
    pub fn all_nonzero(m: i64) -> Vec<LatticeIndex> {
        LatticeIndex::all(m).into_iter().filter(|a| !a.is_zero()).collect()
    }
}

/// Clock matrix Q = diag(e_m(1), ..., e_m(m-1), 1).
pub fn clock_matrix(m: i64) -> Result<DenseOperator> {
    if m < 1 {
        return Err(Error::Domain(format!("clock_matrix: m must be >= 1, got {m}")));
    }
    let mut d = Array2::zeros((m as usize, m as usize));
    for k in 0..m {
        d[(k as usize, k as usize)] = e_m_f((k + 1) as f64, m);
    }
    DenseOperator::from_array(d, vec![m as usize])
}

/// Cyclic shift Lambda with ones on the superdiagonal and in the lower-left
/// corner; Lambda e_k = e_{k-1} on basis vectors.
pub fn shift_matrix(m: i64) -> Result<DenseOperator> {
    if m < 1 {
        return Err(Error::Domain(format!("shift_matrix: m must be >= 1, got {m}")));
    }
    let n = m as usize;
    let mut d = Array2::zeros((n, n));
    for i in 0..n - 1 {
        d[(i, i + 1)] = Complex64::new(1.0, 0.0);
    }
    d[(n - 1, 0)] = Complex64::new(1.0, 0.0);
    DenseOperator::from_array(d, vec![n])
}

/// Q^k or Lambda^k with k any integer (the matrices have order m).
fn matrix_power(base: &DenseOperator, k: i64, m: i64) -> DenseOperator {
    let k = k.rem_euclid(m);
    let mut out = DenseOperator::identity(vec![base.dim()]);
    for _ in 0..k {
        out = out.dot(base);
    }
    out
}

/// T_a = (m / 2 pi i) e_m(a1 a2 / 2) Q^{a1} Lambda^{a2} at the literal
/// integer pair (a1, a2). The half-integer phase makes this a projective
/// section: shifting the raw index by m changes T by a sign, so products
/// T_a T_b = kappa_{a,b} T_{a+b} close on raw integer sums.
pub fn t_matrix_raw(a1: i64, a2: i64, m: i64) -> Result<DenseOperator> {
    let q = clock_matrix(m)?;
    let l = shift_matrix(m)?;
    let pref = Complex64::new(m as f64, 0.0) / Complex64::new(0.0, 2.0 * std::f64::consts::PI)
        * e_m_f(a1 as f64 * a2 as f64 / 2.0, m);
    Ok(matrix_power(&q, a1, m).dot(&matrix_power(&l, a2, m)).scale(pref))
}

/// T at the reduced representative of a lattice index.
pub fn t_basis(a: &LatticeIndex) -> DenseOperator {
    t_matrix_raw(a.a1, a.a2, a.m).expect("valid order")
}

/// kappa_{a,b} = (m / 2 pi i) e_m(-(a x b)/2), a x b = a1 b2 - a2 b1, at raw
/// integer pairs.
pub fn kappa_raw(a: (i64, i64), b: (i64, i64), m: i64) -> Complex64 {
    let cross = a.0 * b.1 - a.1 * b.0;
    Complex64::new(m as f64, 0.0) / Complex64::new(0.0, 2.0 * std::f64::consts::PI)
        * e_m_f(-(cross as f64) / 2.0, m)
}

/// kappa on reduced lattice indices; the orders must match.
pub fn kappa(a: &LatticeIndex, b: &LatticeIndex) -> Result<Complex64> {
    if a.m != b.m {
        return Err(Error::LatticeMismatch(a.m, b.m));
    }
    Ok(kappa_raw((a.a1, a.a2), (b.a1, b.a2), a.m))
}

/// Index into the tensor basis E^a_{ij} = E_{ij} (x) T_a of gl(p) (x) gl(l).
/// i, j are 1-based as in the matrix-unit notation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BasisElement {
    pub i: usize,
    pub j: usize,
    pub a: LatticeIndex,
}

/// Standard matrix unit E_{ij} (1-based) in gl(p).
pub fn matrix_unit(i: usize, j: usize, p: usize) -> Result<DenseOperator> {
    if i < 1 || i > p || j < 1 || j > p {
        return Err(Error::Domain(format!("matrix unit E_{i}{j} out of range for gl({p})")));
    }
    let mut d = Array2::zeros((p, p));
    d[(i - 1, j - 1)] = Complex64::new(1.0, 0.0);
    DenseOperator::from_array(d, vec![p])
}

/// E^a_{ij} = E_{ij} (x) T_a as an N x N matrix, N = p l, with the gl(p)
/// factor outer and the gl(l) factor inner.
pub fn tensor_unit(e: &BasisElement, p: usize, l: usize) -> Result<DenseOperator> {
    if e.a.order() != l as i64 {
        return Err(Error::LatticeMismatch(e.a.order(), l as i64));
    }
    let eij = matrix_unit(e.i, e.j, p)?;
    let ta = t_basis(&e.a);
    let kr = eij.kron(&ta);
    DenseOperator::from_array(kr.data().clone(), vec![p * l])
}

/// The interleaving permutation S of (o03)-ordered coordinates into the
/// p-block-of-l form: new position (i, alpha) = i*l + alpha picks up the old
/// position alpha*p + i. It satisfies
///   S u S^-1      = direct sum of u_J Id_{l x l},
///   S Q_N S^-1    = direct sum of e_N(J - p) Q_{l x l},
///   S Lambda_N^p S^-1 = direct sum of Lambda_{l x l},
/// verified at construction.
pub fn interleaver(p: usize, l: usize) -> Result<DenseOperator> {
    let n = p * l;
    let mut s = Array2::zeros((n, n));
    for i in 0..p {
        for alpha in 0..l {
            s[(i * l + alpha, alpha * p + i)] = Complex64::new(1.0, 0.0);
        }
    }
    let s = DenseOperator::from_array(s, vec![n])?;
    verify_interleaver(&s, p, l)?;
    Ok(s)
}

fn verify_interleaver(s: &DenseOperator, p: usize, l: usize) -> Result<()> {
    let n = (p * l) as i64;
    let st = s.transpose(); // permutation: S^-1 = S^T
    // u-line with a deterministic test vector
    let uvals: Vec<Complex64> = (0..p).map(|k| Complex64::new(0.31 + 0.17 * k as f64, 0.0)).collect();
    let mut u = Array2::zeros((n as usize, n as usize));
    for k in 0..n as usize {
        u[(k, k)] = uvals[k % p];
    }
    let u = DenseOperator::from_array(u, vec![n as usize])?;
    let mut want = Array2::zeros((n as usize, n as usize));
    for i in 0..p {
        for alpha in 0..l {
            want[(i * l + alpha, i * l + alpha)] = uvals[i];
        }
    }
    let got = s.dot(&u).dot(&st);
    if (got.data() - &want).iter().map(|x| x.norm()).fold(0.0, f64::max) > 1e-12 {
        return Err(Error::Internal("interleaver: u-conjugation failed".into()));
    }
    // Q-line: blocks e_N(J - p) Q_{l x l}, J = 1..p
    let qn = clock_matrix(n)?;
    let ql = clock_matrix(l as i64)?;
    let mut want = Array2::zeros((n as usize, n as usize));
    for i in 0..p {
        let scal = e_m_f((i as i64 + 1 - p as i64) as f64, n);
        for alpha in 0..l {
            want[(i * l + alpha, i * l + alpha)] = scal * ql.data()[(alpha, alpha)];
        }
    }
    let got = s.dot(&qn).dot(&st);
    if (got.data() - &want).iter().map(|x| x.norm()).fold(0.0, f64::max) > 1e-12 {
        return Err(Error::Internal("interleaver: Q-conjugation failed".into()));
    }
    // Lambda^p-line: blocks Lambda_{l x l}
    let ln = shift_matrix(n)?;
    let lp = matrix_power(&ln, p as i64, n);
    let ll = shift_matrix(l as i64)?;
    let want = DenseOperator::identity(vec![p]).kron(&ll);
    let got = s.dot(&lp).dot(&st);
    if got.data().iter().zip(want.data().iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
        > 1e-12
    {
        return Err(Error::Internal("interleaver: Lambda^p-conjugation failed".into()));
    }
    Ok(())
}
