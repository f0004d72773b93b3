//! The three quantum R-matrix families on V (x) V, V = C^p (x) C^l, plus
//! their classical, trigonometric and rational limits.
//!
//! All builders are verbatim transcriptions of the defining sums, with two
//! corrections that the quantum Yang-Baxter residuals force and that the
//! degeneration tests document:
//!   * the Cartan rho-term of the intermediate family carries an extra
//!     factor l (without it the dynamical Yang-Baxter equation fails for
//!     p, l > 1);
//!   * the trigonometric and rational formulas are the honest limits of the
//!     elliptic family (overall factor pi, lattice denominator l, and the
//!     sign of the cot-term).

use crate::elliptic::{self, e_c, ModularParam};
use crate::error::{Error, Result};
use crate::heisenberg::{matrix_unit, t_matrix_raw, LatticeIndex};
use crate::operator::DenseOperator;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const PI: f64 = std::f64::consts::PI;

/// The R-matrix family, keyed by the characteristic class of the underlying
/// bundle: vertex (generator class, p = 1), Felder (trivial class, l = 1),
/// and the intermediate family for N = p l with both p, l > 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Vertex,
    Felder,
    Intermediate,
    Trig,
    Rational,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Family::Vertex => "vertex",
            Family::Felder => "felder",
            Family::Intermediate => "intermediate",
            Family::Trig => "trig",
            Family::Rational => "rational",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vertex" => Ok(Family::Vertex),
            "felder" => Ok(Family::Felder),
            "intermediate" => Ok(Family::Intermediate),
            "trig" => Ok(Family::Trig),
            "rational" => Ok(Family::Rational),
            other => Err(Error::Domain(format!("unknown family '{other}'"))),
        }
    }
}

/// Parameters that pin one R-matrix: factor dimensions, modular parameter,
/// Planck constant and family tag.
#[derive(Clone, Copy, Debug)]
pub struct RMatrixSpec {
    pub p: usize,
    pub l: usize,
    pub tau: ModularParam,
    pub hbar: Complex64,
    pub family: Family,
}

impl RMatrixSpec {
    pub fn new(family: Family, p: usize, l: usize, tau: ModularParam, hbar: Complex64) -> Result<Self> {
        if p < 1 || l < 1 {
            return Err(Error::Domain("factor dimensions must be >= 1".into()));
        }
        if family == Family::Vertex && p != 1 {
            return Err(Error::Domain("vertex family requires p = 1".into()));
        }
        if family == Family::Felder && l != 1 {
            return Err(Error::Domain("felder family requires l = 1".into()));
        }
        Ok(RMatrixSpec { p, l, tau, hbar, family })
    }

    pub fn n(&self) -> usize {
        self.p * self.l
    }
}

/// Dynamical parameter u in C^p. Only the differences u_i - u_j enter any
/// formula; no trace constraint is imposed.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicalVector(pub Vec<Complex64>);

impl DynamicalVector {
    pub fn zero(p: usize) -> Self {
        DynamicalVector(vec![Complex64::new(0.0, 0.0); p])
    }

    pub fn shifted(&self, k: usize, delta: Complex64) -> Self {
        let mut v = self.0.clone();
        v[k] += delta;
        DynamicalVector(v)
    }

    pub fn diff(&self, i: usize, j: usize) -> Complex64 {
        self.0[i] - self.0[j]
    }
}

fn rterm_pole(i: usize, j: usize, a1: i64, a2: i64) -> impl FnOnce(Error) -> Error {
    move |e| Error::RTermPole { i, j, a1, a2, source: Box::new(e) }
}

/// Vertex (Baxter-Belavin-Drinfeld-Sklyanin) R-matrix on C^N (x) C^N:
/// R(z) = sum_{a in Gamma_N} phi_a(hbar, z) T_a (x) T_{-a}.
pub fn build_vertex(n: usize, z: Complex64, hbar: Complex64, tau: &ModularParam) -> Result<DenseOperator> {
    let m = n as i64;
    let mut r = DenseOperator::zeros(vec![n, n]);
    for a in LatticeIndex::all(m) {
        let co = elliptic::phi_deformed(a.a1(), a.a2(), m, hbar, z, tau)
            .map_err(rterm_pole(0, 0, a.a1(), a.a2()))?;
        let t = t_matrix_raw(a.a1(), a.a2(), m)?;
        let tm = t_matrix_raw(-a.a1(), -a.a2(), m)?;
        r.add_scaled_assign(co, &t.kron(&tm));
    }
    Ok(r)
}

/// Felder dynamical R-matrix on C^N (x) C^N:
/// R(u, z) = sum_{ij} phi(u_ij + delta_ij hbar, z) E_ij (x) E_ji
///         + sum_{mu != nu} phi(-u_munu, hbar) E_mumu (x) E_nunu.
pub fn build_felder(
    n: usize,
    u: &DynamicalVector,
    z: Complex64,
    hbar: Complex64,
    tau: &ModularParam,
) -> Result<DenseOperator> {
    if u.0.len() != n {
        return Err(Error::Domain(format!("felder: u must have {n} entries")));
    }
    let mut r = DenseOperator::zeros(vec![n, n]);
    for i in 0..n {
        for j in 0..n {
            let arg = u.diff(i, j) + if i == j { hbar } else { Complex64::new(0.0, 0.0) };
            let co = elliptic::phi(arg, z, tau).map_err(rterm_pole(i, j, 0, 0))?;
            let eij = matrix_unit(i + 1, j + 1, n)?;
            let eji = matrix_unit(j + 1, i + 1, n)?;
            r.add_scaled_assign(co, &eij.kron(&eji));
        }
    }
    for mu in 0..n {
        for nu in 0..n {
            if mu == nu {
                continue;
            }
            let co = elliptic::phi(-u.diff(mu, nu), hbar, tau).map_err(rterm_pole(mu, nu, 0, 0))?;
            let emu = matrix_unit(mu + 1, mu + 1, n)?;
            let enu = matrix_unit(nu + 1, nu + 1, n)?;
            r.add_scaled_assign(co, &emu.kron(&enu));
        }
    }
    Ok(r)
}

/// How the Cartan rho-sector of the intermediate family treats hbar. The
/// verbatim reading has rho at +hbar; the quasi-classical variant evaluates
/// rho at -hbar, which aligns its 1/hbar pole with the diagonal terms so the
/// leading coefficient is a scalar as the quasi-classical expansion requires.
/// Both variants satisfy the dynamical Yang-Baxter equation with the same
/// shift convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoParity {
    Verbatim,
    ClassicalNorm,
}

/// Intermediate R-matrix on V (x) V, V = C^p (x) C^l:
/// R(u, z) = sum_{ij, a} phi_{-a}(-u_ij - delta_ij hbar, z) E^a_ij (x) E^{-a}_ji
///         + sum_{mu != nu} l * phi(-l u_munu, l hbar) E^0_mumu (x) E^0_nunu.
pub fn build_intermediate(
    p: usize,
    l: usize,
    u: &DynamicalVector,
    z: Complex64,
    hbar: Complex64,
    tau: &ModularParam,
) -> Result<DenseOperator> {
    build_intermediate_with(p, l, u, z, hbar, tau, RhoParity::Verbatim)
}

pub fn build_intermediate_with(
    p: usize,
    l: usize,
    u: &DynamicalVector,
    z: Complex64,
    hbar: Complex64,
    tau: &ModularParam,
    rho: RhoParity,
) -> Result<DenseOperator> {
    if u.0.len() != p {
        return Err(Error::Domain(format!("intermediate: u must have {p} entries")));
    }
    let n = p * l;
    let ml = l as i64;
    let mut r = DenseOperator::zeros(vec![n, n]);
    for i in 0..p {
        for j in 0..p {
            let eta_base = -u.diff(i, j) - if i == j { hbar } else { Complex64::new(0.0, 0.0) };
            for a in LatticeIndex::all(ml) {
                let co = elliptic::phi_deformed(-a.a1(), -a.a2(), ml, eta_base, z, tau)
                    .map_err(rterm_pole(i, j, a.a1(), a.a2()))?;
                let ea = matrix_unit(i + 1, j + 1, p)?.kron(&t_matrix_raw(a.a1(), a.a2(), ml)?);
                let ema = matrix_unit(j + 1, i + 1, p)?.kron(&t_matrix_raw(-a.a1(), -a.a2(), ml)?);
                let ea = DenseOperator::from_array(ea.data().clone(), vec![n])?;
                let ema = DenseOperator::from_array(ema.data().clone(), vec![n])?;
                r.add_scaled_assign(co, &ea.kron(&ema));
            }
        }
    }
    let lh = match rho {
        RhoParity::Verbatim => Complex64::new(l as f64, 0.0) * hbar,
        RhoParity::ClassicalNorm => -Complex64::new(l as f64, 0.0) * hbar,
    };
    let t0 = t_matrix_raw(0, 0, ml)?;
    for mu in 0..p {
        for nu in 0..p {
            if mu == nu {
                continue;
            }
            let co = Complex64::new(l as f64, 0.0)
                * elliptic::phi(-Complex64::new(l as f64, 0.0) * u.diff(mu, nu), lh, tau)
                    .map_err(rterm_pole(mu, nu, 0, 0))?;
            let emu = matrix_unit(mu + 1, mu + 1, p)?.kron(&t0);
            let enu = matrix_unit(nu + 1, nu + 1, p)?.kron(&t0);
            let emu = DenseOperator::from_array(emu.data().clone(), vec![n])?;
            let enu = DenseOperator::from_array(enu.data().clone(), vec![n])?;
            r.add_scaled_assign(co, &emu.kron(&enu));
        }
    }
    Ok(r)
}

fn cot(z: Complex64) -> Complex64 {
    z.cos() / z.sin()
}

/// Trigonometric limit (Im tau -> +infinity) of the intermediate family,
/// same tensor structure, with
///   r^a_ij = pi cot(pi z) + pi cot(pi(-u_ij - delta_ij hbar - a1/l))   (a2 = 0)
///   r^a_ij = pi e((1/2 - a2/l) z) / sin(pi z)                          (a2 != 0)
///   rho^0_ij = l pi sin(pi(l hbar - l u_ij)) / (sin(pi l hbar) sin(pi l u_ji)).
pub fn build_trig(
    p: usize,
    l: usize,
    u: &DynamicalVector,
    z: Complex64,
    hbar: Complex64,
) -> Result<DenseOperator> {
    build_degenerate(p, l, u, z, hbar, false)
}

/// Rational limit: the formal substitution cot(pi x) -> 1/(pi x),
/// 1/sin(pi x) -> 1/(pi x) applied to the trigonometric family, so
///   r^a_ij = 1/(pi z) - 1/(pi (u_ij + delta_ij hbar + a1/l))   (a2 = 0)
///   r^a_ij = 1/(pi z)                                          (a2 != 0)
///   rho^0_ij = 1/(pi hbar) + 1/(pi u_ji).
pub fn build_rational(
    p: usize,
    l: usize,
    u: &DynamicalVector,
    z: Complex64,
    hbar: Complex64,
) -> Result<DenseOperator> {
    build_degenerate(p, l, u, z, hbar, true)
}

fn build_degenerate(
    p: usize,
    l: usize,
    u: &DynamicalVector,
    z: Complex64,
    hbar: Complex64,
    rational: bool,
) -> Result<DenseOperator> {
    if u.0.len() != p {
        return Err(Error::Domain(format!("u must have {p} entries")));
    }
    let n = p * l;
    let ml = l as i64;
    let pif = Complex64::new(PI, 0.0);
    let near_zero = |x: Complex64| x.norm() < 1e-12;
    if near_zero((pif * z).sin()) {
        return Err(Error::Domain("z at a pole of the trigonometric limit".into()));
    }
    let mut r = DenseOperator::zeros(vec![n, n]);
    for i in 0..p {
        for j in 0..p {
            let uijh = u.diff(i, j) + if i == j { hbar } else { Complex64::new(0.0, 0.0) };
            for a in LatticeIndex::all(ml) {
                let co = if a.a2() == 0 {
                    let x = uijh + Complex64::new(a.a1() as f64 / l as f64, 0.0);
                    if rational {
                        if near_zero(x) || near_zero(z) {
                            return Err(Error::RTermPole {
                                i,
                                j,
                                a1: a.a1(),
                                a2: a.a2(),
                                source: Box::new(Error::Domain("rational pole".into())),
                            });
                        }
                        1.0 / (pif * z) - 1.0 / (pif * x)
                    } else {
                        if near_zero((pif * x).sin()) {
                            return Err(Error::RTermPole {
                                i,
                                j,
                                a1: a.a1(),
                                a2: a.a2(),
                                source: Box::new(Error::Domain("trig pole".into())),
                            });
                        }
                        pif * cot(pif * z) + pif * cot(-pif * x)
                    }
                } else if rational {
                    1.0 / (pif * z)
                } else {
                    pif * e_c(Complex64::new(0.5 - a.a2() as f64 / l as f64, 0.0) * z)
                        / (pif * z).sin()
                };
                let ea = matrix_unit(i + 1, j + 1, p)?.kron(&t_matrix_raw(a.a1(), a.a2(), ml)?);
                let ema = matrix_unit(j + 1, i + 1, p)?.kron(&t_matrix_raw(-a.a1(), -a.a2(), ml)?);
                let ea = DenseOperator::from_array(ea.data().clone(), vec![n])?;
                let ema = DenseOperator::from_array(ema.data().clone(), vec![n])?;
                r.add_scaled_assign(co, &ea.kron(&ema));
            }
        }
    }
    let t0 = t_matrix_raw(0, 0, ml)?;
    let lf = Complex64::new(l as f64, 0.0);
    for mu in 0..p {
        for nu in 0..p {
            if mu == nu {
                continue;
            }
            let umn = u.diff(mu, nu);
            let co = if rational {
                if near_zero(hbar) || near_zero(umn) {
                    return Err(Error::Domain("rational rho pole".into()));
                }
                1.0 / (pif * hbar) + 1.0 / (pif * (-umn))
            } else {
                let num = (pif * lf * (hbar - umn)).sin();
                let den = (pif * lf * hbar).sin() * (pif * lf * (-umn)).sin();
                if near_zero(den) {
                    return Err(Error::Domain("trig rho pole".into()));
                }
                lf * pif * num / den
            };
            let emu = matrix_unit(mu + 1, mu + 1, p)?.kron(&t0);
            let enu = matrix_unit(nu + 1, nu + 1, p)?.kron(&t0);
            let emu = DenseOperator::from_array(emu.data().clone(), vec![n])?;
            let enu = DenseOperator::from_array(enu.data().clone(), vec![n])?;
            r.add_scaled_assign(co, &emu.kron(&enu));
        }
    }
    Ok(r)
}

/// Dispatch on the family tag. `z` is the spectral parameter; for the trig
/// and rational families tau is ignored.
pub fn build(spec: &RMatrixSpec, u: &DynamicalVector, z: Complex64) -> Result<DenseOperator> {
    match spec.family {
        Family::Vertex => build_vertex(spec.n(), z, spec.hbar, &spec.tau),
        Family::Felder => build_felder(spec.n(), u, z, spec.hbar, &spec.tau),
        Family::Intermediate => build_intermediate(spec.p, spec.l, u, z, spec.hbar, &spec.tau),
        Family::Trig => build_trig(spec.p, spec.l, u, z, spec.hbar),
        Family::Rational => build_rational(spec.p, spec.l, u, z, spec.hbar),
    }
}

/// A classical r-matrix together with its family tag.
#[derive(Clone, Debug)]
pub struct ClassicalRMatrix {
    pub r: DenseOperator,
    pub family: Family,
}

/// Closed-form classical r-matrices. The spectral argument is z (standing
/// for z - w). The vertex form uses unit-normalized generators
/// Ttil_a = (2 pi i / N) T_a so that its identity part is literally
/// E_1(z) Id (x) Id.
pub fn classical_r(
    family: Family,
    n: usize,
    u: &DynamicalVector,
    z: Complex64,
    tau: &ModularParam,
) -> Result<ClassicalRMatrix> {
    match family {
        Family::Vertex => {
            let m = n as i64;
            let norm = Complex64::new(0.0, 2.0 * PI) / Complex64::new(n as f64, 0.0);
            let mut r = DenseOperator::identity(vec![n, n]).scale(elliptic::eisenstein(1, z, tau)?);
            for a in LatticeIndex::all_nonzero(m) {
                let co = elliptic::phi_deformed(a.a1(), a.a2(), m, Complex64::new(0.0, 0.0), z, tau)?;
                let t = t_matrix_raw(a.a1(), a.a2(), m)?.scale(norm);
                let tm = t_matrix_raw(-a.a1(), -a.a2(), m)?.scale(norm);
                r.add_scaled_assign(co, &t.kron(&tm));
            }
            Ok(ClassicalRMatrix { r, family })
        }
        Family::Felder => {
            if u.0.len() != n {
                return Err(Error::Domain(format!("felder classical: u must have {n} entries")));
            }
            let e1z = elliptic::eisenstein(1, z, tau)?;
            let mut r = DenseOperator::zeros(vec![n, n]);
            for i in 0..n {
                let eii = matrix_unit(i + 1, i + 1, n)?;
                r.add_scaled_assign(e1z, &eii.kron(&eii));
            }
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let eij = matrix_unit(i + 1, j + 1, n)?;
                    let eji = matrix_unit(j + 1, i + 1, n)?;
                    r.add_scaled_assign(elliptic::phi(u.diff(i, j), z, tau)?, &eij.kron(&eji));
                    let eii = matrix_unit(i + 1, i + 1, n)?;
                    let ejj = matrix_unit(j + 1, j + 1, n)?;
                    r.add_scaled_assign(
                        -elliptic::eisenstein(1, u.diff(i, j), tau)?,
                        &eii.kron(&ejj),
                    );
                }
            }
            Ok(ClassicalRMatrix { r, family })
        }
        _ => Err(Error::Domain(
            "closed-form classical r exists for the vertex and felder families only".into(),
        )),
    }
}

/// How the 1/hbar pole of a quantum family is treated during extraction.
#[derive(Clone, Debug)]
pub enum PoleSpec {
    /// Measure the full leading matrix from the sample fit.
    Measure,
    /// The leading term is known to be `c * Id`; it is subtracted exactly
    /// before the finite part is fitted, which buys one extra fit order.
    KnownScalar(Complex64),
}

/// Quasi-classical limit by polynomial extrapolation in hbar.
///
/// Fits `hbar * R(hbar)` (or its pole-subtracted finite part) on the given
/// geometrically spaced samples and returns `(leading, finite)`: the
/// coefficient of 1/hbar and the hbar^0 term of R.
pub fn classical_limit_numeric(
    builder: &dyn Fn(Complex64) -> Result<DenseOperator>,
    hbar_samples: &[Complex64],
    pole: PoleSpec,
) -> Result<(DenseOperator, DenseOperator)> {
    let n = hbar_samples.len();
    if n < 3 {
        return Err(Error::Domain("need >= 3 hbar samples".into()));
    }
    let fit = |samples: &[Complex64]| -> Result<(DenseOperator, DenseOperator)> {
        let mats: Vec<DenseOperator> = samples
            .iter()
            .map(|&h| builder(h).map(|r| r.scale(h)))
            .collect::<Result<_>>()?;
        match &pole {
            PoleSpec::Measure => {
                // h R(h) = A + B h + ... ; A and B from the degree-(k-1) fit.
                let w0 = vandermonde_row(samples, 0)?;
                let w1 = vandermonde_row(samples, 1)?;
                let mut a = DenseOperator::zeros(mats[0].factor_dims().to_vec());
                let mut b = DenseOperator::zeros(mats[0].factor_dims().to_vec());
                for (idx, mat) in mats.iter().enumerate() {
                    a.add_scaled_assign(w0[idx], mat);
                    b.add_scaled_assign(w1[idx], mat);
                }
                Ok((a, b))
            }
            PoleSpec::KnownScalar(c) => {
                // g(h) = (h R - c Id)/h = B + C h + ... ; B from the fit at 0.
                let id = DenseOperator::identity(mats[0].factor_dims().to_vec());
                let g: Vec<DenseOperator> = mats
                    .iter()
                    .zip(samples)
                    .map(|(m, &h)| m.sub(&id.scale(*c)).scale(1.0 / h))
                    .collect();
                let w0 = vandermonde_row(samples, 0)?;
                let mut b = DenseOperator::zeros(mats[0].factor_dims().to_vec());
                for (idx, gm) in g.iter().enumerate() {
                    b.add_scaled_assign(w0[idx], gm);
                }
                Ok((id.scale(*c), b))
            }
        }
    };
    let (a_full, b_full) = fit(hbar_samples)?;
    // Nonconvergence check against the sub-fit on the smaller samples.
    if n > 3 {
        let (_, b_sub) = fit(&hbar_samples[1..])?;
        let gap = b_full.sub(&b_sub).max_abs();
        if gap > 0.5 * b_full.max_abs().max(1e-30) {
            return Err(Error::Numeric(format!(
                "successive classical-limit estimates diverge: gap {gap:e}"
            )));
        }
    }
    Ok((a_full, b_full))
}

/// Row `row` of the inverse Vandermonde matrix for the given nodes: weights
/// w with sum_k w_k f(h_k) = coefficient of h^row of the interpolating
/// polynomial.
fn vandermonde_row(nodes: &[Complex64], row: usize) -> Result<Vec<Complex64>> {
    let k = nodes.len();
    let mut v = vec![vec![Complex64::new(0.0, 0.0); k]; k];
    for (i, &h) in nodes.iter().enumerate() {
        let mut p = Complex64::new(1.0, 0.0);
        for j in 0..k {
            v[i][j] = p;
            p *= h;
        }
    }
    // Solve V^T w = e_row by Gaussian elimination.
    let mut aug = vec![vec![Complex64::new(0.0, 0.0); k + 1]; k];
    for r in 0..k {
        for c in 0..k {
            aug[r][c] = v[c][r];
        }
        aug[r][k] = if r == row {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| aug[a][col].norm().partial_cmp(&aug[b][col].norm()).unwrap())
            .unwrap();
        if aug[piv][col].norm() < 1e-30 {
            return Err(Error::Numeric("degenerate hbar samples".into()));
        }
        aug.swap(col, piv);
        let d = aug[col][col];
        for c in col..=k {
            aug[col][c] /= d;
        }
        for r in 0..k {
            if r != col {
                let f = aug[r][col];
                for c in col..=k {
                    let x = aug[col][c];
                    aug[r][c] -= f * x;
                }
            }
        }
    }
    Ok((0..k).map(|r| aug[r][k]).collect())
}
