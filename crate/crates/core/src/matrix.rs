//! Dense complex linear algebra for small Hermitian problems.
//!
//! Everything here targets operators of dimension <= ~32: products, tensor
//! products, partial traces, a cyclic-Jacobi eigensolver and the operator
//! functions built on it (modulus, commutator, anticommutator). Values are
//! immutable after construction and all operations are pure functions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance enforced at construction time (hermiticity, positivity, trace).
pub const CONSTRUCTION_TOL: f64 = 1e-12;
/// Tolerance for algebraic identities (reconstruction, orthonormality).
pub const ALGEBRA_TOL: f64 = 1e-10;

/// Square complex matrix, row-major storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

/// Wire format: dimension plus row-major `[re, im]` pairs.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    entries: Vec<[f64; 2]>,
}

impl From<ComplexMatrix> for MatrixRepr {
    fn from(m: ComplexMatrix) -> Self {
        MatrixRepr {
            dim: m.dim,
            entries: m.entries.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<MatrixRepr> for ComplexMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let entries = r
            .entries
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        ComplexMatrix::new(r.dim, entries)
    }
}

impl ComplexMatrix {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(ComplexMatrix { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, Complex64::new(v, 0.0));
        }
        m
    }

    /// Matrix with real entries given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch("ragged rows".into()));
            }
            entries.extend(row.iter().map(|&x| Complex64::new(x, 0.0)));
        }
        ComplexMatrix::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.entries[i * self.dim + j] = value;
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        ComplexMatrix::new(self.dim, entries)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        ComplexMatrix::new(self.dim, entries)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    let v = out.get(i, j) + aik * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Kronecker product; dimensions multiply.
    pub fn tensor(&self, other: &Self) -> Self {
        let (da, db) = (self.dim, other.dim);
        let n = da * db;
        let mut out = Self::zeros(n);
        for i in 0..da {
            for j in 0..da {
                let aij = self.get(i, j);
                for k in 0..db {
                    for l in 0..db {
                        out.set(i * db + k, j * db + l, aij * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Largest entry of `|self - other|`, useful for tolerance checks.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut defect: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                defect = defect.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        defect
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.dim, self.dim, other.dim, other.dim
            )));
        }
        Ok(())
    }
}

/// Hermitian operator: `M = M^dag` within [`CONSTRUCTION_TOL`], then stored
/// exactly symmetrized so downstream algebra keeps hermiticity bit-exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct HermitianOperator(ComplexMatrix);

impl From<HermitianOperator> for ComplexMatrix {
    fn from(h: HermitianOperator) -> Self {
        h.0
    }
}

impl TryFrom<ComplexMatrix> for HermitianOperator {
    type Error = Error;

    fn try_from(m: ComplexMatrix) -> Result<Self> {
        HermitianOperator::new(m)
    }
}

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        let defect = m.hermiticity_defect();
        if defect > CONSTRUCTION_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let mut sym = m;
        let n = sym.dim;
        for i in 0..n {
            for j in i..n {
                let avg = (sym.get(i, j) + sym.get(j, i).conj()) * Complex64::new(0.5, 0.0);
                let avg = if i == j {
                    Complex64::new(avg.re, 0.0)
                } else {
                    avg
                };
                sym.set(i, j, avg);
                sym.set(j, i, avg.conj());
            }
        }
        Ok(HermitianOperator(sym))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        HermitianOperator::new(ComplexMatrix::from_real_rows(rows)?)
    }

    pub fn diag(values: &[f64]) -> Self {
        HermitianOperator(ComplexMatrix::diag(values))
    }

    pub fn identity(dim: usize) -> Self {
        HermitianOperator(ComplexMatrix::identity(dim))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(HermitianOperator(self.0.add(&other.0)?))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(HermitianOperator(self.0.sub(&other.0)?))
    }

    pub fn scale(&self, factor: f64) -> Self {
        HermitianOperator(self.0.scale(Complex64::new(factor, 0.0)))
    }

    /// `tr(self * rho)` for Hermitian `rho`; the result is real up to rounding.
    pub fn expectation(&self, rho: &ComplexMatrix) -> Result<f64> {
        self.0.check_same_dim(rho)?;
        let n = self.0.dim;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.0.get(i, k) * rho.get(k, i);
            }
        }
        Ok(acc.re)
    }

    /// Largest eigenvalue magnitude (Schatten-infinity norm).
    pub fn operator_norm(&self) -> f64 {
        hermitian_eig(self)
            .values
            .iter()
            .map(|l| l.abs())
            .fold(0.0, f64::max)
    }
}

/// Positive-semidefinite unit-trace Hermitian operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HermitianOperator", into = "HermitianOperator")]
pub struct DensityMatrix(HermitianOperator);

impl From<DensityMatrix> for HermitianOperator {
    fn from(d: DensityMatrix) -> Self {
        d.0
    }
}

impl TryFrom<HermitianOperator> for DensityMatrix {
    type Error = Error;

    fn try_from(h: HermitianOperator) -> Result<Self> {
        DensityMatrix::new(h)
    }
}

impl DensityMatrix {
    pub fn new(h: HermitianOperator) -> Result<Self> {
        let trace = h.matrix().trace().re;
        if (trace - 1.0).abs() > CONSTRUCTION_TOL {
            return Err(Error::NotDensity(format!("trace {trace} is not 1")));
        }
        let min_eig = hermitian_eig(&h)
            .values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -CONSTRUCTION_TOL {
            return Err(Error::NotDensity(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityMatrix(h))
    }

    /// `|psi><psi| / <psi|psi>` for a nonzero state vector.
    pub fn from_pure(state: &[Complex64]) -> Result<Self> {
        let norm_sq: f64 = state.iter().map(|z| z.norm_sqr()).sum();
        if norm_sq <= 0.0 || !norm_sq.is_finite() {
            return Err(Error::Domain("pure state must be nonzero".into()));
        }
        let dim = state.len();
        let mut m = ComplexMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.set(i, j, state[i] * state[j].conj() / norm_sq);
            }
        }
        DensityMatrix::new(HermitianOperator::new(m)?)
    }

    /// Maximally mixed state `1/dim`.
    pub fn maximally_mixed(dim: usize) -> Self {
        let m = ComplexMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0));
        DensityMatrix(HermitianOperator(m))
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.0
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.0.matrix()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Which tensor factor `partial_trace` keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// Partial trace over one factor of a `dim_a * dim_b` system (raw version,
/// no density-matrix validation).
pub fn partial_trace_raw(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    keep: Keep,
) -> Result<ComplexMatrix> {
    if dim_a * dim_b != m.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot factor dim {} as {}x{}",
            m.dim(),
            dim_a,
            dim_b
        )));
    }
    match keep {
        Keep::A => {
            let mut out = ComplexMatrix::zeros(dim_a);
            for i in 0..dim_a {
                for j in 0..dim_a {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..dim_b {
                        acc += m.get(i * dim_b + k, j * dim_b + k);
                    }
                    out.set(i, j, acc);
                }
            }
            Ok(out)
        }
        Keep::B => {
            let mut out = ComplexMatrix::zeros(dim_b);
            for i in 0..dim_b {
                for j in 0..dim_b {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..dim_a {
                        acc += m.get(k * dim_b + i, k * dim_b + j);
                    }
                    out.set(i, j, acc);
                }
            }
            Ok(out)
        }
    }
}

/// Partial trace of a bipartite state; preserves trace and positivity.
pub fn partial_trace(
    rho: &DensityMatrix,
    dim_a: usize,
    dim_b: usize,
    keep: Keep,
) -> Result<DensityMatrix> {
    let reduced = partial_trace_raw(rho.matrix(), dim_a, dim_b, keep)?;
    DensityMatrix::new(HermitianOperator::new(reduced)?)
}

/// `{A, B} = AB + BA`; Hermitian whenever both arguments are.
pub fn anticommutator(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    let ab = a.matrix().mul(b.matrix())?;
    let ba = b.matrix().mul(a.matrix())?;
    HermitianOperator::new(ab.add(&ba)?)
}

/// `[A, B] = AB - BA`; anti-Hermitian whenever both arguments are Hermitian.
pub fn commutator(a: &HermitianOperator, b: &HermitianOperator) -> Result<ComplexMatrix> {
    let ab = a.matrix().mul(b.matrix())?;
    let ba = b.matrix().mul(a.matrix())?;
    ab.sub(&ba)
}

/// Eigendecomposition of a Hermitian operator.
///
/// `values` are sorted descending; `vectors` holds the matching orthonormal
/// eigenvectors as columns, each with its first significant component made
/// real and positive so repeated runs produce identical output.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// `V diag(f(lambda)) V^dag`.
    pub fn apply_spectrum(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.values.len();
        let mut out = ComplexMatrix::zeros(n);
        for (col, &lambda) in self.values.iter().enumerate() {
            let fl = f(lambda);
            if fl == 0.0 {
                continue;
            }
            for i in 0..n {
                let vi = self.vectors.get(i, col);
                for j in 0..n {
                    let v = out.get(i, j) + vi * self.vectors.get(j, col).conj() * fl;
                    out.set(i, j, v);
                }
            }
        }
        HermitianOperator::new(out).expect("spectral reconstruction is Hermitian")
    }

    pub fn reconstruct(&self) -> HermitianOperator {
        self.apply_spectrum(|l| l)
    }
}

const JACOBI_SWEEP_CAP: usize = 100;

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// Each rotation exactly diagonalizes one 2x2 principal block: the complex
/// off-diagonal entry is first rotated onto the real axis by a phase, then a
/// standard symmetric Givens rotation zeroes it. Dimensions here are tiny, so
/// a handful of sweeps reaches machine precision deterministically.
pub fn hermitian_eig(m: &HermitianOperator) -> EigenDecomposition {
    let n = m.dim();
    let mut a = m.matrix().clone();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(1.0);
    let target = 1e-15 * scale;

    let mut converged = false;
    for _ in 0..JACOBI_SWEEP_CAP {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        // Cyclic Jacobi converges quadratically; reaching the cap means the
        // input was corrupted (NaN) rather than slow.
        panic!("Jacobi eigensolver failed to converge in {JACOBI_SWEEP_CAP} sweeps");
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j)
            .re
            .partial_cmp(&a.get(i, i).re)
            .expect("eigenvalues are finite")
    });

    let mut values = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        values.push(a.get(src, src).re);
        // Phase-normalize: first significant component real positive.
        let mut phase = Complex64::new(1.0, 0.0);
        for i in 0..n {
            let z = v.get(i, src);
            if z.norm() > 1e-8 {
                phase = z.conj() / z.norm();
                break;
            }
        }
        for i in 0..n {
            vectors.set(i, col, v.get(i, src) * phase);
        }
    }
    EigenDecomposition { values, vectors }
}

fn off_diagonal_norm(a: &ComplexMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a.get(i, j).norm_sqr();
            }
        }
    }
    acc.sqrt()
}

fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    let r = apq.norm();
    if r <= 1e-300 {
        return;
    }
    let phase = apq / r; // e^{i phi}
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    let n = a.dim();
    // Columns: (col_p, col_q) <- (c*col_p - s*conj(phase)*col_q,
    //                             s*col_p + c*conj(phase)*col_q)
    let spc = phase.conj() * s;
    let cpc = phase.conj() * c;
    for i in 0..n {
        let aip = a.get(i, p);
        let aiq = a.get(i, q);
        a.set(i, p, aip * c - aiq * spc);
        a.set(i, q, aip * s + aiq * cpc);
        let vip = v.get(i, p);
        let viq = v.get(i, q);
        v.set(i, p, vip * c - viq * spc);
        v.set(i, q, vip * s + viq * cpc);
    }
    // Rows: (row_p, row_q) <- (c*row_p - s*phase*row_q,
    //                          s*row_p + c*phase*row_q)
    let sp = phase * s;
    let cp = phase * c;
    for j in 0..n {
        let apj = a.get(p, j);
        let aqj = a.get(q, j);
        a.set(p, j, apj * c - aqj * sp);
        a.set(q, j, apj * s + aqj * cp);
    }
    // Round the rotated pivot pair back to exact Hermitian form.
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
    a.set(p, p, Complex64::new(a.get(p, p).re, 0.0));
    a.set(q, q, Complex64::new(a.get(q, q).re, 0.0));
}

/// Operator modulus `|M| = V diag(|lambda|) V^dag`; positive semidefinite and
/// commuting with `M`.
pub fn operator_abs(m: &HermitianOperator) -> HermitianOperator {
    hermitian_eig(m).apply_spectrum(f64::abs)
}
