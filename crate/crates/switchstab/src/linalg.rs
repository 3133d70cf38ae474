//! Dense small-matrix linear algebra: eigenvalues, matrix exponentials and
//! the spectral predicates (Hurwitz / normal / commuting) the rest of the
//! crate is built on.
//!
//! Matrices here are small (2x2 up to a few dozen rows), so everything is
//! dense and allocation cost is irrelevant; what matters is exactness on the
//! structured families used by the switching constructions. `mat_exp` has
//! closed-form routes for those (trace-shifted nilpotent matrices, general
//! 2x2, block-diagonal splits) and falls back to scaling-and-squaring for
//! everything else.

use nalgebra::{Complex, DMatrix, DVector, Schur, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for spectral sign decisions (Hurwitz classification).
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;

/// Default tolerance for structural predicates (normality, commutation).
pub const DEFAULT_PREDICATE_TOL: f64 = 1e-12;

/// Hard ceiling on `||A||_F * t` accepted by `mat_exp` and by dense
/// propagation. Far below the f64 overflow threshold (exp overflows near
/// 709) so that norms of products of a few factors stay representable.
pub const EXP_HORIZON_LIMIT: f64 = 300.0;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix must have at least one row")]
    Empty,
    #[error("row {row} has {len} entries, expected {dim}")]
    RaggedRow { row: usize, len: usize, dim: usize },
    #[error("matrix entry ({i},{j}) is not finite: {value}")]
    NonFinite { i: usize, j: usize, value: f64 },
    #[error("dimension mismatch: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("eigenvalue iteration did not converge within {iterations} iterations (dim {dim})")]
    EigenNoConvergence { dim: usize, iterations: usize },
    #[error(
        "||A||*t = {norm_t:.3e} exceeds the dense-exponential horizon {limit}; \
         propagate in polar coordinates instead"
    )]
    ExpOverflow { norm_t: f64, limit: f64 },
    #[error("time must be finite and nonnegative, got {0}")]
    BadTime(f64),
    #[error("weights must be nonnegative and sum to 1 within 1e-12: {reason}")]
    BadWeights { reason: String },
    #[error("expected {expected} matrices, got {got}")]
    BadCount { expected: usize, got: usize },
}

/// Dense real square matrix, row-major semantics, entries validated finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    inner: DMatrix<f64>,
}

/// JSON wire form: `{"dim": d, "rows": [[...], ...]}`.
#[derive(Serialize, Deserialize)]
struct MatrixJson {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for SquareMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        MatrixJson {
            dim: self.dim(),
            rows: self.rows(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SquareMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(de)?;
        if raw.rows.len() != raw.dim {
            return Err(serde::de::Error::custom(format!(
                "matrix declares dim {} but has {} rows",
                raw.dim,
                raw.rows.len()
            )));
        }
        SquareMatrix::from_rows(&raw.rows).map_err(serde::de::Error::custom)
    }
}

impl SquareMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(LinalgError::RaggedRow {
                    row: i,
                    len: row.len(),
                    dim,
                });
            }
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        Self::from_dmatrix(m)
    }

    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        if m.nrows() == 0 {
            return Err(LinalgError::Empty);
        }
        debug_assert_eq!(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if !m[(i, j)].is_finite() {
                    return Err(LinalgError::NonFinite {
                        i,
                        j,
                        value: m[(i, j)],
                    });
                }
            }
        }
        Ok(Self { inner: m })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self, LinalgError> {
        let d = entries.len();
        if d == 0 {
            return Err(LinalgError::Empty);
        }
        let m = DMatrix::from_fn(d, d, |i, j| if i == j { entries[i] } else { 0.0 });
        Self::from_dmatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.inner[(i, j)]).collect())
            .collect()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn determinant(&self) -> f64 {
        self.inner.determinant()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.dim() != other.dim() {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(Self {
            inner: &self.inner * &other.inner,
        })
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(v.len(), self.dim());
        &self.inner * v
    }
}

/// Classification of a matrix by the sign of its spectral abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stability {
    /// All eigenvalues have real part below `-tol`.
    Hurwitz,
    /// Spectral abscissa within `[-tol, +tol]`; too close to call.
    Marginal,
    /// Some eigenvalue has real part above `+tol`.
    Unstable,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stability::Hurwitz => write!(f, "Hurwitz"),
            Stability::Marginal => write!(f, "Marginal"),
            Stability::Unstable => write!(f, "Unstable"),
        }
    }
}

/// Full eigenvalue list of a real matrix plus its spectral abscissa.
#[derive(Debug, Clone)]
pub struct Spectrum {
    eigenvalues: Vec<Complex<f64>>,
    spectral_abscissa: f64,
}

impl Spectrum {
    fn new(mut eigenvalues: Vec<Complex<f64>>) -> Self {
        // Deterministic order: by real part, then imaginary part.
        eigenvalues.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap()
                .then(a.im.partial_cmp(&b.im).unwrap())
        });
        let spectral_abscissa = eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max);
        Self {
            eigenvalues,
            spectral_abscissa,
        }
    }

    pub fn eigenvalues(&self) -> &[Complex<f64>] {
        &self.eigenvalues
    }

    pub fn spectral_abscissa(&self) -> f64 {
        self.spectral_abscissa
    }
}

/// Eigenvalues of a 2x2 matrix by the quadratic formula, arranged to avoid
/// cancellation when picking the second root.
fn eigenvalues_2x2(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mu = 0.5 * (a + d);
    let det = a * d - b * c;
    let disc = 0.25 * (a - d) * (a - d) + b * c;
    if disc >= 0.0 {
        let s = disc.sqrt();
        let l1 = if mu >= 0.0 { mu + s } else { mu - s };
        let l2 = if l1 != 0.0 { det / l1 } else { 2.0 * mu - l1 };
        vec![Complex::new(l1, 0.0), Complex::new(l2, 0.0)]
    } else {
        let w = (-disc).sqrt();
        vec![Complex::new(mu, w), Complex::new(mu, -w)]
    }
}

/// All eigenvalues of `a`, with multiplicity.
///
/// Dimension 2 uses the closed-form quadratic; larger matrices go through a
/// Schur iteration capped at `100 * dim` sweeps.
pub fn eigenvalues(a: &SquareMatrix) -> Result<Spectrum, LinalgError> {
    let d = a.dim();
    let eig = match d {
        1 => vec![Complex::new(a.entry(0, 0), 0.0)],
        2 => eigenvalues_2x2(a.as_dmatrix()),
        _ => {
            let iterations = 100 * d;
            let schur = Schur::try_new(a.inner.clone(), f64::EPSILON, iterations)
                .ok_or(LinalgError::EigenNoConvergence { dim: d, iterations })?;
            schur.complex_eigenvalues().iter().copied().collect()
        }
    };
    Ok(Spectrum::new(eig))
}

/// Hurwitz / Marginal / Unstable by the sign of the spectral abscissa
/// relative to `tol`.
pub fn is_hurwitz(a: &SquareMatrix, tol: f64) -> Result<Stability, LinalgError> {
    let abscissa = eigenvalues(a)?.spectral_abscissa();
    Ok(if abscissa < -tol {
        Stability::Hurwitz
    } else if abscissa > tol {
        Stability::Unstable
    } else {
        Stability::Marginal
    })
}

/// True iff `||A A^T - A^T A||_F <= tol * (1 + ||A||_F^2)`.
pub fn is_normal(a: &SquareMatrix, tol: f64) -> bool {
    let m = &a.inner;
    let mt = m.transpose();
    let comm = m * &mt - &mt * m;
    let f = m.norm();
    comm.norm() <= tol * (1.0 + f * f)
}

/// True iff `||AB - BA||_F <= tol * (1 + ||A||_F ||B||_F)`.
pub fn commute(a: &SquareMatrix, b: &SquareMatrix, tol: f64) -> Result<bool, LinalgError> {
    if a.dim() != b.dim() {
        return Err(LinalgError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let comm = &a.inner * &b.inner - &b.inner * &a.inner;
    Ok(comm.norm() <= tol * (1.0 + a.inner.norm() * b.inner.norm()))
}

/// cosh(sqrt(z)) continued through z < 0 as cos(sqrt(-z)).
fn cosh_like(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z / 2.0 + z * z / 24.0 + z * z * z / 720.0
    } else if z > 0.0 {
        z.sqrt().cosh()
    } else {
        (-z).sqrt().cos()
    }
}

/// sinh(sqrt(z))/sqrt(z) continued through z < 0 as sin(sqrt(-z))/sqrt(-z).
fn sinhc_like(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z / 6.0 + z * z / 120.0 + z * z * z / 5040.0
    } else if z > 0.0 {
        let s = z.sqrt();
        s.sinh() / s
    } else {
        let s = (-z).sqrt();
        s.sin() / s
    }
}

/// exp(A t) for 2x2 A in closed form: shift by the mean eigenvalue, then
/// the traceless remainder B satisfies B^2 = -det(B) I, so the series
/// collapses to cosh/sinh (or cos/sin) of sqrt(-det B) t.
fn exp_2x2(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let mu = 0.5 * (a + d);
    let p = 0.5 * (a - d);
    let q = p * p + b * c; // -det(B) for B = A - mu I
    let z = q * t * t;
    let scale = (mu * t).exp();
    let ch = cosh_like(z);
    let sh = t * sinhc_like(z);
    DMatrix::from_row_slice(
        2,
        2,
        &[
            scale * (ch + sh * p),
            scale * (sh * b),
            scale * (sh * c),
            scale * (ch - sh * p),
        ],
    )
}

/// Connected components of the nonzero pattern (symmetrized). Only exact
/// zeros count as absent couplings, so the split is error-free.
fn diagonal_blocks(m: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let d = m.nrows();
    let mut comp = vec![usize::MAX; d];
    let mut n_comp = 0;
    for start in 0..d {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut queue = vec![start];
        comp[start] = n_comp;
        while let Some(i) = queue.pop() {
            for j in 0..d {
                if comp[j] == usize::MAX && (m[(i, j)] != 0.0 || m[(j, i)] != 0.0) {
                    comp[j] = n_comp;
                    queue.push(j);
                }
            }
        }
        n_comp += 1;
    }
    let mut blocks = vec![Vec::new(); n_comp];
    for (i, &c) in comp.iter().enumerate() {
        blocks[c].push(i);
    }
    blocks
}

fn exp_route(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let d = m.nrows();
    if d == 1 {
        return DMatrix::from_element(1, 1, (m[(0, 0)] * t).exp());
    }
    if d == 2 {
        return exp_2x2(m, t);
    }
    // Trace-shifted nilpotent family: A = mu I + B with B^2 exactly zero.
    let mu = m.trace() / d as f64;
    let shifted = m - DMatrix::<f64>::identity(d, d) * mu;
    let sq = &shifted * &shifted;
    if sq.iter().all(|&x| x == 0.0) {
        let scale = (mu * t).exp();
        return (DMatrix::<f64>::identity(d, d) + shifted * t) * scale;
    }
    // Exact block-diagonal structure: exponentiate each block separately.
    let blocks = diagonal_blocks(m);
    if blocks.len() > 1 {
        let mut out = DMatrix::<f64>::zeros(d, d);
        for idx in &blocks {
            let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
            let esub = exp_route(&sub, t);
            for (bi, &gi) in idx.iter().enumerate() {
                for (bj, &gj) in idx.iter().enumerate() {
                    out[(gi, gj)] = esub[(bi, bj)];
                }
            }
        }
        return out;
    }
    (m * t).exp()
}

/// exp(A t) for `t >= 0`, relative error below 1e-12 in spectral norm over
/// the supported horizon. Rejects `||A||_F * t` beyond [`EXP_HORIZON_LIMIT`].
pub fn mat_exp(a: &SquareMatrix, t: f64) -> Result<SquareMatrix, LinalgError> {
    if !t.is_finite() || t < 0.0 {
        return Err(LinalgError::BadTime(t));
    }
    let norm_t = a.inner.norm() * t;
    if norm_t > EXP_HORIZON_LIMIT {
        return Err(LinalgError::ExpOverflow {
            norm_t,
            limit: EXP_HORIZON_LIMIT,
        });
    }
    Ok(SquareMatrix {
        inner: exp_route(&a.inner, t),
    })
}

/// Largest singular value (spectral norm).
pub fn operator_norm(a: &SquareMatrix) -> f64 {
    let d = a.dim();
    if d == 1 {
        return a.entry(0, 0).abs();
    }
    match SVD::try_new(a.inner.clone(), false, false, f64::EPSILON, 200 * d) {
        Some(svd) => svd
            .singular_values
            .iter()
            .copied()
            .fold(0.0f64, f64::max),
        // SVD of a finite dense matrix essentially always converges; fall
        // back to power iteration on A^T A just in case.
        None => {
            let gram = a.inner.transpose() * &a.inner;
            let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
            let mut lambda = 0.0;
            for _ in 0..1000 {
                let w = &gram * &v;
                let n = w.norm();
                if n == 0.0 {
                    return 0.0;
                }
                lambda = n;
                v = w / n;
            }
            lambda.sqrt()
        }
    }
}

/// Entrywise weighted sum of matrices with a probability vector.
pub fn average_matrix(
    matrices: &[SquareMatrix],
    weights: &[f64],
) -> Result<SquareMatrix, LinalgError> {
    if matrices.is_empty() {
        return Err(LinalgError::Empty);
    }
    if matrices.len() != weights.len() {
        return Err(LinalgError::BadCount {
            expected: matrices.len(),
            got: weights.len(),
        });
    }
    let dim = matrices[0].dim();
    for m in matrices {
        if m.dim() != dim {
            return Err(LinalgError::DimensionMismatch {
                left: dim,
                right: m.dim(),
            });
        }
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(LinalgError::BadWeights {
            reason: format!("negative or non-finite weight {w}"),
        });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(LinalgError::BadWeights {
            reason: format!("weights sum to {sum}"),
        });
    }
    let mut acc = DMatrix::<f64>::zeros(dim, dim);
    for (m, &w) in matrices.iter().zip(weights) {
        acc += &m.inner * w;
    }
    Ok(SquareMatrix { inner: acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat(rows: &[&[f64]]) -> SquareMatrix {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn eigenvalues_of_diagonal() {
        let s = eigenvalues(&mat(&[&[-1.0, 0.0], &[0.0, -2.0]])).unwrap();
        let e = s.eigenvalues();
        assert_eq!(e[0], Complex::new(-2.0, 0.0));
        assert_eq!(e[1], Complex::new(-1.0, 0.0));
        assert_eq!(s.spectral_abscissa(), -1.0);
    }

    #[test]
    fn eigenvalues_of_jordan_like_pair() {
        // alpha = 1, c = 5: double eigenvalue -1 exactly.
        let s = eigenvalues(&mat(&[&[-1.0, 5.0], &[0.0, -1.0]])).unwrap();
        assert_eq!(s.eigenvalues(), &[Complex::new(-1.0, 0.0); 2]);
    }

    #[test]
    fn eigenvalues_of_rotation_plus_decay() {
        // Average of the one-transition pair at alpha = 1, c = 2.
        let s = eigenvalues(&mat(&[&[-1.0, 1.0], &[-1.0, -1.0]])).unwrap();
        let e = s.eigenvalues();
        assert_abs_diff_eq!(e[0].re, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[0].im, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e[1].im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn eigenvalues_conjugate_closed_larger_dim() {
        // Block diagonal 4x4 with two rotation blocks goes through Schur.
        let s = eigenvalues(&mat(&[
            &[-1.0, 2.0, 0.0, 0.0],
            &[-2.0, -1.0, 0.0, 0.0],
            &[0.0, 0.0, -3.0, 1.0],
            &[0.0, 0.0, -1.0, -3.0],
        ]))
        .unwrap();
        let mut eig = s.eigenvalues().to_vec();
        for z in &mut eig {
            z.im = -z.im;
        }
        for z in eig {
            assert!(
                s.eigenvalues()
                    .iter()
                    .any(|w| (w - z).norm() < 1e-8),
                "conjugate of {z} missing"
            );
        }
    }

    #[test]
    fn hurwitz_classification() {
        let a0 = mat(&[&[1.0, 4.0], &[0.0, -2.0]]);
        assert_eq!(is_hurwitz(&a0, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Unstable);
        let avg = mat(&[&[-0.5, 2.0], &[0.0, -0.5]]);
        assert_eq!(is_hurwitz(&avg, DEFAULT_SPECTRAL_TOL).unwrap(), Stability::Hurwitz);
        assert_eq!(
            is_hurwitz(&SquareMatrix::zeros(3), DEFAULT_SPECTRAL_TOL).unwrap(),
            Stability::Marginal
        );
    }

    #[test]
    fn normality_predicate() {
        assert!(is_normal(&mat(&[&[2.0, 1.0], &[1.0, -3.0]]), 1e-12));
        assert!(is_normal(&mat(&[&[0.0, 1.0], &[-1.0, 0.0]]), 1e-12));
        // Commutator of the shear family is diag(c^2, -c^2): decisively not normal.
        assert!(!is_normal(&mat(&[&[-1.0, 5.0], &[0.0, -1.0]]), 1e-8));
    }

    #[test]
    fn commutation_predicate() {
        let d1 = mat(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let d2 = mat(&[&[-3.0, 0.0], &[0.0, 5.0]]);
        assert!(commute(&d1, &d2, 1e-12).unwrap());

        let a = mat(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let a2 = a.mul(&a).unwrap();
        assert!(commute(&a, &a2, 1e-12).unwrap());

        // One-transition pair with c != 0: hand-computed commutator
        // A0 A1 - A1 A0 = [[-c^2, -2 alpha c... ]] is nonzero; just check
        // against the direct definition.
        let alpha = 1.0;
        let c = 2.0;
        let p0 = mat(&[&[-alpha, c], &[0.0, -alpha]]);
        let p1 = mat(&[&[-alpha, 0.0], &[-c, -alpha]]);
        let lhs = p0.mul(&p1).unwrap();
        let rhs = p1.mul(&p0).unwrap();
        let mut frob = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let d = lhs.entry(i, j) - rhs.entry(i, j);
                frob += d * d;
            }
        }
        assert!(frob.sqrt() > 1.0, "commutator should be order c^2");
        assert!(!commute(&p0, &p1, 1e-8).unwrap());

        assert!(matches!(
            commute(&d1, &SquareMatrix::zeros(3), 1e-12),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&SquareMatrix::zeros(3), 1.7).unwrap();
        assert_eq!(e, SquareMatrix::identity(3));
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat_exp(&SquareMatrix::diagonal(&[0.3, -1.2]).unwrap(), 2.0).unwrap();
        assert_abs_diff_eq!(e.entry(0, 0), (0.6f64).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(e.entry(1, 1), (-2.4f64).exp(), epsilon = 1e-14);
        assert_eq!(e.entry(0, 1), 0.0);
    }

    #[test]
    fn exp_of_shear_family_is_exact() {
        // exp([[-a, c],[0,-a]] t) = e^{-a t} [[1, c t],[0, 1]].
        let (a, c, t) = (0.7, 5.0, 1.3);
        let e = mat_exp(&mat(&[&[-a, c], &[0.0, -a]]), t).unwrap();
        let s = (-a * t).exp();
        assert_abs_diff_eq!(e.entry(0, 0), s, epsilon = 1e-15);
        assert_abs_diff_eq!(e.entry(0, 1), s * c * t, epsilon = 1e-15);
        assert_eq!(e.entry(1, 0), 0.0);
        assert_abs_diff_eq!(e.entry(1, 1), s, epsilon = 1e-15);
    }

    #[test]
    fn exp_matches_series_on_generic_2x2() {
        let a = mat(&[&[0.3, -1.1], &[0.9, 0.4]]);
        let t = 0.01;
        // Taylor to fourth order is plenty at this step size.
        let m = a.as_dmatrix() * t;
        let mut series = DMatrix::<f64>::identity(2, 2);
        let mut term = DMatrix::<f64>::identity(2, 2);
        for k in 1..=8 {
            term = &term * &m / k as f64;
            series += &term;
        }
        let e = mat_exp(&a, t).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(e.entry(i, j), series[(i, j)], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn exp_block_diagonal_splits() {
        // 4x4 block diagonal of two shear blocks with different scales:
        // each block must be exact, off-blocks exactly zero.
        let m = mat(&[
            &[-1.0, 3.0, 0.0, 0.0],
            &[0.0, -1.0, 0.0, 0.0],
            &[0.0, 0.0, -0.25, 0.75],
            &[0.0, 0.0, 0.0, -0.25],
        ]);
        let t = 2.0;
        let e = mat_exp(&m, t).unwrap();
        let s1 = (-1.0f64 * t).exp();
        let s2 = (-0.25f64 * t).exp();
        assert_abs_diff_eq!(e.entry(0, 1), s1 * 3.0 * t, epsilon = 1e-15);
        assert_abs_diff_eq!(e.entry(2, 3), s2 * 0.75 * t, epsilon = 1e-15);
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3), (2, 0), (3, 1)] {
            assert_eq!(e.entry(i, j), 0.0);
        }
    }

    #[test]
    fn exp_semigroup_property() {
        let a = mat(&[&[0.2, 1.5, -0.3], &[0.0, -0.7, 0.8], &[0.4, 0.0, -1.1]]);
        let (s, t) = (0.9, 1.4);
        let whole = mat_exp(&a, s + t).unwrap();
        let parts = mat_exp(&a, s).unwrap().mul(&mat_exp(&a, t).unwrap()).unwrap();
        let denom = operator_norm(&whole);
        let mut diff = whole.as_dmatrix().clone();
        diff -= parts.as_dmatrix();
        assert!(diff.norm() / denom < 1e-10);
    }

    #[test]
    fn exp_determinant_identity() {
        let a = mat(&[&[0.2, 1.5, -0.3], &[0.1, -0.7, 0.8], &[0.4, -0.2, -1.1]]);
        let t = 1.7;
        let det = mat_exp(&a, t).unwrap().determinant();
        let expected = (a.trace() * t).exp();
        assert!((det - expected).abs() / expected.abs() < 1e-8);
    }

    #[test]
    fn exp_normal_decay_bound() {
        // Normal Hurwitz: ||exp(A t)|| <= e^{-gamma t}.
        let a = mat(&[&[-1.0, 2.0], &[-2.0, -1.0]]);
        let gamma = -eigenvalues(&a).unwrap().spectral_abscissa();
        for k in 0..=20 {
            let t = k as f64;
            let n = operator_norm(&mat_exp(&a, t).unwrap());
            assert!(n <= (-gamma * t).exp() * (1.0 + 1e-8), "t={t}: {n}");
        }
    }

    #[test]
    fn exp_rejects_overflow_horizon() {
        let a = mat(&[&[50.0, 0.0], &[0.0, 50.0]]);
        match mat_exp(&a, 100.0) {
            Err(LinalgError::ExpOverflow { .. }) => {}
            other => panic!("expected overflow guard, got {other:?}"),
        }
    }

    #[test]
    fn exp_rejects_negative_time() {
        assert!(matches!(
            mat_exp(&SquareMatrix::identity(2), -1.0),
            Err(LinalgError::BadTime(_))
        ));
    }

    #[test]
    fn operator_norm_examples() {
        assert_abs_diff_eq!(operator_norm(&SquareMatrix::identity(4)), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            operator_norm(&SquareMatrix::diagonal(&[3.0, -5.0]).unwrap()),
            5.0,
            epsilon = 1e-12
        );
        // Rank-1: singular values are {4, 0}.
        assert_abs_diff_eq!(
            operator_norm(&mat(&[&[0.0, 4.0], &[0.0, 0.0]])),
            4.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn average_matrix_examples() {
        let a0 = mat(&[&[1.0, 4.0], &[0.0, -2.0]]);
        let a1 = mat(&[&[-2.0, 0.0], &[0.0, 1.0]]);
        let trivial = average_matrix(&[a0.clone(), a1.clone()], &[1.0, 0.0]).unwrap();
        assert_eq!(trivial, a0);

        let avg = average_matrix(&[a0, a1], &[0.5, 0.5]).unwrap();
        assert_eq!(avg, mat(&[&[-0.5, 2.0], &[0.0, -0.5]]));

        let p0 = mat(&[&[-1.0, 2.0], &[0.0, -1.0]]);
        let p1 = mat(&[&[-1.0, 0.0], &[-2.0, -1.0]]);
        let pavg = average_matrix(&[p0.clone(), p1], &[0.5, 0.5]).unwrap();
        assert_eq!(pavg, mat(&[&[-1.0, 1.0], &[-1.0, -1.0]]));

        assert!(matches!(
            average_matrix(&[p0.clone()], &[0.9]),
            Err(LinalgError::BadWeights { .. })
        ));
        assert!(matches!(
            average_matrix(&[p0.clone()], &[-1.0]),
            Err(LinalgError::BadWeights { .. })
        ));
        assert!(matches!(
            average_matrix(&[p0, SquareMatrix::zeros(3)], &[0.5, 0.5]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = mat(&[&[-1.0, 2.5], &[0.0, -1.0]]);
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"dim\":2"));
        let back: SquareMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);

        let bad: Result<SquareMatrix, _> =
            serde_json::from_str("{\"dim\":2,\"rows\":[[1.0,2.0]]}");
        assert!(bad.is_err());
    }
}
