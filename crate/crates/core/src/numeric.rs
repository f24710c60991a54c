//! Dense complex linear algebra and Fourier kernels.
//!
//! Matrices are `nalgebra` dense matrices over `Complex64`. Frequency-domain
//! functions are sampled on the uniform grid `ω_m = −π + 2πm/N`, and Fourier
//! expansions use the convention `g(ω) = Σ_k c(k) e^{−ikω}` with analysis
//! kernel `c(k) = (1/2π)∫ g(ω) e^{ikω} dω`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Default tolerance for Hermitian symmetry checks, relative to `1 + ‖m‖`.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Relative gap below which eigenvalues are treated as tied.
pub const DEGENERACY_TOL: f64 = 1e-12;

const EIG_MAX_ITER: usize = 10_000;

/// Convergence threshold for the iterative decompositions. nalgebra's SVD can
/// stop on a wrong answer when this is exactly machine epsilon.
const ITER_EPS: f64 = 5.0 * f64::EPSILON;

pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Builds a matrix from row-major entries, rejecting empty shapes and non-finite values.
pub fn matrix_from_rows(rows: usize, cols: usize, entries: &[Complex64]) -> Result<CMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("empty matrix shape {rows}×{cols}")));
    }
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} entries for a {rows}×{cols} matrix",
            entries.len()
        )));
    }
    if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("matrix entries".into()));
    }
    Ok(CMatrix::from_row_slice(rows, cols, entries))
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn real_diagonal(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c64(v, 0.0)),
    ))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `(m + m*)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Sorted non-increasing.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal columns, aligned with `eigenvalues`.
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> CMatrix {
        &self.eigenvectors * real_diagonal(&self.eigenvalues) * self.eigenvectors.adjoint()
    }
}

/// Index of the first component whose modulus is maximal up to a relative `1e-12`.
fn dominant_index(v: &[Complex64]) -> usize {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    v.iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .unwrap_or(0)
}

/// Rotates `v` so that its dominant component is real and positive.
pub fn normalize_column_phase(v: &mut [Complex64]) {
    let pivot = v[dominant_index(v)];
    let r = pivot.norm();
    if r == 0.0 {
        return;
    }
    if pivot.im == 0.0 && pivot.re > 0.0 {
        return;
    }
    let phase = pivot.conj() / r;
    for z in v.iter_mut() {
        *z *= phase;
    }
    let i = dominant_index(v);
    v[i].im = 0.0;
}

/// Lexicographic order on phase-normalized vectors: larger real part first, then larger imaginary part.
fn lexicographic(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues come out sorted non-increasing. Every eigenvector is rotated so
/// its largest-magnitude component is real positive, and tied eigenvalues
/// (relative gap below [`DEGENERACY_TOL`]) are ordered lexicographically by
/// their normalized eigenvectors.
pub fn eig_hermitian(m: &CMatrix, symmetrize: bool) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !is_finite(m) {
        return Err(Error::NonFinite("eigendecomposition input".into()));
    }
    let input = if symmetrize {
        hermitian_part(m)
    } else {
        let deviation = spectral_norm(&(m - m.adjoint()));
        let tolerance = HERMITIAN_TOL * (1.0 + spectral_norm(m));
        if deviation > tolerance {
            return Err(Error::Symmetry {
                deviation,
                tolerance,
            });
        }
        hermitian_part(m)
    };
    let n = input.nrows();
    let eig = SymmetricEigen::try_new(input, ITER_EPS, EIG_MAX_ITER)
        .ok_or(Error::Convergence("Hermitian eigendecomposition"))?;

    let mut pairs: Vec<(f64, Vec<Complex64>)> = (0..n)
        .map(|j| {
            let mut v: Vec<Complex64> = eig.eigenvectors.column(j).iter().cloned().collect();
            normalize_column_phase(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let scale = pairs.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[start].0 - pairs[end].0 <= DEGENERACY_TOL * scale {
            end += 1;
        }
        pairs[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        start = end;
    }

    let eigenvalues = pairs.iter().map(|p| p.0).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| pairs[j].1[i]);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

#[derive(Debug, Clone)]
pub struct Svd {
    /// `rows × k` with orthonormal columns, `k = min(rows, cols)`.
    pub left: CMatrix,
    /// Sorted non-increasing, length `k`.
    pub singulars: Vec<f64>,
    /// `cols × k` with orthonormal columns.
    pub right: CMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> CMatrix {
        &self.left * real_diagonal(&self.singulars) * self.right.adjoint()
    }
}

/// Thin singular value decomposition `m = left · diag(s) · right*`.
pub fn svd(m: &CMatrix) -> Result<Svd> {
    if m.is_empty() {
        return Err(Error::Dimension("empty matrix".into()));
    }
    if !is_finite(m) {
        return Err(Error::NonFinite("svd input".into()));
    }
    let k = m.nrows().min(m.ncols());
    let raw = nalgebra::SVD::try_new(m.clone(), true, true, ITER_EPS, EIG_MAX_ITER)
        .ok_or(Error::Convergence("singular value decomposition"))?;
    let u = raw.u.expect("left vectors requested");
    let v = raw.v_t.expect("right vectors requested").adjoint();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| raw.singular_values[b].total_cmp(&raw.singular_values[a]));
    let left = CMatrix::from_fn(m.nrows(), k, |i, j| u[(i, order[j])]);
    let right = CMatrix::from_fn(m.ncols(), k, |i, j| v[(i, order[j])]);
    let singulars = order.iter().map(|&j| raw.singular_values[j].max(0.0)).collect();
    Ok(Svd {
        left,
        singulars,
        right,
    })
}

/// Moore–Penrose inverse; singular values at or below `rank_tol · s_max` are treated as zero.
pub fn moore_penrose_pinv(m: &CMatrix, rank_tol: f64) -> Result<CMatrix> {
    if !(rank_tol > 0.0) {
        return Err(Error::Argument(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let s = svd(m)?;
    let s_max = s.singulars.first().copied().unwrap_or(0.0);
    let inverted: Vec<f64> = s
        .singulars
        .iter()
        .map(|&x| {
            if s_max > 0.0 && x > rank_tol * s_max {
                1.0 / x
            } else {
                0.0
            }
        })
        .collect();
    Ok(&s.right * real_diagonal(&inverted) * s.left.adjoint())
}

/// Numerical rank: count of singular values above `rank_tol · s_max`.
pub fn numerical_rank(m: &CMatrix, rank_tol: f64) -> usize {
    let s = m.singular_values();
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    if s_max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rank_tol * s_max).count()
}

/// Node `m` of the `n`-point grid on `[−π, π)`.
pub fn grid_node(n: usize, m: usize) -> f64 {
    -PI + 2.0 * PI * m as f64 / n as f64
}

/// Fourier coefficients `c(k)` for a contiguous index window `first..first+len`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    pub first: i64,
    pub values: Vec<Complex64>,
}

impl FourierCoefficients {
    pub fn new(first: i64, values: Vec<Complex64>) -> Self {
        Self { first, values }
    }

    pub fn last(&self) -> i64 {
        self.first + self.values.len() as i64 - 1
    }

    pub fn get(&self, k: i64) -> Complex64 {
        let i = k - self.first;
        if i < 0 || i as usize >= self.values.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[i as usize]
        }
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.first..=self.last()
    }

    /// Σ_{k<0} |c(k)|² / Σ_k |c(k)|², zero for an all-zero window.
    pub fn negative_energy_ratio(&self) -> f64 {
        let (neg, total) = self.indices().zip(&self.values).fold(
            (0.0, 0.0),
            |(neg, total), (k, z)| {
                let e = z.norm_sqr();
                (if k < 0 { neg + e } else { neg }, total + e)
            },
        );
        if total == 0.0 {
            0.0
        } else {
            neg / total
        }
    }
}

fn alias_check(index: i64, n: usize) -> Result<()> {
    let limit = (n / 2) as i64;
    if index.abs() >= limit {
        return Err(Error::Range {
            index,
            limit,
            grid_size: n,
        });
    }
    Ok(())
}

fn sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `c(k) ≈ (1/N) Σ_m g(ω_m) e^{ikω_m}` for every `k` in `range`.
///
/// Exact for trigonometric polynomials of degree below `N/2`.
pub fn dft_coefficients(
    samples: &[Complex64],
    range: std::ops::RangeInclusive<i64>,
) -> Result<FourierCoefficients> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Argument(format!("grid of size {n} is too small")));
    }
    let (lo, hi) = (*range.start(), *range.end());
    if lo > hi {
        return Err(Error::Argument(format!("empty index range {lo}..={hi}")));
    }
    alias_check(lo, n)?;
    alias_check(hi, n)?;

    let mut buffer = samples.to_vec();
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buffer);
    let inv_n = 1.0 / n as f64;
    let values = (lo..=hi)
        .map(|k| buffer[k.rem_euclid(n as i64) as usize] * (sign(k) * inv_n))
        .collect();
    Ok(FourierCoefficients::new(lo, values))
}

/// Evaluates `g(ω_m) = Σ_k c(k) e^{−ikω_m}` on the `grid_size`-point grid.
pub fn dft_synthesize(coefficients: &FourierCoefficients, grid_size: usize) -> Result<Vec<Complex64>> {
    if grid_size < 2 {
        return Err(Error::Argument(format!("grid of size {grid_size} is too small")));
    }
    let mut buffer = vec![Complex64::new(0.0, 0.0); grid_size];
    for (k, &c) in coefficients.indices().zip(&coefficients.values) {
        alias_check(k, grid_size)?;
        buffer[k.rem_euclid(grid_size as i64) as usize] = c * sign(k);
    }
    FftPlanner::<f64>::new()
        .plan_fft_forward(grid_size)
        .process(&mut buffer);
    Ok(buffer)
}

/// `y_t = Σ_{k=0}^{L−1} h(k) x_{t−k}` for every `t` with a full window,
/// i.e. `t = L−1 ..= T−1` (0-based), computed by FFT convolution.
pub fn causal_filter(taps: &[CMatrix], x: &[CVector]) -> Result<Vec<CVector>> {
    let (rows, cols) = taps
        .first()
        .ok_or_else(|| Error::Dimension("filter without taps".into()))?
        .shape();
    if taps.iter().any(|h| h.shape() != (rows, cols)) || x.iter().any(|v| v.len() != cols) {
        return Err(Error::Dimension("filter taps and samples disagree in shape".into()));
    }
    let (len, t) = (taps.len(), x.len());
    if t < len {
        return Ok(Vec::new());
    }
    let n = (t + len - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let (fwd, inv) = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    let zero = Complex64::new(0.0, 0.0);
    let inputs: Vec<Vec<Complex64>> = (0..cols)
        .map(|j| {
            let mut buf = vec![zero; n];
            for (b, v) in buf.iter_mut().zip(x) {
                *b = v[j];
            }
            fwd.process(&mut buf);
            buf
        })
        .collect();
    let mut outputs = vec![vec![zero; n]; rows];
    let mut tap = vec![zero; n];
    for i in 0..rows {
        for (j, input) in inputs.iter().enumerate() {
            tap.iter_mut().for_each(|z| *z = zero);
            for (z, h) in tap.iter_mut().zip(taps) {
                *z = h[(i, j)];
            }
            fwd.process(&mut tap);
            for ((o, a), b) in outputs[i].iter_mut().zip(&tap).zip(input) {
                *o += a * b;
            }
        }
        inv.process(&mut outputs[i]);
    }
    let scale = 1.0 / n as f64;
    Ok((len - 1..t)
        .map(|s| CVector::from_fn(rows, |i, _| outputs[i][s] * scale))
        .collect())
}

/// Entrywise [`dft_coefficients`] of a matrix-valued grid function.
///
/// Returns the coefficient matrices for `range` in increasing index order.
pub fn matrix_dft_coefficients(
    values: &[CMatrix],
    range: std::ops::RangeInclusive<i64>,
) -> Result<Vec<CMatrix>> {
    let (rows, cols) = values
        .first()
        .map(|m| m.shape())
        .ok_or_else(|| Error::Argument("empty matrix field".into()))?;
    if values.iter().any(|m| m.shape() != (rows, cols)) {
        return Err(Error::Dimension("matrix field with mixed shapes".into()));
    }
    let count = (range.end() - range.start() + 1).max(0) as usize;
    let mut out = vec![CMatrix::zeros(rows, cols); count];
    let mut samples = vec![Complex64::new(0.0, 0.0); values.len()];
    for i in 0..rows {
        for j in 0..cols {
            for (s, m) in samples.iter_mut().zip(values) {
                *s = m[(i, j)];
            }
            let c = dft_coefficients(&samples, range.clone())?;
            for (slot, v) in out.iter_mut().zip(c.values) {
                slot[(i, j)] = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn cm(rows: usize, cols: usize, e: &[(f64, f64)]) -> CMatrix {
        let v: Vec<Complex64> = e.iter().map(|&(r, i)| c64(r, i)).collect();
        matrix_from_rows(rows, cols, &v).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matrix_from_rows(2, 2, &[c64(1.0, 0.0); 3]).is_err());
        assert!(matrix_from_rows(1, 1, &[c64(f64::NAN, 0.0)]).is_err());
        assert!(matrix_from_rows(0, 1, &[]).is_err());
    }

    #[test]
    fn eig_diagonal() {
        let m = cm(2, 2, &[(2.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        let e = eig_hermitian(&m, false).unwrap();
        assert_eq!(e.eigenvalues, vec![2.0, 1.0]);
        assert!((&e.eigenvectors - CMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn eig_identity_orders_basis() {
        let e = eig_hermitian(&CMatrix::identity(3, 3), false).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
        assert!((&e.eigenvectors - CMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn eig_two_by_two_hand_solved() {
        // characteristic polynomial (1−λ)² − |i|² = 0 → λ ∈ {2, 0}; (m − 2I)v = 0 → v ∝ (1, −i)
        let m = cm(2, 2, &[(1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 0.0)]);
        let e = eig_hermitian(&m, false).unwrap();
        assert!(close(e.eigenvalues[0], 2.0, 1e-14));
        assert!(close(e.eigenvalues[1], 0.0, 1e-14));
        let s = 1.0 / 2f64.sqrt();
        let v0 = e.eigenvectors.column(0);
        // normalized so the first (dominant, tied) component is real positive
        assert!((v0[0] - c64(s, 0.0)).norm() < 1e-14);
        assert!((v0[1] - c64(0.0, -s)).norm() < 1e-14);
    }

    #[test]
    fn eig_errors() {
        let rect = CMatrix::zeros(2, 3);
        assert!(matches!(eig_hermitian(&rect, false), Err(Error::Dimension(_))));
        let skew = cm(2, 2, &[(1.0, 0.0), (1.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(eig_hermitian(&skew, false), Err(Error::Symmetry { .. })));
        assert!(eig_hermitian(&skew, true).is_ok());
    }

    #[test]
    fn svd_examples() {
        let d = cm(2, 2, &[(3.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        assert_eq!(svd(&d).unwrap().singulars, vec![3.0, 0.0]);
        let z = CMatrix::zeros(2, 2);
        assert_eq!(svd(&z).unwrap().singulars, vec![0.0, 0.0]);
        let col = cm(2, 1, &[(1.0, 0.0), (1.0, 0.0)]);
        let s = svd(&col).unwrap();
        assert!(close(s.singulars[0], 2f64.sqrt(), 1e-15));
        assert!((s.reconstruct() - col).norm() < 1e-14);
    }

    #[test]
    fn causal_filter_matches_direct_sum() {
        let taps: Vec<CMatrix> = (0..4)
            .map(|k| CMatrix::from_fn(2, 3, |i, j| c64((i + k) as f64 * 0.3 - j as f64, (k * j) as f64 * 0.1 - 0.2)))
            .collect();
        let x: Vec<CVector> = (0..37)
            .map(|t| CVector::from_fn(3, |j, _| c64(((t * 7 + j * 3) % 11) as f64 - 5.0, (t as f64 * 0.37 + j as f64).sin())))
            .collect();
        let y = causal_filter(&taps, &x).unwrap();
        assert_eq!(y.len(), 34);
        for (s, ys) in y.iter().enumerate() {
            let t = s + 3;
            let direct = (0..4).fold(CVector::zeros(2), |acc, k| acc + &taps[k] * &x[t - k]);
            assert!((ys - direct).norm() < 1e-12);
        }
        assert!(causal_filter(&taps, &x[..3]).unwrap().is_empty());
        assert!(causal_filter(&taps, &x[..3].iter().map(|v| v.rows(0, 2).into_owned()).collect::<Vec<_>>()).is_err());
    }

    #[test]
    fn svd_reconstructs_hard_complex_case() {
        let entries = [
            c64(0.29067445797698677, -0.47541277822440525),
            c64(0.14844888063079864, -0.10423262838080907),
            c64(2.3529617693257534, -0.15901272606799424),
            c64(0.49259965699199315, -0.3629743692545513),
            c64(-0.2557627711517173, 0.08240536210174329),
            c64(-0.1171519988126349, -0.040640818679818023),
            c64(-0.344145996483293, 0.2591452801525878),
            c64(-1.0093096102800512, 0.34171165306883833),
            c64(0.1769810792373916, 0.0487124479506789),
        ];
        let m = CMatrix::from_column_slice(3, 3, &entries);
        let s = svd(&m).unwrap();
        assert!((s.reconstruct() - &m).norm() < 1e-13);
        let inv = m.clone().try_inverse().unwrap();
        assert!((moore_penrose_pinv(&m, 1e-12).unwrap() - inv).norm() < 1e-12);
    }

    #[test]
    fn pinv_examples() {
        let d = cm(2, 2, &[(2.0, 0.0), (0.0, 0.0), (0.0, 0.0), (4.0, 0.0)]);
        let p = moore_penrose_pinv(&d, 1e-12).unwrap();
        assert!((p - cm(2, 2, &[(0.5, 0.0), (0.0, 0.0), (0.0, 0.0), (0.25, 0.0)])).norm() < 1e-15);
        // normal equations: (vᵀv)⁻¹vᵀ = (1/2)(1, 1)
        let col = cm(2, 1, &[(1.0, 0.0), (1.0, 0.0)]);
        let p = moore_penrose_pinv(&col, 1e-12).unwrap();
        assert_eq!(p.shape(), (1, 2));
        assert!((p - cm(1, 2, &[(0.5, 0.0), (0.5, 0.0)])).norm() < 1e-15);
        let z = CMatrix::zeros(2, 3);
        let p = moore_penrose_pinv(&z, 1e-12).unwrap();
        assert_eq!(p, CMatrix::zeros(3, 2));
        assert!(moore_penrose_pinv(&z, 0.0).is_err());
    }

    fn direct_coefficient(samples: &[Complex64], k: i64) -> Complex64 {
        let n = samples.len();
        samples
            .iter()
            .enumerate()
            .map(|(m, g)| g * Complex64::from_polar(1.0, k as f64 * grid_node(n, m)))
            .sum::<Complex64>()
            / n as f64
    }

    #[test]
    fn dft_constant_and_single_mode() {
        let ones = vec![c64(1.0, 0.0); 16];
        let c = dft_coefficients(&ones, -7..=7).unwrap();
        for k in c.indices() {
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert!((c.get(k) - c64(expect, 0.0)).norm() < 1e-15);
        }
        let mode: Vec<Complex64> = (0..16)
            .map(|m| Complex64::from_polar(1.0, -grid_node(16, m)))
            .collect();
        let c = dft_coefficients(&mode, -7..=7).unwrap();
        for k in c.indices() {
            let expect = if k == 1 { 1.0 } else { 0.0 };
            assert!((c.get(k) - c64(expect, 0.0)).norm() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn dft_cosine_on_eight_points() {
        let g: Vec<Complex64> = (0..8).map(|m| c64(2.25 + grid_node(8, m).cos(), 0.0)).collect();
        let c = dft_coefficients(&g, -3..=3).unwrap();
        for k in -3..=3 {
            let oracle = direct_coefficient(&g, k);
            assert!((c.get(k) - oracle).norm() < 1e-14);
        }
        assert!((c.get(0) - c64(2.25, 0.0)).norm() < 1e-14);
        assert!((c.get(1) - c64(0.5, 0.0)).norm() < 1e-14);
        assert!((c.get(-1) - c64(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn dft_range_errors() {
        let g = vec![c64(1.0, 0.0); 8];
        assert!(matches!(dft_coefficients(&g, -4..=0), Err(Error::Range { .. })));
        assert!(matches!(
            dft_synthesize(&FourierCoefficients::new(4, vec![c64(1.0, 0.0)]), 8),
            Err(Error::Range { .. })
        ));
    }

    #[test]
    fn synthesize_examples() {
        let g = dft_synthesize(&FourierCoefficients::new(0, vec![c64(1.0, 0.0)]), 4).unwrap();
        assert!(g.iter().all(|z| (z - c64(1.0, 0.0)).norm() < 1e-15));
        let g = dft_synthesize(&FourierCoefficients::new(1, vec![c64(1.0, 0.0)]), 4).unwrap();
        for (m, z) in g.iter().enumerate() {
            assert!((z - Complex64::from_polar(1.0, -grid_node(4, m))).norm() < 1e-15);
        }
    }

    fn hermitian_strategy(d: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |e| {
            let a = CMatrix::from_fn(d, d, |i, j| c64(e[i * d + j].0, e[i * d + j].1));
            &a * a.adjoint()
        })
    }

    fn any_matrix() -> impl Strategy<Value = CMatrix> {
        (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), r * c)
                .prop_map(move |e| CMatrix::from_fn(r, c, |i, j| c64(e[i * c + j].0, e[i * c + j].1)))
        })
    }

    proptest! {
        #[test]
        fn eig_reconstructs_psd(m in (1usize..=8).prop_flat_map(hermitian_strategy)) {
            let e = eig_hermitian(&m, false).unwrap();
            let norm = spectral_norm(&m);
            prop_assert!(spectral_norm(&(e.reconstruct() - &m)) <= 1e-10 * (1.0 + norm));
            let d = m.nrows();
            let gram = e.eigenvectors.adjoint() * &e.eigenvectors;
            prop_assert!(spectral_norm(&(gram - CMatrix::identity(d, d))) <= 1e-12);
            prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            let again = eig_hermitian(&m, false).unwrap();
            prop_assert_eq!(again.eigenvalues, e.eigenvalues);
            prop_assert_eq!(again.eigenvectors, e.eigenvectors);
        }

        #[test]
        fn svd_matches_gram_eigenvalues(m in any_matrix()) {
            let s = svd(&m).unwrap();
            let norm = spectral_norm(&m);
            prop_assert!(spectral_norm(&(s.reconstruct() - &m)) <= 1e-10 * (1.0 + norm));
            let k = s.singulars.len();
            prop_assert!(spectral_norm(&(s.left.adjoint() * &s.left - CMatrix::identity(k, k))) <= 1e-12);
            prop_assert!(spectral_norm(&(s.right.adjoint() * &s.right - CMatrix::identity(k, k))) <= 1e-12);
            let gram = eig_hermitian(&(m.adjoint() * &m), true).unwrap();
            for (j, sv) in s.singulars.iter().enumerate() {
                prop_assert!((sv * sv - gram.eigenvalues[j]).abs() <= 1e-10 * (1.0 + norm * norm));
            }
        }

        #[test]
        fn penrose_identities(m in any_matrix()) {
            let p = moore_penrose_pinv(&m, 1e-12).unwrap();
            let tol = 1e-8 * (1.0 + spectral_norm(&m));
            let mp = &m * &p;
            let pm = &p * &m;
            prop_assert!(spectral_norm(&(&mp * &m - &m)) <= tol);
            prop_assert!(spectral_norm(&(&pm * &p - &p)) <= tol * (1.0 + spectral_norm(&p)));
            prop_assert!(spectral_norm(&(mp.adjoint() - &mp)) <= tol);
            prop_assert!(spectral_norm(&(pm.adjoint() - &pm)) <= tol);
        }

        #[test]
        fn dft_round_trip_and_parseval(
            coeffs in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 7)
        ) {
            let c = FourierCoefficients::new(-3, coeffs.iter().map(|&(a, b)| c64(a, b)).collect());
            let g = dft_synthesize(&c, 16).unwrap();
            let back = dft_coefficients(&g, -3..=3).unwrap();
            for k in -3..=3 {
                prop_assert!((back.get(k) - c.get(k)).norm() <= 1e-12);
            }
            let power: f64 = g.iter().map(|z| z.norm_sqr()).sum::<f64>() / 16.0;
            let energy: f64 = c.values.iter().map(|z| z.norm_sqr()).sum();
            prop_assert!((power - energy).abs() <= 1e-12);
            for k in -3..=3 {
                prop_assert!((direct_coefficient(&g, k) - back.get(k)).norm() <= 1e-12);
            }
        }
    }
}
