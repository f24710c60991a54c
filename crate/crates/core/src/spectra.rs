//! Spectral densities sampled on a uniform frequency grid, and conversions
//! between moving-average specifications, covariance sequences and densities.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{self, CMatrix};

/// Uniform grid `ω_m = −π + 2πm/N`, `m = 0..N−1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FrequencyGrid {
    size: usize,
}

impl FrequencyGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size < 8 || !size.is_power_of_two() {
            return Err(Error::Argument(format!(
                "grid size must be a power of two ≥ 8, got {size}"
            )));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn node(&self, m: usize) -> f64 {
        numeric::grid_node(self.size, m)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.size).map(|m| self.node(m))
    }

    /// Quadrature weight `2π/N`.
    pub fn step(&self) -> f64 {
        2.0 * PI / self.size as f64
    }

    /// Largest index magnitude that is alias-free on this grid.
    pub fn max_index(&self) -> i64 {
        (self.size / 2) as i64 - 1
    }
}

/// Finite causal moving average `X_t = Σ_{j=0}^{q} b(j) ξ_{t−j}` with `d × r` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MaSpec {
    dimension: usize,
    rank: usize,
    coefficients: Vec<CMatrix>,
}

impl MaSpec {
    pub fn new(coefficients: Vec<CMatrix>) -> Result<Self> {
        let first = coefficients
            .first()
            .ok_or_else(|| Error::Argument("moving average needs at least b(0)".into()))?;
        let (dimension, rank) = first.shape();
        if rank > dimension {
            return Err(Error::Dimension(format!(
                "rank {rank} exceeds dimension {dimension}"
            )));
        }
        if let Some(j) = coefficients.iter().position(|b| b.shape() != (dimension, rank)) {
            return Err(Error::Dimension(format!(
                "b({j}) is {:?}, expected {dimension}×{rank}",
                coefficients[j].shape()
            )));
        }
        if coefficients.iter().any(|b| !numeric::is_finite(b)) {
            return Err(Error::NonFinite("moving-average coefficients".into()));
        }
        if first.iter().all(|z| z.norm() == 0.0) {
            return Err(Error::Argument("b(0) must be nonzero".into()));
        }
        Ok(Self {
            dimension,
            rank,
            coefficients,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[CMatrix] {
        &self.coefficients
    }

    /// Transfer function `φ(ω) = Σ_j b(j) e^{−ijω}`.
    pub fn transfer(&self, omega: f64) -> CMatrix {
        self.coefficients
            .iter()
            .enumerate()
            .fold(CMatrix::zeros(self.dimension, self.rank), |acc, (j, b)| {
                acc + b * Complex64::from_polar(1.0, -(j as f64) * omega)
            })
    }

    /// Closed-form lag covariance `C(h) = Σ_j b(j+h) b(j)*`, any sign of `h`.
    pub fn covariance(&self, h: i64) -> CMatrix {
        if h < 0 {
            return self.covariance(-h).adjoint();
        }
        let h = h as usize;
        let mut acc = CMatrix::zeros(self.dimension, self.dimension);
        for j in 0..self.coefficients.len() {
            if let Some(later) = self.coefficients.get(j + h) {
                acc += later * self.coefficients[j].adjoint();
            }
        }
        acc
    }
}

/// Lag covariances `C(0..=H)`; negative lags follow from `C(−h) = C(h)*`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSequence {
    dimension: usize,
    lags: Vec<CMatrix>,
}

impl CovarianceSequence {
    pub fn new(lags: Vec<CMatrix>) -> Result<Self> {
        let c0 = lags
            .first()
            .ok_or_else(|| Error::Argument("covariance sequence needs C(0)".into()))?;
        if !c0.is_square() {
            return Err(Error::Dimension("C(0) must be square".into()));
        }
        let dimension = c0.nrows();
        if let Some(h) = lags.iter().position(|c| c.shape() != (dimension, dimension)) {
            return Err(Error::Dimension(format!("C({h}) has the wrong shape")));
        }
        if lags.iter().any(|c| !numeric::is_finite(c)) {
            return Err(Error::NonFinite("covariance lags".into()));
        }
        let norm = numeric::spectral_norm(c0);
        let asym = numeric::spectral_norm(&(c0 - c0.adjoint()));
        if asym > 1e-12 * (1.0 + norm) {
            return Err(Error::Symmetry {
                deviation: asym,
                tolerance: 1e-12 * (1.0 + norm),
            });
        }
        let eig = numeric::eig_hermitian(c0, true)?;
        let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
        if min < -1e-10 * norm.max(f64::MIN_POSITIVE) {
            return Err(Error::Definiteness {
                node: 0,
                min_eigenvalue: min,
                tolerance: 1e-10 * norm,
            });
        }
        Ok(Self { dimension, lags })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_lag(&self) -> usize {
        self.lags.len() - 1
    }

    /// Stored non-negative lags `C(0), …, C(H)`.
    pub fn lags(&self) -> &[CMatrix] {
        &self.lags
    }

    /// `C(h)` for `|h| ≤ H`, zero beyond.
    pub fn get(&self, h: i64) -> CMatrix {
        match self.lags.get(h.unsigned_abs() as usize) {
            Some(c) if h >= 0 => c.clone(),
            Some(c) => c.adjoint(),
            None => CMatrix::zeros(self.dimension, self.dimension),
        }
    }
}

/// Hermitian PSD matrices `f(ω_m)` on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensityField {
    grid: FrequencyGrid,
    dimension: usize,
    values: Vec<CMatrix>,
}

impl SpectralDensityField {
    /// Validates shape, Hermitian symmetry (1e-10 relative) and definiteness
    /// (smallest eigenvalue ≥ −1e-10·‖f(ω_m)‖) at every node.
    pub fn new(grid: FrequencyGrid, values: Vec<CMatrix>) -> Result<Self> {
        let field = Self::from_hermitian(grid, values)?;
        for (node, f) in field.values.iter().enumerate() {
            let norm = numeric::spectral_norm(f);
            let asym = numeric::spectral_norm(&(f - f.adjoint()));
            if asym > numeric::HERMITIAN_TOL * (1.0 + norm) {
                return Err(Error::Symmetry {
                    deviation: asym,
                    tolerance: numeric::HERMITIAN_TOL * (1.0 + norm),
                });
            }
            let min = numeric::eig_hermitian(f, true)?
                .eigenvalues
                .last()
                .copied()
                .unwrap_or(0.0);
            if min < -1e-10 * norm {
                return Err(Error::Definiteness {
                    node,
                    min_eigenvalue: min,
                    tolerance: 1e-10 * norm,
                });
            }
        }
        Ok(field)
    }

    /// Shape checks only; callers guarantee Hermitian PSD values.
    pub(crate) fn from_hermitian(grid: FrequencyGrid, values: Vec<CMatrix>) -> Result<Self> {
        if values.len() != grid.size() {
            return Err(Error::Dimension(format!(
                "{} density samples for a grid of {}",
                values.len(),
                grid.size()
            )));
        }
        let dimension = values[0].nrows();
        if values.iter().any(|f| f.shape() != (dimension, dimension)) || dimension == 0 {
            return Err(Error::Dimension("density samples must be square with equal shape".into()));
        }
        if values.iter().any(|f| !numeric::is_finite(f)) {
            return Err(Error::NonFinite("density samples".into()));
        }
        Ok(Self {
            grid,
            dimension,
            values,
        })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn values(&self) -> &[CMatrix] {
        &self.values
    }

    pub fn at(&self, m: usize) -> &CMatrix {
        &self.values[m]
    }

    /// `(2π/N) Σ_m tr f(ω_m)`, which equals `tr C(0)`.
    pub fn total_power(&self) -> f64 {
        self.grid.step() * self.values.iter().map(|f| f.trace().re).sum::<f64>()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            dimension: self.dimension,
            values: self.values.iter().map(|f| f * Complex64::new(c, 0.0)).collect(),
        }
    }
}

/// `f(ω) = (1/2π) φ(ω) φ(ω)*` for the moving-average transfer function.
pub fn density_from_ma(spec: &MaSpec, grid: FrequencyGrid) -> Result<SpectralDensityField> {
    if spec.order() as i64 > grid.max_index() {
        return Err(Error::Range {
            index: spec.order() as i64,
            limit: (grid.size() / 2) as i64,
            grid_size: grid.size(),
        });
    }
    let scale = Complex64::new(1.0 / (2.0 * PI), 0.0);
    let values = grid
        .nodes()
        .map(|omega| {
            let phi = spec.transfer(omega);
            // (AA* + (AA*)*)/2 keeps the sample exactly Hermitian
            numeric::hermitian_part(&(&phi * phi.adjoint())) * scale
        })
        .collect();
    SpectralDensityField::from_hermitian(grid, values)
}

/// `C(h) = (2π/N) Σ_m e^{ihω_m} f(ω_m)` for `h = 0..=max_lag`.
pub fn covariance_from_density(
    f: &SpectralDensityField,
    max_lag: usize,
) -> Result<CovarianceSequence> {
    let grid = f.grid();
    if max_lag as i64 > grid.max_index() {
        return Err(Error::Range {
            index: max_lag as i64,
            limit: (grid.size() / 2) as i64,
            grid_size: grid.size(),
        });
    }
    // matrix_dft_coefficients returns (1/N)Σ e^{ihω} f; scale by 2π
    let mut lags = numeric::matrix_dft_coefficients(f.values(), 0..=max_lag as i64)?;
    let two_pi = Complex64::new(2.0 * PI, 0.0);
    for c in lags.iter_mut() {
        *c *= two_pi;
    }
    lags[0] = numeric::hermitian_part(&lags[0]);
    Ok(CovarianceSequence {
        dimension: f.dimension(),
        lags,
    })
}

/// Outcome of the optional projection onto the PSD cone.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PsdRepair {
    /// Smallest eigenvalue seen across the grid before repair.
    pub min_eigenvalue: f64,
    pub adjusted_nodes: usize,
    /// `(2π/N) Σ_m Σ_{λ<0} |λ|`, the spectral mass removed by clipping.
    pub adjustment_mass: f64,
}

/// Truncated inversion `f(ω) ≈ (1/2π) Σ_{|h|≤H} C(h) e^{−ihω}`.
///
/// Without `psd_fix`, a node whose smallest eigenvalue falls below
/// `−1e-6·sup_m‖f(ω_m)‖` is a [`Error::Definiteness`] error. With it, negative
/// eigenvalues are clipped to zero and the removed mass is reported.
pub fn density_from_covariance(
    cov: &CovarianceSequence,
    grid: FrequencyGrid,
    psd_fix: bool,
) -> Result<(SpectralDensityField, PsdRepair)> {
    let h_max = cov.max_lag() as i64;
    if h_max > grid.max_index() {
        return Err(Error::Range {
            index: h_max,
            limit: (grid.size() / 2) as i64,
            grid_size: grid.size(),
        });
    }
    let d = cov.dimension();
    let scale = Complex64::new(1.0 / (2.0 * PI), 0.0);
    let mut values = Vec::with_capacity(grid.size());
    let mut coeffs = vec![Complex64::new(0.0, 0.0); (2 * h_max + 1) as usize];
    let mut raw = vec![CMatrix::zeros(d, d); grid.size()];
    for i in 0..d {
        for j in 0..d {
            for (slot, h) in coeffs.iter_mut().zip(-h_max..=h_max) {
                *slot = cov.get(h)[(i, j)];
            }
            let series = numeric::FourierCoefficients::new(-h_max, coeffs.clone());
            let samples = numeric::dft_synthesize(&series, grid.size())?;
            for (f, s) in raw.iter_mut().zip(samples) {
                f[(i, j)] = s * scale;
            }
        }
    }
    let sup = raw
        .iter()
        .map(numeric::spectral_norm)
        .fold(0.0, f64::max);
    let mut repair = PsdRepair {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    for (node, f) in raw.into_iter().enumerate() {
        let f = numeric::hermitian_part(&f);
        let eig = numeric::eig_hermitian(&f, true)?;
        let min = eig.eigenvalues.last().copied().unwrap_or(0.0);
        repair.min_eigenvalue = repair.min_eigenvalue.min(min);
        if min < 0.0 && psd_fix {
            let negative: f64 = eig.eigenvalues.iter().filter(|&&l| l < 0.0).map(|l| -l).sum();
            repair.adjusted_nodes += 1;
            repair.adjustment_mass += grid.step() * negative;
            let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
            let rebuilt = &eig.eigenvectors * numeric::real_diagonal(&clipped) * eig.eigenvectors.adjoint();
            values.push(numeric::hermitian_part(&rebuilt));
        } else {
            if min < -1e-6 * sup {
                return Err(Error::Definiteness {
                    node,
                    min_eigenvalue: min,
                    tolerance: 1e-6 * sup,
                });
            }
            values.push(f);
        }
    }
    Ok((SpectralDensityField::from_hermitian(grid, values)?, repair))
}

/// `max_m ‖f(ω_m)‖` in spectral norm.
pub fn sup_norm_bound(f: &SpectralDensityField) -> f64 {
    f.values()
        .iter()
        .map(numeric::spectral_norm)
        .fold(0.0, f64::max)
}
