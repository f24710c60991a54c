//! Pointwise spectral decomposition `f(ω) = Ũ(ω) Λ_r(ω) Ũ*(ω)` across the
//! grid, a.e. rank detection, eigenvector phase alignment and the numerical
//! Hardy-space check on the aligned eigenvector field.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{self, CMatrix};
use crate::spectra::{FrequencyGrid, SpectralDensityField};

/// Default fraction of nodes that must agree on the rank.
pub const DEFAULT_AGREEMENT: f64 = 0.99;

/// Adjacent-node overlap below which a continuity warning is recorded.
pub const CONTINUITY_WARNING: f64 = 0.1;

/// Default lower bound on `∫ log λ_r dω`.
pub const DEFAULT_LOG_FLOOR: f64 = -1e6;

/// Eigenvalues at or below this are treated as zero by the log check.
pub const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Per-node leading eigenvalues and eigenvectors of a density field.
///
/// Eigenvalues are sorted non-increasing at every node until the field is
/// passed through [`align_phases`]; after that they follow their tracked
/// eigenvector columns, which may cross.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenField {
    grid: FrequencyGrid,
    dimension: usize,
    rank: usize,
    lambdas: Vec<Vec<f64>>,
    vectors: Vec<CMatrix>,
    deficient_nodes: Vec<usize>,
    aligned: bool,
}

impl EigenField {
    /// Builds a field from explicit eigenpairs, validating `Ũ*Ũ = I_r` within 1e-10 at every node.
    pub fn new(grid: FrequencyGrid, lambdas: Vec<Vec<f64>>, vectors: Vec<CMatrix>) -> Result<Self> {
        if lambdas.len() != grid.size() || vectors.len() != grid.size() {
            return Err(Error::Dimension("eigen field length must match the grid".into()));
        }
        let (dimension, rank) = vectors[0].shape();
        if rank == 0 || rank > dimension {
            return Err(Error::Dimension(format!("invalid eigenvector shape {dimension}×{rank}")));
        }
        for (m, (l, u)) in lambdas.iter().zip(&vectors).enumerate() {
            if l.len() != rank || u.shape() != (dimension, rank) {
                return Err(Error::Dimension(format!("node {m} has inconsistent shape")));
            }
            let gram = u.adjoint() * u;
            if numeric::spectral_norm(&(gram - CMatrix::identity(rank, rank))) > 1e-10 {
                return Err(Error::Argument(format!("columns at node {m} are not orthonormal")));
            }
        }
        let deficient_nodes = lambdas
            .iter()
            .enumerate()
            .filter(|(_, l)| l.iter().any(|&v| v <= 0.0))
            .map(|(m, _)| m)
            .collect();
        Ok(Self {
            grid,
            dimension,
            rank,
            lambdas,
            vectors,
            deficient_nodes,
            aligned: false,
        })
    }

    pub fn grid(&self) -> FrequencyGrid {
        self.grid
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn lambdas(&self) -> &[Vec<f64>] {
        &self.lambdas
    }

    pub fn vectors(&self) -> &[CMatrix] {
        &self.vectors
    }

    /// Nodes where fewer than `rank` eigenvalues cleared the rank threshold.
    pub fn deficient_nodes(&self) -> &[usize] {
        &self.deficient_nodes
    }

    pub fn is_aligned(&self) -> bool {
        self.aligned
    }

    /// Grid samples of eigenvalue column `j`.
    pub fn lambda_column(&self, j: usize) -> Vec<f64> {
        self.lambdas.iter().map(|l| l[j]).collect()
    }

    /// `Ũ(ω_m) Λ(ω_m) Ũ*(ω_m)`.
    pub fn reconstruct(&self, m: usize) -> CMatrix {
        let u = &self.vectors[m];
        u * numeric::real_diagonal(&self.lambdas[m]) * u.adjoint()
    }

    /// Zeroth Fourier coefficient `(1/2π)∫ Ũ(ω) dω`, discretized as the grid mean.
    pub fn mean_vectors(&self) -> CMatrix {
        let sum = self
            .vectors
            .iter()
            .fold(CMatrix::zeros(self.dimension, self.rank), |acc, u| acc + u);
        sum / Complex64::new(self.grid.size() as f64, 0.0)
    }

    /// Multiplies column `j` at every node by the constant unit scalar `phases[j]`.
    pub fn with_constant_phases(&self, phases: &[Complex64]) -> Self {
        let mut out = self.clone();
        for u in out.vectors.iter_mut() {
            for (j, p) in phases.iter().enumerate() {
                let mut col = u.column_mut(j);
                col *= *p;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankReport {
    pub rank: usize,
    /// Node count per observed numerical rank.
    pub histogram: BTreeMap<usize, usize>,
    /// Nodes whose numerical rank differs from `rank`.
    pub disagreeing_nodes: Vec<usize>,
    pub agreement: f64,
    pub threshold: f64,
    pub almost_everywhere: bool,
}

/// Modal count of eigenvalues above `rank_tol · max_{m,j} λ_j(ω_m)`.
///
/// Ties between modes resolve to the larger rank. The rank is declared a.e.
/// constant when at least `agreement` of the nodes share the mode.
pub fn detect_rank(f: &SpectralDensityField, rank_tol: f64, agreement: f64) -> Result<RankReport> {
    if !(rank_tol > 0.0) {
        return Err(Error::Argument(format!("rank_tol must be positive, got {rank_tol}")));
    }
    let spectra: Vec<Vec<f64>> = f
        .values()
        .iter()
        .map(|v| numeric::eig_hermitian(v, true).map(|e| e.eigenvalues))
        .collect::<Result<_>>()?;
    Ok(rank_from_spectra(&spectra, rank_tol, agreement))
}

fn rank_from_spectra(spectra: &[Vec<f64>], rank_tol: f64, agreement: f64) -> RankReport {
    let global_max = spectra
        .iter()
        .flat_map(|l| l.iter().cloned())
        .fold(0.0, f64::max);
    let counts: Vec<usize> = spectra
        .iter()
        .map(|l| {
            if global_max <= 0.0 {
                0
            } else {
                l.iter().filter(|&&v| v > rank_tol * global_max).count()
            }
        })
        .collect();
    let mut histogram = BTreeMap::new();
    for &c in &counts {
        *histogram.entry(c).or_insert(0usize) += 1;
    }
    let (&rank, &hits) = histogram
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .expect("non-empty grid");
    let disagreeing_nodes = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != rank)
        .map(|(m, _)| m)
        .collect();
    let fraction = hits as f64 / counts.len() as f64;
    RankReport {
        rank,
        histogram,
        disagreeing_nodes,
        agreement: fraction,
        threshold: agreement,
        almost_everywhere: fraction >= agreement,
    }
}

/// Keeps the `rank` largest eigenpairs at every node without any rank test.
pub fn decompose_with_rank(f: &SpectralDensityField, rank: usize, rank_tol: f64) -> Result<EigenField> {
    let d = f.dimension();
    if rank == 0 || rank > d {
        return Err(Error::Dimension(format!("cannot keep {rank} eigenpairs of a {d}×{d} density")));
    }
    let eigs: Vec<numeric::HermitianEig> = f
        .values()
        .iter()
        .map(|v| numeric::eig_hermitian(v, true))
        .collect::<Result<_>>()?;
    let global_max = eigs
        .iter()
        .map(|e| e.eigenvalues[0])
        .fold(0.0, f64::max);
    let mut lambdas = Vec::with_capacity(eigs.len());
    let mut vectors = Vec::with_capacity(eigs.len());
    let mut deficient_nodes = Vec::new();
    for (m, e) in eigs.into_iter().enumerate() {
        if e.eigenvalues[rank - 1] <= rank_tol * global_max {
            deficient_nodes.push(m);
        }
        lambdas.push(e.eigenvalues[..rank].to_vec());
        vectors.push(e.eigenvectors.columns(0, rank).into_owned());
    }
    Ok(EigenField {
        grid: f.grid(),
        dimension: d,
        rank,
        lambdas,
        vectors,
        deficient_nodes,
        aligned: false,
    })
}

/// Rank detection followed by [`decompose_with_rank`].
///
/// Fails with [`Error::RankInstability`] when the rank is not a.e. constant
/// (fewer than `agreement` of the nodes share the modal rank) or the modal
/// rank is zero.
pub fn pointwise_eig(f: &SpectralDensityField, rank_tol: f64, agreement: f64) -> Result<EigenField> {
    let report = detect_rank(f, rank_tol, agreement)?;
    if !report.almost_everywhere || report.rank == 0 {
        return Err(Error::RankInstability {
            histogram: report.histogram,
        });
    }
    decompose_with_rank(f, report.rank, rank_tol)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuityWarning {
    pub node: usize,
    pub column: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AlignmentReport {
    /// Nodes where the column matching changed relative to the previous node (eigenvalue crossings).
    pub crossings: Vec<usize>,
    /// Nodes where tied eigenvalues forced the identity matching.
    pub degenerate_nodes: usize,
    pub warnings: Vec<ContinuityWarning>,
}

fn has_degenerate_pair(lambdas: &[f64]) -> bool {
    let scale = lambdas.iter().map(|v| v.abs()).fold(0.0, f64::max);
    lambdas
        .windows(2)
        .any(|w| (w[0] - w[1]).abs() <= numeric::DEGENERACY_TOL * scale)
}

/// Greedy maximum-overlap assignment: `perm[i]` is the current column matched to previous column `i`.
fn greedy_match(overlaps: &[Vec<f64>]) -> Vec<usize> {
    let r = overlaps.len();
    let mut perm = vec![usize::MAX; r];
    let mut taken = vec![false; r];
    for _ in 0..r {
        let mut best = (usize::MAX, usize::MAX, -1.0);
        for (i, row) in overlaps.iter().enumerate() {
            if perm[i] != usize::MAX {
                continue;
            }
            for (j, &o) in row.iter().enumerate() {
                if !taken[j] && o > best.2 {
                    best = (i, j, o);
                }
            }
        }
        perm[best.0] = best.1;
        taken[best.1] = true;
    }
    perm
}

/// Sequential phase and ordering alignment of the eigenvector columns.
///
/// Node 0 is normalized column by column so the largest-magnitude component is
/// real positive. Each later node is matched to its predecessor by greedy
/// maximum `|⟨u_prev, u_cur⟩|`, then every column is rotated so that inner
/// product is real positive. The sweep runs in increasing node order, so the
/// result depends on that order. The span of every column is unchanged.
pub fn align_phases(field: &EigenField) -> (EigenField, AlignmentReport) {
    let mut out = field.clone();
    let mut report = AlignmentReport::default();
    let r = field.rank;

    for j in 0..r {
        let mut col: Vec<Complex64> = out.vectors[0].column(j).iter().cloned().collect();
        numeric::normalize_column_phase(&mut col);
        out.vectors[0].set_column(j, &numeric::CVector::from_vec(col));
    }

    let mut last_perm: Vec<usize> = (0..r).collect();
    for m in 1..field.grid.size() {
        let prev = out.vectors[m - 1].clone();
        let cur = &field.vectors[m];
        let perm = if has_degenerate_pair(&field.lambdas[m]) {
            report.degenerate_nodes += 1;
            (0..r).collect()
        } else {
            let overlaps: Vec<Vec<f64>> = (0..r)
                .map(|i| (0..r).map(|j| prev.column(i).dotc(&cur.column(j)).norm()).collect())
                .collect();
            greedy_match(&overlaps)
        };
        if perm != last_perm {
            report.crossings.push(m);
        }
        last_perm = perm.clone();
        let mut aligned = CMatrix::zeros(field.dimension, r);
        let mut lambdas = vec![0.0; r];
        for (i, &p) in perm.iter().enumerate() {
            let mut col = cur.column(p).into_owned();
            let overlap = prev.column(i).dotc(&col);
            let size = overlap.norm();
            if size < CONTINUITY_WARNING {
                report.warnings.push(ContinuityWarning {
                    node: m,
                    column: i,
                    overlap: size,
                });
            }
            let already_real = overlap.re > 0.0 && overlap.im.abs() <= 1e-13 * size;
            if size > 0.0 && !already_real {
                col *= overlap.conj() / size;
            }
            aligned.set_column(i, &col);
            lambdas[i] = field.lambdas[m][p];
        }
        out.vectors[m] = aligned;
        out.lambdas[m] = lambdas;
    }
    out.aligned = true;
    (out, report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalityReport {
    /// `ψ_U(j)` for `j = −(N/2−1) ..= N/2−1`.
    #[serde(skip)]
    pub coefficients: Vec<CMatrix>,
    pub first_index: i64,
    pub negative_energy_ratio: f64,
    pub column_ratios: Vec<f64>,
    /// Largest column jump `‖u_j(ω_0) − u_j(ω_{N−1})‖` across the wrap point.
    pub wraparound_gap: f64,
    /// Largest column jump between interior neighbours.
    pub max_step: f64,
    pub causal_tol: f64,
    pub field_aligned: bool,
    pub passed: bool,
}

impl CausalityReport {
    pub fn coefficient(&self, j: i64) -> Option<&CMatrix> {
        let i = j - self.first_index;
        if i < 0 {
            None
        } else {
            self.coefficients.get(i as usize)
        }
    }
}

/// Absolute slack for the wraparound comparison on numerically constant fields.
const WRAP_FLOOR: f64 = 1e-12;

/// One-sidedness of the eigenvector field's Fourier coefficients.
///
/// Passes when the negative-index energy ratio is at most `causal_tol` and the
/// wraparound jump is at most ten times the largest interior step.
pub fn hinfty_check(field: &EigenField, causal_tol: f64) -> Result<CausalityReport> {
    let n = field.grid.size();
    let k = field.grid.max_index();
    let coefficients = numeric::matrix_dft_coefficients(&field.vectors, -k..=k)?;
    let (d, r) = (field.dimension, field.rank);

    let mut neg = vec![0.0; r];
    let mut total = vec![0.0; r];
    for (idx, c) in coefficients.iter().enumerate() {
        let j = idx as i64 - k;
        for col in 0..r {
            let e: f64 = (0..d).map(|row| c[(row, col)].norm_sqr()).sum();
            total[col] += e;
            if j < 0 {
                neg[col] += e;
            }
        }
    }
    let ratio = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let negative_energy_ratio = ratio(neg.iter().sum(), total.iter().sum());
    let column_ratios = neg.iter().zip(&total).map(|(&a, &b)| ratio(a, b)).collect();

    let column_jump = |a: &CMatrix, b: &CMatrix| {
        (0..r)
            .map(|col| (a.column(col) - b.column(col)).norm())
            .fold(0.0, f64::max)
    };
    let wraparound_gap = column_jump(&field.vectors[0], &field.vectors[n - 1]);
    let max_step = (1..n)
        .map(|m| column_jump(&field.vectors[m], &field.vectors[m - 1]))
        .fold(0.0, f64::max);

    let passed = negative_energy_ratio <= causal_tol && wraparound_gap <= 10.0 * max_step + WRAP_FLOOR;
    Ok(CausalityReport {
        coefficients,
        first_index: -k,
        negative_energy_ratio,
        column_ratios,
        wraparound_gap,
        max_step,
        causal_tol,
        field_aligned: field.aligned,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogIntegrabilityReport {
    /// `(2π/N) Σ_m log λ_r(ω_m)`; `None` when some `λ_r` is at or below the underflow floor.
    pub quadrature: Option<f64>,
    pub min_lambda: f64,
    pub min_node: usize,
    pub floor: f64,
    pub passed: bool,
}

/// Quadrature of `log λ_r`, where `λ_r` is the smallest retained eigenvalue at each node.
pub fn log_integrability_check(field: &EigenField, floor: f64) -> LogIntegrabilityReport {
    let smallest: Vec<f64> = field
        .lambdas
        .iter()
        .map(|l| l.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    let (min_node, min_lambda) = smallest
        .iter()
        .cloned()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty grid");
    let quadrature = (min_lambda > UNDERFLOW_FLOOR)
        .then(|| field.grid.step() * smallest.iter().map(|v| v.ln()).sum::<f64>());
    let passed = matches!(quadrature, Some(q) if q >= floor);
    LogIntegrabilityReport {
        quadrature,
        min_lambda,
        min_node,
        floor,
        passed,
    }
}
