//! Sample paths of moving-average processes and end-to-end round trips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::GaugeTag;
use crate::numeric::{self, c64, CMatrix, CVector};
use crate::pipeline::{factorize, FactorizeReport, RunConfig};
use crate::spectra::{density_from_ma, FrequencyGrid, MaSpec};
use crate::wold::{max_abs, one_step_errors, recover_noise, WoldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Independent real and imaginary parts of variance 1/2 each.
    ComplexCircularGaussian,
    RealGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimulationConfig {
    pub length: usize,
    pub seed: u64,
    /// Leading samples discarded; `None` uses the MA order.
    pub burn_in: Option<usize>,
    pub noise_kind: NoiseKind,
}

impl SimulationConfig {
    pub fn new(length: usize, seed: u64) -> Self {
        Self {
            length,
            seed,
            burn_in: None,
            noise_kind: NoiseKind::ComplexCircularGaussian,
        }
    }

    fn burn_in_for(&self, order: usize) -> Result<usize> {
        if self.length == 0 {
            return Err(Error::Argument("path length must be at least 1".into()));
        }
        match self.burn_in {
            None => Ok(order),
            Some(b) if b >= order => Ok(b),
            Some(b) => Err(Error::Argument(format!("burn-in {b} is shorter than the MA order {order}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    dimension: usize,
    values: Vec<CVector>,
    noise: Option<Vec<CVector>>,
}

impl SamplePath {
    pub fn new(dimension: usize, values: Vec<CVector>) -> Result<Self> {
        if let Some(t) = values.iter().position(|v| v.len() != dimension) {
            return Err(Error::Dimension(format!("sample {} has length {}, expected {dimension}", t + 1, values[t].len())));
        }
        if let Some(t) = values.iter().position(|v| !v.iter().all(|z| z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite(format!("sample {}", t + 1)));
        }
        Ok(Self {
            dimension,
            values,
            noise: None,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `X_1..=X_T`, index 0 is `t = 1`.
    pub fn values(&self) -> &[CVector] {
        &self.values
    }

    /// The driving noise aligned with `values`, when known.
    pub fn noise(&self) -> Option<&[CVector]> {
        self.noise.as_deref()
    }
}

/// `len` independent `r`-vectors of unit-covariance noise from the configured seed.
pub fn draw_noise(config: &SimulationConfig, r: usize, len: usize) -> Vec<CVector> {
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let half = 0.5f64.sqrt();
    (0..len)
        .map(|_| {
            CVector::from_fn(r, |_, _| {
                let a: f64 = StandardNormal.sample(&mut rng);
                match config.noise_kind {
                    NoiseKind::RealGaussian => c64(a, 0.0),
                    NoiseKind::ComplexCircularGaussian => {
                        let b: f64 = StandardNormal.sample(&mut rng);
                        c64(half * a, half * b)
                    }
                }
            })
        })
        .collect()
}

/// `X_t = Σ_{j=0}^{q} b(j) ξ_{t−j}` for `t = 1..=T`, after discarding the burn-in.
pub fn ma_sample_path(spec: &MaSpec, config: &SimulationConfig) -> Result<SamplePath> {
    let burn = config.burn_in_for(spec.order())?;
    let q = spec.order();
    let noise = draw_noise(config, spec.rank(), burn + config.length);
    let values = (burn..noise.len())
        .map(|i| {
            let mut x = CVector::zeros(spec.dimension());
            for (j, b) in spec.coefficients().iter().enumerate().take(q + 1) {
                x.gemv(c64(1.0, 0.0), b, &noise[i - j], c64(1.0, 0.0));
            }
            x
        })
        .collect();
    Ok(SamplePath {
        dimension: spec.dimension(),
        values,
        noise: Some(noise[burn..].to_vec()),
    })
}

/// `(1/n) Σ_t a_t b_{t−lag}*` over all `t` where both samples exist.
pub fn sample_covariance(a: &[CVector], b: &[CVector], lag: usize) -> CMatrix {
    let n = a.len().min(b.len());
    let (p, q) = (a.first().map_or(0, |v| v.len()), b.first().map_or(0, |v| v.len()));
    let mut acc = CMatrix::zeros(p, q);
    if n <= lag {
        return acc;
    }
    for t in lag..n {
        acc.gerc(c64(1.0, 0.0), &a[t], &b[t - lag], c64(1.0, 0.0));
    }
    acc / c64((n - lag) as f64, 0.0)
}

/// `(1/n) Σ_t a_t a_tᵀ`, which vanishes in expectation for circular noise.
pub fn sample_pseudo_covariance(a: &[CVector]) -> CMatrix {
    let p = a.first().map_or(0, |v| v.len());
    let mut acc = CMatrix::zeros(p, p);
    for v in a {
        acc += v * v.transpose();
    }
    acc / c64(a.len().max(1) as f64, 0.0)
}

/// `Q` minimizing `Σ_j ‖b̂(j) Q − b(j)‖_F²` over (semi-)unitary `Q`.
pub fn procrustes(estimate: &[CMatrix], target: &[CMatrix]) -> Result<CMatrix> {
    let (r_hat, r) = (estimate[0].ncols(), target[0].ncols());
    let mut m = CMatrix::zeros(r_hat, r);
    for (e, t) in estimate.iter().zip(target) {
        m += e.adjoint() * t;
    }
    let s = numeric::svd(&m)?;
    Ok(&s.left * s.right.adjoint())
}

/// Haar-distributed unitary from the QR factorization of a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(rng: &mut R, d: usize) -> CMatrix {
    let g = CMatrix::from_fn(d, d, |_, _| {
        let (a, b): (f64, f64) = (StandardNormal.sample(rng), StandardNormal.sample(rng));
        c64(a, b)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..d {
        let p = r[(j, j)];
        let phase = if p.norm() > 0.0 { p / p.norm() } else { c64(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    q
}

/// `b(j) = U diag(c_1(j), …, c_d(j))` with a random constant unitary `U` and
/// channel polynomials `c_k(z) = g_k Π_i (1 − z/ρ_i)`, `|ρ_i| ∈ [1.5, 4]`.
///
/// The first channel has degree `q`, the others a random degree up to `q`.
pub fn random_mixture_spec(seed: u64, d: usize, q: usize) -> Result<MaSpec> {
    if d == 0 {
        return Err(Error::Argument("dimension must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let u = random_unitary(&mut rng, d);
    let mut channels = Vec::with_capacity(d);
    for k in 0..d {
        let degree = if k == 0 { q } else { rng.random_range(0..=q) };
        let mut poly = vec![c64(rng.random_range(0.5..2.0), 0.0)];
        for _ in 0..degree {
            let root = num_complex::Complex64::from_polar(
                rng.random_range(1.5..4.0),
                rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let mut next = vec![c64(0.0, 0.0); poly.len() + 1];
            for (i, &c) in poly.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c / root;
            }
            poly = next;
        }
        poly.resize(q + 1, c64(0.0, 0.0));
        channels.push(poly);
    }
    let coefficients = (0..=q)
        .map(|j| {
            let diag = CMatrix::from_fn(d, d, |a, b| if a == b { channels[a][j] } else { c64(0.0, 0.0) });
            &u * diag
        })
        .collect();
    MaSpec::new(coefficients)
}

/// `sqrt(Σ_j ‖b̂(j) Q − b(j)‖_F²)`, with either sequence zero-padded to the longer length.
pub fn stacked_residual(estimate: &[CMatrix], target: &[CMatrix], q: &CMatrix) -> f64 {
    let len = estimate.len().max(target.len());
    (0..len)
        .map(|j| match (estimate.get(j), target.get(j)) {
            (Some(e), Some(t)) => numeric::frobenius_sq(&(e * q - t)),
            (Some(e), None) => numeric::frobenius_sq(&(e * q)),
            (None, Some(t)) => numeric::frobenius_sq(t),
            (None, None) => 0.0,
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub length: usize,
    pub seed: u64,
    /// `5/√T`, applied entrywise.
    pub bound: f64,
    /// `max |cov(ξ̂) − I_r|`.
    pub noise_covariance_deviation: f64,
    /// `max |mean(ξ̂)|`.
    pub noise_mean_deviation: f64,
    /// `max_k max |cov(ξ̂_t, X_{t−k})|`, `k = 1..=max_lag`.
    pub past_cross_covariance_deviation: f64,
    pub max_lag: usize,
    /// `max |cov(X_t − X̂_t) − Σ|` for one-step predictions.
    pub one_step_error_deviation: f64,
    pub usable_samples: usize,
    pub truncation_bias: f64,
    pub passed: bool,
}

/// Simulates `spec`, recovers the noise with `model` and checks the second-order
/// properties of the recovered noise and one-step errors against `5/√T`.
pub fn monte_carlo_check(
    spec: &MaSpec,
    model: &WoldModel,
    config: &SimulationConfig,
    max_lag: usize,
) -> Result<MonteCarloReport> {
    let path = ma_sample_path(spec, config)?;
    let xi = recover_noise(model, &path)?;
    if max_lag >= xi.start {
        return Err(Error::Argument(format!("lag {max_lag} exceeds the filter history {}", xi.start - 1)));
    }
    let bound = 5.0 / (config.length as f64).sqrt();
    let n = xi.values.len();
    let cov = sample_covariance(&xi.values, &xi.values, 0);
    let noise_covariance_deviation = max_abs(&(cov - CMatrix::identity(model.rank, model.rank)));
    let mean = xi.values.iter().fold(CVector::zeros(model.rank), |acc, v| acc + v) / c64(n as f64, 0.0);
    let noise_mean_deviation = mean.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut past_cross_covariance_deviation = 0.0f64;
    for k in 1..=max_lag {
        let mut acc = CMatrix::zeros(model.rank, model.dimension);
        for (i, v) in xi.values.iter().enumerate() {
            acc.gerc(c64(1.0, 0.0), v, &path.values()[xi.start + i - 1 - k], c64(1.0, 0.0));
        }
        past_cross_covariance_deviation = past_cross_covariance_deviation.max(max_abs(&(acc / c64(n as f64, 0.0))));
    }
    let errors = one_step_errors(model, &path, &xi)?;
    let one_step_error_deviation = max_abs(&(sample_covariance(&errors, &errors, 0) - &model.sigma));
    Ok(MonteCarloReport {
        length: config.length,
        seed: config.seed,
        bound,
        noise_covariance_deviation,
        noise_mean_deviation,
        past_cross_covariance_deviation,
        max_lag,
        one_step_error_deviation,
        usable_samples: n,
        truncation_bias: xi.truncation_bias,
        passed: noise_covariance_deviation <= bound
            && noise_mean_deviation <= bound
            && past_cross_covariance_deviation <= bound
            && one_step_error_deviation <= bound,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundTripReport {
    pub completed: bool,
    pub residual: Option<f64>,
    pub residual_at_identity: Option<f64>,
    #[serde(skip)]
    pub unitary: Option<CMatrix>,
    /// `‖Q*Q − I‖`.
    pub unitary_defect: Option<f64>,
    /// `‖Σ̂ − b(0)b(0)*‖` against the generating spec.
    pub sigma_gap: Option<f64>,
    pub ks_gap: Option<f64>,
    pub phi_negative_energy_ratio: Option<f64>,
    pub psi_negative_energy_ratio: Option<f64>,
    /// Whether the generating spec passed the minimum-phase test; if not, the
    /// comparison is against a non-minimum-phase representative.
    pub spec_minimum_phase: bool,
    pub spec_inverse_negative_energy_ratio: f64,
    pub gauge: Option<GaugeTag>,
    pub factorization: FactorizeReport,
    #[serde(skip)]
    pub model: Option<WoldModel>,
}

/// Negative-index energy share of the pointwise pseudo-inverse of the spec transfer function.
pub fn spec_inverse_negative_energy(spec: &MaSpec, grid: FrequencyGrid, rank_tol: f64) -> Result<f64> {
    let values = grid
        .nodes()
        .map(|w| numeric::moore_penrose_pinv(&spec.transfer(w), rank_tol))
        .collect::<Result<Vec<_>>>()?;
    let k = grid.max_index();
    let coeffs = numeric::matrix_dft_coefficients(&values, -k..=k)?;
    let energy: Vec<f64> = coeffs.iter().map(numeric::frobenius_sq).collect();
    let total: f64 = energy.iter().sum();
    let negative: f64 = energy[..k as usize].iter().sum();
    Ok(if total == 0.0 { 0.0 } else { negative / total })
}

/// Spec → density → factorization, then comparison with the spec modulo a constant unitary.
pub fn round_trip(spec: &MaSpec, config: &RunConfig) -> Result<RoundTripReport> {
    let grid = FrequencyGrid::new(config.grid_size)?;
    let f = density_from_ma(spec, grid)?;
    let out = factorize(&f, config)?;
    let inverse_ratio = spec_inverse_negative_energy(spec, grid, config.rank_tol)?;
    let spec_minimum_phase = inverse_ratio <= config.causal_tol;
    let mut report = RoundTripReport {
        completed: false,
        residual: None,
        residual_at_identity: None,
        unitary: None,
        unitary_defect: None,
        sigma_gap: None,
        ks_gap: out.report.ks.as_ref().map(|k| k.absolute_gap),
        phi_negative_energy_ratio: out.report.verification.as_ref().map(|v| v.phi_negative_energy_ratio),
        psi_negative_energy_ratio: out.report.verification.as_ref().map(|v| v.psi_negative_energy_ratio),
        spec_minimum_phase,
        spec_inverse_negative_energy_ratio: inverse_ratio,
        gauge: out.report.gauge,
        factorization: out.report.clone(),
        model: None,
    };
    let Some(model) = out.model else {
        return Ok(report);
    };
    let target = spec.coefficients();
    let q = procrustes(&model.b, target)?;
    let identity = CMatrix::identity(model.rank, target[0].ncols());
    let spec_sigma = &target[0] * target[0].adjoint();
    report.completed = true;
    report.residual = Some(stacked_residual(&model.b, target, &q));
    report.residual_at_identity = Some(stacked_residual(&model.b, target, &identity));
    report.unitary_defect = Some(numeric::spectral_norm(&(q.adjoint() * &q - CMatrix::identity(q.ncols(), q.ncols()))));
    report.unitary = Some(q);
    report.sigma_gap = Some(numeric::spectral_norm(&(&model.sigma - spec_sigma)));
    report.model = Some(model);
    Ok(report)
}
