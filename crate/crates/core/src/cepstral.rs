//! Cepstral factorization of smooth positive eigenvalue functions.
//!
//! For `log λ(ω) = Σ_n β_n e^{inω}` the analytic half
//! `Q(ω) = β_0/2 + Σ_{n≥1} conj(β_n) e^{−inω}` satisfies `Q + conj(Q) = log λ`,
//! so `γ = exp(Q)` has `|γ|² = λ`, only non-negative powers of `e^{−iω}`, and
//! no zeros. Its reciprocal `exp(−Q)` is one-sided as well.

use num_complex::Complex64;
use serde::Serialize;

use crate::eigenfield::EigenField;
use crate::error::{Error, Result};
use crate::numeric::{self, FourierCoefficients};

/// Largest `|Re Q|` accepted before `exp(±Q)` would overflow.
pub const EXP_LIMIT: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CepstrumCoeffs {
    pub index: usize,
    /// `β_n` for `|n| ≤ N/2 − 1`.
    #[serde(skip)]
    pub beta: FourierCoefficients,
    /// Energy share of `|n| ≥ 3N/8` among the non-constant coefficients; a
    /// large value means `log λ` is far from smooth at this resolution.
    pub smoothness_proxy: f64,
    /// Nodes raised to the floor before taking the logarithm.
    pub floored_nodes: usize,
    pub floor: f64,
}

impl CepstrumCoeffs {
    pub fn beta(&self, n: i64) -> Complex64 {
        self.beta.get(n)
    }

    /// `β_0 = (1/2π)∫ log λ dω`.
    pub fn mean_log(&self) -> f64 {
        self.beta.get(0).re
    }

    pub fn grid_size(&self) -> usize {
        2 * (self.beta.last() as usize + 1)
    }
}

/// Cepstrum `β_n = (1/2π)∫ log λ(ω) e^{−inω} dω` of a positive grid function.
///
/// With `floor > 0`, values below the floor are raised to it and counted.
/// Any value still `≤ 0` is a [`Error::Positivity`] error.
pub fn cepstrum(index: usize, lambda: &[f64], floor: f64) -> Result<CepstrumCoeffs> {
    let n = lambda.len();
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::Argument(format!("grid size {n} is not a power of two ≥ 8")));
    }
    let mut floored_nodes = 0;
    let mut logs = Vec::with_capacity(n);
    for (node, &v) in lambda.iter().enumerate() {
        let v = if floor > 0.0 && v < floor {
            floored_nodes += 1;
            floor
        } else {
            v
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Positivity {
                index,
                node,
                value: v,
            });
        }
        logs.push(Complex64::new(v.ln(), 0.0));
    }
    let k = (n / 2) as i64 - 1;
    // dft_coefficients gives the e^{−ikω} expansion; β_n is its coefficient at −n
    let c = numeric::dft_coefficients(&logs, -k..=k)?;
    let beta = FourierCoefficients::new(-k, c.values.iter().rev().cloned().collect());

    let high = (3 * n / 8) as i64;
    let (mut hf, mut total) = (0.0, 0.0);
    for (j, z) in beta.indices().zip(&beta.values) {
        if j == 0 {
            continue;
        }
        total += z.norm_sqr();
        if j.abs() >= high {
            hf += z.norm_sqr();
        }
    }
    Ok(CepstrumCoeffs {
        index,
        beta,
        smoothness_proxy: if total == 0.0 { 0.0 } else { hf / total },
        floored_nodes,
        floor,
    })
}

/// Grid samples of `Q(ω) = β_0/2 + Σ_{n≥1} conj(β_n) e^{−inω}`.
pub fn analytic_half(c: &CepstrumCoeffs) -> Result<Vec<Complex64>> {
    let k = c.beta.last();
    let mut q = Vec::with_capacity(k as usize + 1);
    q.push(Complex64::new(c.mean_log() / 2.0, 0.0));
    q.extend((1..=k).map(|n| c.beta(n).conj()));
    numeric::dft_synthesize(&FourierCoefficients::new(0, q), c.grid_size())
}

/// Outer scalar factor `γ = exp(Q)` and its reciprocal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarFactor {
    pub index: usize,
    #[serde(skip)]
    pub values: Vec<Complex64>,
    #[serde(skip)]
    pub analytic_half: Vec<Complex64>,
    #[serde(skip)]
    pub inverse_values: Vec<Complex64>,
    /// Fourier coefficients of `γ` on `|k| ≤ N/2 − 1`.
    #[serde(skip)]
    pub coefficients: FourierCoefficients,
    #[serde(skip)]
    pub inverse_coefficients: FourierCoefficients,
    pub negative_energy_ratio: f64,
    pub inverse_negative_energy_ratio: f64,
}

impl ScalarFactor {
    /// `|γ(ω_m)|²`.
    pub fn modulus_sq(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Pointwise `γ = exp(Q)`, `γ⁻¹ = exp(−Q)`, with coefficient extraction.
pub fn scalar_factor(index: usize, q: &[Complex64]) -> Result<ScalarFactor> {
    if let Some((node, z)) = q.iter().enumerate().find(|(_, z)| !(z.re.abs() <= EXP_LIMIT)) {
        return Err(Error::Magnitude {
            node,
            magnitude: z.re.abs(),
        });
    }
    let values: Vec<Complex64> = q.iter().map(|z| z.exp()).collect();
    let inverse_values: Vec<Complex64> = q.iter().map(|z| (-z).exp()).collect();
    let k = (q.len() / 2) as i64 - 1;
    let coefficients = numeric::dft_coefficients(&values, -k..=k)?;
    let inverse_coefficients = numeric::dft_coefficients(&inverse_values, -k..=k)?;
    Ok(ScalarFactor {
        index,
        negative_energy_ratio: coefficients.negative_energy_ratio(),
        inverse_negative_energy_ratio: inverse_coefficients.negative_energy_ratio(),
        values,
        analytic_half: q.to_vec(),
        inverse_values,
        coefficients,
        inverse_coefficients,
    })
}

/// Cepstra and scalar factors for every eigenvalue column of a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalarFactorSet {
    pub cepstra: Vec<CepstrumCoeffs>,
    pub factors: Vec<ScalarFactor>,
}

impl ScalarFactorSet {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// `β_{j,0}` for each column.
    pub fn mean_logs(&self) -> Vec<f64> {
        self.cepstra.iter().map(CepstrumCoeffs::mean_log).collect()
    }

    pub fn max_smoothness_proxy(&self) -> f64 {
        self.cepstra
            .iter()
            .map(|c| c.smoothness_proxy)
            .fold(0.0, f64::max)
    }
}

/// Factors each eigenvalue column `λ_j(ω)` of `field` as `|γ_j|²`.
pub fn factor_eigenvalues(field: &EigenField, floor: f64) -> Result<ScalarFactorSet> {
    let mut cepstra = Vec::with_capacity(field.rank());
    let mut factors = Vec::with_capacity(field.rank());
    for j in 0..field.rank() {
        let c = cepstrum(j, &field.lambda_column(j), floor)?;
        let q = analytic_half(&c)?;
        factors.push(scalar_factor(j, &q)?);
        cepstra.push(c);
    }
    Ok(ScalarFactorSet { cepstra, factors })
}
