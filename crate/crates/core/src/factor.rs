//! Assembly of the matrix spectral factor `φ = √(2π) Ũ Γ`, its Moore–Penrose
//! inverse `ψ = (2π)^{−1/2} Γ⁻¹ Ũ*`, and the factorization identities.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cepstral::ScalarFactorSet;
use crate::eigenfield::{CausalityReport, EigenField};
use crate::error::{Error, Result};
use crate::numeric::{self, CMatrix};
use crate::spectra::{FrequencyGrid, SpectralDensityField};

/// Whether the eigenvector field passed the causality check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeTag {
    Causal,
    /// Assembled under an explicit override after the causality check failed.
    NonCausalGauge,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    /// Highest retained coefficient index.
    pub trunc: usize,
    /// Assemble even when the causality check failed.
    pub force: bool,
}

impl FactorOptions {
    pub fn for_grid(grid: FrequencyGrid) -> Self {
        Self {
            trunc: grid.size() / 4,
            force: false,
        }
    }
}

/// Grid values of a matrix function together with its one-sided coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub grid: FrequencyGrid,
    pub values: Vec<CMatrix>,
    /// Coefficients at indices `0..=trunc`.
    pub coefficients: Vec<CMatrix>,
    /// Share of coefficient energy at negative indices (window `|k| ≤ N/2 − 1`).
    pub negative_energy_ratio: f64,
    /// Grid energy `(1/N) Σ_m ‖F(ω_m)‖_F²` not carried by the retained coefficients.
    pub tail_energy: f64,
    pub gauge: GaugeTag,
}

impl CoefficientField {
    fn from_values(grid: FrequencyGrid, values: Vec<CMatrix>, trunc: usize, gauge: GaugeTag) -> Result<Self> {
        let k = grid.max_index();
        if trunc as i64 > k {
            return Err(Error::Range {
                index: trunc as i64,
                limit: k + 1,
                grid_size: grid.size(),
            });
        }
        let window = numeric::matrix_dft_coefficients(&values, -k..=k)?;
        let energy: Vec<f64> = window.iter().map(numeric::frobenius_sq).collect();
        let negative: f64 = energy[..k as usize].iter().sum();
        let total: f64 = energy.iter().sum();
        let coefficients = window[k as usize..=(k as usize + trunc)].to_vec();
        let grid_energy =
            values.iter().map(numeric::frobenius_sq).sum::<f64>() / grid.size() as f64;
        let kept: f64 = coefficients.iter().map(numeric::frobenius_sq).sum();
        Ok(Self {
            grid,
            values,
            coefficients,
            negative_energy_ratio: if total == 0.0 { 0.0 } else { negative / total },
            tail_energy: (grid_energy - kept).max(0.0),
            gauge,
        })
    }

    pub fn trunc(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values[0].shape()
    }

    fn twisted(&self, left: Option<&CMatrix>, right: Option<&CMatrix>) -> Self {
        let apply = |m: &CMatrix| {
            let m = match left {
                Some(l) => l * m,
                None => m.clone(),
            };
            match right {
                Some(r) => m * r,
                None => m,
            }
        };
        Self {
            grid: self.grid,
            values: self.values.iter().map(apply).collect(),
            coefficients: self.coefficients.iter().map(apply).collect(),
            negative_energy_ratio: self.negative_energy_ratio,
            tail_energy: self.tail_energy,
            gauge: self.gauge,
        }
    }
}

/// `d × r` spectral factor `φ` with Wold coefficients `b(j)`.
pub type SpectralFactorField = CoefficientField;
/// `r × d` Moore–Penrose inverse `ψ` with coefficients `c_ψ(k)`.
pub type MpInverseField = CoefficientField;

fn gate(field: &EigenField, factors: &ScalarFactorSet, causality: &CausalityReport, force: bool) -> Result<GaugeTag> {
    if field.rank() != factors.rank() {
        return Err(Error::Dimension(format!(
            "eigen field has rank {} but {} scalar factors were given",
            field.rank(),
            factors.rank()
        )));
    }
    if let Some(f) = factors.factors.iter().find(|f| f.values.len() != field.grid().size()) {
        return Err(Error::Dimension(format!("scalar factor {} has the wrong grid size", f.index)));
    }
    match (causality.passed, force) {
        (true, _) => Ok(GaugeTag::Causal),
        (false, true) => Ok(GaugeTag::NonCausalGauge),
        (false, false) => Err(Error::NonCausal {
            ratio: causality.negative_energy_ratio,
        }),
    }
}

/// `φ(ω) = √(2π) Ũ(ω) diag(γ_1(ω), …, γ_r(ω))` and `b(j) = (1/N) Σ_m φ(ω_m) e^{ijω_m}`.
pub fn assemble_factor(
    field: &EigenField,
    factors: &ScalarFactorSet,
    causality: &CausalityReport,
    options: FactorOptions,
) -> Result<SpectralFactorField> {
    let gauge = gate(field, factors, causality, options.force)?;
    let root = (2.0 * PI).sqrt();
    let values = field
        .vectors()
        .iter()
        .enumerate()
        .map(|(m, u)| {
            let mut phi = u.clone();
            for (j, g) in factors.factors.iter().enumerate() {
                let mut col = phi.column_mut(j);
                col *= g.values[m] * root;
            }
            phi
        })
        .collect();
    CoefficientField::from_values(field.grid(), values, options.trunc, gauge)
}

/// `ψ(ω) = (2π)^{−1/2} diag(γ_j(ω)⁻¹) Ũ*(ω)` and its coefficients `c_ψ(k)`.
pub fn assemble_inverse(
    field: &EigenField,
    factors: &ScalarFactorSet,
    causality: &CausalityReport,
    options: FactorOptions,
) -> Result<MpInverseField> {
    let gauge = gate(field, factors, causality, options.force)?;
    let root = (2.0 * PI).sqrt().recip();
    let values = field
        .vectors()
        .iter()
        .enumerate()
        .map(|(m, u)| {
            let mut psi = u.adjoint();
            for (j, g) in factors.factors.iter().enumerate() {
                let mut row = psi.row_mut(j);
                row *= g.inverse_values[m] * root;
            }
            psi
        })
        .collect();
    CoefficientField::from_values(field.grid(), values, options.trunc, gauge)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyTolerances {
    /// Relative bound for `(1/2π)φφ* − f` and absolute bound for the other identities.
    pub identity: f64,
    pub causal: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self {
            identity: 1e-8,
            causal: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// `max_m ‖(1/2π)φφ* − f‖`.
    pub gram_deviation: f64,
    /// `max_m ‖(1/2π)φφ* − f‖ / (1 + ‖f‖)`.
    pub gram_relative: f64,
    /// `max_m ‖ψφ − I_r‖`.
    pub inverse_deviation: f64,
    /// `max_m ‖(φψ − I_d) f (ψ*φ* − I_d)‖`.
    pub projector_deviation: f64,
    pub phi_negative_energy_ratio: f64,
    pub psi_negative_energy_ratio: f64,
    pub gram_passed: bool,
    pub inverse_passed: bool,
    pub projector_passed: bool,
    pub causality_passed: bool,
    pub tolerances: VerifyTolerances,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.gram_passed && self.inverse_passed && self.projector_passed && self.causality_passed
    }
}

pub fn verify_factorization(
    f: &SpectralDensityField,
    phi: &SpectralFactorField,
    psi: &MpInverseField,
    tolerances: VerifyTolerances,
) -> Result<VerificationReport> {
    let d = f.dimension();
    let (pd, r) = phi.shape();
    if pd != d || psi.shape() != (r, d) || phi.values.len() != f.values().len() || psi.values.len() != f.values().len() {
        return Err(Error::Dimension("factor, inverse and density shapes disagree".into()));
    }
    let inv_two_pi = Complex64::new(1.0 / (2.0 * PI), 0.0);
    let (mut gram, mut gram_rel, mut inverse, mut projector) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for ((fm, p), q) in f.values().iter().zip(&phi.values).zip(&psi.values) {
        let g = numeric::spectral_norm(&(p * p.adjoint() * inv_two_pi - fm));
        gram = gram.max(g);
        gram_rel = gram_rel.max(g / (1.0 + numeric::spectral_norm(fm)));
        inverse = inverse.max(numeric::spectral_norm(&(q * p - CMatrix::identity(r, r))));
        let e = p * q - CMatrix::identity(d, d);
        projector = projector.max(numeric::spectral_norm(&(&e * fm * e.adjoint())));
    }
    let tol = tolerances.identity;
    Ok(VerificationReport {
        gram_deviation: gram,
        gram_relative: gram_rel,
        inverse_deviation: inverse,
        projector_deviation: projector,
        phi_negative_energy_ratio: phi.negative_energy_ratio,
        psi_negative_energy_ratio: psi.negative_energy_ratio,
        gram_passed: gram_rel <= tol,
        inverse_passed: inverse <= tol,
        projector_passed: projector <= tol,
        causality_passed: phi.negative_energy_ratio <= tolerances.causal
            && psi.negative_energy_ratio <= tolerances.causal,
        tolerances,
    })
}

/// Fixes the constant-unitary gauge so the leading `r × r` block of `b(0)` is Hermitian PSD.
///
/// With the block's SVD `X S Y*`, `φ` is right-multiplied by `Y X*` and `ψ`
/// left-multiplied by its adjoint. Returns the applied unitary as well.
pub fn normalize_phase(
    phi: &SpectralFactorField,
    psi: &MpInverseField,
    rank_tol: f64,
) -> Result<(SpectralFactorField, MpInverseField, CMatrix)> {
    let r = phi.shape().1;
    let block = phi.coefficients[0].view((0, 0), (r, r)).into_owned();
    let rank = numeric::numerical_rank(&block, rank_tol);
    if rank < r {
        return Err(Error::Gauge { rank, expected: r });
    }
    let s = numeric::svd(&block)?;
    let twist = &s.right * s.left.adjoint();
    let untwist = twist.adjoint();
    Ok((phi.twisted(None, Some(&twist)), psi.twisted(Some(&untwist), None), twist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cepstral::factor_eigenvalues;
    use crate::eigenfield::{align_phases, hinfty_check, pointwise_eig, DEFAULT_AGREEMENT};
    use crate::numeric::c64;
    use crate::spectra::{density_from_ma, MaSpec};
    use proptest::prelude::*;

    struct Built {
        f: SpectralDensityField,
        phi: SpectralFactorField,
        psi: MpInverseField,
    }

    fn build(spec: &MaSpec, n: usize) -> Built {
        let grid = FrequencyGrid::new(n).unwrap();
        let f = density_from_ma(spec, grid).unwrap();
        let e = pointwise_eig(&f, 1e-10, DEFAULT_AGREEMENT).unwrap();
        let (e, _) = align_phases(&e);
        let c = hinfty_check(&e, 1e-8).unwrap();
        assert!(c.passed, "{c:?}");
        let s = factor_eigenvalues(&e, 0.0).unwrap();
        let opts = FactorOptions::for_grid(grid);
        let phi = assemble_factor(&e, &s, &c, opts).unwrap();
        let psi = assemble_inverse(&e, &s, &c, opts).unwrap();
        Built { f, phi, psi }
    }

    fn scalar(coeffs: &[f64]) -> MaSpec {
        MaSpec::new(coeffs.iter().map(|&b| CMatrix::from_element(1, 1, c64(b, 0.0))).collect()).unwrap()
    }

    fn rank_one(theta: f64) -> MaSpec {
        let s = 1.0 / 2f64.sqrt();
        let u = CMatrix::from_column_slice(2, 1, &[c64(s, 0.0), c64(s, 0.0)]);
        MaSpec::new(vec![u.clone(), u * c64(theta, 0.0)]).unwrap()
    }

    #[test]
    fn white_noise_identity_factor() {
        let b = build(&MaSpec::new(vec![CMatrix::identity(3, 3)]).unwrap(), 64);
        assert!(b.phi.values.iter().all(|p| (p - CMatrix::identity(3, 3)).norm() < 1e-13));
        assert!((&b.phi.coefficients[0] - CMatrix::identity(3, 3)).norm() < 1e-13);
        assert!(b.phi.coefficients[1..].iter().all(|c| c.norm() < 1e-13));
        assert!((&b.psi.coefficients[0] - CMatrix::identity(3, 3)).norm() < 1e-13);
        assert!(b.psi.coefficients[1..].iter().all(|c| c.norm() < 1e-13));
        let v = verify_factorization(&b.f, &b.phi, &b.psi, VerifyTolerances::default()).unwrap();
        assert!(v.gram_deviation <= 1e-12 && v.inverse_deviation <= 1e-12 && v.projector_deviation <= 1e-12);
        assert!(v.passed());
    }

    #[test]
    fn scalar_ma1_coefficients() {
        let b = build(&scalar(&[1.0, 0.5]), 4096);
        let (phi, psi, _) = normalize_phase(&b.phi, &b.psi, 1e-10).unwrap();
        assert!((phi.coefficients[0][(0, 0)] - c64(1.0, 0.0)).norm() < 1e-6);
        assert!((phi.coefficients[1][(0, 0)] - c64(0.5, 0.0)).norm() < 1e-6);
        for k in 0..=20 {
            let expect = (-0.5f64).powi(k);
            assert!((psi.coefficients[k as usize][(0, 0)] - c64(expect, 0.0)).norm() < 1e-6);
        }
        let v = verify_factorization(&b.f, &phi, &psi, VerifyTolerances::default()).unwrap();
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn rank_one_factor() {
        let b = build(&rank_one(0.5), 1024);
        let s = 1.0 / 2f64.sqrt();
        let (phi, psi, _) = normalize_phase(&b.phi, &b.psi, 1e-10).unwrap();
        for i in 0..2 {
            assert!((phi.coefficients[0][(i, 0)] - c64(s, 0.0)).norm() < 1e-8);
            assert!((phi.coefficients[1][(i, 0)] - c64(0.5 * s, 0.0)).norm() < 1e-8);
            for k in 0..=20 {
                let expect = (-0.5f64).powi(k) * s;
                assert!((psi.coefficients[k as usize][(0, i)] - c64(expect, 0.0)).norm() < 1e-8);
            }
        }
        let v = verify_factorization(&b.f, &phi, &psi, VerifyTolerances::default()).unwrap();
        assert!(v.passed(), "{v:?}");
    }

    #[test]
    fn corrupted_factor_fails_gram_check() {
        let b = build(&scalar(&[1.0, 0.5]), 256);
        let mut bad = b.phi.clone();
        bad.coefficients[0][(0, 0)] += c64(1e-2, 0.0);
        for v in bad.values.iter_mut() {
            v[(0, 0)] += c64(1e-2, 0.0);
        }
        let v = verify_factorization(&b.f, &bad, &b.psi, VerifyTolerances::default()).unwrap();
        // ‖(φ+ε)(φ+ε)* − φφ*‖/2π ≥ ε(2|φ| − ε)/2π with |φ| ≥ 0.5
        assert!(v.gram_deviation >= 1e-3, "{}", v.gram_deviation);
        assert!(!v.gram_passed);
    }

    #[test]
    fn normalize_removes_constant_phase() {
        let b = build(&MaSpec::new(vec![CMatrix::identity(2, 2)]).unwrap(), 32);
        let twist = CMatrix::identity(2, 2) * Complex64::from_polar(1.0, 0.9);
        let phi = b.phi.twisted(None, Some(&twist));
        let psi = b.psi.twisted(Some(&twist.adjoint()), None);
        let (phi, psi, _) = normalize_phase(&phi, &psi, 1e-10).unwrap();
        assert!((&phi.coefficients[0] - CMatrix::identity(2, 2)).norm() < 1e-14);
        assert!((&psi.coefficients[0] - CMatrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn normalize_flips_sign() {
        let b = build(&scalar(&[1.0, 0.5]), 64);
        let minus = CMatrix::from_element(1, 1, c64(-1.0, 0.0));
        let phi = b.phi.twisted(None, Some(&minus));
        let psi = b.psi.twisted(Some(&minus), None);
        assert!(phi.coefficients[0][(0, 0)].re < 0.0);
        let (phi, _, _) = normalize_phase(&phi, &psi, 1e-10).unwrap();
        assert!((phi.coefficients[0][(0, 0)] - c64(1.0, 0.0)).norm() < 1e-12);
        assert!((phi.coefficients[1][(0, 0)] - c64(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn normalize_recovers_twisted_two_channel_model() {
        let b0 = CMatrix::identity(2, 2);
        let b1 = numeric::real_diagonal(&[0.5, -0.3]);
        let spec = MaSpec::new(vec![b0.clone(), b1.clone()]).unwrap();
        let b = build(&spec, 1024);
        let twist = CMatrix::from_row_slice(
            2,
            2,
            &[c64(0.6, 0.0), c64(0.0, 0.8), c64(0.0, 0.8), c64(0.6, 0.0)],
        );
        let phi = b.phi.twisted(None, Some(&twist));
        let psi = b.psi.twisted(Some(&twist.adjoint()), None);
        let (phi, psi, _) = normalize_phase(&phi, &psi, 1e-10).unwrap();
        assert!((&phi.coefficients[0] - b0).norm() < 1e-8);
        assert!((&phi.coefficients[1] - b1).norm() < 1e-8);
        let v = verify_factorization(&b.f, &phi, &psi, VerifyTolerances::default()).unwrap();
        assert!(v.passed());
    }

    #[test]
    fn gauge_error_on_singular_block() {
        let u = CMatrix::from_column_slice(2, 1, &[c64(0.0, 0.0), c64(1.0, 0.0)]);
        let b = build(&MaSpec::new(vec![u.clone(), u * c64(0.5, 0.0)]).unwrap(), 64);
        assert!(matches!(normalize_phase(&b.phi, &b.psi, 1e-10), Err(Error::Gauge { rank: 0, expected: 1 })));
    }

    #[test]
    fn non_causal_gate() {
        let grid = FrequencyGrid::new(64).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let vectors = grid
            .nodes()
            .map(|w| CMatrix::from_column_slice(2, 1, &[c64(s, 0.0), Complex64::from_polar(s, w)]))
            .collect();
        let e = EigenField::new(grid, vec![vec![1.0]; 64], vectors).unwrap();
        let c = hinfty_check(&e, 1e-8).unwrap();
        let s = factor_eigenvalues(&e, 0.0).unwrap();
        let opts = FactorOptions::for_grid(grid);
        assert!(matches!(assemble_factor(&e, &s, &c, opts), Err(Error::NonCausal { .. })));
        let forced = assemble_factor(&e, &s, &c, FactorOptions { force: true, ..opts }).unwrap();
        assert_eq!(forced.gauge, GaugeTag::NonCausalGauge);
        assert!(forced.negative_energy_ratio > 0.4);
    }

    #[test]
    fn rank_mismatch_is_dimension_error() {
        let grid = FrequencyGrid::new(32).unwrap();
        let f = density_from_ma(&MaSpec::new(vec![CMatrix::identity(2, 2)]).unwrap(), grid).unwrap();
        let e = pointwise_eig(&f, 1e-10, DEFAULT_AGREEMENT).unwrap();
        let c = hinfty_check(&e, 1e-8).unwrap();
        let mut s = factor_eigenvalues(&e, 0.0).unwrap();
        s.factors.pop();
        s.cepstra.pop();
        let opts = FactorOptions::for_grid(grid);
        assert!(matches!(assemble_factor(&e, &s, &c, opts), Err(Error::Dimension(_))));
        assert!(matches!(assemble_inverse(&e, &s, &c, opts), Err(Error::Dimension(_))));
    }

    fn mixture(unitary_angle: f64, thetas: Vec<f64>) -> MaSpec {
        let d = thetas.len();
        // constant unitary: Givens rotation chain with complex phases
        let mut u = CMatrix::identity(d, d);
        for i in 0..d.saturating_sub(1) {
            let (c, s) = (unitary_angle.cos(), unitary_angle.sin());
            let mut g = CMatrix::identity(d, d);
            g[(i, i)] = c64(c, 0.0);
            g[(i + 1, i + 1)] = c64(c, 0.0);
            g[(i, i + 1)] = Complex64::from_polar(-s, 0.3 * i as f64);
            g[(i + 1, i)] = Complex64::from_polar(s, -0.3 * i as f64);
            u *= g;
        }
        let b1 = &u * numeric::real_diagonal(&thetas);
        MaSpec::new(vec![u, b1]).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn parseval_and_convolution(
            angle in 0.0f64..1.5,
            thetas in proptest::collection::vec(-0.7f64..0.7, 1..=3)
        ) {
            let b = build(&mixture(angle, thetas), 256);
            let grid_energy = b.phi.values.iter().map(numeric::frobenius_sq).sum::<f64>() / 256.0;
            let kept: f64 = b.phi.coefficients.iter().map(numeric::frobenius_sq).sum();
            prop_assert!((grid_energy - kept - b.phi.tail_energy).abs() <= 1e-10);
            let r = b.phi.shape().1;
            let k_max = b.psi.trunc() / 2;
            for k in 0..=k_max {
                let mut acc = CMatrix::zeros(r, r);
                for j in 0..=k {
                    acc += &b.psi.coefficients[k - j] * &b.phi.coefficients[j];
                }
                let delta = if k == 0 { CMatrix::identity(r, r) } else { CMatrix::zeros(r, r) };
                prop_assert!(numeric::spectral_norm(&(acc - delta)) <= 1e-6);
            }
            // Gram product is invariant under a constant unitary twist
            let twist = numeric::svd(&CMatrix::from_fn(r, r, |i, j| c64((i + 2 * j) as f64, (i * j) as f64 - 1.0)))
                .map(|s| &s.left * s.right.adjoint()).unwrap();
            let twisted = b.phi.twisted(None, Some(&twist));
            for (p, t) in b.phi.values.iter().zip(&twisted.values) {
                prop_assert!(numeric::spectral_norm(&(p * p.adjoint() - t * t.adjoint())) <= 1e-12);
            }
        }
    }
}
