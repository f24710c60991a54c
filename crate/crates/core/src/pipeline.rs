//! Regularity diagnostics and the full factorization pipeline.

use serde::Serialize;

use crate::cepstral::{factor_eigenvalues, ScalarFactorSet};
use crate::eigenfield::{
    align_phases, decompose_with_rank, detect_rank, hinfty_check, log_integrability_check, AlignmentReport,
    CausalityReport, EigenField, LogIntegrabilityReport, RankReport, DEFAULT_AGREEMENT, DEFAULT_LOG_FLOOR,
};
use crate::error::{Error, Result};
use crate::factor::{
    assemble_factor, assemble_inverse, normalize_phase, verify_factorization, FactorOptions, GaugeTag,
    MpInverseField, SpectralFactorField, VerificationReport, VerifyTolerances,
};
use crate::io::matrix_rows;
use crate::numeric::{self, CMatrix};
use crate::spectra::{FrequencyGrid, SpectralDensityField};
use crate::wold::{innovation_covariance_closed, ks_determinant_check, KsReport, WoldModel};

pub const TOOL_NAME: &str = "wold-factor";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for a run whose checks all passed.
pub const EXIT_OK: i32 = 0;
/// Exit status for usage, I/O and validation errors.
pub const EXIT_ERROR: i32 = 1;
/// Exit status when a regularity condition or factorization check failed.
pub const EXIT_CONDITION: i32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub grid_size: usize,
    pub rank_tol: f64,
    pub causal_tol: f64,
    /// `J = K`; `None` means `N/4`.
    pub trunc: Option<usize>,
    pub force_noncausal: bool,
    pub agreement: f64,
    pub log_floor: f64,
    pub identity_tol: f64,
    /// Lower clamp applied to eigenvalues before taking logarithms; 0 disables it.
    pub cepstral_floor: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid_size: 4096,
            rank_tol: 1e-10,
            causal_tol: 1e-8,
            trunc: None,
            force_noncausal: false,
            agreement: DEFAULT_AGREEMENT,
            log_floor: DEFAULT_LOG_FLOOR,
            identity_tol: 1e-8,
            cepstral_floor: 0.0,
        }
    }
}

impl RunConfig {
    pub fn with_grid(grid_size: usize) -> Self {
        Self {
            grid_size,
            ..Self::default()
        }
    }

    pub fn trunc(&self) -> usize {
        self.trunc.unwrap_or(self.grid_size / 4)
    }

    pub fn validate(&self) -> Result<FrequencyGrid> {
        let grid = FrequencyGrid::new(self.grid_size)?;
        for (name, v) in [
            ("rank_tol", self.rank_tol),
            ("causal_tol", self.causal_tol),
            ("identity_tol", self.identity_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Argument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.agreement > 0.0 && self.agreement <= 1.0) {
            return Err(Error::Argument(format!("agreement must lie in (0, 1], got {}", self.agreement)));
        }
        if !(self.cepstral_floor >= 0.0) {
            return Err(Error::Argument("cepstral floor must be non-negative".into()));
        }
        if self.trunc() as i64 > grid.max_index() {
            return Err(Error::Argument(format!(
                "truncation {} exceeds the alias-free limit {}",
                self.trunc(),
                grid.max_index()
            )));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conditions {
    /// Rank constant almost everywhere and positive.
    pub rank_stable: bool,
    pub log_integrable: Option<bool>,
    pub causal: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub rank: RankReport,
    pub log_integrability: Option<LogIntegrabilityReport>,
    pub alignment: Option<AlignmentReport>,
    pub causality: Option<CausalityReport>,
    pub conditions: Conditions,
    /// First failing condition: `rank`, `log-integrability` or `causality`.
    pub failed_condition: Option<&'static str>,
}

impl CheckReport {
    pub fn conditions_hold(&self) -> bool {
        self.failed_condition.is_none()
    }

    pub fn exit_code(&self) -> i32 {
        if self.conditions_hold() {
            EXIT_OK
        } else {
            EXIT_CONDITION
        }
    }
}

pub struct CheckOutcome {
    pub report: CheckReport,
    /// Aligned eigenvector field at the modal rank.
    pub field: Option<EigenField>,
}

/// Evaluates the three regularity conditions without building a factor.
pub fn check(f: &SpectralDensityField, config: &RunConfig) -> Result<CheckOutcome> {
    let grid = config.validate()?;
    if f.grid() != grid {
        return Err(Error::Dimension(format!(
            "density sampled on {} nodes but the configured grid has {}",
            f.grid().size(),
            grid.size()
        )));
    }
    let rank = detect_rank(f, config.rank_tol, config.agreement)?;
    let rank_stable = rank.almost_everywhere && rank.rank > 0;
    let mut report = CheckReport {
        tool: TOOL_NAME,
        version: VERSION,
        config: config.clone(),
        rank,
        log_integrability: None,
        alignment: None,
        causality: None,
        conditions: Conditions {
            rank_stable,
            log_integrable: None,
            causal: None,
        },
        failed_condition: None,
    };
    // a zero modal rank still gets the log diagnostic at the most common positive rank
    let working_rank = if report.rank.rank > 0 {
        report.rank.rank
    } else {
        report
            .rank
            .histogram
            .iter()
            .filter(|(&r, _)| r > 0)
            .max_by_key(|(&r, &count)| (count, r))
            .map_or(f.dimension(), |(&r, _)| r)
    };
    let field = decompose_with_rank(f, working_rank, config.rank_tol)?;
    let log = log_integrability_check(&field, config.log_floor);
    let (field, alignment) = align_phases(&field);
    let causality = hinfty_check(&field, config.causal_tol)?;
    report.conditions.log_integrable = Some(log.passed);
    report.conditions.causal = Some(causality.passed);
    report.failed_condition = if !rank_stable {
        Some("rank")
    } else if !log.passed {
        Some("log-integrability")
    } else if !causality.passed {
        Some("causality")
    } else {
        None
    };
    report.log_integrability = Some(log);
    report.alignment = Some(alignment);
    report.causality = Some(causality);
    Ok(CheckOutcome {
        report,
        field: Some(field),
    })
}

type MatrixJson = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Serialize)]
pub struct TailEnergies {
    pub b: f64,
    pub c_psi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorizeReport {
    #[serde(flatten)]
    pub check: CheckReport,
    pub trunc: usize,
    pub gauge: Option<GaugeTag>,
    /// False when the leading block of `b(0)` was singular and the phase gauge was left as assembled.
    pub phase_normalized: Option<bool>,
    pub smoothness_proxy: Option<f64>,
    pub cepstral_floored_nodes: Option<usize>,
    pub verification: Option<VerificationReport>,
    pub sigma_model: Option<MatrixJson>,
    pub sigma_closed: Option<MatrixJson>,
    /// `‖Σ_closed − b(0)b(0)*‖`.
    pub two_route_gap: Option<f64>,
    /// `1e-6 · (1 + ‖Σ‖)`.
    pub two_route_tolerance: Option<f64>,
    pub ks: Option<KsReport>,
    pub tail_energies: Option<TailEnergies>,
    /// Numerical failure raised after the conditions were evaluated.
    pub stage_error: Option<String>,
}

impl FactorizeReport {
    pub fn passed(&self) -> bool {
        self.check.conditions_hold()
            && self.stage_error.is_none()
            && self.gauge == Some(GaugeTag::Causal)
            && self.verification.as_ref().is_some_and(VerificationReport::passed)
            && matches!((self.two_route_gap, self.two_route_tolerance), (Some(g), Some(t)) if g <= t)
            && self.ks.as_ref().is_some_and(|k| k.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_OK
        } else {
            EXIT_CONDITION
        }
    }
}

pub struct Artifacts {
    pub field: EigenField,
    pub factors: ScalarFactorSet,
    pub phi: SpectralFactorField,
    pub psi: MpInverseField,
    pub sigma_closed: CMatrix,
}

pub struct FactorizeOutcome {
    pub report: FactorizeReport,
    pub model: Option<WoldModel>,
    pub artifacts: Option<Artifacts>,
}

fn is_stage_error(e: &Error) -> bool {
    matches!(e, Error::Positivity { .. } | Error::Magnitude { .. } | Error::NonCausal { .. } | Error::Convergence(_))
}

/// Runs the conditions, then builds `φ`, `ψ`, the Wold coefficients and `Σ` by both routes.
pub fn factorize(f: &SpectralDensityField, config: &RunConfig) -> Result<FactorizeOutcome> {
    let CheckOutcome { report: check_report, field } = check(f, config)?;
    let mut report = FactorizeReport {
        check: check_report,
        trunc: config.trunc(),
        gauge: None,
        phase_normalized: None,
        smoothness_proxy: None,
        cepstral_floored_nodes: None,
        verification: None,
        sigma_model: None,
        sigma_closed: None,
        two_route_gap: None,
        two_route_tolerance: None,
        ks: None,
        tail_energies: None,
        stage_error: None,
    };
    let proceed = report.check.conditions.rank_stable
        && report.check.conditions.log_integrable == Some(true)
        && (report.check.conditions.causal == Some(true) || config.force_noncausal);
    let (Some(field), true) = (field, proceed) else {
        return Ok(FactorizeOutcome {
            report,
            model: None,
            artifacts: None,
        });
    };
    match build(f, field, config, &mut report) {
        Ok((model, artifacts)) => Ok(FactorizeOutcome {
            report,
            model: Some(model),
            artifacts: Some(artifacts),
        }),
        Err(e) if is_stage_error(&e) => {
            report.stage_error = Some(e.to_string());
            Ok(FactorizeOutcome {
                report,
                model: None,
                artifacts: None,
            })
        }
        Err(e) => Err(e),
    }
}

fn build(
    f: &SpectralDensityField,
    field: EigenField,
    config: &RunConfig,
    report: &mut FactorizeReport,
) -> Result<(WoldModel, Artifacts)> {
    let causality = report.check.causality.as_ref().expect("causality evaluated with the field");
    let factors = factor_eigenvalues(&field, config.cepstral_floor)?;
    report.smoothness_proxy = Some(factors.max_smoothness_proxy());
    report.cepstral_floored_nodes = Some(factors.cepstra.iter().map(|c| c.floored_nodes).sum());
    let options = FactorOptions {
        trunc: config.trunc(),
        force: config.force_noncausal,
    };
    let phi = assemble_factor(&field, &factors, causality, options)?;
    let psi = assemble_inverse(&field, &factors, causality, options)?;
    report.gauge = Some(phi.gauge);
    let (phi, psi) = match normalize_phase(&phi, &psi, config.rank_tol) {
        Ok((phi, psi, _)) => {
            report.phase_normalized = Some(true);
            (phi, psi)
        }
        Err(Error::Gauge { .. }) => {
            report.phase_normalized = Some(false);
            (phi, psi)
        }
        Err(e) => return Err(e),
    };
    let tolerances = VerifyTolerances {
        identity: config.identity_tol,
        causal: config.causal_tol,
    };
    report.verification = Some(verify_factorization(f, &phi, &psi, tolerances)?);
    let model = WoldModel::from_factor(&phi, &psi)?;
    let sigma_closed = innovation_covariance_closed(&field, &factors)?;
    report.two_route_gap = Some(numeric::spectral_norm(&(&sigma_closed - &model.sigma)));
    report.two_route_tolerance = Some(1e-6 * (1.0 + numeric::spectral_norm(&model.sigma)));
    report.ks = Some(ks_determinant_check(&field, &model.sigma, &model.b[0])?);
    report.sigma_model = Some(matrix_rows(&model.sigma));
    report.sigma_closed = Some(matrix_rows(&sigma_closed));
    report.tail_energies = Some(TailEnergies {
        b: phi.tail_energy,
        c_psi: psi.tail_energy,
    });
    Ok((
        model,
        Artifacts {
            field,
            factors,
            phi,
            psi,
            sigma_closed,
        },
    ))
}
