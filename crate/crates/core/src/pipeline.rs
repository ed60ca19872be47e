//! End-to-end evaluation: functionals, evolved matrices and spectra for one
//! detector or an ordered pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{kernel_functionals, CoherentAmplitude, DetectorParams, KernelError, KernelFunctionals};
use crate::quadrature::QuadratureConfig;
use crate::spectra::{eig_single_closed, entropy, spectral_report, SpectraError, SpectralReport};
use crate::state::{self, DensityMatrix2, DensityMatrix4, StateError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// Which detector's unitary acts first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchOrder {
    AFirst,
    BFirst,
    /// Equal switching times; evaluated as if A acted first.
    Coincident,
}

impl SwitchOrder {
    pub fn of(det_a: &DetectorParams, det_b: &DetectorParams) -> Self {
        if det_a.switch_time < det_b.switch_time {
            Self::AFirst
        } else if det_a.switch_time > det_b.switch_time {
            Self::BFirst
        } else {
            Self::Coincident
        }
    }
}

pub const COINCIDENT_WARNING: &str =
    "coincident switching times: the pair is evaluated with detector A's unitary applied first";

#[derive(Debug, Clone, PartialEq)]
pub struct SingleEvaluation {
    pub kf: KernelFunctionals,
    pub rho: DensityMatrix2,
    pub report: SpectralReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEvaluation {
    /// Functionals in the A/B labelling, `θ = -Im(∫β_A*β_B)/2`.
    pub kf: KernelFunctionals,
    pub rho: DensityMatrix4,
    pub report: SpectralReport,
    pub order: SwitchOrder,
    pub warnings: Vec<String>,
}

pub fn evolve_single(
    det: &DetectorParams,
    alpha: &CoherentAmplitude,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<SingleEvaluation, PipelineError> {
    let kf = kernel_functionals(det, None, alpha, n, cfg)?;
    Ok(SingleEvaluation {
        rho: state::rho_single(&kf),
        report: spectral_report(&kf)?,
        kf,
    })
}

/// Evaluate from precomputed pair functionals. When B switches first the
/// matrix is assembled with the roles exchanged and permuted back.
pub fn assemble_pair(kf: &KernelFunctionals, order: SwitchOrder) -> Result<(DensityMatrix4, SpectralReport), PipelineError> {
    if order != SwitchOrder::BFirst {
        return Ok((state::rho_pair(kf)?, spectral_report(kf)?));
    }
    let ordered = kf.swapped();
    let rho = state::swap_detectors(&state::rho_pair(&ordered)?);
    let mut report = spectral_report(&ordered)?;
    report.eig_single = eig_single_closed(kf);
    report.entropy_single = entropy(&[report.eig_single.0, report.eig_single.1]);
    Ok((rho, report))
}

pub fn evolve_pair(
    det_a: &DetectorParams,
    det_b: &DetectorParams,
    alpha: &CoherentAmplitude,
    n: usize,
    cfg: &QuadratureConfig,
) -> Result<PairEvaluation, PipelineError> {
    let kf = kernel_functionals(det_a, Some(det_b), alpha, n, cfg)?;
    let order = SwitchOrder::of(det_a, det_b);
    let (rho, report) = assemble_pair(&kf, order)?;
    let warnings = if order == SwitchOrder::Coincident {
        vec![COINCIDENT_WARNING.to_string()]
    } else {
        Vec::new()
    };
    Ok(PairEvaluation {
        kf,
        rho,
        report,
        order,
        warnings,
    })
}
