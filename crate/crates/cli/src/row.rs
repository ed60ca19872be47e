//! Evaluation of scenario points into result rows.

use harvest_core::kernel::{FunctionalMode, KernelFunctionals};
use harvest_core::oracle::{oracle_evolve_pair, oracle_evolve_single, ApplicationOrder, OracleSystem};
use harvest_core::perturbative::{pert_coeffs, rho_pair_pert, rho_single_pert};
use harvest_core::pipeline::{evolve_pair, evolve_single, SwitchOrder};
use harvest_core::spectra::SpectralReport;
use harvest_core::state::max_abs_diff;
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::{OracleSettings, ScenarioPoint};
use crate::ComputeError;

/// Achieved error of a reported number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Uncertainty {
    Exact,
    Estimate(f64),
}

impl Uncertainty {
    fn from_estimate(e: f64) -> Self {
        if e == 0.0 {
            Uncertainty::Exact
        } else {
            Uncertainty::Estimate(e)
        }
    }
}

impl Serialize for Uncertainty {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Uncertainty::Exact => s.serialize_str("exact"),
            Uncertainty::Estimate(e) => s.serialize_f64(*e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Field {
    pub value: f64,
    pub error: Uncertainty,
}

fn field(value: f64, error: f64) -> Option<Field> {
    Some(Field {
        value,
        error: Uncertainty::from_estimate(error),
    })
}

fn exact(value: f64) -> Option<Field> {
    Some(Field {
        value,
        error: Uncertainty::Exact,
    })
}

/// CSV column order.
pub const COLUMNS: [&str; 26] = [
    "scenario_id",
    "n",
    "I_A",
    "I_B",
    "f_A",
    "f_B",
    "theta",
    "omega",
    "C_A",
    "C_B",
    "eig1",
    "eig2",
    "eig3",
    "eig4",
    "eigpt1",
    "eigpt2",
    "eigpt3",
    "eigpt4",
    "negativity",
    "entropy",
    "gamma_minus",
    "gamma_plus",
    "resid_closed_numeric",
    "resid_pert",
    "resid_oracle",
    "err_estimate",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    pub units: String,
    pub n: usize,
    pub sweep: Option<(String, f64)>,
    /// Numeric columns after `n`, in [`COLUMNS`] order.
    pub fields: Vec<Option<Field>>,
    pub oracle_truncation_tail: Option<f64>,
    pub warnings: Vec<String>,
}

impl ResultRow {
    pub fn get(&self, column: &str) -> Option<Field> {
        let idx = COLUMNS.iter().position(|c| *c == column)?;
        self.fields.get(idx.checked_sub(2)?).copied().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Overrides every point's relative quadrature tolerance.
    pub rel_tol: Option<f64>,
    /// Run the Fock oracle even when the scenario does not ask for it.
    pub force_oracle: bool,
    /// Worker threads for sweeps; `None` lets the pool decide.
    pub jobs: Option<usize>,
}

fn numeric_columns(
    kf: &KernelFunctionals,
    report: &SpectralReport,
    resid_pert: Option<f64>,
    resid_oracle: Option<(f64, f64)>,
) -> Vec<Option<Field>> {
    let e = kf.errors;
    let spread = e.max();
    let pair = kf.mode == FunctionalMode::Pair;
    let when = |cond: bool, f: Option<Field>| if cond { f } else { None };
    let mut cols = vec![
        field(kf.i_a, e.i_a),
        when(pair, field(kf.i_b, e.i_b)),
        field(kf.f_a, 0.5 * kf.f_a * e.i_a),
        when(pair, field(kf.f_b, 0.5 * kf.f_b * e.i_b)),
        when(pair, field(kf.theta, 0.5 * e.cross)),
        when(pair, field(kf.omega, e.cross)),
        field(kf.c_a, e.c_a),
        when(pair, field(kf.c_b, e.c_b)),
    ];
    match report.eig_pair {
        Some(eig) => cols.extend(eig.iter().map(|&v| field(v, spread))),
        None => {
            cols.push(field(report.eig_single.0, spread));
            cols.push(field(report.eig_single.1, spread));
            cols.extend([None, None]);
        }
    }
    match report.eig_pt {
        Some(eig) => cols.extend(eig.iter().map(|&v| field(v, spread))),
        None => cols.extend([None; 4]),
    }
    cols.push(report.negativity.and_then(|v| field(v, spread)));
    cols.push(field(report.entropy_pair.unwrap_or(report.entropy_single), spread));
    cols.push(report.gamma_minus.and_then(|v| field(v, spread)));
    cols.push(report.gamma_plus.and_then(|v| field(v, spread)));
    cols.push(exact(report.residual_closed_vs_numeric));
    cols.push(resid_pert.and_then(exact));
    cols.push(resid_oracle.and_then(|(r, tail)| field(r, tail)));
    cols.push(exact(spread));
    cols
}

fn compute_error(id: &str, e: impl std::fmt::Display) -> ComputeError {
    ComputeError {
        scenario: id.to_string(),
        message: e.to_string(),
    }
}

pub fn evaluate_point(point: &ScenarioPoint, opts: &RunOptions) -> Result<ResultRow, ComputeError> {
    let s = &point.scenario;
    let id = point.id.as_str();
    let err = |e: &dyn std::fmt::Display| compute_error(id, e);
    let mut cfg = s.quadrature;
    if let Some(tol) = opts.rel_tol {
        cfg.rel_tol = tol;
    }
    let oracle = s.oracle.or(opts.force_oracle.then(OracleSettings::default));
    let det_a = &s.detectors[0];
    let (fields, tail, warnings) = match s.detectors.get(1) {
        None => {
            let out = evolve_single(det_a, &s.amplitude, s.n, &cfg).map_err(|e| err(&e))?;
            let co = pert_coeffs(det_a, None, &s.amplitude, s.n, &cfg).map_err(|e| err(&e))?;
            let resid_pert = max_abs_diff(&out.rho, &rho_single_pert(&co));
            let resid_oracle = match oracle {
                Some(o) => {
                    let sys = OracleSystem::realize(&out.kf, o.truncation, o.budget).map_err(|e| err(&e))?;
                    let r = oracle_evolve_single(&sys).map_err(|e| err(&e))?;
                    Some((max_abs_diff(&r.rho, &out.rho), r.truncation_tail))
                }
                None => None,
            };
            let tail = resid_oracle.map(|r| r.1);
            (numeric_columns(&out.kf, &out.report, Some(resid_pert), resid_oracle), tail, Vec::new())
        }
        Some(det_b) => {
            let out = evolve_pair(det_a, det_b, &s.amplitude, s.n, &cfg).map_err(|e| err(&e))?;
            let mut warnings = out.warnings.clone();
            let resid_pert = if out.order == SwitchOrder::BFirst {
                warnings.push("perturbative comparison skipped: detector B switches first".into());
                None
            } else {
                let co = pert_coeffs(det_a, Some(det_b), &s.amplitude, s.n, &cfg).map_err(|e| err(&e))?;
                Some(max_abs_diff(&out.rho, &rho_pair_pert(&co)))
            };
            let resid_oracle = match oracle {
                Some(o) => {
                    let order = if out.order == SwitchOrder::BFirst {
                        ApplicationOrder::BFirst
                    } else {
                        ApplicationOrder::AFirst
                    };
                    let sys = OracleSystem::realize(&out.kf, o.truncation, o.budget)
                        .map_err(|e| err(&e))?
                        .with_order(order);
                    let r = oracle_evolve_pair(&sys).map_err(|e| err(&e))?;
                    Some((max_abs_diff(&r.rho, &out.rho), r.truncation_tail))
                }
                None => None,
            };
            let tail = resid_oracle.map(|r| r.1);
            (numeric_columns(&out.kf, &out.report, resid_pert, resid_oracle), tail, warnings)
        }
    };
    Ok(ResultRow {
        scenario_id: point.id.clone(),
        units: point.units.clone(),
        n: s.n,
        sweep: point.sweep.clone(),
        fields,
        oracle_truncation_tail: tail,
        warnings,
    })
}

/// Evaluate points concurrently; rows come back in input order and the
/// first failing point (in input order) is reported.
pub fn run_points(points: &[ScenarioPoint], opts: &RunOptions) -> Result<Vec<ResultRow>, ComputeError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = opts.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder.build().map_err(|e| compute_error("thread pool", e))?;
    let results: Vec<Result<ResultRow, ComputeError>> =
        pool.install(|| points.par_iter().map(|p| evaluate_point(p, opts)).collect());
    results.into_iter().collect()
}
