//! Stage one: averaged closed-loop equilibria and a least-squares fit of the
//! inverse static characteristic.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RecordSource;
use crate::error::{Error, Result};
use crate::excitation::Signal;
use crate::lti::SectorBounds;
use crate::lure::LureModel;
use crate::nonlinearity::{BasisFn, NlTerm};
use crate::sim::Controller;

/// Stream id for the static-stage noise realizations.
const STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticStageConfig {
    /// Proportional gain of the linear feedback `i = k (v_r - v)`.
    pub k: f64,
    /// Constant references, one experiment each.
    pub grid: Vec<f64>,
    /// Discarded transient in seconds.
    pub settle_time: f64,
    /// Samples averaged after the transient.
    pub n_avg: usize,
}

/// Averaged steady-state measurements, one entry per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumDataset {
    pub v_ref: Vec<f64>,
    pub v_hat: Vec<f64>,
    pub i_hat: Vec<f64>,
    pub n: Vec<usize>,
    /// Difference between the means of the two halves of the window.
    pub drift: Vec<f64>,
    /// Allowed drift: five batch-means standard errors plus `1e-5`.
    pub drift_limit: Vec<f64>,
    /// Sample variance of `v_m` over the window.
    pub variance: Vec<f64>,
}

impl EquilibriumDataset {
    pub fn len(&self) -> usize {
        self.v_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_hat.is_empty()
    }
}

/// Run every grid experiment (in parallel) and average the measurements.
pub fn run_static_stage<S: RecordSource + ?Sized>(
    source: &S,
    cfg: &StaticStageConfig,
    sector: Option<SectorBounds>,
) -> Result<EquilibriumDataset> {
    if cfg.grid.is_empty() || cfg.n_avg < 2 {
        return Err(Error::invalid("static stage needs a grid and n_avg >= 2"));
    }
    match sector {
        Some(s) if cfg.k + s.rho1 <= 0.0 => {
            return Err(Error::invalid(format!(
                "k + rho1 = {} must be positive for a unique equilibrium",
                cfg.k + s.rho1
            )))
        }
        None => log::warn!("no declared sector: cannot check k + rho1 > 0"),
        _ => {}
    }
    let ts = source.ts();
    let settle = (cfg.settle_time / ts).round() as usize;
    let duration = (settle + cfg.n_avg) as f64 * ts;

    let points: Vec<_> = cfg
        .grid
        .par_iter()
        .enumerate()
        .map(|(index, &v_ref)| {
            let ctrl = Controller::linear(cfg.k, Signal::Constant(v_ref));
            let rec = source.run(&ctrl, duration, STREAM, index)?;
            let v = &rec.v_m[settle..];
            let i = &rec.i_m[settle..];
            let (drift, limit) = drift_diagnostic(v);
            if drift > limit {
                return Err(Error::NotSettled {
                    index,
                    v_ref,
                    drift,
                    limit,
                });
            }
            let v_hat = mean(v);
            let variance = v.iter().map(|x| (x - v_hat).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            Ok((v_hat, mean(i), v.len(), drift, limit, variance))
        })
        .collect::<Result<_>>()?;

    Ok(EquilibriumDataset {
        v_ref: cfg.grid.clone(),
        v_hat: points.iter().map(|p| p.0).collect(),
        i_hat: points.iter().map(|p| p.1).collect(),
        n: points.iter().map(|p| p.2).collect(),
        drift: points.iter().map(|p| p.3).collect(),
        drift_limit: points.iter().map(|p| p.4).collect(),
        variance: points.iter().map(|p| p.5).collect(),
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Half-window mean difference and its allowed bound.
fn drift_diagnostic(x: &[f64]) -> (f64, f64) {
    let half = x.len() / 2;
    let (a, b) = (&x[..half], &x[half..2 * half]);
    let drift = (mean(b) - mean(a)).abs();
    let se = |s: &[f64]| {
        let batches = 10.min(s.len());
        let size = s.len() / batches;
        if size == 0 || batches < 2 {
            return 0.0;
        }
        let means: Vec<f64> = (0..batches).map(|j| mean(&s[j * size..(j + 1) * size])).collect();
        let m = mean(&means);
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    };
    let floor = (se(a).powi(2) + se(b).powi(2)).sqrt();
    (drift, 5.0 * floor + 1e-5)
}

/// Unchecked design matrix with rows `(v, φ_2(v), ..., φ_J(v))`.
pub fn design_matrix(v_hat: &[f64], bases: &[BasisFn]) -> DMatrix<f64> {
    DMatrix::from_fn(v_hat.len(), bases.len() + 1, |m, j| {
        if j == 0 {
            v_hat[m]
        } else {
            bases[j - 1].eval(v_hat[m])
        }
    })
}

/// Ratio of extreme singular values.
pub fn condition_number(phi: &DMatrix<f64>) -> f64 {
    let sv = phi.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Design matrix, rejected when `J > M` or its condition number exceeds `1e10`.
pub fn build_regression(v_hat: &[f64], bases: &[BasisFn]) -> Result<DMatrix<f64>> {
    let j = bases.len() + 1;
    if j > v_hat.len() {
        return Err(Error::invalid(format!("{j} regressors need at least {j} grid points, got {}", v_hat.len())));
    }
    let phi = design_matrix(v_hat, bases);
    let condition = condition_number(&phi);
    if !(condition <= 1e10) {
        return Err(Error::IllConditioned { condition });
    }
    Ok(phi)
}

/// Fitted `î_∞(v) = ŵ_1 v + Σ ŵ_j φ_j(v)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticFit {
    pub w_hat: Vec<f64>,
    pub bases: Vec<BasisFn>,
    pub residual_norm: f64,
    pub condition: f64,
}

impl StaticFit {
    pub fn i_inf_estimate(&self, v: f64) -> f64 {
        self.w_hat[0] * v
            + self.bases.iter().zip(&self.w_hat[1..]).map(|(b, w)| w * b.eval(v)).sum::<f64>()
    }

    /// `ŵ_1`, the slope absorbing `1 / G(0)` and the linear part of `h`.
    pub fn linear_slope(&self) -> f64 {
        self.w_hat[0]
    }

    /// `ŵ_j φ_j` for `j >= 2`.
    pub fn nonlinear_terms(&self) -> Vec<NlTerm> {
        self.bases
            .iter()
            .zip(&self.w_hat[1..])
            .map(|(b, &w)| NlTerm::new(w, b.clone()))
            .collect()
    }
}

/// Least squares through a thin QR factorization.
pub fn fit_static(phi: &DMatrix<f64>, i_hat: &[f64], bases: &[BasisFn]) -> Result<StaticFit> {
    if phi.nrows() != i_hat.len() || phi.ncols() != bases.len() + 1 {
        return Err(Error::invalid("design matrix does not match data and bases"));
    }
    let condition = condition_number(phi);
    if !(condition <= 1e10) {
        return Err(Error::IllConditioned { condition });
    }
    let y = DVector::from_column_slice(i_hat);
    let qr = phi.clone().qr();
    let rhs = qr.q().transpose() * &y;
    let w = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::IllConditioned { condition })?;
    let residual_norm = (&y - phi * &w).norm();
    Ok(StaticFit {
        w_hat: w.iter().copied().collect(),
        bases: bases.to_vec(),
        residual_norm,
        condition,
    })
}

/// Fit a dataset with the given bases.
pub fn fit_dataset(data: &EquilibriumDataset, bases: &[BasisFn]) -> Result<StaticFit> {
    let phi = build_regression(&data.v_hat, bases)?;
    fit_static(&phi, &data.i_hat, bases)
}

/// Residual norm of the fit using the first `J - 1` bases, `J = 2..=bases + 1`.
pub fn order_scan(data: &EquilibriumDataset, bases: &[BasisFn]) -> Result<Vec<(usize, f64)>> {
    (1..=bases.len())
        .map(|n| fit_dataset(data, &bases[..n]).map(|f| (n + 1, f.residual_norm)))
        .collect()
}

/// One row of the static characteristic comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IvRow {
    pub v: f64,
    pub i_true: Option<f64>,
    pub i_hat: f64,
    pub error: Option<f64>,
}

pub fn iv_curve(fit: &StaticFit, truth: Option<&LureModel>, v: &[f64]) -> Vec<IvRow> {
    v.iter()
        .map(|&v| {
            let i_hat = fit.i_inf_estimate(v);
            let i_true = truth.map(|m| m.i_infinity(v));
            IvRow {
                v,
                i_true,
                i_hat,
                error: i_true.map(|t| t - i_hat),
            }
        })
        .collect()
}

/// Header `v,i_inf,i_inf_hat,error`; missing ground truth is left empty.
pub fn iv_csv(rows: &[IvRow]) -> String {
    let mut out = String::from("v,i_inf,i_inf_hat,error\n");
    let opt = |x: Option<f64>| x.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(out, "{:.16e},{},{:.16e},{}", r.v, opt(r.i_true), r.i_hat, opt(r.error));
    }
    out
}

/// Largest `|i_∞ - î_∞|` over `v`.
pub fn max_static_error(fit: &StaticFit, truth: &LureModel, v: &[f64]) -> f64 {
    v.iter()
        .map(|&v| (truth.i_infinity(v) - fit.i_inf_estimate(v)).abs())
        .fold(0.0, f64::max)
}
