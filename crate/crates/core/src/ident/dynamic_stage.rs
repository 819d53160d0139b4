//! Stage two: feedback-linearized multisine experiments, a period-averaged
//! frequency response, a rational fit of `G_k` and the recovery of `G_a`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::static_stage::StaticFit;
use super::RecordSource;
use crate::error::{Error, Result};
use crate::excitation::{Multisine, MultisineSpec, Signal};
use crate::lti::{poly, RationalTF};
use crate::nonlinearity::{Interval, NlTerm, StaticNL};
use crate::sim::{derive_seed, Controller, LurePlant, SampledRecord};

/// Stream id for the dynamic-stage noise realizations.
const STREAM: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicStageConfig {
    pub k: f64,
    /// Multisine settings; its seed is the base for every realization's phases.
    pub multisine: MultisineSpec,
    /// Number of independent realizations `R`.
    pub realizations: usize,
}

impl DynamicStageConfig {
    /// Realized multisine for realization `r`.
    pub fn multisine(&self, r: usize) -> Result<Multisine> {
        let mut spec = self.multisine.clone();
        spec.seed = derive_seed(self.multisine.seed, STREAM, r as u64);
        Multisine::new(&spec)
    }
}

/// `R` closed-loop runs under `κ = k (v_r - v) + Σ ŵ_j φ_j(v)`, each with a
/// fresh random-phase multisine reference.
pub fn run_dynamic_stage<S: RecordSource + ?Sized>(
    source: &S,
    terms: &[NlTerm],
    cfg: &DynamicStageConfig,
) -> Result<Vec<SampledRecord>> {
    if cfg.realizations == 0 {
        return Err(Error::invalid("at least one realization is required"));
    }
    if cfg.multisine.periods < 2 {
        return Err(Error::invalid("at least two periods are required"));
    }
    (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<SampledRecord> {
                let ms = cfg.multisine(r)?;
                let duration = ms.period() * ms.periods() as f64;
                let ctrl = Controller::feedlin(cfg.k, terms.to_vec(), Signal::multisine(ms))?;
                source.run(&ctrl, duration, STREAM, r)
            };
            run().map_err(|e| Error::Realization {
                index: r,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Frequency response at the excited bins, averaged over realizations.
#[derive(Clone, Debug, PartialEq)]
pub struct FrfEstimate {
    /// Bin frequencies in Hz.
    pub freq_hz: Vec<f64>,
    pub response: Vec<Complex64>,
    /// Sample variance across realizations divided by `R`: the variance of
    /// the averaged estimate. Zero when `R = 1`.
    pub variance: Vec<f64>,
    pub realizations: usize,
}

impl FrfEstimate {
    pub fn omega(&self) -> Vec<f64> {
        self.freq_hz.iter().map(|f| 2.0 * PI * f).collect()
    }

    /// Header `freq_hz,re,im,variance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,re,im,variance\n");
        for ((f, g), v) in self.freq_hz.iter().zip(&self.response).zip(&self.variance) {
            let _ = writeln!(out, "{f:.16e},{:.16e},{:.16e},{v:.16e}", g.re, g.im);
        }
        out
    }

    /// Bins at or below `f_max` Hz.
    pub fn restricted(&self, f_max: f64) -> Self {
        let keep: Vec<usize> = (0..self.freq_hz.len()).filter(|&i| self.freq_hz[i] <= f_max).collect();
        Self {
            freq_hz: keep.iter().map(|&i| self.freq_hz[i]).collect(),
            response: keep.iter().map(|&i| self.response[i]).collect(),
            variance: keep.iter().map(|&i| self.variance[i]).collect(),
            realizations: self.realizations,
        }
    }
}

/// Discard the first period and take `V(jω_ℓ) / V_r(jω_ℓ)` from the DFT of the
/// second, for `ℓ = 1..=n_f`.
pub fn estimate_frf(records: &[SampledRecord], n: usize, n_f: usize) -> Result<FrfEstimate> {
    if records.is_empty() {
        return Err(Error::invalid("no records"));
    }
    if n_f == 0 || 2 * n_f >= n {
        return Err(Error::Aliasing { n_f, half: n / 2 });
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let dft = |x: &[f64]| {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut buf);
        buf
    };
    let mut per_record = Vec::with_capacity(records.len());
    for rec in records {
        if rec.len() < 2 * n {
            return Err(Error::invalid(format!("record has {} samples, need two periods of {n}", rec.len())));
        }
        let vr = dft(&rec.v_r[n..2 * n]);
        let v = dft(&rec.v_m[n..2 * n]);
        let mut g = Vec::with_capacity(n_f);
        for bin in 1..=n_f {
            let magnitude = vr[bin].norm();
            if magnitude < 1e-12 {
                return Err(Error::ExcitationHole { bin, magnitude });
            }
            g.push(v[bin] / vr[bin]);
        }
        per_record.push(g);
    }
    let r = records.len();
    let period = n as f64 * records[0].ts;
    let mut response = vec![Complex64::new(0.0, 0.0); n_f];
    let mut variance = vec![0.0; n_f];
    for b in 0..n_f {
        let mean = per_record.iter().map(|g| g[b]).sum::<Complex64>() / r as f64;
        response[b] = mean;
        if r > 1 {
            let ss: f64 = per_record.iter().map(|g| (g[b] - mean).norm_sqr()).sum();
            variance[b] = ss / (r - 1) as f64 / r as f64;
        }
    }
    Ok(FrfEstimate {
        freq_hz: (1..=n_f).map(|l| l as f64 / period).collect(),
        response,
        variance,
        realizations: r,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Converged when the relative coefficient change drops below this.
    pub tol: f64,
    /// Accept the last iterate when the change is still below this after
    /// `max_iter` iterations.
    pub accept_tol: f64,
    /// Inverse-variance bin weights (uniform when false or `R = 1`).
    pub weighted: bool,
    /// Ignore bins above this frequency in Hz.
    pub f_fit_max: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol: 1e-10,
            accept_tol: 1e-6,
            weighted: true,
            f_fit_max: None,
        }
    }
}

fn bin_weights(frf: &FrfEstimate, weighted: bool) -> Vec<f64> {
    if !weighted || frf.realizations < 2 || frf.variance.iter().all(|&v| v == 0.0) {
        return vec![1.0; frf.variance.len()];
    }
    let mut sorted = frf.variance.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = 1e-3 * sorted[sorted.len() / 2] + 1e-300;
    frf.variance.iter().map(|&v| 1.0 / v.max(floor)).collect()
}

fn weighted_residual(g: &RationalTF, omega: &[f64], data: &[Complex64], w: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for ((&om, d), &wi) in omega.iter().zip(data).zip(w) {
        acc += wi * (g.eval_freq(om)? - d).norm_sqr();
    }
    Ok(acc.sqrt())
}

/// Sanathanan–Koerner iterations for a rational model with `n_poles` poles and
/// `n_zeros` zeros, on frequencies scaled by the largest fitted bin.
pub fn fit_rational(frf: &FrfEstimate, n_poles: usize, n_zeros: usize, opts: &FitOptions) -> Result<RationalTF> {
    if n_zeros >= n_poles {
        return Err(Error::invalid("fit needs n_zeros < n_poles"));
    }
    let frf = match opts.f_fit_max {
        Some(f) => frf.restricted(f),
        None => frf.clone(),
    };
    let unknowns = n_poles + n_zeros + 1;
    if frf.freq_hz.len() < 3 * unknowns {
        return Err(Error::invalid(format!(
            "{} bins are too few for {unknowns} coefficients",
            frf.freq_hz.len()
        )));
    }
    let omega = frf.omega();
    let scale = omega.iter().copied().fold(0.0, f64::max);
    let s: Vec<Complex64> = omega.iter().map(|w| Complex64::new(0.0, w / scale)).collect();
    let w = bin_weights(&frf, opts.weighted);
    let data = &frf.response;
    let rows = 2 * s.len();

    // Unknowns: b_0..b_{n_zeros}, a_0..a_{n_poles - 1}; a_{n_poles} = 1 (ascending powers).
    let mut a_prev = vec![1.0; n_poles + 1];
    a_prev[..n_poles].fill(0.0);
    let mut theta_prev: Option<DVector<f64>> = None;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    let mut theta = DVector::zeros(unknowns);
    while iterations < opts.max_iter {
        iterations += 1;
        let mut m = DMatrix::zeros(rows, unknowns);
        let mut rhs = DVector::zeros(rows);
        for (l, (&sl, &g)) in s.iter().zip(data).enumerate() {
            let a_eval = eval_ascending(&a_prev, sl);
            let wt = w[l].sqrt() / a_eval.norm();
            let mut p = Complex64::new(1.0, 0.0);
            let mut powers = Vec::with_capacity(n_poles + 1);
            for _ in 0..=n_poles {
                powers.push(p);
                p *= sl;
            }
            for i in 0..=n_zeros {
                let c = powers[i] * wt;
                m[(2 * l, i)] = c.re;
                m[(2 * l + 1, i)] = c.im;
            }
            for i in 0..n_poles {
                let c = -g * powers[i] * wt;
                m[(2 * l, n_zeros + 1 + i)] = c.re;
                m[(2 * l + 1, n_zeros + 1 + i)] = c.im;
            }
            let r = g * powers[n_poles] * wt;
            rhs[2 * l] = r.re;
            rhs[2 * l + 1] = r.im;
        }
        let col_norms: Vec<f64> = (0..unknowns).map(|j| m.column(j).norm().max(1e-300)).collect();
        for (j, cn) in col_norms.iter().enumerate() {
            m.column_mut(j).scale_mut(1.0 / cn);
        }
        let sol = m
            .svd(true, true)
            .solve(&rhs, 1e-14)
            .map_err(|e| Error::invalid(format!("rational fit least squares failed: {e}")))?;
        theta = DVector::from_fn(unknowns, |j, _| sol[j] / col_norms[j]);
        for i in 0..n_poles {
            a_prev[i] = theta[n_zeros + 1 + i];
        }
        if let Some(prev) = &theta_prev {
            change = (&theta - prev).norm() / theta.norm().max(1e-300);
            if change < opts.tol {
                break;
            }
        }
        theta_prev = Some(theta.clone());
    }
    if change >= opts.tol && change > opts.accept_tol {
        return Err(Error::NonConvergence { iterations, change });
    }

    // Undo the frequency scaling: coefficient of s^i gains scale^{n - i}.
    let num: Vec<f64> = (0..=n_zeros).rev().map(|i| theta[i] * scale.powi((n_poles - i) as i32)).collect();
    let mut den: Vec<f64> = (0..n_poles).rev().map(|i| theta[n_zeros + 1 + i] * scale.powi((n_poles - i) as i32)).collect();
    den.insert(0, 1.0);
    let fitted = RationalTF::new(num, den)?;
    stabilize(fitted, &omega, data, &w)
}

fn eval_ascending(c: &[f64], s: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &ci| acc * s + ci)
}

/// Reflect right-half-plane poles if the weighted residual grows by < 1%.
fn stabilize(g: RationalTF, omega: &[f64], data: &[Complex64], w: &[f64]) -> Result<RationalTF> {
    let poles = g.poles()?;
    if poles.iter().all(|p| p.re < 0.0) {
        return Ok(g);
    }
    let reflected: Vec<Complex64> = poles
        .iter()
        .map(|p| if p.re >= 0.0 { Complex64::new(-p.re.abs().max(1e-9), p.im) } else { *p })
        .collect();
    let den = poly::from_roots(&reflected);
    let candidate = RationalTF::new(g.num().to_vec(), den)?;
    let before = weighted_residual(&g, omega, data, w)?;
    let after = weighted_residual(&candidate, omega, data, w)?;
    let degradation = after / before.max(1e-300) - 1.0;
    if degradation < 0.01 {
        Ok(candidate)
    } else {
        Err(Error::UnstableFit { degradation })
    }
}

/// `Ĝ_a = (1/k) Ĝ_k / (1 - Ĝ_k)`, i.e. `N_k / k` over `D_k - N_k`.
pub fn recover_ga(gk: &RationalTF, k: f64) -> Result<RationalTF> {
    if k == 0.0 || !k.is_finite() {
        return Err(Error::invalid("recovery needs a finite nonzero k"));
    }
    let n = gk.order();
    let mut num = vec![0.0; n + 1 - gk.num().len()];
    num.extend_from_slice(gk.num());
    let den: Vec<f64> = gk.den().iter().zip(&num).map(|(d, n)| d - n).collect();
    if den[0].abs() < 1e-9 {
        return Err(Error::IllPosedRecovery { leading: den[0] });
    }
    RationalTF::new(poly::scale(gk.num(), 1.0 / k), den)
}

/// The identified model: `Ĝ_a` in negative feedback with the nonlinear part of
/// the static fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedModel {
    pub g_a: RationalTF,
    pub h: StaticNL,
    pub k: f64,
    pub g_k: RationalTF,
    /// Poles of `Ĝ_a` as `[re, im]` pairs.
    pub poles: Vec<[f64; 2]>,
    /// Relative error of `Ĝ_k` against the estimated frequency response per bin.
    pub rel_error: Vec<f64>,
    /// `1 / Ĝ_a(0)` next to the static slope `ŵ_1`; both estimate the same quantity.
    pub dc_check: [f64; 2],
}

impl IdentifiedModel {
    pub fn plant(&self) -> Result<LurePlant> {
        LurePlant::from_tf(&self.g_a, self.h.clone())
    }

    /// Same model in modal coordinates.
    pub fn modal_plant(&self) -> Result<LurePlant> {
        LurePlant::modal(&self.g_a, self.h.clone())
    }
}

/// Pair `Ĝ_a` with `ĥ = Σ_{j>=2} ŵ_j φ_j`; the linear slope stays inside `Ĝ_a`.
pub fn assemble_model(g_a: RationalTF, g_k: RationalTF, fit: &StaticFit, k: f64, frf: Option<&FrfEstimate>) -> Result<IdentifiedModel> {
    let h = StaticNL::from_terms(fit.nonlinear_terms(), Interval { lo: -10.0, hi: 10.0 })?;
    let poles = g_a.poles()?.iter().map(|p| [p.re, p.im]).collect();
    let rel_error = match frf {
        Some(frf) => frf
            .omega()
            .iter()
            .zip(&frf.response)
            .map(|(&w, g)| g_k.eval_freq(w).map(|m| (m - g).norm() / g.norm().max(1e-300)))
            .collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let inv_dc = 1.0 / g_a.dc_gain()?;
    Ok(IdentifiedModel {
        g_a,
        h,
        k,
        g_k,
        poles,
        rel_error,
        dc_check: [inv_dc, fit.linear_slope()],
    })
}

#[cfg(test)]
mod tests;
