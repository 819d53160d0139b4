//! Fit metrics, spike accounting, attractor checks and the window test for
//! approximately-finite memory.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::Signal;
use crate::lti::{RationalTF, StateSpace};
use crate::lure::scalar_roots;
use crate::nonlinearity::StaticNL;

/// `1 - ‖y_ref - y_model‖ / ‖y_ref - mean(y_ref)‖`; one is a perfect fit.
pub fn nrmse(y_ref: &[f64], y_model: &[f64]) -> Result<f64> {
    if y_ref.len() != y_model.len() || y_ref.is_empty() {
        return Err(Error::invalid("nrmse needs two nonempty signals of equal length"));
    }
    let mean = y_ref.iter().sum::<f64>() / y_ref.len() as f64;
    let spread = y_ref.iter().map(|y| (y - mean).powi(2)).sum::<f64>().sqrt();
    if spread == 0.0 {
        return Err(Error::UndefinedNrmse);
    }
    let err = y_ref.iter().zip(y_model).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    Ok(1.0 - err / spread)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryVerdict {
    Consistent,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryTestResult {
    pub eta_values: Vec<f64>,
    /// Largest `|F u(t) - F W_{t,η} u(t)|` over the probe times, per window length.
    pub eps_values: Vec<f64>,
    pub probe_times: Vec<f64>,
    pub epsilon: f64,
    pub verdict: MemoryVerdict,
}

/// Compare the response to `u` with the response to `u` truncated to
/// `[t - η, t]` at every probe time `t` and window length `η`.
///
/// `runner` maps an input to its output samples at period `ts`, from zero
/// initial conditions, covering at least the last probe time.
pub fn window_memory_test<F>(
    runner: F,
    u: &Signal,
    ts: f64,
    eta_list: &[f64],
    t_probe_list: &[f64],
    epsilon: f64,
) -> Result<MemoryTestResult>
where
    F: Fn(&Signal) -> Result<Vec<f64>> + Sync,
{
    if eta_list.is_empty() || t_probe_list.is_empty() {
        return Err(Error::invalid("memory test needs window lengths and probe times"));
    }
    if eta_list.iter().chain(t_probe_list).any(|&x| !(x >= 0.0)) || !(epsilon > 0.0) {
        return Err(Error::invalid("window lengths, probe times and epsilon must be positive"));
    }
    let index = |t: f64| (t / ts).round() as usize;
    let full = runner(u)?;
    let probes: Vec<usize> = t_probe_list.iter().map(|&t| index(t)).collect();
    if probes.iter().any(|&p| p >= full.len()) {
        return Err(Error::invalid("probe time beyond the simulated horizon"));
    }
    let jobs: Vec<(usize, usize)> = (0..eta_list.len())
        .flat_map(|e| (0..probes.len()).map(move |p| (e, p)))
        .collect();
    let deviations: Vec<f64> = jobs
        .par_iter()
        .map(|&(e, p)| {
            let t = t_probe_list[p];
            let windowed = u.clone().windowed(t - eta_list[e], t);
            let y = runner(&windowed)?;
            Ok((full[probes[p]] - y[probes[p]]).abs())
        })
        .collect::<Result<_>>()?;
    let eps_values: Vec<f64> = (0..eta_list.len())
        .map(|e| {
            deviations[e * probes.len()..(e + 1) * probes.len()]
                .iter()
                .copied()
                .fold(0.0, f64::max)
        })
        .collect();
    let verdict = if eps_values.iter().any(|&e| e < epsilon) {
        MemoryVerdict::Consistent
    } else {
        MemoryVerdict::Violated
    };
    Ok(MemoryTestResult {
        eta_values: eta_list.to_vec(),
        eps_values,
        probe_times: t_probe_list.to_vec(),
        epsilon,
        verdict,
    })
}

/// Sample index of the maximum of every excursion above `threshold`; an
/// excursion closer than `min_separation` samples to the previous one is
/// merged into it.
pub fn detect_spikes(y: &[f64], threshold: f64, min_separation: usize) -> Vec<usize> {
    let mut spikes: Vec<usize> = Vec::new();
    let mut i = 0;
    while i < y.len() {
        if y[i] > threshold && (i == 0 || y[i - 1] <= threshold) {
            let start = i;
            while i < y.len() && y[i] > threshold {
                i += 1;
            }
            let peak = (start..i).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();
            match spikes.last() {
                Some(&last) if peak - last < min_separation => {}
                _ => spikes.push(peak),
            }
        } else {
            i += 1;
        }
    }
    spikes
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeReport {
    /// Spike times in the reference, seconds.
    pub reference: Vec<f64>,
    pub model: Vec<f64>,
    pub matched: usize,
    pub missed: usize,
    pub extra: usize,
    /// Times of unmatched reference spikes.
    pub missed_at: Vec<f64>,
}

impl SpikeReport {
    /// Matched share of the reference spikes; one when there are none.
    pub fn match_ratio(&self) -> f64 {
        if self.reference.is_empty() {
            1.0
        } else {
            self.matched as f64 / self.reference.len() as f64
        }
    }
}

/// Pair spikes of two signals sampled at `ts` that lie within half of
/// `min_separation` seconds of each other.
pub fn spike_match(y_ref: &[f64], y_model: &[f64], ts: f64, threshold: f64, min_separation: f64) -> Result<SpikeReport> {
    if !(min_separation > 0.0) || !(ts > 0.0) {
        return Err(Error::invalid("spike matching needs positive ts and separation"));
    }
    let sep = (min_separation / ts).round().max(1.0) as usize;
    let a = detect_spikes(y_ref, threshold, sep);
    let b = detect_spikes(y_model, threshold, sep);
    let tol = sep / 2;
    let (mut i, mut j) = (0, 0);
    let mut matched_ref = vec![false; a.len()];
    let mut matched = 0;
    while i < a.len() && j < b.len() {
        if a[i].abs_diff(b[j]) <= tol {
            matched_ref[i] = true;
            matched += 1;
            i += 1;
            j += 1;
        } else if a[i] < b[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let to_t = |v: &[usize]| v.iter().map(|&n| n as f64 * ts).collect::<Vec<_>>();
    Ok(SpikeReport {
        missed: a.len() - matched,
        extra: b.len() - matched,
        matched,
        missed_at: a.iter().zip(&matched_ref).filter(|(_, m)| !**m).map(|(&n, _)| n as f64 * ts).collect(),
        reference: to_t(&a),
        model: to_t(&b),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleScrollReport {
    pub max_norm: f64,
    pub bounded: bool,
    /// Share of samples with the first coordinate above `+threshold`.
    pub frac_pos: f64,
    pub frac_neg: f64,
    pub transitions: usize,
    pub threshold: f64,
    pub passed: bool,
}

/// Bounded (`‖x‖ < 100`), at least 5% of samples in each lobe of the first
/// coordinate and at least ten lobe-to-lobe transitions.
pub fn double_scroll_check(states: &[Vec<f64>], lobe_threshold: f64) -> Result<DoubleScrollReport> {
    if states.is_empty() {
        return Err(Error::invalid("empty trajectory"));
    }
    let mut max_norm: f64 = 0.0;
    let (mut pos, mut neg, mut transitions) = (0usize, 0usize, 0usize);
    let mut lobe = 0i8;
    for x in states {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Divergence { time: f64::NAN, norm });
        }
        max_norm = max_norm.max(norm);
        let side = if x[0] > lobe_threshold {
            pos += 1;
            1
        } else if x[0] < -lobe_threshold {
            neg += 1;
            -1
        } else {
            0
        };
        if side != 0 {
            if lobe != 0 && side != lobe {
                transitions += 1;
            }
            lobe = side;
        }
    }
    let n = states.len() as f64;
    let (frac_pos, frac_neg) = (pos as f64 / n, neg as f64 / n);
    let bounded = max_norm < 100.0;
    Ok(DoubleScrollReport {
        max_norm,
        bounded,
        frac_pos,
        frac_neg,
        transitions,
        threshold: lobe_threshold,
        passed: bounded && frac_pos >= 0.05 && frac_neg >= 0.05 && transitions >= 10,
    })
}

/// Nonzero equilibria of the unforced loop `G_a` with `h`, i.e. roots of
/// `v / G_a(0) + h(v)` on `[-range, range]`.
pub fn outer_equilibria(g_a: &RationalTF, h: &StaticNL, range: f64) -> Result<Vec<f64>> {
    let inv = 1.0 / g_a.dc_gain()?;
    let roots = scalar_roots(|v| inv * v + h.eval(v), -range, range, 20_000);
    Ok(roots.into_iter().filter(|v| v.abs() > 1e-6 * range).collect())
}

/// Half the first modal coordinate of the outermost unforced equilibrium.
pub fn lobe_threshold(g_a: &RationalTF, h: &StaticNL) -> Result<f64> {
    let eq = outer_equilibria(g_a, h, 100.0)?;
    let v = eq
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .ok_or_else(|| Error::invalid("model has no nonzero equilibrium"))?;
    let ss = StateSpace::modal_canonical(g_a)?;
    let x = equilibrium_state(&ss, -h.eval(v))?;
    Ok(0.5 * x[0].abs())
}

/// `x = -A⁻¹ B u` for a constant plant input `u`.
fn equilibrium_state(ss: &StateSpace, u: f64) -> Result<DVector<f64>> {
    let a: DMatrix<f64> = ss.a.clone();
    a.lu()
        .solve(&(-&ss.b * u))
        .ok_or_else(|| Error::invalid("singular dynamics matrix"))
}
