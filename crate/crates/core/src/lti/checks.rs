//! Frequency-domain and impulse-response checks on the linear block.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{poly, RationalTF, StateSpace};
use crate::error::{Error, Result};

/// Global slope bounds `rho1 <= (h(v2) - h(v1)) / (v2 - v1) <= rho2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorBounds {
    pub rho1: f64,
    pub rho2: f64,
}

impl SectorBounds {
    pub fn new(rho1: f64, rho2: f64) -> Result<Self> {
        if !(rho1 <= rho2) {
            return Err(Error::invalid(format!(
                "sector bounds out of order: ({rho1}, {rho2})"
            )));
        }
        Ok(Self { rho1, rho2 })
    }

    pub fn shifted(self, k: f64) -> Self {
        Self {
            rho1: self.rho1 + k,
            rho2: self.rho2 + k,
        }
    }

    pub fn contains(&self, slope: f64, tol: f64) -> bool {
        slope >= self.rho1 - tol && slope <= self.rho2 + tol
    }
}

/// 2000 log-spaced frequencies over `[1e-3, 1e4]` rad/s.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 1e4, 2000)
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1).max(1) as f64).exp())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositiveRealReport {
    pub min_re: f64,
    pub omega_at_min: f64,
    pub dc_gain: f64,
    pub ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleReport {
    pub center: f64,
    pub radius: f64,
    pub worst_margin: f64,
    pub omega_at_worst: f64,
    pub ok: bool,
}

/// Grid check of `Re G(jω) >= 0` together with `G(0) > 0`.
///
/// The grid is augmented with `ω = 0`, linear refinement around every lightly
/// damped pole, and a golden-section search at each local minimum.
pub fn check_positive_real(tf: &RationalTF, omega_grid: &[f64]) -> Result<PositiveRealReport> {
    tf.require_hurwitz()?;
    let re = |w: f64| tf.eval_freq(w).map(|g| g.re);
    let (omega_at_min, min_re) = refined_minimum(tf, omega_grid, re)?;
    let dc_gain = tf.dc_gain()?;
    Ok(PositiveRealReport {
        min_re,
        omega_at_min,
        dc_gain,
        ok: min_re >= -1e-9 && dc_gain > 0.0,
    })
}

/// Circle-criterion containment for a sector with `rho1 < 0 < rho2`.
pub fn check_circle_condition(
    tf: &RationalTF,
    sector: SectorBounds,
    omega_grid: &[f64],
) -> Result<CircleReport> {
    if !(sector.rho1 < 0.0 && sector.rho2 > 0.0) {
        return Err(Error::WrongCircleCondition {
            rho1: sector.rho1,
            rho2: sector.rho2,
        });
    }
    tf.require_hurwitz()?;
    let center = -(1.0 / sector.rho2 + 1.0 / sector.rho1) / 2.0;
    let radius = (1.0 / sector.rho2 - 1.0 / sector.rho1) / 2.0;
    let c = Complex64::new(center, 0.0);
    let margin = |w: f64| tf.eval_freq(w).map(|g| radius - (g - c).norm());
    let (omega_at_worst, worst_margin) = refined_minimum(tf, omega_grid, margin)?;
    Ok(CircleReport {
        center,
        radius,
        worst_margin,
        omega_at_worst,
        ok: worst_margin > 0.0,
    })
}

fn refined_minimum(
    tf: &RationalTF,
    omega_grid: &[f64],
    f: impl Fn(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let mut grid: Vec<f64> = omega_grid
        .iter()
        .copied()
        .filter(|w| w.is_finite() && *w >= 0.0)
        .collect();
    grid.push(0.0);
    for p in tf.poles()? {
        if p.im.abs() > 0.0 {
            let wd = p.im.abs();
            let half = (3.0 * p.re.abs()).max(1e-3 * wd);
            let lo = (wd - half).max(0.0);
            for i in 0..=100 {
                grid.push(lo + (wd + half - lo) * i as f64 / 100.0);
            }
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values = grid.iter().map(|&w| f(w)).collect::<Result<Vec<_>>>()?;
    let mut best = (grid[0], values[0]);
    for i in 0..grid.len() {
        if values[i] < best.1 {
            best = (grid[i], values[i]);
        }
        let is_local_min = i > 0
            && i + 1 < grid.len()
            && values[i] <= values[i - 1]
            && values[i] <= values[i + 1];
        if is_local_min {
            let (w, v) = golden_section(&f, grid[i - 1], grid[i + 1])?;
            if v < best.1 {
                best = (w, v);
            }
        }
    }
    Ok(best)
}

fn golden_section(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if (b - a).abs() <= 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// `∫₀^∞ |g(t)| dt` by the trapezoidal rule on the exactly discretized impulse
/// response.
///
/// With `horizon = None` the integration runs until a modal bound on the
/// remaining tail drops below `1e-6` of the running total.
pub fn impulse_l1_norm(tf: &RationalTF, horizon: Option<f64>, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    if !tf.is_strictly_proper() {
        return Err(Error::invalid("impulse L1 norm requires a strictly proper G"));
    }
    let max_re = tf.max_pole_real_part()?;
    if max_re >= -1e-9 {
        return Err(Error::Divergence {
            time: f64::INFINITY,
            norm: f64::INFINITY,
        });
    }
    if tf.is_zero() {
        return Ok(0.0);
    }
    let ss = StateSpace::controllable_canonical(tf);
    let phi = (ss.a.clone() * dt).exp();
    let tail = TailBound::new(tf)?;

    let mut x = ss.b.clone();
    let mut prev = (ss.c.clone() * &x)[0].abs();
    let mut total = 0.0;
    let mut t = 0.0;
    let decay = -max_re;
    let min_time = 5.0 / decay;
    let max_steps = 50_000_000usize;
    for step in 1..=max_steps {
        x = &phi * x;
        t = step as f64 * dt;
        let cur = (ss.c.clone() * &x)[0].abs();
        total += 0.5 * dt * (prev + cur);
        prev = cur;
        match horizon {
            Some(h) if t >= h - 0.5 * dt => return Ok(total),
            Some(_) => {}
            None => {
                if t >= min_time && tail.at(t) < 1e-6 * total {
                    return Ok(total);
                }
            }
        }
    }
    Err(Error::Numerical {
        time: t,
        reason: "impulse-response horizon exceeded the step budget".into(),
    })
}

/// Upper bound on `∫_t^∞ |g|` from the partial-fraction expansion.
struct TailBound {
    terms: Vec<(f64, f64)>,
}

impl TailBound {
    fn new(tf: &RationalTF) -> Result<Self> {
        let poles = tf.poles()?;
        let dden = poly::derivative(tf.den());
        let distinct = poles.iter().enumerate().all(|(i, p)| {
            poles[i + 1..]
                .iter()
                .all(|q| (p - q).norm() > 1e-6 * 1.0f64.max(p.norm()))
        });
        if distinct {
            let terms = poles
                .iter()
                .map(|&p| {
                    let r = poly::eval_complex(tf.num(), p) / poly::eval_complex(&dden, p);
                    (r.norm() / -p.re, p.re)
                })
                .collect();
            Ok(Self { terms })
        } else {
            // Repeated poles: inflate the bound with a polynomial-growth margin
            // at half the decay rate.
            let max_re = poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
            let scale = tf.num().iter().map(|c| c.abs()).sum::<f64>() * 1e3;
            Ok(Self {
                terms: vec![(scale / (-0.5 * max_re), 0.5 * max_re)],
            })
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.terms.iter().map(|(c, re)| c * (re * t).exp()).sum()
    }
}
