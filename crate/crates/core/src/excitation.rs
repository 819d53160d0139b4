//! Reference signals: constant grids, random-phase multisines and pulses.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat-amplitude random-phase multisine settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultisineSpec {
    /// Period `T` in seconds.
    pub period: f64,
    /// Sample period `T_s` in seconds.
    pub ts: f64,
    /// Highest excited frequency in Hz.
    pub f_max: f64,
    /// Per-line amplitude.
    pub u_bar: f64,
    pub seed: u64,
    pub periods: usize,
}

impl MultisineSpec {
    /// Samples per period `N = T / T_s`.
    pub fn n(&self) -> Result<usize> {
        integer_ratio(self.period, self.ts, "period / ts")
    }

    /// Excited lines `N_f = f_max T`.
    pub fn n_f(&self) -> Result<usize> {
        integer_ratio(self.f_max * self.period, 1.0, "f_max * period")
    }

    /// Amplitude giving the requested RMS: `u_bar = rms / sqrt(N_f / 2)`.
    pub fn with_rms(mut self, rms: f64) -> Result<Self> {
        let n_f = self.n_f()?;
        if n_f == 0 {
            return Err(Error::invalid("no excited lines"));
        }
        self.u_bar = rms / (n_f as f64 / 2.0).sqrt();
        Ok(self)
    }

    pub fn rms(&self) -> Result<f64> {
        Ok(self.u_bar * (self.n_f()? as f64 / 2.0).sqrt())
    }

    pub fn validate(&self) -> Result<(usize, usize)> {
        if !(self.ts > 0.0) || !(self.period > 0.0) || !(self.f_max >= 0.0) || !self.u_bar.is_finite() {
            return Err(Error::invalid("multisine needs positive period, ts and f_max"));
        }
        if self.periods == 0 {
            return Err(Error::invalid("multisine needs at least one period"));
        }
        let n = self.n()?;
        let n_f = self.n_f()?;
        if 2 * n_f >= n {
            return Err(Error::Aliasing { n_f, half: n / 2 });
        }
        Ok((n, n_f))
    }
}

fn integer_ratio(a: f64, b: f64, what: &str) -> Result<usize> {
    let r = a / b;
    let rounded = r.round();
    if !r.is_finite() || rounded < 0.0 || (r - rounded).abs() > 1e-9 * r.abs().max(1.0) {
        return Err(Error::invalid(format!("{what} = {r} must be a nonnegative integer")));
    }
    Ok(rounded as usize)
}

/// A realized multisine `Σ u sin(2π ℓ t / T + θ_ℓ)`, `ℓ = 1..N_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct Multisine {
    n: usize,
    ts: f64,
    u_bar: f64,
    periods: usize,
    phases: Vec<f64>,
    /// `u e^{jθ_ℓ}` per line.
    lines: Vec<Complex64>,
    /// One period sampled at `T_s / UPSAMPLE`, built on first continuous evaluation.
    fine: OnceLock<Vec<f64>>,
}

/// Oversampling of the interpolation table behind [`Multisine::eval`].
const UPSAMPLE: usize = 8;

impl Multisine {
    /// Phases drawn uniformly on `[0, 2π)` from the spec's seed.
    pub fn new(spec: &MultisineSpec) -> Result<Self> {
        let (_, n_f) = spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let phases = (0..n_f).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        Self::with_phases(spec, phases)
    }

    /// Explicit phases, one per excited line.
    pub fn with_phases(spec: &MultisineSpec, phases: Vec<f64>) -> Result<Self> {
        let (n, n_f) = spec.validate()?;
        if phases.len() != n_f {
            return Err(Error::invalid(format!(
                "expected {n_f} phases, got {}",
                phases.len()
            )));
        }
        Ok(Self {
            n,
            ts: spec.ts,
            u_bar: spec.u_bar,
            periods: spec.periods,
            lines: phases.iter().map(|&th| Complex64::from_polar(spec.u_bar, th)).collect(),
            phases,
            fine: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_f(&self) -> usize {
        self.phases.len()
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn period(&self) -> f64 {
        self.n as f64 * self.ts
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn u_bar(&self) -> f64 {
        self.u_bar
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// One period of samples, computed with an inverse FFT.
    pub fn period_samples(&self) -> Vec<f64> {
        self.resampled(self.n)
    }

    fn resampled(&self, len: usize) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        buf[1..=self.lines.len()].copy_from_slice(&self.lines);
        FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
        buf.iter().map(|z| z.im).collect()
    }

    /// `periods` concatenated periods.
    pub fn samples(&self) -> Vec<f64> {
        let one = self.period_samples();
        let mut out = Vec::with_capacity(one.len() * self.periods);
        for _ in 0..self.periods {
            out.extend_from_slice(&one);
        }
        out
    }

    /// Continuous-time value by four-point Lagrange interpolation of the
    /// signal sampled at `T_s / 8`.
    pub fn eval(&self, t: f64) -> f64 {
        let table = self.fine.get_or_init(|| self.resampled(self.n * UPSAMPLE));
        let len = table.len();
        let x = t / (self.ts / UPSAMPLE as f64);
        let base = x.floor();
        let u = x - base;
        let i = base.rem_euclid(len as f64) as usize;
        let at = |k: isize| table[(i as isize + k).rem_euclid(len as isize) as usize];
        let (p0, p1, p2, p3) = (at(-1), at(0), at(1), at(2));
        let w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
        let w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
        let w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
        let w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
        w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
    }

    /// Continuous-time value, evaluated by Horner's rule on `e^{j 2π t / T}`.
    pub fn eval_exact(&self, t: f64) -> f64 {
        if self.lines.is_empty() {
            return 0.0;
        }
        let z = Complex64::from_polar(1.0, 2.0 * PI * t / self.period());
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.lines.iter().rev() {
            acc = acc * z + c;
        }
        (acc * z).im
    }
}

/// Piecewise signals switch on the sample grid, continuous ones are evaluated
/// at the exact integration time.
#[derive(Clone, Debug, PartialEq)]
pub enum Signal {
    Constant(f64),
    /// `amplitude` on ticks with `t1 <= n T_s < t2`, zero elsewhere.
    Pulse { t1: f64, t2: f64, amplitude: f64 },
    /// Sample sequence held between ticks, zero past its end.
    Held(Arc<Vec<f64>>),
    Multisine(Arc<Multisine>),
    Sum(Vec<Signal>),
    /// The inner signal on ticks with `start <= n T_s <= end`, zero elsewhere.
    Windowed { inner: Box<Signal>, start: f64, end: f64 },
}

impl Signal {
    pub fn zero() -> Self {
        Signal::Constant(0.0)
    }

    pub fn multisine(ms: Multisine) -> Self {
        Signal::Multisine(Arc::new(ms))
    }

    pub fn held(values: Vec<f64>) -> Self {
        Signal::Held(Arc::new(values))
    }

    /// Zero outside `[start, end]`.
    pub fn windowed(self, start: f64, end: f64) -> Self {
        Signal::Windowed {
            inner: Box::new(self),
            start,
            end,
        }
    }

    /// Value during the sampling interval that starts at tick `n`.
    pub fn eval(&self, t: f64, n: usize, ts: f64) -> f64 {
        let tick = n as f64 * ts;
        let tol = 1e-9 * ts;
        match self {
            Signal::Constant(c) => *c,
            Signal::Pulse { t1, t2, amplitude } => {
                if tick >= t1 - tol && tick < t2 - tol {
                    *amplitude
                } else {
                    0.0
                }
            }
            Signal::Held(values) => values.get(n).copied().unwrap_or(0.0),
            Signal::Multisine(ms) => ms.eval(t),
            Signal::Sum(parts) => parts.iter().map(|p| p.eval(t, n, ts)).sum(),
            Signal::Windowed { inner, start, end } => {
                if tick >= start - tol && tick <= end + tol {
                    inner.eval(t, n, ts)
                } else {
                    0.0
                }
            }
        }
    }

    /// Values at ticks `0..len`. Multisines on a matching sample grid are
    /// tiled from one FFT period.
    pub fn sample(&self, len: usize, ts: f64) -> Vec<f64> {
        match self {
            Signal::Multisine(ms) if (ms.ts() - ts).abs() <= 1e-12 * ts => {
                let one = ms.period_samples();
                (0..len).map(|n| one[n % one.len()]).collect()
            }
            Signal::Sum(parts) => {
                let mut out = vec![0.0; len];
                for p in parts {
                    for (o, v) in out.iter_mut().zip(p.sample(len, ts)) {
                        *o += v;
                    }
                }
                out
            }
            Signal::Windowed { inner, start, end } => {
                let tol = 1e-9 * ts;
                inner
                    .sample(len, ts)
                    .into_iter()
                    .enumerate()
                    .map(|(n, v)| {
                        let tick = n as f64 * ts;
                        if tick >= start - tol && tick <= end + tol {
                            v
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            _ => (0..len).map(|n| self.eval(n as f64 * ts, n, ts)).collect(),
        }
    }

    /// True when the value is constant between ticks.
    pub fn is_piecewise_constant(&self) -> bool {
        match self {
            Signal::Multisine(_) => false,
            Signal::Sum(parts) => parts.iter().all(Signal::is_piecewise_constant),
            Signal::Windowed { inner, .. } => inner.is_piecewise_constant(),
            _ => true,
        }
    }
}

/// Rectangular pulse `(μ(t - t1) - μ(t - t2)) · amplitude`.
pub fn pulse(t1: f64, t2: f64, amplitude: f64) -> Result<Signal> {
    if !(t1 > 0.0 && t2 > t1) {
        return Err(Error::invalid(format!("pulse needs 0 < t1 < t2, got ({t1}, {t2})")));
    }
    Ok(Signal::Pulse { t1, t2, amplitude })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Uniform,
    Chebyshev,
}

/// Constant-reference grid for the static stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub v_min: f64,
    pub v_max: f64,
    pub m: usize,
    pub spacing: Spacing,
}

/// `m` increasing values spanning `[v_min, v_max]`, endpoints included.
/// Chebyshev spacing uses the extrema nodes `mid - half cos(iπ / (m - 1))`.
pub fn constant_grid(spec: &GridSpec) -> Result<Vec<f64>> {
    if spec.m < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    if !(spec.v_min < spec.v_max) {
        return Err(Error::invalid("grid needs v_min < v_max"));
    }
    let m = spec.m;
    let (lo, hi) = (spec.v_min, spec.v_max);
    let grid = match spec.spacing {
        Spacing::Uniform => (0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect(),
        Spacing::Chebyshev => {
            let (mid, half) = ((lo + hi) / 2.0, (hi - lo) / 2.0);
            (0..m)
                .map(|i| mid - half * (PI * i as f64 / (m - 1) as f64).cos())
                .collect()
        }
    };
    Ok(grid)
}
