//! Closed-loop simulation of a Lure plant under a sampled or analog
//! controller, with Gaussian measurement noise.

mod integrator;
mod record;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use integrator::{Dopri5, StepFailure};
pub use record::SampledRecord;

use crate::error::{Error, Result};
use crate::excitation::Signal;
use crate::lti::{RationalTF, StateSpace};
use crate::lure::LureModel;
use crate::nonlinearity::{eval_terms, NlTerm, StaticNL};

/// How the control law reaches the plant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Discrete controller fed by the noisy measurement, zero-order hold on
    /// its output.
    #[default]
    Sampled,
    /// Continuous control law acting on the noiseless output; noise only
    /// corrupts the recorded channels.
    Analog,
}

/// Feedback law producing the plant input `i`.
#[derive(Clone, Debug, PartialEq)]
pub enum Controller {
    /// Prescribed input `i(t)`; no feedback.
    OpenLoop { input: Signal },
    /// `i = k (v_r - v)`.
    Linear { k: f64, reference: Signal },
    /// `i = k (v_r - v) + Σ ŵ_j φ_j(v)`.
    FeedLin {
        k: f64,
        terms: Vec<NlTerm>,
        reference: Signal,
    },
}

impl Controller {
    pub fn linear(k: f64, reference: Signal) -> Self {
        Controller::Linear { k, reference }
    }

    pub fn feedlin(k: f64, terms: Vec<NlTerm>, reference: Signal) -> Result<Self> {
        if !k.is_finite() || terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(Error::invalid("feedback-linearizing coefficients must be finite"));
        }
        Ok(Controller::FeedLin { k, terms, reference })
    }

    /// Reference (or prescribed input for open-loop runs).
    pub fn signal(&self) -> &Signal {
        match self {
            Controller::OpenLoop { input } => input,
            Controller::Linear { reference, .. } | Controller::FeedLin { reference, .. } => reference,
        }
    }

    pub fn gain(&self) -> f64 {
        match self {
            Controller::OpenLoop { .. } => 0.0,
            Controller::Linear { k, .. } | Controller::FeedLin { k, .. } => *k,
        }
    }

    #[inline]
    fn law(&self, r: f64, v: f64) -> f64 {
        match self {
            Controller::OpenLoop { .. } => r,
            Controller::Linear { k, .. } => k * (r - v),
            Controller::FeedLin { k, terms, .. } => k * (r - v) + eval_terms(terms, v),
        }
    }
}

fn default_tol() -> f64 {
    1e-6
}

/// Sampling, integration and noise settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integrator step cap; `ts` must be an integer multiple.
    pub dt_internal: f64,
    /// Controller and measurement sample period.
    pub ts: f64,
    pub duration: f64,
    /// Standard deviation of both measurement noises.
    pub sigma: f64,
    pub seed: u64,
    /// Record the noiseless `v` and `i` alongside the measurements.
    #[serde(default)]
    pub record_truth: bool,
    /// Record the plant state at every tick.
    #[serde(default)]
    pub record_state: bool,
    #[serde(default)]
    pub mode: ControlMode,
    /// Initial state; zero when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "default_tol")]
    pub rtol: f64,
    #[serde(default = "default_tol")]
    pub atol: f64,
}

impl SimConfig {
    pub fn new(ts: f64, duration: f64) -> Self {
        Self {
            dt_internal: ts,
            ts,
            duration,
            sigma: 0.0,
            seed: 0,
            record_truth: false,
            record_state: false,
            mode: ControlMode::Sampled,
            x0: None,
            rtol: default_tol(),
            atol: default_tol(),
        }
    }

    pub fn with_sigma(mut self, sigma: f64, seed: u64) -> Self {
        self.sigma = sigma;
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: ControlMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_truth(mut self) -> Self {
        self.record_truth = true;
        self
    }

    /// Number of recorded samples, `duration / ts`.
    pub fn samples(&self) -> Result<usize> {
        let r = self.duration / self.ts;
        if !(self.ts > 0.0) || !(self.duration > 0.0) || (r - r.round()).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "duration {} must be a positive multiple of ts {}",
                self.duration, self.ts
            )));
        }
        Ok(r.round() as usize)
    }

    fn validate(&self) -> Result<usize> {
        let q = self.ts / self.dt_internal;
        if !(self.dt_internal > 0.0) || q < 1.0 - 1e-9 || (q - q.round()).abs() > 1e-6 {
            return Err(Error::invalid(format!(
                "ts {} must be an integer multiple of dt_internal {}",
                self.ts, self.dt_internal
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and nonnegative"));
        }
        self.samples()
    }
}

/// `ẋ = A x + B (i - h(C x))`, `v = C x`.
#[derive(Clone, Debug, PartialEq)]
pub struct LurePlant {
    ss: StateSpace,
    h: StaticNL,
}

impl LurePlant {
    /// Strictly proper realization with `d = 0`.
    pub fn new(ss: StateSpace, h: StaticNL) -> Result<Self> {
        if ss.d != 0.0 {
            return Err(Error::invalid("plant realization must be strictly proper"));
        }
        Ok(Self { ss, h })
    }

    /// Controllable canonical realization of `g`.
    pub fn from_tf(g: &RationalTF, h: StaticNL) -> Result<Self> {
        if !g.is_zero() && !(g.num_degree() < g.order()) {
            return Err(Error::invalid("plant transfer function must be strictly proper"));
        }
        Self::new(StateSpace::controllable_canonical(g), h)
    }

    /// Modal realization of `g`.
    pub fn modal(g: &RationalTF, h: StaticNL) -> Result<Self> {
        if !(g.num_degree() < g.order()) {
            return Err(Error::invalid("plant transfer function must be strictly proper"));
        }
        Self::new(StateSpace::modal_canonical(g)?, h)
    }

    pub fn from_model(model: &LureModel) -> Result<Self> {
        Self::from_tf(model.g(), model.h().clone())
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.ss
    }

    pub fn nonlinearity(&self) -> &StaticNL {
        &self.h
    }

    pub fn order(&self) -> usize {
        self.ss.order()
    }
}

/// Dense copies of the realization for the right-hand side.
struct Dynamics<'a> {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    h: &'a StaticNL,
}

impl<'a> Dynamics<'a> {
    fn new(plant: &'a LurePlant) -> Self {
        let n = plant.order();
        let ss = &plant.ss;
        Self {
            n,
            a: (0..n * n).map(|k| ss.a[(k / n, k % n)]).collect(),
            b: ss.b.iter().copied().collect(),
            c: ss.c.iter().copied().collect(),
            h: &plant.h,
        }
    }

    #[inline]
    fn output(&self, x: &[f64]) -> f64 {
        self.c.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    #[inline]
    fn rhs(&self, x: &[f64], i: f64, v: f64, dx: &mut [f64]) {
        let u = i - self.h.eval(v);
        for r in 0..self.n {
            let row = &self.a[r * self.n..(r + 1) * self.n];
            dx[r] = row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.b[r] * u;
        }
    }
}

/// Closed-loop run of the model's canonical realization from rest.
pub fn simulate(model: &LureModel, ctrl: &Controller, cfg: &SimConfig) -> Result<SampledRecord> {
    if let (Some(sector), k) = (model.h().declared_sector(), ctrl.gain()) {
        if !matches!(ctrl, Controller::OpenLoop { .. }) && k + sector.rho1 <= 0.0 {
            log::warn!("k + rho1 = {} <= 0: closed loop may have multiple equilibria", k + sector.rho1);
        }
    }
    simulate_plant(&LurePlant::from_model(model)?, ctrl, cfg)
}

/// Open-loop run with a prescribed input.
pub fn simulate_autonomous(model: &LureModel, input: Signal, cfg: &SimConfig) -> Result<SampledRecord> {
    simulate_plant(&LurePlant::from_model(model)?, &Controller::OpenLoop { input }, cfg)
}

/// Run any plant under any controller.
pub fn simulate_plant(plant: &LurePlant, ctrl: &Controller, cfg: &SimConfig) -> Result<SampledRecord> {
    let len = cfg.validate()?;
    let dyn_ = Dynamics::new(plant);
    let n = dyn_.n;
    let mut x = match &cfg.x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::invalid(format!("x0 has {} entries, plant order is {n}", x0.len())))
        }
        Some(x0) => x0.clone(),
        None => vec![0.0; n],
    };
    let ts = cfg.ts;
    let signal = ctrl.signal();
    let r_samples = signal.sample(len, ts);
    let continuous_ref = cfg.mode == ControlMode::Analog && !signal.is_piecewise_constant();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut noise = || -> f64 {
        if cfg.sigma == 0.0 {
            0.0
        } else {
            let z: f64 = StandardNormal.sample(&mut rng);
            cfg.sigma * z
        }
    };

    let mut rec = SampledRecord::with_capacity(ts, cfg.seed, len, cfg.record_truth, cfg.record_state);
    let mut ig = Dopri5::new(n, cfg.rtol, cfg.atol, cfg.dt_internal);
    for k in 0..len {
        let t = k as f64 * ts;
        let v = dyn_.output(&x);
        let e_v = noise();
        let e_i = noise();
        let v_m = v + e_v;
        let r = r_samples[k];
        let i = match cfg.mode {
            ControlMode::Sampled => ctrl.law(r, v_m),
            ControlMode::Analog => ctrl.law(r, v),
        };
        rec.push(r, v_m, i + e_i, v, i, &x);

        let t_next = (k + 1) as f64 * ts;
        let result = match cfg.mode {
            ControlMode::Sampled => ig.integrate(
                |_, x, dx| {
                    let v = dyn_.output(x);
                    dyn_.rhs(x, i, v, dx)
                },
                t,
                t_next,
                &mut x,
            ),
            ControlMode::Analog => ig.integrate(
                |tt, x, dx| {
                    let v = dyn_.output(x);
                    let r = if continuous_ref { signal.eval(tt, k, ts) } else { r };
                    dyn_.rhs(x, ctrl.law(r, v), v, dx)
                },
                t,
                t_next,
                &mut x,
            ),
        };
        result.map_err(|e| match e {
            StepFailure::NonFinite(time) => Error::Numerical {
                time,
                reason: "non-finite state".into(),
            },
            StepFailure::StepTooSmall(time) => Error::Numerical {
                time,
                reason: "step size underflow".into(),
            },
        })?;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Numerical {
                time: t_next,
                reason: "non-finite state".into(),
            });
        }
        if norm > 1e6 {
            return Err(Error::Divergence { time: t_next, norm });
        }
    }
    rec.meta.insert("sim_config".into(), serde_json::to_value(cfg)?);
    Ok(rec)
}

#[cfg(test)]
mod tests;

/// Independent per-stream seed derived from a base seed (splitmix64 mixing).
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
