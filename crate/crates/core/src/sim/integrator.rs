//! Embedded Dormand–Prince 5(4) pair with error-per-step control.

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

#[derive(Debug, Clone, PartialEq)]
pub enum StepFailure {
    /// Non-finite state or derivative at the given time.
    NonFinite(f64),
    /// Step size underflow at the given time.
    StepTooSmall(f64),
}

/// Adaptive integrator that remembers its step size across calls.
#[derive(Debug, Clone)]
pub struct Dopri5 {
    rtol: f64,
    atol: f64,
    h_max: f64,
    h: f64,
    k: [Vec<f64>; 7],
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl Dopri5 {
    pub fn new(dim: usize, rtol: f64, atol: f64, h_max: f64) -> Self {
        Self {
            rtol,
            atol,
            h_max,
            h: h_max,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            y_stage: vec![0.0; dim],
            y_new: vec![0.0; dim],
        }
    }

    /// Advance `y` from `t0` to exactly `t1`.
    pub fn integrate<F>(&mut self, mut f: F, t0: f64, t1: f64, y: &mut [f64]) -> Result<(), StepFailure>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let dim = y.len();
        let mut t = t0;
        f(t, y, &mut self.k[0]);
        if self.k[0].iter().any(|v| !v.is_finite()) {
            return Err(StepFailure::NonFinite(t));
        }
        let span = (t1 - t0).abs().max(1e-300);
        while t < t1 {
            let remaining = t1 - t;
            let mut h = self.h.min(self.h_max);
            let last = h >= remaining * (1.0 - 1e-10) || remaining - h < 1e-9 * span;
            if last {
                h = remaining;
            }
            for s in 1..7 {
                for i in 0..dim {
                    let mut acc = y[i];
                    for (j, a) in A[s][..s].iter().enumerate() {
                        acc += h * a * self.k[j][i];
                    }
                    self.y_stage[i] = acc;
                }
                f(t + C[s] * h, &self.y_stage, &mut self.k[s]);
                if s == 6 {
                    self.y_new.copy_from_slice(&self.y_stage);
                }
            }
            let mut err = 0.0;
            for i in 0..dim {
                let mut e = 0.0;
                for (j, w) in E.iter().enumerate() {
                    e += w * self.k[j][i];
                }
                let scale = self.atol + self.rtol * y[i].abs().max(self.y_new[i].abs());
                err += (h * e / scale).powi(2);
            }
            let err = (err / dim.max(1) as f64).sqrt();
            let err = if err.is_nan() { f64::INFINITY } else { err };
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&self.y_new);
                self.k.swap(0, 6);
                if !last || h >= self.h {
                    self.h = (h * factor).min(self.h_max);
                }
            } else {
                self.h = h * factor.min(1.0);
                if self.h < 1e-14 * t.abs().max(1.0) {
                    return Err(StepFailure::StepTooSmall(t));
                }
            }
        }
        Ok(())
    }
}
