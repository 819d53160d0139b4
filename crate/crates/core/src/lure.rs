//! The feedback interconnection of a positive-real `G` with a static `h`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{check_positive_real, default_grid, poly, RationalTF};
use crate::nonlinearity::StaticNL;

/// `G` in negative feedback with `h`: `v = G (i - h(v))`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LureModel {
    g: RationalTF,
    h: StaticNL,
}

#[derive(Deserialize)]
struct ModelRepr {
    g: RationalTF,
    h: StaticNL,
}

impl<'de> Deserialize<'de> for LureModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ModelRepr::deserialize(d)?;
        LureModel::new(r.g, r.h).map_err(serde::de::Error::custom)
    }
}

impl LureModel {
    /// Requires `G` Hurwitz, positive real, `G(0) > 0` and relative degree one.
    pub fn new(g: RationalTF, h: StaticNL) -> Result<Self> {
        if g.is_zero() || g.relative_degree() != 1 {
            return Err(Error::invalid("G must have relative degree one"));
        }
        let report = check_positive_real(&g, &default_grid())?;
        if !report.ok {
            return Err(Error::invalid(format!(
                "G is not positive real (min Re G(jw) = {} at w = {}, G(0) = {})",
                report.min_re, report.omega_at_min, report.dc_gain
            )));
        }
        Ok(Self { g, h })
    }

    /// `"fhn"` or `"chua"` with the published parameter values.
    pub fn builtin(name: &str) -> Result<Self> {
        let g = match name {
            "fhn" => RationalTF::new(vec![20.0, 15.0], vec![1.0, 0.75, 20.0])?,
            "chua" => chua_tf(0.1, 2.0, 1.0 / 7.0, 0.7)?,
            other => return Err(Error::UnknownModel(other.to_string())),
        };
        Self::new(g, StaticNL::builtin(name)?)
    }

    pub fn g(&self) -> &RationalTF {
        &self.g
    }

    pub fn h(&self) -> &StaticNL {
        &self.h
    }

    /// Constant input that holds the output at `v`: `v / G(0) + h(v)`.
    pub fn i_infinity(&self, v: f64) -> f64 {
        v / self.dc_gain() + self.h.eval(v)
    }

    pub fn dc_gain(&self) -> f64 {
        self.g.dc_gain().expect("validated model has a finite static gain")
    }

    /// Unique equilibrium output under `i = k (v_ref - v)`.
    pub fn solve_equilibrium(&self, k: f64, v_ref: f64, tol: f64) -> Result<f64> {
        let inv_g0 = 1.0 / self.dc_gain();
        let h = &self.h;
        let f = |v: f64| v * inv_g0 + h.eval(v) + k * v - k * v_ref;
        let df = |v: f64| inv_g0 + h.derivative(v) + k;
        solve_monotone(f, df, v_ref, tol).ok_or(Error::BracketFailure { v_ref })
    }
}

/// Circuit transfer function `(l c2 s² + l r s + 1) / (l c1 c2 s³ + l r (c1 + c2) s² + c1 s + r)`.
pub fn chua_tf(c1: f64, c2: f64, l: f64, r: f64) -> Result<RationalTF> {
    RationalTF::new(
        vec![l * c2, l * r, 1.0],
        vec![l * c1 * c2, l * r * (c1 + c2), c1, r],
    )
}

/// Root of an increasing scalar map: geometric bracket expansion, bisection,
/// then Newton polish kept inside the bracket.
fn solve_monotone(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    center: f64,
    tol: f64,
) -> Option<f64> {
    let f0 = f(center);
    if f0 == 0.0 {
        return Some(center);
    }
    let span = 1.0f64.max(center.abs());
    let mut width = 10.0 * span;
    let (mut lo, mut hi);
    let mut tries = 0;
    loop {
        lo = center - width;
        hi = center + width;
        if f(lo) < 0.0 && f(hi) > 0.0 {
            break;
        }
        tries += 1;
        if tries > 40 || !width.is_finite() {
            return None;
        }
        width *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * span {
            break;
        }
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..50 {
        let r = f(v);
        if r.abs() < tol.min(1e-14 * span) {
            break;
        }
        let d = df(v);
        let next = v - r / d;
        if !(d > 0.0) || next < lo || next > hi {
            break;
        }
        if next == v {
            break;
        }
        v = next;
    }
    (f(v).abs() < tol).then_some(v)
}

/// All roots of an arbitrary scalar map on `[lo, hi]`, located by sign changes
/// on a uniform grid and refined by bisection.
pub fn scalar_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut roots = Vec::new();
    for w in xs.windows(2) {
        let (mut a, mut b) = (w[0], w[1]);
        let (fa, fb) = (f(a), f(b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb >= 0.0 {
            continue;
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if (f(m) < 0.0) == (fa < 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if f(hi) == 0.0 {
        roots.push(hi);
    }
    roots
}

/// `G_a = G / (1 + a1 G) = N / (D + a1 N)`, no stability requirement.
pub fn lumped_tf(g: &RationalTF, a1: f64) -> Result<RationalTF> {
    let den = poly::add(g.den(), &poly::scale(g.num(), a1));
    RationalTF::new(g.num().to_vec(), den)
}

/// `G_k = k G_a / (1 + k G_a) = k N / (D + (a1 + k) N)`, which must be stable.
pub fn closed_loop_tf(g: &RationalTF, a1: f64, k: f64) -> Result<RationalTF> {
    let den = poly::add(g.den(), &poly::scale(g.num(), a1 + k));
    let gk = RationalTF::new(poly::scale(g.num(), k), den)?;
    let max_real_part = gk.max_pole_real_part()?;
    if max_real_part >= -1e-9 {
        return Err(Error::UnstableClosedLoop { max_real_part });
    }
    Ok(gk)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn builtins_validate() {
        let fhn = LureModel::builtin("fhn").unwrap();
        assert_relative_eq!(fhn.dc_gain(), 0.75, epsilon = 1e-15);
        let chua = LureModel::builtin("chua").unwrap();
        assert_relative_eq!(chua.dc_gain(), 1.0 / 0.7, epsilon = 1e-12);
        let expected_num = [10.0, 3.5, 35.0];
        let expected_den = [1.0, 7.35, 3.5, 24.5];
        for (a, b) in chua.g().num().iter().zip(expected_num) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        for (a, b) in chua.g().den().iter().zip(expected_den) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert!(matches!(LureModel::builtin("x"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn rejects_non_positive_real() {
        let g = RationalTF::new(vec![-1.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        assert!(LureModel::new(g, StaticNL::zero()).is_err());
        let g = RationalTF::new(vec![1.0], vec![1.0, 3.0, 2.0]).unwrap();
        assert!(LureModel::new(g, StaticNL::zero()).is_err());
    }

    #[test]
    fn i_infinity_values() {
        let fhn = LureModel::builtin("fhn").unwrap();
        assert_eq!(fhn.i_infinity(0.0), 0.0);
        assert_relative_eq!(fhn.i_infinity(1.0), 2.0 / 3.0, epsilon = 1e-14);
        let chua = LureModel::builtin("chua").unwrap();
        assert_relative_eq!(chua.i_infinity(1.0), -3.3, epsilon = 1e-12);
    }

    #[test]
    fn equilibria() {
        let fhn = LureModel::builtin("fhn").unwrap();
        assert_eq!(fhn.solve_equilibrium(1.5, 0.0, 1e-12).unwrap(), 0.0);
        let v = fhn.solve_equilibrium(1.5, 2.0, 1e-12).unwrap();
        // Independent oracle: residual of v/3 + v³/3 + 1.5 v - 3.
        assert!((v / 3.0 + v.powi(3) / 3.0 + 1.5 * v - 3.0).abs() < 1e-12);

        let chua = LureModel::builtin("chua").unwrap();
        let v = chua.solve_equilibrium(5.0, 1.0, 1e-12).unwrap();
        let branch = if v.abs() < 1.0 { -4.0 * v } else { -0.1 * (v - v.signum()) - 4.0 * v.signum() };
        assert!((0.7 * v + branch + 5.0 * v - 5.0).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_map_is_monotone() {
        for (name, k) in [("fhn", 1.5), ("chua", 5.0)] {
            let m = LureModel::builtin(name).unwrap();
            let vs: Vec<f64> = (0..=80)
                .map(|i| m.solve_equilibrium(k, -4.0 + 0.1 * i as f64, 1e-12).unwrap())
                .collect();
            assert!(vs.windows(2).all(|w| w[1] > w[0]), "{name}");
            for (i, &v) in vs.iter().enumerate() {
                let vr = -4.0 + 0.1 * i as f64;
                assert!((m.i_infinity(v) + k * v - k * vr).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn bracket_failure_for_non_monotone_map() {
        let g = RationalTF::new(vec![20.0, 15.0], vec![1.0, 0.75, 20.0]).unwrap();
        let m = LureModel::new(g, StaticNL::linear(-5.0)).unwrap();
        assert!(matches!(
            m.solve_equilibrium(1.0, 1.0, 1e-12),
            Err(Error::BracketFailure { .. })
        ));
    }

    #[test]
    fn closed_loop_examples() {
        let fhn = LureModel::builtin("fhn").unwrap();
        let zero = closed_loop_tf(fhn.g(), 0.0, 0.0).unwrap();
        assert!(zero.is_zero());

        let gk = closed_loop_tf(fhn.g(), -1.0, 1.5).unwrap();
        // D + 0.5 N = s² + (0.75 + 10) s + (20 + 7.5).
        assert_eq!(gk.num(), &[30.0, 22.5]);
        assert_eq!(gk.den(), &[1.0, 10.75, 27.5]);

        assert!(matches!(
            closed_loop_tf(fhn.g(), -1.0, -5.0),
            Err(Error::UnstableClosedLoop { .. })
        ));
    }

    #[test]
    fn closed_loops_stable_for_design_gains() {
        for (name, a1, k0) in [("fhn", -1.0, 1.5), ("chua", -4.0, 5.0)] {
            let m = LureModel::builtin(name).unwrap();
            for dk in [0.0, 0.5, 2.0, 10.0] {
                let gk = closed_loop_tf(m.g(), a1, k0 + dk).unwrap();
                assert!(gk.poles().unwrap().iter().all(|p| p.re < 0.0));
            }
        }
    }

    #[test]
    fn chua_open_loop_equilibria() {
        let m = LureModel::builtin("chua").unwrap();
        let roots = scalar_roots(|v| m.i_infinity(v), -15.0, 15.0, 3001);
        assert_eq!(roots.len(), 3);
        assert_relative_eq!(roots[0], -6.5, epsilon = 1e-9);
        assert_relative_eq!(roots[2], 6.5, epsilon = 1e-9);
    }

    #[test]
    fn serde_shape() {
        let m = LureModel::builtin("fhn").unwrap();
        let json = serde_json::to_value(&m).unwrap();
        assert!(json.get("g").is_some() && json.get("h").is_some());
        let back: LureModel = serde_json::from_value(json).unwrap();
        assert_eq!(back, m);
    }
}
