use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{poly, RationalTF};
use crate::error::{Error, Result};

/// Single-input single-output state-space realization `(A, B, C, D)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::invalid(format!(
                "inconsistent state-space dimensions: A {}x{}, B {}, C {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (jωI - A)^{-1} B + D`.
    pub fn frequency_response(&self, omega: f64) -> Result<Complex64> {
        let n = self.order();
        let s = Complex64::new(0.0, omega);
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.a[(i, j)], 0.0)
        });
        let rhs = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[i], 0.0));
        let x = m.lu().solve(&rhs).ok_or(Error::DegenerateEvaluation {
            omega,
            magnitude: 0.0,
        })?;
        let y: Complex64 = (0..n).map(|i| x[i] * self.c[i]).sum();
        Ok(y + self.d)
    }

    /// Controllable canonical (companion) form of a proper transfer function.
    pub fn controllable_canonical(tf: &RationalTF) -> Self {
        let den = tf.den();
        let n = tf.order();
        let mut num = vec![0.0; n + 1 - tf.num().len()];
        num.extend_from_slice(tf.num());
        let d = num[0];
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n - 1 {
            a[(i, i + 1)] = 1.0;
        }
        // x1 is the lowest-order state; the last row carries -a_0 .. -a_{n-1}.
        for j in 0..n {
            a[(n - 1, j)] = -den[n - j];
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        let c = RowDVector::from_fn(n, |_, j| num[n - j] - d * den[n - j]);
        Self { a, b, c, d }
    }

    /// Modal canonical form: 1x1 blocks for real poles, `[[σ, ω], [-ω, σ]]`
    /// blocks for complex pairs `σ ± jω`.
    ///
    /// Real modes come first (largest pole first), then complex pairs ordered
    /// by decreasing real part.
    pub fn modal_canonical(tf: &RationalTF) -> Result<Self> {
        let n = tf.order();
        let den = tf.den();
        let mut num = vec![0.0; n + 1 - tf.num().len()];
        num.extend_from_slice(tf.num());
        let d = num[0];
        let strict_num = poly::sub(&num, &poly::scale(den, d));
        let dden = poly::derivative(den);

        let poles = tf.poles()?;
        let mut min_sep = f64::INFINITY;
        for i in 0..poles.len() {
            for j in i + 1..poles.len() {
                let scale = 1.0f64.max(poles[i].norm());
                min_sep = min_sep.min((poles[i] - poles[j]).norm() / scale);
            }
        }
        if min_sep < 1e-8 {
            return Err(Error::RepeatedPoles {
                separation: min_sep,
            });
        }

        let imag_tol = |p: &Complex64| 1e-9 * 1.0f64.max(p.norm());
        let mut real: Vec<f64> = poles
            .iter()
            .filter(|p| p.im.abs() <= imag_tol(p))
            .map(|p| p.re)
            .collect();
        let mut pairs: Vec<Complex64> = poles
            .iter()
            .filter(|p| p.im > imag_tol(p))
            .copied()
            .collect();
        if real.len() + 2 * pairs.len() != n {
            return Err(Error::EigenSolver(n));
        }
        real.sort_by(|a, b| b.total_cmp(a));
        pairs.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));

        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        let mut c = RowDVector::zeros(n);
        let mut k = 0;
        for &p in &real {
            let r = poly::eval(&strict_num, p) / poly::eval(&dden, p);
            a[(k, k)] = p;
            b[k] = 1.0;
            c[k] = r;
            k += 1;
        }
        for &p in &pairs {
            let r = poly::eval_complex(&strict_num, p) / poly::eval_complex(&dden, p);
            let (sigma, omega) = (p.re, p.im);
            a[(k, k)] = sigma;
            a[(k, k + 1)] = omega;
            a[(k + 1, k)] = -omega;
            a[(k + 1, k + 1)] = sigma;
            b[k + 1] = 1.0;
            c[k] = -2.0 * r.im;
            c[k + 1] = 2.0 * r.re;
            k += 2;
        }
        Ok(Self { a, b, c, d })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rel_err(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn first_order_modal_form() {
        let tf = RationalTF::new(vec![1.0], vec![1.0, 1.0]).unwrap();
        let ss = StateSpace::modal_canonical(&tf).unwrap();
        assert_eq!(ss.a[(0, 0)], -1.0);
        assert_relative_eq!(ss.c[0] * ss.b[0], 1.0);
    }

    #[test]
    fn complex_pair_block() {
        let tf = RationalTF::new(vec![1.0], vec![1.0, 2.0, 5.0]).unwrap();
        let ss = StateSpace::modal_canonical(&tf).unwrap();
        assert_relative_eq!(ss.a[(0, 0)], -1.0, epsilon = 1e-12);
        assert_relative_eq!(ss.a[(0, 1)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(ss.a[(1, 0)], -2.0, epsilon = 1e-12);
        assert_relative_eq!(ss.a[(1, 1)], -1.0, epsilon = 1e-12);
        for w in [0.0, 0.5, 2.0, 30.0] {
            let got = ss.frequency_response(w).unwrap();
            assert!(rel_err(got, tf.eval_freq(w).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn repeated_poles_rejected() {
        let tf = RationalTF::new(vec![1.0], vec![1.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            StateSpace::modal_canonical(&tf),
            Err(Error::RepeatedPoles { .. })
        ));
    }

    #[test]
    fn biproper_feedthrough() {
        // (s + 3)/(s + 1) = 1 + 2/(s + 1)
        let tf = RationalTF::new(vec![1.0, 3.0], vec![1.0, 1.0]).unwrap();
        for ss in [
            StateSpace::controllable_canonical(&tf),
            StateSpace::modal_canonical(&tf).unwrap(),
        ] {
            assert_eq!(ss.d, 1.0);
            for w in [0.0, 1.0, 10.0] {
                assert!(rel_err(ss.frequency_response(w).unwrap(), tf.eval_freq(w).unwrap()) < 1e-12);
            }
        }
    }

    #[test]
    fn canonical_forms_agree_on_third_order() {
        let tf = RationalTF::new(vec![10.0, 3.5, 35.0], vec![1.0, 7.35, 3.5, 24.5]).unwrap();
        let cc = StateSpace::controllable_canonical(&tf);
        let modal = StateSpace::modal_canonical(&tf).unwrap();
        assert_eq!(modal.a[(1, 2)].signum(), 1.0);
        for w in [0.0, 0.1, 1.83, 7.0, 100.0] {
            let expected = tf.eval_freq(w).unwrap();
            assert!(rel_err(cc.frequency_response(w).unwrap(), expected) < 1e-8);
            assert!(rel_err(modal.frequency_response(w).unwrap(), expected) < 1e-8);
        }
    }
}
