use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly;
use crate::error::{Error, Result};

/// Real-rational transfer function `N(s)/D(s)`.
///
/// Coefficients are stored in descending powers of `s`. The denominator is
/// normalized to be monic and has degree at least one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfRepr", into = "TfRepr")]
pub struct RationalTF {
    num: Vec<f64>,
    den: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TfRepr {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl TryFrom<TfRepr> for RationalTF {
    type Error = Error;

    fn try_from(repr: TfRepr) -> Result<Self> {
        RationalTF::new(repr.num, repr.den)
    }
}

impl From<RationalTF> for TfRepr {
    fn from(tf: RationalTF) -> Self {
        TfRepr {
            num: tf.num,
            den: tf.den,
        }
    }
}

impl RationalTF {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.is_empty() || den.is_empty() {
            return Err(Error::invalid("empty coefficient list"));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite transfer-function coefficient"));
        }
        let den = poly::trim(&den);
        let num = poly::trim(&num);
        if den.len() < 2 {
            return Err(Error::invalid("denominator degree must be at least 1"));
        }
        if num.len() > den.len() {
            return Err(Error::invalid("improper transfer function"));
        }
        let lead = den[0];
        Ok(Self {
            num: poly::trim(&poly::scale(&num, 1.0 / lead)),
            den: poly::scale(&den, 1.0 / lead),
        })
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        poly::is_zero(&self.num)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.is_zero() || self.num_degree() < self.order()
    }

    pub fn relative_degree(&self) -> usize {
        self.order() - self.num_degree()
    }

    /// `G(jω)`.
    pub fn eval_freq(&self, omega: f64) -> Result<Complex64> {
        self.eval_s(Complex64::new(0.0, omega))
            .map_err(|magnitude| Error::DegenerateEvaluation { omega, magnitude })
    }

    fn eval_s(&self, s: Complex64) -> std::result::Result<Complex64, f64> {
        let d = poly::eval_complex(&self.den, s);
        if d.norm() < 1e-14 {
            return Err(d.norm());
        }
        Ok(poly::eval_complex(&self.num, s) / d)
    }

    /// Static gain `G(0)`.
    pub fn dc_gain(&self) -> Result<f64> {
        Ok(self.eval_freq(0.0)?.re)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            num: poly::trim(&poly::scale(&self.num, alpha)),
            den: self.den.clone(),
        }
    }

    /// Denominator roots from the eigenvalues of the companion matrix.
    pub fn poles(&self) -> Result<Vec<Complex64>> {
        companion_roots(&self.den)
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.len() < 2 {
            return Ok(Vec::new());
        }
        let monic = poly::scale(&self.num, 1.0 / self.num[0]);
        companion_roots(&monic)
    }

    /// All poles satisfy `Re p < -1e-9`.
    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(self.max_pole_real_part()? < -1e-9)
    }

    pub fn max_pole_real_part(&self) -> Result<f64> {
        Ok(self
            .poles()?
            .iter()
            .map(|p| p.re)
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub(crate) fn require_hurwitz(&self) -> Result<()> {
        let max_real_part = self.max_pole_real_part()?;
        if max_real_part < -1e-9 {
            Ok(())
        } else {
            Err(Error::NotHurwitz { max_real_part })
        }
    }
}

impl std::fmt::Display for RationalTF {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "({}) / ({})",
            format_poly(&self.num),
            format_poly(&self.den)
        )
    }
}

fn format_poly(p: &[f64]) -> String {
    let n = p.len() - 1;
    let terms: Vec<String> = p
        .iter()
        .enumerate()
        .filter(|(i, &c)| c != 0.0 || (p.len() == 1 && *i == 0))
        .map(|(i, &c)| match n - i {
            0 => format!("{c}"),
            1 => format!("{c} s"),
            k => format!("{c} s^{k}"),
        })
        .collect();
    terms.join(" + ")
}

/// Roots of a monic polynomial.
pub(crate) fn companion_roots(monic: &[f64]) -> Result<Vec<Complex64>> {
    let n = monic.len() - 1;
    match n {
        0 => Ok(Vec::new()),
        1 => Ok(vec![Complex64::new(-monic[1] / monic[0], 0.0)]),
        _ => {
            let lead = monic[0];
            let mut c = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                c[(0, j)] = -monic[j + 1] / lead;
            }
            for i in 1..n {
                c[(i, i - 1)] = 1.0;
            }
            let schur = nalgebra::linalg::Schur::try_new(c, f64::EPSILON, 10_000)
                .ok_or(Error::EigenSolver(n))?;
            Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| Complex64::new(z.re, z.im))
                .collect())
        }
    }
}
