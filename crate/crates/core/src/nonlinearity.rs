//! Static characteristics `h(v) = a1 v + Σ a_j φ_j(v)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::SectorBounds;

/// Basis function of the nonlinear expansion. Every variant vanishes at zero.
#[derive(Clone, Debug, PartialEq)]
pub enum BasisFn {
    /// `v^power`, `power >= 2`.
    Monomial(u32),
    /// `max{0, v - b}`, `b >= 0`.
    HingePos(f64),
    /// `max{0, -(v + b)}`, `b >= 0`.
    HingeNeg(f64),
    Tabulated(Tabulated),
}

impl BasisFn {
    pub fn monomial(power: u32) -> Result<Self> {
        if power < 2 {
            return Err(Error::invalid("monomial basis needs power >= 2"));
        }
        Ok(BasisFn::Monomial(power))
    }

    pub fn hinge_pos(b: f64) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid("hinge breakpoint must be finite and >= 0"));
        }
        Ok(BasisFn::HingePos(b))
    }

    pub fn hinge_neg(b: f64) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::invalid("hinge breakpoint must be finite and >= 0"));
        }
        Ok(BasisFn::HingeNeg(b))
    }

    pub fn eval(&self, v: f64) -> f64 {
        match self {
            BasisFn::Monomial(p) => v.powi(*p as i32),
            BasisFn::HingePos(b) => (v - b).max(0.0),
            BasisFn::HingeNeg(b) => (-(v + b)).max(0.0),
            BasisFn::Tabulated(t) => t.eval(v),
        }
    }

    /// Derivative; right derivative at hinge breakpoints.
    pub fn derivative(&self, v: f64) -> f64 {
        match self {
            BasisFn::Monomial(p) => *p as f64 * v.powi(*p as i32 - 1),
            BasisFn::HingePos(b) => {
                if v >= *b {
                    1.0
                } else {
                    0.0
                }
            }
            BasisFn::HingeNeg(b) => {
                if v < -*b {
                    -1.0
                } else {
                    0.0
                }
            }
            BasisFn::Tabulated(t) => t.derivative(v),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BasisFn::Monomial(_) => "monomial",
            BasisFn::HingePos(_) => "hinge_pos",
            BasisFn::HingeNeg(_) => "hinge_neg",
            BasisFn::Tabulated(_) => "tabulated",
        }
    }
}

impl std::fmt::Display for BasisFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisFn::Monomial(p) => write!(f, "v^{p}"),
            BasisFn::HingePos(b) => write!(f, "max{{0, v - {b}}}"),
            BasisFn::HingeNeg(b) => write!(f, "max{{0, -(v + {b})}}"),
            BasisFn::Tabulated(t) => write!(f, "table[{} pts]", t.x.len()),
        }
    }
}

/// Monotone piecewise-cubic (Fritsch–Carlson) interpolant, extrapolated
/// linearly outside the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct Tabulated {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<TableRepr> for Tabulated {
    type Error = Error;
    fn try_from(r: TableRepr) -> Result<Self> {
        Tabulated::new(r.x, r.y)
    }
}

impl From<Tabulated> for TableRepr {
    fn from(t: Tabulated) -> Self {
        TableRepr { x: t.x, y: t.y }
    }
}

impl Tabulated {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::invalid("table needs >= 2 points and equal lengths"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("table abscissae must be strictly increasing and finite"));
        }
        let n = x.len();
        let delta: Vec<f64> = (0..n - 1)
            .map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            .collect();
        let mut m = vec![0.0; n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            m[i] = if delta[i - 1] * delta[i] <= 0.0 {
                0.0
            } else {
                (delta[i - 1] + delta[i]) / 2.0
            };
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / delta[i];
            let b = m[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * delta[i];
                m[i + 1] = tau * b * delta[i];
            }
        }
        let table = Self { x, y, slopes: m };
        let at_zero = table.eval(0.0);
        if at_zero.abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "tabulated basis must vanish at 0 (got {at_zero})"
            )));
        }
        Ok(table)
    }

    fn segment(&self, v: f64) -> usize {
        match self.x.partition_point(|&xi| xi <= v) {
            0 => 0,
            p => (p - 1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v <= self.x[0] {
            return self.y[0] + self.slopes[0] * (v - self.x[0]);
        }
        if v >= self.x[n - 1] {
            return self.y[n - 1] + self.slopes[n - 1] * (v - self.x[n - 1]);
        }
        let i = self.segment(v);
        let h = self.x[i + 1] - self.x[i];
        let t = (v - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.y[i]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
            + (-2.0 * t3 + 3.0 * t2) * self.y[i + 1]
            + (t3 - t2) * h * self.slopes[i + 1]
    }

    pub fn derivative(&self, v: f64) -> f64 {
        let n = self.x.len();
        if v <= self.x[0] {
            return self.slopes[0];
        }
        if v >= self.x[n - 1] {
            return self.slopes[n - 1];
        }
        let i = self.segment(v);
        let h = self.x[i + 1] - self.x[i];
        let t = (v - self.x[i]) / h;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.y[i]
            + (3.0 * t2 - 4.0 * t + 1.0) * h * self.slopes[i]
            + (-6.0 * t2 + 6.0 * t) * self.y[i + 1]
            + (3.0 * t2 - 2.0 * t) * h * self.slopes[i + 1])
            / h
    }
}

/// One `coeff * φ(v)` term.
#[derive(Clone, Debug, PartialEq)]
pub struct NlTerm {
    pub coeff: f64,
    pub basis: BasisFn,
}

impl NlTerm {
    pub fn new(coeff: f64, basis: BasisFn) -> Self {
        Self { coeff, basis }
    }
}

pub fn eval_terms(terms: &[NlTerm], v: f64) -> f64 {
    terms.iter().map(|t| t.coeff * t.basis.eval(v)).sum()
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("degenerate interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn linspace(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Static nonlinearity `h(v) = a1 v + Σ a_j φ_j(v)` with its declared slope
/// bounds on a bounded domain of validity.
///
/// Gain shifts are tracked separately from the base linear coefficient so
/// that shifting by `k` and then by `-k` restores the original map bit for
/// bit.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticNL {
    a1: f64,
    shift: f64,
    terms: Vec<NlTerm>,
    sector: Option<SectorBounds>,
    domain: Interval,
}

impl StaticNL {
    pub fn new(
        a1: f64,
        terms: Vec<NlTerm>,
        sector: Option<SectorBounds>,
        domain: Interval,
    ) -> Result<Self> {
        if !a1.is_finite() || terms.iter().any(|t| !t.coeff.is_finite()) {
            return Err(Error::invalid("non-finite nonlinearity coefficient"));
        }
        let nl = Self {
            a1,
            shift: 0.0,
            terms,
            sector,
            domain,
        };
        if let Some(declared) = sector {
            let observed = empirical_sector(&nl, domain, 2001)?;
            if observed.rho1 < declared.rho1 - 1e-9 || observed.rho2 > declared.rho2 + 1e-9 {
                return Err(Error::invalid(format!(
                    "declared sector ({}, {}) does not contain observed slopes ({}, {})",
                    declared.rho1, declared.rho2, observed.rho1, observed.rho2
                )));
            }
        }
        Ok(nl)
    }

    /// Purely linear map `a1 v`.
    pub fn linear(a1: f64) -> Self {
        Self {
            a1,
            shift: 0.0,
            terms: Vec::new(),
            sector: Some(SectorBounds { rho1: a1, rho2: a1 }),
            domain: Interval { lo: -10.0, hi: 10.0 },
        }
    }

    /// `h ≡ 0`.
    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    /// Nonlinear terms only, without a declared sector.
    pub fn from_terms(terms: Vec<NlTerm>, domain: Interval) -> Result<Self> {
        Self::new(0.0, terms, None, domain)
    }

    /// The published characteristics: `"fhn"` is `-v + v³/3` and `"chua"` the
    /// three-segment diode written in the hinge basis.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "fhn" => Self::new(
                -1.0,
                vec![NlTerm::new(1.0 / 3.0, BasisFn::Monomial(3))],
                Some(SectorBounds { rho1: -1.0, rho2: 8.0 }),
                Interval { lo: -3.0, hi: 3.0 },
            ),
            "chua" => Self::new(
                -4.0,
                vec![
                    NlTerm::new(3.9, BasisFn::HingePos(1.0)),
                    NlTerm::new(-3.9, BasisFn::HingeNeg(1.0)),
                ],
                Some(SectorBounds { rho1: -4.0, rho2: -0.1 }),
                Interval { lo: -15.0, hi: 15.0 },
            ),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.a1() * v + eval_terms(&self.terms, v)
    }

    pub fn derivative(&self, v: f64) -> f64 {
        self.a1()
            + self
                .terms
                .iter()
                .map(|t| t.coeff * t.basis.derivative(v))
                .sum::<f64>()
    }

    /// Linear coefficient including any gain shift.
    pub fn a1(&self) -> f64 {
        self.a1 + self.shift
    }

    pub fn terms(&self) -> &[NlTerm] {
        &self.terms
    }

    pub fn declared_sector(&self) -> Option<SectorBounds> {
        self.sector.map(|s| s.shifted(self.shift))
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// `h_k(v) = h(v) + k v`.
    pub fn gain_shift(&self, k: f64) -> Self {
        Self {
            shift: self.shift + k,
            ..self.clone()
        }
    }

    /// Same terms with the linear coefficient removed.
    pub fn nonlinear_part(&self) -> Self {
        Self {
            a1: 0.0,
            shift: 0.0,
            terms: self.terms.clone(),
            sector: None,
            domain: self.domain,
        }
    }
}

impl std::fmt::Display for StaticNL {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} v", self.a1())?;
        for t in &self.terms {
            write!(f, " + {} {}", t.coeff, t.basis)?;
        }
        Ok(())
    }
}

/// Extreme difference quotients of `h` on a uniform grid over `interval`.
///
/// Adjacent-point chords are combined with the derivative at every grid point;
/// every pairwise chord is an average of these slopes, so the result bounds the
/// exhaustive pairwise search as well.
pub fn empirical_sector(nl: &StaticNL, interval: Interval, grid_points: usize) -> Result<SectorBounds> {
    if grid_points < 2 {
        return Err(Error::invalid("grid_points must be at least 2"));
    }
    let interval = Interval::new(interval.lo, interval.hi)?;
    let xs = interval.linspace(grid_points);
    let ys: Vec<f64> = xs.iter().map(|&v| nl.eval(v)).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..grid_points - 1 {
        let s = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    for (i, &v) in xs.iter().enumerate() {
        // Endpoint derivatives are one-sided towards the interior.
        let d = if i + 1 == grid_points { left_derivative(nl, v) } else { nl.derivative(v) };
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok(SectorBounds { rho1: lo, rho2: hi })
}

fn left_derivative(nl: &StaticNL, v: f64) -> f64 {
    let eps = 1e-9 * (1.0 + v.abs());
    nl.derivative(v - eps)
}

// Serialized as `{a1, terms: [{coeff, kind, param}], sector, domain}`.

#[derive(Serialize, Deserialize)]
struct TermRepr {
    coeff: f64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    table: Option<Tabulated>,
}

#[derive(Serialize, Deserialize)]
struct NlRepr {
    a1: f64,
    #[serde(default)]
    terms: Vec<TermRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sector: Option<SectorBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<Interval>,
}

impl TryFrom<TermRepr> for NlTerm {
    type Error = Error;
    fn try_from(t: TermRepr) -> Result<Self> {
        let need = |p: Option<f64>| p.ok_or_else(|| Error::invalid(format!("{} term needs a param", t.kind)));
        let basis = match t.kind.as_str() {
            "monomial" => {
                let p = need(t.param)?;
                if p.fract() != 0.0 || p < 2.0 {
                    return Err(Error::invalid("monomial power must be an integer >= 2"));
                }
                BasisFn::Monomial(p as u32)
            }
            "hinge_pos" => BasisFn::hinge_pos(need(t.param)?)?,
            "hinge_neg" => BasisFn::hinge_neg(need(t.param)?)?,
            "tabulated" => BasisFn::Tabulated(
                t.table
                    .ok_or_else(|| Error::invalid("tabulated term needs a table"))?,
            ),
            other => return Err(Error::invalid(format!("unknown basis kind '{other}'"))),
        };
        Ok(NlTerm::new(t.coeff, basis))
    }
}

impl From<&NlTerm> for TermRepr {
    fn from(t: &NlTerm) -> Self {
        let (param, table) = match &t.basis {
            BasisFn::Monomial(p) => (Some(*p as f64), None),
            BasisFn::HingePos(b) | BasisFn::HingeNeg(b) => (Some(*b), None),
            BasisFn::Tabulated(tab) => (None, Some(tab.clone())),
        };
        TermRepr {
            coeff: t.coeff,
            kind: t.basis.kind().to_string(),
            param,
            table,
        }
    }
}

impl Serialize for NlTerm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TermRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for NlTerm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        TermRepr::deserialize(d)?
            .try_into()
            .map_err(serde::de::Error::custom)
    }
}

impl Serialize for BasisFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut repr = TermRepr::from(&NlTerm::new(1.0, self.clone()));
        repr.coeff = 1.0;
        #[derive(Serialize)]
        struct BasisRepr {
            kind: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            param: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            table: Option<Tabulated>,
        }
        BasisRepr {
            kind: repr.kind,
            param: repr.param,
            table: repr.table,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BasisFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct BasisRepr {
            kind: String,
            #[serde(default)]
            param: Option<f64>,
            #[serde(default)]
            table: Option<Tabulated>,
        }
        let r = BasisRepr::deserialize(d)?;
        NlTerm::try_from(TermRepr {
            coeff: 1.0,
            kind: r.kind,
            param: r.param,
            table: r.table,
        })
        .map(|t| t.basis)
        .map_err(serde::de::Error::custom)
    }
}

impl Serialize for StaticNL {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        NlRepr {
            a1: self.a1(),
            terms: self.terms.iter().map(TermRepr::from).collect(),
            sector: self.declared_sector(),
            domain: Some(self.domain),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StaticNL {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = NlRepr::deserialize(d)?;
        let terms = r
            .terms
            .into_iter()
            .map(NlTerm::try_from)
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        let domain = r.domain.unwrap_or(Interval { lo: -10.0, hi: 10.0 });
        StaticNL::new(r.a1, terms, r.sector, domain).map_err(serde::de::Error::custom)
    }
}
