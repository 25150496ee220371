//! Analytic growth exponents and stability classification.
//!
//! Every polynomial exponent is the real root of a characteristic equation
//! `ā + Σ |b̄ᵢ| pᵢ^α = 0` of a deterministic pantograph comparison equation.
//! The scalar case has closed forms; the multi-delay and matrix cases choose
//! the free weights of the comparison equation and solve for the root.

mod matrix;
mod multi;

use serde::{Deserialize, Serialize};

pub use matrix::{matrix_classify, MatrixMode};
pub use multi::{multi_delay_classify, multi_delay_real_root, WeightPolicy};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{ScalarPantographModel, Validate};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Polynomial,
    Exponential,
    Unsupported,
}

/// Solution of `AᵀC + CA = -I` and its extreme eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LyapunovData<T> {
    #[serde(rename = "C")]
    pub c: DenseMatrix<T>,
    pub gamma_lo2: T,
    pub gamma_hi2: T,
}

/// Analytic exponents for one model and moment order.
///
/// `alpha_as` follows from `alpha_mean` through the Borel–Cantelli argument:
/// `α + 1` for the first mean and `(α + 1)/2` for the mean square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ExponentReport<T> {
    pub regime: Regime,
    pub p: u8,
    pub alpha_mean: Option<T>,
    pub alpha_as: Option<T>,
    pub exp_rate_mean: Option<T>,
    pub exp_rate_as: Option<T>,
    pub stable_mean: Option<bool>,
    pub stable_as: Option<bool>,
    pub source: String,
    /// The mean exponent is attained, not only an upper bound.
    #[serde(default)]
    pub sharp: bool,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub lyapunov: Option<LyapunovData<T>>,
}

impl<T: Real> ExponentReport<T> {
    fn empty(regime: Regime, p: u8, source: &str) -> Self {
        Self {
            regime,
            p,
            alpha_mean: None,
            alpha_as: None,
            exp_rate_mean: None,
            exp_rate_as: None,
            stable_mean: None,
            stable_as: None,
            source: source.to_owned(),
            sharp: false,
            notes: Vec::new(),
            lyapunov: None,
        }
    }

    pub(crate) fn unsupported(p: u8, source: &str, note: impl Into<String>) -> Self {
        let mut r = Self::empty(Regime::Unsupported, p, source);
        r.notes.push(note.into());
        r
    }

    pub(crate) fn polynomial(p: u8, alpha: T, source: &str) -> Self {
        let mut r = Self::empty(Regime::Polynomial, p, source);
        r.alpha_mean = Some(alpha);
        r.alpha_as = Some(as_exponent(p, alpha));
        r
    }

    pub(crate) fn exponential(p: u8, mean: T, as_rate: Option<T>, source: &str) -> Self {
        let mut r = Self::empty(Regime::Exponential, p, source);
        r.exp_rate_mean = Some(mean);
        r.exp_rate_as = as_rate;
        r
    }

    pub fn is_supported(&self) -> bool {
        self.regime != Regime::Unsupported
    }
}

/// Almost-sure exponent implied by a `p`-th mean exponent.
pub fn as_exponent<T: Real>(p: u8, alpha: T) -> T {
    if p == 1 {
        alpha + T::one()
    } else {
        (alpha + T::one()) / T::lit(2.0)
    }
}

/// First-mean exponent for `ρ = 0`, `a < 0`: the root of `a + |b| q^α = 0`.
pub fn first_mean_alpha<T: Real>(m: &ScalarPantographModel<T>) -> Result<T> {
    if !m.rho.is_zero() {
        return Err(Error::Regime("first-mean exponent needs rho = 0".into()));
    }
    if m.a >= T::zero() {
        return Err(Error::Regime(format!(
            "first-mean polynomial exponent needs a < 0 (a = {})",
            m.a
        )));
    }
    if m.b.is_zero() {
        return Err(Error::DegenerateB);
    }
    Ok((-m.a / m.b.abs()).ln() / m.q.ln())
}

/// Mean-square exponent for `ρ ≠ 0`, `2a + σ² < 0`, with the Young weight
/// chosen optimally.
pub fn mean_square_alpha<T: Real>(m: &ScalarPantographModel<T>) -> Result<T> {
    if m.rho.is_zero() {
        return Err(Error::WrongBranch(
            "rho = 0: use the first-mean exponent or the scalar classifier".into(),
        ));
    }
    mean_square_alpha_any(m)
}

/// Optimal mean-square exponent, also valid in the `ρ → 0` limit.
///
/// The optimum of `q^α = (√(K² − ρ²c) − K)²/ρ⁴` with `K = |b + σρ|`,
/// `c = 2a + σ²` is evaluated in the rationalised form `|c| / (√(K² + ρ²|c|) + K)`
/// so that small `ρ` does not cancel.
fn mean_square_alpha_any<T: Real>(m: &ScalarPantographModel<T>) -> Result<T> {
    let c = T::lit(2.0) * m.a + m.sigma * m.sigma;
    if c >= T::zero() {
        return Err(Error::Regime(format!(
            "mean-square polynomial exponent needs 2a + sigma^2 < 0 (got {c})"
        )));
    }
    let k = (m.b + m.sigma * m.rho).abs();
    let rho2 = m.rho * m.rho;
    if k.is_zero() && rho2.is_zero() {
        return Err(Error::DegenerateB);
    }
    let root = -c / ((k * k - rho2 * c).sqrt() + k);
    Ok(T::lit(2.0) * root.ln() / m.q.ln())
}

/// Classifies the scalar equation for moment order `p ∈ {1, 2}`.
pub fn classify_scalar<T: Real>(m: &ScalarPantographModel<T>, p: u8) -> Result<ExponentReport<T>> {
    let m = m.validate()?;
    let two = T::lit(2.0);
    match p {
        1 => {
            if !m.rho.is_zero() {
                return Err(Error::Regime(
                    "first-mean analysis requires rho = 0; use p = 2".into(),
                ));
            }
            if m.a > T::zero() {
                return Ok(ExponentReport::exponential(1, m.a, Some(m.a), "Thm4.1(i)"));
            }
            if m.a.is_zero() {
                return Ok(ExponentReport::unsupported(
                    1,
                    "Lemma2.2(iii)",
                    "a = 0: the comparison equation grows like exp(log²t / (2 log(1/q))), \
                     neither polynomially nor exponentially",
                ));
            }
            let alpha = match first_mean_alpha(&m) {
                Ok(a) => a,
                Err(Error::DegenerateB) => {
                    return Ok(ExponentReport::unsupported(
                        1,
                        "Thm3.1(i)",
                        "b = 0: the equation is geometric Brownian motion and the first mean \
                         decays exponentially; no finite polynomial exponent",
                    ))
                }
                Err(e) => return Err(e),
            };
            let mut r = ExponentReport::polynomial(1, alpha, "Thm3.1(i)");
            let mean_cond = m.a + m.b.abs();
            let as_cond = m.a + m.b.abs() / m.q;
            r.stable_mean = Some(mean_cond < T::zero());
            r.stable_as = Some(as_cond < T::zero());
            r.sharp = m.b > T::zero();
            r.notes.push(format!("Thm3.2(i): a + |b| = {mean_cond}"));
            r.notes.push(format!("Thm3.4(i): a + |b|/q = {as_cond}"));
            r.notes.push("Thm3.3(i): a.s. exponent alpha + 1".into());
            if r.sharp {
                r.notes.push("Rmk3.1: exponent is sharp for b > 0".into());
            }
            Ok(r)
        }
        2 => {
            let c = two * m.a + m.sigma * m.sigma;
            if c > T::zero() {
                let as_rate = m.a + m.sigma * m.sigma / two;
                return Ok(ExponentReport::exponential(2, c, Some(as_rate), "Thm4.1(ii)"));
            }
            if c.is_zero() {
                return Ok(ExponentReport::unsupported(
                    2,
                    "Lemma2.2(iii)",
                    "2a + sigma^2 = 0: boundary regime, no polynomial or exponential bound",
                ));
            }
            let alpha = match mean_square_alpha_any(&m) {
                Ok(a) => a,
                Err(Error::DegenerateB) => {
                    return Ok(ExponentReport::unsupported(
                        2,
                        "Thm3.1(ii)",
                        "b + sigma*rho = 0 and rho = 0: no delayed feedback, the mean square \
                         decays exponentially; no finite polynomial exponent",
                    ))
                }
                Err(e) => return Err(e),
            };
            let mut r = ExponentReport::polynomial(2, alpha, "Thm3.1(ii)");
            let k = (m.b + m.sigma * m.rho).abs();
            let rho2 = m.rho * m.rho;
            let mean_cond = c + rho2 + two * k;
            let as_cond = c + rho2 / m.q + two * k / m.q.sqrt();
            r.stable_mean = Some(mean_cond < T::zero());
            r.stable_as = Some(as_cond < T::zero());
            r.notes.push(format!("Thm3.2(ii): 2a + s^2 + r^2 + 2|b + s r| = {mean_cond}"));
            r.notes.push(format!("Thm3.4(ii): 2a + s^2 + r^2/q + 2|b + s r|/sqrt(q) = {as_cond}"));
            r.notes.push("Thm3.3(ii): a.s. exponent (alpha + 1)/2".into());
            if m.rho.is_zero() {
                r.notes.push("rho = 0: optimal weight evaluated in the rho -> 0 limit".into());
            }
            Ok(r)
        }
        _ => Err(Error::Domain(format!("moment order p = {p}; expected 1 or 2"))),
    }
}
