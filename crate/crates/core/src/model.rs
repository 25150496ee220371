//! Equation descriptors for the scalar, multi-delay and matrix stochastic
//! pantograph equations, plus initial conditions.
//!
//! Models are plain data. [`Validate::validate`] checks every invariant and
//! hands the value back unchanged, so a validated model can be shared freely.

use rand::Rng;
use rand_distr::{Distribution, Normal, StudentT, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, MAX_DIM};
use crate::num::Real;

/// Checks type invariants and returns the value unchanged.
pub trait Validate: Sized {
    fn validate(self) -> Result<Self>;
}

fn check_factor<T: Real>(q: T) -> Result<()> {
    if !q.is_finite() || q <= T::zero() || q >= T::one() {
        return Err(Error::QOutOfRange(q.to_f64().unwrap_or(f64::NAN)));
    }
    Ok(())
}

fn check_finite<T: Real>(vals: &[T], what: &'static str) -> Result<()> {
    if vals.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_distinct<T: Real>(factors: &[T], list: &'static str) -> Result<()> {
    for (i, &x) in factors.iter().enumerate() {
        if factors[..i].contains(&x) {
            return Err(Error::DuplicateDelay(x.as_f64(), list));
        }
    }
    Ok(())
}

/// `dX = (aX(t) + bX(qt)) dt + (σX(t) + ρX(qt)) dB(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScalarPantographModel<T> {
    pub a: T,
    pub b: T,
    pub sigma: T,
    pub rho: T,
    pub q: T,
}

impl<T: Real> ScalarPantographModel<T> {
    pub fn new(a: T, b: T, sigma: T, rho: T, q: T) -> Self {
        Self { a, b, sigma, rho, q }
    }

    /// Drift-only model (`σ = ρ = 0`).
    pub fn deterministic(a: T, b: T, q: T) -> Self {
        Self::new(a, b, T::zero(), T::zero(), q)
    }
}

impl<T: Real> Validate for ScalarPantographModel<T> {
    fn validate(self) -> Result<Self> {
        check_finite(&[self.a, self.b, self.sigma, self.rho], "scalar model coefficients")?;
        check_factor(self.q)?;
        Ok(self)
    }
}

/// `dX = (aX + Σ bᵢX(qᵢt)) dt + (σX + Σ σⱼX(rⱼt)) dB`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MultiDelayModel<T> {
    pub a: T,
    pub b: Vec<T>,
    pub q: Vec<T>,
    pub sigma: T,
    pub sigma_delayed: Vec<T>,
    pub r: Vec<T>,
}

impl<T: Real> Validate for MultiDelayModel<T> {
    fn validate(self) -> Result<Self> {
        check_finite(&[self.a, self.sigma], "multi-delay coefficients")?;
        check_finite(&self.b, "b")?;
        check_finite(&self.sigma_delayed, "sigma_delayed")?;
        if self.b.len() != self.q.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} drift coefficients but {} drift delay factors",
                self.b.len(),
                self.q.len()
            )));
        }
        if self.sigma_delayed.len() != self.r.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} delayed diffusion coefficients but {} diffusion delay factors",
                self.sigma_delayed.len(),
                self.r.len()
            )));
        }
        for &f in self.q.iter().chain(&self.r) {
            check_factor(f)?;
        }
        check_distinct(&self.q, "q")?;
        check_distinct(&self.r, "r")?;
        Ok(self)
    }
}

/// `dX = (AX + BX(qt)) dt + (ΣX + ΘX(qt)) dB` in `ℝᵈ` with one Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MatrixModel<T> {
    #[serde(rename = "A")]
    pub a: DenseMatrix<T>,
    #[serde(rename = "B")]
    pub b: DenseMatrix<T>,
    #[serde(rename = "Sigma")]
    pub sigma: DenseMatrix<T>,
    #[serde(rename = "Theta")]
    pub theta: DenseMatrix<T>,
    pub q: T,
    pub d: usize,
}

impl<T: Real> MatrixModel<T> {
    pub fn new(
        a: DenseMatrix<T>,
        b: DenseMatrix<T>,
        sigma: DenseMatrix<T>,
        theta: DenseMatrix<T>,
        q: T,
    ) -> Self {
        let d = a.rows();
        Self { a, b, sigma, theta, q, d }
    }
}

impl<T: Real> Validate for MatrixModel<T> {
    fn validate(self) -> Result<Self> {
        if self.d == 0 {
            return Err(Error::DimensionMismatch("dimension must be at least 1".into()));
        }
        if self.d > MAX_DIM {
            return Err(Error::DimensionTooLarge(self.d));
        }
        for (name, m) in [("A", &self.a), ("B", &self.b), ("Sigma", &self.sigma), ("Theta", &self.theta)] {
            if m.rows() != self.d || m.cols() != self.d {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols(),
                    d = self.d
                )));
            }
            check_finite(m.as_slice(), "matrix model")?;
        }
        check_factor(self.q)?;
        Ok(self)
    }
}

/// Any of the three equation families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "T: Real")]
pub enum Model<T> {
    Scalar(ScalarPantographModel<T>),
    Multi(MultiDelayModel<T>),
    Matrix(MatrixModel<T>),
}

impl<T: Real> Model<T> {
    /// State dimension.
    pub fn dim(&self) -> usize {
        match self {
            Model::Scalar(_) | Model::Multi(_) => 1,
            Model::Matrix(m) => m.d,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Model::Scalar(_) => "scalar",
            Model::Multi(_) => "multi",
            Model::Matrix(_) => "matrix",
        }
    }
}

impl<T: Real> Validate for Model<T> {
    fn validate(self) -> Result<Self> {
        Ok(match self {
            Model::Scalar(m) => Model::Scalar(m.validate()?),
            Model::Multi(m) => Model::Multi(m.validate()?),
            Model::Matrix(m) => Model::Matrix(m.validate()?),
        })
    }
}

impl<T> From<ScalarPantographModel<T>> for Model<T> {
    fn from(m: ScalarPantographModel<T>) -> Self {
        Model::Scalar(m)
    }
}

impl<T> From<MultiDelayModel<T>> for Model<T> {
    fn from(m: MultiDelayModel<T>) -> Self {
        Model::Multi(m)
    }
}

impl<T> From<MatrixModel<T>> for Model<T> {
    fn from(m: MatrixModel<T>) -> Self {
        Model::Matrix(m)
    }
}

/// A deterministic initial state: scalar or vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, bound = "T: Real")]
pub enum InitialValue<T> {
    Scalar(T),
    Vector(Vec<T>),
}

impl<T: Real> InitialValue<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            InitialValue::Scalar(x) => vec![*x],
            InitialValue::Vector(v) => v.clone(),
        }
    }
}

/// Distribution of each component of a random initial state. Components are
/// drawn independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum InitialDistribution {
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    /// Shifted Student-t; finite fourth moment needs `dof > 4`.
    StudentT { mean: f64, dof: f64 },
}

impl InitialDistribution {
    fn check(&self) -> Result<()> {
        let ok = match *self {
            InitialDistribution::Normal { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
            InitialDistribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low < high,
            InitialDistribution::StudentT { mean, dof } => {
                if dof.is_finite() && dof > 0.0 && dof <= 4.0 {
                    return Err(Error::InvalidInitial(format!(
                        "Student-t with {dof} degrees of freedom has no finite fourth moment"
                    )));
                }
                mean.is_finite() && dof.is_finite() && dof > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInitial(format!("bad distribution parameters {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialDistribution::Normal { mean, std } => {
                Normal::new(mean, std).expect("validated").sample(rng)
            }
            InitialDistribution::Uniform { low, high } => {
                Uniform::new(low, high).expect("validated").sample(rng)
            }
            InitialDistribution::StudentT { mean, dof } => {
                let z: f64 = StudentT::new(dof).expect("validated").sample(rng);
                mean + z
            }
        }
    }
}

/// Initial value `X(0)`, independent of the driving Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", bound = "T: Real")]
pub enum InitialCondition<T> {
    Deterministic { value: InitialValue<T> },
    Sampled { distribution: InitialDistribution },
}

impl<T: Real> InitialCondition<T> {
    pub fn constant(x: T) -> Self {
        InitialCondition::Deterministic {
            value: InitialValue::Scalar(x),
        }
    }

    pub fn vector(v: Vec<T>) -> Self {
        InitialCondition::Deterministic {
            value: InitialValue::Vector(v),
        }
    }

    /// Checks the condition against a state dimension.
    pub fn check(&self, dim: usize) -> Result<()> {
        match self {
            InitialCondition::Deterministic { value } => {
                let v = value.to_vec();
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInitial("non-finite initial value".into()));
                }
                // a scalar broadcasts to every component
                if v.len() != dim && v.len() != 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "initial value has {} components, model has {dim}",
                        v.len()
                    )));
                }
                Ok(())
            }
            InitialCondition::Sampled { distribution } => distribution.check(),
        }
    }

    /// Realises the initial state for one path.
    pub fn realize<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<T> {
        match self {
            InitialCondition::Deterministic { value } => {
                let v = value.to_vec();
                if v.len() == 1 && dim > 1 {
                    vec![v[0]; dim]
                } else {
                    v
                }
            }
            InitialCondition::Sampled { distribution } => (0..dim)
                .map(|_| T::lit(distribution.sample(rng)))
                .collect(),
        }
    }
}
