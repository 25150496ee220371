//! Mean-square exponent for several proportional delays.

use serde::{Deserialize, Serialize};

use super::{classify_scalar, ExponentReport};
use crate::error::{Error, Result};
use crate::model::{MultiDelayModel, ScalarPantographModel, Validate};
use crate::num::Real;
use crate::roots::{decreasing_root, golden_min};

/// Choice of the Young and Cauchy–Schwarz weights in the comparison equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightPolicy {
    /// `ν² = λ² = ε` small enough that the instantaneous coefficient stays
    /// at most half of `2a + σ²`.
    Small,
    /// `ν = λ = 1`, `μ² = |σⱼ|`.
    Unit,
    /// `ν² = 1/√qᵢ`, `λ² = 1/√rⱼ`, `μ² = |σⱼ|√rⱼ`.
    DelayScaled,
    /// Coordinate descent on all weights, started from the best fixed policy.
    Optimized,
}

/// Real root of `ã + Σ |b̃ᵢ| pᵢ^α = 0`.
pub fn multi_delay_real_root<T: Real>(a_tilde: T, b_tilde: &[T], p: &[T]) -> Result<T> {
    if b_tilde.len() != p.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} delay factors",
            b_tilde.len(),
            p.len()
        )));
    }
    if !a_tilde.is_finite() || b_tilde.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("characteristic coefficients"));
    }
    if let Some(&bad) = p.iter().find(|&&pi| !(pi > T::zero() && pi < T::one())) {
        return Err(Error::QOutOfRange(bad.as_f64()));
    }
    if a_tilde >= T::zero() {
        return Err(Error::Regime(format!(
            "characteristic equation needs a negative constant term (got {a_tilde})"
        )));
    }
    if b_tilde.iter().all(|b| b.is_zero()) {
        return Err(Error::DegenerateB);
    }
    let f = |z: T| {
        a_tilde
            + b_tilde
                .iter()
                .zip(p)
                .map(|(b, pi)| b.abs() * pi.powf(z))
                .sum::<T>()
    };
    let df = |z: T| {
        b_tilde
            .iter()
            .zip(p)
            .map(|(b, pi)| b.abs() * pi.powf(z) * pi.ln())
            .sum::<T>()
    };
    let mut z = decreasing_root(f)?;
    // Newton polish; the bisection width bounds the argument, not the residual.
    for _ in 0..3 {
        let (fz, dz) = (f(z), df(z));
        if fz.is_zero() || dz.is_zero() {
            break;
        }
        let next = z - fz / dz;
        if next.is_finite() && f(next).abs() < fz.abs() {
            z = next;
        } else {
            break;
        }
    }
    Ok(z)
}

#[derive(Debug, Clone)]
struct Weights<T> {
    nu2: Vec<T>,
    lam2: Vec<T>,
    mu2: Vec<T>,
}

struct Comparison<'a, T> {
    m: &'a MultiDelayModel<T>,
    c: T,
}

impl<'a, T: Real> Comparison<'a, T> {
    fn instantaneous(&self, w: &Weights<T>) -> T {
        let s = self.m.sigma.abs();
        let mut inst = self.c;
        for (b, nu2) in self.m.b.iter().zip(&w.nu2) {
            inst = inst + b.abs() * *nu2;
        }
        for (sj, l2) in self.m.sigma_delayed.iter().zip(&w.lam2) {
            inst = inst + s * sj.abs() * *l2;
        }
        inst
    }

    /// Delayed coefficients merged by factor.
    fn delayed(&self, w: &Weights<T>) -> (Vec<T>, Vec<T>) {
        let s = self.m.sigma.abs();
        let cs: T = self
            .m
            .sigma_delayed
            .iter()
            .zip(&w.mu2)
            .filter(|(sj, _)| !sj.is_zero())
            .map(|(sj, mu2)| *sj * *sj / *mu2)
            .sum();
        let mut coefs: Vec<T> = Vec::new();
        let mut factors: Vec<T> = Vec::new();
        let mut push = |p: T, v: T| {
            if v.is_zero() {
                return;
            }
            match factors.iter().position(|&f| f == p) {
                Some(k) => coefs[k] = coefs[k] + v,
                None => {
                    factors.push(p);
                    coefs.push(v);
                }
            }
        };
        for ((b, q), nu2) in self.m.b.iter().zip(&self.m.q).zip(&w.nu2) {
            if !b.is_zero() {
                push(*q, b.abs() / *nu2);
            }
        }
        for (((sj, r), l2), mu2) in self
            .m
            .sigma_delayed
            .iter()
            .zip(&self.m.r)
            .zip(&w.lam2)
            .zip(&w.mu2)
        {
            if sj.is_zero() {
                continue;
            }
            push(*r, cs * *mu2 + s * sj.abs() / *l2);
        }
        (coefs, factors)
    }

    fn alpha(&self, w: &Weights<T>) -> Option<T> {
        let inst = self.instantaneous(w);
        if !(inst < T::zero()) {
            return None;
        }
        let (coefs, factors) = self.delayed(w);
        multi_delay_real_root(inst, &coefs, &factors).ok()
    }

    fn policy(&self, policy: WeightPolicy) -> Weights<T> {
        let m = self.m;
        let mu_unit: Vec<T> = m.sigma_delayed.iter().map(|s| s.abs()).collect();
        match policy {
            WeightPolicy::Small => {
                let load: T = m.b.iter().map(|b| b.abs()).sum::<T>()
                    + m.sigma_delayed.iter().map(|s| m.sigma.abs() * s.abs()).sum::<T>();
                let eps = if load.is_zero() {
                    T::one()
                } else {
                    T::one().min(self.c.abs() / (T::lit(2.0) * load))
                };
                Weights {
                    nu2: vec![eps; m.b.len()],
                    lam2: vec![eps; m.r.len()],
                    mu2: mu_unit,
                }
            }
            WeightPolicy::Unit | WeightPolicy::Optimized => Weights {
                nu2: vec![T::one(); m.b.len()],
                lam2: vec![T::one(); m.r.len()],
                mu2: mu_unit,
            },
            WeightPolicy::DelayScaled => Weights {
                nu2: m.q.iter().map(|q| T::one() / q.sqrt()).collect(),
                lam2: m.r.iter().map(|r| T::one() / r.sqrt()).collect(),
                mu2: m
                    .sigma_delayed
                    .iter()
                    .zip(&m.r)
                    .map(|(s, r)| s.abs() * r.sqrt())
                    .collect(),
            },
        }
    }

    /// Coordinate descent in log-weights. Returns the improved weights and root.
    fn optimize(&self, start: Weights<T>, start_alpha: T) -> (Weights<T>, T) {
        #[derive(Clone, Copy)]
        enum Slot {
            Nu(usize),
            Lam(usize),
            Mu(usize),
        }
        let m = self.m;
        let mut slots = Vec::new();
        for (i, b) in m.b.iter().enumerate() {
            if !b.is_zero() {
                slots.push(Slot::Nu(i));
            }
        }
        for (j, sj) in m.sigma_delayed.iter().enumerate() {
            if !sj.is_zero() && !m.sigma.is_zero() {
                slots.push(Slot::Lam(j));
            }
        }
        let active_mu: Vec<usize> = (0..m.sigma_delayed.len())
            .filter(|&j| !m.sigma_delayed[j].is_zero())
            .collect();
        // the Cauchy-Schwarz bound is invariant under a common scale of μ²
        for &j in active_mu.iter().skip(1) {
            slots.push(Slot::Mu(j));
        }

        let get = |w: &Weights<T>, s: Slot| match s {
            Slot::Nu(i) => w.nu2[i],
            Slot::Lam(j) => w.lam2[j],
            Slot::Mu(j) => w.mu2[j],
        };
        let set = |w: &mut Weights<T>, s: Slot, v: T| match s {
            Slot::Nu(i) => w.nu2[i] = v,
            Slot::Lam(j) => w.lam2[j] = v,
            Slot::Mu(j) => w.mu2[j] = v,
        };

        let mut w = start;
        let mut best = start_alpha;
        let span = T::lit(12.0);
        let tol = T::tol(1e-10);
        for _sweep in 0..60 {
            let before = best;
            for &s in &slots {
                let x0 = get(&w, s).ln();
                let objective = |x: T| {
                    let mut trial = w.clone();
                    set(&mut trial, s, x.exp());
                    self.alpha(&trial).unwrap_or_else(T::infinity)
                };
                let (x, fx) = golden_min(objective, x0 - span, x0 + span, tol);
                if fx < best {
                    set(&mut w, s, x.exp());
                    best = fx;
                }
            }
            if !(before - best > T::tol(1e-15) * T::one().max(best.abs())) {
                break;
            }
        }
        (w, best)
    }
}

/// Mean-square classification for several proportional delays in the drift
/// and diffusion.
pub fn multi_delay_classify<T: Real>(m: &MultiDelayModel<T>) -> Result<ExponentReport<T>> {
    let m = m.clone().validate()?;
    let two = T::lit(2.0);
    if m.b.is_empty() && m.sigma_delayed.is_empty() {
        let scalar = ScalarPantographModel::new(m.a, T::zero(), m.sigma, T::zero(), T::lit(0.5));
        let mut r = classify_scalar(&scalar, 2)?;
        r.notes.push("no delayed terms: classified as the scalar equation with b = rho = 0".into());
        return Ok(r);
    }
    let c = two * m.a + m.sigma * m.sigma;
    if c >= T::zero() {
        return Ok(ExponentReport::unsupported(
            2,
            "Thm5.1",
            format!("2a + sigma^2 = {c} >= 0: the multi-delay bound needs a decaying instantaneous part"),
        ));
    }
    let cmp = Comparison { m: &m, c };
    let mut best: Option<(WeightPolicy, Weights<T>, T)> = None;
    let mut notes = Vec::new();
    for policy in [WeightPolicy::Small, WeightPolicy::Unit, WeightPolicy::DelayScaled] {
        let w = cmp.policy(policy);
        match cmp.alpha(&w) {
            Some(alpha) => {
                notes.push(format!("weights {policy:?}: alpha = {alpha}"));
                if best.as_ref().is_none_or(|(_, _, b)| alpha < *b) {
                    best = Some((policy, w, alpha));
                }
            }
            None => notes.push(format!("weights {policy:?}: infeasible")),
        }
    }
    let Some((policy, w, alpha)) = best else {
        return Ok(ExponentReport::unsupported(
            2,
            "Thm5.1",
            "all delayed coefficients vanish; the mean square decays exponentially",
        ));
    };
    let (_, opt_alpha) = cmp.optimize(w, alpha);
    let (winner, alpha) = if opt_alpha < alpha {
        (WeightPolicy::Optimized, opt_alpha)
    } else {
        (policy, alpha)
    };
    notes.push(format!("weights {:?}: alpha = {opt_alpha}", WeightPolicy::Optimized));
    notes.push(format!("selected weights: {winner:?}"));

    let sum_b: T = m.b.iter().map(|b| b.abs()).sum();
    let sum_b_as: T = m.b.iter().zip(&m.q).map(|(b, q)| b.abs() / q.sqrt()).sum();
    let diff: T = m.sigma.abs() + m.sigma_delayed.iter().map(|s| s.abs()).sum::<T>();
    let diff_as: T = m.sigma.abs()
        + m.sigma_delayed
            .iter()
            .zip(&m.r)
            .map(|(s, r)| s.abs() / r.sqrt())
            .sum::<T>();
    let mean_cond = two * m.a + two * sum_b + diff * diff;
    let as_cond = two * m.a + two * sum_b_as + diff_as * diff_as;

    let mut r = ExponentReport::polynomial(2, alpha, "Thm5.1");
    r.stable_mean = Some(mean_cond < T::zero());
    r.stable_as = Some(as_cond < T::zero());
    r.notes = notes;
    r.notes.push(format!("mean-square stability margin: {mean_cond}"));
    r.notes.push(format!("almost-sure stability margin: {as_cond}"));
    Ok(r)
}
