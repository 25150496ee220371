//! Deterministic pantograph equation `x'(t) = ā x(t) + Σ b̄ᵢ x(qᵢ t)`.
//!
//! Classical RK4 on a uniform grid. Delayed values come from a cubic Hermite
//! interpolant of the nodes already computed, using the stored right-hand
//! side as the node derivative. While a step still reads its own interval
//! (`q(tₙ + h) > tₙ`) it is split into 16 sub-steps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

const BOOTSTRAP_SUBSTEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpOrder {
    Linear,
    #[default]
    Cubic,
}

/// Node values and derivatives on the grid `tₙ = n·h`.
#[derive(Debug, Clone, PartialEq)]
struct History<T> {
    h: T,
    values: Vec<T>,
    derivs: Vec<T>,
}

impl<T: Real> History<T> {
    fn hermite(&self, k: usize, theta: T) -> T {
        let (x0, x1) = (self.values[k], self.values[k + 1]);
        let (d0, d1) = (self.derivs[k] * self.h, self.derivs[k + 1] * self.h);
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let t2 = theta * theta;
        let t3 = t2 * theta;
        (two * t3 - three * t2 + one) * x0
            + (t3 - two * t2 + theta) * d0
            + (three * t2 - two * t3) * x1
            + (t3 - t2) * d1
    }

    fn linear(&self, k: usize, theta: T) -> T {
        self.values[k] + theta * (self.values[k + 1] - self.values[k])
    }

    /// Value at `s ≥ 0`. Beyond the last node the last interval's cubic is
    /// extrapolated; with a single node a second-order Taylor expansion is used.
    fn lookup(&self, s: T, order: InterpOrder, taylor: (T, T)) -> T {
        let n = self.values.len();
        if n == 1 {
            return self.values[0] + s * taylor.0 + s * s / T::lit(2.0) * taylor.1;
        }
        let pos = s / self.h;
        let last = n - 2;
        let k = pos.floor().to_usize().unwrap_or(0).min(last);
        let theta = pos - T::from_usize_lossy(k);
        match order {
            InterpOrder::Cubic => self.hermite(k, theta),
            InterpOrder::Linear => self.linear(k, theta),
        }
    }
}

/// Solution of the deterministic pantograph equation on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSolution<T> {
    hist: History<T>,
    pub interp_order: InterpOrder,
}

impl<T: Real> DenseSolution<T> {
    pub fn h(&self) -> T {
        self.hist.h
    }

    pub fn len(&self) -> usize {
        self.hist.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hist.values.is_empty()
    }

    pub fn horizon(&self) -> T {
        self.t_at(self.len() - 1)
    }

    pub fn t_at(&self, n: usize) -> T {
        T::from_usize_lossy(n) * self.hist.h
    }

    pub fn t_grid(&self) -> Vec<T> {
        (0..self.len()).map(|n| self.t_at(n)).collect()
    }

    pub fn values(&self) -> &[T] {
        &self.hist.values
    }

    /// Right-hand side at each node.
    pub fn derivatives(&self) -> &[T] {
        &self.hist.derivs
    }

    /// Interpolated value at `s ∈ [0, T]`.
    pub fn value_at(&self, s: T) -> Result<T> {
        let t_end = self.horizon();
        if !(s >= T::zero()) || s > t_end * (T::one() + T::epsilon()) {
            return Err(Error::Domain(format!("t = {s} outside [0, {t_end}]")));
        }
        Ok(self.hist.lookup(s.min(t_end), self.interp_order, (T::zero(), T::zero())))
    }

    pub fn with_interp(mut self, order: InterpOrder) -> Self {
        self.interp_order = order;
        self
    }

    /// Writes `t,x` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::export::write_table(w, &["t", "x"], self.t_grid().iter().zip(self.values()).map(|(t, x)| vec![*t, *x]))
    }
}

/// Default step `min(0.01, 0.1 / max(|ā|, Σ|b̄ᵢ|, 1))`.
pub fn default_step<T: Real>(a_bar: T, b_bar: &[T]) -> T {
    let sum_b: T = b_bar.iter().map(|b| b.abs()).sum();
    T::lit(0.01).min(T::lit(0.1) / a_bar.abs().max(sum_b).max(T::one()))
}

/// Solves `x'(t) = ā x(t) + b̄ x(qt)`, `x(0) = x0` on `[0, T]`.
pub fn solve_pantograph_ode<T: Real>(a_bar: T, b_bar: T, q: T, x0: T, t_end: T, h: T) -> Result<DenseSolution<T>> {
    solve_multi_delay_ode(a_bar, &[b_bar], &[q], x0, t_end, h)
}

/// Solves `x'(t) = ā x(t) + Σ b̄ᵢ x(qᵢ t)` on `[0, T]`.
///
/// The grid has `N = ⌈T/h⌉` steps of size `T/N`, so the last node is `T`.
pub fn solve_multi_delay_ode<T: Real>(
    a_bar: T,
    b_bar: &[T],
    q: &[T],
    x0: T,
    t_end: T,
    h: T,
) -> Result<DenseSolution<T>> {
    if b_bar.len() != q.len() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for {} delays", b_bar.len(), q.len())));
    }
    for &qi in q {
        if !(qi > T::zero() && qi < T::one()) {
            return Err(Error::QOutOfRange(qi.as_f64()));
        }
    }
    if !x0.is_finite() {
        return Err(Error::InvalidInitial(format!("x0 = {x0}")));
    }
    if !a_bar.is_finite() || b_bar.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("ODE coefficients"));
    }
    if !(h > T::zero()) || !(t_end >= h) || !t_end.is_finite() {
        return Err(Error::Domain(format!("need 0 < h <= T (h = {h}, T = {t_end})")));
    }
    let limit = T::lit(0.5);
    if a_bar.abs() * h > limit {
        return Err(Error::StepTooLarge { h: h.as_f64(), limit: (limit / a_bar.abs()).as_f64() });
    }
    let steps = (t_end / h - T::tol(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    let h = t_end / T::from_usize_lossy(steps);

    let sum_b: T = b_bar.iter().copied().sum();
    let sum_bq: T = b_bar.iter().zip(q).map(|(b, q)| *b * *q).sum();
    let d0 = (a_bar + sum_b) * x0;
    let taylor = (d0, (a_bar + sum_bq) * d0);
    let rhs = |x: T, t: T, hist: &History<T>| {
        let mut v = a_bar * x;
        for (b, qi) in b_bar.iter().zip(q) {
            v = v + *b * hist.lookup(*qi * t, InterpOrder::Cubic, taylor);
        }
        v
    };
    let step = |hist: &History<T>, n: usize, hs: T| -> T {
        let t = T::from_usize_lossy(n) * hs;
        let x = hist.values[n];
        let half = hs / T::lit(2.0);
        let k1 = hist.derivs[n];
        let k2 = rhs(x + half * k1, t + half, hist);
        let k3 = rhs(x + half * k2, t + half, hist);
        let k4 = rhs(x + hs * k3, t + hs, hist);
        x + hs / T::lit(6.0) * (k1 + T::lit(2.0) * (k2 + k3) + k4)
    };

    let qmax = q.iter().copied().fold(T::zero(), T::max);
    let mut hist = History { h, values: Vec::with_capacity(steps + 1), derivs: Vec::with_capacity(steps + 1) };
    hist.values.push(x0);
    hist.derivs.push(d0);

    // fine history for the steps that read their own interval
    let hf = h / T::from_usize_lossy(BOOTSTRAP_SUBSTEPS);
    let mut fine = History { h: hf, values: vec![x0], derivs: vec![d0] };
    let mut n = 0;
    while n < steps && qmax * T::from_usize_lossy(n + 1) * h > T::from_usize_lossy(n) * h {
        for _ in 0..BOOTSTRAP_SUBSTEPS {
            let k = fine.values.len() - 1;
            let x = step(&fine, k, hf);
            let d = rhs(x, T::from_usize_lossy(k + 1) * hf, &fine);
            fine.values.push(x);
            fine.derivs.push(d);
        }
        let last = fine.values.len() - 1;
        hist.values.push(fine.values[last]);
        hist.derivs.push(fine.derivs[last]);
        n += 1;
    }
    drop(fine);

    while n < steps {
        let x = step(&hist, n, h);
        let d = rhs(x, T::from_usize_lossy(n + 1) * h, &hist);
        hist.values.push(x);
        hist.derivs.push(d);
        n += 1;
    }
    Ok(DenseSolution { hist, interp_order: InterpOrder::Cubic })
}

/// `log ψ(t)` for the `ā = 0` growth profile
/// `ψ(t) = t^k (log t)^h exp((log t − log log t)² / (2c'))`, `c' = log(1/q)`,
/// `k = 1/2 + 1/c' + log(b̄c')/c'`, `h = −1 − log(b̄c')/c'`.
pub fn kato_mcleod_log_psi<T: Real>(q: T, b_bar: T, t: T) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(Error::QOutOfRange(q.as_f64()));
    }
    let c = -q.ln();
    if !(b_bar * c > T::zero()) {
        return Err(Error::Domain(format!("b_bar * log(1/q) = {} must be positive", b_bar * c)));
    }
    if !(t > T::E()) {
        return Err(Error::Domain(format!("t = {t} must exceed e")));
    }
    let lbc = (b_bar * c).ln();
    let k = T::lit(0.5) + T::one() / c + lbc / c;
    let hexp = -T::one() - lbc / c;
    let lt = t.ln();
    let llt = lt.ln();
    let gap = lt - llt;
    Ok(k * lt + hexp * llt + gap * gap / (T::lit(2.0) * c))
}

/// `ψ(t)`; overflows to infinity where `log ψ` exceeds the type's range.
pub fn kato_mcleod_psi<T: Real>(q: T, b_bar: T, t: T) -> Result<T> {
    kato_mcleod_log_psi(q, b_bar, t).map(T::exp)
}

/// True iff `p(t) ≤ x(t) + 1e-9·max(1, |x(t)|)` at every node.
pub fn check_comparison<T: Real>(p: &DenseSolution<T>, x: &DenseSolution<T>) -> Result<bool> {
    if p.len() != x.len() || p.h() != x.h() {
        return Err(Error::GridMismatch);
    }
    let tol = T::lit(1e-9);
    Ok(p.values()
        .iter()
        .zip(x.values())
        .all(|(pv, xv)| *pv <= *xv + tol * T::one().max(xv.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_exponential() {
        let s = solve_pantograph_ode(-1.0, 0.0, 0.5, 1.0, 1.0, 0.01).unwrap();
        assert!((s.values()[s.len() - 1] - (-1.0f64).exp()).abs() < 1e-8);
        assert_eq!(s.horizon(), 1.0);
    }

    #[test]
    fn taylor_start() {
        // x' = x(qt): x = 1 + t + q t²/2 + q³ t³/6 + ...
        let q: f64 = 0.5;
        let s = solve_pantograph_ode(0.0, 1.0, q, 1.0, 0.1, 0.001).unwrap();
        let t: f64 = 0.1;
        let series = 1.0 + t + q * t * t / 2.0 + q.powi(3) * t.powi(3) / 6.0 + q.powi(6) * t.powi(4) / 24.0;
        assert!((s.values()[s.len() - 1] - series).abs() < 1e-10);
    }

    #[test]
    fn step_guard() {
        assert!(matches!(solve_pantograph_ode(-100.0, 1.0, 0.5, 1.0, 1.0, 0.01), Err(Error::StepTooLarge { .. })));
        assert!(solve_pantograph_ode(-1.0, 1.0, 1.5, 1.0, 1.0, 0.01).is_err());
        assert!(solve_pantograph_ode(-1.0, 1.0, 0.5, f64::NAN, 1.0, 0.01).is_err());
        assert!(solve_pantograph_ode(-1.0, 1.0, 0.5, 1.0, 0.001, 0.01).is_err());
    }

    #[test]
    fn interpolation_hits_nodes() {
        let s = solve_pantograph_ode(-1.0f64, 0.5, 0.5, 1.0, 2.0, 0.1).unwrap();
        for n in 0..s.len() {
            assert!((s.value_at(s.t_at(n)).unwrap() - s.values()[n]).abs() < 1e-14);
        }
        assert!(s.value_at(2.5).is_err());
        assert!(s.value_at(-0.1).is_err());
    }

    #[test]
    fn psi_domain() {
        assert!(kato_mcleod_psi(0.5, 1.0, 2.0).is_err());
        assert!(kato_mcleod_psi(0.5, -1.0, 10.0).is_err());
        assert!(kato_mcleod_psi(0.5, 1.0, 10.0).unwrap() > 0.0);
    }

    #[test]
    fn comparison_checks() {
        let x = solve_pantograph_ode(-1.0, 0.5, 0.5, 1.0, 5.0, 0.01).unwrap();
        let p = solve_pantograph_ode(-1.0, 0.3, 0.5, 0.9, 5.0, 0.01).unwrap();
        assert!(check_comparison(&p, &x).unwrap());
        assert!(!check_comparison(&x, &p).unwrap());
        let short = solve_pantograph_ode(-1.0, 0.3, 0.5, 0.9, 4.0, 0.01).unwrap();
        assert_eq!(check_comparison(&short, &x), Err(Error::GridMismatch));
    }

    #[test]
    fn default_step_values() {
        assert_eq!(default_step(-2.0, &[1.0]), 0.01);
        assert_eq!(default_step(-50.0, &[1.0]), 0.002);
    }
}
