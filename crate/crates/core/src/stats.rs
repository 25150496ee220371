//! Moment curves, exponent fits and verdicts against analytic reports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{ExponentReport, Regime};
use crate::num::Real;
use crate::sdesim::Ensemble;

/// Minimum number of curve nodes inside a fit window.
pub const MIN_FIT_NODES: usize = 8;

/// Empirical `E|X(t)|^p` at the ensemble's recording nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MomentCurve<T> {
    pub p: u8,
    pub t_nodes: Vec<T>,
    pub m_hat: Vec<T>,
    pub stderr: Vec<T>,
    pub n_paths: usize,
    /// Paths contributing at each node; frozen paths drop out after their freeze time.
    pub n_used: Vec<usize>,
    pub n_frozen: usize,
}

impl<T: Real> MomentCurve<T> {
    /// Writes `t,m_hat,stderr,n_used` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = crate::export::csv_writer(w);
        out.write_record(["t", "m_hat", "stderr", "n_used"])?;
        for k in 0..self.t_nodes.len() {
            out.write_record([
                crate::export::fmt_real(self.t_nodes[k]),
                crate::export::fmt_real(self.m_hat[k]),
                crate::export::fmt_real(self.stderr[k]),
                self.n_used[k].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0).sqrt()
        }
    }
}

/// Moment curve of order `p ∈ {1, 2, 4}` with standard errors `std/√M`.
///
/// Accumulation runs in `f64` in path order whatever `T` is.
pub fn estimate_moment_curve<T: Real>(ens: &Ensemble<T>, p: u8) -> Result<MomentCurve<T>> {
    if !matches!(p, 1 | 2 | 4) {
        return Err(Error::Domain(format!("moment order {p}; expected 1, 2 or 4")));
    }
    if ens.summaries.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let k = ens.node_times.len();
    let mut acc = vec![Welford::default(); k];
    for s in &ens.summaries {
        for (j, (t, x)) in ens.node_times.iter().zip(&s.node_norms).enumerate() {
            if s.frozen_at.is_some_and(|f| f <= *t) {
                continue;
            }
            acc[j].push(x.as_f64().powi(p as i32));
        }
    }
    Ok(MomentCurve {
        p,
        t_nodes: ens.node_times.clone(),
        m_hat: acc.iter().map(|w| T::lit(w.mean)).collect(),
        stderr: acc
            .iter()
            .map(|w| if w.n == 0 { T::zero() } else { T::lit(w.std() / (w.n as f64).sqrt()) })
            .collect(),
        n_paths: ens.summaries.len(),
        n_used: acc.iter().map(|w| w.n).collect(),
        n_frozen: ens.summaries.iter().filter(|s| s.frozen_at.is_some()).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    PolynomialMean,
    PolynomialAs,
    ExponentialMean,
    ExponentialAs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ExponentEstimate<T> {
    pub kind: EstimateKind,
    pub value: T,
    pub window: (T, T),
    /// Coefficient of determination of the fit; `1` for the tail statistics.
    pub r_squared: T,
    /// Ensemble maximum of the tail statistic.
    #[serde(default)]
    pub max: Option<T>,
    /// Points below the log floor, or paths frozen by overflow.
    #[serde(default)]
    pub floored: usize,
    #[serde(default)]
    pub frozen: usize,
    #[serde(default)]
    pub warning: Option<String>,
}

/// Ordinary least squares `y = c + s x`; returns `(s, r²)`.
pub fn ols<T: Real>(x: &[T], y: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (*a - mx, *b - my);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    let s = sxy / sxx;
    let r2 = if syy.is_zero() { T::one() } else { (s * sxy / syy).max(T::zero()).min(T::one()) };
    (s, r2)
}

fn window_points<T: Real>(curve: &MomentCurve<T>, window: (T, T)) -> Result<(Vec<T>, Vec<T>)> {
    let (t0, t1) = window;
    if !(t0 >= T::one()) || !(t1 > t0) {
        return Err(Error::Domain(format!("fit window [{t0}, {t1}] needs 1 <= T0 < T1")));
    }
    let mut ts = Vec::new();
    let mut ms = Vec::new();
    for (t, m) in curve.t_nodes.iter().zip(&curve.m_hat) {
        if *t >= t0 && *t <= t1 {
            if !(*m > T::zero()) {
                return Err(Error::NonpositiveMoment(m.as_f64(), t.as_f64()));
            }
            ts.push(*t);
            ms.push(m.ln());
        }
    }
    if ts.len() < MIN_FIT_NODES {
        return Err(Error::InsufficientNodes { found: ts.len(), needed: MIN_FIT_NODES });
    }
    Ok((ts, ms))
}

/// Warns when the two halves of the window disagree, a sign that the curve
/// is not linear in the chosen coordinates.
fn curvature_warning<T: Real>(x: &[T], y: &[T], slope: T, r2: T, what: &str) -> Option<String> {
    let half = x.len() / 2;
    let (s1, _) = ols(&x[..half], &y[..half]);
    let (s2, _) = ols(&x[half..], &y[half..]);
    let spread = (s1 - s2).abs();
    if spread > T::lit(0.2) * T::one().max(slope.abs()) || r2 < T::lit(0.9) {
        Some(format!(
            "regime mismatch: {what} fit is window-dependent (half-window slopes {s1} and {s2}, r^2 = {r2})"
        ))
    } else {
        None
    }
}

/// Slope of `log m̂` against `log t` over `window`.
pub fn fit_polynomial_exponent<T: Real>(curve: &MomentCurve<T>, window: (T, T)) -> Result<ExponentEstimate<T>> {
    let (ts, ys) = window_points(curve, window)?;
    let xs: Vec<T> = ts.iter().map(|t| t.ln()).collect();
    let (slope, r2) = ols(&xs, &ys);
    Ok(ExponentEstimate {
        kind: EstimateKind::PolynomialMean,
        value: slope,
        window,
        r_squared: r2,
        max: None,
        floored: 0,
        frozen: curve.n_frozen,
        warning: curvature_warning(&xs, &ys, slope, r2, "log-log"),
    })
}

/// Slope of `log m̂` against `t` over `window`.
pub fn fit_exponential_rate<T: Real>(curve: &MomentCurve<T>, window: (T, T)) -> Result<ExponentEstimate<T>> {
    let (ts, ys) = window_points(curve, window)?;
    let (slope, r2) = ols(&ts, &ys);
    Ok(ExponentEstimate {
        kind: EstimateKind::ExponentialMean,
        value: slope,
        window,
        r_squared: r2,
        max: None,
        floored: 0,
        frozen: curve.n_frozen,
        warning: curvature_warning(&ts, &ys, slope, r2, "semi-log"),
    })
}

/// Nearest-rank percentile of unsorted data, `q ∈ (0, 1]`.
pub fn percentile<T: Real>(data: &[T], q: f64) -> Option<T> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// Almost-sure exponent estimate: the 95th percentile across paths of
/// `sup log|X(t)|/log t` (polynomial) or `sup log|X(t)|/t` (exponential)
/// over the ensemble's tail window. The maximum is kept as a diagnostic.
pub fn estimate_as_exponent<T: Real>(ens: &Ensemble<T>, kind: EstimateKind) -> Result<ExponentEstimate<T>> {
    if ens.summaries.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if ens.t_end < T::lit(100.0) {
        return Err(Error::Domain(format!("horizon {} is below 100", ens.t_end)));
    }
    let stats: Vec<T> = ens
        .summaries
        .iter()
        .filter_map(|s| match kind {
            EstimateKind::PolynomialAs => s.tail_log_ratio,
            EstimateKind::ExponentialAs => s.tail_rate,
            _ => None,
        })
        .collect();
    if !matches!(kind, EstimateKind::PolynomialAs | EstimateKind::ExponentialAs) {
        return Err(Error::Domain(format!("{kind:?} is not an almost-sure statistic")));
    }
    let value = percentile(&stats, 0.95).ok_or(Error::EmptyEnsemble)?;
    let max = stats.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(ExponentEstimate {
        kind,
        value,
        window: (ens.t_end / T::lit(2.0), ens.t_end),
        r_squared: T::one(),
        max: Some(max),
        floored: ens.summaries.iter().map(|s| s.floored).sum(),
        frozen: ens.summaries.iter().filter(|s| s.frozen_at.is_some()).count(),
        warning: None,
    })
}

/// Per-kind tolerances for [`verify_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Tolerances<T> {
    pub polynomial_mean: T,
    pub polynomial_as: T,
    pub exponential_mean: T,
    pub exponential_as: T,
    /// Slack for "stable in mean ⇒ fitted exponent negative".
    pub coherence: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            polynomial_mean: T::lit(0.15),
            polynomial_as: T::lit(0.15),
            exponential_mean: T::lit(0.1),
            exponential_as: T::lit(0.1),
            coherence: T::lit(0.1),
        }
    }
}

impl<T: Real> Tolerances<T> {
    pub fn uniform(tol: T) -> Self {
        Self {
            polynomial_mean: tol,
            polynomial_as: tol,
            exponential_mean: tol,
            exponential_as: tol,
            coherence: tol,
        }
    }

    fn of(&self, kind: EstimateKind) -> T {
        match kind {
            EstimateKind::PolynomialMean => self.polynomial_mean,
            EstimateKind::PolynomialAs => self.polynomial_as,
            EstimateKind::ExponentialMean => self.exponential_mean,
            EstimateKind::ExponentialAs => self.exponential_as,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    /// Empirical value at most analytic plus tolerance.
    Bound,
    /// Empirical value within tolerance of analytic.
    Sharp,
    /// Stable in mean implies a fitted exponent below the tolerance.
    Coherence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Check<T> {
    pub estimate: EstimateKind,
    pub claim: ClaimKind,
    pub source: String,
    pub analytic: T,
    pub empirical: T,
    pub tol: T,
    /// Distance to failure; negative when the check fails.
    pub margin: T,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Verdict<T> {
    pub pass: bool,
    pub checks: Vec<Check<T>>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Compares empirical estimates with an analytic report.
pub fn verify_report<T: Real>(
    report: &ExponentReport<T>,
    estimates: &[ExponentEstimate<T>],
    tol: &Tolerances<T>,
) -> Result<Verdict<T>> {
    let mut checks = Vec::new();
    let mut warnings = Vec::new();
    for est in estimates {
        let (expected_regime, analytic) = match est.kind {
            EstimateKind::PolynomialMean => (Regime::Polynomial, report.alpha_mean),
            EstimateKind::PolynomialAs => (Regime::Polynomial, report.alpha_as),
            EstimateKind::ExponentialMean => (Regime::Exponential, report.exp_rate_mean),
            EstimateKind::ExponentialAs => (Regime::Exponential, report.exp_rate_as),
        };
        if report.regime != expected_regime {
            return Err(Error::RegimeMismatch(format!(
                "report regime {:?} cannot be checked with a {:?} estimate",
                report.regime, est.kind
            )));
        }
        let analytic = analytic.ok_or_else(|| {
            Error::RegimeMismatch(format!("report has no analytic value for {:?}", est.kind))
        })?;
        if let Some(w) = &est.warning {
            warnings.push(w.clone());
        }
        let t = tol.of(est.kind);
        let sharp = est.kind == EstimateKind::PolynomialMean && report.sharp;
        let margin = if sharp {
            t - (est.value - analytic).abs()
        } else {
            analytic + t - est.value
        };
        checks.push(Check {
            estimate: est.kind,
            claim: if sharp { ClaimKind::Sharp } else { ClaimKind::Bound },
            source: report.source.clone(),
            analytic,
            empirical: est.value,
            tol: t,
            margin,
            pass: margin >= T::zero(),
        });
        if est.kind == EstimateKind::PolynomialMean && report.stable_mean == Some(true) {
            let margin = tol.coherence - est.value;
            checks.push(Check {
                estimate: est.kind,
                claim: ClaimKind::Coherence,
                source: report.source.clone(),
                analytic: T::zero(),
                empirical: est.value,
                tol: tol.coherence,
                margin,
                pass: margin >= T::zero(),
            });
        }
    }
    Ok(Verdict {
        pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
        checks,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::classify_scalar;
    use crate::model::ScalarPantographModel;
    use crate::num::log_spaced;
    use crate::sdesim::PathSummary;

    fn curve(t: Vec<f64>, m: Vec<f64>) -> MomentCurve<f64> {
        let k = t.len();
        MomentCurve { p: 1, t_nodes: t, m_hat: m, stderr: vec![0.0; k], n_paths: 1, n_used: vec![1; k], n_frozen: 0 }
    }

    #[test]
    fn exact_power_law() {
        let t = log_spaced(10.0, 1000.0, 32);
        let m = t.iter().map(|t: &f64| 5.0 * t.powf(-1.3)).collect();
        let e = fit_polynomial_exponent(&curve(t, m), (10.0, 1000.0)).unwrap();
        assert!((e.value + 1.3).abs() < 1e-9);
        assert!(e.warning.is_none());
        assert!((e.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_power_law() {
        let t = log_spaced(10.0, 1000.0, 32);
        let m = t.iter().map(|t: &f64| (2.0 + t.ln().sin() * 0.01) / t).collect();
        let e = fit_polynomial_exponent(&curve(t, m), (10.0, 1000.0)).unwrap();
        assert!((e.value + 1.0).abs() < 0.02);
    }

    #[test]
    fn exponential_data_warns_in_log_log() {
        let t = log_spaced(2.0, 8.0, 32);
        let m: Vec<f64> = t.iter().map(|t: &f64| (-t).exp()).collect();
        let e = fit_polynomial_exponent(&curve(t.clone(), m.clone()), (2.0, 8.0)).unwrap();
        assert!(e.warning.is_some());
        let r = fit_exponential_rate(&curve(t, m), (2.0, 8.0)).unwrap();
        assert!((r.value + 1.0).abs() < 1e-9);
        assert!(r.warning.is_none());
    }

    #[test]
    fn exact_exponential() {
        let t = log_spaced(1.0, 20.0, 16);
        let m = t.iter().map(|t: &f64| (0.7 * t).exp()).collect();
        let e = fit_exponential_rate(&curve(t, m), (1.0, 20.0)).unwrap();
        assert!((e.value - 0.7).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let t = log_spaced(1.0, 20.0, 16);
        let m: Vec<f64> = t.iter().map(|t| 1.0 / t).collect();
        assert!(matches!(
            fit_polynomial_exponent(&curve(t.clone(), m.clone()), (15.0, 20.0)),
            Err(Error::InsufficientNodes { .. })
        ));
        assert!(fit_polynomial_exponent(&curve(t.clone(), m.clone()), (0.5, 20.0)).is_err());
        let mut z = m.clone();
        z[10] = 0.0;
        assert!(matches!(fit_polynomial_exponent(&curve(t, z), (1.0, 20.0)), Err(Error::NonpositiveMoment(..))));
    }

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        assert_eq!(percentile(&v, 0.95), Some(95.0));
        assert_eq!(percentile(&[3.0, 1.0, 2.0], 0.95), Some(3.0));
        assert_eq!(percentile::<f64>(&[], 0.95), None);
    }

    fn summary(norms: Vec<f64>, ratio: f64) -> PathSummary<f64> {
        PathSummary { node_norms: norms, frozen_at: None, tail_log_ratio: Some(ratio), tail_rate: Some(ratio), floored: 0, positive: true }
    }

    #[test]
    fn identical_paths_zero_stderr() {
        let ens = Ensemble {
            node_times: vec![1.0, 2.0],
            h: 0.01,
            t_end: 200.0,
            master_seed: 0,
            first_path: 0,
            summaries: vec![summary(vec![0.3, 0.1], -1.0); 5],
        };
        let c = estimate_moment_curve(&ens, 2).unwrap();
        assert_eq!(c.stderr, vec![0.0, 0.0]);
        assert!((c.m_hat[0] - 0.09).abs() < 1e-15);
        assert!(estimate_moment_curve(&ens, 3).is_err());
    }

    #[test]
    fn frozen_paths_drop_out() {
        let mut s = summary(vec![1.0, 1e200], 0.0);
        s.frozen_at = Some(1.5);
        let ens = Ensemble {
            node_times: vec![1.0, 2.0],
            h: 0.01,
            t_end: 200.0,
            master_seed: 0,
            first_path: 0,
            summaries: vec![s, summary(vec![1.0, 2.0], 0.0)],
        };
        let c = estimate_moment_curve(&ens, 1).unwrap();
        assert_eq!(c.n_used, vec![2, 1]);
        assert_eq!(c.m_hat[1], 2.0);
        assert_eq!(c.n_frozen, 1);
    }

    #[test]
    fn verdict_rules() {
        // bound-type: α = -1 with b < 0 is not sharp
        let r = classify_scalar(&ScalarPantographModel::new(-1.0f64, -0.5, 0.2, 0.0, 0.5), 1).unwrap();
        assert!(!r.sharp);
        let est = ExponentEstimate {
            kind: EstimateKind::PolynomialMean,
            value: -0.2,
            window: (50.0, 200.0),
            r_squared: 1.0,
            max: None,
            floored: 0,
            frozen: 0,
            warning: None,
        };
        let v = verify_report(&r, std::slice::from_ref(&est), &Tolerances::uniform(0.15)).unwrap();
        assert!(!v.pass);
        assert!((v.checks[0].margin + 0.65).abs() < 1e-12);

        let mut ok = est.clone();
        ok.value = -1.1;
        assert!(verify_report(&r, &[ok.clone()], &Tolerances::uniform(0.15)).unwrap().pass);

        let mut wrong = est;
        wrong.kind = EstimateKind::ExponentialMean;
        assert!(matches!(verify_report(&r, &[wrong], &Tolerances::default()), Err(Error::RegimeMismatch(_))));

        // sharp claim for b > 0
        let s = classify_scalar(&ScalarPantographModel::new(-1.0, 0.5, 0.2, 0.0, 0.5), 1).unwrap();
        let v = verify_report(&s, &[ok], &Tolerances::uniform(0.15)).unwrap();
        assert_eq!(v.checks[0].claim, ClaimKind::Sharp);
        assert!(v.pass);
    }
}
