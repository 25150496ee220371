//! Euler–Maruyama simulation with full-memory delayed lookup.
//!
//! The delayed state `X(q tₙ)` is the linear interpolant of stored nodes at
//! fractional index `q·n ≤ n`, so one forward sweep suffices. Each path draws
//! its increments from its own ChaCha8 stream `(master_seed, path_index)`.

use std::io::Write;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::model::{InitialCondition, MatrixModel, Model, MultiDelayModel, ScalarPantographModel, Validate};
use crate::num::Real;

/// Logs of `|X|` are floored here before taking tail statistics.
pub const LOG_FLOOR: f64 = 1e-300;

/// Identifies the random stream of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomStreamSpec {
    pub master_seed: u64,
    pub path_index: u64,
}

impl RandomStreamSpec {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        Self { master_seed, path_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.path_index);
        rng
    }
}

/// One simulated path on the grid `tₙ = n·h`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub h: T,
    pub t_end: T,
    pub dim: usize,
    /// Row-major `(N+1) × dim`.
    pub values: Vec<T>,
    pub stream: RandomStreamSpec,
    pub model_kind: &'static str,
    /// First node whose value exceeded the overflow threshold. Values from
    /// there on repeat the last finite state and are not estimates.
    pub frozen_at: Option<usize>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t_at(&self, n: usize) -> T {
        T::from_usize_lossy(n) * self.h
    }

    pub fn state(&self, n: usize) -> &[T] {
        &self.values[n * self.dim..(n + 1) * self.dim]
    }

    /// Euclidean norm of the state at node `n`.
    pub fn norm(&self, n: usize) -> T {
        norm(self.state(n))
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen_at.is_some()
    }

    /// Writes `t,x` or `t,x_1,..,x_d` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let headers: Vec<String> = if self.dim == 1 {
            vec!["t".into(), "x".into()]
        } else {
            std::iter::once("t".to_string())
                .chain((1..=self.dim).map(|i| format!("x_{i}")))
                .collect()
        };
        let refs: Vec<&str> = headers.iter().map(String::as_str).collect();
        crate::export::write_table(
            w,
            &refs,
            (0..self.len()).map(|n| {
                let mut row = vec![self.t_at(n)];
                row.extend_from_slice(self.state(n));
                row
            }),
        )
    }
}

fn norm<T: Real>(x: &[T]) -> T {
    if x.len() == 1 {
        x[0].abs()
    } else {
        x.iter().map(|v| *v * *v).sum::<T>().sqrt()
    }
}

/// Magnitude beyond which a path is frozen.
pub fn overflow_threshold<T: Real>() -> T {
    T::lit(1e150).min(T::max_value().sqrt())
}

/// Number of steps and effective step for horizon `t_end`: `N = ⌈T/h⌉`, `h' = T/N`.
pub fn grid<T: Real>(h: T, t_end: T) -> Result<(usize, T)> {
    if !(h > T::zero()) || !(t_end >= h) || !t_end.is_finite() {
        return Err(Error::Domain(format!("need 0 < h <= T (h = {h}, T = {t_end})")));
    }
    let steps = (t_end / h - T::tol(1e-9)).ceil().to_usize().unwrap_or(1).max(1);
    Ok((steps, t_end / T::from_usize_lossy(steps)))
}

/// Largest admissible step: `0.1 / max(1, |a|, |b|, σ², ρ²)` and the
/// analogous sums or spectral norms for the other families.
pub fn max_step<T: Real>(m: &Model<T>) -> Result<T> {
    let scale = match m {
        Model::Scalar(s) => s.a.abs().max(s.b.abs()).max(s.sigma * s.sigma).max(s.rho * s.rho),
        Model::Multi(s) => {
            let b: T = s.b.iter().map(|v| v.abs()).sum();
            let d = s.sigma.abs() + s.sigma_delayed.iter().map(|v| v.abs()).sum::<T>();
            s.a.abs().max(b).max(d * d)
        }
        Model::Matrix(s) => {
            let d = spectral_norm(&s.sigma)? + spectral_norm(&s.theta)?;
            spectral_norm(&s.a)?.max(spectral_norm(&s.b)?).max(d * d)
        }
    };
    Ok(T::lit(0.1) / T::one().max(scale))
}

/// `a`, `σ` and the delayed terms `(drift coef, diffusion coef, factor)` of a one-dimensional equation.
type ScalarDelays<T> = (T, T, Vec<(T, T, T)>);

fn scalar_delays<T: Real>(m: &Model<T>) -> Option<ScalarDelays<T>> {
    match m {
        Model::Scalar(ScalarPantographModel { a, b, sigma, rho, q }) => Some((*a, *sigma, vec![(*b, *rho, *q)])),
        Model::Multi(MultiDelayModel { a, b, q, sigma, sigma_delayed, r }) => {
            let mut d: Vec<(T, T, T)> = b.iter().zip(q).map(|(b, q)| (*b, T::zero(), *q)).collect();
            for (s, r) in sigma_delayed.iter().zip(r) {
                match d.iter_mut().find(|e| e.2 == *r) {
                    Some(e) => e.1 = e.1 + *s,
                    None => d.push((T::zero(), *s, *r)),
                }
            }
            Some((*a, *sigma, d))
        }
        Model::Matrix(_) => None,
    }
}

/// Linear interpolation of component `c` at fractional node `q·n`.
#[inline]
fn delayed<T: Real>(values: &[T], dim: usize, c: usize, n: usize, q: T) -> T {
    let pos = q * T::from_usize_lossy(n);
    let k = pos.floor().to_usize().unwrap_or(0).min(n);
    if k == n {
        return values[n * dim + c];
    }
    let theta = pos - T::from_usize_lossy(k);
    let lo = values[k * dim + c];
    lo + theta * (values[(k + 1) * dim + c] - lo)
}

/// Core Euler–Maruyama sweep with caller-supplied Brownian increments.
fn sweep<T: Real, F: FnMut() -> T>(m: &Model<T>, x0: &[T], h: T, steps: usize, mut dw: F) -> (Vec<T>, Option<usize>) {
    let dim = x0.len();
    let thr = overflow_threshold::<T>();
    let mut values = Vec::with_capacity((steps + 1) * dim);
    values.extend_from_slice(x0);
    let mut frozen_at = None;
    if let Some((a, sigma, delays)) = scalar_delays(m) {
        for n in 0..steps {
            let x = values[n];
            let (mut drift, mut diff) = (a * x, sigma * x);
            for &(b, rho, q) in &delays {
                let xd = delayed(&values, 1, 0, n, q);
                drift = drift + b * xd;
                diff = diff + rho * xd;
            }
            let next = x + drift * h + diff * dw();
            if frozen_at.is_some() || !(next.abs() <= thr) {
                frozen_at.get_or_insert(n + 1);
                values.push(x);
            } else {
                values.push(next);
            }
        }
    } else if let Model::Matrix(mm) = m {
        let MatrixModel { a, b, sigma, theta, q, .. } = mm;
        let (mut xd, mut drift, mut tmp, mut diff) = (vec![T::zero(); dim], vec![T::zero(); dim], vec![T::zero(); dim], vec![T::zero(); dim]);
        for n in 0..steps {
            if frozen_at.is_some() {
                values.extend_from_within(n * dim..(n + 1) * dim);
                dw();
                continue;
            }
            for (c, v) in xd.iter_mut().enumerate() {
                *v = delayed(&values, dim, c, n, *q);
            }
            let x = &values[n * dim..(n + 1) * dim];
            a.mul_vec_into(x, &mut drift);
            b.mul_vec_into(&xd, &mut tmp);
            for (d, t) in drift.iter_mut().zip(&tmp) {
                *d = *d + *t;
            }
            sigma.mul_vec_into(x, &mut diff);
            theta.mul_vec_into(&xd, &mut tmp);
            let w = dw();
            let next: Vec<T> = (0..dim).map(|c| x[c] + drift[c] * h + (diff[c] + tmp[c]) * w).collect();
            if next.iter().all(|v| v.abs() <= thr) {
                values.extend_from_slice(&next);
            } else {
                frozen_at = Some(n + 1);
                values.extend_from_within(n * dim..(n + 1) * dim);
            }
        }
    }
    (values, frozen_at)
}

fn check_inputs<T: Real>(m: &Model<T>, x0: &[T], h: T) -> Result<()> {
    if x0.len() != m.dim() {
        return Err(Error::DimensionMismatch(format!("initial state has {} components, model has {}", x0.len(), m.dim())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInitial("non-finite initial value".into()));
    }
    let limit = max_step(m)?;
    if h > limit * (T::one() + T::tol(1e-12)) {
        return Err(Error::StepTooLarge { h: h.as_f64(), limit: limit.as_f64() });
    }
    Ok(())
}

/// Simulates one path with increments from `stream`.
pub fn simulate_path<T: Real>(m: &Model<T>, x0: &[T], h: T, t_end: T, stream: RandomStreamSpec) -> Result<Trajectory<T>> {
    let m = m.clone().validate()?;
    check_inputs(&m, x0, h)?;
    let (steps, h_eff) = grid(h, t_end)?;
    let mut rng = stream.rng();
    let (values, frozen_at) = run_with_rng(&m, x0, h_eff, steps, &mut rng);
    Ok(Trajectory { h: h_eff, t_end, dim: x0.len(), values, stream, model_kind: m.kind(), frozen_at })
}

fn run_with_rng<T: Real>(m: &Model<T>, x0: &[T], h: T, steps: usize, rng: &mut ChaCha8Rng) -> (Vec<T>, Option<usize>) {
    let sqrt_h = h.sqrt().as_f64();
    sweep(m, x0, h, steps, || {
        let z: f64 = rng.sample(StandardNormal);
        T::lit(z * sqrt_h)
    })
}

/// Simulates one path on `increments.len()` steps of size `h` with the given
/// Brownian increments. Used to couple paths at different step sizes.
pub fn simulate_path_with_increments<T: Real>(m: &Model<T>, x0: &[T], h: T, increments: &[T]) -> Result<Trajectory<T>> {
    let m = m.clone().validate()?;
    check_inputs(&m, x0, h)?;
    if increments.is_empty() {
        return Err(Error::Domain("no increments".into()));
    }
    let mut it = increments.iter();
    let (values, frozen_at) = sweep(&m, x0, h, increments.len(), || *it.next().expect("one increment per step"));
    Ok(Trajectory {
        h,
        t_end: h * T::from_usize_lossy(increments.len()),
        dim: x0.len(),
        values,
        stream: RandomStreamSpec::new(0, 0),
        model_kind: m.kind(),
        frozen_at,
    })
}

/// Sums consecutive blocks of `factor` increments: the increments of the same
/// Brownian path on a grid `factor` times coarser.
pub fn coarsen_increments<T: Real>(fine: &[T], factor: usize) -> Vec<T> {
    fine.chunks(factor).map(|c| c.iter().copied().sum()).collect()
}

/// Per-path quantities kept after a trajectory is discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PathSummary<T> {
    /// `|X|` at the ensemble's recording nodes.
    pub node_norms: Vec<T>,
    /// Freeze time, if the path overflowed.
    pub frozen_at: Option<T>,
    /// `sup log|X(t)| / log t` over the tail window.
    pub tail_log_ratio: Option<T>,
    /// `sup log|X(t)| / t` over the tail window.
    pub tail_rate: Option<T>,
    /// Tail points where `|X|` was below the log floor.
    pub floored: usize,
    /// Every component stayed strictly positive.
    pub positive: bool,
}

/// Ensemble configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EnsembleSpec<T> {
    pub model: Model<T>,
    pub init: InitialCondition<T>,
    pub h: T,
    pub t_end: T,
    pub n_paths: usize,
    pub master_seed: u64,
    /// Recording times; snapped to the nearest grid node.
    pub nodes: Vec<T>,
    /// Tail window for the almost-sure statistics; `[T/2, T]` when absent.
    #[serde(default)]
    pub tail: Option<(T, T)>,
}

/// Per-path summaries of an ensemble, in path order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Ensemble<T> {
    pub node_times: Vec<T>,
    pub h: T,
    pub t_end: T,
    pub master_seed: u64,
    pub first_path: u64,
    pub summaries: Vec<PathSummary<T>>,
}

impl<T: Real> Ensemble<T> {
    pub fn n_paths(&self) -> usize {
        self.summaries.len()
    }

    /// Appends a consecutive block of paths simulated with the same spec.
    pub fn merge(mut self, other: Ensemble<T>) -> Result<Ensemble<T>> {
        if self.node_times != other.node_times || self.h != other.h || self.t_end != other.t_end {
            return Err(Error::GridMismatch);
        }
        if self.master_seed != other.master_seed || self.first_path + self.summaries.len() as u64 != other.first_path {
            return Err(Error::Domain("ensembles are not consecutive blocks of one stream family".into()));
        }
        self.summaries.extend(other.summaries);
        Ok(self)
    }
}

fn node_indices<T: Real>(nodes: &[T], h: T, steps: usize) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = Vec::with_capacity(nodes.len());
    for &t in nodes {
        if !(t >= T::zero()) {
            return Err(Error::Domain(format!("recording time {t} is negative")));
        }
        let k = (t / h).round().to_usize().unwrap_or(usize::MAX);
        if k > steps {
            return Err(Error::Domain(format!("recording time {t} beyond the horizon")));
        }
        if idx.last() != Some(&k) {
            idx.push(k);
        }
    }
    if idx.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Domain("recording times must be increasing".into()));
    }
    Ok(idx)
}

/// Reduces a trajectory to its summary.
pub fn summarize<T: Real>(tr: &Trajectory<T>, node_idx: &[usize], tail: (T, T)) -> PathSummary<T> {
    let valid = tr.frozen_at.unwrap_or(usize::MAX);
    let node_norms = node_idx.iter().map(|&k| tr.norm(k)).collect();
    let floor = T::lit(LOG_FLOOR).max(T::min_positive_value());
    let (mut ratio, mut rate, mut floored) = (None::<T>, None::<T>, 0);
    let lo = (tail.0 / tr.h).ceil().to_usize().unwrap_or(0);
    let hi = (tail.1 / tr.h).floor().to_usize().unwrap_or(0).min(tr.len() - 1);
    for n in lo..=hi.min(valid.saturating_sub(1)) {
        let t = tr.t_at(n);
        if t <= T::one() {
            continue;
        }
        let x = tr.norm(n);
        if x < floor {
            floored += 1;
        }
        let lx = x.max(floor).ln();
        let (r, e) = (lx / t.ln(), lx / t);
        ratio = Some(ratio.map_or(r, |v| v.max(r)));
        rate = Some(rate.map_or(e, |v| v.max(e)));
    }
    let positive = tr.values.iter().all(|v| *v > T::zero());
    PathSummary {
        node_norms,
        frozen_at: tr.frozen_at.map(|n| tr.t_at(n)),
        tail_log_ratio: ratio,
        tail_rate: rate,
        floored,
        positive,
    }
}

/// Validated model, step count, step, node indices and tail window.
type Checked<T> = (Model<T>, usize, T, Vec<usize>, (T, T));

impl<T: Real> EnsembleSpec<T> {
    fn check(&self) -> Result<Checked<T>> {
        let m = self.model.clone().validate()?;
        self.init.check(m.dim())?;
        if self.n_paths == 0 {
            return Err(Error::EmptyEnsemble);
        }
        let limit = max_step(&m)?;
        if self.h > limit * (T::one() + T::tol(1e-12)) {
            return Err(Error::StepTooLarge { h: self.h.as_f64(), limit: limit.as_f64() });
        }
        let (steps, h) = grid(self.h, self.t_end)?;
        let idx = node_indices(&self.nodes, h, steps)?;
        let half = self.t_end / T::lit(2.0);
        let tail = self.tail.unwrap_or((half, self.t_end));
        Ok((m, steps, h, idx, tail))
    }

    /// Simulates and summarises one path.
    pub fn path(&self, index: u64) -> Result<(Trajectory<T>, PathSummary<T>)> {
        let (m, steps, h, idx, tail) = self.check()?;
        let tr = self.run_path(&m, steps, h, index);
        let s = summarize(&tr, &idx, tail);
        Ok((tr, s))
    }

    fn run_path(&self, m: &Model<T>, steps: usize, h: T, index: u64) -> Trajectory<T> {
        let stream = RandomStreamSpec::new(self.master_seed, index);
        let mut rng = stream.rng();
        let x0 = self.init.realize(m.dim(), &mut rng);
        let (values, frozen_at) = run_with_rng(m, &x0, h, steps, &mut rng);
        Trajectory { h, t_end: self.t_end, dim: x0.len(), values, stream, model_kind: m.kind(), frozen_at }
    }

    /// Node times after snapping to the grid.
    pub fn node_times(&self) -> Result<Vec<T>> {
        let (_, _, h, idx, _) = self.check()?;
        Ok(idx.iter().map(|&k| T::from_usize_lossy(k) * h).collect())
    }
}

/// Simulates all `n_paths` paths, in parallel on the current rayon pool.
pub fn simulate_ensemble<T: Real>(spec: &EnsembleSpec<T>) -> Result<Ensemble<T>> {
    simulate_ensemble_range(spec, 0..spec.n_paths as u64)
}

/// Simulates the paths with indices in `range`. Summaries come back in index
/// order whatever the execution order.
pub fn simulate_ensemble_range<T: Real>(spec: &EnsembleSpec<T>, range: Range<u64>) -> Result<Ensemble<T>> {
    let (m, steps, h, idx, tail) = spec.check()?;
    if range.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let first = range.start;
    let summaries: Vec<PathSummary<T>> = range
        .into_par_iter()
        .map(|k| summarize(&spec.run_path(&m, steps, h, k), &idx, tail))
        .collect();
    Ok(Ensemble {
        node_times: idx.iter().map(|&k| T::from_usize_lossy(k) * h).collect(),
        h,
        t_end: spec.t_end,
        master_seed: spec.master_seed,
        first_path: first,
        summaries,
    })
}

/// Simulates paths `range` and hands each full trajectory to `sink` in index order.
pub fn for_each_path<T: Real, F: FnMut(&Trajectory<T>) -> Result<()>>(spec: &EnsembleSpec<T>, range: Range<u64>, mut sink: F) -> Result<()> {
    let (m, steps, h, _, _) = spec.check()?;
    for k in range {
        sink(&spec.run_path(&m, steps, h, k))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn scalar(a: f64, b: f64, s: f64, r: f64, q: f64) -> Model<f64> {
        ScalarPantographModel::new(a, b, s, r, q).into()
    }

    #[test]
    fn deterministic_decay() {
        let h = 0.001;
        let tr = simulate_path(&scalar(-1.0, 0.0, 0.0, 0.0, 0.5), &[1.0], h, 1.0, RandomStreamSpec::new(1, 0)).unwrap();
        let end = tr.values[tr.len() - 1];
        assert!((end - (-1.0f64).exp()).abs() <= 5.0 * h);
    }

    #[test]
    fn same_seed_same_path() {
        let m = scalar(-2.0, 1.0, 0.1, 0.1, 0.5);
        let s = RandomStreamSpec::new(42, 7);
        let a = simulate_path(&m, &[1.0], 0.01, 10.0, s).unwrap();
        let b = simulate_path(&m, &[1.0], 0.01, 10.0, s).unwrap();
        assert_eq!(a.values, b.values);
        let c = simulate_path(&m, &[1.0], 0.01, 10.0, RandomStreamSpec::new(42, 8)).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn step_guard_and_initial() {
        let m = scalar(-20.0, 1.0, 0.1, 0.1, 0.5);
        assert!(matches!(simulate_path(&m, &[1.0], 0.01, 1.0, RandomStreamSpec::new(0, 0)), Err(Error::StepTooLarge { .. })));
        let m = scalar(-1.0, 1.0, 0.1, 0.1, 0.5);
        assert!(matches!(simulate_path(&m, &[f64::NAN], 0.01, 1.0, RandomStreamSpec::new(0, 0)), Err(Error::InvalidInitial(_))));
    }

    #[test]
    fn delayed_read_stays_behind() {
        // a value planted ahead of the current node must never be read
        let values = vec![1.0, 2.0, 3.0, f64::NAN];
        for n in 0..3 {
            for q in [0.01, 0.5, 0.99] {
                assert!(delayed(&values, 1, 0, n, q).is_finite());
            }
        }
        assert_eq!(delayed(&values, 1, 0, 2, 0.5), 2.0);
        assert_eq!(delayed(&values, 1, 0, 2, 0.75), 2.5);
    }

    #[test]
    fn overflow_freezes() {
        let m = scalar(9.0, 1.0, 0.0, 0.0, 0.5);
        let tr = simulate_path(&m, &[1.0], 0.01, 100.0, RandomStreamSpec::new(0, 0)).unwrap();
        let k = tr.frozen_at.expect("frozen");
        assert!(tr.values[k - 1].abs() <= 1e150);
        assert!(tr.values[k..].iter().all(|v| *v == tr.values[k - 1]));
    }

    #[test]
    fn multi_merges_equal_factors() {
        let m: Model<f64> = MultiDelayModel {
            a: -1.0,
            b: vec![0.5],
            q: vec![0.5],
            sigma: 0.2,
            sigma_delayed: vec![0.1],
            r: vec![0.5],
        }
        .into();
        let s = scalar(-1.0, 0.5, 0.2, 0.1, 0.5);
        let st = RandomStreamSpec::new(3, 1);
        let a = simulate_path(&m, &[1.0], 0.01, 5.0, st).unwrap();
        let b = simulate_path(&s, &[1.0], 0.01, 5.0, st).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn csv_dump_headers() {
        let a = DenseMatrix::<f64>::from_diag(&[-1.0, -2.0]);
        let z = DenseMatrix::zeros(2, 2);
        let m: Model<f64> = MatrixModel::new(a, z.clone(), DenseMatrix::identity(2).scale(0.1), z, 0.5).into();
        let tr = simulate_path(&m, &[1.0, 1.0], 0.01, 0.02, RandomStreamSpec::new(0, 0)).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x_1,x_2\r\n"));
        assert_eq!(s.lines().count(), 4);
    }
}
