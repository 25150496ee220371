//! Subcommand implementations.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use panto_core::num::log_spaced;
use panto_core::sdesim::{for_each_path, max_step};
use panto_core::stats::ClaimKind;
use panto_core::{
    classify_scalar, detsolver, estimate_as_exponent, estimate_moment_curve, fit_exponential_rate,
    fit_polynomial_exponent, matrix_classify, multi_delay_classify, simulate_ensemble, verify_report, Ensemble,
    EnsembleSpec, EstimateKind, ExponentEstimate, InitialCondition, Model, MomentCurve, Regime, Report, Verdict,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, Format, Manifest};
use crate::exit::CliError;

/// How `classify` prints its report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Display {
    Table,
    Json,
    Both,
}

/// Analytic report for the configured model.
pub fn analytic(cfg: &ExperimentConfig) -> Result<Report, CliError> {
    Ok(match &cfg.model {
        Model::Scalar(m) => classify_scalar(m, cfg.analysis.p)?,
        Model::Multi(m) => multi_delay_classify(m)?,
        Model::Matrix(m) => matrix_classify(m, cfg.analysis.matrix_mode)?,
    })
}

/// Polynomially bounded, or exponentially non-increasing.
pub fn bounded(r: &Report) -> bool {
    match r.regime {
        Regime::Polynomial => true,
        Regime::Exponential => r.exp_rate_mean.is_some_and(|v| v <= 0.0),
        Regime::Unsupported => false,
    }
}

#[derive(Serialize)]
struct Classified<'a> {
    model: &'static str,
    bounded: bool,
    #[serde(flatten)]
    report: &'a Report,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), |x| x.to_string())
}

fn table(kind: &str, r: &Report) -> String {
    let mut rows = vec![
        ("model", kind.to_owned()),
        ("regime", format!("{:?}", r.regime).to_lowercase()),
        ("p", r.p.to_string()),
        ("alpha_mean", opt(r.alpha_mean)),
        ("alpha_as", opt(r.alpha_as)),
        ("exp_rate_mean", opt(r.exp_rate_mean)),
        ("exp_rate_as", opt(r.exp_rate_as)),
        ("stable_mean", opt(r.stable_mean)),
        ("stable_as", opt(r.stable_as)),
        ("bounded", bounded(r).to_string()),
        ("sharp", r.sharp.to_string()),
        ("source", r.source.clone()),
    ];
    if let Some(l) = &r.lyapunov {
        rows.push(("gamma_lo2", l.gamma_lo2.to_string()));
        rows.push(("gamma_hi2", l.gamma_hi2.to_string()));
    }
    for n in &r.notes {
        rows.push(("note", n.clone()));
    }
    rows.iter().map(|(k, v)| format!("{k:<14} {v}\n")).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn prepare(cfg: &ExperimentConfig, command: &str) -> Result<std::path::PathBuf, CliError> {
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    write_json(&dir.join("manifest.json"), &Manifest::new(command, cfg))?;
    Ok(dir)
}

pub fn classify(cfg: &ExperimentConfig, display: Display, out: &mut dyn Write) -> Result<Report, CliError> {
    let r = analytic(cfg)?;
    let doc = Classified { model: cfg.model.kind(), bounded: bounded(&r), report: &r };
    if matches!(display, Display::Table | Display::Both) {
        write!(out, "{}", table(cfg.model.kind(), &r))?;
    }
    if matches!(display, Display::Json | Display::Both) {
        writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    }
    if cfg.output.directory.is_some() {
        let dir = prepare(cfg, "classify")?;
        write_json(&dir.join("classify.json"), &doc)?;
    }
    if !r.is_supported() {
        return Err(CliError::Regime(r.notes.join("; ")));
    }
    Ok(r)
}

/// Fills in the defaulted step size and fit window.
fn resolve_sim(cfg: &mut ExperimentConfig) -> Result<(), CliError> {
    if cfg.sim.h.is_none() {
        cfg.sim.h = Some(max_step(&cfg.model)?.min(0.01));
    }
    if cfg.analysis.window.is_none() {
        cfg.analysis.window = Some(cfg.window());
    }
    Ok(())
}

fn ensemble_spec(cfg: &ExperimentConfig) -> EnsembleSpec<f64> {
    let (lo, hi) = cfg.window();
    EnsembleSpec {
        model: cfg.model.clone(),
        init: cfg.sim.x0.clone(),
        h: cfg.sim.h.expect("resolved step"),
        t_end: cfg.sim.t_end,
        n_paths: cfg.sim.n_paths,
        master_seed: cfg.sim.master_seed,
        nodes: log_spaced(lo, hi, cfg.analysis.n_nodes),
        tail: cfg.analysis.tail,
    }
}

#[derive(Serialize)]
struct Exponents<'a> {
    report: &'a Report,
    estimates: &'a [ExponentEstimate<f64>],
    n_paths: usize,
    frozen_paths: usize,
    frozen_fraction: f64,
}

/// Everything `verify` computes.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub curve: MomentCurve<f64>,
    pub estimates: Vec<ExponentEstimate<f64>>,
    pub verdict: Option<Verdict<f64>>,
}

fn estimates(cfg: &ExperimentConfig, report: &Report, ens: &Ensemble<f64>, curve: &MomentCurve<f64>) -> Result<Vec<ExponentEstimate<f64>>, CliError> {
    let window = (curve.t_nodes[0], curve.t_nodes[curve.t_nodes.len() - 1]);
    let almost_sure = cfg.analysis.almost_sure.unwrap_or(cfg.sim.t_end >= 100.0);
    let mut out = Vec::new();
    if report.regime == Regime::Exponential {
        out.push(fit_exponential_rate(curve, window)?);
        if almost_sure && report.exp_rate_as.is_some() {
            out.push(estimate_as_exponent(ens, EstimateKind::ExponentialAs)?);
        }
    } else {
        out.push(fit_polynomial_exponent(curve, window)?);
        if almost_sure && report.alpha_as.is_some() {
            out.push(estimate_as_exponent(ens, EstimateKind::PolynomialAs)?);
        }
    }
    Ok(out)
}

fn plot_script(curve: &MomentCurve<f64>, report: &Report) -> String {
    let (t0, m0) = (curve.t_nodes[0], curve.m_hat[0]);
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key top right\n");
    s.push_str("set xlabel 't'\n");
    s.push_str(&format!("set ylabel 'E|X(t)|^{}'\n", curve.p));
    s.push_str(&format!("t0 = {t0:.17e}\nm0 = {m0:.17e}\n"));
    let overlay = match (report.regime, report.alpha_mean, report.exp_rate_mean) {
        (Regime::Polynomial, Some(a), _) => {
            s.push_str("set logscale xy\n");
            s.push_str(&format!("alpha = {a:.17e}\n"));
            ", m0 * (x / t0)**alpha with lines title sprintf('analytic slope %.4f', alpha)"
        }
        (Regime::Exponential, _, Some(r)) => {
            s.push_str("set logscale y\n");
            s.push_str(&format!("rate = {r:.17e}\n"));
            ", m0 * exp(rate * (x - t0)) with lines title sprintf('analytic rate %.4f', rate)"
        }
        _ => {
            s.push_str("set logscale xy\n");
            ""
        }
    };
    s.push_str(&format!(
        "plot 'moments.csv' skip 1 using 1:2:3 with yerrorbars title 'empirical'{overlay}\n"
    ));
    s
}

fn simulate_and_estimate(cfg: &mut ExperimentConfig, command: &str, with_verdict: bool) -> Result<Outcome, CliError> {
    let report = analytic(cfg)?;
    if with_verdict && !report.is_supported() {
        return Err(CliError::Regime(report.notes.join("; ")));
    }
    resolve_sim(cfg)?;
    let spec = ensemble_spec(cfg);
    let ens = simulate_ensemble(&spec)?;
    let curve = estimate_moment_curve(&ens, report.p)?;
    let est = estimates(cfg, &report, &ens, &curve)?;
    let verdict = if with_verdict { Some(verify_report(&report, &est, &cfg.analysis.tolerances)?) } else { None };

    let dir = prepare(cfg, command)?;
    if cfg.output.wants(Format::Csv) {
        let mut w = create(&dir.join("moments.csv"))?;
        curve.write_csv(&mut w)?;
        w.flush()?;
    }
    if cfg.output.wants(Format::Json) {
        let frozen = ens.summaries.iter().filter(|s| s.frozen_at.is_some()).count();
        write_json(
            &dir.join("exponents.json"),
            &Exponents {
                report: &report,
                estimates: &est,
                n_paths: ens.n_paths(),
                frozen_paths: frozen,
                frozen_fraction: frozen as f64 / ens.n_paths() as f64,
            },
        )?;
        if let Some(v) = &verdict {
            write_json(&dir.join("verdict.json"), v)?;
        }
    }
    if cfg.output.plot {
        fs::write(dir.join("plot.gp"), plot_script(&curve, &report))?;
    }
    if cfg.output.dump_paths {
        dump_paths(&spec, &dir, 0..spec.n_paths as u64)?;
    }
    Ok(Outcome { report, curve, estimates: est, verdict })
}

fn dump_paths(spec: &EnsembleSpec<f64>, dir: &Path, range: std::ops::Range<u64>) -> Result<(), CliError> {
    let mut k = range.start;
    for_each_path(spec, range, |tr| {
        let mut w = BufWriter::new(File::create(dir.join(format!("path_{k}.csv")))?);
        tr.write_csv(&mut w)?;
        w.flush()?;
        k += 1;
        Ok(())
    })?;
    Ok(())
}

pub fn verify(cfg: &mut ExperimentConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let o = simulate_and_estimate(cfg, "verify", true)?;
    let v = o.verdict.as_ref().expect("verdict requested");
    for w in &v.warnings {
        writeln!(out, "warning: {w}")?;
    }
    for c in &v.checks {
        let claim = match c.claim {
            ClaimKind::Bound => "bound",
            ClaimKind::Sharp => "sharp",
            ClaimKind::Coherence => "coherence",
        };
        writeln!(
            out,
            "{:<4} {:<9} {:<16} {:<14} analytic {:>10.5} empirical {:>10.5} tol {:.3} margin {:+.5}",
            if c.pass { "PASS" } else { "FAIL" },
            claim,
            format!("{:?}", c.estimate),
            c.source,
            c.analytic,
            c.empirical,
            c.tol,
            c.margin
        )?;
    }
    if !v.pass {
        return Err(CliError::Verdict);
    }
    Ok(o)
}

pub fn moments(cfg: &mut ExperimentConfig, out: &mut dyn Write) -> Result<Outcome, CliError> {
    let o = simulate_and_estimate(cfg, "moments", false)?;
    for e in &o.estimates {
        writeln!(out, "{:?} {:.6} over [{}, {}] r2 {:.5}", e.kind, e.value, e.window.0, e.window.1, e.r_squared)?;
        if let Some(w) = &e.warning {
            writeln!(out, "warning: {w}")?;
        }
    }
    Ok(o)
}

/// Writes `path_0.csv`, or every path with `output.dump_paths`.
pub fn simulate(cfg: &mut ExperimentConfig, out: &mut dyn Write) -> Result<usize, CliError> {
    resolve_sim(cfg)?;
    let spec = ensemble_spec(cfg);
    let dir = prepare(cfg, "simulate")?;
    let n = if cfg.output.dump_paths { spec.n_paths as u64 } else { 1 };
    dump_paths(&spec, &dir, 0..n)?;
    writeln!(out, "wrote {n} path file(s) to {}", dir.display())?;
    Ok(n as usize)
}

/// Solves the drift part of the model deterministically; writes `det.csv`.
pub fn det(cfg: &mut ExperimentConfig, out: &mut dyn Write) -> Result<f64, CliError> {
    let x0 = match &cfg.sim.x0 {
        InitialCondition::Deterministic { value } if value.to_vec().len() == 1 => value.to_vec()[0],
        _ => return Err(CliError::Config("det needs a scalar deterministic x0".into())),
    };
    let (a, b, q) = match &cfg.model {
        Model::Scalar(m) => (m.a, vec![m.b], vec![m.q]),
        Model::Multi(m) => (m.a, m.b.clone(), m.q.clone()),
        Model::Matrix(_) => return Err(CliError::Config("det supports scalar and multi-delay models".into())),
    };
    let h = *cfg.sim.h.get_or_insert_with(|| detsolver::default_step(a, &b));
    let sol = detsolver::solve_multi_delay_ode(a, &b, &q, x0, cfg.sim.t_end, h)?;
    let dir = prepare(cfg, "det")?;
    let mut w = create(&dir.join("det.csv"))?;
    sol.write_csv(&mut w)?;
    w.flush()?;
    let last = sol.values()[sol.len() - 1];
    writeln!(out, "x({}) = {last:.17e}", sol.horizon())?;
    Ok(last)
}
