//! Run summaries, acceptance checks and the human-readable report.

use super::run::{FilterReport, Paths, PointOutcome, RunKind, RunOutput, Stat};
use super::PipelineError;
use crate::model::{DerivedRates, Regime};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

/// Serializes non-finite numbers as `null` and reads `null` back as NaN.
pub(crate) mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Acceptance bounds applied to every point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute bound on the mean fitted gain.
    pub s_abs: f64,
    /// Bound on ratio deviations in units of the combined sigma.
    pub ratio_sigmas: f64,
    /// Relative bound on normalized variances.
    pub variance_rel: f64,
    /// Relative bound on the reference linewidth.
    pub width_rel: f64,
    /// Significance level of the detuned-channel symmetry test.
    pub symmetry_alpha: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    s_abs: 0.05,
    ratio_sigmas: 1.0,
    variance_rel: 0.05,
    width_rel: 0.05,
    symmetry_alpha: 0.01,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub description: String,
    #[serde(with = "nullable")]
    pub value: f64,
    #[serde(with = "nullable")]
    pub bound: f64,
    pub pass: bool,
}

fn check(name: &str, description: String, value: f64, bound: f64) -> Check {
    Check {
        name: name.into(),
        description,
        value,
        bound,
        pass: value.is_finite() && value <= bound,
    }
}

/// Upper-tail probability of a chi-square statistic.
pub fn chi2_sf(x: f64, dof: usize) -> f64 {
    match ChiSquared::new(dof as f64) {
        Ok(d) => d.sf(x),
        Err(_) => f64::NAN,
    }
}

/// Acceptance checks for the quantities a point produced.
pub fn point_checks(p: &PointOutcome) -> Vec<Check> {
    let t = TOLERANCES;
    let mut out = Vec::new();
    let stat = |n: &str| p.stat(n).filter(|s| s.theory.is_some());
    if let Some(s) = stat("s_hat") {
        out.push(check(
            "s_hat",
            format!("|mean s_hat - s| <= {}", t.s_abs),
            (s.mean - s.theory.unwrap()).abs(),
            t.s_abs,
        ));
    }
    for name in ["ratio_plus", "ratio_minus"] {
        if let Some(s) = stat(name) {
            out.push(check(
                name,
                format!("|mean {name} - theory| <= {} combined sigma ({:.4e})", t.ratio_sigmas, s.combined),
                (s.mean - s.theory.unwrap()).abs(),
                t.ratio_sigmas * s.combined,
            ));
        }
    }
    for name in ["var_x_norm", "var_y_norm"] {
        if let Some(s) = stat(name) {
            out.push(check(
                name,
                format!("|mean {name} / theory - 1| <= {}", t.variance_rel),
                (s.mean / s.theory.unwrap() - 1.0).abs(),
                t.variance_rel,
            ));
        }
    }
    if let Some(s) = stat("width0_hz") {
        out.push(check(
            "width0_hz",
            format!("|detuned channel width / gamma_eff - 1| <= {}", t.width_rel),
            (s.mean / s.theory.unwrap() - 1.0).abs(),
            t.width_rel,
        ));
    }
    let chis: Vec<f64> = p
        .repetitions
        .iter()
        .filter_map(|r| r.measurements.iter().find(|m| m.name == "symmetry_chi2"))
        .map(|m| m.value)
        .collect();
    if !chis.is_empty() {
        let total: f64 = chis.iter().sum();
        let pval = chi2_sf(total, 2 * chis.len());
        out.push(Check {
            name: "detuned_symmetry".into(),
            description: format!(
                "detuned x/y channel fits indistinguishable: chi2 = {total:.3} on {} dof, p >= {}",
                2 * chis.len(),
                t.symmetry_alpha
            ),
            value: pval,
            bound: t.symmetry_alpha,
            pass: pval.is_finite() && pval >= t.symmetry_alpha,
        });
    }
    for (a, b) in [
        ("het_one_plus_s", "var_inferred_one_plus_s"),
        ("het_one_minus_s", "var_inferred_one_minus_s"),
    ] {
        if let (Some(x), Some(y)) = (p.stat(a), p.stat(b)) {
            let joint = if x.n > 1 && y.n > 1 {
                (x.std * x.std + y.std * y.std).sqrt()
            } else {
                (x.mean_sigma * x.mean_sigma + y.mean_sigma * y.mean_sigma).sqrt()
            };
            out.push(check(
                &format!("{a}_vs_variance"),
                format!("|{a} - {b}| <= joint sigma ({joint:.4e})"),
                (x.mean - y.mean).abs(),
                joint,
            ));
        }
    }
    out
}

/// Closed-form rates of a point, with non-finite values stored as null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesSummary {
    pub n_bar: f64,
    pub gamma_eff_hz: f64,
    pub gamma_par_hz: f64,
    pub s: f64,
    pub gamma_plus_hz: f64,
    pub gamma_minus_hz: f64,
    pub ratio: f64,
    #[serde(with = "nullable")]
    pub ratio_plus: f64,
    #[serde(with = "nullable")]
    pub ratio_minus: f64,
    pub weight_antistokes_broad: f64,
    pub var_x: f64,
    pub var_y: f64,
}

impl RatesSummary {
    pub fn from_rates(r: &DerivedRates) -> Self {
        let h = 1.0 / (2.0 * PI);
        Self {
            n_bar: r.n_bar,
            gamma_eff_hz: r.gamma_eff * h,
            gamma_par_hz: r.gamma_par * h,
            s: r.s,
            gamma_plus_hz: r.gamma_plus * h,
            gamma_minus_hz: r.gamma_minus * h,
            ratio: r.ratios.plain,
            ratio_plus: r.ratios.plus,
            ratio_minus: r.ratios.minus,
            weight_antistokes_broad: r.weights.antistokes_broad,
            var_x: (2.0 * r.n_bar + 1.0) / (4.0 * (1.0 + r.s)),
            var_y: (2.0 * r.n_bar + 1.0) / (4.0 * (1.0 - r.s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub name: String,
    pub n: usize,
    #[serde(with = "nullable")]
    pub mean: f64,
    #[serde(with = "nullable")]
    pub std: f64,
    #[serde(with = "nullable")]
    pub mean_sigma: f64,
    #[serde(with = "nullable")]
    pub combined: f64,
    pub theory: Option<f64>,
}

impl From<&Stat> for StatRecord {
    fn from(s: &Stat) -> Self {
        Self {
            name: s.name.clone(),
            n: s.n,
            mean: s.mean,
            std: s.std,
            mean_sigma: s.mean_sigma,
            combined: s.combined,
            theory: s.theory.filter(|t| t.is_finite()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub index: usize,
    pub label: String,
    pub s_set: Option<f64>,
    pub epsilon_c: Option<f64>,
    pub status: String,
    pub analytic_only: bool,
    pub rates: Option<RatesSummary>,
    pub regime: Option<Regime>,
    pub seeds: Vec<u64>,
    pub demod_phases: Vec<f64>,
    pub stats: Vec<StatRecord>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub fits_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: RunKind,
    pub config_hash: String,
    pub seed: u64,
    pub repetitions: usize,
    pub duration_s: f64,
    pub paths: Paths,
    pub window: String,
    pub overlap: f64,
    pub filter: Option<FilterReport>,
    pub tolerances: Tolerances,
    pub points: Vec<PointSummary>,
}

fn fit_warnings(p: &PointOutcome) -> Vec<String> {
    let mut set = BTreeSet::new();
    for r in &p.repetitions {
        let mut fits = Vec::new();
        for sb in [&r.sideband, &r.heterodyne].into_iter().flatten() {
            fits.push(("reference", &sb.reference));
            fits.push(("double", &sb.double));
            if !sb.resolution.pass {
                set.insert(format!(
                    "resolution: rbw {:.3} Hz exceeds {:.3} Hz",
                    sb.resolution.rbw, sb.resolution.limit
                ));
            }
        }
        if let Some(qf) = &r.quadrature {
            if let Some(ps) = &qf.phase_search {
                if ps.flat {
                    set.insert("demodulation phase search: channel variance is phase independent".to_string());
                }
            }
            for f in &qf.fits {
                fits.push(("quadrature", f));
            }
        }
        for (what, f) in fits {
            for w in &f.warnings {
                // strip numbers so repeated warnings collapse
                let key: String = w.split(':').next().unwrap_or(w).to_string();
                set.insert(format!("{what} fit: {key}"));
            }
        }
    }
    set.into_iter().collect()
}

pub fn summarize(cfg_window: &str, overlap: f64, repetitions: usize, duration: f64, out: &RunOutput) -> RunSummary {
    let points = out
        .points
        .iter()
        .map(|p| PointSummary {
            index: p.index,
            label: p.label.clone(),
            s_set: p.s_set.filter(|s| s.is_finite()),
            epsilon_c: Some(p.epsilon_c).filter(|e| e.is_finite()),
            status: p.status().to_string(),
            analytic_only: p.analytic_only,
            rates: p.rates.as_ref().map(RatesSummary::from_rates),
            regime: p.regime,
            seeds: p.repetitions.iter().map(|r| r.seed).collect(),
            demod_phases: p
                .repetitions
                .iter()
                .filter_map(|r| r.quadrature.as_ref().map(|q| q.demod_phase))
                .collect(),
            stats: p.stats.iter().map(StatRecord::from).collect(),
            checks: p.checks.clone(),
            warnings: fit_warnings(p),
            errors: p.errors.clone(),
            fits_file: (!p.repetitions.is_empty()).then(|| format!("points/{}/fits.json", p.label)),
        })
        .collect();
    RunSummary {
        kind: out.kind,
        config_hash: out.config_hash.clone(),
        seed: out.seed,
        repetitions,
        duration_s: duration,
        paths: out.paths,
        window: cfg_window.to_string(),
        overlap,
        filter: out.points.iter().find_map(|p| p.filter),
        tolerances: TOLERANCES,
        points,
    }
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6}")
    } else {
        "n/a".into()
    }
}

/// Human-readable report. Depends only on the summary, so reruns are byte-stable.
pub fn render_report(s: &RunSummary, gaps: &[String]) -> String {
    let mut o = String::new();
    let w = &mut o;
    let _ = writeln!(w, "optosqueeze report: {}", s.kind.as_str());
    let _ = writeln!(w, "config_hash = {}", s.config_hash);
    let _ = writeln!(w, "seed = {}  repetitions = {}  duration = {} s", s.seed, s.repetitions, s.duration_s);
    let _ = writeln!(w, "spectra: {} window, overlap {}", s.window, s.overlap);
    match &s.filter {
        Some(f) => {
            let _ = writeln!(
                w,
                "lock-in filter: Kaiser FIR, {} taps, pass edge {:.1} Hz, cutoff {:.1} Hz, stop edge {:.1} Hz, \
                 ripple {:.4} dB, stopband {:.1} dB, decimation {} (output {:.1} Hz)",
                f.taps,
                f.pass_edge_hz,
                f.cutoff_hz,
                f.stop_edge_hz,
                f.passband_ripple_db,
                f.stopband_atten_db,
                f.decimation,
                f.output_rate_hz
            );
        }
        None => {
            let _ = writeln!(w, "lock-in filter: not used");
        }
    }
    let t = &s.tolerances;
    let _ = writeln!(
        w,
        "tolerances: |s_hat - s| <= {}, ratios within {} combined sigma, variances within {}%, \
         reference width within {}%, symmetry p >= {}",
        t.s_abs,
        t.ratio_sigmas,
        t.variance_rel * 100.0,
        t.width_rel * 100.0,
        t.symmetry_alpha
    );
    for p in &s.points {
        let _ = writeln!(w);
        let _ = writeln!(w, "point {} [{}]", p.label, p.status);
        if p.regime.is_some_and(|r| r.quantum_squeezed) {
            let _ = writeln!(
                w,
                "  !!! QUANTUM-SQUEEZING REGIME (s > 2 n_bar): sideband spectra are analytic only, \
                 no component-backend synthesis was performed"
            );
        }
        if let Some(e) = p.epsilon_c {
            let _ = writeln!(w, "  epsilon_c = {}  (solved for the set gain)", fmt(e));
        }
        if let Some(r) = &p.rates {
            let _ = writeln!(
                w,
                "  configured: n_bar = {}   derived: gamma_eff = {} Hz, gamma_par = {} Hz, s = {}",
                fmt(r.n_bar),
                fmt(r.gamma_eff_hz),
                fmt(r.gamma_par_hz),
                fmt(r.s)
            );
            let _ = writeln!(
                w,
                "  theory: R = {}, R+ = {}, R- = {}, var_x = {}, var_y = {}",
                fmt(r.ratio),
                fmt(r.ratio_plus),
                fmt(r.ratio_minus),
                fmt(r.var_x),
                fmt(r.var_y)
            );
        }
        if let Some(g) = &p.regime {
            let _ = writeln!(
                w,
                "  regime: stable = {}, quantum_squeezed = {}, quantum_reachable = {}",
                g.stable, g.quantum_squeezed, g.quantum_reachable
            );
        }
        if !p.stats.is_empty() {
            let _ = writeln!(
                w,
                "  {:<26} {:>12} {:>12} {:>12} {:>12}",
                "quantity", "mean", "std", "fit sigma", "theory"
            );
            for st in &p.stats {
                let _ = writeln!(
                    w,
                    "  {:<26} {:>12} {:>12} {:>12} {:>12}",
                    st.name,
                    fmt(st.mean),
                    fmt(st.std),
                    fmt(st.mean_sigma),
                    st.theory.map_or("-".into(), fmt)
                );
            }
        }
        for c in &p.checks {
            let _ = writeln!(
                w,
                "  {} {}: {} (value {}, bound {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.description,
                fmt(c.value),
                fmt(c.bound)
            );
        }
        for x in &p.warnings {
            let _ = writeln!(w, "  warning: {x}");
        }
        for e in &p.errors {
            let _ = writeln!(w, "  error: {e}");
        }
    }
    if !gaps.is_empty() {
        let _ = writeln!(w);
        for g in gaps {
            let _ = writeln!(w, "missing: {g}");
        }
    }
    let pass = summary_passes(s) && gaps.is_empty();
    let _ = writeln!(w);
    let _ = writeln!(w, "overall: {}", if pass { "PASS" } else { "FAIL" });
    o
}

fn summary_passes(s: &RunSummary) -> bool {
    s.points
        .iter()
        .all(|p| p.status != "failed" && p.checks.iter().all(|c| c.pass))
}

#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub text: String,
    pub pass: bool,
    pub gaps: Vec<String>,
    pub summary: RunSummary,
}

/// Re-reads a run directory, lists missing artifacts and evaluates the checks.
pub fn report(dir: &Path) -> Result<ReportOutcome, PipelineError> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| PipelineError::Io(format!("cannot read {}: {e}", path.display())))?;
    let summary: RunSummary =
        serde_json::from_str(&text).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
    let mut gaps = Vec::new();
    if !dir.join("config.txt").exists() {
        gaps.push("config.txt".to_string());
    }
    for p in &summary.points {
        if let Some(f) = &p.fits_file {
            if !dir.join(f).exists() {
                gaps.push(format!("fit report {f}"));
            }
        }
    }
    let pass = summary_passes(&summary) && gaps.is_empty();
    Ok(ReportOutcome {
        text: render_report(&summary, &gaps),
        pass,
        gaps,
        summary,
    })
}
