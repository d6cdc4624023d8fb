//! End-to-end runs: synthesis, demodulation, spectra and fits per repetition,
//! aggregated per operating point.

use super::artifacts;
use super::config::RunConfig;
use super::report::{point_checks, Check};
use super::PipelineError;
use crate::detect::{
    lockin_demodulate, optimize_demod_phase, passband_edge, schedule_drive, synthesize_component_record,
    synthesize_wigner_record, LowpassFir, PhaseSearch,
};
use crate::fitting::{fit_double_pair, fit_quadrature, fit_single_pair, FitOptions, FitResult};
use crate::model::{DerivedRates, Regime};
use crate::record::{DriveTag, Record};
use crate::rng::derive_seed;
use crate::spectral::{resolution_check, welch_psd_pieces, Psd, ResolutionCheck};
use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

/// Analysis paths run at each point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paths {
    /// Component backend, sideband asymmetry fits.
    pub sideband: bool,
    /// Quadrature backend, lock-in channel fits and heterodyne widths.
    pub quadrature: bool,
}

impl Paths {
    pub const ALL: Paths = Paths { sideband: true, quadrature: true };
    pub const SIDEBAND: Paths = Paths { sideband: true, quadrature: false };
    pub const QUADRATURE: Paths = Paths { sideband: false, quadrature: true };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Simulate,
    SweepRatios,
    SweepVariances,
}

impl RunKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RunKind::Simulate => "simulate",
            RunKind::SweepRatios => "sweep-ratios",
            RunKind::SweepVariances => "sweep-variances",
        }
    }
}

/// Lock-in filter settings as realized, stated in every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub taps: usize,
    pub pass_edge_hz: f64,
    pub cutoff_hz: f64,
    pub stop_edge_hz: f64,
    pub passband_ripple_db: f64,
    pub stopband_atten_db: f64,
    pub decimation: usize,
    pub output_rate_hz: f64,
}

impl FilterReport {
    pub fn from_fir(f: &LowpassFir) -> Self {
        Self {
            taps: f.taps.len(),
            pass_edge_hz: f.pass_edge,
            cutoff_hz: f.cutoff,
            stop_edge_hz: f.stop_edge,
            passband_ripple_db: f.passband_ripple_db,
            stopband_atten_db: f.stopband_atten_db,
            decimation: f.decimation,
            output_rate_hz: f.sample_rate / f.decimation as f64,
        }
    }
}

/// A per-repetition estimate with its fit uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

fn meas(name: &str, value: f64, sigma: f64) -> Measurement {
    Measurement {
        name: name.into(),
        value,
        sigma,
    }
}

/// Reference and driven fits of the two heterodyne sidebands.
#[derive(Debug, Clone)]
pub struct SidebandFits {
    pub reference: FitResult,
    pub single_resonant: Option<FitResult>,
    pub double: FitResult,
    pub psd_detuned: Psd,
    pub psd_resonant: Psd,
    pub resolution: ResolutionCheck,
    /// Integrated density over mean square of the analysed samples.
    pub parseval: Vec<(String, f64)>,
}

#[derive(Debug, Clone)]
pub struct QuadratureFits {
    pub demod_phase: f64,
    pub phase_search: Option<PhaseSearch>,
    pub filter: FilterReport,
    /// Detuned x, detuned y, resonant x, resonant y.
    pub fits: [FitResult; 4],
    pub psds: [Psd; 4],
    pub parseval: Vec<(String, f64)>,
}

pub const QUAD_NAMES: [&str; 4] = ["chx_detuned", "chy_detuned", "chx_resonant", "chy_resonant"];

#[derive(Debug, Clone)]
pub struct Repetition {
    pub index: usize,
    pub seed: u64,
    pub sideband: Option<SidebandFits>,
    pub heterodyne: Option<SidebandFits>,
    pub quadrature: Option<QuadratureFits>,
    pub measurements: Vec<Measurement>,
    pub errors: Vec<String>,
}

/// Mean and spread of one quantity over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub name: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over repetitions (0 for a single repetition).
    pub std: f64,
    /// Mean of the per-repetition fit uncertainties.
    pub mean_sigma: f64,
    /// `sqrt(std^2 + mean_sigma^2)`.
    pub combined: f64,
    pub theory: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub index: usize,
    pub label: String,
    pub s_set: Option<f64>,
    pub epsilon_c: f64,
    pub rates: Option<DerivedRates>,
    pub regime: Option<Regime>,
    pub analytic_only: bool,
    pub repetitions: Vec<Repetition>,
    pub stats: Vec<Stat>,
    pub checks: Vec<Check>,
    pub errors: Vec<String>,
    pub filter: Option<FilterReport>,
}

impl PointOutcome {
    pub fn stat(&self, name: &str) -> Option<&Stat> {
        self.stats.iter().find(|s| s.name == name)
    }

    pub fn status(&self) -> &'static str {
        if !self.errors.is_empty() {
            "failed"
        } else if self.analytic_only {
            "analytic-only"
        } else {
            "ok"
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub kind: RunKind,
    pub config_hash: String,
    pub seed: u64,
    pub paths: Paths,
    pub points: Vec<PointOutcome>,
    pub out_dir: Option<PathBuf>,
}

fn mean_square(pieces: &[&[f64]]) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for p in pieces {
        for x in *p {
            s += x * x;
        }
        n += p.len();
    }
    s / n as f64
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    FitOptions {
        mask: cfg.fit_mask.clone(),
        ..FitOptions::default()
    }
}

/// Which synthesis backend produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Independent Lorentzian components per sideband.
    Components,
    /// Real quadrature trajectories; both sidebands carry one realization.
    Quadratures,
}

/// Welch spectra of the detuned and resonant segments of a heterodyne record,
/// reference single-pair fit for `gamma_eff`, then the constrained double fit.
pub fn analyze_sidebands(
    cfg: &RunConfig,
    rates: &DerivedRates,
    rec: &Record,
    backend: Backend,
) -> Result<SidebandFits, PipelineError> {
    let fs = rec.sample_rate;
    let seg = cfg.segment_for(fs, rates.gamma_minus);
    let det = rec.pieces(DriveTag::Detuned, 0);
    let res = rec.pieces(DriveTag::Resonant, 0);
    let psd_detuned =
        welch_psd_pieces(&det, fs, seg, cfg.overlap, cfg.window).map_err(|e| PipelineError::stage("spectral", e))?;
    let psd_resonant =
        welch_psd_pieces(&res, fs, seg, cfg.overlap, cfg.window).map_err(|e| PipelineError::stage("spectral", e))?;
    let parseval = vec![
        ("detuned".to_string(), psd_detuned.integrated_power() / mean_square(&det)),
        ("resonant".to_string(), psd_resonant.integrated_power() / mean_square(&res)),
    ];
    let f_s = (rec.frame.carrier + rec.frame.delta_lo) / (2.0 * PI);
    let f_as = (rec.frame.carrier - rec.frame.delta_lo) / (2.0 * PI);
    let opts = FitOptions {
        duplication: match backend {
            Backend::Components => 1.0,
            Backend::Quadratures => 2.0,
        },
        ..fit_options(cfg)
    };
    let reference = fit_single_pair(&psd_detuned, f_s, f_as, &opts).map_err(|e| PipelineError::stage("reference fit", e))?;
    let g_hz = reference.params[0];
    let g_sigma = reference.sigmas[0];
    let single_resonant = fit_single_pair(&psd_resonant, f_s, f_as, &opts).ok();
    let double = fit_double_pair(&psd_resonant, f_s, f_as, g_hz, g_sigma, &opts)
        .map_err(|e| PipelineError::stage("double fit", e))?;
    let resolution = resolution_check(&psd_resonant, rates.gamma_minus / (2.0 * PI));
    Ok(SidebandFits {
        reference,
        single_resonant,
        double,
        psd_detuned,
        psd_resonant,
        resolution,
        parseval,
    })
}

/// Lock-in demodulation at the reference phase (searched when not
/// configured) and Lorentzian fits of both channels in both drive states.
pub fn analyze_quadratures(cfg: &RunConfig, rates: &DerivedRates, rec: &Record) -> Result<QuadratureFits, PipelineError> {
    let mut d = cfg.detection();
    let pass = passband_edge(&rec.frame, rates);
    let phase_search = match cfg.demod_phase {
        Some(_) => None,
        None => Some(optimize_demod_phase(rec, &d, pass).map_err(|e| PipelineError::stage("phase search", e))?),
    };
    if let Some(ps) = &phase_search {
        d.demod_phase = ps.phase;
    }
    let out = lockin_demodulate(rec, &d, pass).map_err(|e| PipelineError::stage("lock-in", e))?;
    let (xd, yd) = out.pieces(DriveTag::Detuned);
    let (xr, yr) = out.pieces(DriveTag::Resonant);
    let seg = cfg.segment_for(out.sample_rate, rates.gamma_minus);
    let lo_hz = rec.frame.delta_lo / (2.0 * PI);
    let opts = fit_options(cfg);
    let mut psds = Vec::with_capacity(4);
    let mut fits = Vec::with_capacity(4);
    let mut parseval = Vec::new();
    for (name, pieces) in QUAD_NAMES.iter().zip([&xd, &yd, &xr, &yr]) {
        let psd = welch_psd_pieces(pieces, out.sample_rate, seg, cfg.overlap, cfg.window)
            .map_err(|e| PipelineError::stage("spectral", e))?;
        parseval.push((name.to_string(), psd.integrated_power() / mean_square(pieces)));
        let fit = fit_quadrature(&psd, lo_hz, &opts).map_err(|e| PipelineError::stage(&format!("{name} fit"), e))?;
        psds.push(psd);
        fits.push(fit);
    }
    let fits: [FitResult; 4] = fits.try_into().expect("four fits");
    let psds: [Psd; 4] = psds.try_into().expect("four spectra");
    Ok(QuadratureFits {
        demod_phase: d.demod_phase,
        phase_search,
        filter: FilterReport::from_fir(&out.filter),
        fits,
        psds,
        parseval,
    })
}

fn q(fit: &FitResult, name: &str) -> (f64, f64) {
    fit.quantity(name).map_or((f64::NAN, f64::NAN), |q| (q.value, q.sigma))
}

fn sideband_measurements(f: &SidebandFits, prefix: &str, out: &mut Vec<Measurement>) {
    let (s, ss) = q(&f.double, "s");
    if prefix.is_empty() {
        let (g, gs) = q(&f.reference, "width_hz");
        let (r, rs) = q(&f.reference, "ratio");
        let (n, ns) = q(&f.reference, "n_bar");
        let (rp, rps) = q(&f.double, "ratio_plus");
        let (rm, rms) = q(&f.double, "ratio_minus");
        out.push(meas("s_hat", s, ss));
        out.push(meas("ratio_plus", rp, rps));
        out.push(meas("ratio_minus", rm, rms));
        out.push(meas("ratio", r, rs));
        out.push(meas("n_bar_hat", n, ns));
        out.push(meas("gamma_eff_hz", g, gs));
        if let Some(single) = &f.single_resonant {
            let (r1, r1s) = q(single, "ratio");
            out.push(meas("ratio_resonant_single", r1, r1s));
        }
    } else {
        out.push(meas(&format!("{prefix}s_hat"), s, ss));
        out.push(meas(&format!("{prefix}one_plus_s"), 1.0 + s, ss));
        out.push(meas(&format!("{prefix}one_minus_s"), 1.0 - s, ss));
    }
}

/// Two-parameter (width, area) chi-square between the detuned channel fits.
fn symmetry_chi2(a: &FitResult, b: &FitResult) -> f64 {
    let d = Vector2::new(a.params[0] - b.params[0], a.params[1] - b.params[1]);
    let c = Matrix2::new(
        a.covariance[0][0] + b.covariance[0][0],
        a.covariance[0][1] + b.covariance[0][1],
        a.covariance[1][0] + b.covariance[1][0],
        a.covariance[1][1] + b.covariance[1][1],
    );
    match c.try_inverse() {
        Some(ci) => (d.transpose() * ci * d)[(0, 0)],
        None => f64::NAN,
    }
}

fn quadrature_measurements(cfg: &RunConfig, f: &QuadratureFits, out: &mut Vec<Measurement>) {
    let g2 = 2.0 * cfg.gain * cfg.gain;
    let var = |k: usize| (f.fits[k].params[1] / g2, f.fits[k].sigmas[1] / g2);
    let width = |k: usize| (f.fits[k].params[0], f.fits[k].sigmas[0]);
    let ((vxd, sxd), (vyd, syd), (vxr, sxr), (vyr, syr)) = (var(0), var(1), var(2), var(3));
    let v0 = 0.5 * (vxd + vyd);
    let s0 = 0.5 * (sxd * sxd + syd * syd).sqrt();
    let ((wxd, twxd), (wyd, twyd), (wxr, twxr), (wyr, twyr)) = (width(0), width(1), width(2), width(3));
    let w0 = 0.5 * (wxd + wyd);
    let tw0 = 0.5 * (twxd * twxd + twyd * twyd).sqrt();
    let ratio = |a: f64, sa: f64, b: f64, sb: f64| {
        let r = a / b;
        (r, r * ((sa / a).powi(2) + (sb / b).powi(2)).sqrt())
    };
    let (nx, nxs) = ratio(vxr, sxr, v0, s0);
    let (ny, nys) = ratio(vyr, syr, v0, s0);
    let (wx, wxs) = ratio(wxr, twxr, w0, tw0);
    let (wy, wys) = ratio(wyr, twyr, w0, tw0);
    out.push(meas("var0", v0, s0));
    out.push(meas("width0_hz", w0, tw0));
    out.push(meas("var_x_norm", nx, nxs));
    out.push(meas("var_y_norm", ny, nys));
    out.push(meas("var_inferred_one_plus_s", 1.0 / nx, nxs / (nx * nx)));
    out.push(meas("var_inferred_one_minus_s", 1.0 / ny, nys / (ny * ny)));
    out.push(meas("width_x_norm", wx, wxs));
    out.push(meas("width_y_norm", wy, wys));
    out.push(meas("symmetry_chi2", symmetry_chi2(&f.fits[0], &f.fits[1]), 0.0));
}

/// Closed-form value of a summary quantity.
pub fn theory(name: &str, r: &DerivedRates) -> Option<f64> {
    let s = r.s;
    let n = r.n_bar;
    Some(match name {
        "s_hat" | "het_s_hat" => s,
        "ratio_plus" => r.ratios.plus,
        "ratio_minus" => r.ratios.minus,
        "ratio" | "ratio_resonant_single" => r.ratios.plain,
        "n_bar_hat" => n,
        "gamma_eff_hz" => r.gamma_eff / (2.0 * PI),
        "het_one_plus_s" | "var_inferred_one_plus_s" | "width_x_norm" => 1.0 + s,
        "het_one_minus_s" | "var_inferred_one_minus_s" | "width_y_norm" => 1.0 - s,
        "var0" => (2.0 * n + 1.0) / 4.0,
        "width0_hz" => r.gamma_eff / (2.0 * PI),
        "var_x_norm" => 1.0 / (1.0 + s),
        "var_y_norm" => 1.0 / (1.0 - s),
        _ => return None,
    })
}

fn run_repetition(
    cfg: &RunConfig,
    rates: &DerivedRates,
    point: usize,
    rep: usize,
    paths: Paths,
    raw_dir: Option<&Path>,
) -> Repetition {
    let seed = derive_seed(cfg.seed, point as u64, rep as u64);
    let mut r = Repetition {
        index: rep,
        seed,
        sideband: None,
        heterodyne: None,
        quadrature: None,
        measurements: Vec::new(),
        errors: Vec::new(),
    };
    let schedule = match schedule_drive(cfg.duration, cfg.schedule_period, rates.gamma_minus) {
        Ok(s) => s,
        Err(e) => {
            r.errors.push(PipelineError::stage("schedule", e).to_string());
            return r;
        }
    };
    let grid = cfg.grid(seed);
    let frame = cfg.frame();
    let d = cfg.detection();
    let hash = if raw_dir.is_some() { cfg.hash() } else { String::new() };
    let dump = |name: &str, rec: &Record| -> Result<(), PipelineError> {
        if let Some(dir) = raw_dir {
            artifacts::dump_raw_record(dir, &format!("rep{rep}_{name}"), rec, &hash)?;
        }
        Ok(())
    };

    if paths.sideband && !rates.regime().quantum_squeezed {
        let result = synthesize_component_record(rates, &schedule, &grid, &frame, &d)
            .map_err(|e| PipelineError::stage("component synthesis", e))
            .and_then(|rec| {
                dump("component", &rec)?;
                analyze_sidebands(cfg, rates, &rec, Backend::Components)
            });
        match result {
            Ok(f) => {
                sideband_measurements(&f, "", &mut r.measurements);
                r.sideband = Some(f);
            }
            Err(e) => r.errors.push(e.to_string()),
        }
    }
    if paths.quadrature {
        let result = synthesize_wigner_record(rates, &schedule, &grid, &frame, &d)
            .map_err(|e| PipelineError::stage("quadrature synthesis", e))
            .and_then(|rec| {
                dump("wigner", &rec)?;
                let het = analyze_sidebands(cfg, rates, &rec, Backend::Quadratures)?;
                let quad = analyze_quadratures(cfg, rates, &rec)?;
                Ok((het, quad))
            });
        match result {
            Ok((het, quad)) => {
                sideband_measurements(&het, "het_", &mut r.measurements);
                quadrature_measurements(cfg, &quad, &mut r.measurements);
                r.heterodyne = Some(het);
                r.quadrature = Some(quad);
            }
            Err(e) => r.errors.push(e.to_string()),
        }
    }
    r
}

fn aggregate(reps: &[Repetition], rates: &DerivedRates) -> Vec<Stat> {
    let Some(first) = reps.iter().find(|r| r.errors.is_empty()) else {
        return Vec::new();
    };
    first
        .measurements
        .iter()
        .map(|m| {
            let vals: Vec<&Measurement> = reps
                .iter()
                .filter_map(|r| r.measurements.iter().find(|x| x.name == m.name))
                .collect();
            let n = vals.len();
            let mean = vals.iter().map(|v| v.value).sum::<f64>() / n as f64;
            let std = if n > 1 {
                (vals.iter().map(|v| (v.value - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let mean_sigma = vals.iter().map(|v| v.sigma).sum::<f64>() / n as f64;
            Stat {
                name: m.name.clone(),
                n,
                mean,
                std,
                mean_sigma,
                combined: (std * std + mean_sigma * mean_sigma).sqrt(),
                theory: theory(&m.name, rates),
            }
        })
        .collect()
}

fn point_label(index: usize, s: f64) -> String {
    format!("p{index:02}_s{s:.3}")
}

fn failed_point(index: usize, s: f64, message: String) -> PointOutcome {
    PointOutcome {
        index,
        label: point_label(index, s),
        s_set: Some(s),
        epsilon_c: f64::NAN,
        rates: None,
        regime: None,
        analytic_only: false,
        repetitions: Vec::new(),
        stats: Vec::new(),
        checks: Vec::new(),
        errors: vec![message],
        filter: None,
    }
}

/// All repetitions of one operating point.
pub fn run_point(
    cfg: &RunConfig,
    index: usize,
    epsilon_c: f64,
    s_set: Option<f64>,
    paths: Paths,
    out_dir: Option<&Path>,
) -> PointOutcome {
    let mut p = PointOutcome {
        index,
        label: point_label(index, s_set.unwrap_or(f64::NAN)),
        s_set,
        epsilon_c,
        rates: None,
        regime: None,
        analytic_only: false,
        repetitions: Vec::new(),
        stats: Vec::new(),
        checks: Vec::new(),
        errors: Vec::new(),
        filter: None,
    };
    let rates = match cfg.rates_at(epsilon_c).and_then(|r| {
        r.require_stable().map_err(|e| PipelineError::stage("model", e))?;
        Ok(r)
    }) {
        Ok(r) => r,
        Err(e) => {
            p.errors.push(e.to_string());
            return p;
        }
    };
    p.label = point_label(index, s_set.unwrap_or(rates.s));
    p.rates = Some(rates);
    p.regime = Some(rates.regime());
    p.analytic_only = paths.sideband && rates.regime().quantum_squeezed;
    let raw_dir = match out_dir {
        Some(dir) if cfg.keep_raw => {
            let d = dir.join("points").join(&p.label).join("raw");
            if let Err(e) = std::fs::create_dir_all(&d) {
                p.errors.push(PipelineError::from(e).to_string());
                return p;
            }
            Some(d)
        }
        _ => None,
    };
    let reps: Vec<Repetition> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|k| run_repetition(cfg, &rates, index, k, paths, raw_dir.as_deref()))
        .collect();
    for r in &reps {
        for e in &r.errors {
            p.errors.push(format!("repetition {}: {e}", r.index));
        }
    }
    p.filter = reps.iter().find_map(|r| r.quadrature.as_ref().map(|q| q.filter));
    p.stats = aggregate(&reps, &rates);
    p.repetitions = reps;
    p.checks = point_checks(&p);
    p
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, PipelineError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.workers {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| PipelineError::stage("thread pool", e))
}

fn finish(
    cfg: &RunConfig,
    kind: RunKind,
    paths: Paths,
    points: Vec<PointOutcome>,
    out_dir: Option<&Path>,
) -> Result<RunOutput, PipelineError> {
    let out = RunOutput {
        kind,
        config_hash: cfg.hash(),
        seed: cfg.seed,
        paths,
        points,
        out_dir: out_dir.map(Path::to_path_buf),
    };
    if let Some(dir) = out_dir {
        artifacts::write_run(dir, cfg, &out)?;
    }
    Ok(out)
}

/// The configured operating point, both analysis paths. Writes artifacts
/// when `out_dir` is given.
pub fn run_single(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput, PipelineError> {
    cfg.validate()?;
    let eps = cfg.operating_epsilon()?;
    let point = pool(cfg)?.install(|| run_point(cfg, 0, eps, cfg.s_target, Paths::ALL, out_dir));
    if !point.errors.is_empty() {
        let msg = point.errors.join("; ");
        finish(cfg, RunKind::Simulate, Paths::ALL, vec![point], out_dir)?;
        return Err(PipelineError::Stage {
            stage: "simulate".into(),
            message: msg,
        });
    }
    finish(cfg, RunKind::Simulate, Paths::ALL, vec![point], out_dir)
}

/// Sideband path at each gain in `s_values`, holding the occupancy and total
/// pump power fixed. Failing points are recorded and the sweep continues.
pub fn run_sweep_ratio_vs_s(cfg: &RunConfig, s_values: &[f64], out_dir: Option<&Path>) -> Result<RunOutput, PipelineError> {
    let points = pool(cfg)?.install(|| {
        s_values
            .par_iter()
            .enumerate()
            .map(|(i, &s)| {
                if s > 2.0 * cfg.n_bar {
                    return failed_point(
                        i,
                        s,
                        format!(
                            "quantum-squeezing regime (s > 2 n_bar: s = {s}, n_bar = {}): sideband synthesis refused",
                            cfg.n_bar
                        ),
                    );
                }
                match cfg.epsilon_for(s) {
                    Ok(eps) => run_point(cfg, i, eps, Some(s), Paths::SIDEBAND, out_dir),
                    Err(e) => failed_point(i, s, e.to_string()),
                }
            })
            .collect::<Vec<_>>()
    });
    finish(cfg, RunKind::SweepRatios, Paths::SIDEBAND, points, out_dir)
}

/// Quadrature path at each cooling fraction in `epsilon_values`.
pub fn run_sweep_variance_vs_tone_ratio(
    cfg: &RunConfig,
    epsilon_values: &[f64],
    out_dir: Option<&Path>,
) -> Result<RunOutput, PipelineError> {
    let points = pool(cfg)?.install(|| {
        epsilon_values
            .par_iter()
            .enumerate()
            .map(|(i, &eps)| run_point(cfg, i, eps, None, Paths::QUADRATURE, out_dir))
            .collect::<Vec<_>>()
    });
    finish(cfg, RunKind::SweepVariances, Paths::QUADRATURE, points, out_dir)
}
