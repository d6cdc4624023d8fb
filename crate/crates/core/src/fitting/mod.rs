//! Lorentzian fits to Welch spectra.
//!
//! Every fit runs three weighted passes: the first weights bins by the data,
//! later passes by the current model, `sigma_i = S_i / sqrt(n_averages)`.
//! Covariances are scaled by the reduced chi-square and by the window's bin
//! correlation factor.

pub mod lm;
pub mod models;

pub use lm::{LeastSquaresProblem, LmOptions, LmReport, NullDirection, Termination};
pub use models::{lorentzian, SpectralModel, SpectrumProblem};

use crate::spectral::Psd;
use lm::{minimize, normal_inverse};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("invalid fit input: {0}")]
    InvalidInput(String),
    #[error("mask removes {:.0}% of the fit band (limit 20%)", .fraction * 100.0)]
    MaskTooLarge { fraction: f64 },
    #[error("{bins} bins cannot constrain {params} parameters")]
    TooFewBins { bins: usize, params: usize },
    #[error("{model} fit is degenerate along {direction}")]
    Degenerate { model: String, direction: String },
}

/// Largest share of the fit band a mask may remove.
pub const MAX_MASK_FRACTION: f64 = 0.2;
/// Default fit half-band in units of the estimated linewidth.
pub const BAND_WIDTHS: f64 = 25.0;
/// Initial `s` values of the double-pair multi-start.
pub const S_STARTS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Explicit fit intervals (Hz). Default: `BAND_WIDTHS` estimated widths around each line.
    pub region: Option<Vec<(f64, f64)>>,
    /// Intervals (Hz) excluded from the fit.
    pub mask: Vec<(f64, f64)>,
    pub irls_passes: usize,
    /// How many fitted bins repeat each independent periodogram value.
    /// The covariance is scaled by it. Heterodyne spectra of a real
    /// quadrature record carry one realization in both sidebands and use 2.
    pub duplication: f64,
    pub lm: LmOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            region: None,
            mask: Vec::new(),
            irls_passes: 3,
            duplication: 1.0,
            lm: LmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: SpectralModel,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2_reduced: f64,
    pub dof: usize,
    pub iterations: usize,
    pub termination: Termination,
    pub region: Vec<(f64, f64)>,
    pub rbw: f64,
    pub n_averages: usize,
    pub derived: Vec<Quantity>,
    pub warnings: Vec<String>,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn sigma(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.sigmas[i])
    }

    /// A fitted parameter or a derived quantity.
    pub fn quantity(&self, name: &str) -> Option<Quantity> {
        if let Some(i) = self.index(name) {
            return Some(Quantity {
                name: name.into(),
                value: self.params[i],
                sigma: self.sigmas[i],
            });
        }
        self.derived.iter().find(|q| q.name == name).cloned()
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.quantity(name).map(|q| q.value)
    }

    /// Model evaluated at `freqs`.
    pub fn evaluate(&self, freqs: &[f64]) -> Vec<f64> {
        freqs.iter().map(|&f| self.model.eval(&self.params, f)).collect()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn in_any(f: f64, intervals: &[(f64, f64)]) -> bool {
    intervals.iter().any(|&(a, b)| f >= a && f <= b)
}

fn check_psd(psd: &Psd) -> Result<(), FitError> {
    if psd.freqs.len() != psd.density.len() || psd.freqs.len() < 3 {
        return Err(FitError::InvalidInput("spectrum has too few bins".into()));
    }
    if psd.density.iter().any(|d| !d.is_finite()) {
        return Err(FitError::InvalidInput("spectrum contains non-finite values".into()));
    }
    if !(psd.rbw > 0.0) || psd.n_averages == 0 {
        return Err(FitError::InvalidInput("spectrum lacks rbw or averages".into()));
    }
    Ok(())
}

/// Background level near `center`, from the median over a window much wider than the line.
fn floor_estimate(psd: &Psd, center: f64, reach: f64) -> f64 {
    median(
        psd.freqs
            .iter()
            .zip(&psd.density)
            .filter(|(f, _)| (**f - center).abs() <= reach)
            .map(|(_, d)| *d)
            .collect(),
    )
}

/// Full width at half maximum read off the data around `center`.
pub fn half_max_width(psd: &Psd, center: f64, floor: f64) -> f64 {
    let n = psd.freqs.len();
    let k0 = psd
        .freqs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - center).abs().total_cmp(&(b.1 - center).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let lo_k = k0.saturating_sub(2);
    let hi_k = (k0 + 2).min(n - 1);
    let peak = psd.density[lo_k..=hi_k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = floor + 0.5 * (peak - floor);
    let mut right = k0;
    while right + 1 < n && psd.density[right + 1] > half {
        right += 1;
    }
    let mut left = k0;
    while left > 0 && psd.density[left - 1] > half {
        left -= 1;
    }
    ((right - left + 1) as f64 * psd.rbw).max(2.0 * psd.rbw)
}

/// Area above `floor` within `half_span` of `center`, corrected for the Lorentzian tails.
fn area_estimate(psd: &Psd, center: f64, half_span: f64, width: f64, floor: f64) -> f64 {
    let raw: f64 = psd
        .freqs
        .iter()
        .zip(&psd.density)
        .filter(|(f, _)| (**f - center).abs() <= half_span)
        .map(|(_, d)| d - floor)
        .sum::<f64>()
        * psd.rbw;
    let inside = 2.0 / std::f64::consts::PI * (2.0 * half_span / width).atan();
    raw / inside
}

fn line_reach(model: &SpectralModel, psd: &Psd) -> f64 {
    let c = model.centers();
    let sep = match model {
        SpectralModel::Quadrature { lo_hz } => 2.0 * lo_hz.abs(),
        _ => (c[0] - c[1]).abs(),
    };
    (0.45 * sep).min(2000.0 * psd.rbw).max(20.0 * psd.rbw)
}

fn default_region(psd: &Psd, centers: &[f64], widths: &[f64]) -> Vec<(f64, f64)> {
    let lo = psd.freqs[0];
    let hi = *psd.freqs.last().unwrap();
    let mut spans: Vec<(f64, f64)> = centers
        .iter()
        .zip(widths)
        .map(|(&c, &w)| ((c - BAND_WIDTHS * w).max(lo), (c + BAND_WIDTHS * w).min(hi)))
        .collect();
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for s in spans {
        match merged.last_mut() {
            Some(m) if s.0 <= m.1 => m.1 = m.1.max(s.1),
            _ => merged.push(s),
        }
    }
    merged
}

struct Selection {
    freqs: Vec<f64>,
    data: Vec<f64>,
}

fn select(psd: &Psd, region: &[(f64, f64)], mask: &[(f64, f64)], n_params: usize) -> Result<Selection, FitError> {
    let mut in_region = 0usize;
    let mut freqs = Vec::new();
    let mut data = Vec::new();
    for (&f, &d) in psd.freqs.iter().zip(&psd.density) {
        if !in_any(f, region) {
            continue;
        }
        in_region += 1;
        if in_any(f, mask) {
            continue;
        }
        freqs.push(f);
        data.push(d);
    }
    if in_region > 0 {
        let fraction = 1.0 - freqs.len() as f64 / in_region as f64;
        if fraction > MAX_MASK_FRACTION {
            return Err(FitError::MaskTooLarge { fraction });
        }
    }
    if freqs.len() <= n_params {
        return Err(FitError::TooFewBins {
            bins: freqs.len(),
            params: n_params,
        });
    }
    Ok(Selection { freqs, data })
}

struct Solved {
    report: LmReport,
    problem: SpectrumProblem,
    iterations: usize,
    /// Chi-square against data-based weights, comparable across starts.
    data_chi2: f64,
}

fn solve(model: SpectralModel, sel: &Selection, n_avg: usize, p0: &[f64], width_scale: f64, opts: &FitOptions) -> Solved {
    let sk = (n_avg as f64).sqrt();
    let dmax = sel.data.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let tiny = 1e-12 * dmax.max(f64::MIN_POSITIVE);
    let data_sigma: Vec<f64> = sel.data.iter().map(|d| d.abs().max(tiny) / sk).collect();
    let mut problem = SpectrumProblem {
        model,
        freqs: sel.freqs.clone(),
        data: sel.data.clone(),
        sigma: data_sigma.clone(),
        width_scale,
    };
    let mut report = minimize(&problem, p0, &opts.lm);
    let mut iterations = report.iterations;
    for _ in 1..opts.irls_passes.max(1) {
        problem.sigma = sel
            .freqs
            .iter()
            .map(|&f| model.eval(&report.params, f).abs().max(tiny) / sk)
            .collect();
        report = minimize(&problem, &report.params, &opts.lm);
        iterations += report.iterations;
    }
    let data_chi2 = sel
        .freqs
        .iter()
        .zip(&sel.data)
        .zip(&data_sigma)
        .map(|((&f, &d), &s)| ((d - model.eval(&report.params, f)) / s).powi(2))
        .sum();
    Solved {
        report,
        problem,
        iterations,
        data_chi2,
    }
}

fn ratio_quantity(name: &str, p: &[f64], cov: &DMatrix<f64>, i: usize, j: usize) -> Quantity {
    let r = p[i] / p[j];
    let var = r * r
        * (cov[(i, i)] / (p[i] * p[i]) + cov[(j, j)] / (p[j] * p[j]) - 2.0 * cov[(i, j)] / (p[i] * p[j]));
    Quantity {
        name: name.into(),
        value: r,
        sigma: var.max(0.0).sqrt(),
    }
}

fn area_warnings(result: &mut FitResult, area_names: &[&str]) {
    for name in area_names {
        let (Some(v), Some(s)) = (result.param(name), result.sigma(name)) else {
            continue;
        };
        if v < 0.0 {
            result.warnings.push(format!("negative area: {name} = {v:.4e}"));
        } else if v < 3.0 * s {
            result.warnings.push(format!(
                "noise-only: {name} = {v:.4e} is below 3 sigma ({s:.4e})"
            ));
        }
    }
}

fn finish(
    model: SpectralModel,
    psd: &Psd,
    region: Vec<(f64, f64)>,
    solved: Solved,
    allow_degenerate: bool,
    extra_cov: Option<DMatrix<f64>>,
    duplication: f64,
) -> Result<FitResult, FitError> {
    let Solved {
        report, iterations, ..
    } = solved;
    let mut warnings = Vec::new();
    let np = report.params.len();
    let dof = report.residuals.len() - np;
    let chi2_reduced = report.cost / dof as f64;
    let jtj = report.normal_matrix();
    if let Some(nd) = &report.null_direction {
        if !allow_degenerate {
            return Err(FitError::Degenerate {
                model: model.name().into(),
                direction: nd.describe(),
            });
        }
        warnings.push(format!("degenerate fit, pseudo-inverse covariance: {}", nd.describe()));
    }
    let mut cov = normal_inverse(&jtj) * (chi2_reduced * psd.bin_correlation * duplication);
    if let Some(extra) = extra_cov {
        cov += extra;
    }
    if !report.termination.converged() {
        warnings.push(format!("not converged after {iterations} iterations"));
    }
    let p = report.params.clone();
    let sigmas: Vec<f64> = (0..np).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
    let mut derived = Vec::new();
    match model {
        SpectralModel::SinglePair { .. } => {
            let r = ratio_quantity("ratio", &p, &cov, 1, 2);
            let n = Quantity {
                name: "n_bar".into(),
                value: 1.0 / (r.value - 1.0),
                sigma: r.sigma / (r.value - 1.0).powi(2),
            };
            derived.push(r);
            derived.push(n);
        }
        SpectralModel::DoublePair { gamma_eff_hz, .. } => {
            derived.push(ratio_quantity("ratio_plus", &p, &cov, 2, 4));
            derived.push(ratio_quantity("ratio_minus", &p, &cov, 1, 3));
            derived.push(Quantity {
                name: "gamma_plus_hz".into(),
                value: gamma_eff_hz * (1.0 + p[0]),
                sigma: gamma_eff_hz * sigmas[0],
            });
            derived.push(Quantity {
                name: "gamma_minus_hz".into(),
                value: gamma_eff_hz * (1.0 - p[0]),
                sigma: gamma_eff_hz * sigmas[0],
            });
        }
        SpectralModel::Quadrature { .. } => {}
    }
    let mut result = FitResult {
        model,
        names: model.param_names().iter().map(|s| s.to_string()).collect(),
        params: p,
        sigmas,
        covariance: (0..np).map(|a| (0..np).map(|b| cov[(a, b)]).collect()).collect(),
        chi2_reduced,
        dof,
        iterations,
        termination: report.termination,
        region,
        rbw: psd.rbw,
        n_averages: psd.n_averages,
        derived,
        warnings,
    };
    let areas: &[&str] = match model {
        SpectralModel::SinglePair { .. } => &["area_stokes", "area_antistokes"],
        SpectralModel::DoublePair { .. } => &[
            "area_stokes_narrow",
            "area_stokes_broad",
            "area_antistokes_narrow",
            "area_antistokes_broad",
        ],
        SpectralModel::Quadrature { .. } => &["area"],
    };
    area_warnings(&mut result, areas);
    Ok(result)
}

/// Generic weighted fit of `model` to `psd` from the start point `p0`.
/// The fit region must be given in `opts.region`.
pub fn lm_minimize(model: SpectralModel, psd: &Psd, p0: &[f64], opts: &FitOptions) -> Result<FitResult, FitError> {
    check_psd(psd)?;
    if p0.len() != model.n_params() {
        return Err(FitError::InvalidInput(format!(
            "{} expects {} parameters",
            model.name(),
            model.n_params()
        )));
    }
    let region = opts
        .region
        .clone()
        .ok_or_else(|| FitError::InvalidInput("fit region required".into()))?;
    let sel = select(psd, &region, &opts.mask, model.n_params())?;
    let scale = p0[0].abs().max(psd.rbw);
    let solved = solve(model, &sel, psd.n_averages, p0, scale, opts);
    finish(model, psd, region, solved, matches!(model, SpectralModel::DoublePair { .. }), None, opts.duplication)
}

/// Shared width, free Stokes and anti-Stokes areas, flat floor.
pub fn fit_single_pair(psd: &Psd, stokes_hz: f64, antistokes_hz: f64, opts: &FitOptions) -> Result<FitResult, FitError> {
    check_psd(psd)?;
    let model = SpectralModel::SinglePair {
        stokes_hz,
        antistokes_hz,
    };
    let reach = line_reach(&model, psd);
    let floor = 0.5 * (floor_estimate(psd, stokes_hz, reach) + floor_estimate(psd, antistokes_hz, reach));
    let ws = half_max_width(psd, stokes_hz, floor);
    let wa = half_max_width(psd, antistokes_hz, floor);
    let w = ws.max(wa);
    let region = opts
        .region
        .clone()
        .unwrap_or_else(|| default_region(psd, &[stokes_hz, antistokes_hz], &[w, w]));
    let p0 = [
        w,
        area_estimate(psd, stokes_hz, 5.0 * w, w, floor),
        area_estimate(psd, antistokes_hz, 5.0 * w, w, floor),
        floor,
    ];
    let sel = select(psd, &region, &opts.mask, 4)?;
    let solved = solve(model, &sel, psd.n_averages, &p0, w, opts);
    finish(model, psd, region, solved, false, None, opts.duplication)
}

/// Narrow and broad lines on both sidebands with widths `gamma_eff (1 -+ s)`.
///
/// `gamma_eff_hz` is held fixed and its uncertainty `gamma_eff_sigma_hz` is
/// propagated into the parameter covariance.
pub fn fit_double_pair(
    psd: &Psd,
    stokes_hz: f64,
    antistokes_hz: f64,
    gamma_eff_hz: f64,
    gamma_eff_sigma_hz: f64,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    check_psd(psd)?;
    if !(gamma_eff_hz > 0.0) || !(gamma_eff_sigma_hz >= 0.0) {
        return Err(FitError::InvalidInput("gamma_eff must be > 0 with sigma >= 0".into()));
    }
    let single_model = SpectralModel::SinglePair {
        stokes_hz,
        antistokes_hz,
    };
    let reach = line_reach(&single_model, psd);
    let floor = 0.5 * (floor_estimate(psd, stokes_hz, reach) + floor_estimate(psd, antistokes_hz, reach));
    let w = half_max_width(psd, stokes_hz, floor)
        .max(half_max_width(psd, antistokes_hz, floor))
        .max(gamma_eff_hz);
    let region = opts
        .region
        .clone()
        .unwrap_or_else(|| default_region(psd, &[stokes_hz, antistokes_hz], &[w, w]));
    let seed_opts = FitOptions {
        region: Some(region.clone()),
        ..opts.clone()
    };
    let seed = match fit_single_pair(psd, stokes_hz, antistokes_hz, &seed_opts) {
        Ok(r) => r.params,
        Err(_) => vec![
            w,
            area_estimate(psd, stokes_hz, 5.0 * w, w, floor),
            area_estimate(psd, antistokes_hz, 5.0 * w, w, floor),
            floor,
        ],
    };
    let model = SpectralModel::DoublePair {
        stokes_hz,
        antistokes_hz,
        gamma_eff_hz,
    };
    let sel = select(psd, &region, &opts.mask, 6)?;
    let mut best: Option<Solved> = None;
    for s0 in S_STARTS {
        let p0 = [
            s0,
            0.5 * seed[1],
            0.5 * seed[1],
            0.5 * seed[2],
            0.5 * seed[2],
            seed[3],
        ];
        let solved = solve(model, &sel, psd.n_averages, &p0, gamma_eff_hz, opts);
        if best.as_ref().is_none_or(|b| solved.data_chi2 < b.data_chi2) {
            best = Some(solved);
        }
    }
    let best = best.expect("at least one start");

    // dp/dc = -(J^T J)^-1 J^T dr/dc for the fixed gamma_eff
    let p = &best.report.params;
    let j = &best.report.jacobian;
    let drdc = DVector::from_iterator(
        best.problem.freqs.len(),
        best.problem
            .freqs
            .iter()
            .zip(&best.problem.sigma)
            .map(|(&f, &s)| -model.d_gamma_eff(p, f) / s),
    );
    let jtj = j.transpose() * j;
    let dpdc = -(normal_inverse(&jtj) * (j.transpose() * drdc));
    let extra = (&dpdc * dpdc.transpose()) * (gamma_eff_sigma_hz * gamma_eff_sigma_hz);

    let s_fit = p[0];
    let mut result = finish(model, psd, region, best, true, Some(extra), opts.duplication)?;
    if s_fit * gamma_eff_hz < 2.0 * psd.rbw {
        result.warnings.push(format!(
            "narrow and broad widths differ by {:.3} Hz, under two bins ({:.3} Hz): components are not separable",
            s_fit * gamma_eff_hz,
            2.0 * psd.rbw
        ));
    }
    Ok(result)
}

/// Demodulated-channel line at `+lo_hz` plus its negative-frequency image.
/// Lorentzian pair at `±lo_hz` of one lock-in channel.
///
/// A real baseband quadrature shifted to `lo_hz` has a Hermitian transform,
/// so its periodogram at `lo_hz + v` and `lo_hz - v` is the same number.
/// The default region therefore covers only the upper half of the line;
/// fitting both halves would count every value twice.
pub fn fit_quadrature(psd: &Psd, lo_hz: f64, opts: &FitOptions) -> Result<FitResult, FitError> {
    check_psd(psd)?;
    let model = SpectralModel::Quadrature { lo_hz };
    let reach = line_reach(&model, psd);
    let floor = floor_estimate(psd, lo_hz, reach);
    let w = half_max_width(psd, lo_hz, floor);
    let region = opts
        .region
        .clone()
        .unwrap_or_else(|| {
            default_region(psd, &[lo_hz], &[w])
                .into_iter()
                .map(|(a, b)| (a.max(lo_hz), b))
                .collect()
        });
    let p0 = [w, area_estimate(psd, lo_hz, 5.0 * w, w, floor), floor];
    let sel = select(psd, &region, &opts.mask, 3)?;
    let solved = solve(model, &sel, psd.n_averages, &p0, w, opts);
    finish(model, psd, region, solved, false, None, opts.duplication)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Window;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn exact_psd(model: &SpectralModel, p: &[f64], lo: f64, hi: f64, rbw: f64, k: usize) -> Psd {
        let n = ((hi - lo) / rbw) as usize;
        let freqs: Vec<f64> = (0..n).map(|i| lo + i as f64 * rbw).collect();
        Psd {
            density: freqs.iter().map(|&f| model.eval(p, f)).collect(),
            freqs,
            rbw,
            n_averages: k,
            window: Window::Hann,
            two_sided: false,
            bin_correlation: 35.0 / 18.0,
        }
    }

    fn noisy(psd: &Psd, seed: u64) -> Psd {
        let k = psd.n_averages as f64;
        let g = Gamma::new(k, 1.0 / k).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Psd {
            density: psd.density.iter().map(|d| d * g.sample(&mut rng)).collect(),
            ..psd.clone()
        }
    }

    const SINGLE: SpectralModel = SpectralModel::SinglePair {
        stokes_hz: 61_000.0,
        antistokes_hz: 39_000.0,
    };

    #[test]
    fn single_pair_recovers_exact_data() {
        let p = [48.0, 1.6, 1.2, 2e-4];
        let psd = exact_psd(&SINGLE, &p, 30_000.0, 70_000.0, 2.5, 200);
        let r = fit_single_pair(&psd, 61_000.0, 39_000.0, &FitOptions::default()).unwrap();
        for k in 0..4 {
            assert!((r.params[k] / p[k] - 1.0).abs() < 1e-6, "{} {}", r.names[k], r.params[k]);
        }
        assert!((r.value("ratio").unwrap() - 4.0 / 3.0).abs() < 1e-6);
        assert!((r.value("n_bar").unwrap() - 3.0).abs() < 1e-5);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }

    #[test]
    fn scale_invariance_is_exact() {
        let p = [48.0, 1.6, 1.2, 2e-4];
        let psd = noisy(&exact_psd(&SINGLE, &p, 30_000.0, 70_000.0, 2.5, 100), 3);
        let a = fit_single_pair(&psd, 61_000.0, 39_000.0, &FitOptions::default()).unwrap();
        let b = fit_single_pair(&psd.scaled(4.0), 61_000.0, 39_000.0, &FitOptions::default()).unwrap();
        assert_eq!(a.params[0], b.params[0]);
        assert_eq!(a.params[1] * 4.0, b.params[1]);
        assert_eq!(a.value("ratio"), b.value("ratio"));
    }

    #[test]
    fn frequency_shift_invariance() {
        let p = [48.0, 1.6, 1.2, 2e-4];
        let psd = noisy(&exact_psd(&SINGLE, &p, 30_000.0, 70_000.0, 2.5, 100), 4);
        let a = fit_single_pair(&psd, 61_000.0, 39_000.0, &FitOptions::default()).unwrap();
        let shifted = Psd {
            freqs: psd.freqs.iter().map(|f| f + 1250.0).collect(),
            ..psd.clone()
        };
        let b = fit_single_pair(&shifted, 62_250.0, 40_250.0, &FitOptions::default()).unwrap();
        for k in 0..4 {
            assert!((a.params[k] / b.params[k] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn noisy_fit_uncertainty_is_honest() {
        let p = [48.0, 1.6, 1.2, 2e-4];
        let exact = exact_psd(&SINGLE, &p, 30_000.0, 70_000.0, 2.5, 400);
        let mut pulls = Vec::new();
        for seed in 0..40 {
            // independent bins: no window correlation to correct for
            let psd = Psd { bin_correlation: 1.0, ..noisy(&exact, seed) };
            let r = fit_single_pair(&psd, 61_000.0, 39_000.0, &FitOptions::default()).unwrap();
            pulls.push((r.params[1] - p[1]) / r.sigmas[1]);
        }
        let n = pulls.len() as f64;
        let mean = pulls.iter().sum::<f64>() / n;
        let sd = (pulls.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() < 0.6, "{mean}");
        assert!(sd > 0.6 && sd < 1.5, "{sd}");
    }

    #[test]
    fn mask_limits() {
        let p = [48.0, 1.6, 1.2, 2e-4];
        let psd = exact_psd(&SINGLE, &p, 30_000.0, 70_000.0, 2.5, 200);
        let opts = FitOptions {
            mask: vec![(61_300.0, 61_400.0)],
            ..Default::default()
        };
        let r = fit_single_pair(&psd, 61_000.0, 39_000.0, &opts).unwrap();
        assert!((r.params[1] / p[1] - 1.0).abs() < 1e-6);
        let opts = FitOptions {
            mask: vec![(60_000.0, 62_000.0)],
            ..Default::default()
        };
        assert!(matches!(
            fit_single_pair(&psd, 61_000.0, 39_000.0, &opts),
            Err(FitError::MaskTooLarge { .. })
        ));
    }

    #[test]
    fn noise_only_is_flagged() {
        let psd = noisy(&exact_psd(&SINGLE, &[48.0, 0.0, 0.0, 1e-3], 30_000.0, 70_000.0, 2.5, 50), 8);
        let opts = FitOptions {
            region: Some(vec![(37_800.0, 40_200.0), (59_800.0, 62_200.0)]),
            ..Default::default()
        };
        match fit_single_pair(&psd, 61_000.0, 39_000.0, &opts) {
            Ok(r) => assert!(
                r.warnings.iter().any(|w| w.contains("noise-only") || w.contains("negative")),
                "{:?}",
                r.warnings
            ),
            Err(FitError::Degenerate { .. }) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn double_pair_recovers_exact_data() {
        let ge = 48.0;
        let model = SpectralModel::DoublePair {
            stokes_hz: 61_000.0,
            antistokes_hz: 39_000.0,
            gamma_eff_hz: ge,
        };
        let (n, s) = (5.8, 0.5);
        let scale = |w: f64, g: f64| w * ge / (2.0 * g) * 0.5;
        let p = [
            s,
            scale(1.0 + n - s / 2.0, ge * (1.0 - s)),
            scale(1.0 + n + s / 2.0, ge * (1.0 + s)),
            scale(n + s / 2.0, ge * (1.0 - s)),
            scale(n - s / 2.0, ge * (1.0 + s)),
            2e-4,
        ];
        let psd = exact_psd(&model, &p, 30_000.0, 70_000.0, 1.25, 200);
        let r = fit_double_pair(&psd, 61_000.0, 39_000.0, ge, 0.0, &FitOptions::default()).unwrap();
        for k in 0..6 {
            assert!((r.params[k] / p[k] - 1.0).abs() < 1e-6, "{} {}", r.names[k], r.params[k]);
        }
        let rp = (n + 1.0 + s / 2.0) / (n - s / 2.0);
        assert!((r.value("ratio_plus").unwrap() / rp - 1.0).abs() < 1e-6);

        let r2 = fit_double_pair(&psd, 61_000.0, 39_000.0, ge, 0.5, &FitOptions::default()).unwrap();
        assert!(r2.sigma("s").unwrap() > r.sigma("s").unwrap());
    }

    #[test]
    fn single_pair_degeneracy_is_an_error() {
        // no anti-Stokes line and zero floor: the anti-Stokes area is unconstrained only if
        // the lineshape columns coincide; identical centers make the areas collinear
        let m = SpectralModel::SinglePair { stokes_hz: 50_000.0, antistokes_hz: 50_000.0 };
        let psd = exact_psd(&m, &[40.0, 1.0, 1.0, 1e-4], 45_000.0, 55_000.0, 2.5, 100);
        let err = fit_single_pair(&psd, 50_000.0, 50_000.0, &FitOptions::default()).unwrap_err();
        match err {
            FitError::Degenerate { direction, .. } => {
                assert!(direction.contains("area_stokes") && direction.contains("area_antistokes"))
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn quadrature_fit_recovers_exact_data() {
        let m = SpectralModel::Quadrature { lo_hz: 11_000.0 };
        let p = [36.0, 2.2, 5e-4];
        let psd = exact_psd(&m, &p, 0.0, 20_000.0, 2.0, 100);
        let r = fit_quadrature(&psd, 11_000.0, &FitOptions::default()).unwrap();
        for k in 0..3 {
            assert!((r.params[k] / p[k] - 1.0).abs() < 1e-6);
        }
        let json = serde_json::to_string(&r).unwrap();
        let back: FitResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back.params, r.params);
    }
}
