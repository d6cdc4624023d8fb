//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Runs with its own harness so the lines always appear, in order. Expect
//! roughly ten minutes on a single core, most of it in the 200-record pull
//! calibration.

use optosqueeze::fitting::{LeastSquaresProblem, SpectralModel, SpectrumProblem};
use optosqueeze::model::*;
use optosqueeze::pipeline::report::Check;
use optosqueeze::pipeline::*;
use optosqueeze::spectral::{default_segment_len, welch_psd, welch_psd_complex, Window};
use optosqueeze::synth::{simulate_quadratures, simulate_sideband_envelopes, SimGrid};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

struct Verdict {
    pass: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            pass: true,
            lines: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
    }

    fn checks(&mut self, label: &str, checks: &[Check], names: &[&str]) {
        for n in names {
            match checks.iter().find(|c| c.name == *n) {
                Some(c) => self.require(
                    c.pass,
                    format!("{label} {}: {:.5} vs bound {:.5} ({})", c.name, c.value, c.bound, c.description),
                ),
                None => self.require(false, format!("{label} {n}: check missing")),
            }
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn criterion_1() -> Verdict {
    let mut v = Verdict::new();
    // hand arithmetic: (n+1)/n and the s = 0.5 numerators (n+1 +- s/2) / (n -+ s/2)
    let cases = [
        (0.0, [6.8 / 5.8, 6.8 / 5.8, 6.8 / 5.8], [1.1724, 1.1724, 1.1724]),
        (0.5, [6.8 / 5.8, 7.05 / 5.55, 6.55 / 6.05], [1.1724, 1.2703, 1.0826]),
    ];
    for (s, hand, printed) in cases {
        let r = ratios(5.8, s);
        let got = [r.plain, r.plus, r.minus];
        for i in 0..3 {
            v.require(
                close(got[i], hand[i], 1e-4) && close(got[i], printed[i], 1e-4),
                format!("s = {s} ratio[{i}] = {:.6} (hand {:.6}, printed {})", got[i], hand[i], printed[i]),
            );
        }
    }
    v
}

fn sum_rule(n: f64, s: f64, gamma_eff: f64) -> f64 {
    // substitute om = a tan(theta) to map the real line onto (-pi/2, pi/2)
    let a = 0.5 * gamma_eff * (1.0 - s);
    let f = |t: f64| {
        let om = a * t.tan();
        let st = analytic_sideband_psd(n, s, gamma_eff, Sideband::Stokes, &[om]).unwrap()[0];
        let an = analytic_sideband_psd(n, s, gamma_eff, Sideband::AntiStokes, &[om]).unwrap()[0];
        (st - an) * a / t.cos().powi(2)
    };
    quadrature::double_exponential::integrate(f, -0.5 * PI, 0.5 * PI, 1e-12).integral / (2.0 * PI)
}

fn criterion_2() -> Verdict {
    let mut v = Verdict::new();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let n = 0.1 * 1000f64.powf(i as f64 / 9.0);
        for j in 0..10 {
            let s = 0.95 * j as f64 / 9.0;
            let err = (sum_rule(n, s, 2.0 * PI * 50.0) - 1.0).abs();
            if err > 1e-6 {
                v.require(false, format!("n = {n:.4}, s = {s:.4}: |integral - 1| = {err:.2e}"));
            }
            worst = worst.max(err);
        }
    }
    v.require(worst <= 1e-6, format!("worst |integral - 1| over 10 x 10 grid = {worst:.2e}"));
    v
}

fn criterion_3(parseval: &mut Vec<(String, f64)>) -> Verdict {
    let mut v = Verdict::new();
    let cfg = RunConfig {
        repetitions: 5,
        duration: 100.0,
        seed: 20_160_401,
        ..RunConfig::default()
    };
    let eps = cfg.operating_epsilon().unwrap();
    let t = Instant::now();
    let p = run_point(&cfg, 0, eps, Some(0.5), Paths::SIDEBAND, None);
    v.require(p.errors.is_empty(), format!("5 x 100 s records analysed in {:.0} s {:?}", t.elapsed().as_secs_f64(), p.errors));
    for n in ["s_hat", "ratio_plus", "ratio_minus"] {
        if let Some(s) = p.stat(n) {
            v.lines.push(format!(
                "     {n}: mean {:.4} std {:.4} mean sigma {:.4} theory {:.4}",
                s.mean,
                s.std,
                s.mean_sigma,
                s.theory.unwrap_or(f64::NAN)
            ));
        }
    }
    v.checks("5 x 100 s", &p.checks, &["s_hat", "ratio_plus", "ratio_minus"]);
    for r in &p.repetitions {
        if let Some(sb) = &r.sideband {
            parseval.extend(sb.parseval.iter().map(|(n, x)| (format!("component {n}"), *x)));
        }
    }

    let cal = RunConfig {
        repetitions: 200,
        duration: 25.0,
        seed: 20_160_402,
        ..cfg
    };
    let t = Instant::now();
    let p = run_point(&cal, 0, eps, Some(0.5), Paths::SIDEBAND, None);
    v.require(p.errors.is_empty(), format!("200 x 25 s records analysed in {:.0} s {:?}", t.elapsed().as_secs_f64(), p.errors));
    let rates = p.rates.unwrap();
    for (name, truth) in [("s_hat", rates.s), ("ratio_plus", rates.ratios.plus), ("ratio_minus", rates.ratios.minus)] {
        let pulls: Vec<f64> = p
            .repetitions
            .iter()
            .filter_map(|r| r.measurements.iter().find(|m| m.name == name))
            .map(|m| (m.value - truth) / m.sigma)
            .collect();
        let n = pulls.len() as f64;
        let mean = pulls.iter().sum::<f64>() / n;
        let var = pulls.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        v.require(
            pulls.len() == 200 && (0.7..=1.4).contains(&var),
            format!("{name} pulls over {} records: mean {mean:.3}, variance {var:.3} in [0.7, 1.4]", pulls.len()),
        );
    }
    v
}

fn criterion_4_and_5(parseval: &mut Vec<(String, f64)>) -> (Verdict, Verdict) {
    let (mut v4, mut v5) = (Verdict::new(), Verdict::new());
    let cfg = RunConfig {
        repetitions: 5,
        duration: 100.0,
        seed: 20_160_403,
        ..RunConfig::default()
    };
    let eps = cfg.variance_sweep_epsilons().unwrap();
    let t = Instant::now();
    let out = run_sweep_variance_vs_tone_ratio(&cfg, &eps, None).unwrap();
    v4.require(
        out.points.iter().all(|p| p.errors.is_empty()),
        format!("{} points x 5 x 100 s analysed in {:.0} s", out.points.len(), t.elapsed().as_secs_f64()),
    );
    let targets = [0.0, 0.2, 0.4, 0.515];
    for (p, s) in out.points.iter().zip(targets) {
        let rates = p.rates.unwrap();
        let label = format!("s = {s}");
        v4.require(close(rates.s, s, 1e-6), format!("{label}: epsilon_c {:.6} maps to s = {:.6}", p.epsilon_c, rates.s));
        v4.checks(
            &label,
            &p.checks,
            &["var_x_norm", "var_y_norm", "het_one_plus_s_vs_variance", "het_one_minus_s_vs_variance"],
        );
        v5.checks(&label, &p.checks, &["detuned_symmetry", "width0_hz"]);
        if s == 0.515 {
            let x = p.stat("var_x_norm").unwrap();
            v4.require(
                close(x.mean, 0.66, 0.03),
                format!("{label}: squeezed variance ratio {:.4} within 0.66 +- 0.03", x.mean),
            );
        }
        for r in &p.repetitions {
            if let Some(h) = &r.heterodyne {
                parseval.extend(h.parseval.iter().map(|(n, x)| (format!("heterodyne {n}"), *x)));
            }
            if let Some(q) = &r.quadrature {
                parseval.extend(q.parseval.iter().map(|(n, x)| (format!("lock-in {n}"), *x)));
            }
        }
    }
    (v4, v5)
}

fn criterion_6() -> Verdict {
    let mut v = Verdict::new();
    let rates = DerivedRates::from_squeeze(0.3, 2.0 * PI * 50.0, 0.7).unwrap();
    let grid = SimGrid {
        sample_rate: 10e3,
        duration: 1.0,
        carrier: 2.0 * PI * 2e3,
        seed: 1,
    };
    match simulate_sideband_envelopes(&rates, &grid) {
        Err(e) => v.require(e.to_string().contains("quantum-squeezing regime"), format!("synthesis refused: {e}")),
        Ok(_) => v.require(false, "synthesis accepted a negative component weight".into()),
    }
    let cfg = RunConfig {
        n_bar: 0.3,
        duration: 10.0,
        repetitions: 1,
        ..RunConfig::default()
    };
    let sweep = run_sweep_ratio_vs_s(&cfg, &[0.7], None).unwrap();
    let msg = sweep.points[0].errors.join("; ");
    v.require(msg.contains("quantum-squeezing regime"), format!("sweep point refused: {msg}"));
    let w = sideband_weights(0.3, 0.7);
    v.require(close(w.antistokes_broad, -0.05, 1e-12), format!("broad anti-Stokes weight {:.6}", w.antistokes_broad));
    let omegas: Vec<f64> = (-4000..=4000).map(|k| k as f64 * 0.25).collect();
    let mut min = f64::INFINITY;
    for side in [Sideband::Stokes, Sideband::AntiStokes] {
        let psd = analytic_sideband_psd(0.3, 0.7, rates.gamma_eff, side, &omegas).unwrap();
        min = min.min(psd.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    v.require(min >= 0.0, format!("analytic spectra minimum {min:.4e} >= 0"));
    let mut wrong = 0;
    for i in 0..=40 {
        for j in 0..=40 {
            let (n, s) = (i as f64 * 0.025, j as f64 * 0.02475);
            if thresholds(n, s).quantum_squeezed != (s > 2.0 * n) {
                wrong += 1;
            }
        }
    }
    // exactly at threshold the state is not quantum squeezed
    v.require(
        wrong == 0 && !thresholds(0.25, 0.5).quantum_squeezed,
        format!("quantum_squeezed flag matches s > 2 n_bar on a 41 x 41 grid ({wrong} mismatches)"),
    );
    v
}

fn central_jacobian(prob: &SpectrumProblem, p: &[f64]) -> DMatrix<f64> {
    let (nr, np) = (prob.n_residuals(), prob.n_params());
    let mut out = DMatrix::zeros(nr, np);
    let (mut hi, mut lo) = (vec![0.0; nr], vec![0.0; nr]);
    for k in 0..np {
        let h = 1e-6 * p[k].abs().max(1e-4);
        let mut q = p.to_vec();
        q[k] = p[k] + h;
        prob.residuals(&q, &mut hi);
        q[k] = p[k] - h;
        prob.residuals(&q, &mut lo);
        for i in 0..nr {
            out[(i, k)] = (hi[i] - lo[i]) / (2.0 * h);
        }
    }
    out
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Every record the synthesizer and the pipeline produce.
const RECORD_CLASSES: [&str; 12] = [
    "component detuned",
    "component resonant",
    "heterodyne detuned",
    "heterodyne resonant",
    "lock-in chx_detuned",
    "lock-in chx_resonant",
    "lock-in chy_detuned",
    "lock-in chy_resonant",
    "raw quadrature x",
    "raw quadrature y",
    "raw envelope stokes",
    "raw envelope anti-stokes",
];

/// The bare synthesizer outputs, before any detection chain.
fn raw_parseval(parseval: &mut Vec<(String, f64)>) {
    let rates = RunConfig::default().validate().unwrap();
    let grid = SimGrid {
        sample_rate: 5_000.0,
        duration: 200.0,
        // unused by the baseband quadratures, but the grid wants one in band
        carrier: 2.0 * PI * 1_000.0,
        seed: 20_160_406,
    };
    let seg = default_segment_len(grid.sample_rate, rates.gamma_minus / (2.0 * PI));
    let q = simulate_quadratures(&rates, &grid).unwrap();
    for (name, x) in [("x", &q.x), ("y", &q.y)] {
        let psd = welch_psd(x, grid.sample_rate, seg, 0.5, Window::Hann).unwrap();
        let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        parseval.push((format!("raw quadrature {name}"), psd.integrated_power() / ms));
    }
    let e = simulate_sideband_envelopes(&rates, &grid).unwrap();
    for (name, z) in [("stokes", &e.stokes), ("anti-stokes", &e.antistokes)] {
        let psd = welch_psd_complex(z, grid.sample_rate, seg, 0.5, Window::Hann).unwrap();
        let ms = z.iter().map(|v| v.norm_sqr()).sum::<f64>() / z.len() as f64;
        parseval.push((format!("raw envelope {name}"), psd.integrated_power() / ms));
    }
}

fn criterion_7(parseval: &[(String, f64)]) -> Verdict {
    let mut v = Verdict::new();
    let mut classes: BTreeMap<String, f64> = BTreeMap::new();
    for (name, x) in parseval {
        let worst = classes.entry(name.clone()).or_insert(0.0);
        *worst = worst.max((x - 1.0).abs());
    }
    let missing: Vec<&str> = RECORD_CLASSES.iter().copied().filter(|c| !classes.contains_key(*c)).collect();
    v.require(
        missing.is_empty(),
        format!("{} of {} record classes collected (missing: {missing:?})", RECORD_CLASSES.len() - missing.len(), RECORD_CLASSES.len()),
    );
    for (name, worst) in &classes {
        v.require(*worst <= 0.01, format!("Parseval {name}: worst deviation {:.3}%", 100.0 * worst));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(20_160_407);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let (model, p) = match i % 3 {
            0 => (
                SpectralModel::SinglePair {
                    stokes_hz: 61_000.0,
                    antistokes_hz: 39_000.0,
                },
                vec![rng.gen_range(10.0..200.0), rng.gen_range(0.5..5.0), rng.gen_range(0.5..5.0), rng.gen_range(1e-4..1e-3)],
            ),
            1 => (
                SpectralModel::DoublePair {
                    stokes_hz: 61_000.0,
                    antistokes_hz: 39_000.0,
                    gamma_eff_hz: rng.gen_range(20.0..200.0),
                },
                vec![
                    rng.gen_range(0.05..0.9),
                    rng.gen_range(0.5..5.0),
                    rng.gen_range(0.5..5.0),
                    rng.gen_range(0.5..5.0),
                    rng.gen_range(-0.1..5.0),
                    rng.gen_range(1e-4..1e-3),
                ],
            ),
            _ => (
                SpectralModel::Quadrature { lo_hz: 11_000.0 },
                vec![rng.gen_range(10.0..200.0), rng.gen_range(0.5..10.0), rng.gen_range(1e-4..1e-3)],
            ),
        };
        // bins clustered around the lines, where the derivatives are large
        let centers = model.centers();
        let per = 600 / centers.len();
        let bins: Vec<f64> = (0..600)
            .map(|k| centers[k % centers.len()] - 300.0 + (k / centers.len()) as f64 * 600.0 / per as f64)
            .collect();
        let prob = SpectrumProblem {
            model,
            data: bins.iter().map(|_| rng.gen_range(0.0..1.0)).collect(),
            sigma: bins.iter().map(|_| rng.gen_range(0.1..1.0)).collect(),
            freqs: bins,
            width_scale: 100.0,
        };
        let mut analytic = DMatrix::zeros(prob.n_residuals(), prob.n_params());
        prob.jacobian(&p, &mut analytic);
        let numeric = central_jacobian(&prob, &p);
        for k in 0..prob.n_params() {
            let scale = analytic.column(k).amax();
            let err = (analytic.column(k) - numeric.column(k)).amax() / scale;
            worst = worst.max(err);
        }
    }
    v.require(worst <= 1e-6, format!("LM Jacobian vs central differences, 20 points: worst relative error {worst:.2e}"));

    let cfg = RunConfig {
        duration: 10.0,
        repetitions: 2,
        seed: 20_160_408,
        ..RunConfig::default()
    };
    let mut trees = Vec::new();
    for workers in [1, 4] {
        let c = RunConfig {
            workers: Some(workers),
            ..cfg.clone()
        };
        let dir = tempfile::tempdir().unwrap();
        run_sweep_ratio_vs_s(&c, &[0.1, 0.5], Some(dir.path())).unwrap();
        run_sweep_variance_vs_tone_ratio(&c, &[0.9, 0.95], Some(&dir.path().join("variances"))).unwrap();
        trees.push(tree(dir.path()));
    }
    let differing: Vec<&String> = trees[0].iter().filter(|(k, b)| trees[1].get(*k) != Some(*b)).map(|(k, _)| k).collect();
    v.require(
        differing.is_empty() && trees[0].len() == trees[1].len(),
        format!("{} artifacts byte-identical with 1 and 4 workers (differing: {differing:?})", trees[0].len()),
    );
    v
}

fn main() {
    let started = Instant::now();
    let mut parseval = Vec::new();
    let c1 = criterion_1();
    let c2 = criterion_2();
    let c3 = criterion_3(&mut parseval);
    let (c4, c5) = criterion_4_and_5(&mut parseval);
    let c6 = criterion_6();
    raw_parseval(&mut parseval);
    let c7 = criterion_7(&parseval);
    let titles = [
        "closed-form sideband ratios",
        "commutator sum rule",
        "round-trip sideband recovery",
        "quadrature variance sweep",
        "reference-segment symmetry",
        "threshold behaviour",
        "estimator hygiene",
    ];
    let all = [c1, c2, c3, c4, c5, c6, c7];
    for (i, v) in all.iter().enumerate() {
        for l in &v.lines {
            println!("    [{}] {l}", i + 1);
        }
    }
    println!();
    for (i, (v, title)) in all.iter().zip(titles).enumerate() {
        println!("criterion {}: {} ({title})", i + 1, if v.pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance finished in {:.0} s", started.elapsed().as_secs_f64());
    if all.iter().any(|v| !v.pass) {
        std::process::exit(1);
    }
}
