//! On-disk artifacts: raw records, spectra, fit reports, summaries and
//! theory overlays. Every file carries the config hash.

use super::config::RunConfig;
use super::report::{render_report, summarize, RatesSummary, RunSummary, StatRecord};
use super::run::{PointOutcome, RunKind, RunOutput, SidebandFits, QUAD_NAMES};
use super::PipelineError;
use crate::fitting::models::lorentzian;
use crate::fitting::FitResult;
use crate::model::{ratios, DerivedRates};
use crate::record::Record;
use crate::spectral::{fmt_num, Psd};
use serde::Serialize;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"OSQR";
const VERSION: u32 = 1;
/// Samples written to the human-readable slice next to each raw record.
pub const SLICE_LEN: usize = 4096;

/// Multi-channel raw samples as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub sample_rate: f64,
    pub config_hash: String,
    pub channels: Vec<Vec<f64>>,
}

/// Binary layout, little endian: magic `OSQR`, version u32, channel count
/// u32, sample rate f64, length u64, 64 byte ASCII config hash, then each
/// channel's samples as f64.
pub fn write_raw(path: &Path, channels: &[&[f64]], sample_rate: f64, config_hash: &str) -> Result<(), PipelineError> {
    let len = channels.first().map_or(0, |c| c.len());
    if channels.iter().any(|c| c.len() != len) {
        return Err(PipelineError::Io("raw channels differ in length".into()));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(channels.len() as u32).to_le_bytes())?;
    w.write_all(&sample_rate.to_le_bytes())?;
    w.write_all(&(len as u64).to_le_bytes())?;
    let mut hash = [b' '; 64];
    let hb = config_hash.as_bytes();
    hash[..hb.len().min(64)].copy_from_slice(&hb[..hb.len().min(64)]);
    w.write_all(&hash)?;
    for c in channels {
        for x in *c {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_raw(path: &Path) -> Result<RawRecord, PipelineError> {
    let mut r = BufReader::new(File::open(path)?);
    let bad = |m: &str| PipelineError::Io(format!("{}: {m}", path.display()));
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if &b4 != MAGIC {
        return Err(bad("not a raw record"));
    }
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != VERSION {
        return Err(bad("unsupported version"));
    }
    r.read_exact(&mut b4)?;
    let n_ch = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8)?;
    let sample_rate = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let len = u64::from_le_bytes(b8) as usize;
    let mut hash = [0u8; 64];
    r.read_exact(&mut hash)?;
    let config_hash = String::from_utf8_lossy(&hash).trim_end().to_string();
    let mut channels = Vec::with_capacity(n_ch);
    for _ in 0..n_ch {
        let mut c = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut b8).map_err(|_| bad("truncated"))?;
            c.push(f64::from_le_bytes(b8));
        }
        channels.push(c);
    }
    Ok(RawRecord {
        sample_rate,
        config_hash,
        channels,
    })
}

/// Writes `<name>.bin` and a CSV slice of its first samples.
pub fn dump_raw_record(dir: &Path, name: &str, rec: &Record, config_hash: &str) -> Result<(), PipelineError> {
    write_raw(&dir.join(format!("{name}.bin")), &[&rec.samples], rec.sample_rate, config_hash)?;
    let mut w = BufWriter::new(File::create(dir.join(format!("{name}_slice.csv")))?);
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "t_s,sample")?;
    for (k, x) in rec.samples.iter().take(SLICE_LEN).enumerate() {
        writeln!(w, "{},{}", fmt_num(k as f64 / rec.sample_rate), fmt_num(*x))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_psd(path: &Path, psd: &Psd, hash: &str) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    psd.write_csv(&mut w, &[("config_hash", hash.to_string())])?;
    w.flush()?;
    Ok(())
}

/// Rows of `(x, columns...)` with a hash header.
fn write_table(path: &Path, hash: &str, header: &str, rows: &[Vec<f64>]) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "{header}")?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| if x.is_finite() { fmt_num(*x) } else { String::new() }).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct FitEntry<'a> {
    repetition: usize,
    seed: u64,
    spectrum: &'static str,
    fit: &'a FitResult,
}

#[derive(Serialize)]
struct FitsFile<'a> {
    config_hash: &'a str,
    label: &'a str,
    epsilon_c: Option<f64>,
    rates: Option<RatesSummary>,
    fits: Vec<FitEntry<'a>>,
    parseval: Vec<(usize, String, f64)>,
    stats: Vec<StatRecord>,
}

fn sideband_entries<'a>(rep: usize, seed: u64, tag: &'static str, f: &'a SidebandFits, out: &mut Vec<FitEntry<'a>>) {
    let names: [&'static str; 3] = match tag {
        "component" => ["component_reference", "component_double", "component_single_resonant"],
        _ => ["heterodyne_reference", "heterodyne_double", "heterodyne_single_resonant"],
    };
    out.push(FitEntry { repetition: rep, seed, spectrum: names[0], fit: &f.reference });
    out.push(FitEntry { repetition: rep, seed, spectrum: names[1], fit: &f.double });
    if let Some(s) = &f.single_resonant {
        out.push(FitEntry { repetition: rep, seed, spectrum: names[2], fit: s });
    }
}

/// Record-level sideband spectrum predicted at `rates`, one-sided.
pub fn sideband_overlay(rates: &DerivedRates, f_s: f64, f_as: f64, gain: f64, shot_psd: f64, freqs: &[f64]) -> Vec<f64> {
    let w = rates.weights;
    let g_eff = rates.gamma_eff;
    let lines = [
        (f_s, w.stokes_narrow, rates.gamma_minus),
        (f_s, w.stokes_broad, rates.gamma_plus),
        (f_as, w.antistokes_narrow, rates.gamma_minus),
        (f_as, w.antistokes_broad, rates.gamma_plus),
    ];
    freqs
        .iter()
        .map(|&f| {
            let mut d = shot_psd;
            for &(f0, weight, gamma) in &lines {
                let area = gain * gain * weight * g_eff / (2.0 * gamma) / 2.0;
                d += area * lorentzian(f, f0, gamma / (2.0 * PI));
            }
            d
        })
        .collect()
}

/// Lock-in channel spectrum for a quadrature of variance `var` and linewidth `width_hz`.
pub fn quadrature_overlay(var: f64, width_hz: f64, lo_hz: f64, gain: f64, shot_psd: f64, freqs: &[f64]) -> Vec<f64> {
    let area = 2.0 * gain * gain * var;
    freqs
        .iter()
        .map(|&f| area * (lorentzian(f, lo_hz, width_hz) + lorentzian(f, -lo_hz, width_hz)) + 2.0 * shot_psd)
        .collect()
}

fn write_point(dir: &Path, cfg: &RunConfig, hash: &str, p: &PointOutcome) -> Result<(), PipelineError> {
    if p.repetitions.is_empty() {
        return Ok(());
    }
    let pdir = dir.join("points").join(&p.label);
    fs::create_dir_all(&pdir)?;
    let f_s = (cfg.carrier + cfg.delta_lo) / (2.0 * PI);
    let f_as = (cfg.carrier - cfg.delta_lo) / (2.0 * PI);
    let f_lo = cfg.delta_lo / (2.0 * PI);
    let (lo, hi) = (f_as - f_lo, f_s + f_lo);
    let mut fits = Vec::new();
    let mut parseval = Vec::new();
    for r in &p.repetitions {
        for (tag, sb) in [("component", &r.sideband), ("heterodyne", &r.heterodyne)] {
            let Some(sb) = sb else { continue };
            sideband_entries(r.index, r.seed, tag, sb, &mut fits);
            write_psd(&pdir.join(format!("rep{}_{tag}_detuned.csv", r.index)), &sb.psd_detuned.band(lo, hi), hash)?;
            write_psd(&pdir.join(format!("rep{}_{tag}_resonant.csv", r.index)), &sb.psd_resonant.band(lo, hi), hash)?;
            for (name, v) in &sb.parseval {
                parseval.push((r.index, format!("{tag}_{name}"), *v));
            }
        }
        if let Some(qf) = &r.quadrature {
            for (k, name) in QUAD_NAMES.iter().enumerate() {
                fits.push(FitEntry { repetition: r.index, seed: r.seed, spectrum: name, fit: &qf.fits[k] });
                write_psd(&pdir.join(format!("rep{}_{name}.csv", r.index)), &qf.psds[k], hash)?;
            }
            for (name, v) in &qf.parseval {
                parseval.push((r.index, name.clone(), *v));
            }
        }
    }
    write_json(
        &pdir.join("fits.json"),
        &FitsFile {
            config_hash: hash,
            label: &p.label,
            epsilon_c: Some(p.epsilon_c).filter(|e| e.is_finite()),
            rates: p.rates.as_ref().map(RatesSummary::from_rates),
            fits,
            parseval,
            stats: p.stats.iter().map(StatRecord::from).collect(),
        },
    )?;

    let Some(rates) = p.rates else { return Ok(()) };
    let first = &p.repetitions[0];
    if let Some(sb) = first.sideband.as_ref().or(first.heterodyne.as_ref()) {
        let band = sb.psd_resonant.band(lo, hi);
        let detuned = DerivedRates::from_squeeze(rates.n_bar, rates.gamma_eff, 0.0)
            .map_err(|e| PipelineError::stage("theory", e))?;
        let det = sideband_overlay(&detuned, f_s, f_as, cfg.gain, cfg.shot_psd, &band.freqs);
        // the quadrature record carries symmetrized sidebands, so only the
        // component backend gets the asymmetric resonant curve
        let res = sideband_overlay(&rates, f_s, f_as, cfg.gain, cfg.shot_psd, &band.freqs);
        let rows: Vec<Vec<f64>> = band
            .freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| vec![f, det[i], res[i]])
            .collect();
        write_table(&pdir.join("theory_sideband.csv"), hash, "freq_hz,detuned,resonant", &rows)?;
    }
    if let Some(qf) = &first.quadrature {
        let freqs = &qf.psds[0].freqs;
        let v0 = (2.0 * rates.n_bar + 1.0) / 4.0;
        let lo_hz = f_lo;
        let h = 1.0 / (2.0 * PI);
        let det = quadrature_overlay(v0, rates.gamma_eff * h, lo_hz, cfg.gain, cfg.shot_psd, freqs);
        let vx = quadrature_overlay(v0 / (1.0 + rates.s), rates.gamma_plus * h, lo_hz, cfg.gain, cfg.shot_psd, freqs);
        let vy = quadrature_overlay(v0 / (1.0 - rates.s), rates.gamma_minus * h, lo_hz, cfg.gain, cfg.shot_psd, freqs);
        let rows: Vec<Vec<f64>> = freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| vec![f, det[i], vx[i], vy[i]])
            .collect();
        write_table(
            &pdir.join("theory_quadrature.csv"),
            hash,
            "freq_hz,detuned,resonant_x,resonant_y",
            &rows,
        )?;
    }
    Ok(())
}

fn stat_cols(p: &PointOutcome, name: &str) -> [f64; 3] {
    p.stat(name).map_or([f64::NAN; 3], |s| [s.mean, s.std, s.combined])
}

/// Ratio bounds over the corners of the kappa and temperature uncertainty.
fn ratio_band(cfg: &RunConfig, epsilon_c: f64) -> Option<[f64; 4]> {
    let t = cfg.temperature?;
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for dk in [0.95, 1.05] {
        for dt in [-0.5, 0.5] {
            let mut c = cfg.clone();
            c.kappa *= dk;
            c.n_bar = cfg.n_bar * (t + dt) / t;
            let r = c.rates_at(epsilon_c).ok()?;
            for (k, v) in [r.ratios.plus, r.ratios.minus].into_iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
    }
    Some([lo[0], hi[0], lo[1], hi[1]])
}

fn write_sweep_ratios(dir: &Path, cfg: &RunConfig, hash: &str, out: &RunOutput) -> Result<(), PipelineError> {
    let mut header = "index,s_set,epsilon_c,ok,s_hat,s_hat_std,s_hat_combined,ratio_plus,ratio_plus_std,\
                      ratio_plus_combined,ratio_minus,ratio_minus_std,ratio_minus_combined,theory_ratio_plus,theory_ratio_minus"
        .to_string();
    if cfg.theory_band {
        header.push_str(",band_plus_lo,band_plus_hi,band_minus_lo,band_minus_hi");
    }
    let rows: Vec<Vec<f64>> = out
        .points
        .iter()
        .map(|p| {
            let mut r = vec![
                p.index as f64,
                p.s_set.unwrap_or(f64::NAN),
                p.epsilon_c,
                if p.errors.is_empty() { 1.0 } else { 0.0 },
            ];
            for n in ["s_hat", "ratio_plus", "ratio_minus"] {
                r.extend(stat_cols(p, n));
            }
            let th = p.s_set.map(|s| ratios(cfg.n_bar, s));
            r.push(th.map_or(f64::NAN, |t| t.plus));
            r.push(th.map_or(f64::NAN, |t| t.minus));
            if cfg.theory_band {
                let b = if p.epsilon_c.is_finite() { ratio_band(cfg, p.epsilon_c) } else { None };
                r.extend(b.unwrap_or([f64::NAN; 4]));
            }
            r
        })
        .collect();
    write_table(&dir.join("sweep_ratios.csv"), hash, &header, &rows)?;

    // theory curve on a fine grid below the quantum-squeezing limit
    let s_max = out
        .points
        .iter()
        .filter_map(|p| p.s_set)
        .fold(0.0f64, f64::max)
        .min(0.99)
        .min(2.0 * cfg.n_bar);
    let curve: Vec<Vec<f64>> = (0..=200)
        .map(|k| {
            let s = s_max * k as f64 / 200.0;
            let r = ratios(cfg.n_bar, s);
            let mut row = vec![s, r.plain, r.plus, r.minus];
            if cfg.theory_band {
                let t = cfg.temperature.unwrap_or(f64::NAN);
                let lo = ratios(cfg.n_bar * (t - 0.5) / t, s);
                let hi = ratios(cfg.n_bar * (t + 0.5) / t, s);
                // larger occupancy gives ratios closer to one
                row.extend([hi.plus, lo.plus, hi.minus, lo.minus]);
            }
            row
        })
        .collect();
    let mut h = "s,ratio,ratio_plus,ratio_minus".to_string();
    if cfg.theory_band {
        h.push_str(",band_plus_lo,band_plus_hi,band_minus_lo,band_minus_hi");
    }
    write_table(&dir.join("theory_ratios.csv"), hash, &h, &curve)
}

fn write_sweep_variances(dir: &Path, cfg: &RunConfig, hash: &str, out: &RunOutput) -> Result<(), PipelineError> {
    let names = [
        "var_x_norm",
        "var_y_norm",
        "var_inferred_one_plus_s",
        "var_inferred_one_minus_s",
        "het_one_plus_s",
        "het_one_minus_s",
        "width0_hz",
    ];
    let mut header = "index,epsilon_c,s_theory,ok".to_string();
    for n in names {
        header.push_str(&format!(",{n},{n}_std,{n}_combined"));
    }
    header.push_str(",theory_var_x_norm,theory_var_y_norm");
    let rows: Vec<Vec<f64>> = out
        .points
        .iter()
        .map(|p| {
            let s = p.rates.map_or(f64::NAN, |r| r.s);
            let mut r = vec![p.index as f64, p.epsilon_c, s, if p.errors.is_empty() { 1.0 } else { 0.0 }];
            for n in names {
                r.extend(stat_cols(p, n));
            }
            r.push(1.0 / (1.0 + s));
            r.push(1.0 / (1.0 - s));
            r
        })
        .collect();
    write_table(&dir.join("sweep_variances.csv"), hash, &header, &rows)?;

    let eps: Vec<f64> = out.points.iter().map(|p| p.epsilon_c).filter(|e| e.is_finite()).collect();
    let (e0, e1) = eps.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| (a.min(e), b.max(e)));
    if !(e0 < e1) {
        return Ok(());
    }
    let curve: Vec<Vec<f64>> = (0..=200)
        .filter_map(|k| {
            let e = e0 + (e1 - e0) * k as f64 / 200.0;
            let r = cfg.rates_at(e).ok()?;
            Some(vec![e, r.s, 1.0 / (1.0 + r.s), 1.0 / (1.0 - r.s), r.gamma_eff / (2.0 * PI)])
        })
        .collect();
    write_table(
        &dir.join("theory_variances.csv"),
        hash,
        "epsilon_c,s,var_x_norm,var_y_norm,gamma_eff_hz",
        &curve,
    )
}

fn write_summary_table(path: &Path, hash: &str, s: &RunSummary) -> Result<(), PipelineError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash={hash}")?;
    writeln!(w, "point,status,quantity,n,mean,std,mean_sigma,combined,theory")?;
    let num = |x: f64| if x.is_finite() { fmt_num(x) } else { String::new() };
    for p in &s.points {
        for st in &p.stats {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                p.label,
                p.status,
                st.name,
                st.n,
                num(st.mean),
                num(st.std),
                num(st.mean_sigma),
                num(st.combined),
                st.theory.map_or(String::new(), num)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the full artifact tree of a run under `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, out: &RunOutput) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    let hash = &out.config_hash;
    fs::write(dir.join("config.txt"), format!("# config_hash={hash}\n{}", cfg.snapshot()))?;
    let summary = summarize(cfg.window.name(), cfg.overlap, cfg.repetitions, cfg.duration, out);
    write_json(&dir.join("summary.json"), &summary)?;
    fs::write(dir.join("summary.txt"), render_report(&summary, &[]))?;
    write_summary_table(&dir.join("summary_table.csv"), hash, &summary)?;
    for p in &out.points {
        write_point(dir, cfg, hash, p)?;
    }
    match out.kind {
        RunKind::Simulate => Ok(()),
        RunKind::SweepRatios => write_sweep_ratios(dir, cfg, hash, out),
        RunKind::SweepVariances => write_sweep_variances(dir, cfg, hash, out),
    }
}
