//! Run configuration: flat `key = value` text with unit suffixes.
//!
//! ```text
//! # operating point
//! n_bar = 5.8
//! kappa = 1.4 MHz
//! duration = 100 s
//! sweep_s = 0, 0.1, 0.2
//! ```
//!
//! Angular rates accept `Hz`, `kHz`, `MHz` (multiplied by `2 pi`) or `rad/s`.
//! Sampling and filter frequencies are plain `Hz`. Times accept `s`, `ms`,
//! `us`; temperature `K`; mass `kg`. Dimensional keys require a suffix.

use super::PipelineError;
use crate::detect::{passband_edge, schedule_drive, DetectionParams, LowpassFir};
use crate::model::{epsilon_for_squeeze, CavityPumpParams, DerivedRates, OscillatorParams};
use crate::record::Frame;
use crate::spectral::{default_segment_len, Window};
use crate::synth::SimGrid;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;

/// Squeezing levels of the default variance sweep.
pub const DEFAULT_VARIANCE_SWEEP_S: [f64; 4] = [0.0, 0.2, 0.4, 0.515];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    // oscillator and pump, rates in rad/s
    pub omega_m: f64,
    pub q_factor: f64,
    pub temperature: Option<f64>,
    pub mass: Option<f64>,
    pub n_bar: f64,
    pub kappa: f64,
    pub g: f64,
    pub delta_pump: f64,
    pub delta_lo: f64,
    pub omega_par_offset: f64,
    /// Cooling-tone fraction. When absent it is solved from `s_target`.
    pub epsilon_c: Option<f64>,
    pub s_target: Option<f64>,
    // record
    pub carrier: f64,
    pub sample_rate: f64,
    pub duration: f64,
    pub gain: f64,
    pub shot_psd: f64,
    // lock-in and drive schedule
    pub lowpass_cutoff: f64,
    pub schedule_period: f64,
    pub oscillator_phase: f64,
    pub lo_phase: f64,
    /// Fixed reference phase; searched from the data when absent.
    pub demod_phase: Option<f64>,
    pub decimate: bool,
    // analysis
    pub window: Window,
    pub overlap: f64,
    pub segment_len: Option<usize>,
    pub fit_mask: Vec<(f64, f64)>,
    pub theory_band: bool,
    // sweeps
    pub sweep_s: Vec<f64>,
    pub sweep_epsilon: Option<Vec<f64>>,
    // runs
    pub seed: u64,
    pub repetitions: usize,
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub out_dir: String,
    #[serde(skip)]
    pub keep_raw: bool,
}

const TWO_PI: f64 = 2.0 * PI;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            omega_m: TWO_PI * 530e3,
            q_factor: 6.4e6,
            temperature: Some(7.0),
            mass: None,
            n_bar: 5.8,
            kappa: TWO_PI * 1.4e6,
            g: TWO_PI * 7e3,
            delta_pump: TWO_PI * 200e3,
            delta_lo: TWO_PI * 11e3,
            omega_par_offset: TWO_PI * 12e3,
            epsilon_c: None,
            s_target: Some(0.5),
            carrier: TWO_PI * 50e3,
            sample_rate: 250e3,
            duration: 100.0,
            gain: 1.0,
            shot_psd: 2e-4,
            lowpass_cutoff: 20e3,
            schedule_period: 5.0,
            oscillator_phase: 0.7,
            lo_phase: 0.3,
            demod_phase: None,
            decimate: true,
            window: Window::Hann,
            overlap: 0.5,
            segment_len: None,
            fit_mask: Vec::new(),
            theory_band: false,
            sweep_s: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            sweep_epsilon: None,
            seed: 1,
            repetitions: 5,
            workers: None,
            out_dir: "out".into(),
            keep_raw: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Angular,
    Frequency,
    Time,
    Temperature,
    Mass,
    Number,
    Integer,
    Bool,
    Text,
    NumberList,
    IntervalList,
}

const KEYS: &[(&str, Kind)] = &[
    ("omega_m", Kind::Angular),
    ("q_factor", Kind::Number),
    ("temperature", Kind::Temperature),
    ("mass", Kind::Mass),
    ("n_bar", Kind::Number),
    ("kappa", Kind::Angular),
    ("g", Kind::Angular),
    ("delta_pump", Kind::Angular),
    ("delta_lo", Kind::Angular),
    ("omega_par_offset", Kind::Angular),
    ("epsilon_c", Kind::Number),
    ("s_target", Kind::Number),
    ("carrier", Kind::Angular),
    ("sample_rate", Kind::Frequency),
    ("duration", Kind::Time),
    ("gain", Kind::Number),
    ("shot_psd", Kind::Number),
    ("lowpass_cutoff", Kind::Frequency),
    ("schedule_period", Kind::Time),
    ("oscillator_phase", Kind::Number),
    ("lo_phase", Kind::Number),
    ("demod_phase", Kind::Number),
    ("decimate", Kind::Bool),
    ("window", Kind::Text),
    ("overlap", Kind::Number),
    ("segment_len", Kind::Integer),
    ("fit_mask", Kind::IntervalList),
    ("theory_band", Kind::Bool),
    ("sweep_s", Kind::NumberList),
    ("sweep_epsilon", Kind::NumberList),
    ("seed", Kind::Integer),
    ("repetitions", Kind::Integer),
    ("workers", Kind::Integer),
    ("out_dir", Kind::Text),
    ("keep_raw", Kind::Bool),
];

fn cfg_err(line: usize, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Config(format!("line {line}: {msg}"))
}

/// Splits `"1.4 MHz"` into the number and its suffix.
fn split_unit(v: &str) -> (&str, &str) {
    let v = v.trim();
    let idx = v
        .char_indices()
        .find(|&(i, c)| {
            c.is_ascii_alphabetic() && !((c == 'e' || c == 'E') && is_exponent(v, i))
        })
        .map(|(i, _)| i)
        .unwrap_or(v.len());
    (v[..idx].trim(), v[idx..].trim())
}

fn is_exponent(v: &str, i: usize) -> bool {
    let next = v[i + 1..].chars().next();
    i > 0 && matches!(next, Some(c) if c.is_ascii_digit() || c == '-' || c == '+')
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(x)
}

fn parse_quantity(v: &str, kind: Kind) -> Result<f64, String> {
    let (num, unit) = split_unit(v);
    let x = parse_f64(num)?;
    let scale = match (kind, unit) {
        (Kind::Angular, "Hz") => TWO_PI,
        (Kind::Angular, "kHz") => TWO_PI * 1e3,
        (Kind::Angular, "MHz") => TWO_PI * 1e6,
        (Kind::Angular, "rad/s") => 1.0,
        (Kind::Frequency, "Hz") => 1.0,
        (Kind::Frequency, "kHz") => 1e3,
        (Kind::Frequency, "MHz") => 1e6,
        (Kind::Frequency, "rad/s") => 1.0 / TWO_PI,
        (Kind::Time, "s") => 1.0,
        (Kind::Time, "ms") => 1e-3,
        (Kind::Time, "us") => 1e-6,
        (Kind::Temperature, "K") => 1.0,
        (Kind::Mass, "kg") => 1.0,
        (Kind::Number, "") | (Kind::Number, "rad") => 1.0,
        (_, "") => return Err("missing unit suffix".into()),
        (_, u) => return Err(format!("unit `{u}` not accepted here")),
    };
    Ok(x * scale)
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        o => Err(format!("`{o}` is not a boolean")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(s.trim())).collect()
}

/// `lo:hi` pairs in Hz, e.g. `60.1 kHz : 60.2 kHz, 39 kHz : 39.1 kHz`.
fn parse_intervals(v: &str) -> Result<Vec<(f64, f64)>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|item| {
            let (a, b) = item
                .split_once(':')
                .ok_or_else(|| format!("`{}` is not an interval `lo:hi`", item.trim()))?;
            let (a, b) = (parse_quantity(a, Kind::Frequency)?, parse_quantity(b, Kind::Frequency)?);
            if !(b > a) {
                return Err(format!("interval `{}` is empty", item.trim()));
            }
            Ok((a, b))
        })
        .collect()
}

fn parse_int(v: &str) -> Result<u64, String> {
    v.trim().parse().map_err(|_| format!("`{}` is not a non-negative integer", v.trim()))
}

impl RunConfig {
    /// Parses config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut c = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            let kind = KEYS
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, kind)| *kind)
                .ok_or_else(|| cfg_err(line_no, format!("unknown key `{key}`")))?;
            if !seen.insert(key.to_string()) {
                return Err(cfg_err(line_no, format!("duplicate key `{key}`")));
            }
            let e = |m: String| cfg_err(line_no, format!("{key}: {m}"));
            let none = value.eq_ignore_ascii_case("none");
            let q = || parse_quantity(value, kind).map_err(e);
            match key {
                "omega_m" => c.omega_m = q()?,
                "q_factor" => c.q_factor = q()?,
                "temperature" => c.temperature = if none { None } else { Some(q()?) },
                "mass" => c.mass = if none { None } else { Some(q()?) },
                "n_bar" => c.n_bar = q()?,
                "kappa" => c.kappa = q()?,
                "g" => c.g = q()?,
                "delta_pump" => c.delta_pump = q()?,
                "delta_lo" => c.delta_lo = q()?,
                "omega_par_offset" => c.omega_par_offset = q()?,
                "epsilon_c" => c.epsilon_c = if none { None } else { Some(q()?) },
                "s_target" => c.s_target = if none { None } else { Some(q()?) },
                "carrier" => c.carrier = q()?,
                "sample_rate" => c.sample_rate = q()?,
                "duration" => c.duration = q()?,
                "gain" => c.gain = q()?,
                "shot_psd" => c.shot_psd = q()?,
                "lowpass_cutoff" => c.lowpass_cutoff = q()?,
                "schedule_period" => c.schedule_period = q()?,
                "oscillator_phase" => c.oscillator_phase = q()?,
                "lo_phase" => c.lo_phase = q()?,
                "demod_phase" => c.demod_phase = if none { None } else { Some(q()?) },
                "decimate" => c.decimate = parse_bool(value).map_err(e)?,
                "window" => {
                    c.window = Window::parse(value).ok_or_else(|| e(format!("unknown window `{value}`")))?
                }
                "overlap" => c.overlap = q()?,
                "segment_len" => {
                    c.segment_len = if none { None } else { Some(parse_int(value).map_err(e)? as usize) }
                }
                "fit_mask" => c.fit_mask = parse_intervals(value).map_err(e)?,
                "theory_band" => c.theory_band = parse_bool(value).map_err(e)?,
                "sweep_s" => c.sweep_s = parse_list(value).map_err(e)?,
                "sweep_epsilon" => {
                    c.sweep_epsilon = if none { None } else { Some(parse_list(value).map_err(e)?) }
                }
                "seed" => c.seed = parse_int(value).map_err(e)?,
                "repetitions" => c.repetitions = parse_int(value).map_err(e)? as usize,
                "workers" => c.workers = Some(parse_int(value).map_err(e)? as usize),
                "out_dir" => c.out_dir = value.to_string(),
                "keep_raw" => c.keep_raw = parse_bool(value).map_err(e)?,
                _ => unreachable!("key table and match agree"),
            }
        }
        if seen.contains("epsilon_c") && !seen.contains("s_target") {
            c.s_target = None;
        }
        if c.epsilon_c.is_some() && c.s_target.is_some() {
            return Err(PipelineError::Config(
                "set either epsilon_c or s_target, not both".into(),
            ));
        }
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form. Parsing it reproduces every numeric setting exactly.
    pub fn snapshot(&self) -> String {
        fn num(x: f64) -> String {
            format!("{x:e}")
        }
        fn opt(x: Option<f64>, unit: &str) -> String {
            x.map_or("none".into(), |v| format!("{} {unit}", num(v)).trim_end().to_string())
        }
        let list = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("omega_m", format!("{} rad/s", num(self.omega_m)));
        put("q_factor", num(self.q_factor));
        put("temperature", opt(self.temperature, "K"));
        put("mass", opt(self.mass, "kg"));
        put("n_bar", num(self.n_bar));
        put("kappa", format!("{} rad/s", num(self.kappa)));
        put("g", format!("{} rad/s", num(self.g)));
        put("delta_pump", format!("{} rad/s", num(self.delta_pump)));
        put("delta_lo", format!("{} rad/s", num(self.delta_lo)));
        put("omega_par_offset", format!("{} rad/s", num(self.omega_par_offset)));
        put("epsilon_c", opt(self.epsilon_c, ""));
        put("s_target", opt(self.s_target, ""));
        put("carrier", format!("{} rad/s", num(self.carrier)));
        put("sample_rate", format!("{} Hz", num(self.sample_rate)));
        put("duration", format!("{} s", num(self.duration)));
        put("gain", num(self.gain));
        put("shot_psd", num(self.shot_psd));
        put("lowpass_cutoff", format!("{} Hz", num(self.lowpass_cutoff)));
        put("schedule_period", format!("{} s", num(self.schedule_period)));
        put("oscillator_phase", num(self.oscillator_phase));
        put("lo_phase", num(self.lo_phase));
        put("demod_phase", opt(self.demod_phase, ""));
        put("decimate", self.decimate.to_string());
        put("window", self.window.name().to_string());
        put("overlap", num(self.overlap));
        put("segment_len", self.segment_len.map_or("none".into(), |n| n.to_string()));
        put(
            "fit_mask",
            self.fit_mask
                .iter()
                .map(|(a, b)| format!("{} Hz : {} Hz", num(*a), num(*b)))
                .collect::<Vec<_>>()
                .join(", "),
        );
        put("theory_band", self.theory_band.to_string());
        put("sweep_s", list(&self.sweep_s));
        put("sweep_epsilon", self.sweep_epsilon.as_deref().map_or("none".into(), list));
        put("seed", self.seed.to_string());
        put("repetitions", self.repetitions.to_string());
        out
    }

    /// SHA-256 of the canonical snapshot. Output location, worker count and
    /// raw-record persistence do not enter the hash.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.snapshot().as_bytes()))
    }

    pub fn oscillator(&self) -> OscillatorParams {
        OscillatorParams {
            omega_m: self.omega_m,
            gamma_m: self.omega_m / self.q_factor,
            mass: self.mass,
            temperature: self.temperature,
            n_bar: self.n_bar,
        }
    }

    /// Pump configuration at cooling fraction `epsilon_c`.
    pub fn pump(&self, epsilon_c: f64) -> CavityPumpParams {
        CavityPumpParams {
            kappa: self.kappa,
            g: self.g,
            epsilon_c,
            delta_pump: self.delta_pump,
            delta_lo: self.delta_lo,
            omega_par_offset: self.omega_par_offset,
        }
    }

    /// Cooling fraction realizing the gain `s` at fixed total pump power.
    pub fn epsilon_for(&self, s: f64) -> Result<f64, PipelineError> {
        epsilon_for_squeeze(&self.oscillator(), &self.pump(1.0), s).map_err(|e| PipelineError::stage("model", e))
    }

    /// The configured operating point's cooling fraction.
    pub fn operating_epsilon(&self) -> Result<f64, PipelineError> {
        match (self.epsilon_c, self.s_target) {
            (Some(e), _) => Ok(e),
            (None, Some(s)) => self.epsilon_for(s),
            (None, None) => Err(PipelineError::Config("either epsilon_c or s_target is required".into())),
        }
    }

    pub fn rates_at(&self, epsilon_c: f64) -> Result<DerivedRates, PipelineError> {
        DerivedRates::from_params(&self.oscillator(), &self.pump(epsilon_c)).map_err(|e| PipelineError::stage("model", e))
    }

    /// Cooling fractions of the variance sweep.
    pub fn variance_sweep_epsilons(&self) -> Result<Vec<f64>, PipelineError> {
        match &self.sweep_epsilon {
            Some(v) => Ok(v.clone()),
            None => DEFAULT_VARIANCE_SWEEP_S.iter().map(|&s| self.epsilon_for(s)).collect(),
        }
    }

    pub fn frame(&self) -> Frame {
        Frame {
            carrier: self.carrier,
            delta_lo: self.delta_lo,
            oscillator_phase: self.oscillator_phase,
            lo_phase: self.lo_phase,
        }
    }

    pub fn grid(&self, seed: u64) -> SimGrid {
        SimGrid {
            sample_rate: self.sample_rate,
            duration: self.duration,
            carrier: self.carrier,
            seed,
        }
    }

    pub fn detection(&self) -> DetectionParams {
        DetectionParams {
            gain: self.gain,
            shot_psd: self.shot_psd,
            demod_phase: self.demod_phase.unwrap_or(0.0),
            lowpass_cutoff: self.lowpass_cutoff,
            schedule_period: self.schedule_period,
            decimate: self.decimate,
        }
    }

    /// Welch segment length for a spectrum sampled at `sample_rate` whose
    /// narrowest line is `gamma_minus` (rad/s).
    pub fn segment_for(&self, sample_rate: f64, gamma_minus: f64) -> usize {
        self.segment_len
            .unwrap_or_else(|| default_segment_len(sample_rate, gamma_minus / TWO_PI))
    }

    /// Checks every cross-module precondition of the configured operating
    /// point before any synthesis starts.
    pub fn validate(&self) -> Result<DerivedRates, PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.q_factor > 0.0) {
            return bad("q_factor must be > 0".into());
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1)".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        if let Some(s) = self.s_target {
            if !(0.0..1.0).contains(&s) {
                return bad(format!("s_target = {s} must lie in [0, 1)"));
            }
        }
        let o = self.oscillator();
        o.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        let eps = self.operating_epsilon().map_err(|e| PipelineError::Config(e.to_string()))?;
        let p = self.pump(eps);
        p.validate(&o).map_err(|e| PipelineError::Config(e.to_string()))?;
        let rates = DerivedRates::from_params(&o, &p).map_err(|e| PipelineError::Config(e.to_string()))?;
        rates.require_stable().map_err(|e| PipelineError::Config(e.to_string()))?;
        let grid = self.grid(self.seed);
        grid.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        grid.check_nyquist(self.delta_lo, rates.gamma_plus)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let frame = self.frame();
        let d = self.detection();
        d.validate(&frame, &rates).map_err(|e| PipelineError::Config(e.to_string()))?;
        schedule_drive(self.duration, self.schedule_period, rates.gamma_minus)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let image = (2.0 * self.carrier - self.delta_lo) / TWO_PI;
        LowpassFir::design(self.sample_rate, passband_edge(&frame, &rates), self.lowpass_cutoff, image, self.decimate)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let seg = self.segment_for(self.sample_rate, rates.gamma_minus);
        if seg as f64 > self.schedule_period * self.sample_rate / 2.0 {
            return bad(format!(
                "Welch segment of {seg} samples does not fit twice into a {} s drive segment",
                self.schedule_period
            ));
        }
        Ok(rates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn units_are_applied() {
        let c = RunConfig::parse("kappa = 1.4 MHz\nsample_rate = 250kHz\nduration = 1500 ms\ntemperature = 7 K\n")
            .unwrap();
        assert!((c.kappa - TWO_PI * 1.4e6).abs() < 1e-6);
        assert_eq!(c.sample_rate, 250e3);
        assert_eq!(c.duration, 1.5);
        let c = RunConfig::parse("delta_lo = 69115.03837897545 rad/s\nshot_psd = 1e-4").unwrap();
        assert!((c.delta_lo / TWO_PI - 11e3).abs() < 1e-9);
        assert_eq!(c.shot_psd, 1e-4);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "kappa = 1.4",
            "kappa = 1.4 K",
            "nonsense = 3",
            "n_bar 5",
            "n_bar = five",
            "n_bar = 1\nn_bar = 2",
            "epsilon_c = 0.8\ns_target = 0.5",
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(PipelineError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn comments_lists_and_masks() {
        let c = RunConfig::parse(
            "# header\nsweep_s = 0, 0.25 # two points\nfit_mask = 60.1 kHz : 60.2 kHz\nwindow = blackman\n",
        )
        .unwrap();
        assert_eq!(c.sweep_s, vec![0.0, 0.25]);
        assert_eq!(c.fit_mask, vec![(60.1e3, 60.2e3)]);
        assert_eq!(c.window, Window::Blackman);
    }

    #[test]
    fn epsilon_overrides_target() {
        let c = RunConfig::parse("epsilon_c = 0.9").unwrap();
        assert_eq!(c.s_target, None);
        assert_eq!(c.operating_epsilon().unwrap(), 0.9);
    }

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig::default();
        c.fit_mask = vec![(1.0, 2.5)];
        c.sweep_epsilon = Some(vec![1.0, 0.9]);
        c.mass = Some(1e-12);
        let back = RunConfig::parse(&c.snapshot()).unwrap();
        assert_eq!(back, RunConfig { workers: None, out_dir: "out".into(), keep_raw: false, ..c.clone() });
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.workers = Some(3);
        d.out_dir = "elsewhere".into();
        assert_eq!(d.hash(), c.hash());
        d.seed = 2;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn default_config_is_valid() {
        let rates = RunConfig::default().validate().unwrap();
        assert!((rates.s - 0.5).abs() < 1e-9);
        assert!((rates.n_bar - 5.8).abs() < 1e-12);
    }

    #[test]
    fn invalid_operating_points_are_config_errors() {
        let c = RunConfig::parse("s_target = 1.2").unwrap();
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
        let c = RunConfig::parse("carrier = 120 kHz").unwrap();
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
        let c = RunConfig::parse("lowpass_cutoff = 5 kHz").unwrap();
        assert!(matches!(c.validate(), Err(PipelineError::Config(_))));
    }
}
