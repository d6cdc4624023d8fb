//! Heterodyne record composition and phase-coherent lock-in demodulation.
//!
//! Records sit at a reduced carrier `carrier` with the Stokes sideband at
//! `carrier + delta_lo` and the anti-Stokes sideband at `carrier - delta_lo`.
//!
//! Scale conventions (detector units):
//!
//! * quadrature records: `2 gain [X cos(carrier t + phi) + Y sin(carrier t + phi)] cos(delta_lo t + theta_lo)`,
//!   so the noise-free record variance is `gain^2 (var X + var Y)`;
//! * component records: `gain Re{b_S exp(i(carrier + delta_lo)t)} + gain Re{b_AS exp(i(carrier - delta_lo)t)}`,
//!   so the one-sided record density near each sideband is `gain^2 / 2` times the
//!   envelope's two-sided density, and fitted area ratios do not depend on `gain`.

use crate::model::DerivedRates;
use crate::record::{DriveTag, Frame, Record, Schedule, Segment};
use crate::rng;
use crate::synth::{QuadTrajectory, QuadratureSource, SidebandEnvelopes, SidebandSource, SimGrid, SynthError};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Range;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("aliasing: content at {top_hz:.1} Hz exceeds the Nyquist frequency {nyquist_hz:.1} Hz")]
    Aliasing { top_hz: f64, nyquist_hz: f64 },
    #[error("lock-in filter design failed: {0}")]
    FilterDesign(String),
    #[error("invalid detection parameter: {0}")]
    InvalidParameter(String),
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("record holds no resonant-drive data (only {detuned} detuned segment(s))")]
    MissingResonant { detuned: usize },
    #[error("settling guard {guard:.3} s exceeds a quarter of the {segment:.3} s segment")]
    GuardTooLong { guard: f64, segment: f64 },
    #[error("trajectory length {got} does not match record length {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Detector chain settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Detector units per quadrature quantum.
    pub gain: f64,
    /// One-sided white noise floor (units^2 / Hz).
    pub shot_psd: f64,
    /// Lock-in reference phase (rad).
    pub demod_phase: f64,
    /// Lock-in low-pass -6 dB frequency (Hz).
    pub lowpass_cutoff: f64,
    /// Drive alternation period (s).
    pub schedule_period: f64,
    /// Decimate the demodulated channels.
    pub decimate: bool,
}

impl Default for DetectionParams {
    fn default() -> Self {
        Self {
            gain: 1.0,
            shot_psd: 2e-4,
            demod_phase: 0.0,
            lowpass_cutoff: 20e3,
            schedule_period: 5.0,
            decimate: true,
        }
    }
}

impl DetectionParams {
    pub fn validate(&self, frame: &Frame, rates: &DerivedRates) -> Result<(), DetectError> {
        if !(self.shot_psd >= 0.0) {
            return Err(DetectError::InvalidParameter("shot_psd must be >= 0".into()));
        }
        if !self.gain.is_finite() {
            return Err(DetectError::InvalidParameter("gain must be finite".into()));
        }
        let need = passband_edge(frame, rates);
        if !(self.lowpass_cutoff > need) {
            return Err(DetectError::InvalidParameter(format!(
                "lowpass_cutoff {} Hz must exceed delta_lo + 10 gamma_plus = {need:.1} Hz",
                self.lowpass_cutoff
            )));
        }
        if !(self.lowpass_cutoff < frame.carrier / (2.0 * PI)) {
            return Err(DetectError::InvalidParameter(
                "lowpass_cutoff must be below the carrier frequency".into(),
            ));
        }
        Ok(())
    }
}

/// Passband the lock-in must preserve: `delta_lo + 10 gamma_plus` (Hz).
pub fn passband_edge(frame: &Frame, rates: &DerivedRates) -> f64 {
    (frame.delta_lo + 10.0 * rates.gamma_plus) / (2.0 * PI)
}

fn check_aliasing(frame: &Frame, sample_rate: f64) -> Result<(), DetectError> {
    let top_hz = (frame.carrier + frame.delta_lo) / (2.0 * PI);
    let nyquist_hz = 0.5 * sample_rate;
    if top_hz >= nyquist_hz {
        return Err(DetectError::Aliasing { top_hz, nyquist_hz });
    }
    Ok(())
}

/// Numerically controlled oscillator producing `exp(i (omega t + phase))`,
/// re-anchored with an exact evaluation every 1024 samples.
#[derive(Debug, Clone)]
pub struct Nco {
    cycles_per_sample: f64,
    phase: f64,
    index: u64,
    current: Complex64,
    rotor: Complex64,
}

impl Nco {
    pub fn new(omega: f64, phase: f64, sample_rate: f64) -> Self {
        let cycles_per_sample = omega / (2.0 * PI * sample_rate);
        let step = 2.0 * PI * cycles_per_sample;
        Self {
            cycles_per_sample,
            phase,
            index: 0,
            current: Complex64::from_polar(1.0, phase),
            rotor: Complex64::from_polar(1.0, step),
        }
    }

    fn exact(&self, index: u64) -> Complex64 {
        let cycles = (self.cycles_per_sample * index as f64).fract();
        Complex64::from_polar(1.0, 2.0 * PI * cycles + self.phase)
    }

    #[inline]
    pub fn next_phasor(&mut self) -> Complex64 {
        let out = self.current;
        self.index += 1;
        self.current = if self.index % 1024 == 0 {
            self.exact(self.index)
        } else {
            self.current * self.rotor
        };
        out
    }
}

struct ShotNoise {
    rng: ChaCha8Rng,
    std: f64,
}

impl ShotNoise {
    fn new(seed: u64, stream: u64, shot_psd: f64, sample_rate: f64) -> Self {
        Self {
            rng: rng::stream(seed, stream),
            // one-sided density S over [0, fs/2] carries variance S fs / 2
            std: (shot_psd * 0.5 * sample_rate).sqrt(),
        }
    }

    #[inline]
    fn draw(&mut self) -> f64 {
        if self.std == 0.0 {
            return 0.0;
        }
        let z: f64 = self.rng.sample(StandardNormal);
        self.std * z
    }
}

/// Mixes quadrature samples into the heterodyne record.
struct WignerMixer {
    carrier: Nco,
    lo: Nco,
    gain2: f64,
    shot: ShotNoise,
}

impl WignerMixer {
    fn new(frame: &Frame, d: &DetectionParams, sample_rate: f64, seed: u64) -> Self {
        Self {
            carrier: Nco::new(frame.carrier, frame.oscillator_phase, sample_rate),
            lo: Nco::new(frame.delta_lo, frame.lo_phase, sample_rate),
            gain2: 2.0 * d.gain,
            shot: ShotNoise::new(seed, rng::STREAM_SHOT_WIGNER, d.shot_psd, sample_rate),
        }
    }

    #[inline]
    fn sample(&mut self, x: f64, y: f64) -> f64 {
        let c = self.carrier.next_phasor();
        let l = self.lo.next_phasor();
        self.gain2 * (x * c.re + y * c.im) * l.re + self.shot.draw()
    }
}

struct ComponentMixer {
    carrier: Nco,
    lo: Nco,
    gain: f64,
    shot: ShotNoise,
}

impl ComponentMixer {
    fn new(frame: &Frame, d: &DetectionParams, sample_rate: f64, seed: u64) -> Self {
        Self {
            carrier: Nco::new(frame.carrier, frame.oscillator_phase, sample_rate),
            lo: Nco::new(frame.delta_lo, frame.lo_phase, sample_rate),
            gain: d.gain,
            shot: ShotNoise::new(seed, rng::STREAM_SHOT_COMPONENTS, d.shot_psd, sample_rate),
        }
    }

    #[inline]
    fn sample(&mut self, stokes: Complex64, antistokes: Complex64) -> f64 {
        let c = self.carrier.next_phasor();
        let l = self.lo.next_phasor();
        let up = c * l;
        let down = c * l.conj();
        self.gain * ((stokes * up).re + (antistokes * down).re) + self.shot.draw()
    }
}

/// Heterodyne record of a quadrature trajectory.
pub fn compose_heterodyne_wigner(
    traj: &QuadTrajectory,
    d: &DetectionParams,
    frame: &Frame,
) -> Result<Record, DetectError> {
    let grid = &traj.grid;
    check_aliasing(frame, grid.sample_rate)?;
    if traj.x.len() != grid.n_samples() {
        return Err(DetectError::LengthMismatch {
            got: traj.x.len(),
            expected: grid.n_samples(),
        });
    }
    let mut mixer = WignerMixer::new(frame, d, grid.sample_rate, grid.seed);
    let samples = traj.x.iter().zip(&traj.y).map(|(&x, &y)| mixer.sample(x, y)).collect();
    Ok(Record {
        samples,
        sample_rate: grid.sample_rate,
        schedule: traj.schedule.clone(),
        frame: *frame,
    })
}

/// Heterodyne record of the two sideband envelopes.
pub fn compose_heterodyne_components(
    env: &SidebandEnvelopes,
    d: &DetectionParams,
    frame: &Frame,
) -> Result<Record, DetectError> {
    let grid = &env.grid;
    check_aliasing(frame, grid.sample_rate)?;
    if env.stokes.len() != grid.n_samples() {
        return Err(DetectError::LengthMismatch {
            got: env.stokes.len(),
            expected: grid.n_samples(),
        });
    }
    let mut mixer = ComponentMixer::new(frame, d, grid.sample_rate, grid.seed);
    let samples = env
        .stokes
        .iter()
        .zip(&env.antistokes)
        .map(|(&s, &a)| mixer.sample(s, a))
        .collect();
    Ok(Record {
        samples,
        sample_rate: grid.sample_rate,
        schedule: env.schedule.clone(),
        frame: *frame,
    })
}

/// Streams the quadrature backend straight into a record without holding
/// the trajectory. Bit-identical to simulate-then-compose.
pub fn synthesize_wigner_record(
    rates: &DerivedRates,
    schedule: &Schedule,
    grid: &SimGrid,
    frame: &Frame,
    d: &DetectionParams,
) -> Result<Record, DetectError> {
    check_aliasing(frame, grid.sample_rate)?;
    let src = QuadratureSource::new(rates, schedule, grid)?;
    let mut mixer = WignerMixer::new(frame, d, grid.sample_rate, grid.seed);
    let samples = src.map(|(x, y)| mixer.sample(x, y)).collect();
    Ok(Record {
        samples,
        sample_rate: grid.sample_rate,
        schedule: schedule.clone(),
        frame: *frame,
    })
}

/// Streaming counterpart of [`compose_heterodyne_components`].
pub fn synthesize_component_record(
    rates: &DerivedRates,
    schedule: &Schedule,
    grid: &SimGrid,
    frame: &Frame,
    d: &DetectionParams,
) -> Result<Record, DetectError> {
    check_aliasing(frame, grid.sample_rate)?;
    let src = SidebandSource::new(rates, schedule, grid)?;
    let mut mixer = ComponentMixer::new(frame, d, grid.sample_rate, grid.seed);
    let samples = src.map(|(s, a)| mixer.sample(s, a)).collect();
    Ok(Record {
        samples,
        sample_rate: grid.sample_rate,
        schedule: schedule.clone(),
        frame: *frame,
    })
}

/// Linear-phase low-pass FIR with its verified response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowpassFir {
    pub taps: Vec<f64>,
    pub sample_rate: f64,
    pub pass_edge: f64,
    pub cutoff: f64,
    pub stop_edge: f64,
    pub passband_ripple_db: f64,
    pub stopband_atten_db: f64,
    pub decimation: usize,
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = 0.25 * x * x;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

impl LowpassFir {
    /// Kaiser-window design with the transition band `[pass_edge, 2 cutoff - pass_edge]`
    /// (Hz), 80 dB design attenuation, verified to < 0.1 dB ripple and >= 60 dB stopband.
    pub fn design(
        sample_rate: f64,
        pass_edge: f64,
        cutoff: f64,
        image_hz: f64,
        decimate: bool,
    ) -> Result<Self, DetectError> {
        let stop_edge = 2.0 * cutoff - pass_edge;
        if !(pass_edge > 0.0 && cutoff > pass_edge) {
            return Err(DetectError::FilterDesign(format!(
                "cutoff {cutoff} Hz must exceed the passband edge {pass_edge:.1} Hz"
            )));
        }
        if stop_edge >= 0.5 * sample_rate {
            return Err(DetectError::FilterDesign(format!(
                "stopband edge {stop_edge:.1} Hz beyond Nyquist {:.1} Hz",
                0.5 * sample_rate
            )));
        }
        if image_hz - pass_edge < stop_edge {
            return Err(DetectError::FilterDesign(format!(
                "mixing image at {image_hz:.1} Hz falls inside the transition band"
            )));
        }
        let atten = 80.0;
        let beta = 0.1102 * (atten - 8.7);
        let dw = 2.0 * PI * (stop_edge - pass_edge) / sample_rate;
        let mut n = ((atten - 7.95) / (2.285 * dw)).ceil() as usize + 1;
        if n % 2 == 0 {
            n += 1;
        }
        let m = (n - 1) as f64 / 2.0;
        let fc = cutoff / sample_rate;
        let i0b = bessel_i0(beta);
        let mut taps: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 - m;
                let sinc = if t == 0.0 {
                    2.0 * fc
                } else {
                    (2.0 * PI * fc * t).sin() / (PI * t)
                };
                let r = t / m;
                let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
                sinc * kaiser
            })
            .collect();
        let dc: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= dc);

        let response = |f: f64| -> f64 {
            let w = 2.0 * PI * f / sample_rate;
            // linear phase: amplitude about the center tap
            taps.iter()
                .enumerate()
                .map(|(i, &h)| h * (w * (i as f64 - m)).cos())
                .sum::<f64>()
        };
        let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..=400 {
            let a = response(pass_edge * k as f64 / 400.0).abs();
            pmin = pmin.min(a);
            pmax = pmax.max(a);
        }
        let mut smax: f64 = 0.0;
        for k in 0..=1000 {
            let f = stop_edge + (0.5 * sample_rate - stop_edge) * k as f64 / 1000.0;
            smax = smax.max(response(f).abs());
        }
        let ripple = 20.0 * (pmax / pmin).log10();
        let stop_db = -20.0 * smax.max(1e-300).log10();
        if !(ripple < 0.1 && stop_db >= 60.0) {
            return Err(DetectError::FilterDesign(format!(
                "response check failed: ripple {ripple:.4} dB, stopband {stop_db:.1} dB"
            )));
        }
        let decimation = if decimate {
            ((sample_rate / (2.0 * cutoff)).floor() as usize).max(1)
        } else {
            1
        };
        Ok(Self {
            taps,
            sample_rate,
            pass_edge,
            cutoff,
            stop_edge,
            passband_ripple_db: ripple,
            stopband_atten_db: stop_db,
            decimation,
        })
    }

    /// Delay-compensated filtering: output `k` is centered on input `k * decimation`.
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let n = input.len();
        let len = self.taps.len();
        let half = (len - 1) / 2;
        let out_len = n.div_ceil(self.decimation);
        let mut out = Vec::with_capacity(out_len);
        for k in 0..out_len {
            let center = k * self.decimation;
            // y[c] = sum_j h[j] x[c + half - j]
            let lo_j = (center + half + 1).saturating_sub(n);
            let hi_j = (center + half).min(len - 1);
            let mut acc = 0.0;
            for j in lo_j..=hi_j {
                acc += self.taps[j] * input[center + half - j];
            }
            out.push(acc);
        }
        out
    }

    /// Samples at each end of a segment affected by neighbouring data.
    pub fn half_length(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

/// Two lock-in channels after mixing and low-pass filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodOutput {
    pub ch_x: Vec<f64>,
    pub ch_y: Vec<f64>,
    pub sample_rate: f64,
    pub demod_phase: f64,
    pub filter: LowpassFir,
    pub schedule: Schedule,
}

impl DemodOutput {
    /// Usable output ranges for `tag`, excluding the settling guard and the
    /// filter's reach into neighbouring segments.
    pub fn usable_ranges(&self, tag: DriveTag) -> Vec<Range<usize>> {
        let tail = self.filter.half_length().div_ceil(self.filter.decimation) + 1;
        let mut ranges =
            self.schedule
                .usable_ranges(tag, self.sample_rate, self.ch_x.len(), tail);
        // the leading filter reach is inside the guard unless the guard is zero
        let lead = tail;
        for r in &mut ranges {
            if self.schedule.guard * self.sample_rate < lead as f64 {
                r.start = (r.start + lead).min(r.end);
            }
        }
        ranges.retain(|r| !r.is_empty());
        ranges
    }

    pub fn pieces(&self, tag: DriveTag) -> (Vec<&[f64]>, Vec<&[f64]>) {
        let r = self.usable_ranges(tag);
        (
            r.iter().map(|r| &self.ch_x[r.clone()]).collect(),
            r.iter().map(|r| &self.ch_y[r.clone()]).collect(),
        )
    }
}

fn lockin_filter(rec: &Record, d: &DetectionParams, pass_edge: f64) -> Result<LowpassFir, DetectError> {
    if !(d.lowpass_cutoff < rec.frame.carrier / (2.0 * PI)) {
        return Err(DetectError::FilterDesign(
            "lowpass_cutoff must be below the carrier".into(),
        ));
    }
    let image = 2.0 * rec.frame.carrier / (2.0 * PI) - rec.frame.delta_lo / (2.0 * PI);
    LowpassFir::design(rec.sample_rate, pass_edge, d.lowpass_cutoff, image, d.decimate)
}

/// In-phase and quadrature outputs at zero reference phase:
/// `LP(2 rec cos(carrier t))` and `LP(2 rec sin(carrier t))`.
fn demodulate_iq(rec: &Record, fir: &LowpassFir) -> (Vec<f64>, Vec<f64>) {
    let mut nco = Nco::new(rec.frame.carrier, 0.0, rec.sample_rate);
    let mut i_mix = Vec::with_capacity(rec.samples.len());
    let mut q_mix = Vec::with_capacity(rec.samples.len());
    for &v in &rec.samples {
        let p = nco.next_phasor();
        i_mix.push(2.0 * v * p.re);
        q_mix.push(2.0 * v * p.im);
    }
    let i = fir.apply(&i_mix);
    drop(i_mix);
    let q = fir.apply(&q_mix);
    (i, q)
}

/// `ch_x = LP(2 rec cos(carrier t + theta))`, `ch_y = LP(2 rec sin(carrier t + theta))`.
///
/// `pass_edge` (Hz) is the highest baseband frequency that must pass
/// unchanged, normally [`passband_edge`].
pub fn lockin_demodulate(rec: &Record, d: &DetectionParams, pass_edge: f64) -> Result<DemodOutput, DetectError> {
    let fir = lockin_filter(rec, d, pass_edge)?;
    let (i, q) = demodulate_iq(rec, &fir);
    let (s, c) = d.demod_phase.sin_cos();
    let ch_x = i.iter().zip(&q).map(|(a, b)| c * a - s * b).collect();
    let ch_y = i.iter().zip(&q).map(|(a, b)| s * a + c * b).collect();
    Ok(DemodOutput {
        ch_x,
        ch_y,
        sample_rate: rec.sample_rate / fir.decimation as f64,
        demod_phase: d.demod_phase,
        filter: fir,
        schedule: rec.schedule.clone(),
    })
}

/// Result of the reference-phase search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSearch {
    /// Phase in `[0, pi)` minimizing the `ch_x` variance.
    pub phase: f64,
    pub var_min: f64,
    pub var_max: f64,
    /// `(var_max - var_min) / (var_max + var_min)` is below the flatness threshold,
    /// so the phase is not determined by the data.
    pub flat: bool,
}

/// Anisotropy below which the channel variance is treated as phase independent.
pub const FLAT_ANISOTROPY: f64 = 0.05;

/// Reference phase that squeezes `ch_x`, from the resonant-drive segments:
/// a 180-point grid over `[0, pi)` refined by golden-section search.
pub fn optimize_demod_phase(rec: &Record, d: &DetectionParams, pass_edge: f64) -> Result<PhaseSearch, DetectError> {
    if rec.schedule.count(DriveTag::Resonant) == 0 {
        return Err(DetectError::MissingResonant {
            detuned: rec.schedule.count(DriveTag::Detuned),
        });
    }
    let fir = lockin_filter(rec, d, pass_edge)?;
    let (i, q) = demodulate_iq(rec, &fir);
    let probe = DemodOutput {
        ch_x: i,
        ch_y: q,
        sample_rate: rec.sample_rate / fir.decimation as f64,
        demod_phase: 0.0,
        filter: fir,
        schedule: rec.schedule.clone(),
    };
    let ranges = probe.usable_ranges(DriveTag::Resonant);
    if ranges.is_empty() {
        return Err(DetectError::MissingResonant { detuned: 0 });
    }
    let (mut sii, mut sqq, mut siq, mut n) = (0.0, 0.0, 0.0, 0usize);
    for r in ranges {
        for k in r {
            let (a, b) = (probe.ch_x[k], probe.ch_y[k]);
            sii += a * a;
            sqq += b * b;
            siq += a * b;
            n += 1;
        }
    }
    let (vii, vqq, viq) = (sii / n as f64, sqq / n as f64, siq / n as f64);
    // ch_x(theta) = cos(theta) I - sin(theta) Q
    let variance = |t: f64| {
        let (s, c) = t.sin_cos();
        c * c * vii - 2.0 * s * c * viq + s * s * vqq
    };
    Ok(phase_search(variance))
}

fn phase_search(variance: impl Fn(f64) -> f64) -> PhaseSearch {
    let step = PI / 180.0;
    let (mut best, mut vbest) = (0.0, f64::INFINITY);
    let mut vmax = f64::NEG_INFINITY;
    for k in 0..180 {
        let t = k as f64 * step;
        let v = variance(t);
        if v < vbest {
            best = t;
            vbest = v;
        }
        vmax = vmax.max(v);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best - step, best + step);
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (variance(c), variance(e));
    while b - a > 1e-6 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = variance(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = variance(e);
        }
    }
    let phase = (0.5 * (a + b)).rem_euclid(PI);
    let var_min = variance(phase).min(vbest);
    let anisotropy = (vmax - var_min) / (vmax + var_min);
    PhaseSearch {
        phase,
        var_min,
        var_max: vmax,
        flat: anisotropy < FLAT_ANISOTROPY,
    }
}

/// Alternating detuned/resonant segments of length `period`, starting with
/// the detuned drive, with a settling guard of `10 / gamma_minus` after each
/// switch. The guard may not exceed a quarter of a segment.
pub fn schedule_drive(duration: f64, period: f64, gamma_minus: f64) -> Result<Schedule, DetectError> {
    if !(period > 0.0 && duration > 0.0) {
        return Err(DetectError::Schedule("period and duration must be > 0".into()));
    }
    if !(gamma_minus > 0.0) {
        return Err(DetectError::Schedule("gamma_minus must be > 0".into()));
    }
    let mut segments = Vec::new();
    let mut t = 0.0;
    let mut k = 0usize;
    while t < duration {
        let end = ((k + 1) as f64 * period).min(duration);
        let tag = if k % 2 == 0 { DriveTag::Detuned } else { DriveTag::Resonant };
        segments.push(Segment { start: t, end, tag });
        t = end;
        k += 1;
    }
    let schedule = Schedule {
        segments,
        guard: 10.0 / gamma_minus,
    };
    if schedule.count(DriveTag::Resonant) == 0 {
        return Err(DetectError::MissingResonant {
            detuned: schedule.count(DriveTag::Detuned),
        });
    }
    if schedule.guard > 0.25 * period {
        return Err(DetectError::GuardTooLong {
            guard: schedule.guard,
            segment: period,
        });
    }
    Ok(schedule)
}
