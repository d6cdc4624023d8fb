//! Welch power spectral density estimates normalized so that the summed
//! density times the bin width equals the mean square of the input.
//!
//! Real inputs give one-sided densities (doubled except at DC and Nyquist),
//! complex inputs give two-sided densities ordered from `-fs/2` to `fs/2`.

use num_complex::Complex64;
use realfft::RealFftPlanner;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("Welch estimate needs at least 2 segments, got {0}")]
    TooFewSegments(usize),
    #[error("invalid Welch parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    Hann,
    Blackman,
}

impl Window {
    /// Periodic (DFT-even) coefficients.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let x = 2.0 * PI * i as f64 / nf;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * x.cos(),
                    Window::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
                }
            })
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::Blackman => "blackman",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" | "boxcar" => Some(Window::Rectangular),
            "hann" | "hanning" => Some(Window::Hann),
            "blackman" => Some(Window::Blackman),
            _ => None,
        }
    }
}

/// Spectral density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    /// Bin frequencies (Hz).
    pub freqs: Vec<f64>,
    /// Density (units^2 / Hz).
    pub density: Vec<f64>,
    /// Bin spacing `fs / segment_len` (Hz).
    pub rbw: f64,
    pub n_averages: usize,
    pub window: Window,
    pub two_sided: bool,
    /// Sum of squared correlation coefficients between a bin and all other
    /// bins of the same periodogram, `N sum(w^4) / (sum(w^2))^2`.
    pub bin_correlation: f64,
}

impl Psd {
    /// `sum(density) * rbw`, the estimate of the input mean square.
    pub fn integrated_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.rbw
    }

    /// Power within `[lo, hi]` Hz.
    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.density)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, d)| d)
            .sum::<f64>()
            * self.rbw
    }

    /// Bins within `[lo, hi]` Hz.
    pub fn band(&self, lo: f64, hi: f64) -> Psd {
        let keep: Vec<usize> = (0..self.freqs.len())
            .filter(|&k| self.freqs[k] >= lo && self.freqs[k] <= hi)
            .collect();
        Psd {
            freqs: keep.iter().map(|&k| self.freqs[k]).collect(),
            density: keep.iter().map(|&k| self.density[k]).collect(),
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> Psd {
        Psd {
            density: self.density.iter().map(|d| d * c).collect(),
            ..self.clone()
        }
    }

    /// Two-column CSV with a commented header carrying the estimator settings.
    pub fn write_csv<W: Write>(&self, mut w: W, extra_header: &[(&str, String)]) -> io::Result<()> {
        writeln!(
            w,
            "# rbw_hz={} window={} n_averages={} two_sided={}",
            fmt_num(self.rbw),
            self.window.name(),
            self.n_averages,
            self.two_sided
        )?;
        for (k, v) in extra_header {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "freq_hz,psd")?;
        for (f, d) in self.freqs.iter().zip(&self.density) {
            writeln!(w, "{},{}", fmt_num(*f), fmt_num(*d))?;
        }
        Ok(())
    }
}

/// Shortest round-trip representation.
pub fn fmt_num(x: f64) -> String {
    format!("{x:e}")
}

fn segment_starts(len: usize, seg_len: usize, step: usize) -> impl Iterator<Item = usize> {
    let count = if len >= seg_len { 1 + (len - seg_len) / step } else { 0 };
    (0..count).map(move |k| k * step)
}

fn check_params(seg_len: usize, overlap: f64, fs: f64) -> Result<usize, SpectralError> {
    if seg_len < 2 {
        return Err(SpectralError::InvalidParameter("segment_len must be >= 2".into()));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(SpectralError::InvalidParameter("overlap_frac must be in [0, 1)".into()));
    }
    if !(fs > 0.0) {
        return Err(SpectralError::InvalidParameter("sample_rate must be > 0".into()));
    }
    let step = seg_len - (overlap * seg_len as f64).round() as usize;
    Ok(step.max(1))
}

fn bin_correlation(w: &[f64]) -> f64 {
    let s2: f64 = w.iter().map(|x| x * x).sum();
    let s4: f64 = w.iter().map(|x| x.powi(4)).sum();
    w.len() as f64 * s4 / (s2 * s2)
}

/// Two-sided averaged periodogram of real pieces, bins `0..N` in FFT order.
/// Exactly symmetric: bin `N - k` is a copy of bin `k`.
pub fn welch_two_sided_real(
    pieces: &[&[f64]],
    sample_rate: f64,
    segment_len: usize,
    overlap_frac: f64,
    window: Window,
) -> Result<(Vec<f64>, usize), SpectralError> {
    let step = check_params(segment_len, overlap_frac, sample_rate)?;
    let w = window.coefficients(segment_len);
    let u: f64 = w.iter().map(|x| x * x).sum();
    let mut planner = RealFftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(segment_len);
    let mut input = fft.make_input_vec();
    let mut spectrum = fft.make_output_vec();
    let half = segment_len / 2 + 1;
    let mut acc = vec![0.0; half];
    let mut count = 0usize;
    for piece in pieces {
        for start in segment_starts(piece.len(), segment_len, step) {
            for ((dst, x), wk) in input.iter_mut().zip(&piece[start..start + segment_len]).zip(&w) {
                *dst = x * wk;
            }
            fft.process(&mut input, &mut spectrum)
                .map_err(|e| SpectralError::InvalidParameter(e.to_string()))?;
            for (a, c) in acc.iter_mut().zip(&spectrum) {
                *a += c.norm_sqr();
            }
            count += 1;
        }
    }
    if count < 2 {
        return Err(SpectralError::TooFewSegments(count));
    }
    let norm = 1.0 / (count as f64 * sample_rate * u);
    let mut two = vec![0.0; segment_len];
    for k in 0..half {
        two[k] = acc[k] * norm;
    }
    for k in half..segment_len {
        two[k] = two[segment_len - k];
    }
    Ok((two, count))
}

/// One-sided Welch PSD of a real signal.
pub fn welch_psd(
    samples: &[f64],
    sample_rate: f64,
    segment_len: usize,
    overlap_frac: f64,
    window: Window,
) -> Result<Psd, SpectralError> {
    welch_psd_pieces(&[samples], sample_rate, segment_len, overlap_frac, window)
}

/// One-sided Welch PSD averaging the segments of several disjoint pieces.
pub fn welch_psd_pieces(
    pieces: &[&[f64]],
    sample_rate: f64,
    segment_len: usize,
    overlap_frac: f64,
    window: Window,
) -> Result<Psd, SpectralError> {
    if pieces.iter().all(|p| p.len() < segment_len) {
        return Err(SpectralError::TooFewSegments(0));
    }
    let (two, count) = welch_two_sided_real(pieces, sample_rate, segment_len, overlap_frac, window)?;
    let n = segment_len;
    let half = n / 2 + 1;
    let density: Vec<f64> = (0..half)
        .map(|k| {
            if k == 0 || (n % 2 == 0 && k == n / 2) {
                two[k]
            } else {
                two[k] + two[n - k]
            }
        })
        .collect();
    let rbw = sample_rate / n as f64;
    Ok(Psd {
        freqs: (0..half).map(|k| k as f64 * rbw).collect(),
        density,
        rbw,
        n_averages: count,
        window,
        two_sided: false,
        bin_correlation: bin_correlation(&window.coefficients(n)),
    })
}

/// Two-sided Welch PSD of a complex signal, frequencies ascending from `-fs/2`.
pub fn welch_psd_complex(
    samples: &[Complex64],
    sample_rate: f64,
    segment_len: usize,
    overlap_frac: f64,
    window: Window,
) -> Result<Psd, SpectralError> {
    let step = check_params(segment_len, overlap_frac, sample_rate)?;
    let w = window.coefficients(segment_len);
    let u: f64 = w.iter().map(|x| x * x).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    let mut acc = vec![0.0; segment_len];
    let mut count = 0usize;
    for start in segment_starts(samples.len(), segment_len, step) {
        for ((dst, x), wk) in buf.iter_mut().zip(&samples[start..start + segment_len]).zip(&w) {
            *dst = x * wk;
        }
        fft.process(&mut buf);
        for (a, c) in acc.iter_mut().zip(&buf) {
            *a += c.norm_sqr();
        }
        count += 1;
    }
    if count < 2 {
        return Err(SpectralError::TooFewSegments(count));
    }
    let n = segment_len;
    let norm = 1.0 / (count as f64 * sample_rate * u);
    let rbw = sample_rate / n as f64;
    // shift so that bin k - n/2 comes first
    let neg = n / 2;
    let order = (n - neg..n).chain(0..n - neg);
    let mut freqs = Vec::with_capacity(n);
    let mut density = Vec::with_capacity(n);
    for k in order {
        let kk = if k >= n - neg { k as f64 - n as f64 } else { k as f64 };
        freqs.push(kk * rbw);
        density.push(acc[k] * norm);
    }
    Ok(Psd {
        freqs,
        density,
        rbw,
        n_averages: count,
        window,
        two_sided: true,
        bin_correlation: bin_correlation(&w),
    })
}

/// Outcome of a resolution check against the narrowest expected linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCheck {
    pub pass: bool,
    pub rbw: f64,
    pub limit: f64,
}

/// Passes when the bin spacing resolves `min_width` (Hz) with at least five bins.
pub fn resolution_check(psd: &Psd, min_width: f64) -> ResolutionCheck {
    let limit = min_width / 5.0;
    ResolutionCheck {
        pass: psd.rbw <= limit,
        rbw: psd.rbw,
        limit,
    }
}

/// Smallest integer `>= n` with no prime factors above 5.
pub fn next_smooth(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Default segment length: at least ten bins across the narrowest linewidth (Hz).
pub fn default_segment_len(sample_rate: f64, narrowest_width_hz: f64) -> usize {
    next_smooth((10.0 * sample_rate / narrowest_width_hz).ceil() as usize)
}
