//! Stochastic trajectories realizing the quadrature and sideband spectra.
//!
//! Two backends are provided:
//!
//! * the quadrature (Wigner) backend draws the slowly varying quadratures
//!   `X` and `Y` as independent Ornstein-Uhlenbeck processes with linewidths
//!   `gamma_plus` and `gamma_minus` and symmetrized variances;
//! * the component backend draws each sideband envelope as the sum of two
//!   independent complex Ornstein-Uhlenbeck processes whose spectra are the
//!   narrow and broad Lorentzians of the Stokes and anti-Stokes sidebands,
//!   so the envelope spectra carry the quantum sideband asymmetry.
//!
//! The quadrature backend is sideband-symmetric by construction, while the
//! component backend does not produce single-width demodulated quadratures.
//! Each backend is used for the analysis path it reproduces.
//!
//! All updates are exact discretizations, so results carry no step-size bias.

use crate::model::{DerivedRates, ModelError};
use crate::record::{DriveTag, Schedule};
use crate::rng;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "quantum-squeezing regime (s > 2 n_bar: s = {s}, n_bar = {n_bar}): the broad anti-Stokes \
         weight {weight} is negative and cannot be synthesized as a process variance"
    )]
    QuantumSqueezed { n_bar: f64, s: f64, weight: f64 },
    #[error("invalid simulation grid: {0}")]
    Grid(String),
}

/// Sampling grid of a synthesized record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    /// Samples per second (Hz).
    pub sample_rate: f64,
    /// Record length (s).
    pub duration: f64,
    /// Reduced carrier standing in for the mechanical frequency (rad/s).
    pub carrier: f64,
    pub seed: u64,
}

impl SimGrid {
    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(SynthError::Grid("sample_rate must be > 0".into()));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(SynthError::Grid("duration must be > 0".into()));
        }
        if !(self.carrier.is_finite() && self.carrier > 0.0) {
            return Err(SynthError::Grid("carrier must be > 0".into()));
        }
        let n = self.duration * self.sample_rate;
        if n < 2.0 || n > (isize::MAX as f64) / 16.0 {
            return Err(SynthError::Grid(format!("{n} samples is not addressable")));
        }
        Ok(())
    }

    /// Nyquist margin for a record whose highest spectral content sits at
    /// `carrier + delta_lo` with tails of width `gamma_plus`.
    pub fn check_nyquist(&self, delta_lo: f64, gamma_plus: f64) -> Result<(), SynthError> {
        let top = (self.carrier + delta_lo + 10.0 * gamma_plus) / (2.0 * std::f64::consts::PI);
        if self.sample_rate <= 2.0 * top {
            return Err(SynthError::Grid(format!(
                "sample rate {} Hz does not cover content up to {top:.1} Hz",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

/// One exact Ornstein-Uhlenbeck update with amplitude decay `decay_rate`.
pub fn ou_step(prev: f64, decay_rate: f64, stationary_var: f64, dt: f64, noise_draw: f64) -> f64 {
    OuCoefficients::new(decay_rate, stationary_var, dt).step(prev, noise_draw)
}

/// Precomputed update coefficients of an exact OU step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuCoefficients {
    pub alpha: f64,
    pub kick: f64,
    pub std: f64,
}

impl OuCoefficients {
    pub fn new(decay_rate: f64, stationary_var: f64, dt: f64) -> Self {
        let alpha = (-decay_rate * dt).exp();
        // 1 - alpha^2 without cancellation for small steps
        let one_minus = -(-2.0 * decay_rate * dt).exp_m1();
        Self {
            alpha,
            kick: (stationary_var * one_minus).sqrt(),
            std: stationary_var.sqrt(),
        }
    }

    #[inline]
    pub fn step(&self, prev: f64, z: f64) -> f64 {
        self.alpha * prev + self.kick * z
    }
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Per-sample drive tag lookup for a schedule.
#[derive(Debug, Clone)]
struct TagCursor {
    ends: Vec<(usize, DriveTag)>,
    pos: usize,
}

impl TagCursor {
    fn new(schedule: &Schedule, grid: &SimGrid) -> Self {
        let n = grid.n_samples();
        let mut ends: Vec<(usize, DriveTag)> = schedule
            .sample_segments(grid.sample_rate, n)
            .into_iter()
            .map(|(r, t)| (r.end, t))
            .collect();
        if let Some(last) = ends.last_mut() {
            last.0 = n;
        }
        Self { ends, pos: 0 }
    }

    fn first(&self) -> DriveTag {
        self.ends.first().map_or(DriveTag::Resonant, |e| e.1)
    }

    #[inline]
    fn tag(&mut self, index: usize) -> DriveTag {
        while self.pos + 1 < self.ends.len() && index >= self.ends[self.pos].0 {
            self.pos += 1;
        }
        self.ends[self.pos].1
    }
}

fn tag_slot(tag: DriveTag) -> usize {
    match tag {
        DriveTag::Detuned => 0,
        DriveTag::Resonant => 1,
    }
}

fn quadrature_coefficients(
    rates: &DerivedRates,
    dt: f64,
) -> Result<(OuCoefficients, OuCoefficients), SynthError> {
    rates.require_stable()?;
    let v = rates.variances()?;
    Ok((
        OuCoefficients::new(0.5 * rates.gamma_plus, v.x, dt),
        OuCoefficients::new(0.5 * rates.gamma_minus, v.y, dt),
    ))
}

/// Streaming generator of the quadrature pair, switching rates at the
/// schedule boundaries while keeping the state continuous.
#[derive(Debug, Clone)]
pub struct QuadratureSource {
    coeffs: [(OuCoefficients, OuCoefficients); 2],
    cursor: TagCursor,
    rng_x: ChaCha8Rng,
    rng_y: ChaCha8Rng,
    state: (f64, f64),
    index: usize,
    n: usize,
}

impl QuadratureSource {
    /// `resonant` holds the driven rates; detuned segments use the same
    /// damping with `s = 0`.
    pub fn new(
        resonant: &DerivedRates,
        schedule: &Schedule,
        grid: &SimGrid,
    ) -> Result<Self, SynthError> {
        grid.validate()?;
        let dt = grid.dt();
        let coeffs = [
            quadrature_coefficients(&resonant.detuned(), dt)?,
            quadrature_coefficients(resonant, dt)?,
        ];
        let cursor = TagCursor::new(schedule, grid);
        let mut rng_x = rng::stream(grid.seed, rng::STREAM_X);
        let mut rng_y = rng::stream(grid.seed, rng::STREAM_Y);
        let (cx, cy) = coeffs[tag_slot(cursor.first())];
        let state = (cx.std * normal(&mut rng_x), cy.std * normal(&mut rng_y));
        Ok(Self {
            coeffs,
            cursor,
            rng_x,
            rng_y,
            state,
            index: 0,
            n: grid.n_samples(),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

impl Iterator for QuadratureSource {
    type Item = (f64, f64);

    #[inline]
    fn next(&mut self) -> Option<(f64, f64)> {
        if self.index >= self.n {
            return None;
        }
        let out = self.state;
        self.index += 1;
        if self.index < self.n {
            let (cx, cy) = self.coeffs[tag_slot(self.cursor.tag(self.index))];
            self.state = (
                cx.step(self.state.0, normal(&mut self.rng_x)),
                cy.step(self.state.1, normal(&mut self.rng_y)),
            );
        }
        Some(out)
    }
}

/// Quadrature time series in quanta units.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadTrajectory {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub grid: SimGrid,
    pub rates: DerivedRates,
    pub schedule: Schedule,
}

fn collect_quadratures(
    rates: &DerivedRates,
    schedule: Schedule,
    grid: &SimGrid,
) -> Result<QuadTrajectory, SynthError> {
    let src = QuadratureSource::new(rates, &schedule, grid)?;
    let (x, y) = src.unzip();
    Ok(QuadTrajectory {
        x,
        y,
        grid: *grid,
        rates: *rates,
        schedule,
    })
}

/// Stationary driven quadratures: `X` relaxes at `gamma_plus / 2` with
/// variance `(2n+1) / (4(1+s))`, `Y` at `gamma_minus / 2` with `(2n+1) / (4(1-s))`.
pub fn simulate_quadratures(
    rates: &DerivedRates,
    grid: &SimGrid,
) -> Result<QuadTrajectory, SynthError> {
    collect_quadratures(rates, Schedule::constant(grid.duration, DriveTag::Resonant), grid)
}

/// Reference trajectory without coherent parametric action: `s = 0` at unchanged damping.
pub fn detuned_reference_trajectory(
    rates: &DerivedRates,
    grid: &SimGrid,
) -> Result<QuadTrajectory, SynthError> {
    collect_quadratures(rates, Schedule::constant(grid.duration, DriveTag::Detuned), grid)
}

/// Quadratures following an alternating drive schedule.
pub fn simulate_scheduled_quadratures(
    rates: &DerivedRates,
    schedule: &Schedule,
    grid: &SimGrid,
) -> Result<QuadTrajectory, SynthError> {
    collect_quadratures(rates, schedule.clone(), grid)
}

/// Decay and power of the four component processes, ordered Stokes
/// narrow/broad then anti-Stokes narrow/broad.
///
/// A complex OU envelope with amplitude decay `gamma / 2` and mean power `P`
/// has the two-sided spectrum `P gamma / (Omega^2 + gamma^2 / 4)`; matching
/// the sideband Lorentzian with numerator `w` gives `P = w gamma_eff / (2 gamma)`.
pub fn component_processes(rates: &DerivedRates) -> Result<[(f64, f64); 4], SynthError> {
    rates.require_stable()?;
    let w = rates.weights;
    if !w.all_nonnegative() {
        return Err(SynthError::QuantumSqueezed {
            n_bar: rates.n_bar,
            s: rates.s,
            weight: w.antistokes_broad.min(w.antistokes_narrow),
        });
    }
    let ge = rates.gamma_eff;
    let narrow = |weight: f64| (0.5 * rates.gamma_minus, weight * ge / (2.0 * rates.gamma_minus));
    let broad = |weight: f64| (0.5 * rates.gamma_plus, weight * ge / (2.0 * rates.gamma_plus));
    Ok([
        narrow(w.stokes_narrow),
        broad(w.stokes_broad),
        narrow(w.antistokes_narrow),
        broad(w.antistokes_broad),
    ])
}

fn component_coefficients(rates: &DerivedRates, dt: f64) -> Result<[OuCoefficients; 4], SynthError> {
    let procs = component_processes(rates)?;
    // real and imaginary parts each carry half the power
    Ok(procs.map(|(decay, power)| OuCoefficients::new(decay, 0.5 * power, dt)))
}

/// Streaming generator of the Stokes and anti-Stokes complex envelopes.
#[derive(Debug, Clone)]
pub struct SidebandSource {
    coeffs: [[OuCoefficients; 4]; 2],
    cursor: TagCursor,
    rngs: [ChaCha8Rng; 4],
    state: [Complex64; 4],
    index: usize,
    n: usize,
}

impl SidebandSource {
    pub fn new(
        resonant: &DerivedRates,
        schedule: &Schedule,
        grid: &SimGrid,
    ) -> Result<Self, SynthError> {
        grid.validate()?;
        let dt = grid.dt();
        let coeffs = [
            component_coefficients(&resonant.detuned(), dt)?,
            component_coefficients(resonant, dt)?,
        ];
        let cursor = TagCursor::new(schedule, grid);
        let mut rngs = rng::STREAM_COMPONENTS.map(|id| rng::stream(grid.seed, id));
        let first = coeffs[tag_slot(cursor.first())];
        let mut state = [Complex64::new(0.0, 0.0); 4];
        for k in 0..4 {
            let re = normal(&mut rngs[k]);
            let im = normal(&mut rngs[k]);
            state[k] = Complex64::new(first[k].std * re, first[k].std * im);
        }
        Ok(Self {
            coeffs,
            cursor,
            rngs,
            state,
            index: 0,
            n: grid.n_samples(),
        })
    }
}

impl Iterator for SidebandSource {
    /// (Stokes, anti-Stokes) envelopes.
    type Item = (Complex64, Complex64);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        if self.index >= self.n {
            return None;
        }
        let s = &self.state;
        let out = (s[0] + s[1], s[2] + s[3]);
        self.index += 1;
        if self.index < self.n {
            let c = &self.coeffs[tag_slot(self.cursor.tag(self.index))];
            for k in 0..4 {
                let re = normal(&mut self.rngs[k]);
                let im = normal(&mut self.rngs[k]);
                let z = self.state[k];
                self.state[k] = Complex64::new(c[k].step(z.re, re), c[k].step(z.im, im));
            }
        }
        Some(out)
    }
}

/// Complex sideband envelopes (quanta units).
#[derive(Debug, Clone, PartialEq)]
pub struct SidebandEnvelopes {
    pub stokes: Vec<Complex64>,
    pub antistokes: Vec<Complex64>,
    pub grid: SimGrid,
    pub rates: DerivedRates,
    pub schedule: Schedule,
}

/// Envelopes whose spectra are the two-Lorentzian Stokes and anti-Stokes
/// sidebands. Refuses the quantum-squeezing regime, where a component weight
/// is negative.
pub fn simulate_sideband_envelopes(
    rates: &DerivedRates,
    grid: &SimGrid,
) -> Result<SidebandEnvelopes, SynthError> {
    simulate_scheduled_envelopes(rates, &Schedule::constant(grid.duration, DriveTag::Resonant), grid)
}

pub fn simulate_scheduled_envelopes(
    rates: &DerivedRates,
    schedule: &Schedule,
    grid: &SimGrid,
) -> Result<SidebandEnvelopes, SynthError> {
    let (stokes, antistokes) = SidebandSource::new(rates, schedule, grid)?.unzip();
    Ok(SidebandEnvelopes {
        stokes,
        antistokes,
        grid: *grid,
        rates: *rates,
        schedule: schedule.clone(),
    })
}
