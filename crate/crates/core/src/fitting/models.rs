//! Lorentzian line models for one-sided spectral densities in Hz.

use super::lm::LeastSquaresProblem;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Unit-area Lorentzian with full width `w` at half maximum.
#[inline]
pub fn lorentzian(f: f64, f0: f64, w: f64) -> f64 {
    let x = f - f0;
    (w / (2.0 * PI)) / (x * x + 0.25 * w * w)
}

/// Derivative of [`lorentzian`] with respect to `w`.
#[inline]
pub fn lorentzian_dw(f: f64, f0: f64, w: f64) -> f64 {
    let x = f - f0;
    let d = x * x + 0.25 * w * w;
    (x * x - 0.25 * w * w) / (2.0 * PI * d * d)
}

/// Smallest width the fitter will accept, as a multiple of a line's scale.
const MIN_WIDTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralModel {
    /// One shared width, independent areas at the two sidebands.
    /// Parameters: `[width, area_stokes, area_antistokes, floor]`.
    SinglePair { stokes_hz: f64, antistokes_hz: f64 },
    /// Narrow and broad lines of widths `gamma_eff (1 -+ s)` on each sideband.
    /// Parameters: `[s, area_stokes_narrow, area_stokes_broad,
    /// area_antistokes_narrow, area_antistokes_broad, floor]`.
    DoublePair {
        stokes_hz: f64,
        antistokes_hz: f64,
        gamma_eff_hz: f64,
    },
    /// One line at `+lo_hz` and its image at `-lo_hz`.
    /// Parameters: `[width, area, floor]`.
    Quadrature { lo_hz: f64 },
}

pub const S_MAX: f64 = 0.99;
pub const NEGATIVE_AREA_LIMIT: f64 = 0.2;

impl SpectralModel {
    pub fn name(&self) -> &'static str {
        match self {
            SpectralModel::SinglePair { .. } => "single_pair",
            SpectralModel::DoublePair { .. } => "double_pair",
            SpectralModel::Quadrature { .. } => "quadrature",
        }
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self {
            SpectralModel::SinglePair { .. } => &["width_hz", "area_stokes", "area_antistokes", "floor"],
            SpectralModel::DoublePair { .. } => &[
                "s",
                "area_stokes_narrow",
                "area_stokes_broad",
                "area_antistokes_narrow",
                "area_antistokes_broad",
                "floor",
            ],
            SpectralModel::Quadrature { .. } => &["width_hz", "area", "floor"],
        }
    }

    pub fn n_params(&self) -> usize {
        self.param_names().len()
    }

    /// Line centers (Hz) inside the positive-frequency axis.
    pub fn centers(&self) -> Vec<f64> {
        match *self {
            SpectralModel::SinglePair { stokes_hz, antistokes_hz }
            | SpectralModel::DoublePair { stokes_hz, antistokes_hz, .. } => vec![stokes_hz, antistokes_hz],
            SpectralModel::Quadrature { lo_hz } => vec![lo_hz],
        }
    }

    pub fn eval(&self, p: &[f64], f: f64) -> f64 {
        match *self {
            SpectralModel::SinglePair { stokes_hz, antistokes_hz } => {
                p[1] * lorentzian(f, stokes_hz, p[0]) + p[2] * lorentzian(f, antistokes_hz, p[0]) + p[3]
            }
            SpectralModel::DoublePair {
                stokes_hz,
                antistokes_hz,
                gamma_eff_hz,
            } => {
                let (wn, wb) = (gamma_eff_hz * (1.0 - p[0]), gamma_eff_hz * (1.0 + p[0]));
                p[1] * lorentzian(f, stokes_hz, wn)
                    + p[2] * lorentzian(f, stokes_hz, wb)
                    + p[3] * lorentzian(f, antistokes_hz, wn)
                    + p[4] * lorentzian(f, antistokes_hz, wb)
                    + p[5]
            }
            SpectralModel::Quadrature { lo_hz } => {
                p[1] * (lorentzian(f, lo_hz, p[0]) + lorentzian(f, -lo_hz, p[0])) + p[2]
            }
        }
    }

    /// Gradient of [`eval`](Self::eval) with respect to the parameters.
    pub fn grad(&self, p: &[f64], f: f64, out: &mut [f64]) {
        match *self {
            SpectralModel::SinglePair { stokes_hz, antistokes_hz } => {
                let (ls, la) = (lorentzian(f, stokes_hz, p[0]), lorentzian(f, antistokes_hz, p[0]));
                out[0] = p[1] * lorentzian_dw(f, stokes_hz, p[0]) + p[2] * lorentzian_dw(f, antistokes_hz, p[0]);
                out[1] = ls;
                out[2] = la;
                out[3] = 1.0;
            }
            SpectralModel::DoublePair {
                stokes_hz,
                antistokes_hz,
                gamma_eff_hz,
            } => {
                let g = gamma_eff_hz;
                let (wn, wb) = (g * (1.0 - p[0]), g * (1.0 + p[0]));
                out[0] = -g * (p[1] * lorentzian_dw(f, stokes_hz, wn) + p[3] * lorentzian_dw(f, antistokes_hz, wn))
                    + g * (p[2] * lorentzian_dw(f, stokes_hz, wb) + p[4] * lorentzian_dw(f, antistokes_hz, wb));
                out[1] = lorentzian(f, stokes_hz, wn);
                out[2] = lorentzian(f, stokes_hz, wb);
                out[3] = lorentzian(f, antistokes_hz, wn);
                out[4] = lorentzian(f, antistokes_hz, wb);
                out[5] = 1.0;
            }
            SpectralModel::Quadrature { lo_hz } => {
                out[0] = p[1] * (lorentzian_dw(f, lo_hz, p[0]) + lorentzian_dw(f, -lo_hz, p[0]));
                out[1] = lorentzian(f, lo_hz, p[0]) + lorentzian(f, -lo_hz, p[0]);
                out[2] = 1.0;
            }
        }
    }

    /// Derivative of the model with respect to the fixed `gamma_eff_hz`.
    pub fn d_gamma_eff(&self, p: &[f64], f: f64) -> f64 {
        match *self {
            SpectralModel::DoublePair {
                stokes_hz,
                antistokes_hz,
                gamma_eff_hz,
            } => {
                let (wn, wb) = (gamma_eff_hz * (1.0 - p[0]), gamma_eff_hz * (1.0 + p[0]));
                (1.0 - p[0]) * (p[1] * lorentzian_dw(f, stokes_hz, wn) + p[3] * lorentzian_dw(f, antistokes_hz, wn))
                    + (1.0 + p[0])
                        * (p[2] * lorentzian_dw(f, stokes_hz, wb) + p[4] * lorentzian_dw(f, antistokes_hz, wb))
            }
            _ => 0.0,
        }
    }

    /// Clamps `p` to the admissible region.
    pub fn project(&self, p: &mut [f64], width_scale: f64) {
        match self {
            SpectralModel::SinglePair { .. } | SpectralModel::Quadrature { .. } => {
                p[0] = p[0].abs().max(MIN_WIDTH * width_scale);
            }
            SpectralModel::DoublePair { .. } => {
                p[0] = p[0].clamp(0.0, S_MAX);
                p[1] = p[1].max(0.0);
                p[2] = p[2].max(0.0);
                p[3] = p[3].max(0.0);
                p[4] = p[4].max(-NEGATIVE_AREA_LIMIT * p[3]);
            }
        }
    }

    pub fn with_gamma_eff(&self, g: f64) -> Self {
        match *self {
            SpectralModel::DoublePair {
                stokes_hz, antistokes_hz, ..
            } => SpectralModel::DoublePair {
                stokes_hz,
                antistokes_hz,
                gamma_eff_hz: g,
            },
            m => m,
        }
    }
}

/// Weighted residuals `(data - model) / sigma` over selected bins.
#[derive(Debug, Clone)]
pub struct SpectrumProblem {
    pub model: SpectralModel,
    pub freqs: Vec<f64>,
    pub data: Vec<f64>,
    pub sigma: Vec<f64>,
    pub width_scale: f64,
}

impl LeastSquaresProblem for SpectrumProblem {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn n_residuals(&self) -> usize {
        self.freqs.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for i in 0..self.freqs.len() {
            out[i] = (self.data[i] - self.model.eval(p, self.freqs[i])) / self.sigma[i];
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) {
        let mut g = vec![0.0; self.model.n_params()];
        for i in 0..self.freqs.len() {
            self.model.grad(p, self.freqs[i], &mut g);
            for (k, gk) in g.iter().enumerate() {
                out[(i, k)] = -gk / self.sigma[i];
            }
        }
    }

    fn project(&self, p: &mut [f64]) {
        self.model.project(p, self.width_scale);
    }

    fn param_name(&self, i: usize) -> String {
        self.model.param_names()[i].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::lm::numeric_jacobian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lorentzian_has_unit_area_and_half_width() {
        let w = 3.0;
        let area: f64 = (-200_000..200_000).map(|k| lorentzian(k as f64 * 1e-3, 0.0, w) * 1e-3).sum();
        let inside = 2.0 / PI * (2.0 * 200.0 / w).atan();
        assert!((area - inside).abs() < 1e-6, "{area} {inside}");
        let peak = lorentzian(0.0, 0.0, w);
        assert!((lorentzian(w / 2.0, 0.0, w) / peak - 0.5).abs() < 1e-12);
    }

    fn problem(model: SpectralModel) -> SpectrumProblem {
        let freqs: Vec<f64> = (0..400).map(|k| 10_800.0 + k as f64 * 1.1).collect();
        let n = freqs.len();
        SpectrumProblem {
            model,
            data: vec![1.0; n],
            sigma: (0..n).map(|k| 0.5 + (k % 7) as f64 * 0.1).collect(),
            freqs,
            width_scale: 100.0,
        }
    }

    #[test]
    fn jacobians_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let models = [
            SpectralModel::SinglePair { stokes_hz: 11_000.0, antistokes_hz: 11_200.0 },
            SpectralModel::DoublePair { stokes_hz: 11_000.0, antistokes_hz: 11_200.0, gamma_eff_hz: 40.0 },
            SpectralModel::Quadrature { lo_hz: 11_000.0 },
        ];
        for model in models {
            let prob = problem(model);
            for _ in 0..20 {
                let p: Vec<f64> = match model {
                    SpectralModel::SinglePair { .. } => vec![
                        rng.gen_range(5.0..80.0),
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.0..0.1),
                    ],
                    SpectralModel::DoublePair { .. } => vec![
                        rng.gen_range(0.05..0.9),
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.1..3.0),
                        rng.gen_range(0.0..3.0),
                        rng.gen_range(0.0..0.1),
                    ],
                    SpectralModel::Quadrature { .. } => {
                        vec![rng.gen_range(5.0..80.0), rng.gen_range(0.1..3.0), rng.gen_range(0.0..0.1)]
                    }
                };
                let mut j = DMatrix::zeros(prob.n_residuals(), prob.n_params());
                prob.jacobian(&p, &mut j);
                let n = numeric_jacobian(&prob, &p, 1e-6);
                let scale = j.amax().max(1e-12);
                assert!((&j - &n).amax() / scale < 1e-6, "{} at {p:?}", model.name());
            }
        }
    }

    #[test]
    fn gamma_eff_derivative_matches_difference() {
        let m = SpectralModel::DoublePair { stokes_hz: 0.0, antistokes_hz: 300.0, gamma_eff_hz: 40.0 };
        let p = [0.4, 1.0, 2.0, 0.7, 0.3, 0.0];
        for f in [-30.0, 0.0, 12.0, 290.0] {
            let h = 1e-5;
            let num = (m.with_gamma_eff(40.0 + h).eval(&p, f) - m.with_gamma_eff(40.0 - h).eval(&p, f)) / (2.0 * h);
            assert!((num - m.d_gamma_eff(&p, f)).abs() < 1e-8 * (1.0 + num.abs()));
        }
    }

    #[test]
    fn projection_bounds() {
        let m = SpectralModel::DoublePair { stokes_hz: 0.0, antistokes_hz: 1.0, gamma_eff_hz: 1.0 };
        let mut p = [1.5, -1.0, 2.0, 1.0, -0.5, 0.0];
        m.project(&mut p, 1.0);
        assert_eq!(p[0], S_MAX);
        assert_eq!(p[1], 0.0);
        assert_eq!(p[4], -0.2);
    }
}
