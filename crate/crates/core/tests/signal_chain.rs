use optosqueeze::detect::*;
use optosqueeze::pipeline::artifacts::sideband_overlay;
use optosqueeze::pipeline::{run_point, Paths, RunConfig};
use optosqueeze::record::{DriveTag, Schedule};
use optosqueeze::spectral::*;
use optosqueeze::synth::{simulate_scheduled_quadratures, SimGrid};
use std::f64::consts::PI;

fn desk(duration: f64) -> RunConfig {
    RunConfig {
        duration,
        repetitions: 1,
        ..RunConfig::default()
    }
}

fn sideband_freqs(cfg: &RunConfig) -> (f64, f64) {
    ((cfg.carrier + cfg.delta_lo) / (2.0 * PI), (cfg.carrier - cfg.delta_lo) / (2.0 * PI))
}

fn component_record(cfg: &RunConfig, seed: u64) -> Vec<f64> {
    let rates = cfg.validate().unwrap();
    let sched = Schedule::constant(cfg.duration, DriveTag::Resonant);
    synthesize_component_record(&rates, &sched, &cfg.grid(seed), &cfg.frame(), &cfg.detection())
        .unwrap()
        .samples
}

#[test]
fn component_spectrum_matches_analytic_lines() {
    let cfg = desk(20.0);
    let rates = cfg.validate().unwrap();
    let (f_s, f_as) = sideband_freqs(&cfg);
    let x = component_record(&cfg, 9_001);
    // non-overlapping segments keep the averages independent
    let psd = welch_psd(&x, cfg.sample_rate, 100_000, 0.0, Window::Hann).unwrap();
    let model = sideband_overlay(&rates, f_s, f_as, cfg.gain, cfg.shot_psd, &psd.freqs);
    let k = psd.n_averages as f64;
    let (mut chi2, mut n) = (0.0, 0usize);
    for (i, f) in psd.freqs.iter().enumerate() {
        if (f - f_s).abs() < 250.0 || (f - f_as).abs() < 250.0 {
            chi2 += k * (psd.density[i] / model[i] - 1.0).powi(2);
            n += 1;
        }
    }
    let red = chi2 / n as f64;
    assert!((0.7..=1.3).contains(&red), "reduced chi2 {red} over {n} bins");
}

#[test]
fn window_choice_preserves_line_area() {
    let cfg = desk(20.0);
    let (f_s, _) = sideband_freqs(&cfg);
    let x = component_record(&cfg, 9_002);
    let area = |w: Window| {
        let psd = welch_psd(&x, cfg.sample_rate, 100_000, 0.5, w).unwrap();
        psd.band_power(f_s - 500.0, f_s + 500.0) - cfg.shot_psd * 1000.0
    };
    let (h, b) = (area(Window::Hann), area(Window::Blackman));
    assert!((h / b - 1.0).abs() < 0.02, "hann {h} blackman {b}");
}

#[test]
fn rotating_frame_and_reference_together_is_invisible() {
    let mut cfg = desk(2.0);
    cfg.schedule_period = 1.0;
    cfg.shot_psd = 0.0;
    let rates = cfg.validate().unwrap();
    let sched = Schedule::constant(cfg.duration, DriveTag::Resonant);
    let grid = cfg.grid(77);
    let edge = passband_edge(&cfg.frame(), &rates);
    let channels = |delta: f64| {
        let frame = optosqueeze::record::Frame {
            oscillator_phase: delta,
            ..cfg.frame()
        };
        let d = DetectionParams {
            demod_phase: 0.3 + delta,
            ..cfg.detection()
        };
        let rec = synthesize_wigner_record(&rates, &sched, &grid, &frame, &d).unwrap();
        lockin_demodulate(&rec, &d, edge).unwrap()
    };
    // sample-wise the broadband tails of the quadratures leak through the
    // image band, so compare the spectra around the beat instead
    let lo_hz = cfg.delta_lo / (2.0 * PI);
    let line = |ch: &[f64], fs: f64| {
        let psd = welch_psd(ch, fs, 16_384, 0.5, Window::Hann).unwrap();
        psd.band_power(lo_hz - 500.0, lo_hz + 500.0)
    };
    let a = channels(0.0);
    let (ax, ay) = (line(&a.ch_x, a.sample_rate), line(&a.ch_y, a.sample_rate));
    for delta in [0.4, 1.3, -2.0] {
        let b = channels(delta);
        let (bx, by) = (line(&b.ch_x, b.sample_rate), line(&b.ch_y, b.sample_rate));
        assert!((bx / ax - 1.0).abs() < 1e-3, "delta {delta}: x {ax} vs {bx}");
        assert!((by / ay - 1.0).abs() < 1e-3, "delta {delta}: y {ay} vs {by}");
    }
}

fn tag_variances(schedule: &Schedule, seed: u64) -> [(f64, f64); 2] {
    let cfg = RunConfig::default();
    let rates = cfg.validate().unwrap();
    let grid = SimGrid {
        sample_rate: 5_000.0,
        duration: schedule.duration(),
        carrier: cfg.carrier,
        seed,
    };
    let traj = simulate_scheduled_quadratures(&rates, schedule, &grid).unwrap();
    let var = |tag: DriveTag| {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for r in schedule.usable_ranges(tag, grid.sample_rate, traj.x.len(), 0) {
            for k in r {
                sx += traj.x[k] * traj.x[k];
                sy += traj.y[k] * traj.y[k];
                n += 1;
            }
        }
        (sx / n as f64, sy / n as f64)
    };
    [var(DriveTag::Detuned), var(DriveTag::Resonant)]
}

#[test]
fn tagged_segments_carry_their_own_statistics() {
    let cfg = RunConfig::default();
    let rates = cfg.validate().unwrap();
    let v = rates.variances().unwrap();
    let v0 = (2.0 * rates.n_bar + 1.0) / 4.0;
    let forward = schedule_drive(80.0, 4.0, rates.gamma_minus).unwrap();
    let mut swapped = forward.clone();
    for s in &mut swapped.segments {
        s.tag = match s.tag {
            DriveTag::Detuned => DriveTag::Resonant,
            DriveTag::Resonant => DriveTag::Detuned,
        };
    }
    for (sched, seed) in [(&forward, 31), (&swapped, 32)] {
        let [det, res] = tag_variances(sched, seed);
        let close = |got: f64, want: f64| (got / want - 1.0).abs() < 0.12;
        assert!(close(det.0, v0) && close(det.1, v0), "detuned {det:?} vs {v0}");
        assert!(close(res.0, v.x) && close(res.1, v.y), "resonant {res:?} vs {v:?}");
    }
}

#[test]
fn every_record_class_conserves_power() {
    // the contract holds from 64 averages on
    let cfg = desk(60.0);
    let eps = cfg.operating_epsilon().unwrap();
    let p = run_point(&cfg, 0, eps, cfg.s_target, Paths::ALL, None);
    assert!(p.errors.is_empty(), "{:?}", p.errors);
    let r = &p.repetitions[0];
    let mut seen = 0;
    let sidebands = [&r.sideband, &r.heterodyne].into_iter().flatten();
    let quads = r.quadrature.iter();
    let averages: Vec<usize> = sidebands
        .clone()
        .flat_map(|s| [&s.psd_detuned, &s.psd_resonant])
        .chain(quads.clone().flat_map(|q| q.psds.iter()))
        .map(|p| p.n_averages)
        .collect();
    assert!(averages.iter().all(|&k| k >= 64), "{averages:?}");
    let classes = sidebands
        .flat_map(|s| s.parseval.iter())
        .chain(quads.flat_map(|q| q.parseval.iter()));
    for (name, ratio) in classes {
        assert!((ratio - 1.0).abs() <= 0.01, "{name}: {ratio}");
        seen += 1;
    }
    assert!(seen >= 6, "only {seen} record classes checked");
}
