//! Sampled detector records and the drive schedule that tags them.

use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DriveTag {
    /// Modulation tone shifted away from `2 omega_m`: damping only.
    Detuned,
    /// Modulation tone at `2 omega_m`: coherent parametric drive.
    Resonant,
}

impl DriveTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DriveTag::Detuned => "detuned",
            DriveTag::Resonant => "resonant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub tag: DriveTag,
}

/// Segments tiling `[0, duration)` plus the settling guard discarded after
/// the start of every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub segments: Vec<Segment>,
    pub guard: f64,
}

impl Schedule {
    /// A single segment covering the whole record.
    pub fn constant(duration: f64, tag: DriveTag) -> Self {
        Self {
            segments: vec![Segment {
                start: 0.0,
                end: duration,
                tag,
            }],
            guard: 0.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// True when segments are contiguous, non-empty and start at zero.
    pub fn tiles(&self) -> bool {
        let mut t = 0.0;
        for s in &self.segments {
            if s.start != t || !(s.end > s.start) {
                return false;
            }
            t = s.end;
        }
        !self.segments.is_empty()
    }

    pub fn count(&self, tag: DriveTag) -> usize {
        self.segments.iter().filter(|s| s.tag == tag).count()
    }

    /// Segment boundaries as sample indices for a record of `n` samples.
    pub fn sample_segments(&self, sample_rate: f64, n: usize) -> Vec<(Range<usize>, DriveTag)> {
        self.segments
            .iter()
            .map(|s| {
                let a = ((s.start * sample_rate).round() as usize).min(n);
                let b = ((s.end * sample_rate).round() as usize).min(n);
                (a..b, s.tag)
            })
            .collect()
    }

    /// Usable sample ranges for `tag`: the guard is removed after each
    /// segment start and `tail` samples before each segment end.
    pub fn usable_ranges(
        &self,
        tag: DriveTag,
        sample_rate: f64,
        n: usize,
        tail: usize,
    ) -> Vec<Range<usize>> {
        let guard = (self.guard * sample_rate).ceil() as usize;
        self.sample_segments(sample_rate, n)
            .into_iter()
            .filter(|(_, t)| *t == tag)
            .filter_map(|(r, _)| {
                let a = r.start + guard;
                let b = r.end.saturating_sub(tail);
                (b > a).then_some(a..b)
            })
            .collect()
    }
}

/// Phase frame in which a record was composed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Reduced carrier standing in for the mechanical frequency (rad/s).
    pub carrier: f64,
    /// Heterodyne offset (rad/s).
    pub delta_lo: f64,
    /// Phase of the oscillator quadrature frame relative to the lock-in reference.
    pub oscillator_phase: f64,
    /// Phase of the local-oscillator beat.
    pub lo_phase: f64,
}

/// A uniformly sampled real detector record.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub schedule: Schedule,
    pub frame: Frame,
}

impl Record {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn pieces(&self, tag: DriveTag, tail: usize) -> Vec<&[f64]> {
        self.schedule
            .usable_ranges(tag, self.sample_rate, self.samples.len(), tail)
            .into_iter()
            .map(|r| &self.samples[r])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usable_ranges_trim_guard_and_tail() {
        let s = Schedule {
            segments: vec![
                Segment { start: 0.0, end: 1.0, tag: DriveTag::Detuned },
                Segment { start: 1.0, end: 2.0, tag: DriveTag::Resonant },
            ],
            guard: 0.1,
        };
        assert!(s.tiles());
        let r = s.usable_ranges(DriveTag::Resonant, 100.0, 200, 5);
        assert_eq!(r, vec![110..195]);
        assert_eq!(s.usable_ranges(DriveTag::Detuned, 100.0, 200, 0), vec![10..100]);
    }

    #[test]
    fn gaps_do_not_tile() {
        let s = Schedule {
            segments: vec![
                Segment { start: 0.0, end: 1.0, tag: DriveTag::Detuned },
                Segment { start: 1.5, end: 2.0, tag: DriveTag::Resonant },
            ],
            guard: 0.0,
        };
        assert!(!s.tiles());
    }
}
