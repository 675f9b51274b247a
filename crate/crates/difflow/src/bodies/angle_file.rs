//! Joint-angle trajectory files.
//!
//! Plain text, one row per time sample: the time followed by one angle per
//! joint in radians, whitespace-separated. `#` starts a comment. Angles are
//! interpolated linearly in time; rates are the segment slopes.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AngleTrajectory {
    times: Vec<f64>,
    /// `angles[sample][joint]`
    angles: Vec<Vec<f64>>,
}

impl AngleTrajectory {
    pub fn new(times: Vec<f64>, angles: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != angles.len() || times.len() < 2 {
            return Err(Error::InvalidConfig(
                "angle trajectory needs at least two samples".into(),
            ));
        }
        let n_joints = angles[0].len();
        if n_joints == 0 || angles.iter().any(|a| a.len() != n_joints) {
            return Err(Error::InvalidConfig(
                "angle trajectory rows must have a consistent joint count".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(
                "angle trajectory times must be strictly increasing".into(),
            ));
        }
        Ok(Self { times, angles })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut angles = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut values = Vec::new();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| {
                    Error::InvalidConfig(format!(
                        "angle file line {}: '{tok}' is not a number",
                        lineno + 1
                    ))
                })?;
                values.push(v);
            }
            if values.len() < 2 {
                return Err(Error::InvalidConfig(format!(
                    "angle file line {}: need a time and at least one angle",
                    lineno + 1
                )));
            }
            times.push(values[0]);
            angles.push(values[1..].to_vec());
        }
        Self::new(times, angles)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn n_joints(&self) -> usize {
        self.angles[0].len()
    }

    /// Rescale the time axis (e.g. recorded seconds into nondimensional
    /// simulation time).
    pub fn rescale_time(mut self, factor: f64) -> Self {
        assert!(factor > 0.0);
        for t in &mut self.times {
            *t *= factor;
        }
        self
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap() - self.times[0]
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    /// Angles and rates at time `t`; clamped to the recorded range (rates
    /// stay at the boundary segment's slope).
    pub fn sample(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let n = self.times.len();
        let seg = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let (t0, t1) = (self.times[seg], self.times[seg + 1]);
        let lambda = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let a0 = &self.angles[seg];
        let a1 = &self.angles[seg + 1];
        let angles = a0
            .iter()
            .zip(a1)
            .map(|(x0, x1)| x0 + lambda * (x1 - x0))
            .collect();
        let rates = a0.iter().zip(a1).map(|(x0, x1)| (x1 - x0) / (t1 - t0)).collect();
        (angles, rates)
    }

    /// Stand-in for tracked hardware data: a traveling-wave flapping gait
    /// with small per-joint offsets (real tails are never perfectly
    /// symmetric, which is what puts the fundamental flapping frequency into
    /// the thrust spectrum).
    pub fn synthetic_flapping(
        n_joints: usize,
        frequency: f64,
        duration: f64,
        sample_rate: f64,
    ) -> Self {
        let n_samples = (duration * sample_rate).ceil() as usize + 1;
        let times: Vec<f64> = (0..n_samples).map(|k| k as f64 / sample_rate).collect();
        let angles = times
            .iter()
            .map(|t| {
                (0..n_joints)
                    .map(|j| {
                        let frac = j as f64 / (n_joints - 1).max(1) as f64;
                        let amplitude = 0.10 + 0.22 * frac;
                        let phase = -0.6 * j as f64;
                        let bias = 0.12 * frac;
                        bias + amplitude * (std::f64::consts::TAU * frequency * t + phase).sin()
                    })
                    .collect()
            })
            .collect();
        Self::new(times, angles).expect("synthetic gait is well formed")
    }

    /// Render in the file format, for writing generated gaits to disk.
    pub fn to_text(&self, comment: &str) -> String {
        let mut out = String::new();
        if !comment.is_empty() {
            for line in comment.lines() {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
        }
        for (t, row) in self.times.iter().zip(&self.angles) {
            out.push_str(&format!("{t:.9}"));
            for a in row {
                out.push_str(&format!(" {a:.9}"));
            }
            out.push('\n');
        }
        out
    }
}
