//! Force-history diagnostics: drag/lift coefficients, Strouhal number,
//! steady-state statistics.

use crate::error::{Error, Result};
use crate::navier_stokes::FluidConfig;

/// One force sample: nondimensional time, physical net force (N/m per unit
/// span) and the force coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceRow {
    pub t: f64,
    pub fx: f64,
    pub fy: f64,
    pub cd: f64,
    pub cl: f64,
}

/// Time history of the net body force, strictly increasing in `t`.
#[derive(Debug, Clone, Default)]
pub struct ForceHistory {
    rows: Vec<ForceRow>,
}

impl ForceHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ForceRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.t > last.t, "force history times must increase");
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[ForceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows after discarding the starting transient (the first half).
    pub fn settled(&self) -> &[ForceRow] {
        &self.rows[self.rows.len() / 2..]
    }

    pub fn mean_cd(&self) -> f64 {
        let s = self.settled();
        s.iter().map(|r| r.cd).sum::<f64>() / s.len().max(1) as f64
    }

    pub fn lift_amplitude(&self) -> f64 {
        let s = self.settled();
        let max = s.iter().map(|r| r.cl).fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().map(|r| r.cl).fold(f64::INFINITY, f64::min);
        0.5 * (max - min)
    }

    pub fn drag_amplitude(&self) -> f64 {
        let s = self.settled();
        let max = s.iter().map(|r| r.cd).fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().map(|r| r.cd).fold(f64::INFINITY, f64::min);
        0.5 * (max - min)
    }
}

/// Force coefficients `C = F / (rho u_ref^2 l_ref / 2)` for a physical net
/// force in N/m.
pub fn drag_lift_coefficients(force: (f64, f64), cfg: &FluidConfig) -> Result<(f64, f64)> {
    let denom = 0.5 * cfg.rho * cfg.u_ref * cfg.u_ref * cfg.l_ref;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::ZeroReferenceVelocity);
    }
    Ok((force.0 / denom, force.1 / denom))
}

/// Strouhal number from the mean peak-to-peak period of the lift
/// oscillation, `St = f_shed l_ref / u_ref`. The first half of the history is
/// discarded as transient; the remainder must hold at least five periods.
pub fn strouhal_number(history: &ForceHistory, cfg: &FluidConfig) -> Result<f64> {
    let rows = history.settled();
    if rows.len() < 8 {
        return Err(Error::NoOscillationDetected(format!(
            "only {} settled samples",
            rows.len()
        )));
    }
    let mean = rows.iter().map(|r| r.cl).sum::<f64>() / rows.len() as f64;
    let amplitude = rows
        .iter()
        .map(|r| (r.cl - mean).abs())
        .fold(0.0f64, f64::max);
    if amplitude < 1e-4 {
        return Err(Error::NoOscillationDetected(format!(
            "lift amplitude {amplitude:.2e} below 1e-4"
        )));
    }

    // upward mean-crossing times, linearly interpolated
    let mut crossings = Vec::new();
    for w in rows.windows(2) {
        let (a, b) = (w[0].cl - mean, w[1].cl - mean);
        if a <= 0.0 && b > 0.0 {
            let frac = -a / (b - a);
            crossings.push(w[0].t + frac * (w[1].t - w[0].t));
        }
    }
    if crossings.len() < 6 {
        return Err(Error::NoOscillationDetected(format!(
            "only {} shedding periods in the settled window (need 5)",
            crossings.len().saturating_sub(1)
        )));
    }
    let periods: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    let mean_period = periods.iter().sum::<f64>() / periods.len() as f64;
    // nondimensional time already carries l_ref/u_ref
    let _ = cfg;
    Ok(1.0 / mean_period)
}

/// Frequency of the strongest non-constant spectral component of a uniformly
/// sampled signal, refined by parabolic interpolation around the peak bin.
pub fn dominant_frequency(times: &[f64], values: &[f64]) -> Option<f64> {
    use rustfft::num_complex::Complex;
    let n = values.len();
    if n < 8 || times.len() != n {
        return None;
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .collect();
    rustfft::FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let mags: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    let (peak, peak_mag) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    if *peak_mag == 0.0 {
        return None;
    }
    // parabolic refinement of the peak location
    let refined = if peak > 1 && peak + 1 < half {
        let (a, b, c) = (mags[peak - 1], mags[peak], mags[peak + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-30 {
            peak as f64 + 0.5 * (a - c) / denom
        } else {
            peak as f64
        }
    } else {
        peak as f64
    };
    Some(refined / (n as f64 * dt))
}

/// RMS difference between consecutive cycles of a periodic signal, relative
/// to the overall oscillation amplitude. `period` is in the time units of
/// `times`. Compares the last two full cycles.
pub fn cycle_to_cycle_rms(times: &[f64], values: &[f64], period: f64) -> Option<f64> {
    let n = values.len();
    if n < 4 {
        return None;
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    let per_cycle = (period / dt).round() as usize;
    if per_cycle < 2 || n < 2 * per_cycle {
        return None;
    }
    let last = &values[n - per_cycle..];
    let prev = &values[n - 2 * per_cycle..n - per_cycle];
    let rms = (last
        .iter()
        .zip(prev)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / per_cycle as f64)
        .sqrt();
    let max = values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let min = values.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let amplitude = 0.5 * (max - min);
    (amplitude > 0.0).then(|| rms / amplitude)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FluidConfig {
        FluidConfig::nondimensional(100.0, 0.05)
    }

    #[test]
    fn dominant_frequency_of_a_pure_tone() {
        let f0 = 3.0;
        let dt = 1.0 / 240.0;
        let times: Vec<f64> = (0..720).map(|k| k as f64 * dt).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| 5.0 + 2.0 * (std::f64::consts::TAU * f0 * t).sin())
            .collect();
        let f = dominant_frequency(&times, &values).unwrap();
        assert!((f - f0).abs() < 0.02 * f0, "measured {f}");
    }

    #[test]
    fn dominant_frequency_picks_the_stronger_component() {
        let dt = 1.0 / 200.0;
        let times: Vec<f64> = (0..1000).map(|k| k as f64 * dt).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| {
                (std::f64::consts::TAU * 3.0 * t).sin()
                    + 0.4 * (std::f64::consts::TAU * 6.0 * t).sin()
            })
            .collect();
        let f = dominant_frequency(&times, &values).unwrap();
        assert!((f - 3.0).abs() < 0.1, "measured {f}");
    }

    #[test]
    fn periodic_signals_have_tiny_cycle_differences() {
        let dt = 0.005;
        let times: Vec<f64> = (0..600).map(|k| k as f64 * dt).collect();
        let periodic: Vec<f64> = times
            .iter()
            .map(|t| (std::f64::consts::TAU * t / 0.5).sin())
            .collect();
        let rms = cycle_to_cycle_rms(&times, &periodic, 0.5).unwrap();
        assert!(rms < 1e-10, "rms {rms}");
        let drifting: Vec<f64> = times
            .iter()
            .map(|t| (std::f64::consts::TAU * t / 0.5).sin() + 0.8 * t)
            .collect();
        let rms = cycle_to_cycle_rms(&times, &drifting, 0.5).unwrap();
        assert!(rms > 0.5, "drift must show up: {rms}");
    }

    #[test]
    fn coefficients_follow_the_definition() {
        let c = cfg();
        assert_eq!(drag_lift_coefficients((0.0, 0.0), &c).unwrap(), (0.0, 0.0));
        let denom = 0.5 * c.rho * c.u_ref * c.u_ref * c.l_ref;
        let (cd, cl) = drag_lift_coefficients((denom, -2.0 * denom), &c).unwrap();
        assert!((cd - 1.0).abs() < 1e-14);
        assert!((cl + 2.0).abs() < 1e-14);
    }

    #[test]
    fn synthetic_lift_signal_recovers_strouhal() {
        let c = cfg();
        let st_true = 0.167;
        let mut h = ForceHistory::new();
        let dt = 0.02;
        for k in 0..12000 {
            let t = k as f64 * dt;
            h.push(ForceRow {
                t,
                fx: 1.0,
                fy: 0.0,
                cd: 1.5,
                cl: (std::f64::consts::TAU * st_true * t).sin() * 0.3,
            });
        }
        let st = strouhal_number(&h, &c).unwrap();
        assert!((st - st_true).abs() < 1e-3, "St = {st}");
    }

    #[test]
    fn steady_history_reports_no_oscillation() {
        let c = cfg();
        let mut h = ForceHistory::new();
        for k in 0..1000 {
            h.push(ForceRow {
                t: k as f64 * 0.05,
                fx: 0.9,
                fy: 1e-9,
                cd: 1.76,
                cl: 1e-9,
            });
        }
        match strouhal_number(&h, &c) {
            Err(Error::NoOscillationDetected(_)) => {}
            other => panic!("expected NoOscillationDetected, got {other:?}"),
        }
    }

    #[test]
    fn zero_reference_velocity_is_rejected() {
        let mut c = cfg();
        c.u_ref = 0.0;
        match drag_lift_coefficients((1.0, 0.0), &c) {
            Err(Error::ZeroReferenceVelocity) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
