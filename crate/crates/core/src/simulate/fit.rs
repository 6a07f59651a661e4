//! Least-squares decay fits of an energy trace.

use serde::Serialize;

use super::{EnergyTrace, SimulateError};

/// Minimum number of usable samples in a fit window.
pub const MIN_FIT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayModel {
    /// `E ≈ E₀ exp(-2 ω t)`
    Exponential,
    /// `E ≈ C t^(-p)`
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub model: DecayModel,
    pub window: [f64; 2],
    /// `ω` for the exponential model, `p` for the power model
    pub rate: f64,
    /// log of the prefactor
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
    /// root-mean-square residual in `log E`
    pub rms_residual: f64,
}

/// Fits `log E = c - 2 ω t` over `window`.
pub fn fit_exponential(trace: &EnergyTrace, window: [f64; 2]) -> Result<DecayFit, SimulateError> {
    let (xs, ys) = window_points(trace, window, |t| t)?;
    let (slope, intercept, r2, rms) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        model: DecayModel::Exponential,
        window,
        rate: -slope / 2.0,
        intercept,
        r2,
        samples: xs.len(),
        rms_residual: rms,
    })
}

/// Fits `log E = c - p log t` over `window`.
pub fn fit_power(trace: &EnergyTrace, window: [f64; 2]) -> Result<DecayFit, SimulateError> {
    let (xs, ys) = window_points(trace, window, f64::ln)?;
    let (slope, intercept, r2, rms) = linear_fit(&xs, &ys);
    Ok(DecayFit {
        model: DecayModel::Power,
        window,
        rate: -slope,
        intercept,
        r2,
        samples: xs.len(),
        rms_residual: rms,
    })
}

fn window_points(
    trace: &EnergyTrace,
    window: [f64; 2],
    x_of: impl Fn(f64) -> f64,
) -> Result<(Vec<f64>, Vec<f64>), SimulateError> {
    let [t0, t1] = window;
    let last = trace.samples.last().map_or(0.0, |s| s.t);
    if !(t0 > 0.0 && t1 > t0) || t1 > last * (1.0 + 1e-12) {
        return Err(SimulateError::InvalidWindow { t0, t1, last });
    }
    let e0 = trace.initial_energy();
    let floor = 1e2 * f64::EPSILON * e0;
    let in_window: Vec<_> = trace
        .samples
        .iter()
        .filter(|s| s.t >= t0 * (1.0 - 1e-12) && s.t <= t1 * (1.0 + 1e-12))
        .collect();
    if in_window.len() < MIN_FIT_SAMPLES {
        return Err(SimulateError::WindowTooShort {
            found: in_window.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    let usable: Vec<_> = in_window.iter().filter(|s| s.energy > floor).collect();
    if usable.len() < MIN_FIT_SAMPLES {
        return Err(SimulateError::EnergyUnderflow {
            usable: usable.len(),
            required: MIN_FIT_SAMPLES,
        });
    }
    Ok((
        usable.iter().map(|s| x_of(s.t)).collect(),
        usable.iter().map(|s| s.energy.ln()).collect(),
    ))
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, r², rms)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    (slope, intercept, r2, (ss_res / n).sqrt())
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    linear_fit(xs, ys).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{EnergySample, EnergyTrace};

    fn synthetic(f: impl Fn(f64) -> f64, dt: f64, steps: usize) -> EnergyTrace {
        let samples = (0..=steps)
            .map(|i| {
                let t = i as f64 * dt;
                EnergySample {
                    t,
                    energy: f(t),
                    dissipation: 0.0,
                    mid_dissipation: 0.0,
                    residual: 0.0,
                }
            })
            .collect();
        EnergyTrace {
            dt,
            sample_every: 1,
            scheme: "synthetic".into(),
            samples,
        }
    }

    #[test]
    fn exact_exponential() {
        let tr = synthetic(|t| (-3.0 * t).exp(), 0.01, 500);
        let fit = fit_exponential(&tr, [0.5, 4.0]).unwrap();
        assert!((fit.rate - 1.5).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_power() {
        let tr = synthetic(|t| if t > 0.0 { t.powi(-4) } else { 1.0 }, 0.5, 400);
        let fit = fit_power(&tr, [20.0, 200.0]).unwrap();
        assert!((fit.rate - 4.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_errors() {
        let tr = synthetic(|t| (-t).exp(), 0.1, 100);
        assert!(matches!(
            fit_exponential(&tr, [0.0, 5.0]),
            Err(SimulateError::InvalidWindow { .. })
        ));
        assert!(matches!(
            fit_exponential(&tr, [1.0, 2.0]),
            Err(SimulateError::WindowTooShort { found: 11, .. })
        ));
        assert!(matches!(
            fit_exponential(&tr, [1.0, 20.0]),
            Err(SimulateError::InvalidWindow { .. })
        ));
        let tr = synthetic(|t| (-20.0 * t).exp(), 0.1, 100);
        assert!(matches!(
            fit_exponential(&tr, [1.0, 10.0]),
            Err(SimulateError::EnergyUnderflow { .. })
        ));
    }

    #[test]
    fn r2_in_unit_interval() {
        let tr = synthetic(|t| 2.0 + (7.0 * t).sin(), 0.01, 1000);
        let fit = fit_exponential(&tr, [0.1, 10.0]).unwrap();
        assert!((0.0..=1.0).contains(&fit.r2));
    }
}
