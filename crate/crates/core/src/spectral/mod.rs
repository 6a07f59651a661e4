//! Spectrum of the discrete generator and resolvent norms on the imaginary
//! axis.
//!
//! All norms are the energy norm `‖(u, v)‖² = uᵀKu + vᵀMv`.

mod resolvent;

pub use resolvent::{
    default_band, resolved_band_limit, resolvent_norm, resolvent_scan, Peak, ResolventEvaluator,
    ResolventMethod, ResolventScan, SlopeMethod, DEFAULT_SCAN_POINTS, RESOLVED_BAND_FACTOR,
    RESOLVENT_DENSE_THRESHOLD,
};

use std::cmp::Ordering;
use std::fmt::Write as _;

use faer::c64;
use serde::Serialize;
use thiserror::Error;

use crate::discretize::{weighted_generator, DiscreteSystem, DiscretizeError};
use crate::network::Tolerances;
use crate::sparse::SymMatrix;

/// Largest DOF count handled by dense linear algebra.
pub const DENSE_THRESHOLD: usize = 4000;
/// Eigenpairs must have relative residual at most this.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// `max Re λ` must be below `-STABILITY_MARGIN` to count as asymptotically stable.
pub const STABILITY_MARGIN: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("{n} DOFs exceed the dense threshold of {threshold}")]
    DenseThresholdExceeded { n: usize, threshold: usize },
    #[error("eigensolver did not converge")]
    EigensolverFailure,
    #[error("iβ with β = {0} is (numerically) an eigenvalue")]
    SingularShift(f64),
    #[error("band [{beta_min}, {beta_max}] spans less than one decade")]
    BandTooNarrow { beta_min: f64, beta_max: f64 },
    #[error("beta_max = {beta_max} exceeds the resolved band limit {limit}")]
    BeyondResolvedBand { beta_max: f64, limit: f64 },
    #[error("invalid scan request: {0}")]
    InvalidScan(String),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

/// One eigenvalue of the quadratic pencil with its relative residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    /// `‖(λ²M + λK_a + K)x‖ / ((|λ|²‖M‖ + |λ|‖K_a‖ + ‖K‖) ‖x‖)`
    pub residual: f64,
}

impl Eigenvalue {
    pub fn lambda(&self) -> c64 {
        c64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumResult {
    pub n: usize,
    /// sorted by `|Im λ|`, then `Im λ`, then `Re λ`
    pub eigenvalues: Vec<Eigenvalue>,
    pub method: String,
}

impl SpectrumResult {
    pub fn max_re(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    /// `-max Re λ`.
    pub fn spectral_gap(&self) -> f64 {
        -self.max_re()
    }

    pub fn is_certified(&self) -> bool {
        self.max_residual() <= RESIDUAL_TOL
    }

    /// Every eigenvalue has its conjugate in the list (within `tol` relative).
    pub fn is_conjugate_symmetric(&self, tol: f64) -> bool {
        self.eigenvalues.iter().all(|e| {
            let scale = e.lambda().norm().max(1.0);
            self.eigenvalues
                .iter()
                .any(|f| (f.re - e.re).abs() <= tol * scale && (f.im + e.im).abs() <= tol * scale)
        })
    }

    /// Eigenvalues with `Im λ > 0`, ordered by `Im λ`.
    pub fn upper_half(&self) -> Vec<Eigenvalue> {
        let mut out: Vec<_> = self.eigenvalues.iter().copied().filter(|e| e.im > 0.0).collect();
        out.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        out
    }

    /// CSV with header `re,im,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im,residual\n");
        for e in &self.eigenvalues {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", e.re, e.im, e.residual).expect("writing to a string");
        }
        out
    }
}

fn inf_norm(m: &SymMatrix) -> f64 {
    (0..m.n())
        .map(|i| m.row(i).map(|(_, v)| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `y = A x` for a real symmetric `A` and complex `x`.
fn mul_complex(a: &SymMatrix, x: &[c64]) -> Vec<c64> {
    (0..a.n())
        .map(|i| a.row(i).fold(c64::new(0.0, 0.0), |acc, (j, v)| acc + x[j] * v))
        .collect()
}

/// All `2n` eigenvalues of `λ²M + λK_a + K` with residual certificates.
///
/// The pencil is linearized as the generator in energy-weighted coordinates
/// (a similarity transform of the companion form); eigenvectors are mapped
/// back to displacements to evaluate the residuals.
pub fn eigenvalues(sys: &DiscreteSystem) -> Result<SpectrumResult, SpectralError> {
    let n = sys.n();
    if n > DENSE_THRESHOLD {
        return Err(SpectralError::DenseThresholdExceeded {
            n,
            threshold: DENSE_THRESHOLD,
        });
    }
    let wg = weighted_generator(sys)?;
    let eig = wg.b.eigen().map_err(|_| SpectralError::EigensolverFailure)?;
    let s = eig.S();
    let vecs = eig.U();
    let y1 = faer::Mat::from_fn(n, 2 * n, |i, j| vecs[(i, j)]);
    let u = wg.displacement(y1);
    let (nm, nk, na) = (inf_norm(&sys.m), inf_norm(&sys.k), inf_norm(&sys.ka));
    let mut out: Vec<Eigenvalue> = (0..2 * n)
        .map(|j| {
            let lam = s[j];
            let x: Vec<c64> = (0..n).map(|i| u[(i, j)]).collect();
            let mx = mul_complex(&sys.m, &x);
            let kx = mul_complex(&sys.k, &x);
            let ax = mul_complex(&sys.ka, &x);
            let lam2 = lam * lam;
            let r: f64 = (0..n)
                .map(|i| (lam2 * mx[i] + lam * ax[i] + kx[i]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let xn: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let l = lam.norm();
            let denom = (l * l * nm + l * na + nk) * xn;
            Eigenvalue {
                re: lam.re,
                im: lam.im,
                residual: if denom > 0.0 { r / denom } else { r },
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.im.abs()
            .total_cmp(&b.im.abs())
            .then(a.im.total_cmp(&b.im))
            .then(a.re.total_cmp(&b.re))
    });
    Ok(SpectrumResult {
        n,
        eigenvalues: out,
        method: format!("dense eigensolver on the energy-weighted {0}x{0} generator", 2 * n),
    })
}

/// Slope thresholds used by [`classify_stability`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    /// largest slope still consistent with a bounded resolvent
    pub exponential_max_slope: f64,
    /// slope band consistent with `‖R(iβ)‖ ~ β^α`
    pub polynomial_slope: [f64; 2],
}

impl Default for Thresholds {
    fn default() -> Self {
        Tolerances::default().into()
    }
}

impl From<Tolerances> for Thresholds {
    fn from(t: Tolerances) -> Self {
        Self {
            exponential_max_slope: t.exponential_max_slope,
            polynomial_slope: t.polynomial_slope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Classification {
    ExponentialConsistent,
    PolynomialConsistent { alpha: f64 },
    Inconclusive,
    /// some eigenvalue is on (or right of) the imaginary axis; no regime claim
    NotAsymptoticallyStable,
}

/// Whether the scan peaks sit at weakly damped eigenvalues.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakCheck {
    pub peaks: usize,
    pub matched: usize,
    /// largest `|Im λ - β_peak| / β_peak` over the peaks
    pub max_relative_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub asymptotically_stable: bool,
    pub max_re: f64,
    pub spectral_gap: f64,
    pub slope: f64,
    pub slope_method: SlopeMethod,
    pub classification: Classification,
    pub peak_check: PeakCheck,
}

/// Stability regime from a spectrum and a resolvent scan of the same system.
///
/// A slope at most `exponential_max_slope` (bounded or decaying resolvent) is
/// exponential-consistent; a slope inside `polynomial_slope` is
/// polynomial-consistent with `α = s`; anything else is inconclusive.
pub fn classify_stability(
    spectrum: &SpectrumResult,
    scan: &ResolventScan,
    thresholds: &Thresholds,
) -> StabilityVerdict {
    let max_re = spectrum.max_re();
    let asymptotically_stable = max_re < -STABILITY_MARGIN;
    let s = scan.slope;
    let [lo, hi] = thresholds.polynomial_slope;
    let classification = if !asymptotically_stable {
        Classification::NotAsymptoticallyStable
    } else if s <= thresholds.exponential_max_slope {
        Classification::ExponentialConsistent
    } else if (lo..=hi).contains(&s) {
        Classification::PolynomialConsistent { alpha: s }
    } else {
        Classification::Inconclusive
    };
    StabilityVerdict {
        asymptotically_stable,
        max_re,
        spectral_gap: -max_re,
        slope: s,
        slope_method: scan.slope_method,
        classification,
        peak_check: check_peaks(spectrum, &scan.peaks),
    }
}

fn check_peaks(spectrum: &SpectrumResult, peaks: &[Peak]) -> PeakCheck {
    let upper = spectrum.upper_half();
    let mut matched = 0;
    let mut max_relative_offset: f64 = 0.0;
    for p in peaks {
        let nearest = upper.iter().min_by(|a, b| {
            (a.im - p.beta)
                .abs()
                .partial_cmp(&(b.im - p.beta).abs())
                .unwrap_or(Ordering::Equal)
        });
        if let Some(e) = nearest {
            let offset = (e.im - p.beta).abs();
            max_relative_offset = max_relative_offset.max(offset / p.beta);
            if offset <= 2.0 * e.re.abs() + 0.01 * p.beta {
                matched += 1;
            }
        }
    }
    PeakCheck {
        peaks: peaks.len(),
        matched,
        max_relative_offset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::discretize::{assemble, build_mesh_for, Resolution};
    use crate::Network;
    use std::f64::consts::PI;

    fn system(net: &Network, cells: usize) -> DiscreteSystem {
        let mesh = build_mesh_for(&net.graph, &Resolution::CellsPerEdge(cells), &net.damping).unwrap();
        assemble(&mesh, &net.damping).unwrap()
    }

    #[test]
    fn undamped_string_frequencies() {
        let spec = eigenvalues(&system(&canonical::undamped_string(1.0), 64)).unwrap();
        assert!(spec.is_certified());
        let first = spec.upper_half()[0];
        assert!((first.im - PI).abs() / PI < 1e-3);
        assert!(first.re.abs() < 1e-8);
        assert!(spec.max_re() > -STABILITY_MARGIN);
        assert!(spec.is_conjugate_symmetric(1e-8));
    }

    #[test]
    fn overdamped_modal_oracle() {
        // a = 2, n = 1: λ = -π² ± π √(π² - 1), both real
        let spec = eigenvalues(&system(&canonical::kv_string(2.0), 128)).unwrap();
        assert!(spec.is_certified(), "{}", spec.max_residual());
        let root = PI * (PI * PI - 1.0).sqrt();
        for exact in [-PI * PI + root, -PI * PI - root] {
            let nearest = spec
                .eigenvalues
                .iter()
                .map(|e| ((e.re - exact).powi(2) + e.im.powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest / exact.abs() < 2e-3, "{exact}: {nearest}");
        }
    }

    #[test]
    fn damped_networks_are_stable() {
        for net in canonical::acceptance_networks() {
            let spec = eigenvalues(&system(&net, 8)).unwrap();
            assert!(spec.is_certified());
            assert!(spec.max_re() < -STABILITY_MARGIN, "{}", spec.max_re());
        }
    }

    #[test]
    fn threshold_is_enforced() {
        let net = canonical::undamped_string(1.0);
        let mesh = build_mesh_for(&net.graph, &Resolution::CellsPerEdge(4002), &net.damping).unwrap();
        let sys = assemble(&mesh, &net.damping).unwrap();
        assert!(matches!(
            eigenvalues(&sys),
            Err(SpectralError::DenseThresholdExceeded { n: 4001, .. })
        ));
    }

    fn fake_scan(slope: f64) -> ResolventScan {
        ResolventScan {
            betas: vec![1.0, 10.0],
            norms: vec![1.0, 1.0],
            band: [1.0, 10.0],
            fit_from: 1.0,
            slope,
            raw_slope: slope,
            slope_method: SlopeMethod::Grid,
            peaks: vec![],
            method: ResolventMethod::Dense,
        }
    }

    #[test]
    fn classification_rules() {
        let stable = SpectrumResult {
            n: 1,
            eigenvalues: vec![Eigenvalue { re: -1.0, im: 2.0, residual: 0.0 }],
            method: String::new(),
        };
        let t = Thresholds::default();
        let c = |s| classify_stability(&stable, &fake_scan(s), &t).classification;
        assert_eq!(c(0.05), Classification::ExponentialConsistent);
        assert_eq!(c(-0.9), Classification::ExponentialConsistent);
        assert_eq!(c(0.5), Classification::PolynomialConsistent { alpha: 0.5 });
        assert_eq!(c(0.2), Classification::Inconclusive);
        assert_eq!(c(0.9), Classification::Inconclusive);
        let marginal = SpectrumResult {
            eigenvalues: vec![Eigenvalue { re: -1e-14, im: 2.0, residual: 0.0 }],
            ..stable
        };
        let v = classify_stability(&marginal, &fake_scan(0.0), &t);
        assert!(!v.asymptotically_stable);
        assert_eq!(v.classification, Classification::NotAsymptoticallyStable);
    }
}
