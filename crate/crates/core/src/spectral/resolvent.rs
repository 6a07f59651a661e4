//! `‖(iβ - A)⁻¹‖` in the energy norm and scans of it over `β`.

use std::f64::consts::PI;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{c64, Mat, Side};
use rayon::prelude::*;
use serde::Serialize;

use super::SpectralError;
use crate::discretize::{weighted_generator, DiscreteSystem, Mesh};
use crate::simulate::ls_slope;
use crate::sparse::SymMatrix;

/// Resolved band: `β ≤ RESOLVED_BAND_FACTOR · π / h`.
pub const RESOLVED_BAND_FACTOR: f64 = 0.25;
pub const DEFAULT_SCAN_POINTS: usize = 200;
/// Golden-section iterations used to refine each scan peak.
const PEAK_REFINE_ITERS: usize = 24;
const LANCZOS_MAX_ITERS: usize = 120;
const LANCZOS_TOL: f64 = 1e-13;

/// Largest system for which `Auto` evaluates resolvent norms densely. A dense
/// complex SVD per frequency costs `O(n³)`; the iterative route agrees to
/// round-off and is one to two orders of magnitude faster beyond this size.
pub const RESOLVENT_DENSE_THRESHOLD: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ResolventMethod {
    /// dense up to [`RESOLVENT_DENSE_THRESHOLD`] unknowns, iterative above
    Auto,
    /// smallest singular value of the dense weighted shift
    Dense,
    /// Lanczos on `R*R` with sparse complex LU solves
    Iterative,
}

/// Evaluates `β ↦ ‖(iβ - A)⁻¹‖_E` for one system.
pub struct ResolventEvaluator<'a> {
    sys: &'a DiscreteSystem,
    method: ResolventMethod,
    weighted: Option<Mat<f64>>,
}

impl<'a> ResolventEvaluator<'a> {
    pub fn new(sys: &'a DiscreteSystem, method: ResolventMethod) -> Result<Self, SpectralError> {
        let method = match method {
            ResolventMethod::Auto if sys.n() <= RESOLVENT_DENSE_THRESHOLD => ResolventMethod::Dense,
            ResolventMethod::Auto => ResolventMethod::Iterative,
            m => m,
        };
        let weighted = match method {
            ResolventMethod::Dense => Some(weighted_generator(sys)?.b),
            _ => None,
        };
        Ok(Self { sys, method, weighted })
    }

    /// The method actually used (never `Auto`).
    pub fn method(&self) -> ResolventMethod {
        self.method
    }

    pub fn norm(&self, beta: f64) -> Result<f64, SpectralError> {
        let value = match &self.weighted {
            Some(b) => dense_norm(b, beta),
            None => iterative_norm(self.sys, beta)?,
        };
        if value.is_finite() && value > 0.0 {
            Ok(value)
        } else {
            Err(SpectralError::SingularShift(beta))
        }
    }
}

fn dense_norm(b: &Mat<f64>, beta: f64) -> f64 {
    let m = b.nrows();
    let shift = Mat::from_fn(m, m, |i, j| {
        c64::new(-b[(i, j)], if i == j { beta } else { 0.0 })
    });
    let s = shift
        .singular_values()
        .expect("singular values converge");
    1.0 / s[s.len() - 1]
}

/// `‖(iβ - A)⁻¹‖_E` for `sys` with the `Auto` method.
pub fn resolvent_norm(sys: &DiscreteSystem, beta: f64) -> Result<f64, SpectralError> {
    ResolventEvaluator::new(sys, ResolventMethod::Auto)?.norm(beta)
}

/// Complex vectors on the state space `(u, v)`.
type CVec = Vec<c64>;

fn mul(a: &SymMatrix, x: &[c64]) -> CVec {
    (0..a.n())
        .map(|i| a.row(i).fold(c64::new(0.0, 0.0), |acc, (j, v)| acc + x[j] * v))
        .collect()
}

fn dot(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).fold(c64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
}

/// Applications of `R = (iβ - A)⁻¹` and its energy-adjoint through one sparse
/// LU of `Q = K - β²M + iβK_a`.
struct SparseResolvent<'a> {
    sys: &'a DiscreteSystem,
    beta: f64,
    lu: Lu<usize, c64>,
}

impl<'a> SparseResolvent<'a> {
    fn new(sys: &'a DiscreteSystem, beta: f64) -> Result<Self, SpectralError> {
        let n = sys.n();
        let mut triplets = Vec::new();
        for i in 0..n {
            for (j, k) in sys.k.row(i) {
                let q = c64::new(k - beta * beta * sys.m.get(i, j), beta * sys.ka.get(i, j));
                triplets.push(Triplet::new(i, j, q));
            }
        }
        let q = SparseColMat::try_new_from_triplets(n, n, &triplets)
            .map_err(|_| SpectralError::SingularShift(beta))?;
        let lu = q.sp_lu().map_err(|_| SpectralError::SingularShift(beta))?;
        Ok(Self { sys, beta, lu })
    }

    fn solve(&self, rhs: CVec, conjugate: bool) -> Result<CVec, SpectralError> {
        let n = rhs.len();
        let mut x = Mat::from_fn(n, 1, |i, _| rhs[i]);
        if conjugate {
            self.lu.solve_conjugate_in_place(x.as_mut());
        } else {
            self.lu.solve_in_place(x.as_mut());
        }
        let out: CVec = (0..n).map(|i| x[(i, 0)]).collect();
        if out.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            Ok(out)
        } else {
            Err(SpectralError::SingularShift(self.beta))
        }
    }

    /// `(u, v) = R (f, g)`: `Q u = M g + iβ M f + K_a f`, `v = iβ u - f`.
    fn apply(&self, f: &[c64], g: &[c64]) -> Result<(CVec, CVec), SpectralError> {
        let ib = c64::new(0.0, self.beta);
        let mf = mul(&self.sys.m, f);
        let mg = mul(&self.sys.m, g);
        let af = mul(&self.sys.ka, f);
        let rhs: CVec = (0..f.len()).map(|i| mg[i] + ib * mf[i] + af[i]).collect();
        let u = self.solve(rhs, false)?;
        let v = u.iter().zip(f).map(|(u, f)| ib * u - f).collect();
        Ok((u, v))
    }

    /// `(u, v) = R* (f, g)` with `A* (u, v) = (-v, M⁻¹(K u - K_a v))`:
    /// `conj(Q) u = -M g - iβ M f + K_a f`, `v = f + iβ u`.
    fn apply_adjoint(&self, f: &[c64], g: &[c64]) -> Result<(CVec, CVec), SpectralError> {
        let ib = c64::new(0.0, self.beta);
        let mf = mul(&self.sys.m, f);
        let mg = mul(&self.sys.m, g);
        let af = mul(&self.sys.ka, f);
        let rhs: CVec = (0..f.len()).map(|i| -mg[i] - ib * mf[i] + af[i]).collect();
        let u = self.solve(rhs, true)?;
        let v = u.iter().zip(f).map(|(u, f)| f + ib * u).collect();
        Ok((u, v))
    }

    /// Energy inner product `⟨x, y⟩ = x_uᴴ K y_u + x_vᴴ M y_v`.
    fn inner(&self, x: &(CVec, CVec), y: &(CVec, CVec)) -> c64 {
        dot(&x.0, &mul(&self.sys.k, &y.0)) + dot(&x.1, &mul(&self.sys.m, &y.1))
    }
}

/// Largest eigenvalue of `R*R` by Lanczos with full reorthogonalization.
fn iterative_norm(sys: &DiscreteSystem, beta: f64) -> Result<f64, SpectralError> {
    let n = sys.n();
    if n == 0 {
        return Ok(0.0);
    }
    let r = SparseResolvent::new(sys, beta)?;
    let start = |i: usize, s: f64| c64::new(1.0 + ((i * 7 + 3) % 11) as f64 / 11.0 * s, 0.0);
    let mut q: (CVec, CVec) = (
        (0..n).map(|i| start(i, 1.0)).collect(),
        (0..n).map(|i| start(i, -0.5)).collect(),
    );
    let norm0 = r.inner(&q, &q).re.sqrt();
    scale(&mut q, 1.0 / norm0);

    let mut basis: Vec<(CVec, CVec)> = Vec::new();
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut theta_prev = 0.0;
    let max_iters = LANCZOS_MAX_ITERS.min(2 * n);
    for k in 0..max_iters {
        let (ru, rv) = r.apply(&q.0, &q.1)?;
        let mut w = r.apply_adjoint(&ru, &rv)?;
        basis.push(q.clone());
        let alpha = r.inner(&q, &w).re;
        alphas.push(alpha);
        // full reorthogonalization, twice
        for _ in 0..2 {
            for b in &basis {
                let c = r.inner(b, &w);
                axpy(&mut w, -c, b);
            }
        }
        let beta_k = r.inner(&w, &w).re.max(0.0).sqrt();
        let theta = largest_ritz(&alphas, &betas);
        let converged = k > 0 && (theta - theta_prev).abs() <= LANCZOS_TOL * theta;
        if converged || beta_k <= 1e-14 * theta.max(f64::MIN_POSITIVE) || k + 1 == max_iters {
            return Ok(theta.sqrt());
        }
        theta_prev = theta;
        betas.push(beta_k);
        q = w;
        scale(&mut q, 1.0 / beta_k);
    }
    Ok(theta_prev.sqrt())
}

fn scale(x: &mut (CVec, CVec), s: f64) {
    x.0.iter_mut().chain(x.1.iter_mut()).for_each(|z| *z *= s);
}

fn axpy(y: &mut (CVec, CVec), a: c64, x: &(CVec, CVec)) {
    for (yi, xi) in y.0.iter_mut().zip(&x.0).chain(y.1.iter_mut().zip(&x.1)) {
        *yi += a * xi;
    }
}

/// Largest eigenvalue of the symmetric tridiagonal matrix `(alphas, betas)`.
fn largest_ritz(alphas: &[f64], betas: &[f64]) -> f64 {
    let m = alphas.len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let s = t
        .self_adjoint_eigenvalues(Side::Lower)
        .expect("tridiagonal eigenvalues converge");
    s.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `RESOLVED_BAND_FACTOR · π / h` with `h` the coarsest nominal cell width.
pub fn resolved_band_limit(mesh: &Mesh) -> f64 {
    RESOLVED_BAND_FACTOR * PI / mesh.h_max()
}

/// One decade ending at the resolved band limit.
pub fn default_band(mesh: &Mesh) -> (f64, f64) {
    let hi = resolved_band_limit(mesh);
    (hi / 10.0, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SlopeMethod {
    /// least squares through the refined local maxima in the upper half band
    Envelope,
    /// least squares through the grid values in the upper half band
    Grid,
}

/// A refined local maximum of the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub beta: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventScan {
    pub betas: Vec<f64>,
    pub norms: Vec<f64>,
    pub band: [f64; 2],
    /// start of the upper half of the grid, where slopes are fitted
    pub fit_from: f64,
    /// the reported log-log slope
    pub slope: f64,
    /// log-log slope through the grid values of the upper half
    pub raw_slope: f64,
    pub slope_method: SlopeMethod,
    /// all refined local maxima of the scan
    pub peaks: Vec<Peak>,
    pub method: ResolventMethod,
}

impl ResolventScan {
    /// CSV with header `beta,resolvent_norm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("beta,resolvent_norm\n");
        for (b, r) in self.betas.iter().zip(&self.norms) {
            out.push_str(&format!("{b:.16e},{r:.16e}\n"));
        }
        out
    }

    /// Peaks used for the envelope fit.
    pub fn upper_peaks(&self) -> Vec<Peak> {
        self.peaks.iter().copied().filter(|p| p.beta >= self.fit_from).collect()
    }
}

/// Norms on `points` log-spaced values of `β` in `[beta_min, beta_max]`.
///
/// The slope of `log ‖R‖` against `log β` is fitted on the upper half of the
/// grid. The grid undersamples the narrow resonance peaks of weakly damped
/// modes, so the peaks are refined and the slope is taken through their
/// envelope when at least three lie in the upper half; otherwise the grid
/// values are used.
pub fn resolvent_scan(
    sys: &DiscreteSystem,
    beta_min: f64,
    beta_max: f64,
    points: usize,
    method: ResolventMethod,
) -> Result<ResolventScan, SpectralError> {
    if !(beta_min > 0.0 && beta_max > beta_min && beta_max.is_finite()) {
        return Err(SpectralError::InvalidScan(format!(
            "need 0 < beta_min < beta_max, got [{beta_min}, {beta_max}]"
        )));
    }
    if points < 8 {
        return Err(SpectralError::InvalidScan(format!("need at least 8 points, got {points}")));
    }
    if beta_max < 10.0 * beta_min * (1.0 - 1e-12) {
        return Err(SpectralError::BandTooNarrow { beta_min, beta_max });
    }
    let limit = resolved_band_limit(&sys.mesh);
    if beta_max > limit * (1.0 + 1e-9) {
        return Err(SpectralError::BeyondResolvedBand { beta_max, limit });
    }
    let eval = ResolventEvaluator::new(sys, method)?;
    let ratio = (beta_max / beta_min).ln();
    let betas: Vec<f64> = (0..points)
        .map(|i| {
            if i + 1 == points {
                beta_max
            } else {
                beta_min * (ratio * i as f64 / (points - 1) as f64).exp()
            }
        })
        .collect();
    let norms = betas
        .par_iter()
        .map(|&b| eval.norm(b))
        .collect::<Result<Vec<_>, _>>()?;

    let half = points / 2;
    let log_b: Vec<f64> = betas[half..].iter().map(|b| b.ln()).collect();
    let log_r: Vec<f64> = norms[half..].iter().map(|r| r.ln()).collect();
    let raw_slope = ls_slope(&log_b, &log_r);

    let candidates: Vec<usize> = (1..points - 1)
        .filter(|&i| norms[i] >= norms[i - 1] && norms[i] >= norms[i + 1])
        .collect();
    let peaks = candidates
        .par_iter()
        .map(|&i| refine_peak(&eval, betas[i - 1], betas[i + 1], betas[i], norms[i]))
        .collect::<Result<Vec<_>, _>>()?;

    let fit_from = betas[half];
    let upper: Vec<&Peak> = peaks.iter().filter(|p| p.beta >= fit_from).collect();
    let (slope, slope_method) = if upper.len() >= 3 {
        let xs: Vec<f64> = upper.iter().map(|p| p.beta.ln()).collect();
        let ys: Vec<f64> = upper.iter().map(|p| p.norm.ln()).collect();
        (ls_slope(&xs, &ys), SlopeMethod::Envelope)
    } else {
        (raw_slope, SlopeMethod::Grid)
    };
    Ok(ResolventScan {
        betas,
        norms,
        band: [beta_min, beta_max],
        fit_from,
        slope,
        raw_slope,
        slope_method,
        peaks,
        method: eval.method(),
    })
}

/// Golden-section maximization in `log β` on `[lo, hi]`.
fn refine_peak(
    eval: &ResolventEvaluator<'_>,
    lo: f64,
    hi: f64,
    beta0: f64,
    norm0: f64,
) -> Result<Peak, SpectralError> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval.norm(c.exp())?;
    let mut fd = eval.norm(d.exp())?;
    let mut best = Peak { beta: beta0, norm: norm0 };
    for _ in 0..PEAK_REFINE_ITERS {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval.norm(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval.norm(d.exp())?;
        }
    }
    for (x, f) in [(c, fc), (d, fd)] {
        if f > best.norm {
            best = Peak { beta: x.exp(), norm: f };
        }
    }
    Ok(best)
}
