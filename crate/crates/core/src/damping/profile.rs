use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest polynomial degree accepted on a single piece.
pub const MAX_DEGREE: usize = 20;

/// Damping coefficient as written in a network file.
///
/// `pp` coefficients are in ascending powers of the local coordinate
/// `s = x - breaks[i]` on the piece `[breaks[i], breaks[i + 1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileSpec {
    Zero,
    Constant { value: f64 },
    Pp { breaks: Vec<f64>, coeffs: Vec<Vec<f64>> },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DampingError {
    #[error("x = {x} lies outside [0, {length}]")]
    OutOfDomain { x: f64, length: f64 },
    #[error("invalid breakpoints: {0}")]
    BadBreakpoints(String),
    #[error("piece {piece} has {found} coefficient rows, expected {expected}")]
    CoefficientShape {
        piece: usize,
        found: usize,
        expected: usize,
    },
    #[error("non-finite damping coefficient")]
    NonFinite,
    #[error("damping is negative near x = {x} (value {value})")]
    Negative { x: f64, value: f64 },
    #[error("damping vanishes inside a nonzero piece near x = {x}")]
    VanishesInside { x: f64 },
    #[error("damping jumps at interior breakpoint x = {x}; split the edge instead")]
    InteriorJump { x: f64 },
    #[error("damping assignment has {found} profiles for {expected} edges")]
    AssignmentSize { found: usize, expected: usize },
}

/// One polynomial piece on `[start, end]`, coefficients in the local coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub coeffs: Vec<f64>,
}

impl Piece {
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    /// Value of the `order`-th derivative at local coordinate `s`.
    pub fn eval_local(&self, s: f64, order: usize) -> f64 {
        horner(&derivative(&self.coeffs, order), s)
    }
}

pub(crate) fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

pub(crate) fn derivative(coeffs: &[f64], order: usize) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    for _ in 0..order {
        if c.len() <= 1 {
            return vec![0.0];
        }
        c = c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &ck)| k as f64 * ck)
            .collect();
    }
    c
}

/// Coefficients of `q(s) = p(w - s)`.
fn reflect(coeffs: &[f64], w: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    for (k, &ck) in coeffs.iter().enumerate() {
        // (w - s)^k = sum_m C(k, m) w^(k-m) (-s)^m
        let mut binom = 1.0;
        for m in 0..=k {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            out[m] += ck * binom * w.powi((k - m) as i32) * sign;
            binom = binom * (k - m) as f64 / (m + 1) as f64;
        }
    }
    out
}

/// Which end of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum End {
    Tail,
    Head,
}

/// A validated damping coefficient on one edge of length `length`.
#[derive(Debug, Clone, PartialEq)]
pub struct DampingProfile {
    spec: ProfileSpec,
    length: f64,
    pieces: Vec<Piece>,
}

impl DampingProfile {
    pub fn zero(length: f64) -> Self {
        Self::new(ProfileSpec::Zero, length).expect("zero profile is always valid")
    }

    pub fn constant(value: f64, length: f64) -> Result<Self, DampingError> {
        Self::new(ProfileSpec::Constant { value }, length)
    }

    pub fn piecewise(
        breaks: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
        length: f64,
    ) -> Result<Self, DampingError> {
        Self::new(ProfileSpec::Pp { breaks, coeffs }, length)
    }

    /// Single polynomial piece covering the whole edge.
    pub fn polynomial(coeffs: Vec<f64>, length: f64) -> Result<Self, DampingError> {
        Self::piecewise(vec![0.0, length], vec![coeffs], length)
    }

    pub fn new(spec: ProfileSpec, length: f64) -> Result<Self, DampingError> {
        let pieces = match &spec {
            ProfileSpec::Zero => vec![Piece {
                start: 0.0,
                end: length,
                coeffs: vec![0.0],
            }],
            ProfileSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(DampingError::NonFinite);
                }
                if *value < 0.0 {
                    return Err(DampingError::Negative {
                        x: 0.0,
                        value: *value,
                    });
                }
                vec![Piece {
                    start: 0.0,
                    end: length,
                    coeffs: vec![*value],
                }]
            }
            ProfileSpec::Pp { breaks, coeffs } => build_pieces(breaks, coeffs, length)?,
        };
        let profile = DampingProfile {
            spec,
            length,
            pieces,
        };
        profile.check_admissible()?;
        Ok(profile)
    }

    fn check_admissible(&self) -> Result<(), DampingError> {
        let scale = self.sup_abs(0).max(f64::MIN_POSITIVE);
        for w in self.pieces.windows(2) {
            let x = w[1].start;
            let left = w[0].eval_local(w[0].width(), 0);
            let right = w[1].eval_local(0.0, 0);
            if (left - right).abs() > 1e-12 * scale {
                return Err(DampingError::InteriorJump { x });
            }
        }
        for p in &self.pieces {
            if p.is_zero() {
                continue;
            }
            let w = p.width();
            for &end in &[0.0, w] {
                let v = p.eval_local(end, 0);
                if v < -1e-14 * scale {
                    return Err(DampingError::Negative {
                        x: p.start + end,
                        value: v,
                    });
                }
            }
            // interior minimum: endpoints of the sampling grid plus refined critical points
            let (xmin, vmin) = interior_minimum(p);
            if vmin < -1e-14 * scale {
                return Err(DampingError::Negative {
                    x: p.start + xmin,
                    value: vmin,
                });
            }
            if vmin <= 1e-13 * scale {
                return Err(DampingError::VanishesInside { x: p.start + xmin });
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &ProfileSpec {
        &self.spec
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// `a = 0` on the whole edge.
    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(Piece::is_zero)
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(Piece::degree).max().unwrap_or(0)
    }

    /// Interior breakpoints (excluding 0 and `length`).
    pub fn interior_breaks(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.start).collect()
    }

    /// Index of the piece used to evaluate at `x`: the right piece at interior
    /// breakpoints, the last piece at `x = length`.
    pub fn piece_index(&self, x: f64) -> Result<usize, DampingError> {
        if !(0.0..=self.length).contains(&x) {
            return Err(DampingError::OutOfDomain {
                x,
                length: self.length,
            });
        }
        let i = self.pieces.partition_point(|p| p.start <= x);
        Ok(i.saturating_sub(1))
    }

    fn eval_order(&self, x: f64, order: usize) -> Result<f64, DampingError> {
        let i = self.piece_index(x)?;
        let p = &self.pieces[i];
        Ok(p.eval_local(x - p.start, order))
    }

    pub fn eval(&self, x: f64) -> Result<f64, DampingError> {
        self.eval_order(x, 0)
    }

    pub fn eval_d1(&self, x: f64) -> Result<f64, DampingError> {
        self.eval_order(x, 1)
    }

    pub fn eval_d2(&self, x: f64) -> Result<f64, DampingError> {
        self.eval_order(x, 2)
    }

    /// Value at an edge end.
    pub fn end_value(&self, end: End) -> f64 {
        match end {
            End::Tail => self.pieces[0].eval_local(0.0, 0),
            End::Head => {
                let p = self.pieces.last().expect("at least one piece");
                p.eval_local(p.width(), 0)
            }
        }
    }

    /// One-sided first derivative at an edge end, in the edge's own coordinate.
    pub fn end_derivative(&self, end: End) -> f64 {
        match end {
            End::Tail => self.pieces[0].eval_local(0.0, 1),
            End::Head => {
                let p = self.pieces.last().expect("at least one piece");
                p.eval_local(p.width(), 1)
            }
        }
    }

    /// Supremum of `|a^(order)|` over all pieces, taken piece by piece.
    pub fn sup_abs(&self, order: usize) -> f64 {
        self.pieces
            .iter()
            .map(|p| sup_abs_piece(p, order))
            .fold(0.0, f64::max)
    }

    /// Largest jump of the `order`-th derivative across interior breakpoints.
    pub fn max_interior_jump(&self, order: usize) -> f64 {
        self.pieces
            .windows(2)
            .map(|w| (w[0].eval_local(w[0].width(), order) - w[1].eval_local(0.0, order)).abs())
            .fold(0.0, f64::max)
    }

    /// The same coefficient seen from the other end: `x -> length - x`.
    pub fn reversed(&self) -> DampingProfile {
        let l = self.length;
        let spec = match &self.spec {
            ProfileSpec::Pp { .. } => {
                let mut breaks = vec![0.0];
                let mut coeffs = Vec::with_capacity(self.pieces.len());
                for p in self.pieces.iter().rev() {
                    breaks.push(l - p.start);
                    coeffs.push(reflect(&p.coeffs, p.width()));
                }
                *breaks.last_mut().expect("nonempty") = l;
                ProfileSpec::Pp { breaks, coeffs }
            }
            other => other.clone(),
        };
        DampingProfile::new(spec, l).expect("reflection preserves admissibility")
    }
}

fn build_pieces(breaks: &[f64], coeffs: &[Vec<f64>], length: f64) -> Result<Vec<Piece>, DampingError> {
    if breaks.len() < 2 {
        return Err(DampingError::BadBreakpoints(
            "need at least two breakpoints".into(),
        ));
    }
    if breaks.iter().chain(coeffs.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(DampingError::NonFinite);
    }
    let tol = 1e-12 * length;
    if breaks[0].abs() > tol || (breaks[breaks.len() - 1] - length).abs() > tol {
        return Err(DampingError::BadBreakpoints(format!(
            "breakpoints must span [0, {length}]"
        )));
    }
    if breaks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DampingError::BadBreakpoints(
            "breakpoints must be strictly increasing".into(),
        ));
    }
    if coeffs.len() != breaks.len() - 1 {
        return Err(DampingError::CoefficientShape {
            piece: coeffs.len(),
            found: coeffs.len(),
            expected: breaks.len() - 1,
        });
    }
    let last = breaks.len() - 1;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| Piece {
            start: if i == 0 { 0.0 } else { breaks[i] },
            end: if i + 1 == last { length } else { breaks[i + 1] },
            coeffs: if c.is_empty() { vec![0.0] } else { c.clone() },
        })
        .collect())
}

const SAMPLES: usize = 256;

/// Critical points of the `order`-th derivative's magnitude: sample the
/// next derivative, bracket its sign changes and bisect.
fn critical_points(p: &Piece, order: usize) -> Vec<f64> {
    let w = p.width();
    let d = derivative(&p.coeffs, order + 1);
    let f = |s: f64| horner(&d, s);
    let mut out = Vec::new();
    let mut prev_s = 0.0;
    let mut prev = f(0.0);
    for i in 1..=SAMPLES {
        let s = w * i as f64 / SAMPLES as f64;
        let cur = f(s);
        if cur == 0.0 {
            out.push(s);
        } else if prev != 0.0 && (prev < 0.0) != (cur < 0.0) {
            let (mut lo, mut hi) = (prev_s, s);
            let lo_neg = prev < 0.0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) < 0.0) == lo_neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev_s = s;
        prev = cur;
    }
    out
}

fn interior_minimum(p: &Piece) -> (f64, f64) {
    let w = p.width();
    let mut best = (0.5 * w, p.eval_local(0.5 * w, 0));
    let candidates = (1..SAMPLES)
        .map(|i| w * i as f64 / SAMPLES as f64)
        .chain(critical_points(p, 0))
        .filter(|&s| s > 0.0 && s < w);
    for s in candidates {
        let v = p.eval_local(s, 0);
        if v < best.1 {
            best = (s, v);
        }
    }
    best
}

fn sup_abs_piece(p: &Piece, order: usize) -> f64 {
    let w = p.width();
    [0.0, w]
        .into_iter()
        .chain(critical_points(p, order))
        .map(|s| p.eval_local(s, order).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_profile() {
        let a = DampingProfile::zero(1.0);
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(a.eval(x).unwrap(), 0.0);
            assert_eq!(a.eval_d1(x).unwrap(), 0.0);
            assert_eq!(a.eval_d2(x).unwrap(), 0.0);
        }
        assert!(a.is_zero());
    }

    #[test]
    fn constant_profile() {
        let a = DampingProfile::constant(2.0, 1.5).unwrap();
        assert_eq!(a.eval(0.7).unwrap(), 2.0);
        assert_eq!(a.eval_d1(0.7).unwrap(), 0.0);
        assert_eq!(a.eval_d2(0.7).unwrap(), 0.0);
        assert!(!a.is_zero());
    }

    #[test]
    fn quadratic_by_hand() {
        // a(x) = x(1 - x)
        let a = DampingProfile::polynomial(vec![0.0, 1.0, -1.0], 1.0).unwrap();
        assert_eq!(a.eval(0.5).unwrap(), 0.25);
        assert_eq!(a.eval_d1(0.5).unwrap(), 0.0);
        assert_eq!(a.eval_d2(0.5).unwrap(), -2.0);
        assert_relative_eq!(a.sup_abs(0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(a.sup_abs(1), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_domain() {
        let a = DampingProfile::constant(1.0, 1.0).unwrap();
        assert!(matches!(a.eval(1.0 + 1e-9), Err(DampingError::OutOfDomain { .. })));
        assert!(matches!(a.eval(-0.1), Err(DampingError::OutOfDomain { .. })));
    }

    #[test]
    fn breakpoint_uses_right_piece() {
        // a = 1 + s on [0, 0.5], then 1.5 + 2 s on [0.5, 1]: continuous with a kink
        let a = DampingProfile::piecewise(
            vec![0.0, 0.5, 1.0],
            vec![vec![1.0, 1.0], vec![1.5, 2.0]],
            1.0,
        )
        .unwrap();
        assert_eq!(a.eval_d1(0.5).unwrap(), 2.0);
        assert_eq!(a.eval_d1(1.0).unwrap(), 2.0);
        assert_eq!(a.eval_d1(0.0).unwrap(), 1.0);
        assert_relative_eq!(a.max_interior_jump(1), 1.0);
        assert_eq!(a.max_interior_jump(0), 0.0);
    }

    #[test]
    fn rejects_inadmissible() {
        assert!(matches!(
            DampingProfile::constant(-1.0, 1.0),
            Err(DampingError::Negative { .. })
        ));
        // x - 0.5 changes sign
        assert!(matches!(
            DampingProfile::polynomial(vec![-0.5, 1.0], 1.0),
            Err(DampingError::Negative { .. })
        ));
        // (x - 0.5)^2 touches zero inside
        assert!(matches!(
            DampingProfile::polynomial(vec![0.25, -1.0, 1.0], 1.0),
            Err(DampingError::VanishesInside { .. })
        ));
        assert!(matches!(
            DampingProfile::piecewise(vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![2.0]], 1.0),
            Err(DampingError::InteriorJump { .. })
        ));
        assert!(matches!(
            DampingProfile::piecewise(vec![0.0, 0.7, 0.5, 1.0], vec![vec![1.0]; 3], 1.0),
            Err(DampingError::BadBreakpoints(_))
        ));
        assert!(matches!(
            DampingProfile::piecewise(vec![0.0, 0.9], vec![vec![1.0]], 1.0),
            Err(DampingError::BadBreakpoints(_))
        ));
        assert!(matches!(
            DampingProfile::piecewise(vec![0.0, 0.5, 1.0], vec![vec![1.0]], 1.0),
            Err(DampingError::CoefficientShape { .. })
        ));
    }

    #[test]
    fn zero_piece_next_to_positive_piece() {
        // elastic on [0, 0.5], then (s)^2 on [0.5, 1]
        let a = DampingProfile::piecewise(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0], vec![0.0, 0.0, 1.0]],
            1.0,
        )
        .unwrap();
        assert!(!a.is_zero());
        assert_eq!(a.eval(0.25).unwrap(), 0.0);
        assert_relative_eq!(a.eval(1.0).unwrap(), 0.25);
    }

    #[test]
    fn reversal_matches_mirror() {
        let a = DampingProfile::piecewise(
            vec![0.0, 0.3, 1.2],
            vec![vec![1.0, 2.0, 0.5], vec![1.645, 3.0, -1.0]],
            1.2,
        )
        .unwrap();
        let r = a.reversed();
        for i in 0..=24 {
            let x = 1.2 * i as f64 / 24.0;
            assert_relative_eq!(r.eval(1.2 - x).unwrap(), a.eval(x).unwrap(), epsilon = 1e-12);
        }
        assert_relative_eq!(r.end_derivative(End::Tail), -a.end_derivative(End::Head), epsilon = 1e-12);
    }
}
