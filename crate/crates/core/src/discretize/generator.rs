//! The first-order generator `(u, v) ↦ (v, -M⁻¹(K u + K_a v))` and checks of
//! its basic properties.

use faer::linalg::solvers::Solve;
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Par, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{DiscreteSystem, DiscretizeError};

/// Condition numbers at or above this count as singular.
pub const COND_LIMIT: f64 = 1e12;
/// Random states used by [`check_generator_wellposed`].
pub const WELLPOSED_SAMPLES: usize = 100;
/// Seed of those random states.
pub const WELLPOSED_SEED: u64 = 0x5eed_0001;

/// Matrix-free generator with a cached sparse factorization of `M`.
#[derive(Debug)]
pub struct GeneratorAction<'a> {
    sys: &'a DiscreteSystem,
    mass: Option<Llt<usize, f64>>,
}

impl<'a> GeneratorAction<'a> {
    pub fn new(sys: &'a DiscreteSystem) -> Result<Self, DiscretizeError> {
        let mass = if sys.n() == 0 {
            None
        } else {
            Some(
                sys.m
                    .to_faer()
                    .sp_cholesky(Side::Lower)
                    .map_err(|_| DiscretizeError::SingularMass)?,
            )
        };
        Ok(Self { sys, mass })
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    /// `M⁻¹ r`.
    pub fn solve_mass(&self, r: &[f64]) -> Vec<f64> {
        let Some(mass) = &self.mass else {
            return Vec::new();
        };
        let mut x = Mat::from_fn(r.len(), 1, |i, _| r[i]);
        mass.solve_in_place(x.as_mut());
        (0..r.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Applies the generator to `(u, v)`.
    pub fn apply(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut r = self.sys.k.mul_vec(u);
        self.sys.ka.mul_add(1.0, v, &mut r);
        let w = self.solve_mass(&r);
        (v.to_vec(), w.into_iter().map(|x| -x).collect())
    }
}

/// Explicit `2n × 2n` generator `[[0, I], [-M⁻¹K, -M⁻¹K_a]]`.
pub fn dense_generator(sys: &DiscreteSystem) -> Result<Mat<f64>, DiscretizeError> {
    let n = sys.n();
    let mut a = Mat::zeros(2 * n, 2 * n);
    if n == 0 {
        return Ok(a);
    }
    let llt = sys
        .m
        .to_dense()
        .llt(Side::Lower)
        .map_err(|_| DiscretizeError::SingularMass)?;
    let mk = llt.solve(sys.k.to_dense());
    let mka = llt.solve(sys.ka.to_dense());
    for i in 0..n {
        a[(i, n + i)] = 1.0;
        for j in 0..n {
            a[(n + i, j)] = -mk[(i, j)];
            a[(n + i, n + j)] = -mka[(i, j)];
        }
    }
    Ok(a)
}

/// The generator in coordinates where the energy norm is Euclidean.
///
/// With `K = L_K L_Kᵀ`, `M = L_M L_Mᵀ` and `y = (L_Kᵀ u, L_Mᵀ v)`, the generator
/// becomes `B = [[0, Cᵀ], [-C, -G]]` with `C = L_M⁻¹ L_K` and
/// `G = L_M⁻¹ K_a L_M⁻ᵀ`; `‖y‖² = uᵀKu + vᵀMv`.
#[derive(Debug, Clone)]
pub struct WeightedGenerator {
    pub b: Mat<f64>,
    pub l_k: Mat<f64>,
    pub l_m: Mat<f64>,
}

impl WeightedGenerator {
    pub fn n(&self) -> usize {
        self.l_k.nrows()
    }

    /// Recovers the displacement `u = L_K⁻ᵀ y_1` from weighted coordinates.
    pub fn displacement(&self, y1: Mat<faer::c64>) -> Mat<faer::c64> {
        let lt = Mat::from_fn(self.n(), self.n(), |i, j| {
            faer::c64::new(self.l_k[(j, i)], 0.0)
        });
        let mut x = y1;
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(lt.as_ref(), x.as_mut(), Par::Seq);
        x
    }
}

pub fn weighted_generator(sys: &DiscreteSystem) -> Result<WeightedGenerator, DiscretizeError> {
    let n = sys.n();
    let l_k = sys
        .k
        .to_dense()
        .llt(Side::Lower)
        .map_err(|_| DiscretizeError::NotPositiveDefinite("stiffness"))?
        .L()
        .to_owned();
    let l_m = sys
        .m
        .to_dense()
        .llt(Side::Lower)
        .map_err(|_| DiscretizeError::SingularMass)?
        .L()
        .to_owned();
    let mut c = l_k.clone();
    solve_lower_triangular_in_place(l_m.as_ref(), c.as_mut(), Par::Seq);
    let mut x = sys.ka.to_dense();
    solve_lower_triangular_in_place(l_m.as_ref(), x.as_mut(), Par::Seq);
    let mut g = x.transpose().to_owned();
    solve_lower_triangular_in_place(l_m.as_ref(), g.as_mut(), Par::Seq);
    let mut b = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            b[(i, n + j)] = c[(j, i)];
            b[(n + i, j)] = -c[(i, j)];
            b[(n + i, n + j)] = -0.5 * (g[(i, j)] + g[(j, i)]);
        }
    }
    Ok(WeightedGenerator { b, l_k, l_m })
}

/// Outcome of [`check_generator_wellposed`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WellPosedness {
    pub zero_in_resolvent: bool,
    pub one_in_resolvent: bool,
    pub dissipative: bool,
    /// condition number of the generator in the energy norm
    pub cond_generator: f64,
    /// condition number of `I - A` in the energy norm
    pub cond_shifted: f64,
    /// largest `Re⟨Az, z⟩_E / ⟨z, z⟩_E` over the random states
    pub max_rayleigh: f64,
    /// largest `|Re⟨Az, z⟩_E + vᵀK_a v|` relative to the terms involved
    pub max_identity_defect: f64,
}

/// Checks that `0` and `1` are in the resolvent set (condition number below
/// [`COND_LIMIT`]) and that `Re⟨Az, z⟩_E = -vᵀK_a v ≤ 0` on random states.
pub fn check_generator_wellposed(sys: &DiscreteSystem) -> Result<WellPosedness, DiscretizeError> {
    let n = sys.n();
    let wg = weighted_generator(sys)?;
    let cond = |m: &Mat<f64>| {
        let s = m.singular_values().expect("singular values converge");
        let (max, min) = (s[0], s[s.len() - 1]);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    let cond_generator = cond(&wg.b);
    let shifted = Mat::from_fn(2 * n, 2 * n, |i, j| {
        (if i == j { 1.0 } else { 0.0 }) - wg.b[(i, j)]
    });
    let cond_shifted = cond(&shifted);

    let action = GeneratorAction::new(sys)?;
    let mut rng = ChaCha8Rng::seed_from_u64(WELLPOSED_SEED);
    let mut max_rayleigh = f64::NEG_INFINITY;
    let mut max_identity_defect: f64 = 0.0;
    for _ in 0..WELLPOSED_SAMPLES {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (au, av) = action.apply(&u, &v);
        let t1 = sys.k.bilinear(&au, &u);
        let t2 = sys.m.bilinear(&av, &v);
        let re = t1 + t2;
        let d = sys.dissipation(&v);
        let scale = t1.abs() + t2.abs() + d;
        let norm2 = 2.0 * sys.energy(&u, &v);
        max_rayleigh = max_rayleigh.max(re / norm2);
        max_identity_defect = max_identity_defect.max((re + d).abs() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(WellPosedness {
        zero_in_resolvent: cond_generator < COND_LIMIT,
        one_in_resolvent: cond_shifted < COND_LIMIT,
        dissipative: max_rayleigh <= 1e-12 && max_identity_defect <= 1e-10,
        cond_generator,
        cond_shifted,
        max_rayleigh,
        max_identity_defect,
    })
}
