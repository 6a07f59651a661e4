//! Crank-Nicolson time integration, energy traces and decay fits.
//!
//! The scheme is applied to the first-order system and reduced to one
//! symmetric solve per step:
//!
//! `(M + dt/2 K_a + dt²/4 K) v₁ = M v₀ - dt K u₀ - dt/2 K_a v₀ - dt²/4 K v₀`,
//! `u₁ = u₀ + dt/2 (v₀ + v₁)`.
//!
//! It satisfies `E₁ - E₀ = -dt v_midᵀ K_a v_mid` exactly in exact arithmetic.

mod fit;
mod initial;

pub use fit::{fit_exponential, fit_power, ls_slope, DecayFit, DecayModel, MIN_FIT_SAMPLES};
pub use initial::{initial_state, undamped_modes, EdgeFunction, FieldSpec, INITIAL_DATA_TOL};

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Mat, Side};
use serde::Serialize;
use thiserror::Error;

use crate::discretize::{DiscreteSystem, DiscretizeError, GeneratorAction};
use crate::sparse::SymMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimulateError {
    #[error("time step must be finite and nonzero, got {0}")]
    InvalidTimeStep(f64),
    #[error("final time must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("state has {found} entries, the system has {expected} DOFs")]
    StateSize { found: usize, expected: usize },
    #[error("initial {field} is not admissible at vertex {vertex}: {detail}")]
    IncompatibleInitialData {
        field: &'static str,
        vertex: String,
        detail: String,
    },
    #[error("initial data names unknown edge {0}")]
    UnknownEdge(String),
    #[error("requested {requested} modes, the system has {available}")]
    ModeCount { requested: usize, available: usize },
    #[error("linear solve failed in the time step")]
    LinearSolveFailure,
    #[error("fit window [{t0}, {t1}] must satisfy 0 < t0 < t1 <= {last}")]
    InvalidWindow { t0: f64, t1: f64, last: f64 },
    #[error("fit window holds {found} samples, at least {required} are needed")]
    WindowTooShort { found: usize, required: usize },
    #[error("only {usable} samples in the window are above the round-off floor, {required} needed")]
    EnergyUnderflow { usable: usize, required: usize },
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
}

/// Displacement and velocity on the free DOFs at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn zero(n: usize) -> Self {
        Self {
            u: vec![0.0; n],
            v: vec![0.0; n],
            t: 0.0,
        }
    }

    fn check(&self, n: usize) -> Result<(), SimulateError> {
        for len in [self.u.len(), self.v.len()] {
            if len != n {
                return Err(SimulateError::StateSize {
                    found: len,
                    expected: n,
                });
            }
        }
        Ok(())
    }
}

enum SchurFactor {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// Crank-Nicolson stepper with a cached factorization for a fixed `dt`.
pub struct Stepper<'a> {
    sys: &'a DiscreteSystem,
    dt: f64,
    factor: Option<SchurFactor>,
}

impl<'a> Stepper<'a> {
    /// Negative `dt` integrates backwards in time.
    pub fn new(sys: &'a DiscreteSystem, dt: f64) -> Result<Self, SimulateError> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(SimulateError::InvalidTimeStep(dt));
        }
        let factor = if sys.n() == 0 {
            None
        } else {
            let damped = SymMatrix::lin_comb(1.0, &sys.m, dt / 2.0, &sys.ka);
            let schur = SymMatrix::lin_comb(1.0, &damped, dt * dt / 4.0, &sys.k).to_faer();
            Some(match schur.sp_cholesky(Side::Lower) {
                Ok(f) => SchurFactor::Llt(f),
                Err(_) => SchurFactor::Lu(schur.sp_lu().map_err(|_| SimulateError::LinearSolveFailure)?),
            })
        };
        Ok(Self { sys, dt, factor })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step; also returns `v_midᵀ K_a v_mid`.
    pub fn step(&self, s: &State) -> Result<(State, f64), SimulateError> {
        let n = self.sys.n();
        s.check(n)?;
        let Some(factor) = &self.factor else {
            return Ok((
                State {
                    t: s.t + self.dt,
                    ..s.clone()
                },
                0.0,
            ));
        };
        let dt = self.dt;
        let mut rhs = self.sys.m.mul_vec(&s.v);
        self.sys.k.mul_add(-dt, &s.u, &mut rhs);
        self.sys.ka.mul_add(-dt / 2.0, &s.v, &mut rhs);
        self.sys.k.mul_add(-dt * dt / 4.0, &s.v, &mut rhs);
        let mut x = Mat::from_fn(n, 1, |i, _| rhs[i]);
        match factor {
            SchurFactor::Llt(f) => f.solve_in_place(x.as_mut()),
            SchurFactor::Lu(f) => f.solve_in_place(x.as_mut()),
        }
        let v1: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
        if v1.iter().any(|x| !x.is_finite()) {
            return Err(SimulateError::LinearSolveFailure);
        }
        let u1: Vec<f64> = (0..n).map(|i| s.u[i] + dt / 2.0 * (s.v[i] + v1[i])).collect();
        let v_mid: Vec<f64> = (0..n).map(|i| 0.5 * (s.v[i] + v1[i])).collect();
        let d_mid = self.sys.dissipation(&v_mid);
        Ok((
            State {
                u: u1,
                v: v1,
                t: s.t + dt,
            },
            d_mid,
        ))
    }
}

/// One row of an energy trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    /// `E = (uᵀKu + vᵀMv) / 2`
    pub energy: f64,
    /// `D = vᵀK_a v` at this time
    pub dissipation: f64,
    /// `v_midᵀ K_a v_mid` of the step that ended here (0 for the first sample)
    pub mid_dissipation: f64,
    /// `|ΔE/Δt + v_midᵀ K_a v_mid|` of that step
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub dt: f64,
    pub sample_every: usize,
    pub scheme: String,
    pub samples: Vec<EnergySample>,
}

impl EnergyTrace {
    pub fn initial_energy(&self) -> f64 {
        self.samples.first().map_or(0.0, |s| s.energy)
    }

    pub fn final_energy(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.energy)
    }

    /// Largest per-step residual divided by `E(0)` (0 for a zero trace).
    pub fn max_relative_residual(&self) -> f64 {
        let e0 = self.initial_energy();
        let max = self.samples.iter().map(|s| s.residual).fold(0.0, f64::max);
        if e0 > 0.0 {
            max / e0
        } else {
            max
        }
    }

    /// Largest `|E - E(0)| / E(0)`.
    pub fn max_relative_drift(&self) -> f64 {
        let e0 = self.initial_energy();
        let max = self
            .samples
            .iter()
            .map(|s| (s.energy - e0).abs())
            .fold(0.0, f64::max);
        if e0 > 0.0 {
            max / e0
        } else {
            max
        }
    }

    /// `E_{n+1} ≤ E_n + tol E(0)` for every consecutive pair.
    pub fn is_monotone(&self, tol: f64) -> bool {
        let slack = tol * self.initial_energy();
        self.samples.windows(2).all(|w| w[1].energy <= w[0].energy + slack)
    }

    /// CSV with header `t,E,D,diss_residual`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,E,D,diss_residual\n");
        for s in &self.samples {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t, s.energy, s.dissipation, s.residual
            )
            .expect("writing to a string");
        }
        out
    }
}

/// Integrates from `state0` to `t_end` with step `dt`, recording every
/// `sample_every`-th step (and always the first and last state).
pub fn run(
    sys: &DiscreteSystem,
    state0: &State,
    dt: f64,
    t_end: f64,
    sample_every: usize,
) -> Result<EnergyTrace, SimulateError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(SimulateError::InvalidDuration(t_end));
    }
    if !(dt > 0.0) {
        return Err(SimulateError::InvalidTimeStep(dt));
    }
    state0.check(sys.n())?;
    let stepper = Stepper::new(sys, dt)?;
    let steps = ((t_end / dt).round() as usize).max(1);
    let every = sample_every.max(1);
    let t0 = state0.t;
    let mut samples = Vec::with_capacity(steps / every + 2);
    let mut e_prev = sys.energy(&state0.u, &state0.v);
    samples.push(EnergySample {
        t: t0,
        energy: e_prev,
        dissipation: sys.dissipation(&state0.v),
        mid_dissipation: 0.0,
        residual: 0.0,
    });
    let mut state = state0.clone();
    for k in 1..=steps {
        let (next, d_mid) = stepper.step(&state)?;
        state = next;
        // time from the step count, so sample times carry no accumulated drift
        state.t = t0 + k as f64 * dt;
        let e = sys.energy(&state.u, &state.v);
        if k % every == 0 || k == steps {
            samples.push(EnergySample {
                t: state.t,
                energy: e,
                dissipation: sys.dissipation(&state.v),
                mid_dissipation: d_mid,
                residual: ((e - e_prev) / dt + d_mid).abs(),
            });
        }
        e_prev = e;
    }
    Ok(EnergyTrace {
        dt,
        sample_every: every,
        scheme: "crank-nicolson".into(),
        samples,
    })
}

/// Discrete dissipation law, recomputed from the recorded energies:
/// `|(E_{n+1} - E_n)/dt + v_midᵀK_a v_mid| ≤ tol E(0) max(1, ‖A‖ dt)` for every step.
///
/// Requires a densely sampled trace (`sample_every == 1`); other traces fail.
/// `generator_norm` is an estimate of `‖A‖` in the energy norm (see
/// [`estimate_generator_norm`]); pass 0 for the unscaled bound.
pub fn check_dissipation(trace: &EnergyTrace, tol: f64, generator_norm: f64) -> bool {
    if trace.sample_every != 1 {
        return false;
    }
    let allowance = tol * trace.initial_energy() * (generator_norm * trace.dt).max(1.0);
    trace.samples.windows(2).all(|w| {
        let step = w[1].t - w[0].t;
        let consistent = (step - trace.dt).abs() <= 1e-9 * trace.dt;
        consistent && ((w[1].energy - w[0].energy) / trace.dt + w[1].mid_dissipation).abs() <= allowance
    })
}

/// Power-iteration estimate of `‖A‖` in the energy norm (30 iterations from a
/// fixed start vector).
pub fn estimate_generator_norm(sys: &DiscreteSystem) -> Result<f64, SimulateError> {
    let n = sys.n();
    if n == 0 {
        return Ok(0.0);
    }
    let action = GeneratorAction::new(sys)?;
    let mut u: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 - ((i * 104729) % 11) as f64 / 11.0).collect();
    let mut estimate: f64 = 0.0;
    for _ in 0..30 {
        let norm = (2.0 * sys.energy(&u, &v)).sqrt();
        if norm == 0.0 {
            break;
        }
        u.iter_mut().chain(v.iter_mut()).for_each(|x| *x /= norm);
        let (au, av) = action.apply(&u, &v);
        estimate = estimate.max((2.0 * sys.energy(&au, &av)).sqrt());
        u = au;
        v = av;
    }
    Ok(estimate)
}

/// `min_e(h_e) / 2`.
pub fn default_dt(sys: &DiscreteSystem) -> f64 {
    sys.mesh.h_min() / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical;
    use crate::discretize::{assemble, build_mesh_for, dense_generator, Resolution};
    use crate::Network;

    fn system(net: &Network, cells: usize) -> DiscreteSystem {
        let mesh = build_mesh_for(&net.graph, &Resolution::CellsPerEdge(cells), &net.damping).unwrap();
        assemble(&mesh, &net.damping).unwrap()
    }

    fn sine_state(sys: &DiscreteSystem) -> State {
        initial_state(
            sys,
            &FieldSpec::sine_on_all_edges(1),
            &FieldSpec::Zero,
        )
        .unwrap()
    }

    #[test]
    fn undamped_conserves_energy() {
        let sys = system(&canonical::undamped_string(1.0), 32);
        let s0 = sine_state(&sys);
        let dt = default_dt(&sys);
        let trace = run(&sys, &s0, dt, 1000.0 * dt, 1).unwrap();
        assert_eq!(trace.samples.len(), 1001);
        assert!(trace.max_relative_drift() <= 1e-10, "{}", trace.max_relative_drift());
        assert!(check_dissipation(&trace, 1e-10, 0.0));
    }

    #[test]
    fn damped_energy_strictly_decreases() {
        let sys = system(&canonical::kv_string(0.5), 32);
        let s0 = sine_state(&sys);
        let trace = run(&sys, &s0, default_dt(&sys), 2.0, 1).unwrap();
        for w in trace.samples.windows(2) {
            if w[1].mid_dissipation > 0.0 {
                assert!(w[1].energy < w[0].energy);
            }
        }
        assert!(trace.is_monotone(1e-10));
        assert!(trace.max_relative_residual() <= 1e-10);
    }

    #[test]
    fn zero_state_gives_zero_trace() {
        let sys = system(&canonical::mixed_tree(), 4);
        let trace = run(&sys, &State::zero(sys.n()), 0.01, 0.1, 1).unwrap();
        assert!(trace.samples.iter().all(|s| s.energy == 0.0 && s.dissipation == 0.0));
    }

    #[test]
    fn overdamped_string_decays() {
        let sys = system(&canonical::kv_string(1.0), 16);
        let trace = run(&sys, &sine_state(&sys), 0.05, 60.0, 20).unwrap();
        assert!(trace.final_energy() < 1e-6 * trace.initial_energy());
    }

    #[test]
    fn corrupted_trace_fails_check() {
        let sys = system(&canonical::kv_string(0.5), 16);
        let mut trace = run(&sys, &sine_state(&sys), 0.01, 0.5, 1).unwrap();
        assert!(check_dissipation(&trace, 1e-8, 0.0));
        trace.samples[10].energy *= 1.001;
        assert!(!check_dissipation(&trace, 1e-8, 0.0));
        let sparse = run(&sys, &sine_state(&sys), 0.01, 0.5, 5).unwrap();
        assert!(!check_dissipation(&sparse, 1e-8, 0.0));
    }

    #[test]
    fn time_reversal_of_undamped_step() {
        let sys = system(&canonical::triangle(), 8);
        let n = sys.n();
        let s0 = State {
            u: (0..n).map(|i| (i as f64 * 0.3).sin()).collect(),
            v: (0..n).map(|i| (i as f64 * 0.7).cos()).collect(),
            t: 0.0,
        };
        // triangle has one damped side; use its undamped counterpart
        let undamped = DiscreteSystem {
            ka: SymMatrix::zeros(n),
            ..sys
        };
        let fwd = Stepper::new(&undamped, 0.01).unwrap();
        let bwd = Stepper::new(&undamped, -0.01).unwrap();
        let (s1, _) = fwd.step(&s0).unwrap();
        let (s2, _) = bwd.step(&s1).unwrap();
        for (a, b) in s2.u.iter().chain(&s2.v).zip(s0.u.iter().chain(&s0.v)) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    /// `exp(dt A) z` by a Taylor series; fine for `‖dt A‖` well below 1.
    fn expm_apply(a: &Mat<f64>, z: &[f64], dt: f64) -> Vec<f64> {
        let n = z.len();
        let mut term = z.to_vec();
        let mut sum = z.to_vec();
        for k in 1..60 {
            term = (0..n)
                .map(|i| (0..n).map(|j| a[(i, j)] * term[j]).sum::<f64>() * dt / k as f64)
                .collect();
            sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
        }
        sum
    }

    #[test]
    fn one_step_matches_matrix_exponential() {
        // 4 cells on a damped unit string: 3 DOFs
        let sys = system(&canonical::kv_string(0.3), 4);
        assert_eq!(sys.n(), 3);
        let a = dense_generator(&sys).unwrap();
        let s0 = State {
            u: vec![0.2, 1.0, -0.4],
            v: vec![0.5, 0.0, 0.1],
            t: 0.0,
        };
        let z0: Vec<f64> = s0.u.iter().chain(&s0.v).copied().collect();
        let err = |dt: f64| {
            let (s1, _) = Stepper::new(&sys, dt).unwrap().step(&s0).unwrap();
            let exact = expm_apply(&a, &z0, dt);
            s1.u.iter()
                .chain(&s1.v)
                .zip(&exact)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-3), err(5e-4));
        let order = (e1 / e2).log2();
        assert!(order > 2.7 && order < 3.3, "local order {order}");
    }

    #[test]
    fn bad_inputs() {
        let sys = system(&canonical::kv_string(0.5), 4);
        assert!(matches!(Stepper::new(&sys, 0.0), Err(SimulateError::InvalidTimeStep(_))));
        assert!(matches!(
            run(&sys, &State::zero(3), 0.1, 0.0, 1),
            Err(SimulateError::InvalidDuration(_))
        ));
        assert!(matches!(
            run(&sys, &State::zero(5), 0.1, 1.0, 1),
            Err(SimulateError::StateSize { .. })
        ));
    }

    #[test]
    fn norm_estimate_is_positive_and_bounded() {
        let sys = system(&canonical::kv_string(0.5), 16);
        let est = estimate_generator_norm(&sys).unwrap();
        let a = crate::discretize::weighted_generator(&sys).unwrap().b;
        let exact = a.singular_values().unwrap()[0];
        assert!(est > 0.0 && est <= exact * (1.0 + 1e-12));
    }
}
