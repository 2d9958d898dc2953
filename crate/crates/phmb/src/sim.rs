//! Time integration of the constrained dynamics: consistent initialization,
//! per-step saddle-point solves for accelerations and constraint reactions,
//! an implicit-midpoint stepper with coordinate projection against constraint
//! drift, and energy/power-balance accounting along the trajectory.
//!
//! Position constraints are index-reduced: the stepper enforces the hidden
//! constraint `c'(zeta) Z(zeta) w = 0` together with `A(zeta) w = 0` at the
//! step endpoint, then projects positions back onto `c = 0` and velocities
//! onto the constraint kernel (mass-weighted, so the projection is
//! energy-neutral to second order).
//!
//! Nonsmooth dissipation maps (sign-type friction) are integrated naively;
//! no solution-concept guarantee is made for them.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::linalg::{fd_matrix_directional, project_onto_kernel_weighted};
use crate::system::{Multipliers, PhSystem, PortValues, State};

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Implicit midpoint with endpoint constraint enforcement (default).
    ImplicitMidpoint,
    /// Classical explicit Runge-Kutta 4 on the index-reduced equations,
    /// with the same post-step projection.
    ExplicitRk4Projection,
}

impl std::str::FromStr for Scheme {
    type Err = PhError;
    fn from_str(s: &str) -> Result<Self, PhError> {
        match s {
            "implicit-midpoint" => Ok(Scheme::ImplicitMidpoint),
            "explicit-rk4" | "explicit-rk4-with-projection" => Ok(Scheme::ExplicitRk4Projection),
            other => Err(PhError::Param(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::ImplicitMidpoint => write!(f, "implicit-midpoint"),
            Scheme::ExplicitRk4Projection => write!(f, "explicit-rk4-with-projection"),
        }
    }
}

/// Integrator configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub projection_tol: f64,
    pub scheme: Scheme,
    /// Keep every n-th step in the trajectory (the final step is always
    /// kept). Residual maxima are tracked over all steps regardless.
    pub store_every: usize,
    /// Re-check the constraint-matrix rank along the trajectory and fail on
    /// a drop. Used for interconnected systems.
    pub check_rank_drift: bool,
    /// Relative eigenvalue floor for the positive-definiteness gate.
    pub mass_floor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            t_end: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            projection_tol: 1e-12,
            scheme: Scheme::ImplicitMidpoint,
            store_every: 1,
            check_rank_drift: false,
            mass_floor: 1e-10,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), PhError> {
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(PhError::Param(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !self.t_end.is_finite() || self.t_end < 0.0 {
            return Err(PhError::Param(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        if !self.newton_tol.is_finite()
            || self.newton_tol <= 0.0
            || !self.projection_tol.is_finite()
            || self.projection_tol <= 0.0
        {
            return Err(PhError::Param("tolerances must be positive".into()));
        }
        if self.store_every == 0 {
            return Err(PhError::Param("store_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Recorded trajectory: stored states with multipliers, port values, energy,
/// cumulative power-balance residual, and constraint residual norms, plus
/// running maxima over every accepted step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub multipliers: Vec<Multipliers>,
    pub ports: Vec<PortValues>,
    pub energy: Vec<f64>,
    /// Cumulative balance residual
    /// `H(t_k) - H(t_0) + integral(w^T tau_d - omega_ext^T tau_ext)`,
    /// trapezoidal quadrature on the step grid.
    pub balance_residual: Vec<f64>,
    /// Per stored state: (position-constraint norm, velocity-constraint norm).
    pub constraint_residual: Vec<(f64, f64)>,
    /// Max over all accepted steps of both constraint residual norms.
    pub max_constraint_residual: f64,
    /// Max over all accepted steps of the cumulative balance residual.
    pub max_balance_residual: f64,
}

impl Trajectory {
    fn new() -> Self {
        Trajectory {
            times: Vec::new(),
            states: Vec::new(),
            multipliers: Vec::new(),
            ports: Vec::new(),
            energy: Vec::new(),
            balance_residual: Vec::new(),
            constraint_residual: Vec::new(),
            max_constraint_residual: 0.0,
            max_balance_residual: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> Option<&State> {
        self.states.last()
    }
}

/// A simulation abort: the error, the step it happened at, and the partial
/// trajectory up to the last accepted step.
#[derive(Debug)]
pub struct SimFailure {
    pub error: PhError,
    pub step: usize,
    pub time: f64,
    pub partial: Trajectory,
}

impl std::fmt::Display for SimFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "step {} (t = {:.6}): {}",
            self.step, self.time, self.error
        )
    }
}

impl std::error::Error for SimFailure {}

/// Finite-difference step for the directional derivatives of constraint
/// matrices along the flow.
const CONSTRAINT_DERIVATIVE_STEP: f64 = 1e-7;

/// Number of dt-halvings attempted before a failing step aborts the run.
const MAX_HALVINGS: u32 = 6;

fn consistency_residuals(sys: &PhSystem, state: &State) -> Result<(f64, f64), PhError> {
    let ep = sys.eval_point(&state.zeta, &state.omega)?;
    let pos = if sys.k_pos > 0 {
        ep.pos_constraint.amax()
    } else {
        0.0
    };
    let mut vel = if sys.l_vel > 0 {
        (&ep.vel_constraint * &state.omega).amax()
    } else {
        0.0
    };
    if sys.k_pos > 0 {
        let hidden = (&ep.pos_constraint_jac * &ep.kinematics) * &state.omega;
        vel = vel.max(hidden.amax());
    }
    Ok((pos, vel))
}

/// Project a `(zeta, omega)` guess to a consistent state: Gauss-Newton
/// projection of the positions onto `c = 0` (minimal-norm updates) and
/// Euclidean projection of the velocities onto the kernel of the stacked
/// constraint matrix `[A(zeta); c'(zeta) Z(zeta)]`.
pub fn consistent_init(
    sys: &PhSystem,
    zeta_guess: &DVector<f64>,
    omega_guess: &DVector<f64>,
    tol: f64,
) -> Result<State, PhError> {
    let zeta = sys.project_to_position_constraints(zeta_guess, tol, 50)?;
    let ep = sys.eval_point(&zeta, omega_guess)?;
    let omega = if sys.l_vel + sys.k_pos > 0 {
        let mut j = DMatrix::zeros(sys.l_vel + sys.k_pos, sys.n_kin);
        j.view_mut((0, 0), (sys.l_vel, sys.n_kin))
            .copy_from(&ep.vel_constraint);
        if sys.k_pos > 0 {
            let hidden = &ep.pos_constraint_jac * &ep.kinematics;
            j.view_mut((sys.l_vel, 0), (sys.k_pos, sys.n_kin))
                .copy_from(&hidden);
        }
        crate::linalg::project_onto_kernel(&j, omega_guess)
    } else {
        omega_guess.clone()
    };
    Ok(State::new(sys, 0.0, zeta, omega))
}

/// Solve the instantaneous saddle-point system at a consistent state for the
/// accelerations and constraint reactions:
///
/// ```text
/// [ M        (c'Z)^T   A^T ] [w_dot ]   [ -Z^T grad_V - tau_d - G w + B tau_ext ]
/// [ c'Z      0         0   ] [lambda] = [ -d/dt(c'Z) w ]
/// [ A        0         0   ] [mu    ]   [ -dA/dt w     ]
/// ```
///
/// The constraint-matrix time derivatives are directional finite differences
/// along `zeta_dot = Z w`.
pub fn multiplier_solve(
    sys: &PhSystem,
    state: &State,
    tau_ext: &DVector<f64>,
) -> Result<(DVector<f64>, Multipliers), PhError> {
    let ep = sys.eval_point(&state.zeta, &state.omega)?;
    if tau_ext.len() != sys.m_ports {
        return Err(PhError::shape(
            "tau_ext",
            format!("{}", sys.m_ports),
            format!("{}", tau_ext.len()),
        ));
    }
    let (nk, k, l) = (sys.n_kin, sys.k_pos, sys.l_vel);
    let dim = nk + k + l;
    let zeta_dot = &ep.kinematics * &state.omega;

    let mut saddle = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    saddle.view_mut((0, 0), (nk, nk)).copy_from(&sys.mass);
    let force = -(ep.kinematics.transpose() * &ep.potential_grad)
        - &ep.dissipation
        - &ep.gyroscopic * &state.omega
        + &ep.port_directions * tau_ext;
    rhs.rows_mut(0, nk).copy_from(&force);

    if k > 0 {
        let hidden = &ep.pos_constraint_jac * &ep.kinematics;
        saddle
            .view_mut((0, nk), (nk, k))
            .copy_from(&hidden.transpose());
        saddle.view_mut((nk, 0), (k, nk)).copy_from(&hidden);
        let jac_fn = sys.pos_constraint_jac.clone();
        let kin_fn = sys.kinematics.clone();
        let hidden_fn = move |z: &DVector<f64>| jac_fn(z) * kin_fn(z);
        let dhidden = fd_matrix_directional(
            &hidden_fn,
            &state.zeta,
            &zeta_dot,
            CONSTRAINT_DERIVATIVE_STEP,
        );
        rhs.rows_mut(nk, k).copy_from(&(-(&dhidden * &state.omega)));
    }
    if l > 0 {
        saddle
            .view_mut((0, nk + k), (nk, l))
            .copy_from(&ep.vel_constraint.transpose());
        saddle
            .view_mut((nk + k, 0), (l, nk))
            .copy_from(&ep.vel_constraint);
        let a_fn = sys.vel_constraint.clone();
        let da = fd_matrix_directional(
            &move |z: &DVector<f64>| a_fn(z),
            &state.zeta,
            &zeta_dot,
            CONSTRAINT_DERIVATIVE_STEP,
        );
        rhs.rows_mut(nk + k, l).copy_from(&(-(&da * &state.omega)));
    }

    let lu = saddle.clone().lu();
    let sol = lu.solve(&rhs).ok_or_else(|| {
        let rank = crate::linalg::numerical_rank(&saddle, crate::linalg::DEFAULT_RANK_TOL);
        PhError::SingularSystem(format!(
            "saddle matrix rank {}/{dim} (gap {:.2e})",
            rank.rank, rank.gap
        ))
    })?;
    let omega_dot = sol.rows(0, nk).into_owned();
    let lambda = sol.rows(nk, k).into_owned();
    let mu = sol.rows(nk + k, l).into_owned();
    Ok((omega_dot, Multipliers { lambda, mu }))
}

/// Persistent stepper state: Cholesky factor of the mass matrix and a cached
/// Newton Jacobian reused across iterations and steps (chord strategy; the
/// Jacobian is rebuilt on stalls and step-size changes).
struct MidpointStepper<'a> {
    sys: &'a PhSystem,
    cfg: &'a SimConfig,
    mass_inv_at: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    cached_jacobian: Option<(f64, nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
}

struct StepOutcome {
    state: State,
    multipliers: Multipliers,
}

impl<'a> MidpointStepper<'a> {
    fn new(sys: &'a PhSystem, cfg: &'a SimConfig) -> Result<Self, PhError> {
        let chol = nalgebra::Cholesky::new(sys.mass.clone()).ok_or_else(|| {
            PhError::Param("mass matrix is not positive definite; cannot integrate".into())
        })?;
        Ok(MidpointStepper {
            sys,
            cfg,
            mass_inv_at: chol,
            cached_jacobian: None,
        })
    }

    fn unknown_dim(&self) -> usize {
        self.sys.n_pot + self.sys.n_kin + self.sys.k_pos + self.sys.l_vel
    }

    /// Midpoint residual for the unknowns `[zeta1; omega1; lambda; mu]`.
    fn residual(
        &self,
        state: &State,
        u: &DVector<f64>,
        h: f64,
        tau_mid: &DVector<f64>,
    ) -> Result<DVector<f64>, PhError> {
        let s = self.sys;
        let (np, nk, k, l) = (s.n_pot, s.n_kin, s.k_pos, s.l_vel);
        let zeta1 = u.rows(0, np).into_owned();
        let omega1 = u.rows(np, nk).into_owned();
        let lambda = u.rows(np + nk, k).into_owned();
        let mu = u.rows(np + nk + k, l).into_owned();

        let zeta_mid = (&state.zeta + &zeta1) * 0.5;
        let omega_mid = (&state.omega + &omega1) * 0.5;
        let ep = s.eval_point(&zeta_mid, &omega_mid)?;

        let mut r = DVector::zeros(self.unknown_dim());
        let kinematic = &zeta1 - &state.zeta - (&ep.kinematics * &omega_mid) * h;
        r.rows_mut(0, np).copy_from(&kinematic);

        let mut force = ep.kinematics.transpose() * &ep.potential_grad
            + &ep.dissipation
            + &ep.gyroscopic * &omega_mid
            - &ep.port_directions * tau_mid;
        if k > 0 {
            force += ep.kinematics.transpose() * (ep.pos_constraint_jac.transpose() * &lambda);
        }
        if l > 0 {
            force += ep.vel_constraint.transpose() * &mu;
        }
        let kinetic = &s.mass * (&omega1 - &state.omega) + force * h;
        r.rows_mut(np, nk).copy_from(&kinetic);

        s.guard(&zeta1)?;
        if k > 0 {
            let jac1 = (s.pos_constraint_jac)(&zeta1);
            let z1 = (s.kinematics)(&zeta1);
            let hidden = (&jac1 * &z1) * &omega1;
            r.rows_mut(np + nk, k).copy_from(&hidden);
        }
        if l > 0 {
            let a1 = (s.vel_constraint)(&zeta1);
            r.rows_mut(np + nk + k, l).copy_from(&(&a1 * &omega1));
        }
        Ok(r)
    }

    fn build_jacobian(
        &mut self,
        state: &State,
        u: &DVector<f64>,
        h: f64,
        tau_mid: &DVector<f64>,
        base: &DVector<f64>,
    ) -> Result<(), PhError> {
        let dim = self.unknown_dim();
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let step = 1e-7 * (1.0 + u[j].abs());
            let mut up = u.clone();
            up[j] += step;
            let rp = self.residual(state, &up, h, tau_mid)?;
            jac.column_mut(j).copy_from(&((rp - base) / step));
        }
        let lu = jac.lu();
        self.cached_jacobian = Some((h, lu));
        Ok(())
    }

    /// One implicit-midpoint step of size `h`, followed by coordinate
    /// projection back onto the constraint set.
    fn step(
        &mut self,
        state: &State,
        tau_ext_fn: &dyn Fn(f64) -> DVector<f64>,
        h: f64,
    ) -> Result<StepOutcome, PhError> {
        let s = self.sys;
        let (np, nk, k, l) = (s.n_pot, s.n_kin, s.k_pos, s.l_vel);
        let tau_mid = tau_ext_fn(state.t + 0.5 * h);
        if tau_mid.len() != s.m_ports {
            return Err(PhError::shape(
                "tau_ext(t)",
                format!("{}", s.m_ports),
                format!("{}", tau_mid.len()),
            ));
        }

        // predictor: explicit advance of positions, frozen velocities
        let ep0 = s.eval_point(&state.zeta, &state.omega)?;
        let mut u = DVector::zeros(self.unknown_dim());
        u.rows_mut(0, np)
            .copy_from(&(&state.zeta + (&ep0.kinematics * &state.omega) * h));
        u.rows_mut(np, nk).copy_from(&state.omega);

        if let Some((cached_h, _)) = &self.cached_jacobian {
            if (*cached_h - h).abs() > 1e-15 * h.max(*cached_h) {
                self.cached_jacobian = None;
            }
        }

        let tol = self.cfg.newton_tol;
        let mut r = self.residual(state, &u, h, &tau_mid)?;
        let mut corrections = 0usize;
        let mut polish_done = false;
        let mut iters_with_jac = 0usize;
        let mut prev_norm = f64::INFINITY;
        loop {
            let rnorm = r.amax();
            if !rnorm.is_finite() {
                return Err(PhError::NoConvergence {
                    iterations: corrections,
                    residual: rnorm,
                    context: "midpoint step".into(),
                });
            }
            if rnorm <= tol && corrections >= 1 {
                if polish_done || rnorm <= 1e-3 * tol {
                    break;
                }
                polish_done = true;
            } else if corrections >= self.cfg.newton_max_iter {
                return Err(PhError::NoConvergence {
                    iterations: corrections,
                    residual: rnorm,
                    context: "midpoint step".into(),
                });
            }
            let stalled = iters_with_jac >= 1 && rnorm > 0.5 * prev_norm && rnorm > tol;
            if self.cached_jacobian.is_none() || stalled || iters_with_jac >= 8 {
                self.build_jacobian(state, &u, h, &tau_mid, &r)?;
                iters_with_jac = 0;
            }
            let (_, lu) = self.cached_jacobian.as_ref().unwrap();
            let delta = lu.solve(&(-&r)).ok_or_else(|| {
                PhError::SingularSystem("midpoint Newton matrix is singular".into())
            })?;
            u += delta;
            prev_norm = rnorm;
            corrections += 1;
            iters_with_jac += 1;
            r = self.residual(state, &u, h, &tau_mid)?;
        }

        let mut zeta1 = u.rows(0, np).into_owned();
        let mut omega1 = u.rows(np, nk).into_owned();
        let lambda = u.rows(np + nk, k).into_owned();
        let mu = u.rows(np + nk + k, l).into_owned();

        // drift elimination
        if k > 0 {
            zeta1 = s.project_to_position_constraints(&zeta1, self.cfg.projection_tol, 50)?;
        }
        if k + l > 0 {
            let a1 = (s.vel_constraint)(&zeta1);
            let mut j = DMatrix::zeros(l + k, nk);
            j.view_mut((0, 0), (l, nk)).copy_from(&a1);
            if k > 0 {
                let hidden = (s.pos_constraint_jac)(&zeta1) * (s.kinematics)(&zeta1);
                j.view_mut((l, 0), (k, nk)).copy_from(&hidden);
            }
            let minv_jt = self.mass_inv_at.solve(&j.transpose());
            omega1 = project_onto_kernel_weighted(&j, &minv_jt, &omega1)?;
        }

        Ok(StepOutcome {
            state: State::new(s, state.t + h, zeta1, omega1),
            multipliers: Multipliers { lambda, mu },
        })
    }

    /// Explicit RK4 on the index-reduced equations, multipliers from the
    /// instantaneous saddle solve, then the same projection as the midpoint.
    fn step_rk4(
        &mut self,
        state: &State,
        tau_ext_fn: &dyn Fn(f64) -> DVector<f64>,
        h: f64,
    ) -> Result<StepOutcome, PhError> {
        let s = self.sys;
        let eval = |t: f64,
                    zeta: &DVector<f64>,
                    omega: &DVector<f64>|
         -> Result<(DVector<f64>, DVector<f64>), PhError> {
            let st = State::new(s, t, zeta.clone(), omega.clone());
            let (omega_dot, _) = multiplier_solve(s, &st, &tau_ext_fn(t))?;
            let zeta_dot = (s.kinematics)(zeta) * omega;
            Ok((zeta_dot, omega_dot))
        };
        let (k1z, k1w) = eval(state.t, &state.zeta, &state.omega)?;
        let (k2z, k2w) = eval(
            state.t + 0.5 * h,
            &(&state.zeta + &k1z * (0.5 * h)),
            &(&state.omega + &k1w * (0.5 * h)),
        )?;
        let (k3z, k3w) = eval(
            state.t + 0.5 * h,
            &(&state.zeta + &k2z * (0.5 * h)),
            &(&state.omega + &k2w * (0.5 * h)),
        )?;
        let (k4z, k4w) = eval(
            state.t + h,
            &(&state.zeta + &k3z * h),
            &(&state.omega + &k3w * h),
        )?;
        let mut zeta1 = &state.zeta + (k1z + &k2z * 2.0 + &k3z * 2.0 + k4z) * (h / 6.0);
        let mut omega1 = &state.omega + (k1w + &k2w * 2.0 + &k3w * 2.0 + k4w) * (h / 6.0);

        if s.k_pos > 0 {
            zeta1 = s.project_to_position_constraints(&zeta1, self.cfg.projection_tol, 50)?;
        }
        if s.k_pos + s.l_vel > 0 {
            let a1 = (s.vel_constraint)(&zeta1);
            let mut j = DMatrix::zeros(s.l_vel + s.k_pos, s.n_kin);
            j.view_mut((0, 0), (s.l_vel, s.n_kin)).copy_from(&a1);
            if s.k_pos > 0 {
                let hidden = (s.pos_constraint_jac)(&zeta1) * (s.kinematics)(&zeta1);
                j.view_mut((s.l_vel, 0), (s.k_pos, s.n_kin))
                    .copy_from(&hidden);
            }
            let minv_jt = self.mass_inv_at.solve(&j.transpose());
            omega1 = project_onto_kernel_weighted(&j, &minv_jt, &omega1)?;
        }
        let new_state = State::new(s, state.t + h, zeta1, omega1);
        let (_, multipliers) = multiplier_solve(s, &new_state, &tau_ext_fn(new_state.t))?;
        Ok(StepOutcome {
            state: new_state,
            multipliers,
        })
    }

    fn advance(
        &mut self,
        state: &State,
        tau_ext_fn: &dyn Fn(f64) -> DVector<f64>,
        h: f64,
    ) -> Result<StepOutcome, PhError> {
        match self.cfg.scheme {
            Scheme::ImplicitMidpoint => self.step(state, tau_ext_fn, h),
            Scheme::ExplicitRk4Projection => self.step_rk4(state, tau_ext_fn, h),
        }
    }

    /// Advance by the full grid step `dt`, halving the internal step on
    /// failure down to `dt / 2^6` before giving up.
    fn advance_with_rejection(
        &mut self,
        state: &State,
        tau_ext_fn: &dyn Fn(f64) -> DVector<f64>,
        dt: f64,
    ) -> Result<StepOutcome, PhError> {
        let mut last_err = None;
        for halving in 0..=MAX_HALVINGS {
            let n_sub = 1usize << halving;
            let h = dt / n_sub as f64;
            let mut current = state.clone();
            let mut outcome = None;
            let mut failed = false;
            for _ in 0..n_sub {
                match self.advance(&current, tau_ext_fn, h) {
                    Ok(out) => {
                        current = out.state.clone();
                        outcome = Some(out);
                    }
                    Err(e) => {
                        last_err = Some(e);
                        failed = true;
                        self.cached_jacobian = None;
                        break;
                    }
                }
            }
            if !failed {
                return Ok(outcome.expect("at least one sub-step"));
            }
        }
        Err(last_err.expect("failure recorded"))
    }
}

/// One integration step from a consistent state. Convenience wrapper that
/// does not reuse solver state across calls; `simulate` is the efficient
/// path for full trajectories.
pub fn step(
    sys: &PhSystem,
    state: &State,
    tau_ext_fn: &dyn Fn(f64) -> DVector<f64>,
    cfg: &SimConfig,
) -> Result<(State, Multipliers), PhError> {
    cfg.validate()?;
    let mut stepper = MidpointStepper::new(sys, cfg)?;
    let out = stepper.advance(state, tau_ext_fn, cfg.dt)?;
    Ok((out.state, out.multipliers))
}

/// Power leaving the energy storage at a state:
/// `w^T tau_d(zeta, w) - omega_ext^T tau_ext`.
fn outgoing_power(sys: &PhSystem, state: &State, tau_ext: &DVector<f64>) -> Result<f64, PhError> {
    let ep = sys.eval_point(&state.zeta, &state.omega)?;
    let dissipated = state.omega.dot(&ep.dissipation);
    let omega_ext = ep.port_directions.transpose() * &state.omega;
    Ok(dissipated - omega_ext.dot(tau_ext))
}

/// Integrate from a consistent initial state to `cfg.t_end`, recording
/// states, multipliers, port values, energy, the cumulative power-balance
/// residual, and constraint residual norms. On failure the partial
/// trajectory up to the last accepted step is returned inside the error.
pub fn simulate(
    sys: &PhSystem,
    init: &State,
    tau_ext_fn: &dyn Fn(f64) -> DVector<f64>,
    cfg: &SimConfig,
) -> Result<Trajectory, Box<SimFailure>> {
    let fail = |error: PhError, step: usize, time: f64, partial: Trajectory| {
        Box::new(SimFailure {
            error,
            step,
            time,
            partial,
        })
    };

    let mut traj = Trajectory::new();
    if let Err(e) = cfg.validate() {
        return Err(fail(e, 0, init.t, traj));
    }

    // positive-definiteness gate for the integrator
    let (_, min_eig) = sys.mass_spectrum();
    let mass_scale = crate::linalg::max_abs(&sys.mass).max(1.0);
    if min_eig <= cfg.mass_floor * mass_scale {
        return Err(fail(
            PhError::Param(format!(
                "mass matrix must be positive definite for simulation (min eigenvalue {min_eig:.3e})"
            )),
            0,
            init.t,
            traj,
        ));
    }

    // the initial state must already be consistent
    let (pos0, vel0) = match consistency_residuals(sys, init) {
        Ok(r) => r,
        Err(e) => return Err(fail(e, 0, init.t, traj)),
    };
    let consistency_gate = 1e-8 * (1.0 + init.omega.amax());
    if pos0 > consistency_gate || vel0 > consistency_gate {
        return Err(fail(
            PhError::Constraint(format!(
                "initial state is not consistent (|c| = {pos0:.3e}, |Aw| = {vel0:.3e}); run consistent_init first"
            )),
            0,
            init.t,
            traj,
        ));
    }

    let mut stepper = match MidpointStepper::new(sys, cfg) {
        Ok(s) => s,
        Err(e) => return Err(fail(e, 0, init.t, traj)),
    };

    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let h0 = sys
        .hamiltonian(init)
        .map_err(|e| fail(e, 0, init.t, Trajectory::new()))?;
    let tau0 = tau_ext_fn(init.t);
    let init_mults = match multiplier_solve(sys, init, &tau0) {
        Ok((_, m)) => m,
        Err(e) => return Err(fail(e, 0, init.t, traj)),
    };
    let rank0 = if cfg.check_rank_drift {
        let a0 = (sys.vel_constraint)(&init.zeta);
        crate::linalg::numerical_rank(&a0, crate::linalg::DEFAULT_RANK_TOL).rank
    } else {
        0
    };

    let record = |traj: &mut Trajectory,
                  state: &State,
                  mults: &Multipliers,
                  tau: &DVector<f64>,
                  energy: f64,
                  balance: f64,
                  constraint: (f64, f64)| {
        traj.times.push(state.t);
        traj.states.push(state.clone());
        traj.multipliers.push(mults.clone());
        let omega_ext = (sys.port_directions)(&state.zeta).transpose() * &state.omega;
        traj.ports.push(PortValues {
            tau_ext: tau.clone(),
            omega_ext,
        });
        traj.energy.push(energy);
        traj.balance_residual.push(balance);
        traj.constraint_residual.push(constraint);
    };

    record(&mut traj, init, &init_mults, &tau0, h0, 0.0, (pos0, vel0));

    let mut state = init.clone();
    let mut power_integral = 0.0;
    let mut prev_power = match outgoing_power(sys, &state, &tau0) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, 0, init.t, traj)),
    };

    for k in 1..=n_steps {
        let outcome = match stepper.advance_with_rejection(&state, tau_ext_fn, cfg.dt) {
            Ok(o) => o,
            Err(e) => return Err(fail(e, k, state.t, traj)),
        };
        state = outcome.state;
        // grid times rebuilt from the index so roundoff does not accumulate
        state.t = init.t + k as f64 * cfg.dt;

        let tau = tau_ext_fn(state.t);
        let power = match outgoing_power(sys, &state, &tau) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, k, state.t, traj)),
        };
        power_integral += 0.5 * cfg.dt * (prev_power + power);
        prev_power = power;

        let energy = match sys.hamiltonian(&state) {
            Ok(h) => h,
            Err(e) => return Err(fail(e, k, state.t, traj)),
        };
        let balance = energy - h0 + power_integral;
        let constraint = match consistency_residuals(sys, &state) {
            Ok(c) => c,
            Err(e) => return Err(fail(e, k, state.t, traj)),
        };
        traj.max_constraint_residual = traj
            .max_constraint_residual
            .max(constraint.0)
            .max(constraint.1);
        traj.max_balance_residual = traj.max_balance_residual.max(balance.abs());

        if cfg.check_rank_drift {
            let a = (sys.vel_constraint)(&state.zeta);
            let rank = crate::linalg::numerical_rank(&a, crate::linalg::DEFAULT_RANK_TOL).rank;
            if rank != rank0 {
                return Err(fail(
                    PhError::Rank(format!(
                        "constraint-matrix rank dropped from {rank0} to {rank} along the trajectory"
                    )),
                    k,
                    state.t,
                    traj,
                ));
            }
        }

        if k % cfg.store_every == 0 || k == n_steps {
            record(
                &mut traj,
                &state,
                &outcome.multipliers,
                &tau,
                energy,
                balance,
                constraint,
            );
        }
    }

    Ok(traj)
}

/// Zero external effort for a system's port count.
pub fn free_effort(sys: &PhSystem) -> impl Fn(f64) -> DVector<f64> {
    let m = sys.m_ports;
    move |_t: f64| DVector::zeros(m)
}

fn fmt_field(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a trajectory as CSV: header
/// `t,zeta_0..,omega_0..,lambda_0..,mu_0..,H,balance_residual,constraint_residual`,
/// one row per stored step, floating point with 17 significant digits.
pub fn write_csv<W: std::io::Write>(
    traj: &Trajectory,
    sys: &PhSystem,
    out: &mut W,
) -> std::io::Result<()> {
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..sys.n_pot).map(|i| format!("zeta_{i}")));
    header.extend((0..sys.n_kin).map(|i| format!("omega_{i}")));
    header.extend((0..sys.k_pos).map(|i| format!("lambda_{i}")));
    header.extend((0..sys.l_vel).map(|i| format!("mu_{i}")));
    header.push("H".into());
    header.push("balance_residual".into());
    header.push("constraint_residual".into());
    writeln!(out, "{}", header.join(","))?;

    for i in 0..traj.len() {
        let mut row: Vec<String> = Vec::with_capacity(header.len());
        row.push(fmt_field(traj.times[i]));
        row.extend(traj.states[i].zeta.iter().map(|x| fmt_field(*x)));
        row.extend(traj.states[i].omega.iter().map(|x| fmt_field(*x)));
        row.extend(traj.multipliers[i].lambda.iter().map(|x| fmt_field(*x)));
        row.extend(traj.multipliers[i].mu.iter().map(|x| fmt_field(*x)));
        row.push(fmt_field(traj.energy[i]));
        row.push(fmt_field(traj.balance_residual[i]));
        let (pos, vel) = traj.constraint_residual[i];
        row.push(fmt_field(pos.max(vel)));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn frozen_first_coordinate() -> PhSystem {
        // two Cartesian coordinates, first velocity frozen by A = [1 0]
        PhSystem::cartesian(2)
            .mass(DMatrix::identity(2, 2))
            .velocity_constraints(1, |_: &DVector<f64>| {
                DMatrix::from_row_slice(1, 2, &[1.0, 0.0])
            })
            .potential(
                |z: &DVector<f64>| 0.5 * (z[0] * z[0] + z[1] * z[1]),
                |z: &DVector<f64>| z.clone(),
            )
            .build()
            .unwrap()
    }

    fn pendulum(m: f64, g: f64, len: f64) -> PhSystem {
        PhSystem::cartesian(2)
            .mass(DMatrix::from_diagonal_element(2, 2, m))
            .potential(
                move |z: &DVector<f64>| m * g * z[1],
                move |_z: &DVector<f64>| DVector::from_row_slice(&[0.0, m * g]),
            )
            .position_constraints(
                1,
                move |z: &DVector<f64>| {
                    DVector::from_element(1, 0.5 * (z[0] * z[0] + z[1] * z[1] - len * len))
                },
                |z: &DVector<f64>| DMatrix::from_row_slice(1, 2, &[z[0], z[1]]),
            )
            .build()
            .unwrap()
    }

    fn pendulum_state(sys: &PhSystem, len: f64, theta: f64, theta_dot: f64) -> State {
        let zeta = DVector::from_row_slice(&[len * theta.sin(), -len * theta.cos()]);
        let omega = DVector::from_row_slice(&[
            len * theta_dot * theta.cos(),
            len * theta_dot * theta.sin(),
        ]);
        State::new(sys, 0.0, zeta, omega)
    }

    #[test]
    fn consistent_init_projects_velocity_euclidean() {
        let sys = frozen_first_coordinate();
        let state = consistent_init(
            &sys,
            &DVector::from_row_slice(&[0.1, 0.2]),
            &DVector::from_row_slice(&[1.0, 0.3]),
            1e-12,
        )
        .unwrap();
        assert_relative_eq!(state.omega[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(state.omega[1], 0.3, epsilon = 1e-14);
    }

    #[test]
    fn consistent_init_without_constraints_is_identity() {
        let sys = PhSystem::cartesian(2)
            .mass(DMatrix::identity(2, 2))
            .build()
            .unwrap();
        let z = DVector::from_row_slice(&[0.4, -0.1]);
        let w = DVector::from_row_slice(&[2.0, 3.0]);
        let state = consistent_init(&sys, &z, &w, 1e-12).unwrap();
        assert_eq!(state.zeta, z);
        assert_eq!(state.omega, w);
    }

    #[test]
    fn pendulum_multiplier_matches_analytic_tension() {
        let (m, g, len) = (1.3, 9.81, 0.7);
        let sys = pendulum(m, g, len);
        for &(theta, theta_dot) in &[(0.0, 1.0), (0.5, -0.8), (1.2, 0.0), (-0.9, 2.0)] {
            let state = pendulum_state(&sys, len, theta, theta_dot);
            let (_, mults) = multiplier_solve(&sys, &state, &DVector::zeros(0)).unwrap();
            // tension T = m g cos(theta) + m len theta_dot^2, lambda = T / len
            let expected = (m * g * theta.cos() + m * len * theta_dot * theta_dot) / len;
            assert_relative_eq!(
                mults.lambda[0],
                expected,
                epsilon = 1e-6,
                max_relative = 1e-6
            );
        }
    }

    #[test]
    fn multiplier_solve_at_equilibrium_gives_zero_acceleration() {
        let sys = frozen_first_coordinate();
        let state = State::new(&sys, 0.0, DVector::zeros(2), DVector::zeros(2));
        let (omega_dot, mults) = multiplier_solve(&sys, &state, &DVector::zeros(0)).unwrap();
        assert!(omega_dot.amax() < 1e-14);
        assert!(mults.mu.amax() < 1e-14);
    }

    #[test]
    fn frozen_coordinate_stays_frozen_over_a_run() {
        let sys = frozen_first_coordinate();
        let init = consistent_init(
            &sys,
            &DVector::from_row_slice(&[0.3, 0.5]),
            &DVector::from_row_slice(&[0.9, 0.7]),
            1e-12,
        )
        .unwrap();
        let cfg = SimConfig {
            dt: 1e-2,
            t_end: 2.0,
            ..SimConfig::default()
        };
        let traj = simulate(&sys, &init, &free_effort(&sys), &cfg).unwrap();
        for s in &traj.states {
            assert!(s.omega[0].abs() < 1e-11);
        }
        assert_relative_eq!(traj.final_state().unwrap().zeta[0], 0.3, epsilon = 1e-9);
    }

    #[test]
    fn midpoint_step_is_consistent_with_instantaneous_solve() {
        let sys = pendulum(1.0, 9.81, 1.0);
        let state = pendulum_state(&sys, 1.0, 0.6, 0.4);
        let (omega_dot, _) = multiplier_solve(&sys, &state, &DVector::zeros(0)).unwrap();
        let zeta_dot = &state.omega;
        let mut errs = Vec::new();
        for &h in &[1e-3, 5e-4] {
            let cfg = SimConfig {
                dt: h,
                ..SimConfig::default()
            };
            let (next, _) = step(&sys, &state, &|_| DVector::zeros(0), &cfg).unwrap();
            let zeta_taylor = &state.zeta + zeta_dot * h;
            let omega_taylor = &state.omega + &omega_dot * h;
            let err = (next.zeta - zeta_taylor)
                .amax()
                .max((next.omega - omega_taylor).amax());
            errs.push(err);
        }
        // first-order Taylor error shrinks at least quadratically
        assert!(errs[1] < errs[0] / 3.0, "errors {errs:?}");
    }

    #[test]
    fn pendulum_energy_and_constraint_are_preserved() {
        let sys = pendulum(1.0, 9.81, 1.0);
        let init = pendulum_state(&sys, 1.0, 1.0, 0.0);
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 5.0,
            newton_tol: 1e-12,
            ..SimConfig::default()
        };
        let traj = simulate(&sys, &init, &free_effort(&sys), &cfg).unwrap();
        assert!(
            traj.max_constraint_residual < 1e-11,
            "{}",
            traj.max_constraint_residual
        );
        let h0 = traj.energy[0];
        for h in &traj.energy {
            assert!(
                (h - h0).abs() < 1e-6 * (1.0 + h0.abs()),
                "energy drift {}",
                (h - h0).abs()
            );
        }
    }

    #[test]
    fn dissipative_run_has_nonincreasing_energy() {
        let sys = PhSystem::cartesian(1)
            .mass(DMatrix::identity(1, 1))
            .potential(
                |z: &DVector<f64>| 0.5 * 4.0 * z[0] * z[0],
                |z: &DVector<f64>| DVector::from_element(1, 4.0 * z[0]),
            )
            .dissipation(|_, w: &DVector<f64>| w * 0.3)
            .build()
            .unwrap();
        let init = State::new(&sys, 0.0, DVector::from_element(1, 1.0), DVector::zeros(1));
        let cfg = SimConfig {
            dt: 1e-3,
            t_end: 3.0,
            ..SimConfig::default()
        };
        let traj = simulate(&sys, &init, &free_effort(&sys), &cfg).unwrap();
        for w in traj.energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        // trapezoidal balance accounting closes
        assert!(
            traj.max_balance_residual < 1e-5,
            "{}",
            traj.max_balance_residual
        );
    }

    #[test]
    fn rk4_matches_midpoint_on_smooth_problem() {
        let sys = pendulum(1.0, 9.81, 1.0);
        let init = pendulum_state(&sys, 1.0, 0.4, 0.2);
        let mid_cfg = SimConfig {
            dt: 1e-3,
            t_end: 1.0,
            ..SimConfig::default()
        };
        let rk4_cfg = SimConfig {
            scheme: Scheme::ExplicitRk4Projection,
            ..mid_cfg.clone()
        };
        let a = simulate(&sys, &init, &free_effort(&sys), &mid_cfg).unwrap();
        let b = simulate(&sys, &init, &free_effort(&sys), &rk4_cfg).unwrap();
        let za = &a.final_state().unwrap().zeta;
        let zb = &b.final_state().unwrap().zeta;
        assert!((za - zb).amax() < 1e-6);
    }

    #[test]
    fn inconsistent_init_is_rejected() {
        let sys = pendulum(1.0, 9.81, 1.0);
        let bad = State::new(
            &sys,
            0.0,
            DVector::from_row_slice(&[0.9, 0.9]),
            DVector::zeros(2),
        );
        let err = simulate(&sys, &bad, &free_effort(&sys), &SimConfig::default()).unwrap_err();
        assert!(matches!(err.error, PhError::Constraint(_)));
    }

    #[test]
    fn guard_violation_mid_run_reports_domain_error_with_partial_trajectory() {
        let sys = PhSystem::builder(1, 1)
            .mass(DMatrix::identity(1, 1))
            .domain_guard(|z: &DVector<f64>| z[0] < 0.5)
            .build()
            .unwrap();
        let init = State::new(&sys, 0.0, DVector::zeros(1), DVector::from_element(1, 1.0));
        let cfg = SimConfig {
            dt: 1e-2,
            t_end: 2.0,
            ..SimConfig::default()
        };
        let err = simulate(&sys, &init, &free_effort(&sys), &cfg).unwrap_err();
        assert!(matches!(err.error, PhError::Domain(_)));
        assert!(err.partial.len() > 10);
        assert!(err.step > 0);
    }

    #[test]
    fn csv_has_pinned_header_and_row_count() {
        let sys = pendulum(1.0, 9.81, 1.0);
        let init = pendulum_state(&sys, 1.0, 0.3, 0.0);
        let cfg = SimConfig {
            dt: 1e-2,
            t_end: 0.1,
            ..SimConfig::default()
        };
        let traj = simulate(&sys, &init, &free_effort(&sys), &cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&traj, &sys, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "t,zeta_0,zeta_1,omega_0,omega_1,lambda_0,H,balance_residual,constraint_residual"
        );
        assert_eq!(lines.len(), 1 + 11);
    }

    #[test]
    fn singular_mass_is_rejected_for_simulation() {
        let sys = PhSystem::cartesian(2)
            .mass(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]))
            .build()
            .unwrap();
        let init = State::new(&sys, 0.0, DVector::zeros(2), DVector::zeros(2));
        let err = simulate(&sys, &init, &free_effort(&sys), &SimConfig::default()).unwrap_err();
        assert!(matches!(err.error, PhError::Param(_)));
    }
}
