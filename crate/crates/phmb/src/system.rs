//! System data model: a rigid multibody system in redundant coordinates with
//! position and velocity constraints, gyroscopic forces, dissipation, and
//! external power ports.
//!
//! The dynamics evaluated by [`PhSystem::residual`] are
//!
//! ```text
//! zeta_dot           = Z(zeta) w
//! M w_dot            = -Z^T grad_V - Z^T c'(zeta)^T lambda - tau_d(zeta, w)
//!                      - G(M w) w - A(zeta)^T mu + B(zeta) tau_ext
//! 0                  = c(zeta)
//! 0                  = A(zeta) w
//! omega_ext          = B(zeta)^T w
//! ```
//!
//! with `w` the velocity coordinates, `lambda`/`mu` the position/velocity
//! constraint reactions, and `tau_ext` the external port efforts (positive
//! `tau_ext` aligned with positive port flow feeds power in). The total
//! energy `H = 1/2 w^T M w + V(zeta)` then obeys
//! `dH/dt = -w^T tau_d + omega_ext^T tau_ext`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;

/// Position-dependent matrix field, e.g. kinematics or constraint matrices.
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
/// Position-dependent vector field, e.g. constraint values or gradients.
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Position-dependent scalar field (potential energy).
pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
/// Dissipation force as a function of position and velocity.
pub type DissipationFn = Arc<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
/// Membership test for the open set of admissible positions.
pub type DomainGuard = Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>;

/// A port-Hamiltonian multibody system in redundant coordinates.
///
/// Immutable after construction; all function fields are shared closures, so
/// cloning is cheap and the system can be used from several threads.
#[derive(Clone)]
pub struct PhSystem {
    /// Dimension of the redundant position coordinates.
    pub n_pot: usize,
    /// Dimension of the velocity coordinates (and momenta).
    pub n_kin: usize,
    /// Number of external port channels.
    pub m_ports: usize,
    /// Number of position constraints (rows of `c`).
    pub k_pos: usize,
    /// Number of velocity constraints (rows of `A`).
    pub l_vel: usize,
    /// Kinematics map `Z(zeta)`, `n_pot x n_kin`.
    pub kinematics: MatrixFn,
    /// Constant symmetric mass matrix, `n_kin x n_kin`.
    pub mass: DMatrix<f64>,
    /// Gyroscopic matrix `G(gamma)`, skew-symmetric, argument is the momenta.
    pub gyroscopic: MatrixFn,
    /// Velocity-constraint matrix `A(zeta)`, `l_vel x n_kin`.
    pub vel_constraint: MatrixFn,
    /// External-port direction matrix `B(zeta)`, `n_kin x m_ports`.
    pub port_directions: MatrixFn,
    /// Position constraints `c(zeta)`, length `k_pos`.
    pub pos_constraint: VectorFn,
    /// Jacobian `c'(zeta)`, `k_pos x n_pot`.
    pub pos_constraint_jac: MatrixFn,
    /// Potential energy.
    pub potential: ScalarFn,
    /// Gradient of the potential energy, length `n_pot`.
    pub potential_grad: VectorFn,
    /// Dissipation force `tau_d(zeta, w)`, length `n_kin`.
    pub dissipation: DissipationFn,
    /// Membership test for the admissible open position set.
    pub domain_guard: DomainGuard,
    /// Human-readable port names, length `m_ports`. Documentation only.
    pub port_labels: Vec<String>,
}

impl std::fmt::Debug for PhSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhSystem")
            .field("n_pot", &self.n_pot)
            .field("n_kin", &self.n_kin)
            .field("m_ports", &self.m_ports)
            .field("k_pos", &self.k_pos)
            .field("l_vel", &self.l_vel)
            .field("port_labels", &self.port_labels)
            .finish()
    }
}

/// State of a system: time, positions, velocities, and derived momenta.
#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub zeta: DVector<f64>,
    pub omega: DVector<f64>,
    /// Momenta `gamma = M w`, kept in sync by the constructor.
    pub gamma: DVector<f64>,
}

impl State {
    pub fn new(sys: &PhSystem, t: f64, zeta: DVector<f64>, omega: DVector<f64>) -> Self {
        let gamma = &sys.mass * &omega;
        State {
            t,
            zeta,
            omega,
            gamma,
        }
    }
}

/// External port values: efforts applied at the ports and the conjugate flows.
#[derive(Debug, Clone)]
pub struct PortValues {
    pub tau_ext: DVector<f64>,
    pub omega_ext: DVector<f64>,
}

/// Constraint reactions: `lambda` for position constraints, `mu` for velocity
/// constraints.
#[derive(Debug, Clone)]
pub struct Multipliers {
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
}

impl Multipliers {
    pub fn zeros(sys: &PhSystem) -> Self {
        Multipliers {
            lambda: DVector::zeros(sys.k_pos),
            mu: DVector::zeros(sys.l_vel),
        }
    }
}

/// Every matrix- and vector-valued field of a system evaluated at one point,
/// with shapes checked.
#[derive(Debug, Clone)]
pub struct EvaluatedPoint {
    pub zeta: DVector<f64>,
    pub omega: DVector<f64>,
    pub gamma: DVector<f64>,
    pub kinematics: DMatrix<f64>,
    pub gyroscopic: DMatrix<f64>,
    pub vel_constraint: DMatrix<f64>,
    pub port_directions: DMatrix<f64>,
    pub pos_constraint: DVector<f64>,
    pub pos_constraint_jac: DMatrix<f64>,
    pub potential: f64,
    pub potential_grad: DVector<f64>,
    pub dissipation: DVector<f64>,
}

fn check_mat(
    m: DMatrix<f64>,
    rows: usize,
    cols: usize,
    context: &str,
) -> Result<DMatrix<f64>, PhError> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(PhError::shape(
            context,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m)
}

fn check_vec(v: DVector<f64>, len: usize, context: &str) -> Result<DVector<f64>, PhError> {
    if v.len() != len {
        return Err(PhError::shape(
            context,
            format!("{len}"),
            format!("{}", v.len()),
        ));
    }
    Ok(v)
}

impl PhSystem {
    /// Start building a system with the given coordinate dimensions.
    pub fn builder(n_pot: usize, n_kin: usize) -> PhSystemBuilder {
        PhSystemBuilder::new(n_pot, n_kin)
    }

    /// Builder for a point-mass system in Cartesian coordinates: `n` position
    /// and velocity coordinates, identity kinematics, no gyroscopic forces.
    pub fn cartesian(n: usize) -> PhSystemBuilder {
        PhSystemBuilder::new(n, n)
    }

    pub fn guard(&self, zeta: &DVector<f64>) -> Result<(), PhError> {
        if zeta.len() != self.n_pot {
            return Err(PhError::shape(
                "zeta",
                format!("{}", self.n_pot),
                format!("{}", zeta.len()),
            ));
        }
        if !(self.domain_guard)(zeta) {
            let coords: Vec<String> = zeta.iter().map(|x| format!("{x:.6}")).collect();
            return Err(PhError::Domain(format!("zeta = [{}]", coords.join(", "))));
        }
        Ok(())
    }

    /// Evaluate every field of the model at `(zeta, omega)`, checking shapes.
    /// The momenta `gamma = M omega` are computed once and passed to `G`.
    pub fn eval_point(
        &self,
        zeta: &DVector<f64>,
        omega: &DVector<f64>,
    ) -> Result<EvaluatedPoint, PhError> {
        self.guard(zeta)?;
        let omega = check_vec(omega.clone(), self.n_kin, "omega")?;
        let gamma = &self.mass * &omega;
        Ok(EvaluatedPoint {
            kinematics: check_mat((self.kinematics)(zeta), self.n_pot, self.n_kin, "Z(zeta)")?,
            gyroscopic: check_mat(
                (self.gyroscopic)(&gamma),
                self.n_kin,
                self.n_kin,
                "G(gamma)",
            )?,
            vel_constraint: check_mat(
                (self.vel_constraint)(zeta),
                self.l_vel,
                self.n_kin,
                "A(zeta)",
            )?,
            port_directions: check_mat(
                (self.port_directions)(zeta),
                self.n_kin,
                self.m_ports,
                "B(zeta)",
            )?,
            pos_constraint: check_vec((self.pos_constraint)(zeta), self.k_pos, "c(zeta)")?,
            pos_constraint_jac: check_mat(
                (self.pos_constraint_jac)(zeta),
                self.k_pos,
                self.n_pot,
                "c'(zeta)",
            )?,
            potential: (self.potential)(zeta),
            potential_grad: check_vec((self.potential_grad)(zeta), self.n_pot, "grad V(zeta)")?,
            dissipation: check_vec(
                (self.dissipation)(zeta, &omega),
                self.n_kin,
                "tau_d(zeta, omega)",
            )?,
            zeta: zeta.clone(),
            omega,
            gamma,
        })
    }

    /// Total energy `1/2 w^T M w + V(zeta)`.
    pub fn hamiltonian(&self, state: &State) -> Result<f64, PhError> {
        self.guard(&state.zeta)?;
        let kinetic = 0.5 * state.omega.dot(&(&self.mass * &state.omega));
        Ok(kinetic + (self.potential)(&state.zeta))
    }

    /// Stacked residual of the four equation blocks of the dynamics:
    /// kinematic, kinetic, position constraint, velocity constraint.
    /// Zero exactly at points satisfying the differential-algebraic system.
    pub fn residual(
        &self,
        state: &State,
        mult: &Multipliers,
        omega_dot: &DVector<f64>,
        zeta_dot: &DVector<f64>,
        tau_ext: &DVector<f64>,
    ) -> Result<DVector<f64>, PhError> {
        let ep = self.eval_point(&state.zeta, &state.omega)?;
        let omega_dot = check_vec(omega_dot.clone(), self.n_kin, "omega_dot")?;
        let zeta_dot = check_vec(zeta_dot.clone(), self.n_pot, "zeta_dot")?;
        let tau_ext = check_vec(tau_ext.clone(), self.m_ports, "tau_ext")?;
        let lambda = check_vec(mult.lambda.clone(), self.k_pos, "lambda")?;
        let mu = check_vec(mult.mu.clone(), self.l_vel, "mu")?;

        let kinematic = &zeta_dot - &ep.kinematics * &state.omega;
        let kinetic = &self.mass * &omega_dot
            + ep.kinematics.transpose()
                * (&ep.potential_grad + ep.pos_constraint_jac.transpose() * &lambda)
            + &ep.dissipation
            + &ep.gyroscopic * &state.omega
            + ep.vel_constraint.transpose() * &mu
            - &ep.port_directions * &tau_ext;
        let vel_res = &ep.vel_constraint * &state.omega;

        let mut out = DVector::zeros(self.n_pot + self.n_kin + self.k_pos + self.l_vel);
        out.rows_mut(0, self.n_pot).copy_from(&kinematic);
        out.rows_mut(self.n_pot, self.n_kin).copy_from(&kinetic);
        out.rows_mut(self.n_pot + self.n_kin, self.k_pos)
            .copy_from(&ep.pos_constraint);
        out.rows_mut(self.n_pot + self.n_kin + self.k_pos, self.l_vel)
            .copy_from(&vel_res);
        Ok(out)
    }

    /// Port flows conjugate to the external efforts: `omega_ext = B(zeta)^T w`.
    pub fn port_flows(&self, state: &State) -> Result<DVector<f64>, PhError> {
        let ep = self.eval_point(&state.zeta, &state.omega)?;
        Ok(ep.port_directions.transpose() * &state.omega)
    }

    /// Instantaneous power-balance defect
    /// `dH/dt + w^T tau_d - omega_ext^T tau_ext`, which vanishes along exact
    /// solutions of the dynamics.
    pub fn power_balance_residual(
        &self,
        state: &State,
        omega_dot: &DVector<f64>,
        zeta_dot: &DVector<f64>,
        tau_ext: &DVector<f64>,
    ) -> Result<f64, PhError> {
        let ep = self.eval_point(&state.zeta, &state.omega)?;
        let omega_dot = check_vec(omega_dot.clone(), self.n_kin, "omega_dot")?;
        let zeta_dot = check_vec(zeta_dot.clone(), self.n_pot, "zeta_dot")?;
        let tau_ext = check_vec(tau_ext.clone(), self.m_ports, "tau_ext")?;
        let dh = state.omega.dot(&(&self.mass * &omega_dot)) + zeta_dot.dot(&ep.potential_grad);
        let dissipated = state.omega.dot(&ep.dissipation);
        let omega_ext = ep.port_directions.transpose() * &state.omega;
        Ok(dh + dissipated - omega_ext.dot(&tau_ext))
    }

    /// Mass matrix symmetry defect and smallest eigenvalue, for invariant
    /// checks and the positive-definiteness gate of the integrator.
    pub fn mass_spectrum(&self) -> (f64, f64) {
        let sym_defect = crate::linalg::asymmetry(&self.mass);
        let eig = nalgebra::SymmetricEigen::new(self.mass.clone());
        let min_eig = eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        (sym_defect, min_eig)
    }

    /// Minimal-norm Gauss-Newton projection of `zeta_guess` onto the position
    /// constraint set `c(zeta) = 0` (max norm below `tol`).
    pub fn project_to_position_constraints(
        &self,
        zeta_guess: &DVector<f64>,
        tol: f64,
        max_iter: usize,
    ) -> Result<DVector<f64>, PhError> {
        self.guard(zeta_guess)?;
        if self.k_pos == 0 {
            return Ok(zeta_guess.clone());
        }
        let jac0 = (self.pos_constraint_jac)(zeta_guess);
        let rank = crate::linalg::numerical_rank(&jac0, crate::linalg::DEFAULT_RANK_TOL);
        if rank.rank != self.k_pos {
            return Err(PhError::Rank(format!(
                "position-constraint Jacobian has rank {} < {} at the guess",
                rank.rank, self.k_pos
            )));
        }
        let mut zeta = zeta_guess.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let c = (self.pos_constraint)(&zeta);
            residual = c.amax();
            if residual <= tol {
                return Ok(zeta);
            }
            let jac = (self.pos_constraint_jac)(&zeta);
            let gram = &jac * jac.transpose();
            let mu = gram.lu().solve(&c).ok_or_else(|| {
                PhError::Rank("position-constraint Gram matrix singular during projection".into())
            })?;
            zeta -= jac.transpose() * mu;
            self.guard(&zeta)?;
        }
        Err(PhError::NoConvergence {
            iterations: max_iter,
            residual,
            context: "position-constraint projection".into(),
        })
    }
}

/// Builder for [`PhSystem`]. Every field not set keeps a neutral default:
/// identity kinematics (square case only), zero gyroscopic matrix, no
/// constraints, no ports, zero potential, zero dissipation, trivial guard.
pub struct PhSystemBuilder {
    n_pot: usize,
    n_kin: usize,
    m_ports: usize,
    k_pos: usize,
    l_vel: usize,
    kinematics: Option<MatrixFn>,
    mass: Option<DMatrix<f64>>,
    gyroscopic: Option<MatrixFn>,
    vel_constraint: Option<MatrixFn>,
    port_directions: Option<MatrixFn>,
    pos_constraint: Option<(VectorFn, MatrixFn)>,
    potential: Option<(ScalarFn, VectorFn)>,
    dissipation: Option<DissipationFn>,
    domain_guard: Option<DomainGuard>,
    port_labels: Vec<String>,
}

impl PhSystemBuilder {
    fn new(n_pot: usize, n_kin: usize) -> Self {
        PhSystemBuilder {
            n_pot,
            n_kin,
            m_ports: 0,
            k_pos: 0,
            l_vel: 0,
            kinematics: None,
            mass: None,
            gyroscopic: None,
            vel_constraint: None,
            port_directions: None,
            pos_constraint: None,
            potential: None,
            dissipation: None,
            domain_guard: None,
            port_labels: Vec::new(),
        }
    }

    pub fn mass(mut self, m: DMatrix<f64>) -> Self {
        self.mass = Some(m);
        self
    }

    pub fn kinematics(
        mut self,
        z: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.kinematics = Some(Arc::new(z));
        self
    }

    pub fn gyroscopic(
        mut self,
        g: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.gyroscopic = Some(Arc::new(g));
        self
    }

    pub fn velocity_constraints(
        mut self,
        l_vel: usize,
        a: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.l_vel = l_vel;
        self.vel_constraint = Some(Arc::new(a));
        self
    }

    pub fn position_constraints(
        mut self,
        k_pos: usize,
        c: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.k_pos = k_pos;
        self.pos_constraint = Some((Arc::new(c), Arc::new(jac)));
        self
    }

    pub fn ports(
        mut self,
        labels: &[&str],
        b: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.m_ports = labels.len();
        self.port_labels = labels.iter().map(|s| s.to_string()).collect();
        self.port_directions = Some(Arc::new(b));
        self
    }

    pub fn potential(
        mut self,
        v: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.potential = Some((Arc::new(v), Arc::new(grad)));
        self
    }

    pub fn dissipation(
        mut self,
        tau_d: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dissipation = Some(Arc::new(tau_d));
        self
    }

    pub fn domain_guard(
        mut self,
        g: impl Fn(&DVector<f64>) -> bool + Send + Sync + 'static,
    ) -> Self {
        self.domain_guard = Some(Arc::new(g));
        self
    }

    pub fn build(self) -> Result<PhSystem, PhError> {
        let PhSystemBuilder {
            n_pot,
            n_kin,
            m_ports,
            k_pos,
            l_vel,
            kinematics,
            mass,
            gyroscopic,
            vel_constraint,
            port_directions,
            pos_constraint,
            potential,
            dissipation,
            domain_guard,
            port_labels,
        } = self;

        let mass = mass.ok_or_else(|| PhError::Param("mass matrix is required".into()))?;
        if mass.nrows() != n_kin || mass.ncols() != n_kin {
            return Err(PhError::shape(
                "mass matrix",
                format!("{n_kin}x{n_kin}"),
                format!("{}x{}", mass.nrows(), mass.ncols()),
            ));
        }
        let kinematics = match kinematics {
            Some(z) => z,
            None => {
                if n_pot != n_kin {
                    return Err(PhError::Param(
                        "kinematics map required when n_pot != n_kin".into(),
                    ));
                }
                let n = n_kin;
                Arc::new(move |_: &DVector<f64>| DMatrix::identity(n, n)) as MatrixFn
            }
        };
        let gyroscopic = gyroscopic
            .unwrap_or_else(|| Arc::new(move |_: &DVector<f64>| DMatrix::zeros(n_kin, n_kin)));
        let vel_constraint = vel_constraint
            .unwrap_or_else(|| Arc::new(move |_: &DVector<f64>| DMatrix::zeros(l_vel, n_kin)));
        let port_directions = port_directions
            .unwrap_or_else(|| Arc::new(move |_: &DVector<f64>| DMatrix::zeros(n_kin, m_ports)));
        let (pos_constraint, pos_constraint_jac) = match pos_constraint {
            Some((c, j)) => (c, j),
            None => (
                Arc::new(move |_: &DVector<f64>| DVector::zeros(k_pos)) as VectorFn,
                Arc::new(move |_: &DVector<f64>| DMatrix::zeros(k_pos, n_pot)) as MatrixFn,
            ),
        };
        let (potential, potential_grad) = match potential {
            Some((v, g)) => (v, g),
            None => (
                Arc::new(|_: &DVector<f64>| 0.0) as ScalarFn,
                Arc::new(move |_: &DVector<f64>| DVector::zeros(n_pot)) as VectorFn,
            ),
        };
        let dissipation = dissipation.unwrap_or_else(|| {
            Arc::new(move |_: &DVector<f64>, _: &DVector<f64>| DVector::zeros(n_kin))
        });
        let domain_guard = domain_guard.unwrap_or_else(|| Arc::new(|_: &DVector<f64>| true));

        Ok(PhSystem {
            n_pot,
            n_kin,
            m_ports,
            k_pos,
            l_vel,
            kinematics,
            mass,
            gyroscopic,
            vel_constraint,
            port_directions,
            pos_constraint,
            pos_constraint_jac,
            potential,
            potential_grad,
            dissipation,
            domain_guard,
            port_labels,
        })
    }
}
