//! Power-preserving interconnection of two systems: selected port channels
//! are linked by equating their flows and opposing their efforts, which
//! enters the combined system as an additional velocity constraint whose
//! multiplier carries the coupling force. The combined system is again of
//! the same model class whenever the stacked constraint matrix keeps
//! constant rank.

use nalgebra::{DMatrix, DVector};

use crate::error::PhError;
use crate::linalg::{gather_columns, numerical_rank, DEFAULT_RANK_TOL};
use crate::sample::SampleSet;
use crate::system::{Multipliers, PhSystem, State};

/// Which port columns of the two systems are identified. Channel `i` of
/// `ports_a` couples to channel `i` of `ports_b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CouplingSpec {
    pub ports_a: Vec<usize>,
    pub ports_b: Vec<usize>,
}

impl CouplingSpec {
    pub fn new(ports_a: Vec<usize>, ports_b: Vec<usize>) -> Self {
        CouplingSpec { ports_a, ports_b }
    }

    pub fn channels(&self) -> usize {
        self.ports_a.len()
    }

    fn validate(&self, sys_a: &PhSystem, sys_b: &PhSystem) -> Result<(), PhError> {
        if self.ports_a.len() != self.ports_b.len() {
            return Err(PhError::Port(format!(
                "pairing lists have different lengths ({} vs {})",
                self.ports_a.len(),
                self.ports_b.len()
            )));
        }
        for (list, m, side) in [
            (&self.ports_a, sys_a.m_ports, "first"),
            (&self.ports_b, sys_b.m_ports, "second"),
        ] {
            let mut seen = std::collections::BTreeSet::new();
            for &i in list.iter() {
                if i >= m {
                    return Err(PhError::Port(format!(
                        "port index {i} out of range for the {side} system ({m} ports)"
                    )));
                }
                if !seen.insert(i) {
                    return Err(PhError::Port(format!(
                        "port index {i} repeated for the {side} system"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn complement(indices: &[usize], total: usize) -> Vec<usize> {
    (0..total).filter(|i| !indices.contains(i)).collect()
}

/// A coupled system: the combined model plus the pieces needed to reconstruct
/// coupling-port quantities after the fact.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub system: PhSystem,
    pub sys_a: PhSystem,
    pub sys_b: PhSystem,
    pub spec: CouplingSpec,
}

impl CoupledSystem {
    /// Range of the combined velocity-constraint rows (and multiplier
    /// entries) that carry the coupling.
    pub fn coupling_rows(&self) -> std::ops::Range<usize> {
        let base = self.sys_a.l_vel + self.sys_b.l_vel;
        base..base + self.spec.channels()
    }

    fn split_state(
        &self,
        state: &State,
    ) -> (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>) {
        let (np1, nk1) = (self.sys_a.n_pot, self.sys_a.n_kin);
        (
            state.zeta.rows(0, np1).into_owned(),
            state.zeta.rows(np1, self.sys_b.n_pot).into_owned(),
            state.omega.rows(0, nk1).into_owned(),
            state.omega.rows(nk1, self.sys_b.n_kin).into_owned(),
        )
    }

    /// Flows through the coupled ports of both subsystems,
    /// `(B_c_a^T w_a, B_c_b^T w_b)`. Equal along consistent trajectories.
    pub fn coupling_flows(&self, state: &State) -> Result<(DVector<f64>, DVector<f64>), PhError> {
        let (zeta_a, zeta_b, omega_a, omega_b) = self.split_state(state);
        self.sys_a.guard(&zeta_a)?;
        self.sys_b.guard(&zeta_b)?;
        let bc_a = gather_columns(&(self.sys_a.port_directions)(&zeta_a), &self.spec.ports_a);
        let bc_b = gather_columns(&(self.sys_b.port_directions)(&zeta_b), &self.spec.ports_b);
        Ok((bc_a.transpose() * omega_a, bc_b.transpose() * omega_b))
    }

    /// The coupling efforts, read off the multiplier entries of the coupling
    /// constraint rows.
    pub fn coupling_efforts(&self, mult: &Multipliers) -> DVector<f64> {
        let range = self.coupling_rows();
        mult.mu.rows(range.start, range.len()).into_owned()
    }
}

/// Assemble the power-preserving coupling of two systems under the given
/// port pairing. Positions, velocities, energies, constraints, and
/// dissipation stack block-wise; the pairing adds velocity-constraint rows
/// `B_c_a^T w_a - B_c_b^T w_b = 0`; the surviving external ports are the
/// unpaired columns of both systems in their original order.
pub fn couple(
    sys_a: &PhSystem,
    sys_b: &PhSystem,
    spec: &CouplingSpec,
) -> Result<CoupledSystem, PhError> {
    spec.validate(sys_a, sys_b)?;
    let (np1, nk1, k1, l1, m1) = (
        sys_a.n_pot,
        sys_a.n_kin,
        sys_a.k_pos,
        sys_a.l_vel,
        sys_a.m_ports,
    );
    let (np2, nk2, k2, l2, m2) = (
        sys_b.n_pot,
        sys_b.n_kin,
        sys_b.k_pos,
        sys_b.l_vel,
        sys_b.m_ports,
    );
    let mc = spec.channels();
    let ext_a = complement(&spec.ports_a, m1);
    let ext_b = complement(&spec.ports_b, m2);

    let split_pos =
        move |z: &DVector<f64>| (z.rows(0, np1).into_owned(), z.rows(np1, np2).into_owned());

    let mut mass = DMatrix::zeros(nk1 + nk2, nk1 + nk2);
    mass.view_mut((0, 0), (nk1, nk1)).copy_from(&sys_a.mass);
    mass.view_mut((nk1, nk1), (nk2, nk2)).copy_from(&sys_b.mass);

    let za = sys_a.kinematics.clone();
    let zb = sys_b.kinematics.clone();
    let kinematics = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        let (ma, mb) = (za(&z1), zb(&z2));
        let mut out = DMatrix::zeros(np1 + np2, nk1 + nk2);
        out.view_mut((0, 0), (np1, nk1)).copy_from(&ma);
        out.view_mut((np1, nk1), (np2, nk2)).copy_from(&mb);
        out
    };

    let ga = sys_a.gyroscopic.clone();
    let gb = sys_b.gyroscopic.clone();
    let gyroscopic = move |gamma: &DVector<f64>| {
        let g1 = ga(&gamma.rows(0, nk1).into_owned());
        let g2 = gb(&gamma.rows(nk1, nk2).into_owned());
        let mut out = DMatrix::zeros(nk1 + nk2, nk1 + nk2);
        out.view_mut((0, 0), (nk1, nk1)).copy_from(&g1);
        out.view_mut((nk1, nk1), (nk2, nk2)).copy_from(&g2);
        out
    };

    let aa = sys_a.vel_constraint.clone();
    let ab = sys_b.vel_constraint.clone();
    let ba = sys_a.port_directions.clone();
    let bb = sys_b.port_directions.clone();
    let (pa, pb) = (spec.ports_a.clone(), spec.ports_b.clone());
    let vel_constraint = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        let (a1, a2) = (aa(&z1), ab(&z2));
        let bc1 = gather_columns(&ba(&z1), &pa);
        let bc2 = gather_columns(&bb(&z2), &pb);
        let mut out = DMatrix::zeros(l1 + l2 + mc, nk1 + nk2);
        out.view_mut((0, 0), (l1, nk1)).copy_from(&a1);
        out.view_mut((l1, nk1), (l2, nk2)).copy_from(&a2);
        out.view_mut((l1 + l2, 0), (mc, nk1))
            .copy_from(&bc1.transpose());
        out.view_mut((l1 + l2, nk1), (mc, nk2))
            .copy_from(&(-bc2.transpose()));
        out
    };

    let ba2 = sys_a.port_directions.clone();
    let bb2 = sys_b.port_directions.clone();
    let (ea, eb) = (ext_a.clone(), ext_b.clone());
    let port_directions = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        let be1 = gather_columns(&ba2(&z1), &ea);
        let be2 = gather_columns(&bb2(&z2), &eb);
        let mut out = DMatrix::zeros(nk1 + nk2, be1.ncols() + be2.ncols());
        out.view_mut((0, 0), (nk1, be1.ncols())).copy_from(&be1);
        out.view_mut((nk1, be1.ncols()), (nk2, be2.ncols()))
            .copy_from(&be2);
        out
    };

    let ca = sys_a.pos_constraint.clone();
    let cb = sys_b.pos_constraint.clone();
    let pos_constraint = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        let (c1, c2) = (ca(&z1), cb(&z2));
        let mut out = DVector::zeros(k1 + k2);
        out.rows_mut(0, k1).copy_from(&c1);
        out.rows_mut(k1, k2).copy_from(&c2);
        out
    };

    let ja = sys_a.pos_constraint_jac.clone();
    let jb = sys_b.pos_constraint_jac.clone();
    let pos_constraint_jac = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        let (j1, j2) = (ja(&z1), jb(&z2));
        let mut out = DMatrix::zeros(k1 + k2, np1 + np2);
        out.view_mut((0, 0), (k1, np1)).copy_from(&j1);
        out.view_mut((k1, np1), (k2, np2)).copy_from(&j2);
        out
    };

    let va = sys_a.potential.clone();
    let vb = sys_b.potential.clone();
    let potential = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        va(&z1) + vb(&z2)
    };

    let gva = sys_a.potential_grad.clone();
    let gvb = sys_b.potential_grad.clone();
    let potential_grad = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        let mut out = DVector::zeros(np1 + np2);
        out.rows_mut(0, np1).copy_from(&gva(&z1));
        out.rows_mut(np1, np2).copy_from(&gvb(&z2));
        out
    };

    let da = sys_a.dissipation.clone();
    let db = sys_b.dissipation.clone();
    let dissipation = move |z: &DVector<f64>, w: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        let w1 = w.rows(0, nk1).into_owned();
        let w2 = w.rows(nk1, nk2).into_owned();
        let mut out = DVector::zeros(nk1 + nk2);
        out.rows_mut(0, nk1).copy_from(&da(&z1, &w1));
        out.rows_mut(nk1, nk2).copy_from(&db(&z2, &w2));
        out
    };

    let guard_a = sys_a.domain_guard.clone();
    let guard_b = sys_b.domain_guard.clone();
    let domain_guard = move |z: &DVector<f64>| {
        let (z1, z2) = split_pos(z);
        guard_a(&z1) && guard_b(&z2)
    };

    let mut labels: Vec<&str> = Vec::new();
    let owned: Vec<String> = ext_a
        .iter()
        .map(|&i| {
            sys_a
                .port_labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("a{i}"))
        })
        .chain(ext_b.iter().map(|&i| {
            sys_b
                .port_labels
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("b{i}"))
        }))
        .collect();
    for l in &owned {
        labels.push(l);
    }

    let system = PhSystem::builder(np1 + np2, nk1 + nk2)
        .mass(mass)
        .kinematics(kinematics)
        .gyroscopic(gyroscopic)
        .velocity_constraints(l1 + l2 + mc, vel_constraint)
        .position_constraints(k1 + k2, pos_constraint, pos_constraint_jac)
        .ports(&labels, port_directions)
        .potential(potential, potential_grad)
        .dissipation(dissipation)
        .domain_guard(domain_guard)
        .build()?;

    Ok(CoupledSystem {
        system,
        sys_a: sys_a.clone(),
        sys_b: sys_b.clone(),
        spec: spec.clone(),
    })
}

/// Outcome of the interconnection rank test.
#[derive(Debug, Clone)]
pub struct RankConstancyVerdict {
    pub pass: bool,
    /// Most common rank across the samples.
    pub rank: usize,
    /// First sample (stacked positions of both systems) whose rank differs
    /// from the most common one.
    pub witness: Option<(DVector<f64>, usize)>,
}

/// Check that the stacked constraint matrix
/// `[A_a 0; 0 A_b; B_c_a^T -B_c_b^T]` has the same numerical rank at every
/// sampled pair of positions; this is the condition under which the coupling
/// stays in the model class.
pub fn check_interconnection_rank(
    sys_a: &PhSystem,
    sys_b: &PhSystem,
    spec: &CouplingSpec,
    samples: &SampleSet,
) -> Result<RankConstancyVerdict, PhError> {
    spec.validate(sys_a, sys_b)?;
    if samples.points.is_empty() {
        return Err(PhError::Param("rank check needs samples".into()));
    }
    let coupled = couple(sys_a, sys_b, spec)?;
    let mut ranks = Vec::with_capacity(samples.points.len());
    for x in &samples.points {
        if x.len() != sys_a.n_pot + sys_b.n_pot {
            return Err(PhError::shape(
                "rank-check sample",
                format!("{}", sys_a.n_pot + sys_b.n_pot),
                format!("{}", x.len()),
            ));
        }
        let a = (coupled.system.vel_constraint)(x);
        ranks.push(numerical_rank(&a, DEFAULT_RANK_TOL).rank);
    }
    let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for &r in &ranks {
        *counts.entry(r).or_insert(0) += 1;
    }
    let majority = counts
        .iter()
        .max_by_key(|(_, &c)| c)
        .map(|(&r, _)| r)
        .unwrap_or(0);
    let witness = ranks
        .iter()
        .position(|&r| r != majority)
        .map(|i| (samples.points[i].clone(), ranks[i]));
    Ok(RankConstancyVerdict {
        pass: witness.is_none(),
        rank: majority,
        witness,
    })
}

/// Net power exchanged through the coupled ports,
/// `flow_a^T tau_c - flow_b^T tau_c`, with the coupling effort taken from
/// the multiplier entries of the coupling rows. Vanishes to solver tolerance
/// because the coupling rows enforce equal flows.
pub fn coupling_power_residual(
    coupled: &CoupledSystem,
    state: &State,
    mult: &Multipliers,
) -> Result<f64, PhError> {
    if mult.mu.len() != coupled.system.l_vel {
        return Err(PhError::shape(
            "mu",
            format!("{}", coupled.system.l_vel),
            format!("{}", mult.mu.len()),
        ));
    }
    let (flow_a, flow_b) = coupled.coupling_flows(state)?;
    let tau_c = coupled.coupling_efforts(mult);
    Ok(flow_a.dot(&tau_c) - flow_b.dot(&tau_c))
}
