//! Manipulator dynamics: mass matrix, Coriolis/gravity bias, viscous joint
//! damping and a fixed-step semi-implicit Euler integrator.
//!
//! Both the mass matrix and the bias vector come from a world-frame recursive
//! Newton-Euler pass over the link tree; the contract is the energy and
//! symmetry oracles in the tests, not the algorithm.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::chain::{ChainDescription, JointState, Pose};

pub const GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("mass-matrix solve failed (ill-conditioned chain)")]
    SolveFailed,
    #[error(transparent)]
    Chain(#[from] crate::chain::ChainError),
}

#[derive(Debug, Clone)]
pub struct PlantState {
    pub joints: JointState,
    pub time: f64,
}

impl PlantState {
    pub fn new(chain: &ChainDescription) -> Self {
        PlantState { joints: JointState::zeros(chain.joint_count()), time: 0.0 }
    }
}

/// Forces applied to the plant from outside the actuators: each attachment is
/// a point fixed in a named frame with a world-frame force on it.
#[derive(Debug, Clone, Default)]
pub struct ExternalPort {
    pub attachments: Vec<PortForce>,
}

#[derive(Debug, Clone)]
pub struct PortForce {
    pub frame: String,
    pub local_point: Vector3<f64>,
    pub force: Vector3<f64>,
}

struct LinkKinematics {
    omega: Vector3<f64>,
    alpha: Vector3<f64>,
    /// Acceleration of the link's joint origin (root: -gravity trick).
    a_origin: Vector3<f64>,
    /// World position of the joint origin anchoring this link.
    origin: Vector3<f64>,
    com_world: Vector3<f64>,
    a_com: Vector3<f64>,
}

/// Inverse dynamics: torque required for (q, qdot, qddot) under `gravity`.
/// Joint damping is not included.
fn rne(
    chain: &ChainDescription,
    poses: &[Pose],
    qdot: &[f64],
    qddot: &[f64],
    gravity: &Vector3<f64>,
) -> DVector<f64> {
    let nl = chain.links.len();
    let n = chain.joint_count();
    let axes = chain.joint_axes_origins(poses);

    let mut kin: Vec<LinkKinematics> = Vec::with_capacity(nl);
    for li in 0..nl {
        let link = &chain.links[li];
        let com_world = crate::chain::transform_point(&poses[li], &link.com);
        let k = match chain.parent_joint_of(li) {
            None => {
                let a0 = -gravity;
                LinkKinematics {
                    omega: Vector3::zeros(),
                    alpha: Vector3::zeros(),
                    a_origin: a0,
                    origin: poses[li].translation.vector,
                    com_world,
                    a_com: a0,
                }
            }
            Some(ji) => {
                let (axis, origin) = axes[ji];
                let parent = chain.link_id(&chain.joints[ji].parent).unwrap();
                let p = &kin[parent];
                let r_po = origin - p.origin;
                let a_o = p.a_origin
                    + p.alpha.cross(&r_po)
                    + p.omega.cross(&p.omega.cross(&r_po));
                let omega = p.omega + axis * qdot[ji];
                let alpha = p.alpha + axis * qddot[ji] + p.omega.cross(&(axis * qdot[ji]));
                let r_oc = com_world - origin;
                let a_com =
                    a_o + alpha.cross(&r_oc) + omega.cross(&omega.cross(&r_oc));
                LinkKinematics { omega, alpha, a_origin: a_o, origin, com_world, a_com }
            }
        };
        kin.push(k);
    }

    // backward pass: accumulate forces and moments toward the root
    let mut f = vec![Vector3::<f64>::zeros(); nl];
    let mut m_about_com = vec![Vector3::<f64>::zeros(); nl];
    for li in (0..nl).rev() {
        let link = &chain.links[li];
        let rot = poses[li].rotation;
        let inertia_w = rot * link.inertia * rot.transpose();
        f[li] += link.mass * kin[li].a_com;
        m_about_com[li] +=
            inertia_w * kin[li].alpha + kin[li].omega.cross(&(inertia_w * kin[li].omega));
        if let Some(ji) = chain.parent_joint_of(li) {
            let parent = chain.link_id(&chain.joints[ji].parent).unwrap();
            let fi = f[li];
            let mi = m_about_com[li] + (kin[li].com_world - kin[parent].com_world).cross(&fi);
            f[parent] += fi;
            m_about_com[parent] += mi;
        }
    }

    let mut tau = DVector::zeros(n);
    for (ji, joint) in chain.joints.iter().enumerate() {
        let child = chain.link_id(&joint.child).unwrap();
        let (axis, origin) = axes[ji];
        let moment_about_joint =
            m_about_com[child] + (kin[child].com_world - origin).cross(&f[child]);
        tau[ji] = axis.dot(&moment_about_joint);
    }
    tau
}

pub fn mass_matrix(chain: &ChainDescription, q: &[f64]) -> DMatrix<f64> {
    let n = chain.joint_count();
    let poses = chain.link_poses(q);
    let zero = vec![0.0; n];
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = rne(chain, &poses, &zero, &e, &Vector3::zeros());
        m.set_column(j, &col);
        e[j] = 0.0;
    }
    // the column construction is exact up to roundoff; symmetrize to keep the
    // Cholesky solve well behaved
    let mt = m.transpose();
    (m + mt) * 0.5
}

/// Coriolis/centrifugal plus gravity torques (no joint damping).
pub fn bias_forces(chain: &ChainDescription, q: &[f64], qdot: &[f64]) -> DVector<f64> {
    let poses = chain.link_poses(q);
    let zero = vec![0.0; chain.joint_count()];
    rne(chain, &poses, qdot, &zero, &GRAVITY)
}

/// Gravity-only part of the bias, used for gravity compensation.
pub fn gravity_torques(chain: &ChainDescription, q: &[f64]) -> DVector<f64> {
    let poses = chain.link_poses(q);
    let zero = vec![0.0; chain.joint_count()];
    rne(chain, &poses, &zero, &zero, &GRAVITY)
}

/// Generalized forces of an external port: sum of Jᵀ f over attachments.
pub fn port_torques(
    chain: &ChainDescription,
    state: &JointState,
    port: &ExternalPort,
) -> Result<DVector<f64>, DynamicsError> {
    let n = chain.joint_count();
    let poses = chain.link_poses(&state.q);
    let mut tau = DVector::zeros(n);
    for att in &port.attachments {
        let frame = chain.frame(&att.frame)?;
        let li = chain.link_id(&frame.parent).unwrap();
        let world_point = crate::chain::transform_point(&(poses[li] * frame.origin), &att.local_point);
        let jac = chain.point_jacobian_at(&poses, li, &world_point);
        tau += jac.transpose() * att.force;
    }
    Ok(tau)
}

/// One semi-implicit Euler step:
/// solve M(q) a = tau + Jᵀ f_port − bias − D q̇, then q̇ += a dt, q += q̇ dt.
pub fn step(
    chain: &ChainDescription,
    state: &PlantState,
    tau: &DVector<f64>,
    port: &ExternalPort,
    dt: f64,
) -> Result<PlantState, DynamicsError> {
    assert!(dt > 0.0, "dt must be positive");
    let n = chain.joint_count();
    let mut next = state.clone();
    if n > 0 {
        let q = &state.joints.q;
        let qd = DVector::from_column_slice(&state.joints.qdot);
        let m = mass_matrix(chain, q);
        let bias = bias_forces(chain, q, &state.joints.qdot);
        let damping = DVector::from_iterator(n, chain.joints.iter().map(|j| j.damping));
        let rhs = tau + port_torques(chain, &state.joints, port)?
            - bias
            - damping.component_mul(&qd);
        let chol = m.cholesky().ok_or(DynamicsError::SolveFailed)?;
        let accel = chol.solve(&rhs);
        for i in 0..n {
            next.joints.qdot[i] += accel[i] * dt;
            next.joints.q[i] += next.joints.qdot[i] * dt;
        }
    }
    next.time += dt;
    Ok(next)
}

/// Kinetic plus gravitational potential energy; the potential reference is
/// the q = 0 configuration.
pub fn mechanical_energy(chain: &ChainDescription, state: &PlantState) -> f64 {
    kinetic_energy(chain, &state.joints) + potential_energy(chain, &state.joints.q)
        - potential_energy(chain, &vec![0.0; chain.joint_count()])
}

pub fn kinetic_energy(chain: &ChainDescription, joints: &JointState) -> f64 {
    let poses = chain.link_poses(&joints.q);
    let axes = chain.joint_axes_origins(&poses);
    let nl = chain.links.len();
    let mut omega = vec![Vector3::<f64>::zeros(); nl];
    let mut v_origin = vec![Vector3::<f64>::zeros(); nl];
    let mut origin = vec![Vector3::<f64>::zeros(); nl];
    let mut energy = 0.0;
    for li in 0..nl {
        let link = &chain.links[li];
        match chain.parent_joint_of(li) {
            None => {
                origin[li] = poses[li].translation.vector;
            }
            Some(ji) => {
                let (axis, o) = axes[ji];
                let parent = chain.link_id(&chain.joints[ji].parent).unwrap();
                let v_o = v_origin[parent] + omega[parent].cross(&(o - origin[parent]));
                omega[li] = omega[parent] + axis * joints.qdot[ji];
                v_origin[li] = v_o;
                origin[li] = o;
            }
        }
        let com = crate::chain::transform_point(&poses[li], &link.com);
        let v_com = v_origin[li] + omega[li].cross(&(com - origin[li]));
        let rot = poses[li].rotation;
        let inertia_w = rot * link.inertia * rot.transpose();
        energy += 0.5 * link.mass * v_com.norm_squared()
            + 0.5 * omega[li].dot(&(inertia_w * omega[li]));
    }
    energy
}

fn potential_energy(chain: &ChainDescription, q: &[f64]) -> f64 {
    let poses = chain.link_poses(q);
    chain
        .links
        .iter()
        .enumerate()
        .map(|(li, link)| {
            let com = crate::chain::transform_point(&poses[li], &link.com);
            -link.mass * GRAVITY.dot(&com)
        })
        .sum()
}
