//! Virtual-mechanism engine: component graph, force evaluation, Jacobian
//! transpose torque synthesis, rail-mass integration and the controller-side
//! energy ledger.
//!
//! All springs carry the saturating force law
//! `f = sigma * tanh(k|z|/sigma) * z/|z|`; the corresponding potential is
//! `(sigma^2/k) * ln cosh(k d / sigma)`, the exact antiderivative, so the
//! energy bookkeeping closes without quadrature. A spring with `sigma = None`
//! is linear (`f = k z`, `U = k d^2 / 2`).

use nalgebra::{DMatrix, DVector, Vector3};

/// Saturating spring force. Zero displacement maps to zero force.
pub fn spring_force(k: f64, sigma: f64, z: &Vector3<f64>) -> Vector3<f64> {
    debug_assert!(sigma > 0.0);
    let d = z.norm();
    if d == 0.0 {
        return Vector3::zeros();
    }
    z * (sigma * (k * d / sigma).tanh() / d)
}

/// Potential of the saturating spring at displacement `d`.
pub fn spring_potential(k: f64, sigma: f64, d: f64) -> f64 {
    if k == 0.0 {
        return 0.0;
    }
    sigma * sigma / k * (k * d / sigma).cosh().ln()
}

/// τ = Σ Jᵢᵀ fᵢ.
pub fn map_to_torques(jacobians: &[DMatrix<f64>], forces: &[Vector3<f64>]) -> DVector<f64> {
    assert_eq!(jacobians.len(), forces.len());
    let n = jacobians.first().map_or(0, |j| j.ncols());
    let mut tau = DVector::zeros(n);
    for (jac, f) in jacobians.iter().zip(forces) {
        assert_eq!(jac.ncols(), n, "jacobian column-count mismatch");
        tau += jac.transpose() * *f;
    }
    tau
}

/// One endpoint of a spring or damper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Attachment {
    /// Index into the robot attachment points (p1..p6).
    RobotPoint(usize),
    RailMass(usize),
    /// Index into the switching references; resolves to the active candidate.
    Reference(usize),
    Fixed(Vector3<f64>),
}

#[derive(Debug, Clone)]
pub struct SaturatingSpring {
    pub k: f64,
    /// Force cap; `None` makes the spring linear.
    pub sigma: Option<f64>,
    pub a: Attachment,
    pub b: Attachment,
}

impl SaturatingSpring {
    pub fn force_on_a(&self, pos_a: &Vector3<f64>, pos_b: &Vector3<f64>) -> Vector3<f64> {
        let z = pos_b - pos_a;
        match self.sigma {
            Some(sigma) => spring_force(self.k, sigma, &z),
            None => z * self.k,
        }
    }

    pub fn potential(&self, d: f64) -> f64 {
        match self.sigma {
            Some(sigma) => spring_potential(self.k, sigma, d),
            None => 0.5 * self.k * d * d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Damper {
    pub c: f64,
    pub a: Attachment,
    pub b: Attachment,
}

/// Kinematic constraint of a rail mass: a line or a plane, both through
/// `origin`. Positions are stored in constraint coordinates so the constraint
/// holds exactly.
#[derive(Debug, Clone)]
pub enum RailConstraint {
    Line {
        origin: Vector3<f64>,
        dir: Vector3<f64>,
        /// Optional coordinate bounds (used for the reference-rail segment).
        bounds: Option<(f64, f64)>,
    },
    Plane { origin: Vector3<f64>, u: Vector3<f64>, v: Vector3<f64> },
}

#[derive(Debug, Clone)]
pub struct RailMass {
    pub m: f64,
    pub constraint: RailConstraint,
    /// 1 coordinate for a line, 2 for a plane.
    pub coord: [f64; 2],
    pub vel: [f64; 2],
}

impl RailMass {
    pub fn on_line(m: f64, origin: Vector3<f64>, dir: Vector3<f64>, coord: f64) -> Self {
        let dir = dir.normalize();
        RailMass {
            m,
            constraint: RailConstraint::Line { origin, dir, bounds: None },
            coord: [coord, 0.0],
            vel: [0.0; 2],
        }
    }

    pub fn on_segment(m: f64, a: Vector3<f64>, b: Vector3<f64>, coord: f64) -> Self {
        let len = (b - a).norm();
        let dir = (b - a) / len;
        RailMass {
            m,
            constraint: RailConstraint::Line { origin: a, dir, bounds: Some((0.0, len)) },
            coord: [coord, 0.0],
            vel: [0.0; 2],
        }
    }

    pub fn on_plane(
        m: f64,
        origin: Vector3<f64>,
        u: Vector3<f64>,
        v: Vector3<f64>,
        coord: (f64, f64),
    ) -> Self {
        RailMass {
            m,
            constraint: RailConstraint::Plane { origin, u: u.normalize(), v: v.normalize() },
            coord: [coord.0, coord.1],
            vel: [0.0; 2],
        }
    }

    pub fn position(&self) -> Vector3<f64> {
        match &self.constraint {
            RailConstraint::Line { origin, dir, .. } => origin + dir * self.coord[0],
            RailConstraint::Plane { origin, u, v } => {
                origin + u * self.coord[0] + v * self.coord[1]
            }
        }
    }

    pub fn velocity(&self) -> Vector3<f64> {
        match &self.constraint {
            RailConstraint::Line { dir, .. } => dir * self.vel[0],
            RailConstraint::Plane { u, v, .. } => u * self.vel[0] + v * self.vel[1],
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.m * self.velocity().norm_squared()
    }
}

#[derive(Debug, Clone)]
pub struct SwitchingReference {
    pub candidates: Vec<Vector3<f64>>,
    pub active: usize,
}

impl SwitchingReference {
    pub fn position(&self) -> Vector3<f64> {
        self.candidates[self.active]
    }
}

/// Position and velocity of one robot attachment point, frozen for the
/// duration of a control step.
#[derive(Debug, Clone, Copy)]
pub struct PointState {
    pub pos: Vector3<f64>,
    pub vel: Vector3<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct EnergyLedger {
    /// Cumulative energy removed by the virtual dampers, J.
    pub w_dissipation_cum: f64,
    /// Cumulative elastic energy injected by reference switches and anchor
    /// shifts, J (signed).
    pub w_elastic_cum: f64,
}

/// Graph of virtual components plus the robot attachment-point table.
#[derive(Debug, Clone)]
pub struct VirtualMechanism {
    pub springs: Vec<SaturatingSpring>,
    pub dampers: Vec<Damper>,
    pub rail_masses: Vec<RailMass>,
    pub references: Vec<SwitchingReference>,
    /// Robot attachment points: (frame name, local point).
    pub robot_points: Vec<(String, Vector3<f64>)>,
    pub ledger: EnergyLedger,
}

impl VirtualMechanism {
    pub fn new() -> Self {
        VirtualMechanism {
            springs: Vec::new(),
            dampers: Vec::new(),
            rail_masses: Vec::new(),
            references: Vec::new(),
            robot_points: Vec::new(),
            ledger: EnergyLedger::default(),
        }
    }

    fn resolve(&self, at: &Attachment, robot: &[PointState]) -> PointState {
        match at {
            Attachment::RobotPoint(i) => robot[*i],
            Attachment::RailMass(i) => PointState {
                pos: self.rail_masses[*i].position(),
                vel: self.rail_masses[*i].velocity(),
            },
            Attachment::Reference(i) => PointState {
                pos: self.references[*i].position(),
                vel: Vector3::zeros(),
            },
            Attachment::Fixed(p) => PointState { pos: *p, vel: Vector3::zeros() },
        }
    }

    /// Forces on the robot attachment points. Slot i holds the total force
    /// applied to robot point i; equal-and-opposite reactions act on the
    /// non-robot endpoints (realized by `step_rail_masses`).
    pub fn component_forces(&self, robot: &[PointState]) -> Vec<Vector3<f64>> {
        let mut out = vec![Vector3::zeros(); robot.len()];
        for spring in &self.springs {
            let sa = self.resolve(&spring.a, robot);
            let sb = self.resolve(&spring.b, robot);
            let f_on_a = spring.force_on_a(&sa.pos, &sb.pos);
            if let Attachment::RobotPoint(i) = spring.a {
                out[i] += f_on_a;
            }
            if let Attachment::RobotPoint(i) = spring.b {
                out[i] -= f_on_a;
            }
        }
        for damper in &self.dampers {
            let da = self.resolve(&damper.a, robot);
            let db = self.resolve(&damper.b, robot);
            let f_on_a = (db.vel - da.vel) * damper.c;
            if let Attachment::RobotPoint(i) = damper.a {
                out[i] += f_on_a;
            }
            if let Attachment::RobotPoint(i) = damper.b {
                out[i] -= f_on_a;
            }
        }
        out
    }

    /// Net generalized force on one rail mass, projected onto its constraint
    /// coordinates. Off-constraint components are discarded (ideal
    /// frictionless rail).
    fn rail_mass_force(&self, idx: usize, robot: &[PointState]) -> [f64; 2] {
        let mass_at = Attachment::RailMass(idx);
        let mut force = Vector3::zeros();
        for spring in &self.springs {
            if spring.a == mass_at {
                let sb = self.resolve(&spring.b, robot);
                force += spring.force_on_a(&self.rail_masses[idx].position(), &sb.pos);
            } else if spring.b == mass_at {
                let sa = self.resolve(&spring.a, robot);
                force -= spring.force_on_a(&sa.pos, &self.rail_masses[idx].position());
            }
        }
        for damper in &self.dampers {
            if damper.a == mass_at {
                let db = self.resolve(&damper.b, robot);
                force += (db.vel - self.rail_masses[idx].velocity()) * damper.c;
            } else if damper.b == mass_at {
                let da = self.resolve(&damper.a, robot);
                force -= (self.rail_masses[idx].velocity() - da.vel) * damper.c;
            }
        }
        match &self.rail_masses[idx].constraint {
            RailConstraint::Line { dir, .. } => [force.dot(dir), 0.0],
            RailConstraint::Plane { u, v, .. } => [force.dot(u), force.dot(v)],
        }
    }

    /// Semi-implicit Euler update of every rail mass; damper dissipation
    /// accrues into the ledger.
    pub fn step_rail_masses(&mut self, robot: &[PointState], dt: f64) {
        assert!(dt > 0.0);
        let forces: Vec<[f64; 2]> = (0..self.rail_masses.len())
            .map(|i| self.rail_mass_force(i, robot))
            .collect();
        for damper in &self.dampers {
            let da = self.resolve(&damper.a, robot);
            let db = self.resolve(&damper.b, robot);
            let v_rel = db.vel - da.vel;
            self.ledger.w_dissipation_cum += damper.c * v_rel.norm_squared() * dt;
        }
        for (mass, f) in self.rail_masses.iter_mut().zip(&forces) {
            let dims = match mass.constraint {
                RailConstraint::Line { .. } => 1,
                RailConstraint::Plane { .. } => 2,
            };
            for d in 0..dims {
                mass.vel[d] += f[d] / mass.m * dt;
                mass.coord[d] += mass.vel[d] * dt;
            }
            if let RailConstraint::Line { bounds: Some((lo, hi)), .. } = mass.constraint {
                if mass.coord[0] < lo {
                    mass.coord[0] = lo;
                    mass.vel[0] = mass.vel[0].max(0.0);
                } else if mass.coord[0] > hi {
                    mass.coord[0] = hi;
                    mass.vel[0] = mass.vel[0].min(0.0);
                }
            }
        }
    }

    /// Stored energy: rail-mass kinetic energy plus all spring potentials.
    pub fn energy(&self, robot: &[PointState]) -> f64 {
        let mut e: f64 = self.rail_masses.iter().map(|m| m.kinetic_energy()).sum();
        for spring in &self.springs {
            let a = self.resolve(&spring.a, robot);
            let b = self.resolve(&spring.b, robot);
            e += spring.potential((b.pos - a.pos).norm());
        }
        e
    }
}

impl Default for VirtualMechanism {
    fn default() -> Self {
        Self::new()
    }
}

/// Energy injected into a spring when its anchor jumps from `r_old` to
/// `r_new` while the other endpoint sits at `point`.
pub fn switch_energy_jump(
    spring: &SaturatingSpring,
    point: &Vector3<f64>,
    r_old: &Vector3<f64>,
    r_new: &Vector3<f64>,
) -> f64 {
    spring.potential((point - r_new).norm()) - spring.potential((point - r_old).norm())
}
