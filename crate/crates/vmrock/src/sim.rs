//! Closed-loop simulation: virtual-mechanism controller at the control rate,
//! manipulator dynamics plus contact and rail masses at a 10x finer substep,
//! with energy bookkeeping, wrist wrench sensing and trace recording.

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::chain::{transform_point, ChainDescription, JointState};
use crate::dynamics::{self, ExternalPort, PlantState, PortForce};
use crate::environment::{board_contact_force, BladeProfile, Board, FoodItem};
use crate::metrics::{Trace, TraceRow};
use crate::rocking::{
    advance_slice, build_rocking_mechanism, knife_attachment_points, maybe_adapt, update_phase,
    MechanismLayout, Phase, RockingConfig, RockingState, SwitchEvent,
};
use crate::scenario::Scenario;
use crate::vmc::{PointState, VirtualMechanism};

pub const SUBSTEPS: usize = 10;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Chain(#[from] crate::chain::ChainError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
    #[error(transparent)]
    Rocking(#[from] crate::rocking::RockingError),
    #[error("simulation diverged at t = {0}")]
    Diverged(f64),
}

/// Split of the cumulative dissipation by channel, J.
#[derive(Debug, Clone, Copy, Default)]
pub struct DissipationSplit {
    pub virtual_dampers: f64,
    pub joint_damping: f64,
    pub environment: f64,
}

impl DissipationSplit {
    pub fn total(&self) -> f64 {
        self.virtual_dampers + self.joint_damping + self.environment
    }
}

pub struct Simulator {
    pub chain: ChainDescription,
    pub blade: BladeProfile,
    pub board: Board,
    pub food: Option<FoodItem>,
    pub mech: VirtualMechanism,
    pub layout: MechanismLayout,
    pub cfg: RockingConfig,
    pub state: RockingState,
    pub plant: PlantState,
    pub trace: Trace,
    knife_frame: String,
    gravity_comp: bool,
    dt: f64,
    /// (sigma, rng) of the wrist sensor noise channel.
    noise: Option<(f64, rand_chacha::ChaCha8Rng)>,
    hardness_step: Option<(f64, f64)>,
    food_slice_offset: f64,
    pub dissipation: DissipationSplit,
    /// Held 100 Hz wrist wrench sample.
    wrench_sample: Vector3<f64>,
    sensor_stride: usize,
    /// (time, event) log of every phase switch.
    pub switch_log: Vec<(f64, SwitchEvent)>,
    /// (time, k2) after each adaptation update.
    pub k2_log: Vec<(f64, f64)>,
    /// (cycle index, separated flag) at each completed cycle.
    pub separation_log: Vec<(usize, bool)>,
    /// Cut-plane x position recorded at each slice advance, plus the start.
    pub slice_planes: Vec<f64>,
}

impl Simulator {
    pub fn from_scenario(scn: &Scenario) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(&scn.plant.chain).map_err(|e| {
            SimError::Chain(crate::chain::ChainError::Syntax {
                line: 0,
                msg: format!("cannot read chain file {:?}: {e}", scn.plant.chain),
            })
        })?;
        let chain = crate::chain::parse_chain(&text)?;
        let blade = BladeProfile::preset(&scn.environment.knife)
            .expect("scenario validation checked the knife preset");
        let board = Board {
            height: scn.environment.board_height,
            k_n: scn.environment.k_n,
            c_n: scn.environment.c_n,
            mu_v: scn.environment.mu_v,
        };
        let food = scn.environment.food.as_deref().map(|name| {
            let mut f = FoodItem::preset(
                name,
                scn.environment.food_y,
                scn.controller.slice_count,
            )
            .expect("scenario validation checked the food preset");
            if scn.environment.food_hardness != 1.0 {
                f.scale_hardness(scn.environment.food_hardness);
            }
            f
        });
        let mut sim = Self::new(
            chain,
            blade,
            board,
            food,
            scn.controller.clone(),
            &scn.plant.knife_frame,
            scn.run.dt,
        )?;
        sim.gravity_comp = scn.plant.gravity_comp;
        sim.hardness_step = scn.environment.hardness_step;
        if scn.environment.noise_sigma > 0.0 {
            sim.noise = Some((
                scn.environment.noise_sigma,
                rand_chacha::ChaCha8Rng::seed_from_u64(scn.run.seed),
            ));
        }
        if !scn.plant.q0.is_empty() {
            let n = sim.chain.joint_count().min(scn.plant.q0.len());
            sim.plant.joints.q[..n].copy_from_slice(&scn.plant.q0[..n]);
        }
        sim.settle();
        Ok(sim)
    }

    pub fn new(
        chain: ChainDescription,
        blade: BladeProfile,
        board: Board,
        food: Option<FoodItem>,
        cfg: RockingConfig,
        knife_frame: &str,
        dt: f64,
    ) -> Result<Self, SimError> {
        assert!(dt > 0.0);
        // the controller's board model stays at z = 0 regardless of the
        // physical board height: height sweeps move the board, not the
        // virtual mechanism
        let (mech, layout) = build_rocking_mechanism(&cfg, &blade, &chain, knife_frame, 0.0)?;
        let state = RockingState::new(&cfg);
        let plant = PlantState::new(&chain);
        let trace = Trace::new(chain.joint_count());
        let sensor_stride = ((0.01 / dt).round() as usize).max(1);
        let slice_planes = vec![0.0];
        Ok(Simulator {
            chain,
            blade,
            board,
            food,
            mech,
            layout,
            cfg,
            state,
            plant,
            trace,
            knife_frame: knife_frame.to_string(),
            gravity_comp: true,
            dt,
            noise: None,
            hardness_step: None,
            food_slice_offset: 0.0,
            dissipation: DissipationSplit::default(),
            wrench_sample: Vector3::zeros(),
            sensor_stride,
            switch_log: Vec::new(),
            k2_log: Vec::new(),
            separation_log: Vec::new(),
            slice_planes,
        })
    }

    /// Place the rail and plane masses at their partner robot points for the
    /// initial configuration, so the run starts without artificial stretch.
    pub fn settle(&mut self) {
        let points = self.robot_points(&self.plant.joints);
        crate::rocking::settle_masses_at_points(&mut self.mech, &self.layout, &points);
    }

    /// Frozen positions and velocities of the six attachment points.
    fn robot_points(&self, joints: &JointState) -> Vec<PointState> {
        let poses = self.chain.link_poses(&joints.q);
        let frame = self.chain.frame(&self.knife_frame).unwrap();
        let li = self.chain.link_id(&frame.parent).unwrap();
        let knife_pose = poses[li] * frame.origin;
        let qd = DVector::from_column_slice(&joints.qdot);
        knife_attachment_points(&self.blade)
            .iter()
            .map(|local| {
                let pos = transform_point(&knife_pose, local);
                let jac = self.chain.point_jacobian_at(&poses, li, &pos);
                let vel = &jac * &qd;
                PointState { pos, vel: Vector3::new(vel[0], vel[1], vel[2]) }
            })
            .collect()
    }

    /// World positions and velocities of the blade edge polyline.
    fn edge_points(&self, joints: &JointState) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
        let poses = self.chain.link_poses(&joints.q);
        let frame = self.chain.frame(&self.knife_frame).unwrap();
        let li = self.chain.link_id(&frame.parent).unwrap();
        let knife_pose = poses[li] * frame.origin;
        let qd = DVector::from_column_slice(&joints.qdot);
        let mut positions = Vec::with_capacity(self.blade.edge.len());
        let mut velocities = Vec::with_capacity(self.blade.edge.len());
        for local in &self.blade.edge {
            let pos = transform_point(&knife_pose, local);
            let jac = self.chain.point_jacobian_at(&poses, li, &pos);
            let vel = &jac * &qd;
            positions.push(pos);
            velocities.push(Vector3::new(vel[0], vel[1], vel[2]));
        }
        (positions, velocities)
    }

    /// Run for `duration` seconds, appending to the trace. On divergence the
    /// trace retains every completed control step.
    pub fn run(&mut self, duration: f64) -> Result<(), SimError> {
        let steps = (duration / self.dt).round() as usize;
        for _ in 0..steps {
            self.control_step()?;
        }
        Ok(())
    }

    pub fn control_step(&mut self) -> Result<(), SimError> {
        let t = self.plant.time;

        if let Some((step_t, factor)) = self.hardness_step {
            if t >= step_t {
                if let Some(food) = &mut self.food {
                    food.scale_hardness(factor);
                }
                self.hardness_step = None;
            }
        }

        let points = self.robot_points(&self.plant.joints);

        // hybrid state machine, cycle bookkeeping, adaptation, slice advance
        let p1 = points[0].pos;
        let p2 = points[1].pos;
        let ev = update_phase(
            &mut self.state,
            &mut self.mech,
            &self.layout,
            &p1,
            &p2,
            &self.cfg,
            t,
        );
        if ev != SwitchEvent::None {
            self.switch_log.push((t, ev));
        }
        if ev == SwitchEvent::RaiseToCut {
            let cycle = self.state.cycle_count - 1;
            let separated = self
                .state
                .window
                .last()
                .map(|r| r.separated)
                .unwrap_or(false);
            self.separation_log.push((cycle, separated));
            // desired handle depth: heel resting on the board
            let heel_drop = -self.blade.edge.last().unwrap().z;
            if maybe_adapt(
                &mut self.state,
                &self.cfg,
                &mut self.mech,
                &self.layout,
                self.board.height + heel_drop,
            ) {
                self.k2_log.push((t, self.state.k2));
            }
            if separated && !self.state.slices_done {
                let before = self.mech.references[self.layout.reference].candidates[0].x;
                advance_slice(
                    &mut self.state,
                    &self.cfg,
                    &mut self.mech,
                    &self.layout,
                    &points,
                );
                let after = self.mech.references[self.layout.reference].candidates[0].x;
                if (after - before).abs() > 0.0 {
                    self.food_slice_offset = after;
                    self.slice_planes.push(after);
                }
            }
        }

        // Jacobian-transpose torque from the frozen virtual-mechanism forces
        let forces = self.mech.component_forces(&points);
        let poses = self.chain.link_poses(&self.plant.joints.q);
        let frame = self.chain.frame(&self.knife_frame).unwrap();
        let li = self.chain.link_id(&frame.parent).unwrap();
        let n = self.chain.joint_count();
        let mut tau = DVector::zeros(n);
        for (p, f) in points.iter().zip(&forces) {
            let jac = self.chain.point_jacobian_at(&poses, li, &p.pos);
            tau += jac.transpose() * f;
        }
        if self.gravity_comp {
            tau += dynamics::gravity_torques(&self.chain, &self.plant.joints.q);
        }

        // physics + contact + rail masses at the fine step
        let h = self.dt / SUBSTEPS as f64;
        let mut wrench = Vector3::zeros();
        for _ in 0..SUBSTEPS {
            let (edge_pos, edge_vel) = self.edge_points(&self.plant.joints);
            let mut port = ExternalPort::default();
            // power removed by the dissipative environment channels only; the
            // board penalty spring is conservative and stays off the ledger
            let mut env_power = 0.0;
            let mut net_env = Vector3::zeros();
            for (i, (pos, vel)) in edge_pos.iter().zip(&edge_vel).enumerate() {
                let f_board = board_contact_force(&self.board, pos, vel);
                if f_board != Vector3::zeros() {
                    port.attachments.push(PortForce {
                        frame: self.knife_frame.clone(),
                        local_point: self.blade.edge[i],
                        force: f_board,
                    });
                    let depth = (self.board.height - pos.z).max(0.0);
                    let spring_power = self.board.k_n * depth * vel.z;
                    env_power += f_board.dot(vel) - spring_power;
                    net_env += f_board;
                }
            }
            if let Some(food) = &mut self.food {
                let shifted: Vec<Vector3<f64>> = edge_pos
                    .iter()
                    .map(|p| p - Vector3::new(self.food_slice_offset, 0.0, 0.0))
                    .collect();
                let f_food = food.food_forces(
                    &shifted,
                    &edge_vel,
                    self.board.height,
                    self.state.slice_index,
                );
                for (i, f) in f_food.iter().enumerate() {
                    if *f != Vector3::zeros() {
                        port.attachments.push(PortForce {
                            frame: self.knife_frame.clone(),
                            local_point: self.blade.edge[i],
                            force: *f,
                        });
                        env_power += f.dot(&edge_vel[i]);
                        net_env += *f;
                    }
                }
            }
            // work done by the environment on the robot is negative while the
            // environment absorbs energy
            self.dissipation.environment += -env_power * h;
            wrench = net_env;

            let qd_before = self.plant.joints.qdot.clone();
            self.plant = dynamics::step(&self.chain, &self.plant, &tau, &port, h)?;
            self.dissipation.joint_damping += self
                .chain
                .joints
                .iter()
                .zip(&qd_before)
                .map(|(j, qd)| j.damping * qd * qd * h)
                .sum::<f64>();

            let sub_points = self.robot_points(&self.plant.joints);
            self.mech.step_rail_masses(&sub_points, h);
        }
        self.dissipation.virtual_dampers = self.mech.ledger.w_dissipation_cum;

        if !self.is_finite() {
            return Err(SimError::Diverged(self.plant.time));
        }

        // 100 Hz wrist sensor: sample-and-hold, optional Gaussian noise
        let step_index = (self.plant.time / self.dt).round() as usize;
        if step_index % self.sensor_stride == 0 {
            let mut sample = wrench;
            if let Some((sigma, rng)) = &mut self.noise {
                let normal = Normal::new(0.0, *sigma).unwrap();
                for c in sample.iter_mut() {
                    *c += normal.sample(rng);
                }
            }
            self.wrench_sample = sample;
        }

        self.record_row(&points);
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.plant.joints.q.iter().all(|v| v.is_finite())
            && self.plant.joints.qdot.iter().all(|v| v.is_finite())
            && self
                .mech
                .rail_masses
                .iter()
                .all(|m| m.coord.iter().chain(m.vel.iter()).all(|v| v.is_finite()))
    }

    fn record_row(&mut self, points: &[PointState]) {
        let e_r = dynamics::mechanical_energy(&self.chain, &self.plant);
        let e_vmc = self.mech.energy(points);
        // cycle record upkeep: lowest handle height and overshoot during
        // cutting. The handle is the telltale: a blocked stroke leaves the
        // blade tilted with the handle high even though the tip is down.
        if self.state.phase == Phase::Cutting {
            let z_handle = points[1].pos.z;
            if z_handle < self.state.current.z_min_achieved {
                self.state.current.z_min_achieved = z_handle;
            }
            // the handle bottoms out at the heel height when the heel rests
            // on the board; going further than a dead band below that is
            // overshoot (the edge is being crushed into the board)
            let heel_drop = -self.blade.edge.last().unwrap().z;
            let over = self.board.height + heel_drop - 0.002 - z_handle;
            if over > self.state.current.overshoot {
                self.state.current.overshoot = over.max(0.0);
            }
            if let Some(food) = &self.food {
                if food.is_separated(self.state.slice_index) {
                    self.state.current.separated = true;
                }
            } else {
                // pure rocking on a bare board counts as trivially separated
                self.state.current.separated = true;
            }
        }
        self.trace.rows.push(TraceRow {
            t: self.plant.time,
            q: self.plant.joints.q.clone(),
            qd: self.plant.joints.qdot.clone(),
            p1: points[0].pos,
            p2: points[1].pos,
            pb: self.mech.rail_masses[self.layout.rail_b].position(),
            phase: match self.state.phase {
                Phase::Cutting => 0,
                Phase::Raising => 1,
            },
            force: self.wrench_sample,
            e_r,
            e_vmc,
            wdiss_cum: self.dissipation.total(),
            welast_cum: self.mech.ledger.w_elastic_cum,
            k2: self.state.k2,
            slice_index: self.state.slice_index,
        });
    }

    /// Deepest board penetration of any blade edge point over the trace-free
    /// current state; used by tests via per-step sampling.
    pub fn max_penetration(&self) -> f64 {
        let (edge_pos, _) = self.edge_points(&self.plant.joints);
        edge_pos
            .iter()
            .map(|p| self.board.height - p.z)
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Board;

    fn planar3() -> ChainDescription {
        let text = std::fs::read_to_string(
            std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/planar3.chain"),
        )
        .unwrap();
        crate::chain::parse_chain(&text).unwrap()
    }

    fn basic_sim() -> Simulator {
        let chain = planar3();
        let blade = BladeProfile::preset("knife1").unwrap();
        let board = Board::default();
        let cfg = RockingConfig::a1_uniform();
        let mut sim =
            Simulator::new(chain, blade, board, None, cfg, "knife", 1e-3).unwrap();
        sim.settle();
        sim
    }

    #[test]
    fn zero_duration_empty_trace() {
        let mut sim = basic_sim();
        sim.run(0.0).unwrap();
        assert!(sim.trace.rows.is_empty());
    }

    #[test]
    fn short_run_stays_finite() {
        let mut sim = basic_sim();
        sim.run(1.0).unwrap();
        assert_eq!(sim.trace.rows.len(), 1000);
        assert!(sim.is_finite());
        let last = sim.trace.rows.last().unwrap();
        assert!(last.e_r.is_finite() && last.e_vmc.is_finite());
    }

    #[test]
    fn trace_time_axis_uniform() {
        let mut sim = basic_sim();
        sim.run(0.1).unwrap();
        for w in sim.trace.rows.windows(2) {
            let dt = w[1].t - w[0].t;
            assert!((dt - 1e-3).abs() < 1e-9);
        }
    }

    #[test]
    fn dissipation_monotone() {
        let mut sim = basic_sim();
        sim.run(2.0).unwrap();
        let mut last = 0.0;
        for r in &sim.trace.rows {
            assert!(r.wdiss_cum >= last - 1e-12);
            last = r.wdiss_cum;
        }
    }
}
