//! Kinematic chain: data model, description-file parser, forward kinematics
//! and point Jacobians.
//!
//! A chain is a tree of links connected by revolute joints, rooted at a single
//! fixed base link. Named frames can be attached to any link with a fixed pose;
//! virtual-mechanism attachment points and the knife are expressed this way.
//!
//! The description format is line oriented. Sections open at column zero with
//! `link <name>`, `joint <name>` or `frame <name>`, followed by indented
//! `key = value` lines. Vectors are space separated, rotations are fixed-axis
//! roll-pitch-yaw, comments start with `#`. The fixture files under
//! `fixtures/` are normative examples.

use std::collections::HashMap;

use nalgebra::{IsometryMatrix3, Matrix3, Rotation3, Translation3, Vector3};
use thiserror::Error;

pub type Pose = IsometryMatrix3<f64>;

/// Transform a position vector by a pose (rotation and translation).
pub fn transform_point(pose: &Pose, p: &Vector3<f64>) -> Vector3<f64> {
    pose.transform_point(&nalgebra::Point3::from(*p)).coords
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("joint `{joint}` references unknown link `{link}`")]
    UnknownLink { joint: String, link: String },
    #[error("frame `{frame}` references unknown link `{link}`")]
    UnknownFrameParent { frame: String, link: String },
    #[error("cycle in link graph involving `{0}`")]
    Cycle(String),
    #[error("link graph is not a tree rooted at a single base (roots: {0:?})")]
    NotATree(Vec<String>),
    #[error("joint `{0}` axis is not unit norm")]
    NonUnitAxis(String),
    #[error("link `{0}` inertia is not symmetric positive semidefinite")]
    BadInertia(String),
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("joint-state dimension {got} does not match chain joint count {expected}")]
    DimensionMismatch { got: usize, expected: usize },
}

#[derive(Debug, Clone)]
pub struct Link {
    pub name: String,
    pub mass: f64,
    /// Center of mass in the link frame.
    pub com: Vector3<f64>,
    /// Rotational inertia about the COM, in the link frame.
    pub inertia: Matrix3<f64>,
}

#[derive(Debug, Clone)]
pub struct Joint {
    pub name: String,
    pub parent: String,
    pub child: String,
    /// Rotation axis in the joint frame (after the origin transform).
    pub axis: Vector3<f64>,
    /// Fixed transform from the parent link frame to the joint frame.
    pub origin: Pose,
    /// Viscous damping, N·m·s/rad.
    pub damping: f64,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub name: String,
    pub parent: String,
    pub origin: Pose,
}

/// Validated kinematic tree. Immutable after construction.
#[derive(Debug, Clone)]
pub struct ChainDescription {
    pub links: Vec<Link>,
    /// Joints in file order; joint i drives coordinate q[i].
    pub joints: Vec<Joint>,
    pub frames: Vec<Frame>,
    root: usize,
    link_index: HashMap<String, usize>,
    frame_index: HashMap<String, usize>,
    /// For each link, the index of its parent joint (None for the root).
    parent_joint: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl JointState {
    pub fn zeros(n: usize) -> Self {
        JointState { q: vec![0.0; n], qdot: vec![0.0; n] }
    }
}

pub fn rpy_rotation(roll: f64, pitch: f64, yaw: f64) -> Rotation3<f64> {
    Rotation3::from_euler_angles(roll, pitch, yaw)
}

impl ChainDescription {
    pub fn joint_count(&self) -> usize {
        self.joints.len()
    }

    pub fn root_link(&self) -> &Link {
        &self.links[self.root]
    }

    pub fn link_id(&self, name: &str) -> Option<usize> {
        self.link_index.get(name).copied()
    }

    pub fn frame(&self, name: &str) -> Result<&Frame, ChainError> {
        self.frame_index
            .get(name)
            .map(|&i| &self.frames[i])
            .ok_or_else(|| ChainError::UnknownFrame(name.to_string()))
    }

    pub fn has_frame(&self, name: &str) -> bool {
        self.frame_index.contains_key(name)
    }

    /// Parent joint index of a link, None for the root.
    pub fn parent_joint_of(&self, link: usize) -> Option<usize> {
        self.parent_joint[link]
    }

    pub fn check_state(&self, state: &JointState) -> Result<(), ChainError> {
        let n = self.joint_count();
        if state.q.len() != n || state.qdot.len() != n {
            return Err(ChainError::DimensionMismatch { got: state.q.len(), expected: n });
        }
        Ok(())
    }

    /// World pose of every link, indexed like `self.links`.
    pub fn link_poses(&self, q: &[f64]) -> Vec<Pose> {
        let mut poses = vec![Pose::identity(); self.links.len()];
        // links are stored in topological order (root first) by construction
        for (li, link) in self.links.iter().enumerate() {
            let _ = link;
            if let Some(ji) = self.parent_joint[li] {
                let joint = &self.joints[ji];
                let parent = self.link_index[&joint.parent];
                let spin = Rotation3::from_axis_angle(
                    &nalgebra::Unit::new_normalize(joint.axis),
                    q[ji],
                );
                poses[li] = poses[parent] * joint.origin * spin;
            }
        }
        poses
    }

    /// Pose of a named frame in the world.
    pub fn forward_kinematics(&self, state: &JointState, frame: &str) -> Result<Pose, ChainError> {
        self.check_state(state)?;
        let f = self.frame(frame)?;
        let poses = self.link_poses(&state.q);
        let li = self.link_index[&f.parent];
        Ok(poses[li] * f.origin)
    }

    /// 3×n position Jacobian of a point given in the frame's local coordinates:
    /// J q̇ is the world-frame velocity of the point.
    pub fn point_jacobian(
        &self,
        state: &JointState,
        frame: &str,
        local_point: &Vector3<f64>,
    ) -> Result<nalgebra::DMatrix<f64>, ChainError> {
        self.check_state(state)?;
        let f = self.frame(frame)?;
        let poses = self.link_poses(&state.q);
        let li = self.link_index[&f.parent];
        let point = transform_point(&(poses[li] * f.origin), local_point);
        Ok(self.point_jacobian_at(&poses, li, &point))
    }

    /// Jacobian of a world-frame point rigidly attached to `link`.
    /// `poses` must be the link poses at the current configuration.
    pub fn point_jacobian_at(
        &self,
        poses: &[Pose],
        link: usize,
        world_point: &Vector3<f64>,
    ) -> nalgebra::DMatrix<f64> {
        let n = self.joint_count();
        let mut jac = nalgebra::DMatrix::<f64>::zeros(3, n);
        let mut li = link;
        while let Some(ji) = self.parent_joint[li] {
            let joint = &self.joints[ji];
            let parent = self.link_index[&joint.parent];
            let joint_pose = poses[parent] * joint.origin;
            let axis_w = joint_pose.rotation * joint.axis;
            let col = axis_w.cross(&(world_point - joint_pose.translation.vector));
            jac.set_column(ji, &nalgebra::DVector::from_column_slice(col.as_slice()));
            li = parent;
        }
        jac
    }

    /// World axis and origin of every joint at configuration `q`; used by the
    /// dynamics recursions.
    pub fn joint_axes_origins(&self, poses: &[Pose]) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        self.joints
            .iter()
            .map(|joint| {
                let parent = self.link_index[&joint.parent];
                let jp = poses[parent] * joint.origin;
                (jp.rotation * joint.axis, jp.translation.vector)
            })
            .collect()
    }

    /// Serialize back to the description format. `parse` of the output yields
    /// an identical structure.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let fmt_vec = |v: &Vector3<f64>| format!("{} {} {}", v.x, v.y, v.z);
        for link in &self.links {
            out.push_str(&format!("link {}\n", link.name));
            out.push_str(&format!("  mass = {}\n", link.mass));
            out.push_str(&format!("  com = {}\n", fmt_vec(&link.com)));
            let i = &link.inertia;
            out.push_str(&format!(
                "  inertia = {} {} {} {} {} {} {} {} {}\n",
                i[(0, 0)], i[(0, 1)], i[(0, 2)],
                i[(1, 0)], i[(1, 1)], i[(1, 2)],
                i[(2, 0)], i[(2, 1)], i[(2, 2)],
            ));
        }
        for joint in &self.joints {
            let (r, p, y) = joint.origin.rotation.euler_angles();
            out.push_str(&format!("joint {}\n", joint.name));
            out.push_str(&format!("  parent = {}\n", joint.parent));
            out.push_str(&format!("  child = {}\n", joint.child));
            out.push_str(&format!("  xyz = {}\n", fmt_vec(&joint.origin.translation.vector)));
            out.push_str(&format!("  rpy = {} {} {}\n", r, p, y));
            out.push_str(&format!("  axis = {}\n", fmt_vec(&joint.axis)));
            out.push_str(&format!("  damping = {}\n", joint.damping));
        }
        for frame in &self.frames {
            let (r, p, y) = frame.origin.rotation.euler_angles();
            out.push_str(&format!("frame {}\n", frame.name));
            out.push_str(&format!("  parent = {}\n", frame.parent));
            out.push_str(&format!("  xyz = {}\n", fmt_vec(&frame.origin.translation.vector)));
            out.push_str(&format!("  rpy = {} {} {}\n", r, p, y));
        }
        out
    }
}

#[derive(Default)]
struct RawSection {
    kind: String,
    name: String,
    line: usize,
    props: HashMap<String, (String, usize)>,
}

fn parse_floats(s: &str, n: usize, line: usize) -> Result<Vec<f64>, ChainError> {
    let vals: Result<Vec<f64>, _> = s.split_whitespace().map(|t| t.parse::<f64>()).collect();
    match vals {
        Ok(v) if v.len() == n => Ok(v),
        Ok(v) => Err(ChainError::Syntax {
            line,
            msg: format!("expected {n} numbers, got {}", v.len()),
        }),
        Err(e) => Err(ChainError::Syntax { line, msg: format!("bad number: {e}") }),
    }
}

fn pose_from_props(sec: &RawSection) -> Result<Pose, ChainError> {
    let xyz = match sec.props.get("xyz") {
        Some((v, l)) => {
            let f = parse_floats(v, 3, *l)?;
            Vector3::new(f[0], f[1], f[2])
        }
        None => Vector3::zeros(),
    };
    let rot = match sec.props.get("rpy") {
        Some((v, l)) => {
            let f = parse_floats(v, 3, *l)?;
            rpy_rotation(f[0], f[1], f[2])
        }
        None => Rotation3::identity(),
    };
    Ok(Pose::from_parts(Translation3::from(xyz), rot))
}

/// Parse a chain-description document and validate the result.
pub fn parse_chain(text: &str) -> Result<ChainDescription, ChainError> {
    let mut sections: Vec<RawSection> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        let indented = line.starts_with(' ') || line.starts_with('\t');
        if indented {
            let sec = sections.last_mut().ok_or(ChainError::Syntax {
                line: line_no,
                msg: "property before any section".into(),
            })?;
            let (key, value) = line.split_once('=').ok_or(ChainError::Syntax {
                line: line_no,
                msg: "expected `key = value`".into(),
            })?;
            sec.props
                .insert(key.trim().to_string(), (value.trim().to_string(), line_no));
        } else {
            let mut parts = line.split_whitespace();
            let kind = parts.next().unwrap().to_string();
            let name = parts.next().map(str::to_string).ok_or(ChainError::Syntax {
                line: line_no,
                msg: format!("`{kind}` needs a name"),
            })?;
            if !matches!(kind.as_str(), "link" | "joint" | "frame") {
                return Err(ChainError::Syntax {
                    line: line_no,
                    msg: format!("unknown section `{kind}`"),
                });
            }
            sections.push(RawSection { kind, name, line: line_no, props: HashMap::new() });
        }
    }

    let mut links = Vec::new();
    let mut joints = Vec::new();
    let mut frames = Vec::new();
    for sec in &sections {
        let get = |key: &str| -> Result<&(String, usize), ChainError> {
            sec.props.get(key).ok_or(ChainError::Syntax {
                line: sec.line,
                msg: format!("{} `{}` missing `{key}`", sec.kind, sec.name),
            })
        };
        match sec.kind.as_str() {
            "link" => {
                let mass = match sec.props.get("mass") {
                    Some((v, l)) => parse_floats(v, 1, *l)?[0],
                    None => 0.0,
                };
                let com = match sec.props.get("com") {
                    Some((v, l)) => {
                        let f = parse_floats(v, 3, *l)?;
                        Vector3::new(f[0], f[1], f[2])
                    }
                    None => Vector3::zeros(),
                };
                let inertia = match sec.props.get("inertia") {
                    Some((v, l)) => {
                        let f = parse_floats(v, 9, *l)?;
                        Matrix3::from_row_slice(&f)
                    }
                    None => Matrix3::zeros(),
                };
                links.push(Link { name: sec.name.clone(), mass, com, inertia });
            }
            "joint" => {
                let axis = {
                    let (v, l) = get("axis")?;
                    let f = parse_floats(v, 3, *l)?;
                    Vector3::new(f[0], f[1], f[2])
                };
                let damping = match sec.props.get("damping") {
                    Some((v, l)) => parse_floats(v, 1, *l)?[0],
                    None => 0.1,
                };
                joints.push(Joint {
                    name: sec.name.clone(),
                    parent: get("parent")?.0.clone(),
                    child: get("child")?.0.clone(),
                    axis,
                    origin: pose_from_props(sec)?,
                    damping,
                });
            }
            "frame" => {
                frames.push(Frame {
                    name: sec.name.clone(),
                    parent: get("parent")?.0.clone(),
                    origin: pose_from_props(sec)?,
                });
            }
            _ => unreachable!(),
        }
    }
    build_chain(links, joints, frames)
}

/// Validate components and assemble a `ChainDescription`.
pub fn build_chain(
    links: Vec<Link>,
    joints: Vec<Joint>,
    frames: Vec<Frame>,
) -> Result<ChainDescription, ChainError> {
    let mut names = std::collections::HashSet::new();
    for name in links
        .iter()
        .map(|l| &l.name)
        .chain(joints.iter().map(|j| &j.name))
        .chain(frames.iter().map(|f| &f.name))
    {
        if !names.insert(name.clone()) {
            return Err(ChainError::DuplicateName(name.clone()));
        }
    }

    let link_index: HashMap<String, usize> =
        links.iter().enumerate().map(|(i, l)| (l.name.clone(), i)).collect();
    let frame_index: HashMap<String, usize> =
        frames.iter().enumerate().map(|(i, f)| (f.name.clone(), i)).collect();

    let mut parent_joint = vec![None; links.len()];
    for (ji, joint) in joints.iter().enumerate() {
        if (joint.axis.norm() - 1.0).abs() >= 1e-9 {
            return Err(ChainError::NonUnitAxis(joint.name.clone()));
        }
        if !link_index.contains_key(&joint.parent) {
            return Err(ChainError::UnknownLink {
                joint: joint.name.clone(),
                link: joint.parent.clone(),
            });
        }
        let child = *link_index.get(&joint.child).ok_or(ChainError::UnknownLink {
            joint: joint.name.clone(),
            link: joint.child.clone(),
        })?;
        if parent_joint[child].is_some() {
            return Err(ChainError::Cycle(joint.child.clone()));
        }
        parent_joint[child] = Some(ji);
    }
    for frame in &frames {
        if !link_index.contains_key(&frame.parent) {
            return Err(ChainError::UnknownFrameParent {
                frame: frame.name.clone(),
                link: frame.parent.clone(),
            });
        }
    }

    // single root, no cycles, every link reaches the root
    let roots: Vec<String> = links
        .iter()
        .enumerate()
        .filter(|(i, _)| parent_joint[*i].is_none())
        .map(|(_, l)| l.name.clone())
        .collect();
    if roots.is_empty() {
        return Err(ChainError::Cycle(links[0].name.clone()));
    }
    if roots.len() != 1 {
        return Err(ChainError::NotATree(roots));
    }
    let root = link_index[&roots[0]];
    for start in 0..links.len() {
        let mut li = start;
        let mut hops = 0;
        while let Some(ji) = parent_joint[li] {
            li = link_index[&joints[ji].parent];
            hops += 1;
            if hops > links.len() {
                return Err(ChainError::Cycle(links[start].name.clone()));
            }
        }
        if li != root {
            return Err(ChainError::NotATree(vec![
                links[root].name.clone(),
                links[start].name.clone(),
            ]));
        }
    }

    // links must be topologically ordered for the single-pass FK
    for (li, _) in links.iter().enumerate() {
        if let Some(ji) = parent_joint[li] {
            let pi = link_index[&joints[ji].parent];
            if pi >= li {
                // reorder is possible but fixture files list parents first;
                // reject to keep the invariant simple
                return Err(ChainError::Syntax {
                    line: 0,
                    msg: format!(
                        "link `{}` must appear after its parent `{}`",
                        links[li].name, links[pi].name
                    ),
                });
            }
        }
    }

    for link in &links {
        let sym = (link.inertia - link.inertia.transpose()).norm();
        if sym > 1e-9 {
            return Err(ChainError::BadInertia(link.name.clone()));
        }
        let eig = link.inertia.symmetric_eigenvalues();
        if eig.iter().any(|&e| e < -1e-9) {
            return Err(ChainError::BadInertia(link.name.clone()));
        }
    }

    Ok(ChainDescription { links, joints, frames, root, link_index, frame_index, parent_joint })
}
