//! Robot kinematic model: URDF parsing, forward kinematics and link adjacency.

mod kinematics;
mod urdf;

use std::collections::BTreeSet;
use std::path::PathBuf;

use nalgebra::{Isometry3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kinematics::{batch_seed, ConfigSampler, Configuration, BATCH_SIZE};
pub use urdf::parse_urdf;

/// A rigid transform (meters, radians).
pub type RigidTransform = Isometry3<f64>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("document root is <{0}>, expected <robot>")]
    NotARobot(String),
    #[error("{element} is missing required attribute `{attribute}`")]
    MissingAttribute { element: String, attribute: String },
    #[error("invalid number in {context}: `{value}`")]
    InvalidNumber { context: String, value: String },
    #[error("joint `{joint}` has unknown type `{kind}`")]
    UnknownJointType { joint: String, kind: String },
    #[error("joint `{joint}` has unsupported type `{kind}` (only revolute, continuous, prismatic and fixed are supported)")]
    UnsupportedJointType { joint: String, kind: String },
    #[error("duplicate link name `{0}`")]
    DuplicateLink(String),
    #[error("duplicate joint name `{0}`")]
    DuplicateJoint(String),
    #[error("joint `{joint}` references missing link `{link}`")]
    MissingLink { joint: String, link: String },
    #[error("joint graph is not a tree: {0}")]
    NotATree(String),
    #[error("joint `{0}` has a zero-length axis")]
    ZeroAxis(String),
    #[error("joint `{joint}` needs limits with lower <= upper (got {lower}..{upper})")]
    InvalidLimits { joint: String, lower: f64, upper: f64 },
    #[error("joint `{0}` is missing a <limit> element")]
    MissingLimits(String),
    #[error("robot has no links")]
    NoLinks,
    #[error("configuration has {got} values but the robot has {expected} degrees of freedom")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointType {
    Revolute,
    Continuous,
    Prismatic,
    Fixed,
}

impl JointType {
    pub fn is_actuated(self) -> bool {
        self != JointType::Fixed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JointType::Revolute => "revolute",
            JointType::Continuous => "continuous",
            JointType::Prismatic => "prismatic",
            JointType::Fixed => "fixed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub lower: f64,
    pub upper: f64,
}

/// Where a piece of link geometry comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometrySource {
    /// Mesh file, already resolved against the mesh root.
    Mesh { path: PathBuf, scale: Vector3<f64> },
    Box { size: Vector3<f64> },
    Cylinder { radius: f64, length: f64 },
    Sphere { radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryElement {
    pub origin: RigidTransform,
    pub source: GeometrySource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub visual: Vec<GeometryElement>,
    pub collision: Vec<GeometryElement>,
    pub inertial_origin: RigidTransform,
}

impl Link {
    /// Geometry used to build shapes: collision elements when present, visual otherwise.
    pub fn geometry(&self) -> &[GeometryElement] {
        if self.collision.is_empty() {
            &self.visual
        } else {
            &self.collision
        }
    }

    pub fn has_geometry(&self) -> bool {
        !self.geometry().is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub joint_type: JointType,
    pub parent: usize,
    pub child: usize,
    pub origin: RigidTransform,
    pub axis: Vector3<f64>,
    pub limits: Option<JointLimits>,
}

impl Joint {
    /// Motion of the child frame relative to the joint frame at `value`.
    pub fn motion(&self, value: f64) -> RigidTransform {
        match self.joint_type {
            JointType::Revolute | JointType::Continuous => {
                Isometry3::rotation(self.axis * value)
            }
            JointType::Prismatic => Isometry3::translation(
                self.axis.x * value,
                self.axis.y * value,
                self.axis.z * value,
            ),
            JointType::Fixed => Isometry3::identity(),
        }
    }

    /// Interval that sampling draws from.
    pub fn sampling_range(&self) -> (f64, f64) {
        match (self.joint_type, self.limits) {
            (JointType::Continuous, _) => (-std::f64::consts::PI, std::f64::consts::PI),
            (_, Some(l)) => (l.lower, l.upper),
            _ => (0.0, 0.0),
        }
    }
}

/// Kinematic tree of a robot. Immutable once parsed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    pub links: Vec<Link>,
    pub joints: Vec<Joint>,
    pub root_link_index: usize,
    pub dof: usize,
    /// Indices into `joints` of actuated joints, in configuration order.
    pub active_joints: Vec<usize>,
    /// Joint indices ordered so that every parent link is posed before its children.
    traversal: Vec<usize>,
}

impl RobotModel {
    pub(crate) fn new(
        name: String,
        links: Vec<Link>,
        joints: Vec<Joint>,
    ) -> Result<Self, ModelError> {
        if links.is_empty() {
            return Err(ModelError::NoLinks);
        }
        let n = links.len();
        let mut parent_joint: Vec<Option<usize>> = vec![None; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (ji, joint) in joints.iter().enumerate() {
            if joint.parent == joint.child {
                return Err(ModelError::NotATree(format!(
                    "joint `{}` connects link `{}` to itself",
                    joint.name, links[joint.parent].name
                )));
            }
            if let Some(other) = parent_joint[joint.child] {
                return Err(ModelError::NotATree(format!(
                    "link `{}` is the child of both `{}` and `{}`",
                    links[joint.child].name, joints[other].name, joint.name
                )));
            }
            parent_joint[joint.child] = Some(ji);
            children[joint.parent].push(ji);
        }
        let roots: Vec<usize> = (0..n).filter(|&l| parent_joint[l].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(ModelError::NotATree("no root link (cycle)".into())),
            many => {
                return Err(ModelError::NotATree(format!(
                    "{} disconnected root links ({})",
                    many.len(),
                    many.iter()
                        .map(|&l| links[l].name.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )))
            }
        };
        let mut traversal = Vec::with_capacity(joints.len());
        let mut stack = vec![root];
        let mut seen = vec![false; n];
        seen[root] = true;
        while let Some(link) = stack.pop() {
            for &ji in children[link].iter().rev() {
                let child = joints[ji].child;
                if seen[child] {
                    return Err(ModelError::NotATree("cycle detected".into()));
                }
                seen[child] = true;
                traversal.push(ji);
                stack.push(child);
            }
        }
        if let Some(unreached) = seen.iter().position(|s| !s) {
            return Err(ModelError::NotATree(format!(
                "link `{}` is not reachable from root `{}` (cycle)",
                links[unreached].name, links[root].name
            )));
        }
        let active_joints: Vec<usize> = joints
            .iter()
            .enumerate()
            .filter(|(_, j)| j.joint_type.is_actuated())
            .map(|(i, _)| i)
            .collect();
        Ok(RobotModel {
            name,
            dof: active_joints.len(),
            links,
            joints,
            root_link_index: root,
            active_joints,
            traversal,
        })
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    /// Joint limits in configuration order (the sampling range for continuous joints).
    pub fn active_ranges(&self) -> Vec<(f64, f64)> {
        self.active_joints
            .iter()
            .map(|&j| self.joints[j].sampling_range())
            .collect()
    }

    pub fn zero_configuration(&self) -> Configuration {
        Configuration::new(vec![0.0; self.dof])
    }

    /// World pose of every link, indexed like `links`.
    pub fn forward_kinematics(
        &self,
        config: &Configuration,
    ) -> Result<Vec<RigidTransform>, ModelError> {
        if config.len() != self.dof {
            return Err(ModelError::DimensionMismatch {
                expected: self.dof,
                got: config.len(),
            });
        }
        let mut value_of = vec![0.0; self.joints.len()];
        for (slot, &ji) in self.active_joints.iter().enumerate() {
            value_of[ji] = config.values()[slot];
        }
        let mut poses = vec![RigidTransform::identity(); self.links.len()];
        for &ji in &self.traversal {
            let joint = &self.joints[ji];
            poses[joint.child] = poses[joint.parent] * joint.origin * joint.motion(value_of[ji]);
        }
        Ok(poses)
    }

    /// Unordered adjacent link pairs `(a, b)` with `a < b`.
    ///
    /// Every joint's parent/child pair is adjacent. Links welded together by fixed
    /// joints form one rigid group; all members of a group are mutually adjacent, and
    /// a non-fixed joint between two groups makes every cross pair adjacent.
    pub fn adjacent_link_pairs(&self) -> BTreeSet<(usize, usize)> {
        let n = self.links.len();
        let mut group: Vec<usize> = (0..n).collect();
        fn find(group: &mut [usize], mut x: usize) -> usize {
            while group[x] != x {
                group[x] = group[group[x]];
                x = group[x];
            }
            x
        }
        for joint in self.joints.iter().filter(|j| j.joint_type == JointType::Fixed) {
            let a = find(&mut group, joint.parent);
            let b = find(&mut group, joint.child);
            if a != b {
                group[a.max(b)] = a.min(b);
            }
        }
        let roots: Vec<usize> = (0..n).map(|l| find(&mut group, l)).collect();
        let roots = &roots;
        let members = |root: usize| (0..n).filter(move |&l| roots[l] == root);

        let mut pairs = BTreeSet::new();
        let mut insert = |a: usize, b: usize| {
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        };
        for joint in &self.joints {
            insert(joint.parent, joint.child);
            for a in members(roots[joint.parent]) {
                for b in members(roots[joint.child]) {
                    insert(a, b);
                }
            }
        }
        pairs
    }
}
