use std::collections::VecDeque;

use nalgebra::{Isometry3, Translation3, UnitQuaternion};

use crate::{Error, Result, Vec3};

/// Absolute joint transforms, indexed like the rig's joints.
pub type Pose = Vec<Isometry3<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    /// Translation relative to the parent frame.
    pub translation: Vec3,
    /// Rotation relative to the parent frame.
    pub rotation: UnitQuaternion<f64>,
}

impl Joint {
    pub fn local(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }
}

/// Loop-free joint tree with a single root.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonRig {
    joints: Vec<Joint>,
    /// Parents always precede children.
    order: Vec<usize>,
    children: Vec<Vec<usize>>,
}

impl SkeletonRig {
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        let n = joints.len();
        if n == 0 {
            return Err(Error::InvalidTopology("rig has no joints".into()));
        }
        let roots: Vec<usize> = (0..n).filter(|&j| joints[j].parent.is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidTopology(format!(
                "expected exactly one root, found {}",
                roots.len()
            )));
        }
        let mut children = vec![Vec::new(); n];
        for (j, joint) in joints.iter().enumerate() {
            if let Some(p) = joint.parent {
                if p >= n {
                    return Err(Error::InvalidTopology(format!(
                        "joint `{}` has parent index {p} out of range",
                        joint.name
                    )));
                }
                if p == j {
                    return Err(Error::InvalidTopology(format!(
                        "joint `{}` is its own parent",
                        joint.name
                    )));
                }
                children[p].push(j);
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue = VecDeque::from([roots[0]]);
        while let Some(j) = queue.pop_front() {
            order.push(j);
            queue.extend(children[j].iter().copied());
        }
        if order.len() != n {
            let stuck: Vec<&str> = (0..n)
                .filter(|j| !order.contains(j))
                .map(|j| joints[j].name.as_str())
                .collect();
            return Err(Error::InvalidTopology(format!(
                "cycle detected among joints {stuck:?}"
            )));
        }
        Ok(Self {
            joints,
            order,
            children,
        })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    /// Joint indices with every parent listed before its children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn children(&self, j: usize) -> &[usize] {
        &self.children[j]
    }

    pub fn is_leaf(&self, j: usize) -> bool {
        self.children[j].is_empty()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.is_leaf(j)).collect()
    }

    pub fn find(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Replaces one joint's local transform; hierarchy is untouched.
    pub fn set_local(&mut self, j: usize, translation: Vec3, rotation: UnitQuaternion<f64>) {
        self.joints[j].translation = translation;
        self.joints[j].rotation = rotation;
    }
}

/// Absolute transform of every joint: the root's local transform, then
/// `abs(child) = abs(parent) * local(child)` down the tree.
pub fn forward_kinematics(rig: &SkeletonRig) -> Pose {
    let mut pose = vec![Isometry3::identity(); rig.len()];
    for &j in rig.topological_order() {
        let joint = &rig.joints[j];
        pose[j] = match joint.parent {
            Some(p) => pose[p] * joint.local(),
            None => joint.local(),
        };
    }
    pose
}
