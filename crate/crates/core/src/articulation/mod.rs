//! Articulated structures: part segmentation, kinematic tree, motion constraints,
//! posing, JSON and URDF interchange, and synthetic objects.

mod json;
mod kinematics;
mod structure;
mod synth;
mod urdf;

pub use json::{from_json, load_json, save_json, to_json};
pub use kinematics::{
    apply_articulation, fully_articulated_pose, joint_transform, part_transforms, random_pose,
    random_pose_with, reposed, JointPose, JointValue,
};
pub use structure::{ArticulatedStructure, MotionSpec, MotionType, Prismatic, Revolute};
pub use synth::{synth_object, ObjectKind, DRAWER_TRAVEL};
pub use urdf::{export_urdf, import_urdf, urdf_string, URDF_FILE};
