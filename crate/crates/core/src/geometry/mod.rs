//! AOPC construction, import/export and posing.

mod aopc;
mod pose;
mod primitives;

pub use aopc::{export_aopc, import_aopc, LocalAopc};
pub use pose::{pose_aopc, BodyMotion, PointJacobian, Pose, WorldAopc};
pub use primitives::{generate_primitive, t_shape, BoxMember, MassProperties, Primitive};
