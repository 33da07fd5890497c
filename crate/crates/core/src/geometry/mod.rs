//! Mesh ingestion, surface sampling with a sharp-edge bias, normalization, and
//! nearest-neighbour/Chamfer kernels.

mod chamfer;
pub mod kdtree;
mod mesh;
pub mod obj;
pub mod pcld;
mod sample;
mod sharp;
pub mod vec3;

pub use chamfer::{chamfer, mean_nn_distance};
pub use kdtree::KdTree;
pub use mesh::{edge_key, Edge, Mesh};
pub use obj::{load_mesh, save_obj};
pub use sample::{
    apply_transform, denormalize, normalize, sample_point_cloud, NormTransform, PointCloud, PointSample,
    SampleParams,
};
pub use sharp::{dihedral_deg, sharp_edges, SharpEdge};
pub use vec3::{Rigid, Vec3};
