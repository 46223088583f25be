//! SLAM applications: point features, constrained-height points and planes.

pub mod affine;
pub mod audit;
pub mod model;
pub mod planar;
pub mod ri;
pub mod variant;

pub use affine::{true_nullspace, true_nullspace_matrix, AffineVariant, AppAffine};
pub use model::{
    make_cp_model, make_plane_model, make_point_model, plane_parts, random_odometry, random_rotation, random_state,
    AppKind, AppModel, HeightMode, LandmarkInit, Odometry, SlamState, StandardChart,
};
pub use ri::RightInvariantChart;
pub use variant::{augment_feature, augment_feature_at, make_variant, Chart, FilterVariant, Linearization, Policy, SlamFilter, VariantConfig};
