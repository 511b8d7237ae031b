//! Randomized scenes of unit-sized meshes, ray cast into an RGB image and
//! an exact label image.

pub mod config;
pub mod dataset;
pub mod mesh;
pub mod render;
pub mod sample;

pub use config::{ForgeConfig, FORGE_KEYS};
pub use dataset::{generate_dataset, plan_dataset, render_manifest, DatasetManifest, ManifestEntry};
pub use mesh::{builtin, load_mesh, load_mesh_with_materials, parse_mtl, Mesh, Vec3};
pub use render::{render, AssetStore, RenderSample};
pub use sample::{sample_scene, Camera, Light, SceneDescription, SceneObject};
