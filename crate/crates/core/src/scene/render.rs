//! One primary ray per pixel, nearest hit, Lambertian shading.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use nalgebra::Rotation3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::voc::{LabelImage, RgbImage};

use super::config::{parse_solid, ForgeConfig};
use super::mesh::{Mesh, Vec3};
use super::sample::SceneDescription;

const LEAF_SIZE: usize = 4;
const MIN_T: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Aabb {
            lo: Vec3::repeat(f64::INFINITY),
            hi: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    // Slab test against [0, t_max).
    fn hit(&self, o: &Vec3, inv: &Vec3, t_max: f64) -> bool {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.lo[a] - o[a]) * inv[a];
            let mut far = (self.hi[a] - o[a]) * inv[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN (zero direction on a slab boundary) leaves the bound alone.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    // Leaf: range into `order`. Inner: `start` is the left child, right is
    // the next one.
    start: u32,
    count: u32,
}

/// Bounding volume hierarchy over one mesh's triangles.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(mesh: &Mesh) -> Bvh {
        let n = mesh.triangles().len();
        let centroids: Vec<Vec3> = (0..n)
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                (a + b + c) / 3.0
            })
            .collect();
        let mut bvh = Bvh {
            nodes: vec![Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            }],
            order: (0..n as u32).collect(),
        };
        bvh.split(0, 0, n, mesh, &centroids);
        bvh
    }

    fn split(&mut self, node: usize, start: usize, end: usize, mesh: &Mesh, centroids: &[Vec3]) {
        let mut bounds = Aabb::empty();
        let mut cb = Aabb::empty();
        for &t in &self.order[start..end] {
            for v in mesh.triangle(t as usize) {
                bounds.grow(&v);
            }
            cb.grow(&centroids[t as usize]);
        }
        self.nodes[node].bounds = bounds;
        let extent = cb.hi - cb.lo;
        let axis = extent.imax();
        if end - start <= LEAF_SIZE || extent[axis] <= 0.0 {
            self.nodes[node].start = start as u32;
            self.nodes[node].count = (end - start) as u32;
            return;
        }
        self.order[start..end].sort_by(|&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        let left = self.nodes.len();
        let empty = Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        };
        self.nodes.push(empty.clone());
        self.nodes.push(empty);
        self.nodes[node].start = left as u32;
        self.nodes[node].count = 0;
        self.split(left, start, mid, mesh, centroids);
        self.split(left + 1, mid, end, mesh, centroids);
    }

    /// Nearest hit with `t < t_max`: `(t, triangle)`. Equal `t` goes to the
    /// lower triangle index.
    pub fn intersect(&self, mesh: &Mesh, o: &Vec3, d: &Vec3, t_max: f64) -> Option<(f64, usize)> {
        let inv = Vec3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut best: Option<(f64, usize)> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            // Inclusive bound so equal-t ties are still visited.
            if !node.bounds.hit(o, &inv, limit * (1.0 + 1e-12) + 1e-12) {
                continue;
            }
            if node.count == 0 {
                stack.push(node.start as usize + 1);
                stack.push(node.start as usize);
                continue;
            }
            for &t in &self.order[node.start as usize..(node.start + node.count) as usize] {
                let t = t as usize;
                if let Some(dist) = intersect_triangle(o, d, &mesh.triangle(t)) {
                    let better = match best {
                        None => dist < t_max,
                        Some((bt, bi)) => dist < bt || (dist == bt && t < bi),
                    };
                    if better {
                        best = Some((dist, t));
                        limit = dist;
                    }
                }
            }
        }
        best
    }
}

/// Moller-Trumbore; returns the ray parameter of a hit in front of `o`.
pub fn intersect_triangle(o: &Vec3, d: &Vec3, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > MIN_T).then_some(t)
}

/// A mesh with its acceleration structure and face normals.
#[derive(Debug, Clone)]
pub struct MeshAsset {
    pub mesh: Mesh,
    bvh: Bvh,
    normals: Vec<Vec3>,
}

impl MeshAsset {
    pub fn new(mesh: Mesh) -> Self {
        let bvh = Bvh::build(&mesh);
        let normals = (0..mesh.triangles().len())
            .map(|i| {
                let [a, b, c] = mesh.triangle(i);
                let n = (b - a).cross(&(c - a));
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::z()
                }
            })
            .collect();
        MeshAsset { mesh, bvh, normals }
    }
}

/// Meshes and backgrounds keyed by reference string. Read-only once built.
#[derive(Debug, Clone, Default)]
pub struct AssetStore {
    meshes: HashMap<String, Arc<MeshAsset>>,
    backgrounds: HashMap<String, Arc<RgbImage>>,
}

impl AssetStore {
    pub fn new() -> Self {
        AssetStore::default()
    }

    /// Loads every mesh and background the config can reference.
    pub fn from_config(config: &ForgeConfig) -> Result<Self> {
        let mut store = AssetStore::new();
        for r in config.all_mesh_refs() {
            store.insert_mesh(&r, Mesh::resolve(&r)?);
        }
        for r in &config.backgrounds {
            if parse_solid(r).is_none() {
                store.insert_background(r, RgbImage::read(Path::new(r))?);
            }
        }
        Ok(store)
    }

    pub fn insert_mesh(&mut self, reference: &str, mesh: Mesh) {
        self.meshes
            .insert(reference.to_string(), Arc::new(MeshAsset::new(mesh)));
    }

    pub fn insert_background(&mut self, reference: &str, image: RgbImage) {
        self.backgrounds.insert(reference.to_string(), Arc::new(image));
    }

    pub fn mesh(&self, reference: &str) -> Result<&MeshAsset> {
        self.meshes
            .get(reference)
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::MissingAsset(reference.to_string()))
    }

    /// The background scaled to `width` x `height`.
    pub fn background(&self, reference: &str, width: u32, height: u32) -> Result<RgbImage> {
        if let Some(c) = parse_solid(reference) {
            return Ok(RgbImage::filled(width, height, c));
        }
        let img = self
            .backgrounds
            .get(reference)
            .ok_or_else(|| Error::MissingAsset(reference.to_string()))?;
        Ok(if img.dims() == (width, height) {
            img.as_ref().clone()
        } else {
            img.resized(width, height)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderSample {
    pub rgb: RgbImage,
    pub label: LabelImage,
    pub scene: SceneDescription,
}

struct Placed<'a> {
    asset: &'a MeshAsset,
    rot: Rotation3<f64>,
    inv_rot: Rotation3<f64>,
    translation: Vec3,
    inv_scale: f64,
    albedo_tint: Vec3,
    class_index: u8,
}

/// Maps 0..=1 to 0..=255 with rounding.
pub fn quantize_channel(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn render(scene: &SceneDescription, assets: &AssetStore) -> Result<RenderSample> {
    scene.validate()?;
    let (w, h) = (scene.width, scene.height);
    let background = assets.background(&scene.background_ref, w, h)?;
    let placed = scene
        .objects
        .iter()
        .map(|o| {
            let rot = Rotation3::from_euler_angles(o.rotation[0], o.rotation[1], o.rotation[2]);
            Ok(Placed {
                asset: assets.mesh(&o.mesh_ref)?,
                inv_rot: rot.inverse(),
                rot,
                translation: Vec3::from(o.translation),
                inv_scale: 1.0 / o.scale,
                albedo_tint: Vec3::from(o.tint),
                class_index: o.class_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (forward, right, up) = scene.camera.basis();
    let f = scene.camera.focal(h);
    let origin = Vec3::from(scene.camera.position);
    let light = Vec3::from(scene.light.direction);
    let intensity = scene.light.intensity;

    let rows: Vec<(Vec<u8>, Vec<u8>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut rgb = Vec::with_capacity(3 * w as usize);
            let mut lab = Vec::with_capacity(w as usize);
            for x in 0..w {
                let px = (x as f64 + 0.5 - 0.5 * w as f64) / f;
                let py = (0.5 * h as f64 - (y as f64 + 0.5)) / f;
                let dir = (forward + px * right + py * up).normalize();
                let mut best: Option<(f64, usize, usize)> = None;
                for (k, p) in placed.iter().enumerate() {
                    // Object space: world = T + s R local, so t carries over.
                    let o = p.inv_rot * (origin - p.translation) * p.inv_scale;
                    let d = p.inv_rot * dir * p.inv_scale;
                    let t_max = best.map_or(f64::INFINITY, |b| b.0);
                    if let Some((t, tri)) = p.asset.bvh.intersect(&p.asset.mesh, &o, &d, t_max) {
                        if best.is_none_or(|b| t < b.0) {
                            best = Some((t, k, tri));
                        }
                    }
                }
                match best {
                    None => {
                        rgb.extend_from_slice(&background.get(x, y));
                        lab.push(0);
                    }
                    Some((_, k, tri)) => {
                        let p = &placed[k];
                        let mut n = p.rot * p.asset.normals[tri];
                        if n.dot(&dir) > 0.0 {
                            n = -n;
                        }
                        let shade = n.dot(&light).max(0.0) * intensity;
                        let a = p.asset.mesh.albedo()[tri];
                        for c in 0..3 {
                            rgb.push(quantize_channel(a[c] * p.albedo_tint[c] * shade));
                        }
                        lab.push(p.class_index);
                    }
                }
            }
            (rgb, lab)
        })
        .collect();

    let mut rgb = Vec::with_capacity(3 * (w * h) as usize);
    let mut lab = Vec::with_capacity((w * h) as usize);
    for (r, l) in rows {
        rgb.extend(r);
        lab.extend(l);
    }
    Ok(RenderSample {
        rgb: RgbImage::new(w, h, rgb)?,
        label: LabelImage::new(w, h, lab)?,
        scene: scene.clone(),
    })
}
