//! Triangle meshes: Wavefront OBJ ingestion and a few built-in primitives.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Albedo used for faces without a resolvable material.
pub const DEFAULT_ALBEDO: [f64; 3] = [0.5, 0.5, 0.5];

/// Prefix naming a built-in primitive instead of a file.
pub const BUILTIN_PREFIX: &str = "builtin:";

pub const BUILTIN_MESHES: [&str; 5] = ["cube", "sphere", "cylinder", "cone", "square"];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    albedo: Vec<[f64; 3]>,
}

impl Mesh {
    /// Validates indices and albedo length; albedo components must lie in [0, 1].
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, albedo: Vec<[f64; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyInput("mesh has no triangles"));
        }
        if albedo.len() != triangles.len() {
            return Err(Error::CountMismatch {
                expected: triangles.len(),
                found: albedo.len(),
            });
        }
        let n = vertices.len();
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::Config(format!(
                "triangle {t:?} references a vertex beyond {n}"
            )));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Config("non-finite vertex coordinate".into()));
        }
        if albedo.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config("albedo outside [0, 1]".into()));
        }
        Ok(Mesh {
            vertices,
            triangles,
            albedo,
        })
    }

    /// Every face gets the same albedo.
    pub fn uniform(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, albedo: [f64; 3]) -> Result<Self> {
        let a = vec![albedo; triangles.len()];
        Mesh::new(vertices, triangles, a)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn albedo(&self) -> &[[f64; 3]] {
        &self.albedo
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Centers the bounding box on the origin and scales its largest side
    /// to 1, so downloaded models of arbitrary units share one scale range.
    pub fn normalized(&self) -> Mesh {
        let (lo, hi) = self.bounds();
        let center = (lo + hi) * 0.5;
        let extent = (hi - lo).max();
        let s = if extent > 0.0 { 1.0 / extent } else { 1.0 };
        Mesh {
            vertices: self.vertices.iter().map(|v| (v - center) * s).collect(),
            triangles: self.triangles.clone(),
            albedo: self.albedo.clone(),
        }
    }

    /// Reads an OBJ file, resolving `mtllib` relative to it, and normalizes.
    pub fn read(path: &Path) -> Result<Mesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut materials = HashMap::new();
        for line in text.lines() {
            let mut it = line.split_whitespace();
            if it.next() == Some("mtllib") {
                for lib in it {
                    let p = dir.join(lib);
                    match std::fs::read_to_string(&p) {
                        Ok(t) => materials.extend(parse_mtl(&t)?),
                        Err(e) => log::warn!("skipping material library {}: {e}", p.display()),
                    }
                }
            }
        }
        Ok(load_mesh_with_materials(&text, &materials)?.normalized())
    }

    /// `builtin:<name>` or a file path.
    pub fn resolve(reference: &str) -> Result<Mesh> {
        match reference.strip_prefix(BUILTIN_PREFIX) {
            Some(name) => builtin(name),
            None => Mesh::read(Path::new(reference)),
        }
    }
}

/// Parses OBJ text; materials are ignored and every face is mid-gray.
pub fn load_mesh(text: &str) -> Result<Mesh> {
    load_mesh_with_materials(text, &HashMap::new())
}

/// Parses OBJ text, coloring faces by the diffuse color of the active
/// `usemtl` material when known.
pub fn load_mesh_with_materials(text: &str, materials: &HashMap<String, [f64; 3]>) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut albedo = Vec::new();
    let mut current = DEFAULT_ALBEDO;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let err = |message: String| Error::Parse {
            line: n + 1,
            message,
        };
        match tag {
            "v" => {
                let coords: Vec<f64> = it
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| err(format!("bad vertex {line:?}")))?;
                // An optional fourth (w) or trailing vertex color is tolerated.
                if coords.len() < 3 || coords[..3].iter().any(|c| !c.is_finite()) {
                    return Err(err(format!("bad vertex {line:?}")));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            "f" => {
                let mut idx = Vec::new();
                for tok in it {
                    let first = tok.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| err(format!("bad face index {tok:?}")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(err("face index 0".into()));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(format!(
                            "face index {i} out of range for {} vertices",
                            vertices.len()
                        )));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                    albedo.push(current);
                }
            }
            "usemtl" => {
                let name = it.next().unwrap_or("");
                current = match materials.get(name) {
                    Some(c) => *c,
                    None => DEFAULT_ALBEDO,
                };
            }
            _ => {}
        }
    }
    Mesh::new(vertices, triangles, albedo)
}

/// `newmtl` names mapped to their `Kd` colors, clamped to [0, 1].
pub fn parse_mtl(text: &str) -> Result<HashMap<String, [f64; 3]>> {
    let mut out = HashMap::new();
    let mut name: Option<String> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("newmtl") => {
                let m = it.next().unwrap_or("").to_string();
                out.insert(m.clone(), DEFAULT_ALBEDO);
                name = Some(m);
            }
            Some("Kd") => {
                let c: Vec<f64> = it.filter_map(|s| s.parse().ok()).collect();
                if c.len() != 3 {
                    return Err(Error::Parse {
                        line: n + 1,
                        message: format!("bad Kd {line:?}"),
                    });
                }
                if let Some(m) = &name {
                    out.insert(m.clone(), [c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0), c[2].clamp(0.0, 1.0)]);
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Unit-sized primitives centered on the origin.
pub fn builtin(name: &str) -> Result<Mesh> {
    let (v, t) = match name {
        "cube" => cube(),
        "sphere" => sphere(16, 24),
        "cylinder" => lathe(&[(0.0, -0.5), (0.5, -0.5), (0.5, 0.5), (0.0, 0.5)], 24),
        "cone" => lathe(&[(0.0, -0.5), (0.5, -0.5), (0.0, 0.5)], 24),
        "square" => (
            vec![
                Vec3::new(-0.5, -0.5, 0.0),
                Vec3::new(0.5, -0.5, 0.0),
                Vec3::new(0.5, 0.5, 0.0),
                Vec3::new(-0.5, 0.5, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        ),
        other => return Err(Error::MissingAsset(format!("{BUILTIN_PREFIX}{other}"))),
    };
    Mesh::uniform(v, t, DEFAULT_ALBEDO)
}

fn cube() -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let v = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -0.5 } else { 0.5 },
                if i & 2 == 0 { -0.5 } else { 0.5 },
                if i & 4 == 0 { -0.5 } else { 0.5 },
            )
        })
        .collect();
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let t = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    (v, t)
}

fn sphere(stacks: u32, slices: u32) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let mut v = Vec::new();
    for i in 0..=stacks {
        let phi = PI * i as f64 / stacks as f64;
        for j in 0..slices {
            let theta = 2.0 * PI * j as f64 / slices as f64;
            v.push(0.5 * Vec3::new(phi.sin() * theta.cos(), phi.cos(), phi.sin() * theta.sin()));
        }
    }
    let mut t = Vec::new();
    for i in 0..stacks {
        for j in 0..slices {
            let a = i * slices + j;
            let b = i * slices + (j + 1) % slices;
            let c = a + slices;
            let d = b + slices;
            if i > 0 {
                t.push([a, b, c]);
            }
            if i + 1 < stacks {
                t.push([b, d, c]);
            }
        }
    }
    (v, t)
}

/// Revolves a (radius, y) profile around the y axis.
fn lathe(profile: &[(f64, f64)], slices: u32) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let mut v = Vec::new();
    for &(r, y) in profile {
        for j in 0..slices {
            let theta = 2.0 * PI * j as f64 / slices as f64;
            v.push(Vec3::new(r * theta.cos(), y, r * theta.sin()));
        }
    }
    let mut t = Vec::new();
    for i in 0..profile.len() as u32 - 1 {
        for j in 0..slices {
            let a = i * slices + j;
            let b = i * slices + (j + 1) % slices;
            let c = a + slices;
            let d = b + slices;
            // Rings of zero radius collapse one of the two triangles.
            if profile[i as usize].0 > 0.0 {
                t.push([a, b, c]);
            }
            if profile[i as usize + 1].0 > 0.0 {
                t.push([b, d, c]);
            }
        }
    }
    (v, t)
}
