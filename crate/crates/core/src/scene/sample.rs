use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

use super::config::ForgeConfig;
use super::mesh::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub mesh_ref: String,
    pub class_index: u8,
    pub scale: f64,
    /// Roll, pitch, yaw in radians, applied about x, y then z.
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
    /// Per-channel multiplier on the mesh albedo.
    pub tint: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub position: [f64; 3],
    pub look_at: [f64; 3],
    pub vfov_deg: f64,
}

impl Camera {
    /// Forward, right and up unit vectors. World +y is up unless the camera
    /// looks straight along it.
    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        let forward = (Vec3::from(self.look_at) - Vec3::from(self.position)).normalize();
        let mut right = forward.cross(&Vec3::y());
        if right.norm() < 1e-9 {
            right = forward.cross(&Vec3::z());
        }
        let right = right.normalize();
        let up = right.cross(&forward);
        (forward, right, up)
    }

    /// Focal length in pixels for a frame `height` pixels tall.
    pub fn focal(&self, height: u32) -> f64 {
        0.5 * height as f64 / (0.5 * self.vfov_deg.to_radians()).tan()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Light {
    /// Unit vector pointing from the surface toward the light.
    pub direction: [f64; 3],
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneDescription {
    pub width: u32,
    pub height: u32,
    pub objects: Vec<SceneObject>,
    pub camera: Camera,
    pub light: Light,
    pub background_ref: String,
    pub seed: u64,
}

impl SceneDescription {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.width == 0 || self.height == 0 {
            return bad("empty frame");
        }
        if self.objects.is_empty() {
            return bad("scene has no objects");
        }
        for o in &self.objects {
            if !(o.scale > 0.0 && o.scale.is_finite()) {
                return bad("object scale must be positive");
            }
            if !(1..=20).contains(&o.class_index) {
                return Err(Error::NotForeground(o.class_index));
            }
        }
        let d = Vec3::from(self.light.direction);
        if (d.norm() - 1.0).abs() > 1e-9 {
            return bad("light direction must have unit norm");
        }
        if !(self.light.intensity >= 0.0 && self.light.intensity.is_finite()) {
            return bad("light intensity must be >= 0");
        }
        if !(self.camera.vfov_deg > 0.0 && self.camera.vfov_deg < 180.0) {
            return bad("vertical fov must lie in (0, 180)");
        }
        if Vec3::from(self.camera.look_at) == Vec3::from(self.camera.position) {
            return bad("camera looks at its own position");
        }
        Ok(())
    }

    /// Distinct classes in object order.
    pub fn classes(&self) -> Vec<u8> {
        let mut v: Vec<u8> = Vec::new();
        for o in &self.objects {
            if !v.contains(&o.class_index) {
                v.push(o.class_index);
            }
        }
        v
    }
}

fn uniform(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo < hi {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn pick<'a, T>(rng: &mut impl Rng, items: &'a [T]) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

/// Draws one scene. The first object always belongs to `class_index`; the
/// rest do too unless the config enables mixed classes.
pub fn sample_scene(config: &ForgeConfig, class_index: u8, seed: u64) -> Result<SceneDescription> {
    config.validate()?;
    if class_index == 0 || class_index as usize >= config.taxonomy.len() {
        return Err(Error::NotForeground(class_index));
    }
    if config.mesh_pool(class_index).is_empty() {
        return Err(Error::Config(format!("class {class_index} has an empty mesh pool")));
    }
    let mut rng = seed::rng(seed);

    let j = config.camera_jitter;
    let base = Vec3::from(config.camera_position);
    let position = base + Vec3::new(
        uniform(&mut rng, (-j, j)),
        uniform(&mut rng, (-j, j)),
        uniform(&mut rng, (-j, j)),
    );
    let a = config.camera_angle_jitter_deg.to_radians();
    let yaw = uniform(&mut rng, (-a, a));
    let pitch = uniform(&mut rng, (-a, a));
    let forward = Vec3::new(yaw.sin() * pitch.cos(), pitch.sin(), -yaw.cos() * pitch.cos());
    let camera = Camera {
        position: position.into(),
        look_at: (position + forward).into(),
        vfov_deg: uniform(&mut rng, config.fov_deg),
    };
    let (forward, right, up) = camera.basis();
    let tan_y = (0.5 * camera.vfov_deg.to_radians()).tan();
    let tan_x = tan_y * config.width as f64 / config.height as f64;

    let (lo, hi) = config.objects;
    let count = rng.random_range(lo..=hi);
    let max_rot = config.max_rotation_deg.to_radians();
    let mut objects = Vec::with_capacity(count);
    for i in 0..count {
        let class = if i == 0 || !config.mixed_classes {
            class_index
        } else {
            *pick(&mut rng, &config.classes)
        };
        let mesh_ref = pick(&mut rng, config.mesh_pool(class)).clone();
        let scale = uniform(&mut rng, config.scale);
        let rotation = [
            uniform(&mut rng, (-max_rot, max_rot)),
            uniform(&mut rng, (-max_rot, max_rot)),
            uniform(&mut rng, (-max_rot, max_rot)),
        ];
        let depth = uniform(&mut rng, config.depth);
        let u = uniform(&mut rng, (-config.margin, config.margin));
        let v = uniform(&mut rng, (-config.margin, config.margin));
        let center = position + depth * (forward + u * tan_x * right + v * tan_y * up);
        let tint = [
            uniform(&mut rng, config.tint),
            uniform(&mut rng, config.tint),
            uniform(&mut rng, config.tint),
        ];
        objects.push(SceneObject {
            mesh_ref,
            class_index: class,
            scale,
            rotation,
            translation: center.into(),
            tint,
        });
    }

    // Uniform on the sphere, then folded onto the camera's side so the
    // visible faces can be lit.
    let mut dir = loop {
        let p = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = p.norm();
        if n > 1e-3 && n <= 1.0 {
            break p / n;
        }
    };
    if dir.dot(&forward) > 0.0 {
        dir = -dir;
    }
    let light = Light {
        direction: dir.normalize().into(),
        intensity: uniform(&mut rng, config.light_intensity),
    };
    let background_ref = pick(&mut rng, &config.backgrounds).clone();

    let scene = SceneDescription {
        width: config.width,
        height: config.height,
        objects,
        camera,
        light,
        background_ref,
        seed,
    };
    scene.validate()?;
    Ok(scene)
}
