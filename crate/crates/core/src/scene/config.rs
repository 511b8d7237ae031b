use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::voc::ClassTaxonomy;

use super::mesh::BUILTIN_PREFIX;

/// Prefix for a flat background color, e.g. `solid:128,128,128`.
pub const SOLID_PREFIX: &str = "solid:";

/// Documented keys of a forge config, with defaults. `mesh.<class>` keys are
/// accepted in addition to these.
pub const FORGE_KEYS: &[(&str, &str, &str)] = &[
    ("width", "500", "frame width in pixels"),
    ("height", "375", "frame height in pixels"),
    ("samples_per_class", "100", "scenes rendered per class"),
    ("classes", "all 20 VOC foreground classes", "comma-separated class names"),
    ("mixed_classes", "false", "extra objects may come from other listed classes"),
    ("objects", "1, 3", "object count range per scene"),
    ("scale", "0.8, 1.6", "object scale range (meshes are unit-sized)"),
    ("depth", "4, 8", "object distance along the viewing axis, world units"),
    ("margin", "0.7", "object centers project inside this fraction of the frame"),
    ("max_rotation", "180", "per-axis Euler angle bound, degrees"),
    ("tint", "0.4, 1", "per-channel albedo multiplier range"),
    ("fov", "45, 60", "vertical field of view range, degrees"),
    ("camera_position", "0, 0, 0", "nominal camera position"),
    ("camera_jitter", "0.5", "per-axis camera position jitter, world units"),
    ("camera_angle_jitter", "10", "yaw and pitch jitter around -z, degrees"),
    ("light_intensity", "1, 2", "directional light intensity range"),
    ("mesh_default", "builtin:cube, builtin:sphere, builtin:cylinder, builtin:cone", "mesh pool for classes without their own"),
    ("mesh.<class>", "unset", "comma-separated meshes for one class"),
    ("mesh_dir", "unset", "directory holding <class>/*.obj pools"),
    ("backgrounds", "solid:118,118,118, solid:150,140,120, solid:80,100,130", "background pool"),
    ("background_dir", "unset", "every image in this directory joins the background pool"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ForgeConfig {
    pub width: u32,
    pub height: u32,
    /// Dataset seed. Not read from the file; callers set it.
    pub seed: u64,
    pub samples_per_class: usize,
    /// Foreground class indices to render, in order.
    pub classes: Vec<u8>,
    pub mixed_classes: bool,
    pub objects: (usize, usize),
    pub scale: (f64, f64),
    pub depth: (f64, f64),
    pub margin: f64,
    pub max_rotation_deg: f64,
    pub tint: (f64, f64),
    pub fov_deg: (f64, f64),
    pub camera_position: [f64; 3],
    pub camera_jitter: f64,
    pub camera_angle_jitter_deg: f64,
    pub light_intensity: (f64, f64),
    pub mesh_default: Vec<String>,
    pub mesh_pools: BTreeMap<u8, Vec<String>>,
    pub backgrounds: Vec<String>,
    pub taxonomy: ClassTaxonomy,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        let taxonomy = ClassTaxonomy::voc();
        ForgeConfig {
            width: 500,
            height: 375,
            seed: 0,
            samples_per_class: 100,
            classes: taxonomy.foreground().collect(),
            mixed_classes: false,
            objects: (1, 3),
            scale: (0.8, 1.6),
            depth: (4.0, 8.0),
            margin: 0.7,
            max_rotation_deg: 180.0,
            tint: (0.4, 1.0),
            fov_deg: (45.0, 60.0),
            camera_position: [0.0; 3],
            camera_jitter: 0.5,
            camera_angle_jitter_deg: 10.0,
            light_intensity: (1.0, 2.0),
            mesh_default: ["cube", "sphere", "cylinder", "cone"]
                .iter()
                .map(|m| format!("{BUILTIN_PREFIX}{m}"))
                .collect(),
            mesh_pools: BTreeMap::new(),
            backgrounds: vec![
                "solid:118,118,118".into(),
                "solid:150,140,120".into(),
                "solid:80,100,130".into(),
            ],
            taxonomy,
        }
    }
}

fn list(v: &str) -> Vec<String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

// Relative file references are taken relative to the config's directory.
fn resolve_ref(r: &str, base: &Path) -> String {
    if r.starts_with(BUILTIN_PREFIX) || r.starts_with(SOLID_PREFIX) || Path::new(r).is_absolute() {
        r.to_string()
    } else {
        base.join(r).to_string_lossy().into_owned()
    }
}

fn sorted_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && keep(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn has_ext(p: &Path, exts: &[&str]) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

impl ForgeConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ForgeConfig::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses the flat key-value format, starting from the defaults.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.reject_unknown(|k| {
            k.starts_with("mesh.") || FORGE_KEYS.iter().any(|(name, _, _)| *name == k)
        })?;
        let mut c = ForgeConfig::default();
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.get($key)? {
                    $field = v;
                }
            };
        }
        macro_rules! set_range {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.get_range($key)? {
                    $field = v;
                }
            };
        }
        set!("width", c.width);
        set!("height", c.height);
        set!("samples_per_class", c.samples_per_class);
        set!("mixed_classes", c.mixed_classes);
        set_range!("objects", c.objects);
        set_range!("scale", c.scale);
        set_range!("depth", c.depth);
        set!("margin", c.margin);
        set!("max_rotation", c.max_rotation_deg);
        set_range!("tint", c.tint);
        set_range!("fov", c.fov_deg);
        set!("camera_jitter", c.camera_jitter);
        set!("camera_angle_jitter", c.camera_angle_jitter_deg);
        set_range!("light_intensity", c.light_intensity);
        if let Some(v) = kv.raw("camera_position") {
            let p: Vec<f64> = v.split(',').filter_map(|s| s.trim().parse().ok()).collect();
            if p.len() != 3 {
                return Err(Error::Parse {
                    line: kv.line_of("camera_position"),
                    message: "camera_position needs three numbers".into(),
                });
            }
            c.camera_position = [p[0], p[1], p[2]];
        }
        if let Some(v) = kv.raw("classes") {
            c.classes = list(v)
                .iter()
                .map(|n| {
                    c.taxonomy
                        .index_of(n)
                        .ok_or_else(|| Error::UnknownClass(n.clone()))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = kv.raw("mesh_default") {
            c.mesh_default = list(v).iter().map(|r| resolve_ref(r, base_dir)).collect();
        }
        if let Some(v) = kv.raw("backgrounds") {
            c.backgrounds = list(v).iter().map(|r| resolve_ref(r, base_dir)).collect();
        }
        if let Some(v) = kv.raw("mesh_dir") {
            let dir = base_dir.join(v);
            for class in c.taxonomy.foreground() {
                let sub = dir.join(c.taxonomy.name(class).unwrap_or_default());
                if sub.is_dir() {
                    let files = sorted_files(&sub, |p| has_ext(p, &["obj"]))?;
                    if !files.is_empty() {
                        c.mesh_pools.insert(
                            class,
                            files.iter().map(|p| p.to_string_lossy().into_owned()).collect(),
                        );
                    }
                }
            }
        }
        for key in kv.keys().filter(|k| k.starts_with("mesh.")) {
            let name = &key["mesh.".len()..];
            let class = c
                .taxonomy
                .index_of(name)
                .filter(|&i| i != 0)
                .ok_or_else(|| Error::UnknownClass(name.to_string()))?;
            let refs = list(kv.raw(key).unwrap_or(""))
                .iter()
                .map(|r| resolve_ref(r, base_dir))
                .collect();
            c.mesh_pools.insert(class, refs);
        }
        if let Some(v) = kv.raw("background_dir") {
            let dir = base_dir.join(v);
            let files = sorted_files(&dir, |p| has_ext(p, &["jpg", "jpeg", "png", "bmp"]))?;
            c.backgrounds
                .extend(files.iter().map(|p| p.to_string_lossy().into_owned()));
        }
        c.validate()?;
        Ok(c)
    }

    /// Mesh references for `class`, falling back to the default pool.
    pub fn mesh_pool(&self, class: u8) -> &[String] {
        self.mesh_pools
            .get(&class)
            .map(Vec::as_slice)
            .unwrap_or(&self.mesh_default)
    }

    /// Every mesh reference any listed class may draw from.
    pub fn all_mesh_refs(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .classes
            .iter()
            .flat_map(|&c| self.mesh_pool(c).iter().cloned())
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 || self.height == 0 {
            return bad("frame must be at least 1x1".into());
        }
        fn range_ok(r: (f64, f64)) -> bool {
            r.0.is_finite() && r.1.is_finite() && r.0 <= r.1
        }
        let ranges = [
            ("scale", self.scale, 0.0),
            ("depth", self.depth, 0.0),
            ("fov", self.fov_deg, 0.0),
            ("tint", self.tint, -1.0),
            ("light_intensity", self.light_intensity, -1.0),
        ];
        for (name, r, floor) in ranges {
            if !range_ok(r) || r.0 <= floor {
                return bad(format!("{name} range {r:?} is empty or out of bounds"));
            }
        }
        if self.light_intensity.0 < 0.0 {
            return bad("light intensity must be >= 0".into());
        }
        if self.tint.0 < 0.0 || self.tint.1 > 1.0 {
            return bad("tint must lie in [0, 1]".into());
        }
        if self.fov_deg.1 >= 180.0 {
            return bad("fov must be below 180 degrees".into());
        }
        if self.objects.0 == 0 || self.objects.0 > self.objects.1 {
            return bad(format!("objects range {:?} must satisfy 1 <= lo <= hi", self.objects));
        }
        if !(self.margin > 0.0 && self.margin <= 1.0) {
            return bad("margin must lie in (0, 1]".into());
        }
        for (name, v) in [
            ("max_rotation", self.max_rotation_deg),
            ("camera_jitter", self.camera_jitter),
            ("camera_angle_jitter", self.camera_angle_jitter_deg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0"));
            }
        }
        if self.camera_position.iter().any(|c| !c.is_finite()) {
            return bad("camera_position must be finite".into());
        }
        if self.classes.is_empty() {
            return bad("no classes listed".into());
        }
        for &class in &self.classes {
            if class == 0 || class as usize >= self.taxonomy.len() {
                return bad(format!("class index {class} is not a foreground class"));
            }
            if self.mesh_pool(class).is_empty() {
                return bad(format!(
                    "class {} has an empty mesh pool",
                    self.taxonomy.name(class).unwrap_or("?")
                ));
            }
        }
        if self.backgrounds.is_empty() {
            return bad("background pool is empty".into());
        }
        Ok(())
    }
}

/// Parses `solid:r,g,b`.
pub fn parse_solid(reference: &str) -> Option<[u8; 3]> {
    let rest = reference.strip_prefix(SOLID_PREFIX)?;
    let v: Vec<u8> = rest.split(',').filter_map(|s| s.trim().parse().ok()).collect();
    match v.as_slice() {
        [r, g, b] if rest.split(',').count() == 3 => Some([*r, *g, *b]),
        _ => None,
    }
}
