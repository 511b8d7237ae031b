use synseg::scene::{
    builtin, generate_dataset, render, sample_scene, AssetStore, Camera, ForgeConfig, Light, Mesh,
    SceneDescription, SceneObject,
};

type V = [f64; 3];

fn sub(a: V, b: V) -> V {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: V, b: V) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn cross(a: V, b: V) -> V {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
fn scale(a: V, s: f64) -> V {
    [a[0] * s, a[1] * s, a[2] * s]
}
fn add(a: V, b: V) -> V {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
fn unit(a: V) -> V {
    scale(a, 1.0 / dot(a, a).sqrt())
}

fn matmul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

/// Rotation about x by `r`, then y by `p`, then z by `y`.
fn euler(r: f64, p: f64, y: f64) -> [[f64; 3]; 3] {
    let rx = [[1.0, 0.0, 0.0], [0.0, r.cos(), -r.sin()], [0.0, r.sin(), r.cos()]];
    let ry = [[p.cos(), 0.0, p.sin()], [0.0, 1.0, 0.0], [-p.sin(), 0.0, p.cos()]];
    let rz = [[y.cos(), -y.sin(), 0.0], [y.sin(), y.cos(), 0.0], [0.0, 0.0, 1.0]];
    matmul(rz, matmul(ry, rx))
}

enum Hit {
    Miss,
    Hit,
    // Within rounding of a triangle edge; either answer is acceptable.
    Edge,
}

/// World-space triangles of every object.
fn world_triangles(scene: &SceneDescription, meshes: &dyn Fn(&str) -> Mesh) -> Vec<[V; 3]> {
    let mut out = Vec::new();
    for o in &scene.objects {
        let m = meshes(&o.mesh_ref);
        let r = euler(o.rotation[0], o.rotation[1], o.rotation[2]);
        let place = |v: V| -> V {
            let rv = [dot(r[0], v), dot(r[1], v), dot(r[2], v)];
            add(o.translation, scale(rv, o.scale))
        };
        for t in m.triangles() {
            let p = t.map(|i| {
                let v = m.vertices()[i as usize];
                place([v.x, v.y, v.z])
            });
            out.push(p);
        }
    }
    out
}

/// Plane intersection followed by a barycentric inside test.
fn ray_hits(o: V, d: V, tris: &[[V; 3]]) -> Hit {
    let mut result = Hit::Miss;
    for t in tris {
        let n = cross(sub(t[1], t[0]), sub(t[2], t[0]));
        let area2 = dot(n, n);
        let denom = dot(n, d);
        if area2 == 0.0 || denom.abs() < 1e-12 * area2.sqrt() {
            continue;
        }
        let s = dot(n, sub(t[0], o)) / denom;
        if s <= 1e-9 {
            continue;
        }
        let p = add(o, scale(d, s));
        let b = [
            dot(n, cross(sub(t[2], t[1]), sub(p, t[1]))) / area2,
            dot(n, cross(sub(t[0], t[2]), sub(p, t[2]))) / area2,
            dot(n, cross(sub(t[1], t[0]), sub(p, t[0]))) / area2,
        ];
        let lo = b.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo > 1e-9 {
            return Hit::Hit;
        }
        if lo > -1e-9 {
            result = Hit::Edge;
        }
    }
    result
}

fn primary_ray(cam: &Camera, w: u32, h: u32, x: u32, y: u32) -> (V, V) {
    let fwd = unit(sub(cam.look_at, cam.position));
    let right = unit(cross(fwd, [0.0, 1.0, 0.0]));
    let up = cross(right, fwd);
    let f = 0.5 * h as f64 / (0.5 * cam.vfov_deg.to_radians()).tan();
    let u = (x as f64 + 0.5 - 0.5 * w as f64) / f;
    let v = (0.5 * h as f64 - y as f64 - 0.5) / f;
    (cam.position, unit(add(fwd, add(scale(right, u), scale(up, v)))))
}

const BLUE: [u8; 3] = [0, 0, 255];

fn single_object_config() -> ForgeConfig {
    ForgeConfig {
        width: 128,
        height: 128,
        objects: (1, 1),
        backgrounds: vec!["solid:0,0,255".into()],
        mesh_default: ["cube", "sphere", "cylinder", "cone"]
            .iter()
            .map(|m| format!("builtin:{m}"))
            .collect(),
        ..ForgeConfig::default()
    }
}

#[test]
fn labels_match_ray_geometry() {
    let config = single_object_config();
    let assets = AssetStore::from_config(&config).unwrap();
    let meshes = |r: &str| builtin(r.trim_start_matches("builtin:")).unwrap();
    let mut ambiguous = 0;
    for s in 0..20u64 {
        let class = 1 + (s % 20) as u8;
        let mut scene = sample_scene(&config, class, 1000 + s).unwrap();
        scene.objects[0].tint = [1.0, 0.0, 0.0];
        let out = render(&scene, &assets).unwrap();
        let tris = world_triangles(&scene, &meshes);
        let mut object = 0;
        for y in 0..128 {
            for x in 0..128 {
                let labeled = out.label.get(x, y) != 0;
                // Red albedo on a pure blue backdrop: any object pixel has no
                // blue, whatever the shading.
                let composited = out.rgb.get(x, y) != BLUE;
                assert_eq!(labeled, composited, "scene {s} pixel ({x}, {y})");
                if labeled {
                    assert_eq!(out.label.get(x, y), class);
                    assert_eq!(out.rgb.get(x, y)[2], 0);
                    object += 1;
                }
                let (o, d) = primary_ray(&scene.camera, 128, 128, x, y);
                match ray_hits(o, d, &tris) {
                    Hit::Hit => assert!(labeled, "scene {s} pixel ({x}, {y}) hit but unlabeled"),
                    Hit::Miss => assert!(!labeled, "scene {s} pixel ({x}, {y}) labeled without a hit"),
                    Hit::Edge => ambiguous += 1,
                }
            }
        }
        assert!(object > 0, "scene {s} shows nothing");
    }
    assert!(ambiguous < 20, "{ambiguous} edge-grazing rays");
}

fn facing_square(distance: f64, fov: f64, size: u32) -> SceneDescription {
    SceneDescription {
        width: size,
        height: size,
        objects: vec![SceneObject {
            mesh_ref: "builtin:square".into(),
            class_index: 7,
            scale: 1.0,
            rotation: [0.0; 3],
            translation: [0.0, 0.0, -distance],
            tint: [1.0; 3],
        }],
        camera: Camera {
            position: [0.0; 3],
            look_at: [0.0, 0.0, -1.0],
            vfov_deg: fov,
        },
        light: Light {
            direction: [0.0, 0.0, 1.0],
            intensity: 1.0,
        },
        background_ref: "solid:0,0,255".into(),
        seed: 0,
    }
}

#[test]
fn unit_square_projects_to_pinhole_area() {
    let mut assets = AssetStore::new();
    assets.insert_mesh("builtin:square", builtin("square").unwrap());
    for (d, fov) in [(2.0, 60.0), (3.5, 45.0), (5.0, 30.0), (8.0, 50.0), (2.5, 90.0)] {
        let out = render(&facing_square(d, fov, 128), &assets).unwrap();
        let f = 64.0 / (fov.to_radians() / 2.0).tan();
        let side = f / d;
        let count = out.label.data().iter().filter(|&&v| v == 7).count() as f64;
        assert!(
            (count - side * side).abs() <= 4.0 * side,
            "d={d} fov={fov}: {count} vs {}",
            side * side
        );
    }
}

#[test]
fn label_values_come_from_scene_classes() {
    let config = ForgeConfig {
        width: 64,
        height: 48,
        mixed_classes: true,
        objects: (2, 4),
        ..ForgeConfig::default()
    };
    let assets = AssetStore::from_config(&config).unwrap();
    for s in 0..15 {
        let scene = sample_scene(&config, 3, s).unwrap();
        let classes = scene.classes();
        let out = render(&scene, &assets).unwrap();
        for &v in out.label.data() {
            assert!(v == 0 || classes.contains(&v));
        }
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let config = ForgeConfig {
        width: 40,
        height: 30,
        samples_per_class: 2,
        classes: vec![2, 9, 14],
        seed: 99,
        ..ForgeConfig::default()
    };
    let assets = AssetStore::from_config(&config).unwrap();
    let tree = |threads: usize| {
        let dir = tempfile::tempdir().unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| generate_dataset(&config, &assets, dir.path())).unwrap();
        let mut files = Vec::new();
        for sub in ["images", "labels"] {
            let mut names: Vec<_> = std::fs::read_dir(dir.path().join(sub))
                .unwrap()
                .map(|e| e.unwrap().path())
                .collect();
            names.sort();
            for p in names {
                files.push((p.file_name().unwrap().to_owned(), std::fs::read(&p).unwrap()));
            }
        }
        files.push(("manifest".into(), std::fs::read(dir.path().join("manifest.txt")).unwrap()));
        files
    };
    let one = tree(1);
    assert_eq!(one.len(), 13);
    assert_eq!(one, tree(4));
    assert_eq!(one, tree(1));
}
