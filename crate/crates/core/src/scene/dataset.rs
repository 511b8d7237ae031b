use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::derive_seed;

use super::config::ForgeConfig;
use super::render::{render, AssetStore, RenderSample};
use super::sample::sample_scene;

pub const MANIFEST_NAME: &str = "manifest.txt";
pub const IMAGES_DIR: &str = "images";
pub const LABELS_DIR: &str = "labels";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub class_name: String,
    pub seed: u64,
}

/// `image_id class_name seed` per line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{} {} {}\n", e.image_id, e.class_name, e.seed))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let entry = match parts.as_slice() {
                [id, class, seed] => seed.parse().ok().map(|seed| ManifestEntry {
                    image_id: id.to_string(),
                    class_name: class.to_string(),
                    seed,
                }),
                _ => None,
            };
            entries.push(entry.ok_or_else(|| Error::Parse {
                line: n + 1,
                message: "expected `image_id class_name seed`".into(),
            })?);
        }
        Ok(DatasetManifest { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        DatasetManifest::parse(&text)
    }
}

pub fn image_id(class_name: &str, index: usize) -> String {
    format!("syn_{class_name}_{index:05}")
}

/// The manifest `generate_dataset` would write, without rendering.
pub fn plan_dataset(config: &ForgeConfig) -> Result<DatasetManifest> {
    config.validate()?;
    let mut entries = Vec::new();
    for &class in &config.classes {
        let name = config
            .taxonomy
            .name(class)
            .ok_or(Error::NotForeground(class))?;
        for i in 0..config.samples_per_class {
            entries.push(ManifestEntry {
                image_id: image_id(name, i),
                class_name: name.to_string(),
                seed: derive_seed(config.seed, &[class as u64, i as u64]),
            });
        }
    }
    Ok(DatasetManifest { entries })
}

pub fn render_entry(config: &ForgeConfig, assets: &AssetStore, entry: &ManifestEntry) -> Result<RenderSample> {
    let class = config
        .taxonomy
        .index_of(&entry.class_name)
        .ok_or_else(|| Error::UnknownClass(entry.class_name.clone()))?;
    render(&sample_scene(config, class, entry.seed)?, assets)
}

/// Renders every manifest entry into `images/` and `labels/` under
/// `out_dir`. Output bytes do not depend on the thread count.
pub fn render_manifest(
    config: &ForgeConfig,
    assets: &AssetStore,
    manifest: &DatasetManifest,
    out_dir: &Path,
) -> Result<()> {
    if manifest.entries.is_empty() {
        return Ok(());
    }
    let images = out_dir.join(IMAGES_DIR);
    let labels = out_dir.join(LABELS_DIR);
    for d in [&images, &labels] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    manifest.entries.par_iter().try_for_each(|e| {
        let sample = render_entry(config, assets, e)?;
        sample.rgb.write_png(&images.join(format!("{}.png", e.image_id)))?;
        sample.label.write(&labels.join(format!("{}.png", e.image_id)))?;
        log::debug!("rendered {}", e.image_id);
        Ok(())
    })
}

/// Renders `samples_per_class` scenes for each configured class and writes
/// the manifest. Seeds derive from `config.seed`, the class and the sample
/// index, so any subset can be regenerated alone.
pub fn generate_dataset(config: &ForgeConfig, assets: &AssetStore, out_dir: &Path) -> Result<DatasetManifest> {
    let manifest = plan_dataset(config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    render_manifest(config, assets, &manifest, out_dir)?;
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    log::info!("rendered {} scenes into {}", manifest.entries.len(), out_dir.display());
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ForgeConfig {
        ForgeConfig {
            width: 24,
            height: 18,
            samples_per_class: 2,
            classes: vec![1, 15],
            ..ForgeConfig::default()
        }
    }

    #[test]
    fn manifest_roundtrip() {
        let m = plan_dataset(&tiny()).unwrap();
        assert_eq!(m.entries.len(), 4);
        assert_eq!(m.entries[0].image_id, "syn_aeroplane_00000");
        assert_eq!(m.entries[3].class_name, "person");
        assert_eq!(DatasetManifest::parse(&m.to_text()).unwrap(), m);
        assert!(DatasetManifest::parse("a b").is_err());
        assert!(DatasetManifest::parse("a b c").is_err());
    }

    #[test]
    fn zero_samples_writes_only_an_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let c = ForgeConfig {
            samples_per_class: 0,
            ..tiny()
        };
        let m = generate_dataset(&c, &AssetStore::from_config(&c).unwrap(), dir.path()).unwrap();
        assert!(m.entries.is_empty());
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from(MANIFEST_NAME)]);
        assert_eq!(std::fs::read_to_string(dir.path().join(MANIFEST_NAME)).unwrap(), "");
    }

    #[test]
    fn regenerates_from_manifest() {
        let c = tiny();
        let assets = AssetStore::from_config(&c).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m = generate_dataset(&c, &assets, a.path()).unwrap();
        let reread = DatasetManifest::read(&a.path().join(MANIFEST_NAME)).unwrap();
        render_manifest(&c, &assets, &reread, b.path()).unwrap();
        for e in &m.entries {
            for sub in [IMAGES_DIR, LABELS_DIR] {
                let name = format!("{sub}/{}.png", e.image_id);
                assert_eq!(
                    std::fs::read(a.path().join(&name)).unwrap(),
                    std::fs::read(b.path().join(&name)).unwrap()
                );
            }
        }
    }
}
