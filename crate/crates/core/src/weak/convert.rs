use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::seed::{derive_seed, hash_str};
use crate::voc::{BoxAnnotation, LabelImage, RgbImage};

use super::crf::{dense_crf_refine, CrfParams, MessagePassing};
use super::grabcut::{grabcut_segment, GrabCutParams, Neighborhood};
use super::merge::merge_instance_masks;
use super::unary::{boxes_to_unary, BoxPrior};

pub const MANIFEST_NAME: &str = "manifest.txt";

/// Extensions tried, in order, when looking up `<image_id>.<ext>`.
pub const IMAGE_EXTENSIONS: [&str; 5] = ["jpg", "jpeg", "png", "bmp", "JPG"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelMethod {
    GrabCut,
    #[default]
    Crf,
}

impl FromStr for LabelMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grabcut" => Ok(LabelMethod::GrabCut),
            "crf" => Ok(LabelMethod::Crf),
            other => Err(Error::Config(format!(
                "unknown method {other:?} (expected `grabcut` or `crf`)"
            ))),
        }
    }
}

impl fmt::Display for LabelMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMethod::GrabCut => "grabcut",
            LabelMethod::Crf => "crf",
        })
    }
}

impl FromStr for MessagePassing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MessagePassing::Exact),
            "lattice" => Ok(MessagePassing::Lattice),
            "auto" => Ok(MessagePassing::Auto),
            other => Err(Error::Config(format!("unknown message passing {other:?}"))),
        }
    }
}

impl FromStr for Neighborhood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "4" => Ok(Neighborhood::Four),
            "8" => Ok(Neighborhood::Eight),
            other => Err(Error::Config(format!("neighborhood must be 4 or 8, got {other:?}"))),
        }
    }
}

/// Keys accepted in a conversion config file, with defaults and meaning.
pub const CONVERT_KEYS: &[(&str, &str, &str)] = &[
    ("method", "crf", "grabcut or crf"),
    ("gmm_components", "5", "GrabCut mixture components per side"),
    ("gamma", "50", "GrabCut boundary strength"),
    ("grabcut_iterations", "5", "GrabCut refit/cut rounds"),
    ("neighborhood", "8", "GrabCut pixel connectivity, 4 or 8"),
    ("spatial_weight", "3", "CRF smoothness kernel weight"),
    ("spatial_sigma", "3", "CRF smoothness kernel width, pixels"),
    ("bilateral_weight", "10", "CRF appearance kernel weight"),
    ("bilateral_spatial_sigma", "80", "CRF appearance kernel width, pixels"),
    ("bilateral_color_sigma", "13", "CRF appearance kernel width, 8-bit color units"),
    ("mean_field_iterations", "10", "CRF mean-field updates"),
    ("message_passing", "auto", "CRF filtering: exact, lattice or auto"),
    ("inside_fg_prob", "0.9", "CRF prior mass on the box class inside a box"),
    ("outside_bg_prob", "0.99", "CRF prior mass on background outside all boxes"),
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConvertOptions {
    pub method: LabelMethod,
    pub grabcut: GrabCutParams,
    pub crf: CrfParams,
    pub prior: BoxPrior,
    pub seed: u64,
}

impl ConvertOptions {
    /// Overrides fields from a parsed config file.
    pub fn apply_config(&mut self, kv: &KeyValues) -> Result<()> {
        kv.reject_unknown(|k| CONVERT_KEYS.iter().any(|(name, _, _)| *name == k))?;
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.get($key)? {
                    $field = v;
                }
            };
        }
        set!("method", self.method);
        set!("gmm_components", self.grabcut.gmm_components);
        set!("gamma", self.grabcut.gamma);
        set!("grabcut_iterations", self.grabcut.iterations);
        set!("neighborhood", self.grabcut.neighborhood);
        set!("spatial_weight", self.crf.spatial_weight);
        set!("spatial_sigma", self.crf.spatial_sigma);
        set!("bilateral_weight", self.crf.bilateral_weight);
        set!("bilateral_spatial_sigma", self.crf.bilateral_spatial_sigma);
        set!("bilateral_color_sigma", self.crf.bilateral_color_sigma);
        set!("mean_field_iterations", self.crf.mean_field_iterations);
        set!("message_passing", self.crf.message_passing);
        set!("inside_fg_prob", self.prior.inside_fg_prob);
        set!("outside_bg_prob", self.prior.outside_bg_prob);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.grabcut.validate()?;
        self.crf.validate()?;
        self.prior.validate()
    }
}

/// Labels one image from its boxes with the configured method.
pub fn label_from_boxes(
    image: &RgbImage,
    annotation: &BoxAnnotation,
    options: &ConvertOptions,
) -> Result<LabelImage> {
    let (w, h) = image.dims();
    annotation.validate(w, h)?;
    match options.method {
        LabelMethod::GrabCut => {
            let image_seed = derive_seed(options.seed, &[hash_str(&annotation.image_id)]);
            let masks = annotation
                .boxes
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    grabcut_segment(image, &b.rect, &options.grabcut, derive_seed(image_seed, &[i as u64]))
                })
                .collect::<Result<Vec<_>>>()?;
            merge_instance_masks(annotation, &masks, w, h)
        }
        LabelMethod::Crf => {
            let unary = boxes_to_unary(annotation, w, h, &options.prior)?;
            dense_crf_refine(image, &unary, &options.crf)
        }
    }
}

/// `image_id path` lines, paths relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConvertManifest {
    pub entries: Vec<(String, PathBuf)>,
}

impl ConvertManifest {
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(id, p)| format!("{id} {}\n", p.display()))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some(id), Some(p), None) => entries.push((id.to_string(), PathBuf::from(p))),
                _ => {
                    return Err(Error::Parse {
                        line: n + 1,
                        message: "expected `image_id path`".into(),
                    })
                }
            }
        }
        Ok(ConvertManifest { entries })
    }
}

pub fn find_image(images_dir: &Path, image_id: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| images_dir.join(format!("{image_id}.{ext}")))
        .find(|p| p.is_file())
}

/// Converts every annotated image under `images_dir`, writing
/// `<out_dir>/<image_id>.png` label files plus `manifest.txt`.
pub fn convert_dataset(
    images_dir: &Path,
    annotations: &[BoxAnnotation],
    options: &ConvertOptions,
    out_dir: &Path,
) -> Result<ConvertManifest> {
    options.validate()?;
    let sources = annotations
        .iter()
        .map(|a| {
            find_image(images_dir, &a.image_id).ok_or_else(|| Error::MissingImage(a.image_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let entries = annotations
        .par_iter()
        .zip(&sources)
        .map(|(ann, src)| {
            let image = RgbImage::read(src)?;
            let label = label_from_boxes(&image, ann, options)?;
            let name = PathBuf::from(format!("{}.png", ann.image_id));
            label.write(&out_dir.join(&name))?;
            log::info!("labeled {} with {}", ann.image_id, options.method);
            Ok((ann.image_id.clone(), name))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = ConvertManifest { entries };
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_overrides() {
        let kv = KeyValues::parse("method = grabcut\ngamma = 20\nneighborhood = 4\nmessage_passing = exact\n").unwrap();
        let mut o = ConvertOptions::default();
        o.apply_config(&kv).unwrap();
        assert_eq!(o.method, LabelMethod::GrabCut);
        assert_eq!(o.grabcut.gamma, 20.0);
        assert_eq!(o.grabcut.neighborhood, Neighborhood::Four);
        assert_eq!(o.crf.message_passing, MessagePassing::Exact);
        assert!(o
            .apply_config(&KeyValues::parse("colour = red").unwrap())
            .is_err());
        assert!(o
            .apply_config(&KeyValues::parse("method = magic").unwrap())
            .is_err());
    }

    #[test]
    fn every_key_is_applied() {
        let text: String = CONVERT_KEYS
            .iter()
            .map(|(k, d, _)| format!("{k} = {d}\n"))
            .collect();
        let mut o = ConvertOptions::default();
        o.apply_config(&KeyValues::parse(&text).unwrap()).unwrap();
        assert_eq!(o, ConvertOptions::default());
    }

    #[test]
    fn manifest_roundtrip() {
        let m = ConvertManifest {
            entries: vec![("a".into(), "a.png".into()), ("b".into(), "b.png".into())],
        };
        assert_eq!(ConvertManifest::parse(&m.to_text()).unwrap(), m);
        assert!(ConvertManifest::parse("a b c").is_err());
    }
}
