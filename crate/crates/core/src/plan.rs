//! Declarative two-stage FCN-8s fine-tuning plans.
//!
//! Stage `baseline` fine-tunes every layer of an ImageNet-initialized FCN-8s
//! on box-derived labels at a base learning rate of 1e-5. Stage `synthetic`
//! continues from the baseline and updates only the five score/upsampling
//! layers at 1e-6. Both use Adam with a pixel-wise softmax loss.
//!
//! Schema, one `key = value` per line in this order:
//!
//! | key                  | value                                          |
//! |----------------------|------------------------------------------------|
//! | `network`            | always `FCN-8s`                                |
//! | `stage`              | `baseline` or `synthetic`                      |
//! | `init`               | `imagenet` or `baseline`                       |
//! | `trainable_layers`   | `all` or comma-separated layer names           |
//! | `base_learning_rate` | positive real                                  |
//! | `optimizer`          | `Adam`                                         |
//! | `loss`               | `pixelwise_softmax`                            |
//! | `dataset`            | manifest path, repeated once per manifest      |
//! | `batch_size`         | optional positive integer                      |
//! | `epochs`             | optional positive integer                      |
//! | `lr_schedule`        | optional free-form token                       |

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const SYNTHETIC_STAGE_LAYERS: [&str; 5] = [
    "score_pool3",
    "score_pool4",
    "upscore2",
    "upscore_pool4",
    "upscore8",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Baseline,
    Synthetic,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Baseline => "baseline",
            Stage::Synthetic => "synthetic",
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Stage::Baseline),
            "synthetic" => Ok(Stage::Synthetic),
            other => Err(Error::UnknownStage(other.to_string())),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrainableLayers {
    All,
    Named(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FineTunePlan {
    pub stage: Stage,
    pub trainable_layers: TrainableLayers,
    pub base_learning_rate: f64,
    pub optimizer: String,
    pub loss: String,
    pub dataset_refs: Vec<PathBuf>,
    pub batch_size: Option<u32>,
    pub epochs: Option<u32>,
    pub lr_schedule: Option<String>,
}

impl FineTunePlan {
    pub fn for_stage(stage: Stage, dataset_refs: Vec<PathBuf>) -> Self {
        let (trainable_layers, base_learning_rate) = match stage {
            Stage::Baseline => (TrainableLayers::All, 1e-5),
            Stage::Synthetic => (
                TrainableLayers::Named(
                    SYNTHETIC_STAGE_LAYERS.iter().map(|s| s.to_string()).collect(),
                ),
                1e-6,
            ),
        };
        FineTunePlan {
            stage,
            trainable_layers,
            base_learning_rate,
            optimizer: "Adam".into(),
            loss: "pixelwise_softmax".into(),
            dataset_refs,
            batch_size: None,
            epochs: None,
            lr_schedule: None,
        }
    }

    fn init(&self) -> &'static str {
        match self.stage {
            Stage::Baseline => "imagenet",
            Stage::Synthetic => "baseline",
        }
    }

    pub fn to_key_values(&self) -> String {
        let layers = match &self.trainable_layers {
            TrainableLayers::All => "all".to_string(),
            TrainableLayers::Named(v) => v.join(","),
        };
        let mut lines = vec![
            "network = FCN-8s".to_string(),
            format!("stage = {}", self.stage),
            format!("init = {}", self.init()),
            format!("trainable_layers = {layers}"),
            format!("base_learning_rate = {:e}", self.base_learning_rate),
            format!("optimizer = {}", self.optimizer),
            format!("loss = {}", self.loss),
        ];
        lines.extend(
            self.dataset_refs
                .iter()
                .map(|p| format!("dataset = {}", p.display())),
        );
        if let Some(b) = self.batch_size {
            lines.push(format!("batch_size = {b}"));
        }
        if let Some(e) = self.epochs {
            lines.push(format!("epochs = {e}"));
        }
        if let Some(s) = &self.lr_schedule {
            lines.push(format!("lr_schedule = {s}"));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut stage = None;
        let mut layers = None;
        let mut lr = None;
        let mut optimizer = None;
        let mut loss = None;
        let mut plan_refs = Vec::new();
        let (mut batch_size, mut epochs, mut lr_schedule) = (None, None, None);
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            let positive = |v: &str| -> Result<u32> {
                v.parse::<u32>()
                    .ok()
                    .filter(|&x| x > 0)
                    .ok_or_else(|| err(format!("{key} must be a positive integer")))
            };
            match key {
                "network" | "init" => {}
                "stage" => stage = Some(value.parse::<Stage>()?),
                "trainable_layers" => {
                    layers = Some(if value == "all" {
                        TrainableLayers::All
                    } else {
                        TrainableLayers::Named(value.split(',').map(|s| s.trim().to_string()).collect())
                    })
                }
                "base_learning_rate" => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| err(format!("bad learning rate {value:?}")))?;
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(err("learning rate must be positive".into()));
                    }
                    lr = Some(v);
                }
                "optimizer" => optimizer = Some(value.to_string()),
                "loss" => loss = Some(value.to_string()),
                "dataset" => plan_refs.push(PathBuf::from(value)),
                "batch_size" => batch_size = Some(positive(value)?),
                "epochs" => epochs = Some(positive(value)?),
                "lr_schedule" => lr_schedule = Some(value.to_string()),
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Config(format!("plan is missing `{k}`"));
        Ok(FineTunePlan {
            stage: stage.ok_or_else(|| missing("stage"))?,
            trainable_layers: layers.ok_or_else(|| missing("trainable_layers"))?,
            base_learning_rate: lr.ok_or_else(|| missing("base_learning_rate"))?,
            optimizer: optimizer.ok_or_else(|| missing("optimizer"))?,
            loss: loss.ok_or_else(|| missing("loss"))?,
            dataset_refs: plan_refs,
            batch_size,
            epochs,
            lr_schedule,
        })
    }
}

/// Builds the plan for `stage` after checking that every manifest exists.
pub fn emit_plan(stage: &str, manifests: &[PathBuf]) -> Result<FineTunePlan> {
    let stage: Stage = stage.parse()?;
    for m in manifests {
        if !Path::new(m).is_file() {
            return Err(Error::io(
                m,
                std::io::Error::new(std::io::ErrorKind::NotFound, "manifest not found"),
            ));
        }
    }
    Ok(FineTunePlan::for_stage(stage, manifests.to_vec()))
}
