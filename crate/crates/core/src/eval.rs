//! PASCAL-style segmentation scoring.
//!
//! Scores are computed from one confusion matrix accumulated over the whole
//! dataset. Averaging per-image IoUs gives a different (and wrong) number.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::voc::{ClassTaxonomy, LabelImage, NUM_CLASSES, VOID};

/// Pixel tallies, rows are ground truth and columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new(NUM_CLASSES)
    }
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        ConfusionMatrix {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.n
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.n + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one image pair. Ground-truth void pixels are skipped, whatever
    /// the prediction holds there.
    pub fn accumulate(&mut self, gt: &LabelImage, pred: &LabelImage) -> Result<()> {
        if gt.dims() != pred.dims() {
            return Err(Error::DimensionMismatch {
                expected: gt.dims(),
                found: pred.dims(),
                context: None,
            });
        }
        let w = gt.width() as usize;
        // Validate first so a failed call leaves the matrix untouched.
        // Predictions only matter where the ground truth is scored.
        if let Some(i) = gt
            .data()
            .iter()
            .zip(pred.data())
            .position(|(&g, &p)| g != VOID && p as usize >= self.n)
        {
            let (x, y) = ((i % w) as u32, (i / w) as u32);
            return Err(if pred.data()[i] == VOID {
                Error::VoidInPrediction { x, y }
            } else {
                Error::InvalidLabel {
                    value: pred.data()[i],
                    x,
                    y,
                }
            });
        }
        if let Some(i) = gt
            .data()
            .iter()
            .position(|&g| g != VOID && g as usize >= self.n)
        {
            return Err(Error::InvalidLabel {
                value: gt.data()[i],
                x: (i % w) as u32,
                y: (i / w) as u32,
            });
        }
        for (&g, &p) in gt.data().iter().zip(pred.data()) {
            if g != VOID {
                self.counts[g as usize * self.n + p as usize] += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.n, other.n, "merging matrices of different sizes");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn transposed(&self) -> Self {
        let mut t = ConfusionMatrix::new(self.n);
        for g in 0..self.n {
            for p in 0..self.n {
                t.counts[p * self.n + g] = self.get(g, p);
            }
        }
        t
    }
}

/// IoU per class; `None` for classes absent from both ground truth and
/// prediction.
pub fn per_class_iou(conf: &ConfusionMatrix) -> Vec<Option<f64>> {
    let n = conf.num_classes();
    (0..n)
        .map(|c| {
            let tp = conf.get(c, c);
            let fn_: u64 = (0..n).filter(|&p| p != c).map(|p| conf.get(c, p)).sum();
            let fp: u64 = (0..n).filter(|&g| g != c).map(|g| conf.get(g, c)).sum();
            let denom = tp + fp + fn_;
            (denom > 0).then(|| tp as f64 / denom as f64)
        })
        .collect()
}

/// Arithmetic mean over defined classes.
pub fn mean_iou(per_class: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoDefinedClass);
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoUReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<Option<f64>>,
    pub mean: f64,
    pub images: usize,
}

impl IoUReport {
    pub fn from_confusion(confusion: ConfusionMatrix, images: usize) -> Result<Self> {
        let per_class = per_class_iou(&confusion);
        let mean = mean_iou(&per_class)?;
        Ok(IoUReport {
            confusion,
            per_class,
            mean,
            images,
        })
    }

    /// Two-column table in percent, one row per class then the mean.
    pub fn to_table(&self, taxonomy: &ClassTaxonomy) -> String {
        let width = taxonomy
            .names()
            .iter()
            .map(String::len)
            .max()
            .unwrap_or(0)
            .max("Mean IoU".len());
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$} | {:>7}", "Class", "IoU (%)");
        let _ = writeln!(s, "{:-<width$}-+-{:->7}", "", "");
        for (i, v) in self.per_class.iter().enumerate() {
            let name = taxonomy.name(i as u8).unwrap_or("?");
            match v {
                Some(v) => {
                    let _ = writeln!(s, "{:<width$} | {:>7.2}", name, 100.0 * v);
                }
                None => {
                    let _ = writeln!(s, "{:<width$} | {:>7}", name, "n/a");
                }
            }
        }
        let _ = writeln!(s, "{:-<width$}-+-{:->7}", "", "");
        let _ = writeln!(s, "{:<width$} | {:>7.2}", "Mean IoU", 100.0 * self.mean);
        s
    }

    /// `key = value` lines: `images`, `mean_iou`, then `iou.<class>` with
    /// `undefined` for classes that never occur.
    pub fn to_key_values(&self, taxonomy: &ClassTaxonomy) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "images = {}", self.images);
        let _ = writeln!(s, "mean_iou = {:.6}", self.mean);
        for (i, v) in self.per_class.iter().enumerate() {
            let name = taxonomy.name(i as u8).unwrap_or("?");
            match v {
                Some(v) => {
                    let _ = writeln!(s, "iou.{name} = {v:.6}");
                }
                None => {
                    let _ = writeln!(s, "iou.{name} = undefined");
                }
            }
        }
        s
    }
}

fn label_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Scores every `*.png` label in `gt_dir` against the same-named file in
/// `pred_dir`.
pub fn evaluate_dataset(pred_dir: &Path, gt_dir: &Path) -> Result<IoUReport> {
    let gt_files = label_files(gt_dir)?;
    if gt_files.is_empty() {
        return Err(Error::EmptyInput("no ground-truth label files"));
    }
    let pairs: Vec<(String, PathBuf, PathBuf)> = gt_files
        .into_iter()
        .map(|gt| {
            let name = gt.file_name().expect("listed file").to_owned();
            let id = Path::new(&name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let pred = pred_dir.join(&name);
            if pred.is_file() {
                Ok((id, gt, pred))
            } else {
                Err(Error::MissingPrediction(id))
            }
        })
        .collect::<Result<_>>()?;
    let images = pairs.len();
    let matrices = pairs
        .par_iter()
        .map(|(id, gt, pred)| {
            let gt = LabelImage::read(gt)?;
            let pred = LabelImage::read(pred)?;
            let mut m = ConfusionMatrix::default();
            m.accumulate(&gt, &pred).map_err(|e| match e {
                Error::DimensionMismatch {
                    expected, found, ..
                } => Error::DimensionMismatch {
                    expected,
                    found,
                    context: Some(id.clone()),
                },
                other => other,
            })?;
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = ConfusionMatrix::default();
    for m in &matrices {
        total.merge(m);
    }
    IoUReport::from_confusion(total, images)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: u32, h: u32, d: &[u8]) -> LabelImage {
        LabelImage::new(w, h, d.to_vec()).unwrap()
    }

    #[test]
    fn perfect_prediction_is_diagonal() {
        let g = img(3, 1, &[0, 4, 4]);
        let mut m = ConfusionMatrix::default();
        m.accumulate(&g, &g).unwrap();
        assert_eq!(m.get(0, 0), 1);
        assert_eq!(m.get(4, 4), 2);
        assert_eq!(m.total(), 3);
        let iou = per_class_iou(&m);
        assert_eq!(iou[0], Some(1.0));
        assert_eq!(iou[4], Some(1.0));
        assert_eq!(iou[1], None);
        assert_eq!(mean_iou(&iou).unwrap(), 1.0);
    }

    #[test]
    fn void_ground_truth_is_ignored() {
        let g = img(2, 1, &[VOID, VOID]);
        let p = img(2, 1, &[3, 0]);
        let mut m = ConfusionMatrix::default();
        m.accumulate(&g, &p).unwrap();
        m.accumulate(&g, &img(2, 1, &[VOID, 7])).unwrap();
        assert_eq!(m, ConfusionMatrix::default());
    }

    #[test]
    fn hand_tallied_fixture() {
        let g = img(2, 2, &[0, 1, 1, VOID]);
        let p = img(2, 2, &[0, 1, 0, 0]);
        let mut m = ConfusionMatrix::default();
        m.accumulate(&g, &p).unwrap();
        assert_eq!(m.get(0, 0), 1);
        assert_eq!(m.get(1, 1), 1);
        assert_eq!(m.get(1, 0), 1);
        assert_eq!(m.total(), 3);
        let iou = per_class_iou(&m);
        assert_eq!(iou[0], Some(0.5));
        assert_eq!(iou[1], Some(0.5));
        assert!(iou[2..].iter().all(Option::is_none));
    }

    #[test]
    fn errors() {
        let mut m = ConfusionMatrix::default();
        assert!(matches!(
            m.accumulate(&img(1, 1, &[0]), &img(2, 1, &[0, 0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            m.accumulate(&img(2, 1, &[0, 1]), &img(2, 1, &[0, VOID])),
            Err(Error::VoidInPrediction { x: 1, y: 0 })
        ));
        assert_eq!(m.total(), 0);
        assert!(matches!(mean_iou(&[None; 21]), Err(Error::NoDefinedClass)));
    }

    #[test]
    fn all_ones_mean() {
        assert_eq!(mean_iou(&[Some(1.0); 21]).unwrap(), 1.0);
    }

    #[test]
    fn report_formats() {
        let g = img(2, 2, &[0, 1, 1, VOID]);
        let p = img(2, 2, &[0, 1, 0, 0]);
        let mut m = ConfusionMatrix::default();
        m.accumulate(&g, &p).unwrap();
        let r = IoUReport::from_confusion(m, 1).unwrap();
        let t = ClassTaxonomy::voc();
        let kv = r.to_key_values(&t);
        assert!(kv.contains("mean_iou = 0.500000"));
        assert!(kv.contains("iou.aeroplane = 0.500000"));
        assert!(kv.contains("iou.tvmonitor = undefined"));
        let table = r.to_table(&t);
        assert!(table.contains("Mean IoU"));
        assert!(table.lines().any(|l| l.starts_with("aeroplane") && l.ends_with("50.00")));
    }
}
