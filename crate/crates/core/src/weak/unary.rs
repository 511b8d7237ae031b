use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::voc::{BoxAnnotation, LabelImage, NUM_CLASSES};

/// Probabilities below this are treated as "no support" and costed at
/// `-ln(PROB_FLOOR)`.
pub const PROB_FLOOR: f64 = 1e-10;

/// Per-pixel, per-label costs (negative log-probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct UnaryField {
    width: u32,
    height: u32,
    num_labels: usize,
    costs: Vec<f64>,
}

impl UnaryField {
    /// `costs` is pixel-major: the costs of pixel `i` are
    /// `costs[i * num_labels..(i + 1) * num_labels]`.
    pub fn new(width: u32, height: u32, num_labels: usize, costs: Vec<f64>) -> Result<Self> {
        if num_labels == 0 || num_labels > NUM_CLASSES {
            return Err(Error::Config(format!(
                "unary field needs 1..={NUM_CLASSES} labels, got {num_labels}"
            )));
        }
        let expected = width as usize * height as usize * num_labels;
        if costs.len() != expected {
            return Err(Error::BadBuffer {
                len: costs.len(),
                width,
                height,
                channels: num_labels,
            });
        }
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config("unary costs must be finite and >= 0".into()));
        }
        Ok(UnaryField {
            width,
            height,
            num_labels,
            costs,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.costs[i * self.num_labels..(i + 1) * self.num_labels]
    }

    /// Per-pixel cheapest label, lowest index on ties.
    pub fn argmin(&self) -> LabelImage {
        let data = self
            .costs
            .chunks(self.num_labels)
            .map(|c| {
                let mut best = 0;
                for (l, &v) in c.iter().enumerate() {
                    if v < c[best] {
                        best = l;
                    }
                }
                best as u8
            })
            .collect();
        LabelImage::new(self.width, self.height, data).expect("labels < 21")
    }

    /// Labels whose probability exceeds [`PROB_FLOOR`] somewhere.
    pub fn supported_labels(&self) -> BTreeSet<u8> {
        let limit = -PROB_FLOOR.ln() * (1.0 - 1e-12);
        let mut set = BTreeSet::new();
        for c in self.costs.chunks(self.num_labels) {
            for (l, &v) in c.iter().enumerate() {
                if v < limit {
                    set.insert(l as u8);
                }
            }
        }
        set
    }

    pub fn mirrored(&self) -> Self {
        let (w, l) = (self.width as usize, self.num_labels);
        let mut costs = Vec::with_capacity(self.costs.len());
        for row in self.costs.chunks(w * l) {
            for x in (0..w).rev() {
                costs.extend_from_slice(&row[x * l..(x + 1) * l]);
            }
        }
        UnaryField { costs, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxPrior {
    /// Mass put on the box classes inside a box; the rest goes to background.
    pub inside_fg_prob: f64,
    /// Background mass outside every box; the rest is shared by the classes
    /// present in the annotation.
    pub outside_bg_prob: f64,
}

impl Default for BoxPrior {
    fn default() -> Self {
        BoxPrior {
            inside_fg_prob: 0.9,
            outside_bg_prob: 0.99,
        }
    }
}

impl BoxPrior {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("inside_fg_prob", self.inside_fg_prob),
            ("outside_bg_prob", self.outside_bg_prob),
        ] {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Turns weak box labels into a 21-label unary field.
///
/// Inside boxes, `inside_fg_prob` is split equally among the distinct
/// classes whose boxes cover the pixel. Outside all boxes background gets
/// `outside_bg_prob`.
pub fn boxes_to_unary(
    annotation: &BoxAnnotation,
    width: u32,
    height: u32,
    prior: &BoxPrior,
) -> Result<UnaryField> {
    prior.validate()?;
    annotation.validate(width, height)?;
    let present: BTreeSet<u8> = annotation.boxes.iter().map(|b| b.class_index).collect();
    let cost = |p: f64| -p.max(PROB_FLOOR).ln();

    let mut outside = vec![cost(0.0); NUM_CLASSES];
    if present.is_empty() {
        outside[0] = cost(1.0);
    } else {
        outside[0] = cost(prior.outside_bg_prob);
        let share = (1.0 - prior.outside_bg_prob) / present.len() as f64;
        for &c in &present {
            outside[c as usize] = cost(share);
        }
    }

    let mut costs = Vec::with_capacity(width as usize * height as usize * NUM_CLASSES);
    let mut covering = BTreeSet::new();
    for y in 0..height {
        for x in 0..width {
            covering.clear();
            covering.extend(
                annotation
                    .boxes
                    .iter()
                    .filter(|b| b.contains(x, y))
                    .map(|b| b.class_index),
            );
            if covering.is_empty() {
                costs.extend_from_slice(&outside);
                continue;
            }
            let start = costs.len();
            costs.resize(start + NUM_CLASSES, cost(0.0));
            costs[start] = cost(1.0 - prior.inside_fg_prob);
            let share = prior.inside_fg_prob / covering.len() as f64;
            for &c in &covering {
                costs[start + c as usize] = cost(share);
            }
        }
    }
    UnaryField::new(width, height, NUM_CLASSES, costs)
}
