//! Fully connected CRF with Gaussian pairwise kernels, solved by mean-field.
//!
//! Pairwise kernel between pixels `i` and `j` with positions `p` and colors
//! `I`:
//!
//! ```text
//! k(i, j) = w_s * exp(-|p_i - p_j|^2 / (2 theta_gamma^2))
//!         + w_b * exp(-|p_i - p_j|^2 / (2 theta_alpha^2) - |I_i - I_j|^2 / (2 theta_beta^2))
//! ```
//!
//! with Potts label compatibility. Each update sets
//! `Q_i(l) ∝ exp(-U_i(l) - sum_{j != i} k(i, j) * (1 - Q_j(l)))`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::voc::{LabelImage, RgbImage, NUM_CLASSES};

use super::lattice::PermutohedralLattice;
use super::unary::UnaryField;

/// Images with at most this many pixels use exact filtering under
/// [`MessagePassing::Auto`].
pub const EXACT_PIXEL_LIMIT: usize = 64 * 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MessagePassing {
    /// Direct O(N^2) summation.
    Exact,
    /// Permutohedral-lattice approximation, O(N).
    Lattice,
    /// Exact up to [`EXACT_PIXEL_LIMIT`] pixels, lattice above.
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrfParams {
    pub spatial_weight: f64,
    pub spatial_sigma: f64,
    pub bilateral_weight: f64,
    pub bilateral_spatial_sigma: f64,
    pub bilateral_color_sigma: f64,
    pub mean_field_iterations: usize,
    pub message_passing: MessagePassing,
}

impl Default for CrfParams {
    fn default() -> Self {
        CrfParams {
            spatial_weight: 3.0,
            spatial_sigma: 3.0,
            bilateral_weight: 10.0,
            bilateral_spatial_sigma: 80.0,
            bilateral_color_sigma: 13.0,
            mean_field_iterations: 10,
            message_passing: MessagePassing::Auto,
        }
    }
}

impl CrfParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("spatial_weight", self.spatial_weight),
            ("bilateral_weight", self.bilateral_weight),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        let positive = [
            ("spatial_sigma", self.spatial_sigma),
            ("bilateral_spatial_sigma", self.bilateral_spatial_sigma),
            ("bilateral_color_sigma", self.bilateral_color_sigma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and > 0")));
            }
        }
        Ok(())
    }
}

/// Mean-field state; each [`step`](Self::step) performs one update.
pub struct MeanField<'a> {
    image: &'a RgbImage,
    unary: &'a UnaryField,
    params: CrfParams,
    q: Vec<f64>,
    lattices: Option<(PermutohedralLattice, PermutohedralLattice)>,
    iterations: usize,
}

fn softmax_into(neg_energy: &[f64], out: &mut [f64]) {
    let max = neg_energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &e) in out.iter_mut().zip(neg_energy) {
        *o = (e - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

impl<'a> MeanField<'a> {
    pub fn new(image: &'a RgbImage, unary: &'a UnaryField, params: &CrfParams) -> Result<Self> {
        params.validate()?;
        if image.dims() != unary.dims() {
            return Err(Error::DimensionMismatch {
                expected: image.dims(),
                found: unary.dims(),
                context: Some("unary field".into()),
            });
        }
        let l = unary.num_labels();
        let mut q = vec![0.0; unary.costs().len()];
        let mut neg = vec![0.0; l];
        for (i, out) in q.chunks_mut(l).enumerate() {
            for (n, &c) in neg.iter_mut().zip(unary.pixel(i)) {
                *n = -c;
            }
            softmax_into(&neg, out);
        }
        let use_lattice = match params.message_passing {
            MessagePassing::Exact => false,
            MessagePassing::Lattice => true,
            MessagePassing::Auto => image.len() > EXACT_PIXEL_LIMIT,
        };
        let lattices = use_lattice.then(|| Self::build_lattices(image, params));
        Ok(MeanField {
            image,
            unary,
            params: *params,
            q,
            lattices,
            iterations: 0,
        })
    }

    fn build_lattices(image: &RgbImage, p: &CrfParams) -> (PermutohedralLattice, PermutohedralLattice) {
        let w = image.width();
        let mut spatial = Vec::with_capacity(2 * image.len());
        let mut bilateral = Vec::with_capacity(5 * image.len());
        for (i, c) in image.pixels().enumerate() {
            let (x, y) = ((i as u32 % w) as f64, (i as u32 / w) as f64);
            spatial.extend([x / p.spatial_sigma, y / p.spatial_sigma]);
            bilateral.extend([
                x / p.bilateral_spatial_sigma,
                y / p.bilateral_spatial_sigma,
                c[0] as f64 / p.bilateral_color_sigma,
                c[1] as f64 / p.bilateral_color_sigma,
                c[2] as f64 / p.bilateral_color_sigma,
            ]);
        }
        (
            PermutohedralLattice::new(&spatial, 2),
            PermutohedralLattice::new(&bilateral, 5),
        )
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Current per-pixel label distributions, pixel-major.
    pub fn marginals(&self) -> &[f64] {
        &self.q
    }

    /// `sum_{j != i} k(i, j) Q_j(l)` for every pixel and label.
    fn messages(&self) -> Vec<f64> {
        let l = self.unary.num_labels();
        match &self.lattices {
            Some((spatial, bilateral)) => {
                let mut out = vec![0.0; self.q.len()];
                for (lat, weight) in [
                    (spatial, self.params.spatial_weight),
                    (bilateral, self.params.bilateral_weight),
                ] {
                    if weight == 0.0 {
                        continue;
                    }
                    let filtered = lat.filter(&self.q, l);
                    for ((o, f), q) in out.iter_mut().zip(&filtered).zip(&self.q) {
                        *o += weight * (f - q);
                    }
                }
                out
            }
            None => self.exact_messages(),
        }
    }

    fn exact_messages(&self) -> Vec<f64> {
        let p = &self.params;
        let l = self.unary.num_labels();
        let w = self.image.width() as usize;
        let n = self.image.len();
        let colors: Vec<[f64; 3]> = self
            .image
            .pixels()
            .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
            .collect();
        let gs = -0.5 / (p.spatial_sigma * p.spatial_sigma);
        let ga = -0.5 / (p.bilateral_spatial_sigma * p.bilateral_spatial_sigma);
        let gb = -0.5 / (p.bilateral_color_sigma * p.bilateral_color_sigma);
        let mut out = vec![0.0; self.q.len()];
        if p.spatial_weight == 0.0 && p.bilateral_weight == 0.0 {
            return out;
        }
        out.par_chunks_mut(l).enumerate().for_each(|(i, acc)| {
            let (xi, yi) = ((i % w) as f64, (i / w) as f64);
            let ci = colors[i];
            for j in (0..n).filter(|&j| j != i) {
                let (dx, dy) = ((j % w) as f64 - xi, (j / w) as f64 - yi);
                let dp = dx * dx + dy * dy;
                let cj = colors[j];
                let dc = (ci[0] - cj[0]).powi(2) + (ci[1] - cj[1]).powi(2) + (ci[2] - cj[2]).powi(2);
                let k = p.spatial_weight * (gs * dp).exp()
                    + p.bilateral_weight * (ga * dp + gb * dc).exp();
                if k == 0.0 {
                    continue;
                }
                let qj = &self.q[j * l..(j + 1) * l];
                for (a, &qv) in acc.iter_mut().zip(qj) {
                    *a += k * qv;
                }
            }
        });
        out
    }

    pub fn step(&mut self) {
        let l = self.unary.num_labels();
        let messages = self.messages();
        let unary = self.unary;
        self.q
            .par_chunks_mut(l)
            .zip(messages.par_chunks(l))
            .enumerate()
            .for_each(|(i, (q, m))| {
                let total: f64 = m.iter().sum();
                let neg: Vec<f64> = unary
                    .pixel(i)
                    .iter()
                    .zip(m)
                    .map(|(&u, &ml)| -u - (total - ml))
                    .collect();
                softmax_into(&neg, q);
            });
        self.iterations += 1;
    }

    /// Most probable label per pixel, lowest index on ties.
    pub fn labels(&self) -> LabelImage {
        let l = self.unary.num_labels();
        let data = self
            .q
            .chunks(l)
            .map(|q| {
                let mut best = 0;
                for (k, &v) in q.iter().enumerate() {
                    if v > q[best] {
                        best = k;
                    }
                }
                best as u8
            })
            .collect();
        LabelImage::new(self.image.width(), self.image.height(), data).expect("labels < 21")
    }

    /// Largest deviation of any pixel's distribution sum from 1.
    pub fn normalization_error(&self) -> f64 {
        self.q
            .chunks(self.unary.num_labels())
            .map(|q| (q.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Runs `mean_field_iterations` updates and returns the per-pixel argmax.
pub fn dense_crf_refine(image: &RgbImage, unary: &UnaryField, params: &CrfParams) -> Result<LabelImage> {
    if unary.num_labels() > NUM_CLASSES {
        return Err(Error::Config("too many labels for a label image".into()));
    }
    let mut mf = MeanField::new(image, unary, params)?;
    for _ in 0..params.mean_field_iterations {
        mf.step();
    }
    Ok(mf.labels())
}
