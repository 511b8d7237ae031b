//! Box-initialized GrabCut.
//!
//! Energy of a labeling `a` with foreground/background color models:
//!
//! ```text
//! E(a) = sum_n D_{a_n}(z_n) + sum_{(m,n) in N} [a_m != a_n] * gamma * exp(-beta |z_m - z_n|^2) / dist(m, n)
//! ```
//!
//! where `D` is the negative log-likelihood under the mixture for the
//! pixel's side and `N` is the 8-connected neighborhood. Each term is
//! rounded to a fixed-point integer (see [`ENERGY_SCALE`]) before summing,
//! so the min-cut and the energy evaluation agree bit for bit.

use crate::error::{Error, Result};
use crate::voc::{Rect, RgbImage};

use super::flow::FlowGraph;
use super::gmm::{fit_gmm, Gmm, EM_ROUNDS};

/// Fixed-point energy units per nat.
pub const ENERGY_SCALE: f64 = 1e6;

/// Every individual energy term is clamped to this many nats.
pub const MAX_TERM: f64 = 1e5;

pub type Energy = i64;

pub fn quantize(nats: f64) -> Energy {
    (nats.clamp(-MAX_TERM, MAX_TERM) * ENERGY_SCALE).round() as Energy
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighborhood {
    Four,
    #[default]
    Eight,
}

impl Neighborhood {
    /// Forward offsets so that every unordered neighbor pair is visited once.
    fn offsets(self) -> &'static [(i32, i32)] {
        match self {
            Neighborhood::Four => &[(1, 0), (0, 1)],
            Neighborhood::Eight => &[(1, 0), (0, 1), (1, 1), (-1, 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrabCutParams {
    pub gmm_components: usize,
    pub gamma: f64,
    pub iterations: usize,
    pub neighborhood: Neighborhood,
}

impl Default for GrabCutParams {
    fn default() -> Self {
        GrabCutParams {
            gmm_components: 5,
            gamma: 50.0,
            iterations: 5,
            neighborhood: Neighborhood::Eight,
        }
    }
}

impl GrabCutParams {
    pub fn validate(&self) -> Result<()> {
        if self.gmm_components < 1 {
            return Err(Error::Config("gmm_components must be >= 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config("gamma must be finite and >= 0".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Foreground/background decision per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn background(width: u32, height: u32) -> Self {
        BinaryMask {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        BinaryMask {
            width,
            height,
            data,
        }
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, fg: bool) {
        self.data[y as usize * self.width as usize + x as usize] = fg;
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

fn sq_dist(a: [u8; 3], b: [u8; 3]) -> f64 {
    a.iter()
        .zip(&b)
        .map(|(&p, &q)| {
            let d = p as f64 - q as f64;
            d * d
        })
        .sum()
}

fn neighbor_pairs(
    width: u32,
    height: u32,
    neighborhood: Neighborhood,
) -> impl Iterator<Item = ((u32, u32), (u32, u32), f64)> {
    let offsets = neighborhood.offsets();
    (0..height).flat_map(move |y| {
        (0..width).flat_map(move |x| {
            offsets.iter().filter_map(move |&(dx, dy)| {
                let nx = x as i64 + dx as i64;
                let ny = y as i64 + dy as i64;
                (nx >= 0 && nx < width as i64 && ny < height as i64).then(|| {
                    let dist = if dx != 0 && dy != 0 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    };
                    ((x, y), (nx as u32, ny as u32), dist)
                })
            })
        })
    })
}

/// Contrast scale `1 / (2 * mean squared color difference)` over all
/// neighbor pairs; 0 for constant images (and images without pairs).
pub fn compute_beta(image: &RgbImage, neighborhood: Neighborhood) -> f64 {
    let (w, h) = image.dims();
    let mut total = 0.0;
    let mut count = 0usize;
    for (a, b, _) in neighbor_pairs(w, h, neighborhood) {
        total += sq_dist(image.get(a.0, a.1), image.get(b.0, b.1));
        count += 1;
    }
    if count == 0 || total == 0.0 {
        0.0
    } else {
        1.0 / (2.0 * total / count as f64)
    }
}

/// Quantized pairwise weights, one per unordered neighbor pair.
#[derive(Debug, Clone)]
struct PairwiseTerms {
    edges: Vec<(usize, usize, Energy)>,
}

impl PairwiseTerms {
    fn new(image: &RgbImage, gamma: f64, neighborhood: Neighborhood) -> Self {
        let beta = compute_beta(image, neighborhood);
        let w = image.width() as usize;
        let edges = neighbor_pairs(image.width(), image.height(), neighborhood)
            .map(|(a, b, dist)| {
                let d2 = sq_dist(image.get(a.0, a.1), image.get(b.0, b.1));
                let weight = gamma * (-beta * d2).exp() / dist;
                (
                    a.1 as usize * w + a.0 as usize,
                    b.1 as usize * w + b.0 as usize,
                    quantize(weight),
                )
            })
            .collect();
        PairwiseTerms { edges }
    }
}

/// Data terms under a pair of color models, quantized.
fn data_terms(image: &RgbImage, model: &Gmm) -> Vec<Energy> {
    image
        .pixels()
        .map(|p| quantize(model.neg_log_likelihood(p)))
        .collect()
}

/// Evaluates the GrabCut energy of `mask` under frozen color models.
pub fn grabcut_energy(
    image: &RgbImage,
    mask: &BinaryMask,
    foreground: &Gmm,
    background: &Gmm,
    params: &GrabCutParams,
) -> Result<Energy> {
    if image.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: image.dims(),
            found: mask.dims(),
            context: Some("grabcut mask".into()),
        });
    }
    let pairwise = PairwiseTerms::new(image, params.gamma, params.neighborhood);
    let fg = data_terms(image, foreground);
    let bg = data_terms(image, background);
    Ok(total_energy(mask.data(), &fg, &bg, &pairwise))
}

fn total_energy(mask: &[bool], fg: &[Energy], bg: &[Energy], pairwise: &PairwiseTerms) -> Energy {
    let data: Energy = mask
        .iter()
        .enumerate()
        .map(|(i, &f)| if f { fg[i] } else { bg[i] })
        .sum();
    let smooth: Energy = pairwise
        .edges
        .iter()
        .filter(|&&(a, b, _)| mask[a] != mask[b])
        .map(|&(_, _, w)| w)
        .sum();
    data + smooth
}

/// Everything GrabCut produced: the mask, the color models it was cut with
/// and the energy after every round.
#[derive(Debug, Clone)]
pub struct GrabCutOutcome {
    pub mask: BinaryMask,
    pub foreground: Gmm,
    pub background: Gmm,
    pub energies: Vec<Energy>,
}

/// Globally optimal in-box labeling for fixed data terms. Pixels outside
/// the box are pinned to background.
fn min_cut_labeling(
    rect: &Rect,
    width: usize,
    fg: &[Energy],
    bg: &[Energy],
    pairwise: &PairwiseTerms,
) -> Vec<bool> {
    let bw = rect.width() as usize;
    let inside = |i: usize| rect.contains((i % width) as u32, (i / width) as u32);
    let node = |i: usize| {
        let (x, y) = (i % width, i / width);
        (y - rect.ymin as usize) * bw + (x - rect.xmin as usize)
    };
    let n = rect.area() as usize;
    let mut cost_fg = vec![0 as Energy; n];
    let mut cost_bg = vec![0 as Energy; n];
    for y in rect.ymin..rect.ymax {
        for x in rect.xmin..rect.xmax {
            let i = y as usize * width + x as usize;
            cost_fg[node(i)] = fg[i];
            cost_bg[node(i)] = bg[i];
        }
    }
    let mut graph = FlowGraph::new(n);
    for &(a, b, w) in &pairwise.edges {
        match (inside(a), inside(b)) {
            (true, true) => graph.add_edge(node(a), node(b), w, w),
            // The outside neighbor is background, so choosing foreground here
            // pays the boundary weight.
            (true, false) => cost_fg[node(a)] += w,
            (false, true) => cost_fg[node(b)] += w,
            (false, false) => {}
        }
    }
    for v in 0..n {
        let m = cost_fg[v].min(cost_bg[v]);
        graph.add_terminal(v, cost_bg[v] - m, cost_fg[v] - m);
    }
    graph.maxflow();
    let mut mask = vec![false; fg.len()];
    for (i, m) in mask.iter_mut().enumerate() {
        if inside(i) {
            *m = graph.in_source_segment(node(i));
        }
    }
    mask
}

fn pixels_where(image: &RgbImage, mask: &[bool], want: bool) -> Vec<[u8; 3]> {
    image
        .pixels()
        .zip(mask)
        .filter(|(_, &m)| m == want)
        .map(|(p, _)| p)
        .collect()
}

/// Warm-started EM refit, kept only if it does not raise the data energy of
/// the current segmentation.
fn refit(image: &RgbImage, model: &Gmm, mask: &[bool], side: bool) -> Gmm {
    let pixels = pixels_where(image, mask, side);
    if pixels.is_empty() {
        return model.clone();
    }
    let candidate = model.refine(&pixels, EM_ROUNDS);
    let cost = |g: &Gmm| -> Energy {
        pixels
            .iter()
            .map(|&p| quantize(g.neg_log_likelihood(p)))
            .sum()
    };
    if cost(&candidate) <= cost(model) {
        candidate
    } else {
        model.clone()
    }
}

/// Runs GrabCut inside `rect` and returns the full outcome.
pub fn grabcut(
    image: &RgbImage,
    rect: &Rect,
    params: &GrabCutParams,
    seed: u64,
) -> Result<GrabCutOutcome> {
    params.validate()?;
    rect.check_within(image.width(), image.height())?;
    let (w, h) = image.dims();
    let width = w as usize;
    let mut mask: Vec<bool> = (0..width * h as usize)
        .map(|i| rect.contains((i % width) as u32, (i / width) as u32))
        .collect();

    let fg_pixels = pixels_where(image, &mask, true);
    let mut bg_pixels = pixels_where(image, &mask, false);
    if bg_pixels.is_empty() {
        // Box covers the whole frame: seed the background model from the
        // box's outer ring.
        bg_pixels = (0..mask.len())
            .filter(|&i| {
                let (x, y) = ((i % width) as u32, (i / width) as u32);
                x == rect.xmin || y == rect.ymin || x + 1 == rect.xmax || y + 1 == rect.ymax
            })
            .map(|i| image.get((i % width) as u32, (i / width) as u32))
            .collect();
    }
    let mut foreground = fit_gmm(&fg_pixels, params.gmm_components, seed)?;
    let mut background = fit_gmm(
        &bg_pixels,
        params.gmm_components,
        seed ^ 0x9E37_79B9_7F4A_7C15,
    )?;

    let pairwise = PairwiseTerms::new(image, params.gamma, params.neighborhood);
    let mut energies = Vec::with_capacity(params.iterations);
    for round in 0..params.iterations {
        if round > 0 {
            foreground = refit(image, &foreground, &mask, true);
            background = refit(image, &background, &mask, false);
        }
        let fg = data_terms(image, &foreground);
        let bg = data_terms(image, &background);
        mask = min_cut_labeling(rect, width, &fg, &bg, &pairwise);
        energies.push(total_energy(&mask, &fg, &bg, &pairwise));
    }
    log::debug!("grabcut energies {energies:?}");
    Ok(GrabCutOutcome {
        mask: BinaryMask {
            width: w,
            height: h,
            data: mask,
        },
        foreground,
        background,
        energies,
    })
}

/// Foreground mask for the object inside `rect`.
pub fn grabcut_segment(
    image: &RgbImage,
    rect: &Rect,
    params: &GrabCutParams,
    seed: u64,
) -> Result<BinaryMask> {
    grabcut(image, rect, params, seed).map(|o| o.mask)
}
