//! Full-covariance Gaussian mixtures over RGB colors.

use nalgebra::{Cholesky, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Ridge added to every covariance, in squared 8-bit color units.
pub const COVARIANCE_RIDGE: f64 = 1e-3;

/// EM rounds run by [`fit_gmm`] after initialization.
pub const EM_ROUNDS: usize = 10;

/// Larger pixel sets are randomly subsampled (with the caller's seed) before
/// fitting.
pub const MAX_FIT_SAMPLES: usize = 40_000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
    chol: Matrix3<f64>,
    log_norm: f64,
}

impl Component {
    fn new(weight: f64, mean: Vector3<f64>, covariance: Matrix3<f64>) -> Self {
        let chol = Cholesky::new(covariance)
            .expect("ridged covariance is positive definite")
            .l();
        let log_det = 2.0 * (0..3).map(|i| chol[(i, i)].ln()).sum::<f64>();
        Component {
            weight,
            mean,
            covariance,
            chol,
            log_norm: -0.5 * (3.0 * LN_2PI + log_det),
        }
    }

    /// Log density of the Gaussian (without the mixture weight).
    pub fn log_density(&self, x: &Vector3<f64>) -> f64 {
        let d = x - self.mean;
        // Forward substitution with the lower Cholesky factor.
        let l = &self.chol;
        let y0 = d[0] / l[(0, 0)];
        let y1 = (d[1] - l[(1, 0)] * y0) / l[(1, 1)];
        let y2 = (d[2] - l[(2, 0)] * y0 - l[(2, 1)] * y1) / l[(2, 2)];
        self.log_norm - 0.5 * (y0 * y0 + y1 * y1 + y2 * y2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    components: Vec<Component>,
}

fn to_vec(p: [u8; 3]) -> Vector3<f64> {
    Vector3::new(p[0] as f64, p[1] as f64, p[2] as f64)
}

fn ridge() -> Matrix3<f64> {
    Matrix3::identity() * COVARIANCE_RIDGE
}

impl Gmm {
    /// Builds a mixture from explicit parameters. Weights are renormalized
    /// and covariances are used as given (they must be positive definite).
    pub fn from_parts(parts: Vec<(f64, Vector3<f64>, Matrix3<f64>)>) -> Result<Self> {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        if parts.is_empty() || !(total > 0.0) {
            return Err(Error::EmptyInput("mixture needs a positive weight"));
        }
        let mut components = Vec::with_capacity(parts.len());
        for (w, m, c) in parts {
            if Cholesky::new(c).is_none() {
                return Err(Error::Config("covariance is not positive definite".into()));
            }
            components.push(Component::new(w / total, m, c));
        }
        Ok(Gmm { components })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn log_likelihood(&self, color: [u8; 3]) -> f64 {
        let x = to_vec(color);
        let terms: Vec<f64> = self
            .components
            .iter()
            .map(|c| c.weight.ln() + c.log_density(&x))
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    pub fn neg_log_likelihood(&self, color: [u8; 3]) -> f64 {
        -self.log_likelihood(color)
    }

    /// Runs `rounds` EM iterations starting from `self`. Components that lose
    /// all responsibility are dropped.
    pub fn refine(&self, pixels: &[[u8; 3]], rounds: usize) -> Gmm {
        let xs: Vec<Vector3<f64>> = pixels.iter().map(|&p| to_vec(p)).collect();
        let mut gmm = self.clone();
        for _ in 0..rounds {
            gmm = gmm.em_step(&xs);
        }
        gmm
    }

    fn em_step(&self, xs: &[Vector3<f64>]) -> Gmm {
        let k = self.components.len();
        let mut mass = vec![0.0; k];
        let mut sums = vec![Vector3::zeros(); k];
        let mut resp = vec![0.0; k];
        let mut responsibilities = Vec::with_capacity(xs.len() * k);
        for x in xs {
            let mut max = f64::NEG_INFINITY;
            for (r, c) in resp.iter_mut().zip(&self.components) {
                *r = c.weight.ln() + c.log_density(x);
                max = max.max(*r);
            }
            let mut z = 0.0;
            for r in resp.iter_mut() {
                *r = (*r - max).exp();
                z += *r;
            }
            for (j, r) in resp.iter().enumerate() {
                let r = r / z;
                mass[j] += r;
                sums[j] += x * r;
                responsibilities.push(r);
            }
        }
        let means: Vec<Vector3<f64>> = sums
            .iter()
            .zip(&mass)
            .map(|(s, &m)| if m > 0.0 { s / m } else { Vector3::zeros() })
            .collect();
        let mut covs = vec![Matrix3::zeros(); k];
        for (i, x) in xs.iter().enumerate() {
            for j in 0..k {
                let r = responsibilities[i * k + j];
                if r > 0.0 {
                    let d = x - means[j];
                    covs[j] += d * d.transpose() * r;
                }
            }
        }
        let n = xs.len() as f64;
        let components = (0..k)
            .filter(|&j| mass[j] > 1e-9)
            .map(|j| Component::new(mass[j] / n, means[j], covs[j] / mass[j] + ridge()))
            .collect::<Vec<_>>();
        let total: f64 = components.iter().map(|c| c.weight).sum();
        Gmm {
            components: components
                .into_iter()
                .map(|c| Component::new(c.weight / total, c.mean, c.covariance))
                .collect(),
        }
    }
}

fn subsample(pixels: &[[u8; 3]], seed: u64) -> Vec<[u8; 3]> {
    if pixels.len() <= MAX_FIT_SAMPLES {
        return pixels.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, pixels.len(), MAX_FIT_SAMPLES).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pixels[i]).collect()
}

/// Fits a `k`-component mixture: pixels are ordered by brightness, split
/// into `k` equal quantile groups whose moments seed the components, then
/// refined with [`EM_ROUNDS`] EM rounds. With fewer than `k` pixels the
/// component count drops to the pixel count.
pub fn fit_gmm(pixels: &[[u8; 3]], k: usize, seed: u64) -> Result<Gmm> {
    if pixels.is_empty() {
        return Err(Error::EmptyInput("no pixels to fit a color model"));
    }
    if k == 0 {
        return Err(Error::Config("gmm needs at least one component".into()));
    }
    let mut sample = subsample(pixels, seed);
    sample.sort_by_key(|p| (p[0] as u16 + p[1] as u16 + p[2] as u16, *p));
    let n = sample.len();
    let k = k.min(n);
    let mut parts = Vec::with_capacity(k);
    for c in 0..k {
        let chunk = &sample[c * n / k..(c + 1) * n / k];
        let m = chunk.len() as f64;
        let mean = chunk.iter().map(|&p| to_vec(p)).sum::<Vector3<f64>>() / m;
        let cov = chunk
            .iter()
            .map(|&p| {
                let d = to_vec(p) - mean;
                d * d.transpose()
            })
            .sum::<Matrix3<f64>>()
            / m
            + ridge();
        parts.push((m, mean, cov));
    }
    Ok(Gmm::from_parts(parts)?.refine(&sample, EM_ROUNDS))
}
