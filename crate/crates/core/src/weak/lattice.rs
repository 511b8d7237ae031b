//! Permutohedral lattice for fast high-dimensional Gaussian filtering.
//!
//! Approximates `out_i = sum_j exp(-|f_i - f_j|^2 / 2) * in_j` for features
//! already divided by their standard deviations. Cost is linear in the
//! number of points (splat onto the lattice, blur along each of the `d + 1`
//! lattice axes, slice back).

use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct PermutohedralLattice {
    dim: usize,
    points: usize,
    // Per point, d+1 lattice vertex indices (offset by one, 0 is the empty
    // vertex) and barycentric weights.
    offsets: Vec<usize>,
    weights: Vec<f64>,
    // Per axis, per vertex: the two neighbors along that axis (0 if absent).
    neighbors: Vec<(usize, usize)>,
    vertices: usize,
}

impl PermutohedralLattice {
    /// `features` holds `points * dim` values, point-major.
    pub fn new(features: &[f64], dim: usize) -> Self {
        assert!(dim >= 1 && features.len() % dim == 0);
        let points = features.len() / dim;
        let d1 = dim + 1;

        let inv_std = (2.0f64 / 3.0).sqrt() * d1 as f64;
        let scale: Vec<f64> = (0..dim)
            .map(|i| inv_std / (((i + 1) * (i + 2)) as f64).sqrt())
            .collect();
        let mut canonical = vec![0i32; d1 * d1];
        for i in 0..d1 {
            for j in 0..d1 - i {
                canonical[i * d1 + j] = i as i32;
            }
            for j in d1 - i..d1 {
                canonical[i * d1 + j] = i as i32 - d1 as i32;
            }
        }

        let mut table: HashMap<Vec<i32>, usize> = HashMap::new();
        let mut keys: Vec<Vec<i32>> = Vec::new();
        let mut offsets = vec![0usize; points * d1];
        let mut weights = vec![0.0; points * d1];

        let mut elevated = vec![0.0; d1];
        let mut rem0 = vec![0i32; d1];
        let mut rank = vec![0i32; d1];
        let mut bary = vec![0.0; d1 + 1];
        let mut key = vec![0i32; dim];
        let down = 1.0 / d1 as f64;

        for k in 0..points {
            let f = &features[k * dim..(k + 1) * dim];
            // Embed in the hyperplane orthogonal to (1, ..., 1).
            elevated[dim] = -(dim as f64) * f[dim - 1] * scale[dim - 1];
            for i in (1..dim).rev() {
                elevated[i] = elevated[i + 1] - i as f64 * f[i - 1] * scale[i - 1]
                    + (i + 2) as f64 * f[i] * scale[i];
            }
            elevated[0] = elevated[1] + 2.0 * f[0] * scale[0];

            // Nearest remainder-0 point.
            let mut sum = 0i32;
            for i in 0..d1 {
                let v = elevated[i] * down;
                let up = v.ceil() * d1 as f64;
                let dn = v.floor() * d1 as f64;
                rem0[i] = if up - elevated[i] < elevated[i] - dn {
                    up as i32
                } else {
                    dn as i32
                };
                sum += rem0[i];
            }
            sum /= d1 as i32;

            rank.fill(0);
            for i in 0..dim {
                let di = elevated[i] - rem0[i] as f64;
                for j in i + 1..d1 {
                    if di < elevated[j] - rem0[j] as f64 {
                        rank[i] += 1;
                    } else {
                        rank[j] += 1;
                    }
                }
            }
            if sum > 0 {
                for i in 0..d1 {
                    if rank[i] >= d1 as i32 - sum {
                        rem0[i] -= d1 as i32;
                        rank[i] += sum - d1 as i32;
                    } else {
                        rank[i] += sum;
                    }
                }
            } else if sum < 0 {
                for i in 0..d1 {
                    if rank[i] < -sum {
                        rem0[i] += d1 as i32;
                        rank[i] += d1 as i32 + sum;
                    } else {
                        rank[i] += sum;
                    }
                }
            }

            bary.fill(0.0);
            for i in 0..d1 {
                let v = (elevated[i] - rem0[i] as f64) * down;
                let r = dim - rank[i] as usize;
                bary[r] += v;
                bary[r + 1] -= v;
            }
            bary[0] += 1.0 + bary[d1];

            for r in 0..d1 {
                for i in 0..dim {
                    key[i] = rem0[i] + canonical[r * d1 + rank[i] as usize];
                }
                let idx = match table.get(&key) {
                    Some(&idx) => idx,
                    None => {
                        keys.push(key.clone());
                        table.insert(key.clone(), keys.len());
                        keys.len()
                    }
                };
                offsets[k * d1 + r] = idx;
                weights[k * d1 + r] = bary[r];
            }
        }

        let vertices = keys.len();
        let mut neighbors = vec![(0usize, 0usize); d1 * vertices];
        let mut n1 = vec![0i32; dim];
        let mut n2 = vec![0i32; dim];
        for axis in 0..d1 {
            for (v, key) in keys.iter().enumerate() {
                for i in 0..dim {
                    n1[i] = key[i] - 1;
                    n2[i] = key[i] + 1;
                }
                if axis < dim {
                    n1[axis] = key[axis] + dim as i32;
                    n2[axis] = key[axis] - dim as i32;
                }
                neighbors[axis * vertices + v] = (
                    table.get(&n1).copied().unwrap_or(0),
                    table.get(&n2).copied().unwrap_or(0),
                );
            }
        }

        PermutohedralLattice {
            dim,
            points,
            offsets,
            weights,
            neighbors,
            vertices,
        }
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Filters `channels` values per point (point-major layout).
    pub fn filter(&self, input: &[f64], channels: usize) -> Vec<f64> {
        assert_eq!(input.len(), self.points * channels);
        let d1 = self.dim + 1;
        let m = self.vertices + 1;
        let mut values = vec![0.0; m * channels];
        for k in 0..self.points {
            for r in 0..d1 {
                let o = self.offsets[k * d1 + r] * channels;
                let w = self.weights[k * d1 + r];
                for c in 0..channels {
                    values[o + c] += w * input[k * channels + c];
                }
            }
        }

        let mut scratch = vec![0.0; m * channels];
        for axis in 0..d1 {
            for v in 0..self.vertices {
                let (a, b) = self.neighbors[axis * self.vertices + v];
                let o = (v + 1) * channels;
                for c in 0..channels {
                    scratch[o + c] = values[o + c]
                        + 0.5 * (values[a * channels + c] + values[b * channels + c]);
                }
            }
            std::mem::swap(&mut values, &mut scratch);
        }

        let alpha = 1.0 / (1.0 + 2f64.powi(-(self.dim as i32)));
        let mut out = vec![0.0; self.points * channels];
        for k in 0..self.points {
            for r in 0..d1 {
                let o = self.offsets[k * d1 + r] * channels;
                let w = self.weights[k * d1 + r] * alpha;
                for c in 0..channels {
                    out[k * channels + c] += w * values[o + c];
                }
            }
        }
        out
    }
}
