//! Random positive cosine series with vanishing normal derivative.

use crate::grid::{Grid, ScalarField};
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// `phi(x) = base + sum_k a_k prod_j cos(k_j pi x_j / L_j)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunctionSpec {
    #[serde(skip)]
    pub grid: Grid,
    pub base: f64,
    /// Multi-index (inactive axes 0) and amplitude.
    pub coefficients: Vec<([usize; 3], f64)>,
    pub seed: u64,
}

/// Parameters of [`TestFunctionSpec::sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleParams {
    /// Largest frequency per axis.
    pub max_frequency: usize,
    /// `sum |a_k| = amplitude * base`, in `[0, 1)`.
    pub amplitude: f64,
    pub base: f64,
}

impl SampleParams {
    /// Frequencies up to 3 in one and two dimensions, 2 in three; amplitude 0.8.
    pub fn default_for(dim: usize) -> Self {
        Self {
            max_frequency: if dim == 3 { 2 } else { 3 },
            amplitude: 0.8,
            base: 1.0,
        }
    }
}

impl TestFunctionSpec {
    /// Draws every non-constant mode up to `max_frequency` uniformly from
    /// `[-1, 1]` and rescales to the amplitude budget.
    pub fn sample(grid: Grid, params: SampleParams, seed: u64) -> Self {
        assert!(params.max_frequency >= 1, "max_frequency must be at least 1");
        assert!(
            (0.0..1.0).contains(&params.amplitude),
            "amplitude must lie in [0, 1)"
        );
        let dim = grid.dim();
        let k = params.max_frequency;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coefficients: Vec<([usize; 3], f64)> = Vec::new();
        let total = (k + 1).pow(dim as u32);
        for flat in 1..total {
            let mut idx = [0; 3];
            let mut r = flat;
            for slot in idx.iter_mut().take(dim) {
                *slot = r % (k + 1);
                r /= k + 1;
            }
            coefficients.push((idx, rng.gen_range(-1.0f64..=1.0)));
        }
        let l1: f64 = coefficients.iter().map(|(_, a)| a.abs()).sum();
        let scale = if l1 > 0.0 {
            params.amplitude * params.base / l1
        } else {
            0.0
        };
        for (_, a) in &mut coefficients {
            *a *= scale;
        }
        Self {
            grid,
            base: params.base,
            coefficients,
            seed,
        }
    }

    /// Same function on another grid over the same box.
    pub fn on_grid(&self, grid: Grid) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let l = self.grid.lengths();
        self.base
            + self
                .coefficients
                .iter()
                .map(|(k, a)| {
                    a * (0..self.grid.dim())
                        .map(|j| (k[j] as f64 * PI * x[j] / l[j]).cos())
                        .product::<f64>()
                })
                .sum::<f64>()
    }

    /// Cell samples, from per-axis cosine tables.
    pub fn field(&self) -> ScalarField {
        let g = self.grid;
        let dim = g.dim();
        let kmax = self
            .coefficients
            .iter()
            .flat_map(|(k, _)| k.iter().copied())
            .max()
            .unwrap_or(0);
        // tables[axis][k * n_axis + i] = cos(k pi x_i / L)
        let tables: Vec<Vec<f64>> = (0..dim)
            .map(|axis| {
                let n = g.cells()[axis];
                let (h, l) = (g.spacing()[axis], g.lengths()[axis]);
                (0..=kmax)
                    .flat_map(|k| {
                        (0..n).map(move |i| (k as f64 * PI * (i as f64 + 0.5) * h / l).cos())
                    })
                    .collect()
            })
            .collect();
        let coeffs = &self.coefficients;
        let values = par::map_indexed(g.len(), |i| {
            let c = g.unravel(i);
            let mut s = self.base;
            for (k, a) in coeffs {
                let mut p = *a;
                for axis in 0..dim {
                    p *= tables[axis][k[axis] * g.cells()[axis] + c[axis]];
                }
                s += p;
            }
            s
        });
        ScalarField::new(g, values).expect("cosine series is finite")
    }
}
