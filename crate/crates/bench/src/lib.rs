//! Seeded fixtures shared by the benchmarks under `benches/`.

use editbench_core::alignment::{FitProblem, GroupTerms, TermPart};
use editbench_core::model::Criterion;
use editbench_core::Raster;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn paired(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
    let y = x.iter().map(|v| v + r.random_range(-0.5..0.5)).collect();
    (x, y)
}

pub fn gaussian(d: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
    let mut r = rng(seed);
    let a = DMatrix::from_fn(d, 2 * d, |_, _| r.random_range(-1.0..1.0));
    let mu = DVector::from_fn(d, |_, _| r.random_range(-1.0..1.0));
    (mu, &a * a.transpose() / (2 * d) as f64)
}

/// Blocky test image with soft gradients, so Canny has real work to do.
pub fn scene(width: u32, height: u32, seed: u64) -> Raster {
    let mut r = rng(seed);
    let blocks: Vec<(u32, u32, u32, [f32; 3])> = (0..12)
        .map(|_| {
            (
                r.random_range(0..width),
                r.random_range(0..height),
                r.random_range(8..width / 3),
                [r.random_range(0.0..1.0), r.random_range(0.0..1.0), r.random_range(0.0..1.0)],
            )
        })
        .collect();
    Raster::from_fn(width, height, |x, y| {
        let base = 0.3 + 0.4 * (x as f32 / width as f32);
        let mut c = [base; 3];
        for (bx, by, s, col) in &blocks {
            if x.abs_diff(*bx) < *s && y.abs_diff(*by) < *s {
                c = *col;
            }
        }
        c
    })
}

/// Dense weight-fitting instance: `questions` pairs over `models` models,
/// each side scoring `Σ w_k v_k`.
pub fn dense_problem(dim: usize, models: usize, questions: usize, seed: u64) -> FitProblem {
    let mut r = rng(seed);
    let side = |r: &mut ChaCha8Rng| GroupTerms {
        offset: 0.0,
        parts: vec![TermPart {
            coef: 1.0,
            terms: (0..dim).map(|k| (k, r.random_range(0.0..1.0))).collect(),
        }],
    };
    let pairs = (0..questions)
        .map(|k| {
            let a = k % models;
            let b = (a + 1 + r.random_range(0..models - 1)) % models;
            let (ta, tb) = (side(&mut r), side(&mut r));
            (format!("m{a}"), ta, format!("m{b}"), tb, r.random_bool(0.5))
        })
        .collect();
    FitProblem::from_pairs(Criterion::OC, dim, pairs).expect("valid instance")
}
