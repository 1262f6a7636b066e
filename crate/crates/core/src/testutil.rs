use nalgebra::{DMatrix, DVector};

use crate::random::Sampler;

pub fn rng(seed: u64) -> Sampler {
    Sampler::new(seed)
}

pub fn uniform(r: &mut Sampler) -> f64 {
    r.uniform()
}

pub fn normal(r: &mut Sampler) -> f64 {
    r.normal()
}

pub fn random_matrix(r: &mut Sampler, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.normal())
}

pub fn random_vector(r: &mut Sampler, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.normal())
}
