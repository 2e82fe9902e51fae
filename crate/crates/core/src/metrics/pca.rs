use nalgebra::{DMatrix, SymmetricEigen};

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Mean-centred projection onto the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// N×dim coordinates.
    pub coords: Tensor,
    /// Fraction of total variance along each kept component.
    pub explained: Vec<f64>,
    /// dim×D unit loadings, each signed so its largest-magnitude entry is positive.
    pub components: Tensor,
}

pub fn pca_project(features: &Tensor, dim: usize) -> Result<Pca> {
    let (n, d) = match *features.shape() {
        [n, d] => (n, d),
        ref s => return Err(Error::invalid("pca", format!("features must be N×D, got {s:?}"))),
    };
    if dim == 0 || dim > d {
        return Err(Error::invalid("pca", format!("dim {dim} outside 1..={d}")));
    }
    if n < dim + 1 {
        return Err(Error::invalid("pca", format!("{n} samples cannot fix {dim} components")));
    }
    let x = DMatrix::from_row_slice(n, d, features.data());
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let total = cov.trace();
    if total <= 0.0 {
        return Err(Error::invalid("pca", "features have zero variance"));
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(dim * d);
    let mut explained = Vec::with_capacity(dim);
    for &k in &order[..dim] {
        let v = eig.eigenvectors.column(k);
        let lead = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        components.extend(v.iter().map(|x| sign * x));
        explained.push(eig.eigenvalues[k].max(0.0) / total);
    }
    let mut coords = vec![0.0; n * dim];
    for i in 0..n {
        for k in 0..dim {
            coords[i * dim + k] = (0..d).map(|j| centred[(i, j)] * components[k * d + j]).sum();
        }
    }
    Ok(Pca {
        coords: Tensor::new(vec![n, dim], coords)?,
        explained,
        components: Tensor::new(vec![dim, d], components)?,
    })
}
