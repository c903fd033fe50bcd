//! Vertex component analysis.
//!
//! Pixels are projected onto a `P`-dimensional signal subspace found by SVD,
//! then `P` times a random direction orthogonal to the vertices found so far
//! is drawn, and the pixel with the largest absolute projection onto it
//! becomes the next vertex.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{FuvarError, Result};
use crate::types::EndmemberMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct VcaResult {
    pub endmembers: EndmemberMatrix,
    pub selected_pixel_indices: Vec<usize>,
    pub projection_dim: usize,
}

/// Leading `k` left singular vectors of `data` (via the `L x L` Gram matrix).
fn leading_subspace(data: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>) {
    let gram = data * data.transpose() / data.ncols() as f64;
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let basis = DMatrix::from_fn(data.nrows(), k, |i, j| eig.eigenvectors[(i, order[j])]);
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    (basis, values)
}

/// VCA's SNR estimate from the mean-removed `p`-dimensional projection.
fn estimate_snr_db(data: &DMatrix<f64>, mean: &DVector<f64>, projected: &DMatrix<f64>) -> f64 {
    let (l, n) = (data.nrows() as f64, data.ncols() as f64);
    let p = projected.nrows() as f64;
    let p_y = data.norm_squared() / n;
    let p_x = projected.norm_squared() / n + mean.norm_squared();
    10.0 * ((p_x - p / l * p_y) / (p_y - p_x)).log10()
}

/// Extracts `p` endmembers from the columns of `data` (`L x N`).
pub fn vca_extract(data: &DMatrix<f64>, p: usize, seed: u64) -> Result<VcaResult> {
    let (l, n) = data.shape();
    if p == 0 || n <= p || p >= l {
        return Err(FuvarError::InvalidParameter(format!(
            "VCA needs 0 < P < L and N > P, got P={p}, L={l}, N={n}"
        )));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(FuvarError::NonFinite("VCA input".into()));
    }

    let (_, sv2) = leading_subspace(data, p);
    if sv2[0] == 0.0 || sv2[p - 1] <= sv2[0] * 1e-13 {
        return Err(FuvarError::RankDeficient(format!(
            "data rank is below P={p}; try a smaller endmember count"
        )));
    }

    let mean = data.column_mean();
    let centered = DMatrix::from_fn(l, n, |i, j| data[(i, j)] - mean[i]);
    let (centered_basis, _) = leading_subspace(&centered, p);
    let centered_proj = centered_basis.transpose() * &centered;
    let snr = estimate_snr_db(data, &mean, &centered_proj);
    let snr_threshold = 15.0 + 10.0 * (p as f64).log10();

    // `y` holds the points in which vertices are searched, one per column.
    let (y, projection_dim) = if snr.is_nan() || snr < snr_threshold {
        let d = p - 1;
        let x = centered_proj.rows(0, d).into_owned();
        let c = x.column_iter().map(|col| col.norm()).fold(0.0, f64::max);
        let mut y = DMatrix::from_element(p, n, c);
        y.rows_mut(0, d).copy_from(&x);
        (y, d)
    } else {
        let (basis, _) = leading_subspace(data, p);
        let x = basis.transpose() * data;
        let u = x.column_mean();
        let mut y = x.clone();
        for (j, mut col) in y.column_iter_mut().enumerate() {
            let s = x.column(j).dot(&u);
            if s.abs() > f64::MIN_POSITIVE {
                col /= s;
            }
        }
        (y, p)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vertices: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut selected = Vec::with_capacity(p);
    let mut seed_vertex = DVector::zeros(p);
    seed_vertex[p - 1] = 1.0;

    for _ in 0..p {
        // Orthonormal basis of the current vertex span.
        let spanning: Vec<&DVector<f64>> = if vertices.is_empty() {
            vec![&seed_vertex]
        } else {
            vertices.iter().collect()
        };
        let mut ortho: Vec<DVector<f64>> = Vec::new();
        for v in spanning {
            let mut q = v.clone();
            for b in &ortho {
                q -= b * b.dot(&q);
            }
            let norm = q.norm();
            if norm > 1e-12 * v.norm().max(1e-300) {
                ortho.push(q / norm);
            }
        }

        let mut direction = DVector::zeros(p);
        for _attempt in 0..100 {
            let w = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
            let mut f = w.clone();
            for b in &ortho {
                f -= b * b.dot(&w);
            }
            let norm = f.norm();
            if norm > 1e-10 {
                direction = f / norm;
                break;
            }
        }
        if direction.norm() == 0.0 {
            return Err(FuvarError::Numerical("VCA could not draw an orthogonal direction".into()));
        }

        let projections = direction.transpose() * &y;
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (j, v) in projections.iter().enumerate() {
            if v.abs() > best_val {
                best_val = v.abs();
                best = j;
            }
        }
        if selected.contains(&best) {
            return Err(FuvarError::RankDeficient(format!(
                "VCA selected pixel {best} twice; the data has fewer than P={p} distinct vertices"
            )));
        }
        selected.push(best);
        vertices.push(y.column(best).into_owned());
    }

    // Endmembers are the selected pixels themselves. Noise can push
    // near-zero reflectances slightly negative; those are clipped.
    let m = DMatrix::from_fn(l, p, |i, j| data[(i, selected[j])].max(0.0));
    Ok(VcaResult {
        endmembers: EndmemberMatrix::new(m)?,
        selected_pixel_indices: selected,
        projection_dim,
    })
}
