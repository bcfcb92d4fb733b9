use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};

/// Eigenvalues at or below this fraction of the largest count as zero.
const RANK_REL_TOL: f64 = 1e-10;

/// Principal axes fitted by exact eigendecomposition of the sample covariance.
///
/// Components are ordered by descending eigenvalue. Each component is signed
/// so that its entry of largest magnitude (first such index on ties) is
/// nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaFit {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    pub coords: [f64; 2],
    pub source_text: String,
}

impl PcaFit {
    pub fn fit(vectors: &[EmbeddingVector], k: usize) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::input(format!("PCA needs >= 2 vectors, got {}", vectors.len())));
        }
        let dim = vectors[0].dim();
        if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
            return Err(Error::input(format!("mixed dims {} and {}", dim, v.dim())));
        }
        if k == 0 || dim < k {
            return Err(Error::input(format!("cannot project dim {dim} onto {k} components")));
        }
        let n = vectors.len();
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v.values()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        let centered = DMatrix::from_fn(n, dim, |i, j| vectors[i].values()[j] - mean[j]);
        let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let top = eig.eigenvalues[order[0]].max(0.0);
        let rank = order
            .iter()
            .filter(|&&i| eig.eigenvalues[i] > RANK_REL_TOL * top && eig.eigenvalues[i] > 0.0)
            .count();
        if rank < k {
            return Err(Error::DegenerateRank { rank, requested: k });
        }

        let components = order[..k]
            .iter()
            .map(|&i| {
                let mut c: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
                let mut lead = 0;
                for (j, x) in c.iter().enumerate() {
                    if x.abs() > c[lead].abs() {
                        lead = j;
                    }
                }
                if c[lead] < 0.0 {
                    c.iter_mut().for_each(|x| *x = -*x);
                }
                c
            })
            .collect();
        let eigenvalues = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
        Ok(Self { mean, components, eigenvalues })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn project(&self, v: &EmbeddingVector) -> Result<Vec<f64>> {
        if v.dim() != self.dim() {
            return Err(Error::input(format!("vector dim {} != fitted dim {}", v.dim(), self.dim())));
        }
        let x = DVector::from_iterator(v.dim(), v.values().iter().zip(&self.mean).map(|(a, m)| a - m));
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
            .collect())
    }
}

/// Fit a 2D plane jointly over `points` and project each of them, in input order.
pub fn pca_project(points: &[(String, EmbeddingVector)]) -> Result<Vec<ProjectedPoint>> {
    let vectors: Vec<EmbeddingVector> = points.iter().map(|(_, v)| v.clone()).collect();
    let fit = PcaFit::fit(&vectors, 2)?;
    points
        .iter()
        .map(|(text, v)| {
            let p = fit.project(v)?;
            Ok(ProjectedPoint { coords: [p[0], p[1]], source_text: text.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(v: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_points_single_direction() {
        let vs = [ev(&[0.0, 0.0, 0.0]), ev(&[2.0, 0.0, 0.0])];
        let fit = PcaFit::fit(&vs, 1).unwrap();
        assert_eq!(fit.project(&vs[0]).unwrap(), vec![-1.0]);
        assert_eq!(fit.project(&vs[1]).unwrap(), vec![1.0]);
        assert!(matches!(
            PcaFit::fit(&vs, 2),
            Err(Error::DegenerateRank { rank: 1, requested: 2 })
        ));
    }

    #[test]
    fn rejects_too_few_vectors() {
        assert!(matches!(PcaFit::fit(&[ev(&[1.0, 2.0])], 2), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn projections_are_centered_and_ordered() {
        let vs = [
            ev(&[1.0, 2.0, 0.5]),
            ev(&[-1.0, 0.3, 2.0]),
            ev(&[0.2, -3.0, 1.0]),
            ev(&[4.0, 1.0, -1.0]),
        ];
        let fit = PcaFit::fit(&vs, 2).unwrap();
        let proj: Vec<_> = vs.iter().map(|v| fit.project(v).unwrap()).collect();
        for c in 0..2 {
            let m: f64 = proj.iter().map(|p| p[c]).sum::<f64>() / 4.0;
            assert!(m.abs() < 1e-10);
        }
        let var = |c: usize| proj.iter().map(|p| p[c] * p[c]).sum::<f64>();
        assert!(var(0) >= var(1));
        assert!(fit.eigenvalues[0] >= fit.eigenvalues[1]);
    }
}
