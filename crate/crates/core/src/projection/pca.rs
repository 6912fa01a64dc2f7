use rand::Rng;

use super::{Projection2D, ProjectionError, ProjectionMethod};
use crate::rng::seeded;

const TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
    }
}

/// Sign convention: the largest-magnitude entry is positive.
fn fix_sign(v: &mut [f64]) {
    let big = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Centered data and the sample covariance (n - 1 denominator).
pub(crate) fn center_and_cov(features: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = features.len();
    let d = features[0].len();
    let mut mean = vec![0.0; d];
    for x in features {
        mean.iter_mut().zip(x).for_each(|(m, v)| *m += v / n as f64);
    }
    let centered: Vec<Vec<f64>> = features
        .iter()
        .map(|x| x.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for x in &centered {
        for a in 0..d {
            for b in a..d {
                cov[a][b] += x[a] * x[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            cov[a][b] /= (n - 1) as f64;
            cov[b][a] = cov[a][b];
        }
    }
    (centered, cov)
}

/// Leading `k` eigenpairs of a symmetric PSD matrix by power iteration with deflation.
pub fn top_eigenpairs(matrix: &[Vec<f64>], k: usize) -> Vec<(f64, Vec<f64>)> {
    let d = matrix.len();
    let mut m: Vec<Vec<f64>> = matrix.to_vec();
    let mut rng = seeded(0x5eed);
    let mut found: Vec<Vec<f64>> = vec![];
    let mut out = vec![];
    for _ in 0..k.min(d) {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &found);
        normalize(&mut v);
        for _ in 0..MAX_ITERS {
            let mut next = mat_vec(&m, &v);
            orthogonalize(&mut next, &found);
            if normalize(&mut next) == 0.0 {
                break;
            }
            if dot(&next, &v) < 0.0 {
                next.iter_mut().for_each(|x| *x = -*x);
            }
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = next;
            if delta < TOL {
                break;
            }
        }
        fix_sign(&mut v);
        let lambda = dot(&v, &mat_vec(&m, &v)).max(0.0);
        for a in 0..d {
            for b in 0..d {
                m[a][b] -= lambda * v[a] * v[b];
            }
        }
        found.push(v.clone());
        out.push((lambda, v));
    }
    out
}

pub fn pca_project(ids: &[String], features: &[Vec<f64>]) -> Result<Projection2D, ProjectionError> {
    super::check_input(ids, features, 3)?;
    if features[0].len() < 2 {
        return Err(ProjectionError::DegenerateData);
    }
    let (centered, cov) = center_and_cov(features);
    let pairs = top_eigenpairs(&cov, 2);
    if !(pairs[0].0 > 0.0) {
        return Err(ProjectionError::DegenerateData);
    }
    let points = centered
        .iter()
        .map(|x| [dot(x, &pairs[0].1), dot(x, &pairs[1].1)])
        .collect();
    Ok(Projection2D {
        ids: ids.to_vec(),
        points,
        method: ProjectionMethod::Pca,
        final_kl: None,
    })
}
