use super::{PairSet, RankError};

/// Upper bound on `|O| + |S|` accepted by [`train_exact`].
pub const EXACT_GUARD: usize = 10_000;
const EXACT_MAX_ITERS: usize = 200_000;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dim(w: &[f64], pairs: &PairSet) -> Result<(), RankError> {
    if w.len() != pairs.dim() {
        return Err(RankError::DimMismatch {
            expected: pairs.dim(),
            got: w.len(),
        });
    }
    Ok(())
}

/// `J(w) = (lambda/2)|w|^2 + mean_O max(0, 1 - w.d)^2 + (mu_s/max(|S|,1)) sum_S (w.d)^2`.
pub fn objective(w: &[f64], pairs: &PairSet, lambda: f64, mu_s: f64) -> Result<f64, RankError> {
    check_dim(w, pairs)?;
    Ok(value_and_gradient(w, pairs, lambda, mu_s).0)
}

pub fn gradient(w: &[f64], pairs: &PairSet, lambda: f64, mu_s: f64) -> Result<Vec<f64>, RankError> {
    check_dim(w, pairs)?;
    Ok(value_and_gradient(w, pairs, lambda, mu_s).1)
}

fn value_and_gradient(w: &[f64], pairs: &PairSet, lambda: f64, mu_s: f64) -> (f64, Vec<f64>) {
    let mut value = 0.5 * lambda * dot(w, w);
    let mut grad: Vec<f64> = w.iter().map(|v| lambda * v).collect();
    let mut add = |d: &[f64], coef: f64| {
        for (g, x) in grad.iter_mut().zip(d) {
            *g += coef * x;
        }
    };
    if !pairs.ordered.is_empty() {
        let inv = 1.0 / pairs.ordered.len() as f64;
        for &p in &pairs.ordered {
            let d = pairs.diff(p);
            let slack = (1.0 - dot(w, &d)).max(0.0);
            value += inv * slack * slack;
            add(&d, -2.0 * inv * slack);
        }
    }
    let coef = mu_s / pairs.similar.len().max(1) as f64;
    for &p in &pairs.similar {
        let d = pairs.diff(p);
        let s = dot(w, &d);
        value += coef * s * s;
        add(&d, 2.0 * coef * s);
    }
    (value, grad)
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Reference minimizer: full-batch gradient descent, Barzilai-Borwein trial step
/// with Armijo backtracking, stopped at `|grad J| < tol`.
pub fn train_exact(pairs: &PairSet, lambda: f64, mu_s: f64, tol: f64) -> Result<Vec<f64>, RankError> {
    if !(lambda > 0.0 && lambda.is_finite()) || !(mu_s >= 0.0) || !(tol > 0.0) {
        return Err(RankError::InvalidConfig("need lambda > 0, mu_s >= 0, tol > 0".into()));
    }
    if pairs.n_constraints() > EXACT_GUARD {
        return Err(RankError::GuardExceeded {
            constraints: pairs.n_constraints(),
            limit: EXACT_GUARD,
        });
    }
    let mut w = vec![0.0; pairs.dim()];
    let (mut f, mut g) = value_and_gradient(&w, pairs, lambda, mu_s);
    let mut step = 1.0;
    for _ in 0..EXACT_MAX_ITERS {
        let gn = norm(&g);
        if gn < tol {
            return Ok(w);
        }
        let mut t = step;
        let (w_new, f_new, g_new) = loop {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let (fc, gc) = value_and_gradient(&cand, pairs, lambda, mu_s);
            // the slack term absorbs rounding once the decrease drops below f's resolution
            let slack = 1e-14 * f.abs().max(1.0);
            if fc <= f - 1e-4 * t * gn * gn + slack || t < 1e-20 {
                break (cand, fc, gc);
            }
            t *= 0.5;
        };
        let s: Vec<f64> = w_new.iter().zip(&w).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 { dot(&s, &s) / sy } else { 1.0 / lambda };
        if !f_new.is_finite() {
            return Err(RankError::NonFinite);
        }
        if s.iter().all(|&v| v == 0.0) {
            // no representable progress left
            break;
        }
        w = w_new;
        f = f_new;
        g = g_new;
    }
    let gn = norm(&g);
    if gn < tol {
        Ok(w)
    } else {
        Err(RankError::NotConverged { grad_norm: gn, tol })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label::{self, Recorded as R, Synthetic as S};
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    /// Literal transcription of the objective, written independently of `value_and_gradient`.
    fn brute_objective(
        w: &[f64],
        x: &[Vec<f64>],
        o: &[(usize, usize)],
        s: &[(usize, usize)],
        lambda: f64,
        mu_s: f64,
    ) -> f64 {
        let r = |v: &Vec<f64>| -> f64 { (0..w.len()).map(|k| w[k] * v[k]).sum() };
        let mut reg = 0.0;
        for v in w {
            reg += v * v;
        }
        let mut hinge = 0.0;
        for &(i, j) in o {
            let m = r(&x[i]) - r(&x[j]);
            if m < 1.0 {
                hinge += (1.0 - m) * (1.0 - m);
            }
        }
        let mut sim = 0.0;
        for &(i, j) in s {
            sim += (r(&x[i]) - r(&x[j])).powi(2);
        }
        lambda / 2.0 * reg + hinge / o.len() as f64 + mu_s / (s.len().max(1) as f64) * sim
    }

    pub(crate) fn random_instance(seed: u64) -> PairSet {
        let mut rng = seeded(seed);
        let d = rng.random_range(2..=8);
        let n_rec = rng.random_range(2..=6);
        let n_syn = rng.random_range(2..=6);
        let labels: Vec<Label> = (0..n_rec + n_syn).map(|i| if i < n_rec { R } else { S }).collect();
        let features: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| {
                let shift = if *l == R { 0.5 } else { -0.5 };
                (0..d)
                    .map(|k| rng.random_range(-1.0..1.0) + if k == 0 { shift } else { 0.0 })
                    .collect()
            })
            .collect();
        let mut ordered = vec![];
        for i in 0..n_rec {
            for j in n_rec..n_rec + n_syn {
                ordered.push((i, j));
            }
        }
        ordered.truncate(30);
        let similar = vec![(0, 1), (n_rec, n_rec + 1)];
        PairSet::new(features, labels, ordered, similar).unwrap()
    }

    #[test]
    fn zero_weights_give_one() {
        let p = random_instance(1);
        assert!((objective(&vec![0.0; p.dim()], &p, 0.3, 0.1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn separating_weights_leave_only_regularizer() {
        let f = vec![vec![3.0, 0.0], vec![0.0, 1.0], vec![-2.0, 5.0]];
        let p = PairSet::new(f, vec![R, S, S], vec![(0, 1), (0, 2)], vec![]).unwrap();
        let w = [1.0, 0.0];
        assert!((objective(&w, &p, 0.2, 0.5).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn matches_brute_force() {
        for seed in 0..10 {
            let p = random_instance(seed);
            let mut rng = seeded(100 + seed);
            let w: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let fast = objective(&w, &p, 0.05, 0.3).unwrap();
            let slow = brute_objective(&w, &p.features, &p.ordered, &p.similar, 0.05, 0.3);
            assert!((fast - slow).abs() < 1e-12, "{fast} {slow}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = random_instance(3);
        let w: Vec<f64> = (0..p.dim()).map(|k| 0.1 * k as f64 - 0.2).collect();
        let g = gradient(&w, &p, 0.1, 0.2).unwrap();
        let h = 1e-6;
        for k in 0..w.len() {
            let mut a = w.clone();
            a[k] += h;
            let mut b = w.clone();
            b[k] -= h;
            let fd = (objective(&a, &p, 0.1, 0.2).unwrap() - objective(&b, &p, 0.1, 0.2).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-6);
        }
    }

    #[test]
    fn single_pair_closed_form() {
        let p = PairSet::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![R, S], vec![(0, 1)], vec![]).unwrap();
        let w = train_exact(&p, 1.0, 0.0, 1e-10).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-9);
        assert!(w[1].abs() < 1e-12);
    }

    #[test]
    fn heavy_regularization_shrinks() {
        let p = random_instance(4);
        let norms: Vec<f64> = [0.1, 10.0, 1000.0]
            .iter()
            .map(|&l| norm(&train_exact(&p, l, 0.1, 1e-9).unwrap()))
            .collect();
        assert!(norms[0] > norms[1] && norms[1] > norms[2]);
        assert!(norms[2] < 1e-2);
    }

    #[test]
    fn exact_reaches_tolerance() {
        for seed in 0..5 {
            let p = random_instance(seed);
            let w = train_exact(&p, 1e-3, 0.1, 1e-8).unwrap();
            assert!(norm(&gradient(&w, &p, 1e-3, 0.1).unwrap()) < 1e-8);
        }
    }

    #[test]
    fn guard() {
        let n = 201;
        let labels: Vec<Label> = (0..n).map(|i| if i < 101 { R } else { S }).collect();
        let feats = vec![vec![0.0]; n];
        let ordered: Vec<(usize, usize)> = (0..101).flat_map(|i| (101..n).map(move |j| (i, j))).collect();
        let p = PairSet::new(feats, labels, ordered, vec![]).unwrap();
        assert!(matches!(
            train_exact(&p, 1.0, 0.0, 1e-8),
            Err(RankError::GuardExceeded { .. })
        ));
    }

    proptest! {
        #[test]
        fn convex_along_segments(seed in 0u64..200, theta in 0.01f64..0.99) {
            let p = random_instance(seed);
            let mut rng = seeded(seed + 1000);
            let w1: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let w2: Vec<f64> = (0..p.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| theta * a + (1.0 - theta) * b).collect();
            let j = |w: &[f64]| objective(w, &p, 0.01, 0.1).unwrap();
            prop_assert!(j(&mix) <= theta * j(&w1) + (1.0 - theta) * j(&w2) + 1e-9);
        }

        #[test]
        fn objective_nonnegative(seed in 0u64..200, scale in 0.0f64..10.0) {
            let p = random_instance(seed);
            let w: Vec<f64> = (0..p.dim()).map(|k| scale * ((k as f64) - 2.0)).collect();
            prop_assert!(objective(&w, &p, 0.01, 0.1).unwrap() >= 0.0);
        }
    }
}
