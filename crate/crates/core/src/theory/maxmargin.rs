//! Hard-margin linear separation through the origin.
//!
//! For points `p_i = y_i z_i`, the unit vector maximizing `min_i w·p_i` is
//! `q/‖q‖` where `q` is the minimum-norm point of the convex hull of the
//! `p_i`, and the optimal margin is `‖q‖`. The hull point is found with
//! Wolfe's active-set algorithm.

use nalgebra::{DMatrix, DVector};

const TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combo(points: &[Vec<f64>], set: &[usize], weights: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (&i, &l) in set.iter().zip(weights) {
        for (xi, pi) in x.iter_mut().zip(&points[i]) {
            *xi += l * pi;
        }
    }
    x
}

/// Weights of the minimum-norm point of the affine hull of `set`.
fn affine_min_norm(points: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let m = set.len();
    let mut a = DMatrix::zeros(m + 1, m + 1);
    for (r, &i) in set.iter().enumerate() {
        for (c, &j) in set.iter().enumerate() {
            a[(r, c)] = dot(&points[i], &points[j]);
        }
        a[(r, m)] = 1.0;
        a[(m, r)] = 1.0;
    }
    let mut b = DVector::zeros(m + 1);
    b[m] = 1.0;
    let sol = a.lu().solve(&b)?;
    Some(sol.iter().take(m).copied().collect())
}

/// Minimum-norm point of `conv(points)` and its convex weights (indexed like
/// `points`).
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let start = (0..points.len())
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .expect("at least one point");
    let mut set = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..10 * points.len() + 100 {
        let xx = dot(&x, &x);
        let j = (0..points.len()).min_by(|&a, &b| dot(&x, &points[a]).total_cmp(&dot(&x, &points[b]))).expect("nonempty");
        if xx - dot(&x, &points[j]) <= TOL * scale || set.contains(&j) {
            break;
        }
        set.push(j);
        lambda.push(0.0);
        loop {
            let Some(mu) = affine_min_norm(points, &set) else { break };
            if mu.iter().all(|&v| v > TOL) {
                lambda = mu;
                x = combo(points, &set, &lambda);
                break;
            }
            let mut theta = 1.0f64;
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= TOL {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l += theta * (m - *l);
            }
            let keep: Vec<bool> = lambda.iter().map(|&l| l > TOL).collect();
            let mut k = 0;
            set.retain(|_| {
                k += 1;
                keep[k - 1]
            });
            lambda.retain(|&l| l > TOL);
            let total: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= total);
            x = combo(points, &set, &lambda);
        }
    }
    let mut weights = vec![0.0; points.len()];
    for (&i, &l) in set.iter().zip(&lambda) {
        weights[i] = l;
    }
    (x, weights)
}

/// Unit vector with the largest minimum of `w·p_i`, and that margin. The
/// margin is at most 0 when the points are not separable through the origin.
pub fn max_margin_direction(points: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let (q, _) = min_norm_point(points);
    let n = dot(&q, &q).sqrt();
    if n <= 1e-9 {
        return (vec![0.0; q.len()], 0.0);
    }
    let w: Vec<f64> = q.iter().map(|v| v / n).collect();
    let margin = points.iter().map(|p| dot(&w, p)).fold(f64::INFINITY, f64::min);
    (w, margin)
}

/// Best margin over unit directions on a grid: `steps` angles in 1-D and
/// 2-D, a `steps × steps/2` sphere grid in 3-D.
pub fn angle_grid_margin(points: &[Vec<f64>], steps: usize) -> (Vec<f64>, f64) {
    let d = points[0].len();
    let eval = |w: &[f64]| points.iter().map(|p| dot(w, p)).fold(f64::INFINITY, f64::min);
    let mut best = (vec![0.0; d], f64::NEG_INFINITY);
    let mut consider = |w: Vec<f64>| {
        let m = eval(&w);
        if m > best.1 {
            best = (w, m);
        }
    };
    let tau = std::f64::consts::TAU;
    match d {
        1 => {
            consider(vec![1.0]);
            consider(vec![-1.0]);
        }
        2 => (0..steps).for_each(|i| {
            let t = tau * i as f64 / steps as f64;
            consider(vec![t.cos(), t.sin()]);
        }),
        3 => {
            for i in 0..steps {
                let phi = tau * i as f64 / steps as f64;
                for j in 0..=steps / 2 {
                    let th = std::f64::consts::PI * j as f64 / (steps / 2) as f64;
                    consider(vec![th.sin() * phi.cos(), th.sin() * phi.sin(), th.cos()]);
                }
            }
        }
        _ => panic!("angle grid supports at most three dimensions"),
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_points() {
        let (w, m) = max_margin_direction(&[vec![1.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(w, vec![1.0, 0.0]);
        assert_eq!(m, 1.0);
    }

    #[test]
    fn symmetric_set_uses_the_bisector() {
        let pts = vec![vec![2.0, 1.0], vec![1.0, 2.0], vec![3.0, 3.0]];
        let (w, m) = max_margin_direction(&pts);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w[0] - r).abs() < 1e-12 && (w[1] - r).abs() < 1e-12);
        assert!((m - 3.0 * r).abs() < 1e-12);
    }

    #[test]
    fn inseparable_points_have_no_margin() {
        let (_, m) = max_margin_direction(&[vec![1.0, 0.0], vec![-1.0, 0.1], vec![0.0, -0.2]]);
        assert!(m <= 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn agrees_with_angle_grid(
            dim in 2usize..=3,
            raw in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 3..12),
            shift in proptest::collection::vec(0.2f64..1.5, 3),
        ) {
            let pts: Vec<Vec<f64>> = raw.iter().map(|p| (0..dim).map(|k| p[k] * 0.5 + shift[k]).collect()).collect();
            let (_, m) = max_margin_direction(&pts);
            let (_, g) = angle_grid_margin(&pts, if dim == 2 { 20000 } else { 1200 });
            if g > 0.0 {
                prop_assert!(m >= g - 1e-9, "solver {m} below grid {g}");
                prop_assert!(m - g < 1e-3, "solver {m} grid {g}");
            } else {
                // inseparable: no direction achieves a positive margin
                prop_assert!(m < 1e-3, "solver {m} on an inseparable set");
            }
        }
    }
}
