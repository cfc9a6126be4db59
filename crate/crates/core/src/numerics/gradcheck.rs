/// Central-difference gradient `(f(x + h·eᵢ) − f(x − h·eᵢ)) / 2h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Fourth-order central difference
/// `(8(f(x+h) − f(x−h)) − (f(x+2h) − f(x−2h))) / 12h`, per coordinate.
/// Its truncation error is O(h⁴), so a larger `h` can be used, which keeps
/// cancellation error small when `f` is large and the gradient entry tiny.
pub fn finite_diff_grad_5pt<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut at = |probe: &mut Vec<f64>, i: usize, d: f64| {
        let orig = probe[i];
        probe[i] = orig + d;
        let v = f(probe);
        probe[i] = orig;
        v
    };
    (0..x.len())
        .map(|i| {
            let near = at(&mut probe, i, h) - at(&mut probe, i, -h);
            let far = at(&mut probe, i, 2.0 * h) - at(&mut probe, i, -2.0 * h);
            (8.0 * near - far) / (12.0 * h)
        })
        .collect()
}

/// `|a − b| / max(|a|, |b|, floor)`
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Prng;
    use rand::Rng;

    #[test]
    fn quadratic_is_exact() {
        let g = finite_diff_grad(|x| x[0] * x[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn five_point_is_exact_on_quartics() {
        let f = |x: &[f64]| x[0].powi(4) - 2.0 * x[0].powi(3) + x[1] * x[0];
        let g = finite_diff_grad_5pt(f, &[1.5, -0.5], 1e-2);
        assert!((g[0] - (4.0 * 1.5f64.powi(3) - 6.0 * 1.5 * 1.5 - 0.5)).abs() < 1e-9);
        assert!((g[1] - 1.5).abs() < 1e-9);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 0.5], 1e-4);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sum_of_squares_matches_analytic() {
        let mut rng = Prng::new(11);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let g = finite_diff_grad(|v| v.iter().map(|a| a * a).sum(), &x, 1e-5);
        for (gi, xi) in g.iter().zip(&x) {
            assert!((gi - 2.0 * xi).abs() < 1e-7);
        }
    }
}
