/// Central-difference gradient `(L(p + eps e_i) - L(p - eps e_i)) / (2 eps)`.
pub fn fd_gradient_oracle<F: FnMut(&[f64]) -> f64>(mut loss: F, params: &[f64], eps: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + eps;
            let plus = loss(&p);
            p[i] = orig - eps;
            let minus = loss(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

pub const FD_EPS: f64 = 1e-5;

/// Largest `|a - b|` over the largest `|b|` (or 1 if every `|b|` is below 1e-12).
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}
