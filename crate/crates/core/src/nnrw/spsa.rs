use rand::Rng;
use rand_distr::StandardNormal;

/// Symmetric zeroth-order gradient estimate
/// `1/(2 q sigma^2) * sum_i (L(w + d_i) - L(w - d_i)) d_i`, `d_i ~ N(0, sigma^2 I)`.
pub fn spsa_gradient(
    mut loss: impl FnMut(&[f64]) -> f64,
    w: &[f64],
    q: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    assert!(q >= 1 && sigma > 0.0, "spsa needs q >= 1 and sigma > 0");
    let n = w.len();
    let mut grad = vec![0.0; n];
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    let mut delta = vec![0.0; n];
    for _ in 0..q {
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            delta[i] = sigma * z;
            plus[i] = w[i] + delta[i];
            minus[i] = w[i] - delta[i];
        }
        let diff = loss(&plus) - loss(&minus);
        if diff != 0.0 {
            for i in 0..n {
                grad[i] += diff * delta[i];
            }
        }
    }
    let norm = 1.0 / (2.0 * q as f64 * sigma * sigma);
    grad.iter_mut().for_each(|g| *g *= norm);
    grad
}
