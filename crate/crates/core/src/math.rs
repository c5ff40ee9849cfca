use crate::scalar::Scalar;

/// `Pr[X_1 + ... + X_n >= k]` for independent `X_i ~ Bernoulli(p_i)`, by
/// the exact O(n^2) dynamic program over the count distribution.
pub fn poisson_binomial_at_least<S: Scalar>(probs: &[S], k: usize) -> S {
    if k == 0 {
        return S::one();
    }
    if k > probs.len() {
        return S::zero();
    }
    // dist[j] = Pr[exactly j successes so far]
    let mut dist = vec![S::zero(); probs.len() + 1];
    dist[0] = S::one();
    for (i, &p) in probs.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            dist[j] = dist[j] * (S::one() - p) + dist[j - 1] * p;
        }
        dist[0] = dist[0] * (S::one() - p);
    }
    dist[k..].iter().copied().sum()
}

/// Binomial coefficient as a scalar (small arguments only).
pub fn binomial<S: Scalar>(n: usize, k: usize) -> S {
    if k > n {
        return S::zero();
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    S::count(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force(probs: &[f64], k: usize) -> f64 {
        let n = probs.len();
        (0u32..1 << n)
            .filter(|mask| mask.count_ones() as usize >= k)
            .map(|mask| {
                (0..n)
                    .map(|i| if mask & (1 << i) != 0 { probs[i] } else { 1.0 - probs[i] })
                    .product::<f64>()
            })
            .sum()
    }

    #[test]
    fn matches_enumeration() {
        let probs: [f64; 3] = [0.9, 0.9, 0.9];
        assert!((poisson_binomial_at_least(&probs, 2) - 0.972f64).abs() < 1e-15);
        let mixed: [f64; 5] = [0.3, 0.95, 0.5, 0.71, 0.02];
        for k in 0..=6 {
            assert!((poisson_binomial_at_least(&mixed, k) - brute_force(&mixed, k)).abs() < 1e-14);
        }
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial::<f64>(5, 2), 10.0);
        assert_eq!(binomial::<f64>(8, 0), 1.0);
        assert_eq!(binomial::<f64>(3, 4), 0.0);
    }
}
