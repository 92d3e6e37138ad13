//! Poisson tail sums used as truncation bounds.
//!
//! All sums are taken term by term from the cutoff upward until the ratio of
//! consecutive terms drops below one half, then closed with a geometric bound
//! on the remainder. Ratios `((k+1)/k)^p · λ/(k+1)` are decreasing once past
//! the mode, so the geometric remainder is a genuine upper bound.

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

pub fn poisson_pmf(mean: f64, k: usize) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mean + k as f64 * mean.ln() - ln_factorial(k)).exp()
}

/// Upper bound on `E[N^power ; N > cutoff]` for `N ~ Poisson(mean)`.
pub fn tail_moment(mean: f64, cutoff: usize, power: u32) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let mut k = cutoff + 1;
    let mut pmf = poisson_pmf(mean, k);
    let mut total = 0.0;
    loop {
        let term = pmf * (k as f64).powi(power as i32);
        total += term;
        let ratio = ((k + 1) as f64 / k as f64).powi(power as i32) * mean / (k + 1) as f64;
        if ratio < 0.5 && (term <= total * 1e-17 || term < 1e-300) {
            return total + term * ratio / (1.0 - ratio);
        }
        pmf *= mean / (k + 1) as f64;
        k += 1;
        if k > cutoff + 100_000 {
            return f64::INFINITY;
        }
    }
}

/// `P(N > cutoff)`.
pub fn upper_tail(mean: f64, cutoff: usize) -> f64 {
    tail_moment(mean, cutoff, 0)
}

/// `P(N >= k)`, with `P(N >= 0) = 1`.
pub fn tail_at_least(mean: f64, k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        upper_tail(mean, k - 1)
    }
}

/// `E[N^power ; N >= k]`.
pub fn moment_at_least(mean: f64, k: usize, power: u32) -> f64 {
    if k == 0 {
        let full = match power {
            0 => 1.0,
            1 => mean,
            2 => mean + mean * mean,
            _ => return f64::INFINITY,
        };
        return full;
    }
    tail_moment(mean, k - 1, power)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_matches_direct_sum() {
        let mean = 2.0;
        for cutoff in [0usize, 3, 8, 14] {
            let direct: f64 = (cutoff + 1..200).map(|k| poisson_pmf(mean, k)).sum();
            let got = upper_tail(mean, cutoff);
            assert!(got >= direct * (1.0 - 1e-12));
            assert!((got - direct).abs() <= 1e-12 * direct.max(1e-300) + 1e-300, "{got} vs {direct}");
        }
    }

    #[test]
    fn tail_moments_match_direct_sum() {
        let mean = 3.5;
        for power in 0..3u32 {
            let direct: f64 = (7..300).map(|k| poisson_pmf(mean, k) * (k as f64).powi(power as i32)).sum();
            let got = tail_moment(mean, 6, power);
            assert!((got - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn complement_is_consistent() {
        let mean = 2.0;
        let head: f64 = (0..=12).map(|k| poisson_pmf(mean, k)).sum();
        assert!((head + upper_tail(mean, 12) - 1.0).abs() < 1e-14);
    }
}
