//! Summary statistics used by the estimators, sweeps and tests.

use alloc::vec::Vec;

/// Pairwise (cascade) summation. Error grows like O(log n) instead of O(n),
/// which matters when averaging 1e5 replicates of nearly cancelling terms.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator). NaN for fewer than two
/// points; callers surface that NaN rather than inventing a zero.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let devsq: Vec<f64> = xs.iter().map(|&x| (x - m) * (x - m)).collect();
    pairwise_sum(&devsq) / (n - 1) as f64
}

/// p-th percentile (p in [0, 100]) with linear interpolation between order
/// statistics, matching the common "linear" convention: rank = p/100 * (n-1).
pub fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut sorted: Vec<f64> = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN in percentile input"));
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Least-squares line through (xs, ys); returns (slope, intercept).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points for a line");
    let n = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    debug_assert!(sxx > 0.0 || n < 2.0);
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Total variation distance between two finite distributions on the same
/// support: 0.5 * sum |p_i - q_i|.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p
        .iter()
        .zip(q)
        .map(|(&a, &b)| libm::fabs(a - b))
        .sum::<f64>()
}

/// Two-sample Kolmogorov-Smirnov test.
///
/// Returns (D, p) where D is the sup-distance between empirical CDFs and p
/// the asymptotic significance from the Kolmogorov distribution with the
/// usual finite-sample effective-size correction. Good to a few percent for
/// samples in the hundreds and up, which is the regime the acceptance checks
/// run at (1e5 draws).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("NaN in KS input"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("NaN in KS input"));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < n && xs[i] <= x {
            i += 1;
        }
        while j < m && ys[j] <= x {
            j += 1;
        }
        let gap = libm::fabs(i as f64 / n as f64 - j as f64 / m as f64);
        if gap > d {
            d = gap;
        }
    }
    let ne = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (libm::sqrt(ne) + 0.12 + 0.11 / libm::sqrt(ne)) * d;
    (d, kolmogorov_tail(lambda))
}

/// Q_KS(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-10 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = libm::exp(-2.0 * (j as f64) * (j as f64) * lambda * lambda);
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
