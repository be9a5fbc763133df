//! Small statistics helpers for the Monte Carlo experiments.

use libm::{erfc, log, sqrt};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson(successes: u64, trials: u64, z: f64) -> Proportion {
    if trials == 0 {
        return Proportion {
            successes,
            trials,
            estimate: 0.0,
            lower: 0.0,
            upper: 1.0,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    Proportion {
        successes,
        trials,
        estimate: p,
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
    }
}

/// Pooled two-proportion z statistic. Zero when both samples are
/// degenerate in the same way.
pub fn two_proportion_z(s1: u64, n1: u64, s2: u64, n2: u64) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let p1 = s1 as f64 / a;
    let p2 = s2 as f64 / b;
    let pooled = (s1 + s2) as f64 / (a + b);
    let var = pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b);
    if var == 0.0 {
        return 0.0;
    }
    (p1 - p2) / sqrt(var)
}

/// Two-sided p-value of a standard normal statistic.
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / core::f64::consts::SQRT_2)
}

/// Least-squares line `y = a + b x`. Returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: alloc::vec::Vec<f64> = xs.iter().map(|&x| log(x)).collect();
    let ly: alloc::vec::Vec<f64> = ys.iter().map(|&y| log(y)).collect();
    linear_fit(&lx, &ly).1
}

/// Pearson chi-square statistic of observed counts against a uniform
/// expectation.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e) * (c as f64 - e) / e).sum()
}
