//! Small summary statistics over trial samples.

/// Neumaier-compensated sum; the result depends only on the input order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Population variance (divides by `n`).
pub fn pop_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    compensated_sum(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64
}

pub fn pop_std(xs: &[f64]) -> f64 {
    pop_variance(xs).sqrt()
}

/// Sample variance (divides by `n - 1`).
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    pop_variance(xs) * xs.len() as f64 / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    (sample_variance(xs) / xs.len() as f64).sqrt()
}

/// One-sided 95% normal quantile.
pub const Z95: f64 = 1.6448536269514722;

/// Lower one-sided 95% confidence bound of `mean(a - b)` for paired samples.
pub fn paired_lower_bound(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "paired samples must have equal length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean(&d) - Z95 * std_error(&d)
}

/// Lower one-sided 95% confidence bound of `mean(a) - mean(b)` for
/// independent samples (Welch standard error, normal quantile).
pub fn welch_lower_bound(a: &[f64], b: &[f64]) -> f64 {
    let se = (sample_variance(a) / a.len() as f64 + sample_variance(b) / b.len() as f64).sqrt();
    mean(a) - mean(b) - Z95 * se
}
