//! Small numeric helpers shared across modules.

/// Correctly rounded floating-point sum (Shewchuk's exact partials).
///
/// Aggregations that feed the leaderboard use this so fold means do not
/// depend on the order or multiplicity in which runs were recorded.
pub fn fsum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    for mut x in values {
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }

    // Round the expansion to nearest, with the half-way correction.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

/// Arithmetic mean via [`fsum`]; `None` for an empty input.
pub fn fmean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(fsum(values.iter().copied()) / values.len() as f64)
    }
}

/// Population standard deviation (divides by N).
pub fn population_std(values: &[f64]) -> Option<f64> {
    let mean = fmean(values)?;
    let var = fsum(values.iter().map(|v| (v - mean) * (v - mean))) / values.len() as f64;
    Some(var.max(0.0).sqrt())
}
