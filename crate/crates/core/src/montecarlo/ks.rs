use crate::error::{Error, Result};

/// Two-sample Kolmogorov–Smirnov distance `sup_x |F̂_a(x) − F̂_b(x)|`.
///
/// Both empirical CDFs are advanced past every copy of a tied value before
/// they are compared. NaN inputs are rejected.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("two-sample KS needs two nonempty samples"));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::invalid("two-sample KS input contains NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    Ok(ks_sorted(&a, &b))
}

/// KS distance of two samples already sorted ascending.
pub fn ks_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic critical value `c(α) √((m + n)/(m n))` of the two-sample
/// statistic, with `c(α) = √(−ln(α/2)/2)`.
pub fn ks_critical_value(m: usize, n: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (m, n) = (m as f64, n as f64);
    c * ((m + n) / (m * n)).sqrt()
}
