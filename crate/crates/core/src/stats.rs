//! Small fitting helpers.

/// Least-squares slope of y against x.
pub fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    ls_line(pts).0
}

/// Least-squares (slope, intercept).
pub fn ls_line(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Coefficient b of the least-squares fit y = a + b x + c log x (x > 0).
/// Strips a power-law prefactor from an exponential rate.
pub fn ls_rate_with_power(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 3 {
        return f64::NAN;
    }
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(x, y) in pts {
        let f = [1.0, x, x.ln()];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += f[i] * f[j];
            }
            r[i] += f[i] * y;
        }
    }
    let det = |a: &[[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(&m);
    let mut mb = m;
    for i in 0..3 {
        mb[i][1] = r[i];
    }
    det(&mb) / d
}

#[cfg(test)]
mod tests {
    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 3.0 * i as f64 - 1.0)).collect();
        let (m, c) = super::ls_line(&pts);
        assert!((m - 3.0).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
    }

    #[test]
    fn rate_ignores_power_prefactor() {
        let pts: Vec<(f64, f64)> = (3..20).map(|n| (n as f64, 0.7 - 0.4 * n as f64 - 1.5 * (n as f64).ln())).collect();
        assert!((super::ls_rate_with_power(&pts) + 0.4).abs() < 1e-9);
    }
}
