/// Bisection on a bracket `[lo, hi]` whose endpoint values `f_lo`, `f_hi` differ in sign.
/// Stops when the bracket is narrower than `tol` or cannot be split further.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, mut f_lo: f64, tol: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if hi - lo < tol || mid <= lo || mid >= hi {
            return mid;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
}

/// Every root bracketed by a sign change between consecutive points of `mesh`
/// (strictly increasing), refined by bisection to `tol`. Mesh points where `f`
/// vanishes exactly are reported as roots. Tangent zeros are not detected.
pub fn find_roots_on_mesh(f: impl Fn(f64) -> f64, mesh: &[f64], tol: f64) -> Vec<f64> {
    let values: Vec<f64> = mesh.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if v == 0.0 {
            roots.push(mesh[i]);
            continue;
        }
        if let Some(&next) = values.get(i + 1) {
            if next != 0.0 && (v < 0.0) != (next < 0.0) {
                roots.push(bisect(&f, mesh[i], mesh[i + 1], v, tol));
            }
        }
    }
    roots
}

/// Scans `[a, b]` on `scan_points` equally spaced points and refines each sign change.
pub fn find_roots(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    scan_points: usize,
    tol: f64,
) -> Vec<f64> {
    let n = scan_points.max(2);
    let mesh: Vec<f64> = (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    find_roots_on_mesh(f, &mesh, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_roots() {
        let r = find_roots(f64::sin, 1.0, 7.0, 100, 1e-12);
        assert_eq!(r.len(), 2);
        assert!((r[0] - PI).abs() < 1e-12);
        assert!((r[1] - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn tangent_zero_is_missed() {
        assert!(find_roots(|x| x * x, -1.0, 1.0, 100, 1e-12).is_empty());
    }

    proptest! {
        #[test]
        fn cubic_with_known_roots(a in -3.0..-1.0f64, b in -0.5..0.5f64, c in 1.0..3.0f64, s in 0.5..4.0f64) {
            let f = |x: f64| s * (x - a) * (x - b) * (x - c);
            let r = find_roots(f, -4.0, 4.0, 400, 1e-12);
            prop_assert_eq!(r.len(), 3);
            for (got, want) in r.iter().zip([a, b, c]) {
                prop_assert!((got - want).abs() < 1e-11);
            }
        }
    }
}
