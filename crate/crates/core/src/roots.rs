//! Bracketed scalar root refinement shared by the solvers.

/// Result of a bracketed refinement.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    /// Final bracket width.
    pub width: f64,
    pub iterations: usize,
}

/// Brent's method on a sign-changing bracket `[a, b]` with known end values.
///
/// Stops when the bracket is narrower than `xtol` (plus a few ulps of the
/// root) or an exact zero is hit. The callback may fail; its error is
/// returned unchanged.
pub fn brent<E, F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, xtol: f64) -> Result<Root, E>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    debug_assert!(fa.signum() != fb.signum() || fa == 0.0 || fb == 0.0);
    if fa == 0.0 {
        return Ok(Root { x: a, fx: 0.0, width: 0.0, iterations: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: 0.0, width: 0.0, iterations: 0 });
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=300 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(Root { x: b, fx: fb, width: (c - b).abs(), iterations: iter });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Ok(Root { x: b, fx: fb, width: (c - b).abs(), iterations: 300 })
}

/// Scan consecutive sample points for sign changes; returns index pairs.
pub fn sign_changes(values: &[f64]) -> Vec<usize> {
    values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].is_finite() && w[1].is_finite() && (w[0] == 0.0 || w[0].signum() != w[1].signum()))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let f = |x: f64| -> Result<f64, ()> { Ok(x * x * x - 2.0) };
        let r = brent(f, 0.0, 2.0, -2.0, 6.0, 1e-14).unwrap();
        assert!((r.x - 2f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn brent_handles_flat_then_steep() {
        let f = |x: f64| -> Result<f64, ()> { Ok((x - 0.3).powi(9)) };
        let r = brent(f, 0.0, 1.0, f(0.0).unwrap(), f(1.0).unwrap(), 1e-12).unwrap();
        assert!((r.x - 0.3).abs() < 1e-3);
    }

    #[test]
    fn sign_change_indices() {
        assert_eq!(sign_changes(&[1.0, 2.0, -1.0, -3.0, 4.0]), vec![1, 3]);
        assert!(sign_changes(&[1.0, f64::NAN, -1.0]).is_empty());
    }
}
