//! One-dimensional numerical building blocks: quadrature, line search, root bracketing,
//! and cubic Hermite interpolation.

use crate::scalar::Scalar;

/// Composite Simpson integral of uniformly spaced samples. `y.len() - 1` must be even.
pub fn simpson<T: Scalar>(y: &[T], h: T) -> T {
    let m = y.len() - 1;
    debug_assert!(m >= 2 && m.is_multiple_of(2), "Simpson needs an even panel count");
    let four = T::lit(4.0);
    let two = T::lit(2.0);
    let mut acc = y[0] + y[m];
    for (i, &v) in y.iter().enumerate().take(m).skip(1) {
        acc += if i % 2 == 1 { four * v } else { two * v };
    }
    acc * h / T::lit(3.0)
}

/// Running integral `I_k = \int_{x_0}^{x_k} y` on a uniform grid.
///
/// Even nodes carry the composite Simpson value. Odd nodes add the integral of the
/// quadratic through the surrounding three samples over the first half panel, so
/// every node is fourth-order accurate and `I_M` equals [`simpson`].
pub fn cumulative_simpson<T: Scalar>(y: &[T], h: T) -> Vec<T> {
    let m = y.len() - 1;
    debug_assert!(m >= 2 && m.is_multiple_of(2), "Simpson needs an even panel count");
    let mut out = vec![T::zero(); m + 1];
    let third = h / T::lit(3.0);
    let twelfth = h / T::lit(12.0);
    let (four, five, eight) = (T::lit(4.0), T::lit(5.0), T::lit(8.0));
    let mut k = 2;
    while k <= m {
        out[k - 1] = out[k - 2] + twelfth * (five * y[k - 2] + eight * y[k - 1] - y[k]);
        out[k] = out[k - 2] + third * (y[k - 2] + four * y[k - 1] + y[k]);
        k += 2;
    }
    out
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss-Legendre rule on `[a, b]`; exact for polynomials of degree 9.
pub fn gauss_legendre5<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T) -> T {
    let half = (b - a) / T::lit(2.0);
    let mid = (a + b) / T::lit(2.0);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(&x, &w)| T::lit(w) * f(mid + half * T::lit(x)))
        .sum::<T>()
        * half
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
/// Returns the abscissa and value of the best point seen.
pub fn golden_section_min<T: Scalar>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> (T, T) {
    let inv_phi = T::lit(0.618_033_988_749_894_8);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iters = 0;
    while (b - a).abs() > tol && iters < 200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        iters += 1;
    }
    let (fa, fb) = (f(a), f(b));
    [(c, fc), (d, fd), (a, fa), (b, fb)]
        .into_iter()
        .fold((c, fc), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Root of `f` in a sign-changing bracket by bisection, to abscissa tolerance `tol`.
pub fn bisect_root<T: Scalar>(f: impl Fn(T) -> T, mut a: T, mut b: T, tol: T) -> T {
    let mut fa = f(a);
    if fa == T::zero() {
        return a;
    }
    let two = T::lit(2.0);
    for _ in 0..200 {
        let m = (a + b) / two;
        if (b - a).abs() <= tol {
            return m;
        }
        let fm = f(m);
        if fm == T::zero() {
            return m;
        }
        if (fm < T::zero()) == (fa < T::zero()) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    (a + b) / two
}

/// Cubic Hermite interpolant on `[0, h]` at local coordinate `tau`, from endpoint values
/// and slopes. Returns value and derivative.
#[inline]
pub fn hermite<T: Scalar>(y0: T, d0: T, y1: T, d1: T, h: T, tau: T) -> (T, T) {
    let u = tau / h;
    let u2 = u * u;
    let u3 = u2 * u;
    let (one, two, three, six) = (T::one(), T::lit(2.0), T::lit(3.0), T::lit(6.0));
    let h00 = two * u3 - three * u2 + one;
    let h10 = u3 - two * u2 + u;
    let h01 = -two * u3 + three * u2;
    let h11 = u3 - u2;
    let value = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
    let dh00 = (six * u2 - six * u) / h;
    let dh10 = three * u2 - T::lit(4.0) * u + one;
    let dh01 = (-six * u2 + six * u) / h;
    let dh11 = three * u2 - two * u;
    let slope = dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1;
    (value, slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        let m = 8;
        let h = 1.0 / m as f64;
        let y: Vec<f64> = (0..=m).map(|i| (i as f64 * h).powi(3)).collect();
        assert!((simpson(&y, h) - 0.25).abs() < 1e-15);
        let c = cumulative_simpson(&y, h);
        for (i, v) in c.iter().enumerate().step_by(2) {
            let x = i as f64 * h;
            assert!((v - x.powi(4) / 4.0).abs() < 1e-15, "node {i}");
        }
    }

    #[test]
    fn cumulative_exact_on_quadratics_at_every_node() {
        let m = 10;
        let h = 0.3 / m as f64;
        let y: Vec<f64> = (0..=m).map(|i| 1.0 - 2.0 * (i as f64 * h).powi(2)).collect();
        for (i, v) in cumulative_simpson(&y, h).iter().enumerate() {
            let x = i as f64 * h;
            assert!((v - (x - 2.0 * x.powi(3) / 3.0)).abs() < 1e-15, "node {i}");
        }
    }

    #[test]
    fn cumulative_matches_total() {
        let m = 64;
        let h = 1.0 / m as f64;
        let y: Vec<f64> = (0..=m).map(|i| (3.0 * i as f64 * h).exp()).collect();
        let c = cumulative_simpson(&y, h);
        assert_eq!(c[0], 0.0);
        assert!((c[m] - simpson(&y, h)).abs() < 1e-14);
        assert!((c[m] - (3f64.exp() - 1.0) / 3.0).abs() < 1e-6);
    }

    #[test]
    fn gauss_legendre_exact_degree_nine() {
        let v = gauss_legendre5(|x: f64| x.powi(9) + x.powi(4), 0.0, 2.0);
        assert!((v - (1024.0 / 10.0 + 32.0 / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_section_min(|x: f64| (x - 0.3).powi(2) + 1.0, 0.0, 1.0, 1e-10);
        // the vertex is only resolved to about sqrt(eps) in the abscissa
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }

    #[test]
    fn golden_section_monotone_returns_endpoint() {
        let (x, _) = golden_section_min(|x: f64| x, 0.0, 1.0, 1e-12);
        assert!(x.abs() < 1e-11);
    }

    #[test]
    fn bisection_root() {
        let r = bisect_root(|x: f64| x.cos(), 0.0, 3.0, 1e-14);
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn hermite_reproduces_cubic() {
        let f = |x: f64| 2.0 * x.powi(3) - x + 0.5;
        let df = |x: f64| 6.0 * x * x - 1.0;
        let h = 0.7;
        for k in 0..=10 {
            let tau = h * k as f64 / 10.0;
            let (v, d) = hermite(f(0.0), df(0.0), f(h), df(h), h, tau);
            assert!((v - f(tau)).abs() < 1e-14);
            assert!((d - df(tau)).abs() < 1e-13);
        }
    }
}
