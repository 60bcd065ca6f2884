//! Quadrature helpers shared by the pricing and verification code.

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
const REL_FLOOR: f64 = 1e-13;

pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let fa = f(lo);
    let fb = f(hi);
    let m = 0.5 * (lo + hi);
    let fm = f(m);
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    sign * simpson_step(&f, lo, hi, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // an absolute tolerance below rounding noise of the local value cannot be met
    let floor = REL_FLOOR * (left.abs() + right.abs());
    if depth == 0 || delta.abs() <= (15.0 * tol).max(floor) || (b - a) < 1e-14 * (1.0 + a.abs()) {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson on a list of breakpoints; the tolerance is split evenly.
pub fn adaptive_simpson_pieces<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> f64 {
    if breaks.len() < 2 {
        return 0.0;
    }
    let per = tol / (breaks.len() - 1) as f64;
    breaks
        .windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], per))
        .sum()
}

/// `∫_a^b (p + q t) e^{-k t} dt`, with `b = +inf` allowed when `k > 0`.
pub fn exp_linear_integral(p: f64, q: f64, k: f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if k.abs() < 1e-300 {
        assert!(b.is_finite(), "unbounded integral of a non-decaying kernel");
        return p * (b - a) + 0.5 * q * (b * b - a * a);
    }
    // antiderivative: -e^{-kt} [ (p + q t)/k + q/k^2 ]
    let anti = |t: f64| -> f64 {
        if t.is_infinite() {
            0.0
        } else {
            -(-k * t).exp() * ((p + q * t) / k + q / (k * k))
        }
    };
    anti(b) - anti(a)
}

/// Coefficients of the quadratic through `(0, f0)`, `(h/2, fm)`, `(h, f1)`.
#[derive(Clone, Copy, Debug)]
pub struct SegmentQuadratic {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl SegmentQuadratic {
    pub fn through(f0: f64, fm: f64, f1: f64, h: f64) -> Self {
        let c0 = f0;
        let c2 = 2.0 * (f1 - 2.0 * fm + f0) / (h * h);
        let c1 = (f1 - f0) / h - c2 * h;
        Self { c0, c1, c2 }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    /// `∫_0^x p`.
    pub fn integral(&self, x: f64) -> f64 {
        x * (self.c0 + x * (self.c1 / 2.0 + x * self.c2 / 3.0))
    }

    /// `∫_0^x ∫_0^y p(s) ds dy`.
    pub fn double_integral(&self, x: f64) -> f64 {
        x * x * (self.c0 / 2.0 + x * (self.c1 / 6.0 + x * self.c2 / 12.0))
    }
}

/// Simpson's rule on one segment given endpoint and midpoint values.
#[inline]
pub fn simpson(h: f64, f0: f64, fm: f64, f1: f64) -> f64 {
    h / 6.0 * (f0 + 4.0 * fm + f1)
}

/// Exponential integral `E₁(x) = ∫_x^∞ e^{−t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 needs a positive argument");
    if x <= 2.0 {
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let add = term / kf;
            sum += add;
            if add.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // continued fraction (modified Lentz)
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_smooth_function() {
        let v = adaptive_simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-11);
        let rev = adaptive_simpson(|x: f64| x.sin(), std::f64::consts::PI, 0.0, 1e-12);
        assert!((rev + 2.0).abs() < 1e-11);
    }

    #[test]
    fn exp_linear_kernel_matches_quadrature() {
        let (p, q, k) = (1.3, -0.4, 1.7);
        let exact = exp_linear_integral(p, q, k, 0.2, 3.1);
        let num = adaptive_simpson(|t| (p + q * t) * (-k * t).exp(), 0.2, 3.1, 1e-13);
        assert!((exact - num).abs() < 1e-12);
        // unbounded: ∫_0^∞ e^{-kt} = 1/k, ∫ t e^{-kt} = 1/k^2
        assert!((exp_linear_integral(1.0, 0.0, 2.0, 0.0, f64::INFINITY) - 0.5).abs() < 1e-15);
        assert!((exp_linear_integral(0.0, 1.0, 2.0, 0.0, f64::INFINITY) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn e1_matches_quadrature() {
        for &x in &[0.3, 1.5, 2.0, 2.5, 6.0] {
            let num = adaptive_simpson(|t: f64| (-t).exp() / t, x, x + 60.0, 1e-15);
            assert!((exp_integral_e1(x) - num).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn segment_quadratic_reproduces_nodes() {
        let q = SegmentQuadratic::through(1.0, 2.0, 5.0, 0.5);
        assert!((q.eval(0.0) - 1.0).abs() < 1e-14);
        assert!((q.eval(0.25) - 2.0).abs() < 1e-14);
        assert!((q.eval(0.5) - 5.0).abs() < 1e-14);
        let whole = simpson(0.5, 1.0, 2.0, 5.0);
        assert!((q.integral(0.5) - whole).abs() < 1e-14);
    }
}
