//! Independent numerical oracles for the integration suites. Nothing here
//! calls back into the library's special-function code paths: the gamma
//! function is Lanczos, the series oracle is a plain f64 Maclaurin sum, the
//! zero oracle integrates the defining differential equation with a dense
//! fourth-order scheme, and the quadrature oracle is adaptive Simpson.

#![allow(dead_code)]

/// Lanczos approximation (g = 7, nine coefficients), good to ~1e-14 on the
/// positive axis.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = COEFFS[0];
        for (i, c) in COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// Values of the two entire Maclaurin series and their derivatives at `u`,
/// combined into (Ai, Ai', Bi, Bi') with Lanczos-derived constants. Plain
/// f64 summation; trustworthy to ~1e-12 for |u| up to about 4.
pub fn airy_series_oracle(u: f64) -> (f64, f64, f64, f64) {
    let c1 = 3.0f64.powf(-2.0 / 3.0) / gamma(2.0 / 3.0);
    let c2 = 3.0f64.powf(-1.0 / 3.0) / gamma(1.0 / 3.0);
    let u3 = u * u * u;

    let mut f = 1.0;
    let mut g = u;
    let mut fp = 0.5 * u * u;
    let mut gp = 1.0;
    let mut tf = 1.0;
    let mut tg = u;
    let mut tfp = 0.5 * u * u;
    let mut tgp = 1.0;
    for k in 0..200 {
        let kf = k as f64;
        tf *= u3 / ((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        tg *= u3 / ((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        tgp *= u3 / ((3.0 * kf + 1.0) * (3.0 * kf + 3.0));
        tfp *= u3 * (kf + 2.0) / ((kf + 1.0) * (3.0 * kf + 5.0) * (3.0 * kf + 6.0));
        f += tf;
        g += tg;
        fp += tfp;
        gp += tgp;
        if tf.abs().max(tg.abs()).max(tfp.abs()).max(tgp.abs()) < 1e-18 && k > 3 {
            break;
        }
    }
    let sqrt3 = 3.0f64.sqrt();
    (
        c1 * f - c2 * g,
        c1 * fp - c2 * gp,
        sqrt3 * (c1 * f + c2 * g),
        sqrt3 * (c1 * fp + c2 * gp),
    )
}

/// Leading asymptotic decay estimate of Ai on the right, used only for
/// order-of-magnitude checks.
pub fn airy_decay_oracle(u: f64) -> f64 {
    let zeta = 2.0 / 3.0 * u.powf(1.5);
    (-zeta).exp() / (2.0 * std::f64::consts::PI.sqrt() * u.powf(0.25))
}

/// Dense solution of y'' = u y integrated leftward from u = 0 with the
/// decaying branch's initial data taken from the Lanczos constants.
pub struct AiryOdeOracle {
    /// step (positive); node i sits at u = -i h
    h: f64,
    y: Vec<f64>,
    yp: Vec<f64>,
}

impl AiryOdeOracle {
    /// Integrates down to `u_min` (negative) with classical RK4 at the
    /// given step.
    pub fn build(u_min: f64, h: f64) -> Self {
        assert!(u_min < 0.0 && h > 0.0);
        let c1 = 3.0f64.powf(-2.0 / 3.0) / gamma(2.0 / 3.0);
        let c2 = 3.0f64.powf(-1.0 / 3.0) / gamma(1.0 / 3.0);
        let steps = (-u_min / h).ceil() as usize;
        let mut y = Vec::with_capacity(steps + 1);
        let mut yp = Vec::with_capacity(steps + 1);
        // Ai(0), Ai'(0)
        let mut state = (c1, -c2);
        y.push(state.0);
        yp.push(state.1);
        let rhs = |u: f64, s: (f64, f64)| (s.1, u * s.0);
        for i in 0..steps {
            let u = -(i as f64) * h;
            let k1 = rhs(u, state);
            let k2 = rhs(
                u - h / 2.0,
                (state.0 - h / 2.0 * k1.0, state.1 - h / 2.0 * k1.1),
            );
            let k3 = rhs(
                u - h / 2.0,
                (state.0 - h / 2.0 * k2.0, state.1 - h / 2.0 * k2.1),
            );
            let k4 = rhs(u - h, (state.0 - h * k3.0, state.1 - h * k3.1));
            state.0 -= h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            state.1 -= h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            y.push(state.0);
            yp.push(state.1);
        }
        AiryOdeOracle { h, y, yp }
    }

    fn node_u(&self, i: usize) -> f64 {
        -(i as f64) * self.h
    }

    /// Cubic Hermite value of y inside cell i (t in [0,1] toward node i+1).
    fn hermite_y(&self, i: usize, t: f64) -> f64 {
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        // d/dt = -h d/du
        let (d0, d1) = (-self.h * self.yp[i], -self.h * self.yp[i + 1]);
        hermite(y0, d0, y1, d1, t)
    }

    /// Cubic Hermite value of y' inside cell i; its derivative is u·y.
    fn hermite_yp(&self, i: usize, t: f64) -> f64 {
        let (p0, p1) = (self.yp[i], self.yp[i + 1]);
        let u0 = self.node_u(i);
        let u1 = self.node_u(i + 1);
        let (d0, d1) = (-self.h * u0 * self.y[i], -self.h * u1 * self.y[i + 1]);
        hermite(p0, d0, p1, d1, t)
    }

    /// First `count` negative zeros of the solution, ascending in magnitude.
    pub fn zeros_of_value(&self, count: usize) -> Vec<f64> {
        self.zeros(count, |i, t| self.hermite_y(i, t))
    }

    /// First `count` negative zeros of the derivative.
    pub fn zeros_of_slope(&self, count: usize) -> Vec<f64> {
        self.zeros(count, |i, t| self.hermite_yp(i, t))
    }

    fn zeros(&self, count: usize, f: impl Fn(usize, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(count);
        for i in 0..self.y.len() - 1 {
            let a = f(i, 0.0);
            let b = f(i, 1.0);
            if a == 0.0 {
                continue; // counted as the previous cell's endpoint
            }
            if a * b <= 0.0 {
                let mut lo = 0.0;
                let mut hi = 1.0;
                let mut flo = a;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = f(i, mid);
                    if flo * fm <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                let t = 0.5 * (lo + hi);
                out.push(self.node_u(i) - t * self.h);
                if out.len() == count {
                    break;
                }
            }
        }
        assert_eq!(
            out.len(),
            count,
            "integration window too short for {count} zeros"
        );
        out
    }
}

fn hermite(v0: f64, d0: f64, v1: f64, d1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    v0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + d0 * (t3 - 2.0 * t2 + t)
        + v1 * (-2.0 * t3 + 3.0 * t2)
        + d1 * (t3 - t2)
}

/// Adaptive Simpson quadrature with absolute tolerance. The interval is
/// pre-split into short panels so an oscillatory integrand cannot alias the
/// top-level estimate into false convergence.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let panels = ((b - a) / 0.5).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * width;
        let hi = if i == panels - 1 { b } else { lo + width };
        total += adaptive_simpson_panel(f, lo, hi, tol / panels as f64);
    }
    total
}

fn adaptive_simpson_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
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
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 40)
}
