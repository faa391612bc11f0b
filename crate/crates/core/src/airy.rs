//! Airy functions Ai, Bi and their derivatives on the real line, their
//! negative zeros, and the closed form of the tail integral of Ai².
//!
//! Evaluation strategy: the two-series Maclaurin form on a central interval,
//! summed in double-double arithmetic because the series loses up to sixteen
//! digits to cancellation near the right cutover, and the standard asymptotic
//! expansions (exponential on the right, oscillatory with the π/4 phase on
//! the left) beyond. The cutovers sit where the asymptotic optimal-truncation
//! error drops under 1e-13, and the representations are cross-checked against
//! frozen multiprecision references on both sides.

use crate::error::{Error, Result};

/// Ai, Bi and derivatives at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryValue {
    pub u: f64,
    pub ai: f64,
    pub ai_prime: f64,
    pub bi: f64,
    pub bi_prime: f64,
}

/// The Maclaurin series (in double-double) is used on
/// `SERIES_CUTOFF_LEFT ≤ u ≤ SERIES_CUTOFF_RIGHT`. On the right the
/// combination `c1 f − c2 g` loses about `e^(4/3 u^(3/2))` digits, which
/// exhausts double-double near u ≈ 11; on the left the loss is only
/// `e^(2/3 |u|^(3/2))`, so the series stays good much further out. The
/// asymptotic expansions reach ~1e-14 at both takeover points.
const SERIES_CUTOFF_RIGHT: f64 = 9.0;
const SERIES_CUTOFF_LEFT: f64 = -12.5;

/// Ai(0) = 3^(-2/3)/Γ(2/3) as a double-double pair.
const C1: Dd = Dd {
    hi: 0.355_028_053_887_817_2,
    lo: 2.052_336_324_362_12e-17,
};
/// -Ai'(0) = 3^(-1/3)/Γ(1/3) as a double-double pair.
const C2: Dd = Dd {
    hi: 0.258_819_403_792_806_8,
    lo: -2.522_243_111_610_832e-17,
};

/// Evaluates Ai, Ai', Bi, Bi' at a finite real argument.
pub fn airy_eval(u: f64) -> Result<AiryValue> {
    if !u.is_finite() {
        return Err(Error::Domain(format!(
            "airy argument must be finite, got {u}"
        )));
    }
    if (SERIES_CUTOFF_LEFT..=SERIES_CUTOFF_RIGHT).contains(&u) {
        Ok(series_eval(u))
    } else if u > 0.0 {
        Ok(asymptotic_right(u))
    } else {
        Ok(asymptotic_left(u))
    }
}

/// The n-th negative zero of Ai (n ≥ 1), ascending in magnitude.
pub fn ai_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("zero index must be at least 1".into()));
    }
    let t = 3.0 * std::f64::consts::PI * (4.0 * n as f64 - 1.0) / 8.0;
    let guess = -zero_estimate(t, 5.0 / 48.0, -5.0 / 36.0);
    refine_zero(guess, |v| v.ai, |v| v.ai_prime)
}

/// The n-th negative zero of Ai' (n ≥ 1), ascending in magnitude.
pub fn ai_prime_zero(n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("zero index must be at least 1".into()));
    }
    let t = 3.0 * std::f64::consts::PI * (4.0 * n as f64 - 3.0) / 8.0;
    let guess = -zero_estimate(t, -7.0 / 48.0, 35.0 / 288.0);
    // Ai'' = u Ai
    refine_zero(guess, |v| v.ai_prime, |v| v.u * v.ai)
}

/// Closed form of ∫_{u0}^∞ Ai(u)² du, namely −u0 Ai(u0)² + Ai'(u0)².
pub fn ai_squared_tail(u0: f64) -> Result<f64> {
    let v = airy_eval(u0)?;
    Ok(-u0 * v.ai * v.ai + v.ai_prime * v.ai_prime)
}

fn zero_estimate(t: f64, c2: f64, c4: f64) -> f64 {
    let t2 = t * t;
    t.powf(2.0 / 3.0) * (1.0 + c2 / t2 + c4 / (t2 * t2))
}

fn refine_zero(
    guess: f64,
    f: impl Fn(&AiryValue) -> f64,
    df: impl Fn(&AiryValue) -> f64,
) -> Result<f64> {
    let spacing = std::f64::consts::PI / guess.abs().sqrt().max(1.0);
    let eval = |x: f64| -> Result<f64> { Ok(f(&airy_eval(x)?)) };

    // Bracket around the asymptotic estimate, widening if needed.
    let mut delta = 0.35 * spacing;
    let (mut lo, mut hi) = (guess - delta, guess + delta);
    for _ in 0..6 {
        if eval(lo)? * eval(hi)? < 0.0 {
            break;
        }
        delta *= 1.5;
        lo = guess - delta;
        hi = guess + delta;
    }
    let mut lo_v = eval(lo)?;
    if lo_v * eval(hi)? >= 0.0 {
        return Err(Error::Domain(format!(
            "failed to bracket a zero near {guess}"
        )));
    }

    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let mid_v = eval(mid)?;
        if mid_v == 0.0 {
            return Ok(mid);
        }
        if lo_v * mid_v < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            lo_v = mid_v;
        }
        if hi - lo < 1e-13 * mid.abs() {
            break;
        }
    }

    // Newton polish, guarded by the bisection bracket.
    let mut x = 0.5 * (lo + hi);
    for _ in 0..4 {
        let v = airy_eval(x)?;
        let slope = df(&v);
        if slope == 0.0 {
            break;
        }
        let step = f(&v) / slope;
        let next = x - step;
        if next <= lo || next >= hi {
            break;
        }
        x = next;
        if step.abs() < 1e-15 * x.abs() {
            break;
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Maclaurin two-series form, double-double internals.

fn series_eval(u: f64) -> AiryValue {
    let u3 = Dd::from(u).mul_f64(u).mul_f64(u);

    let mut tf = Dd::from(1.0); // f terms
    let mut tg = Dd::from(u); // g terms
    let mut tfp = Dd::from(u).mul_f64(u).mul_f64(0.5); // f' terms, u²/2 kept exact
    let mut tgp = Dd::from(1.0); // g' terms
    let mut f = tf;
    let mut g = tg;
    let mut fp = tfp;
    let mut gp = tgp;

    for k in 0..200usize {
        let kf = k as f64;
        tf = tf.mul(u3).div_f64((3.0 * kf + 2.0) * (3.0 * kf + 3.0));
        tg = tg.mul(u3).div_f64((3.0 * kf + 3.0) * (3.0 * kf + 4.0));
        tgp = tgp.mul(u3).div_f64((3.0 * kf + 1.0) * (3.0 * kf + 3.0));
        tfp = tfp
            .mul(u3)
            .mul_f64(kf + 2.0)
            .div_f64((kf + 1.0) * (3.0 * kf + 5.0) * (3.0 * kf + 6.0));
        f = f.add(tf);
        g = g.add(tg);
        fp = fp.add(tfp);
        gp = gp.add(tgp);
        let biggest = tf
            .hi
            .abs()
            .max(tg.hi.abs())
            .max(tfp.hi.abs())
            .max(tgp.hi.abs());
        let anchor = f.hi.abs().max(g.hi.abs()).max(1.0);
        if biggest < 1e-36 * anchor && k > 3 {
            break;
        }
    }

    let sqrt3 = dd_sqrt(3.0);
    let ai = C1.mul(f).sub(C2.mul(g));
    let aip = C1.mul(fp).sub(C2.mul(gp));
    let bi = sqrt3.mul(C1.mul(f).add(C2.mul(g)));
    let bip = sqrt3.mul(C1.mul(fp).add(C2.mul(gp)));
    AiryValue {
        u,
        ai: ai.to_f64(),
        ai_prime: aip.to_f64(),
        bi: bi.to_f64(),
        bi_prime: bip.to_f64(),
    }
}

// ---------------------------------------------------------------------------
// Asymptotic expansions (plain f64; used only where they converge to ~1e-14).

/// Series coefficients u_k and v_k of the Airy asymptotic expansions,
/// by recurrence.
fn asymptotic_coeffs(max: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(max);
    let mut v = Vec::with_capacity(max);
    u.push(1.0);
    v.push(1.0);
    for k in 1..max {
        let kf = k as f64;
        let num = (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0);
        let den = 216.0 * kf * (2.0 * kf - 1.0);
        let uk = u[k - 1] * num / den;
        u.push(uk);
        v.push(uk * (6.0 * kf + 1.0) / (1.0 - 6.0 * kf));
    }
    (u, v)
}

fn asymptotic_right(x: f64) -> AiryValue {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let (uk, vk) = asymptotic_coeffs(40);
    let mut s_ai = 0.0;
    let mut s_aip = 0.0;
    let mut s_bi = 0.0;
    let mut s_bip = 0.0;
    let mut pow = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..uk.len() {
        let term = uk[k] * pow;
        if term.abs() > prev {
            break; // divergent tail reached
        }
        prev = term.abs();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s_ai += sign * term;
        s_bi += term;
        s_aip += sign * vk[k] * pow;
        s_bip += vk[k] * pow;
        if term.abs() < 1e-18 * s_bi.abs() {
            break;
        }
        pow /= zeta;
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let root4 = x.powf(0.25);
    let down = (-zeta).exp();
    let up = zeta.exp();
    AiryValue {
        u: x,
        ai: down * s_ai / (2.0 * sqrt_pi * root4),
        ai_prime: -root4 * down * s_aip / (2.0 * sqrt_pi),
        bi: up * s_bi / (sqrt_pi * root4),
        bi_prime: root4 * up * s_bip / sqrt_pi,
    }
}

fn asymptotic_left(u: f64) -> AiryValue {
    let t = -u;
    let xi = 2.0 / 3.0 * t.powf(1.5);
    let (uk, vk) = asymptotic_coeffs(40);
    // P, Q take the even/odd u_k; R, S the even/odd v_k.
    let mut p = 0.0;
    let mut q = 0.0;
    let mut r = 0.0;
    let mut s = 0.0;
    let mut pow = 1.0; // xi^(-k)
    let mut prev = f64::INFINITY;
    for (k, (&u_c, &v_c)) in uk.iter().zip(vk.iter()).enumerate() {
        let term = u_c * pow;
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
            r += sign * v_c * pow;
        } else {
            q += sign * term;
            s += sign * v_c * pow;
        }
        if term.abs() < 1e-18 {
            break;
        }
        pow /= xi;
    }
    let chi = xi + std::f64::consts::FRAC_PI_4;
    let (sin_chi, cos_chi) = chi.sin_cos();
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let root4 = t.powf(0.25);
    AiryValue {
        u,
        ai: (sin_chi * p - cos_chi * q) / (sqrt_pi * root4),
        ai_prime: -root4 * (cos_chi * r + sin_chi * s) / sqrt_pi,
        bi: (cos_chi * p + sin_chi * q) / (sqrt_pi * root4),
        bi_prime: root4 * (sin_chi * r - cos_chi * s) / sqrt_pi,
    }
}

// ---------------------------------------------------------------------------
// Minimal double-double arithmetic (errors tracked through `mul_add`).

#[derive(Debug, Clone, Copy)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn add(self, other: Dd) -> Dd {
        let (s_hi, s_lo) = two_sum(self.hi, other.hi);
        let (t_hi, t_lo) = two_sum(self.lo, other.lo);
        let (r_hi, r_lo) = quick_two_sum(s_hi, s_lo + t_hi);
        let (hi, lo) = quick_two_sum(r_hi, r_lo + t_lo);
        Dd { hi, lo }
    }

    fn sub(self, other: Dd) -> Dd {
        self.add(Dd {
            hi: -other.hi,
            lo: -other.lo,
        })
    }

    fn mul(self, other: Dd) -> Dd {
        let (p_hi, p_lo) = two_prod(self.hi, other.hi);
        let lo = p_lo + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p_hi, lo);
        Dd { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Dd {
        let (p_hi, p_lo) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p_hi, p_lo + self.lo * b);
        Dd { hi, lo }
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p_hi, p_lo) = two_prod(q1, b);
        let (d_hi, d_lo) = two_sum(self.hi, -p_hi);
        let rem = d_hi + (d_lo + self.lo - p_lo);
        let q2 = rem / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn dd_sqrt(x: f64) -> Dd {
    let s = x.sqrt();
    let lo = (-s).mul_add(s, x) / (2.0 * s);
    Dd { hi: s, lo }
}
