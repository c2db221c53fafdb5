//! Bessel functions of the first and second kind for real order.
//!
//! The core evaluator follows the Temme / Steed scheme: a continued fraction
//! for J'/J at the requested order, downward recurrence to a reduced order
//! |mu| <= 1/2, Temme's series (x < 2) or Steed's complex continued fraction
//! (x >= 2) at the reduced order, and upward recurrence for Y. Magnitudes are
//! tracked as `mantissa * exp(log_scale)` so that orders up to 200 at small
//! arguments stay representable.

use std::f64::consts::PI;

use thiserror::Error;

use crate::roots;

/// Largest supported order.
pub const MAX_ORDER: f64 = 200.0;
/// Largest supported argument.
pub const MAX_ARG: f64 = 500.0;
/// First positive zero of J'_1.
pub const J1_PRIME_ZERO: f64 = 1.841_183_781_340_659_3;
/// First positive zero of J_0.
pub const J0_ZERO: f64 = 2.404_825_557_695_773;
/// Leading coefficient of the first-zero expansion, -a_1 / 2^{1/3} with a_1 the first Airy zero.
pub const OLVER_C: f64 = 1.855757;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const BIG: f64 = 1e250;
const MAXIT: usize = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecFunError {
    #[error("argument outside the supported envelope: {0}")]
    Domain(String),
    #[error("Y_{order}({x}) overflows double precision")]
    Overflow { order: f64, x: f64 },
    #[error("{0} failed to converge")]
    NoConvergence(&'static str),
    #[error("could not bracket the first zero of J_{order}: {detail}")]
    Bracket { order: f64, detail: String },
}

pub type Result<T> = std::result::Result<T, SpecFunError>;

/// J, Y and their derivatives (with respect to the argument) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: f64,
    pub x: f64,
    pub j: f64,
    pub y: f64,
    pub jp: f64,
    pub yp: f64,
}

impl BesselEval {
    /// Relative deviation of J Y' - J' Y from 2 / (pi x).
    pub fn wronskian_residual(&self) -> f64 {
        let w = 2.0 / (PI * self.x);
        ((self.j * self.yp - self.jp * self.y) - w).abs() / w
    }
}

/// Scaled values: `J = j * exp(ln_j)`, `J' = jp * exp(ln_j)`, likewise for Y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledBessel {
    pub order: f64,
    pub x: f64,
    pub j: f64,
    pub jp: f64,
    pub ln_j: f64,
    pub y: f64,
    pub yp: f64,
    pub ln_y: f64,
}

impl ScaledBessel {
    /// J'/J, free of scaling.
    pub fn j_log_derivative(&self) -> f64 {
        self.jp / self.j
    }

    /// Y'/Y, free of scaling.
    pub fn y_log_derivative(&self) -> f64 {
        self.yp / self.y
    }

    /// Unscaled values; errors if Y overflows. J may underflow to zero.
    pub fn unscale(&self) -> Result<BesselEval> {
        let sy = self.ln_y.exp();
        let (y, yp) = (self.y * sy, self.yp * sy);
        if !y.is_finite() || !yp.is_finite() {
            return Err(SpecFunError::Overflow { order: self.order, x: self.x });
        }
        let sj = self.ln_j.exp();
        Ok(BesselEval { order: self.order, x: self.x, j: self.j * sj, y, jp: self.jp * sj, yp })
    }
}

fn check_envelope(order: f64, x: f64) -> Result<()> {
    if !order.is_finite() || !x.is_finite() {
        return Err(SpecFunError::Domain(format!("non-finite input (order {order}, x {x})")));
    }
    if !(0.0..=MAX_ORDER).contains(&order) {
        return Err(SpecFunError::Domain(format!("order {order} not in [0, {MAX_ORDER}]")));
    }
    if x <= 0.0 || x > MAX_ARG {
        return Err(SpecFunError::Domain(format!("argument {x} not in (0, {MAX_ARG}]")));
    }
    Ok(())
}

/// Taylor coefficients of 1/Gamma(z) about z = 0, starting at z^1.
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_9,
    -0.042_002_635_034_095_24,
    0.166_538_611_382_291_48,
    -0.042_197_734_555_544_33,
    -0.009_621_971_527_876_973,
    0.007_218_943_246_663_1,
    -0.001_165_167_591_859_065_2,
    -0.000_215_241_674_114_950_98,
    0.000_128_050_282_388_116_2,
    -0.000_020_134_854_780_788_24,
    -0.000_001_250_493_482_142_670_6,
    0.000_001_133_027_231_981_696,
    -2.056_338_416_977_607e-7,
    6.116_095_104_481_416e-9,
    5.002_007_644_469_223e-9,
    -1.181_274_570_487_02e-9,
    1.043_426_711_691_100_5e-10,
    7.782_263_439_905_071e-12,
    -3.696_805_618_642_206e-12,
    5.100_370_287_454_476e-13,
    -2.058_326_053_566_506_6e-14,
    -5.348_122_539_423_018e-15,
    1.226_778_628_238_260_8e-15,
    -1.181_259_301_697_458_8e-16,
];

/// (gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu)) for |mu| <= 1/2, where
/// gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu) and
/// gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // 1/Gamma(1+mu) = sum_k RGAMMA[k] mu^k
    let mu2 = mu * mu;
    let mut even = 0.0;
    let mut odd = 0.0;
    for k in (0..RGAMMA.len()).rev() {
        if k % 2 == 0 {
            even = even * mu2 + RGAMMA[k];
        } else {
            odd = odd * mu2 + RGAMMA[k];
        }
    }
    // even collects k = 0, 2, 4, ... in powers of mu2; odd collects k = 1, 3, ...
    let gampl = even + mu * odd;
    let gammi = even - mu * odd;
    (-odd, even, gampl, gammi)
}

/// J_{nu+1}/J_nu and the sign bookkeeping of the modified Lentz evaluation.
fn cf1(nu: f64, x: f64) -> Result<(f64, f64)> {
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let mut isign = 1.0;
    let mut h = (nu * xi).max(FPMIN);
    let mut b = xi2 * nu;
    let mut d = 0.0;
    let mut c = h;
    for _ in 0..MAXIT {
        b += xi2;
        d = b - d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b - 1.0 / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = c * d;
        h *= del;
        if d < 0.0 {
            isign = -isign;
        }
        if (del - 1.0).abs() < EPS {
            // h = J'_nu / J_nu
            return Ok((h, isign));
        }
    }
    Err(SpecFunError::NoConvergence("continued fraction for J'/J"))
}

/// Core evaluator without envelope checks (callers validate input).
fn jy_scaled_unchecked(nu: f64, x: f64) -> Result<ScaledBessel> {
    let nl = if x < 2.0 { (nu + 0.5) as usize } else { (nu - x + 1.5).max(0.0) as usize };
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;
    let w = xi2 / PI;

    let (h, isign) = cf1(nu, x)?;
    let mut rjl = isign;
    let mut rjpl = h * rjl;
    let rjl1 = rjl;
    let rjp1 = rjpl;
    let mut ln_down = 0.0;
    let mut fact = nu * xi;
    for _ in 0..nl {
        let t = fact * rjl + rjpl;
        fact -= xi;
        rjpl = fact * t - rjl;
        rjl = t;
        if rjl.abs() > BIG {
            rjl /= BIG;
            rjpl /= BIG;
            ln_down += BIG.ln();
        }
    }
    if rjl == 0.0 {
        rjl = EPS;
    }
    let f = rjpl / rjl;

    let (rjmu, rymu, ry1);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = 2.0 / PI * fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let e = e.exp();
        let mut p = e / (gampl * PI);
        let mut q = 1.0 / (e * PI * gammi);
        let pimu2 = 0.5 * pimu;
        let fact3 = if pimu2.abs() < EPS { 1.0 } else { pimu2.sin() / pimu2 };
        let r = PI * pimu2 * fact3 * fact3;
        let mut c = 1.0;
        let d = -x2 * x2;
        let mut sum = ff + r * q;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= d / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * (ff + r * q);
            sum += del;
            let del1 = c * p - fi * del;
            sum1 += del1;
            if del.abs() < (1.0 + sum.abs()) * EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpecFunError::NoConvergence("Temme series"));
        }
        rymu = -sum;
        ry1 = -sum1 * xi2;
        let rymup = xmu * xi * rymu - ry1;
        rjmu = w / (rymup - f * rymu);
    } else {
        let mut a = 0.25 - xmu2;
        let mut p = -0.5 * xi;
        let mut q = 1.0;
        let br = 2.0 * x;
        let mut bi = 2.0;
        let mut fact = a * xi / (p * p + q * q);
        let mut cr = br + q * fact;
        let mut ci = bi + p * fact;
        let mut den = br * br + bi * bi;
        let mut dr = br / den;
        let mut di = -bi / den;
        let mut dlr = cr * dr - ci * di;
        let mut dli = cr * di + ci * dr;
        let mut temp = p * dlr - q * dli;
        q = p * dli + q * dlr;
        p = temp;
        let mut converged = false;
        for i in 2..MAXIT {
            a += 2.0 * (i as f64 - 1.0);
            bi += 2.0;
            dr = a * dr + br;
            di = a * di + bi;
            if dr.abs() + di.abs() < FPMIN {
                dr = FPMIN;
            }
            fact = a / (cr * cr + ci * ci);
            cr = br + cr * fact;
            ci = bi - ci * fact;
            if cr.abs() + ci.abs() < FPMIN {
                cr = FPMIN;
            }
            den = dr * dr + di * di;
            dr /= den;
            di /= -den;
            dlr = cr * dr - ci * di;
            dli = cr * di + ci * dr;
            temp = p * dlr - q * dli;
            q = p * dli + q * dlr;
            p = temp;
            if (dlr - 1.0).abs() + dli.abs() < EPS {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(SpecFunError::NoConvergence("Steed continued fraction"));
        }
        let gam = (p - f) / q;
        rjmu = (w / ((p - f) * gam + q)).sqrt().copysign(rjl);
        rymu = rjmu * gam;
        let rymup = rymu * p + rjmu * q;
        ry1 = xmu * xi * rymu - rymup;
    }

    let scale = rjmu / rjl;
    let j = rjl1 * scale;
    let jp = rjp1 * scale;

    let mut ym = rymu;
    let mut y1 = ry1;
    let mut ln_up = 0.0;
    for i in 1..=nl {
        let t = (xmu + i as f64) * xi2 * y1 - ym;
        ym = y1;
        y1 = t;
        if y1.abs() > BIG {
            ym /= BIG;
            y1 /= BIG;
            ln_up += BIG.ln();
        }
    }
    let yp = nu * xi * ym - y1;
    Ok(ScaledBessel { order: nu, x, j, jp, ln_j: -ln_down, y: ym, yp, ln_y: ln_up })
}

/// Scaled J, Y, J', Y' within the supported envelope.
pub fn bessel_jy_scaled(order: f64, x: f64) -> Result<ScaledBessel> {
    check_envelope(order, x)?;
    jy_scaled_unchecked(order, x)
}

/// J, Y, J', Y' within the supported envelope.
pub fn bessel_jy(order: f64, x: f64) -> Result<BesselEval> {
    bessel_jy_scaled(order, x)?.unscale()
}

/// J_order(x).
pub fn bessel_j(order: f64, x: f64) -> Result<f64> {
    check_envelope(order, x)?;
    let s = jy_scaled_unchecked(order, x)?;
    Ok(s.j * s.ln_j.exp())
}

/// Y_order(x); errors when the value overflows.
pub fn bessel_y(order: f64, x: f64) -> Result<f64> {
    Ok(bessel_jy(order, x)?.y)
}

/// J'_order(x) / J_order(x) for any order >= 0 (no envelope on the order).
pub fn bessel_j_log_derivative(order: f64, x: f64) -> Result<f64> {
    if !order.is_finite() || !x.is_finite() || order < 0.0 || x <= 0.0 {
        return Err(SpecFunError::Domain(format!("order {order}, x {x}")));
    }
    Ok(cf1(order, x)?.0)
}

/// Gamma(order+1) (2/x)^order J_order(x) = sum_k (-x^2/4)^k / (k! (order+1)_k).
///
/// Equals 1 at x = 0. Intended for arguments with x^2/4 not much larger than
/// order + 1, where the alternating series has no cancellation problem; used for
/// ratios J_n(x)/J_n(y) = (x/y)^n Jhat(x)/Jhat(y) at large orders.
pub fn bessel_j_normalized(order: f64, x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..2000 {
        let kf = k as f64;
        term *= q / (kf * (order + kf));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && kf > 0.25 * x * x / (order + 1.0) {
            break;
        }
    }
    sum
}

/// J_0(x) and J_1(x) from the Hankel asymptotic expansion; accurate to
/// double precision for x >= 25.
fn hankel_j01(x: f64) -> (f64, f64) {
    let eval = |mu: f64| -> (f64, f64) {
        // P and Q series: a_k = prod_{j<=k} (mu - (2j-1)^2) / (k! 8^k), mu = 4 nu^2
        let mut p = 1.0;
        let mut q = 0.0;
        let mut term = 1.0;
        let mut prev = f64::INFINITY;
        for k in 1..60 {
            let kf = k as f64;
            term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
            if term.abs() > prev || term == 0.0 {
                break;
            }
            prev = term.abs();
            match k % 4 {
                1 => q += term,
                2 => p -= term,
                3 => q -= term,
                _ => p += term,
            }
            if term.abs() < 1e-18 {
                break;
            }
        }
        (p, q)
    };
    let amp = (2.0 / (PI * x)).sqrt();
    let (s, c) = x.sin_cos();
    // omega = x - nu pi/2 - pi/4
    let (p0, q0) = eval(0.0);
    let cos0 = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
    let sin0 = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
    let j0 = amp * (p0 * cos0 - q0 * sin0);
    let (p1, q1) = eval(4.0);
    // omega_1 = omega_0 - pi/2
    let cos1 = sin0;
    let sin1 = -cos0;
    let j1 = amp * (p1 * cos1 - q1 * sin1);
    (j0, j1)
}

/// J_0(x), ..., J_max_order(x) for any x > 0 (no envelope).
pub fn bessel_j_integer_sequence(max_order: usize, x: f64) -> Result<Vec<f64>> {
    if !x.is_finite() || x <= 0.0 {
        return Err(SpecFunError::Domain(format!("argument {x} must be finite and positive")));
    }
    let mut out = vec![0.0; max_order + 1];
    if x > max_order as f64 + 1.0 {
        let (j0, j1) = if x >= 25.0 {
            hankel_j01(x)
        } else {
            let a = jy_scaled_unchecked(0.0, x)?;
            let b = jy_scaled_unchecked(1.0, x)?;
            (a.j * a.ln_j.exp(), b.j * b.ln_j.exp())
        };
        out[0] = j0;
        if max_order >= 1 {
            out[1] = j1;
        }
        for n in 1..max_order {
            out[n + 1] = 2.0 * n as f64 / x * out[n] - out[n - 1];
        }
        return Ok(out);
    }
    // Miller's backward recurrence, normalised by J_0 + 2 sum J_{2k} = 1.
    let top = max_order.max(x as usize);
    let mut start = top + 20 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut norm = 0.0;
    for n in (1..=start).rev() {
        let jm1 = 2.0 * n as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        // j now holds the value of order n - 1
        let m = n - 1;
        if m <= max_order {
            out[m] = j;
        }
        if m % 2 == 0 && m > 0 {
            norm += 2.0 * j;
        }
        if j.abs() > BIG {
            j /= BIG;
            jp1 /= BIG;
            norm /= BIG;
            for v in out.iter_mut() {
                *v /= BIG;
            }
        }
    }
    norm += j;
    for v in out.iter_mut() {
        *v /= norm;
    }
    Ok(out)
}

/// Two-term first-zero estimate nu (1 + c nu^{-2/3}).
pub fn olver_first_zero(order: f64) -> f64 {
    order * (1.0 + OLVER_C * order.powf(-2.0 / 3.0))
}

fn first_zero_guess(order: f64) -> f64 {
    const J1_ZERO: f64 = 3.831_705_970_207_512;
    if order < 1.0 {
        J0_ZERO + order * (J1_ZERO - J0_ZERO)
    } else {
        let t = order.cbrt();
        order + OLVER_C * t + 1.033_150 / t - 0.003_97 / order - 0.0908 / (t * t * order)
            + 0.043 / (t * order * order)
    }
}

/// Sign of J_order(x); J is never so small that its mantissa vanishes here.
fn j_sign_value(order: f64, x: f64) -> Result<f64> {
    let s = jy_scaled_unchecked(order, x)?;
    Ok(s.j)
}

/// Smallest positive zero of J_order, to absolute 1e-10 or better.
pub fn bessel_first_zero(order: f64) -> Result<f64> {
    if !order.is_finite() || !(0.0..=MAX_ORDER).contains(&order) {
        return Err(SpecFunError::Domain(format!("order {order} not in [0, {MAX_ORDER}]")));
    }
    let guess = first_zero_guess(order);
    let step = 0.25 * order.cbrt().max(1.0);
    // J_nu > 0 on (0, j_nu) and nu < j_nu, so any start below the zero works.
    let mut lo = order.max(0.9 * guess).max(0.5);
    let mut flo = j_sign_value(order, lo)?;
    if flo <= 0.0 {
        lo = order.max(0.5) * 0.5 + 0.25;
        flo = j_sign_value(order, lo)?;
        if flo <= 0.0 {
            return Err(SpecFunError::Bracket {
                order,
                detail: format!("J is not positive at the scan start x = {lo}"),
            });
        }
    }
    let limit = 1.1 * guess + 10.0;
    let mut hi = lo;
    let mut fhi = flo;
    while fhi > 0.0 {
        lo = hi;
        flo = fhi;
        hi += step;
        if hi > limit.min(MAX_ARG) {
            return Err(SpecFunError::Bracket {
                order,
                detail: format!("no sign change up to x = {hi} (estimate {guess})"),
            });
        }
        fhi = j_sign_value(order, hi)?;
    }
    let root = roots::brent(|x| j_sign_value(order, x), lo, hi, flo, fhi, 1e-13)?;
    Ok(root.x)
}
