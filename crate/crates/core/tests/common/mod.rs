//! Independent reference implementations used only by the test suites.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_bigint::Sign;
use std::f64::consts::PI;

/// J0 by its power series in 400-bit fixed point. Exact apart from the
/// final conversion for every finite argument used in the tests.
pub fn j0_bigint(x: f64) -> f64 {
    const FRAC_BITS: u64 = 400;
    let (mantissa, exponent) = decompose(x.abs());
    // x = mantissa * 2^exponent; y = x^2/4 as fixed point
    let one = BigInt::from(1) << FRAC_BITS;
    let mut y = BigInt::from(mantissa) * BigInt::from(mantissa);
    let shift = 2 * exponent - 2 + FRAC_BITS as i64;
    y = if shift >= 0 { y << shift as u64 } else { y >> (-shift) as u64 };
    let mut term = one.clone();
    let mut sum = one.clone();
    let mut k: u64 = 1;
    loop {
        term = (term * &y) >> FRAC_BITS;
        term /= BigInt::from(k * k);
        if term.sign() == Sign::NoSign {
            break;
        }
        if k % 2 == 1 {
            sum -= &term;
        } else {
            sum += &term;
        }
        k += 1;
    }
    fixed_to_f64(&sum, FRAC_BITS)
}

fn decompose(x: f64) -> (u64, i64) {
    if x == 0.0 {
        return (0, 0);
    }
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    }
}

fn fixed_to_f64(v: &BigInt, frac_bits: u64) -> f64 {
    // keep 64 significant bits then scale
    let bits = v.bits();
    let drop = bits.saturating_sub(64);
    let top: BigInt = v >> drop;
    let (sign, digits) = top.to_u64_digits();
    let mag = digits.first().copied().unwrap_or(0) as f64;
    let value = mag * 2f64.powi(drop as i32 - frac_bits as i32);
    if sign == Sign::Minus {
        -value
    } else {
        value
    }
}

/// `e^{-z} I0(z)` from the periodic integral `(1/pi) int_0^pi e^{z(cos t - 1)} dt`
/// by the trapezoidal rule, which converges geometrically here.
pub fn i0e_trapezoid(z: f64) -> f64 {
    let m = 64 + (4.0 * z.sqrt() * 8.0) as usize + (z.min(400.0) as usize);
    let h = PI / m as f64;
    let mut sum = 0.5 * (1.0 + (-2.0 * z).exp());
    for i in 1..m {
        let t = i as f64 * h;
        sum += (z * (t.cos() - 1.0)).exp();
    }
    sum * h / PI
}

/// Adaptive Gauss-Kronrod (7, 15) integration to absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
        const XK: [f64; 8] = [
            0.991_455_371_120_812_6,
            0.949_107_912_342_758_5,
            0.864_864_423_359_769_1,
            0.741_531_185_599_394_4,
            0.586_087_235_467_691_1,
            0.405_845_151_377_397_2,
            0.207_784_955_007_898_5,
            0.0,
        ];
        const WK: [f64; 8] = [
            0.022_935_322_010_529_22,
            0.063_092_092_629_978_55,
            0.104_790_010_322_250_2,
            0.140_653_259_715_525_9,
            0.169_004_726_639_267_9,
            0.190_350_578_064_785_4,
            0.204_432_940_075_298_9,
            0.209_482_141_084_727_8,
        ];
        const WG: [f64; 4] = [
            0.129_484_966_168_869_7,
            0.279_705_391_489_276_7,
            0.381_830_050_505_118_9,
            0.417_959_183_673_469_4,
        ];
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut kron = WK[7] * fc;
        let mut gauss = WG[3] * fc;
        for i in 0..7 {
            let dx = h * XK[i];
            let s = f(c - dx) + f(c + dx);
            kron += WK[i] * s;
            if i % 2 == 1 {
                gauss += WG[i / 2] * s;
            }
        }
        (kron * h, ((kron - gauss) * h).abs())
    }
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        if err <= tol || depth > 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth + 1) + recurse(f, m, b, 0.5 * tol, depth + 1)
    }
    recurse(f, a, b, tol, 0)
}

/// `Q1(a, b)` by adaptive integration of the Rician density with the
/// trapezoidal Bessel kernel; the smaller tail is integrated directly.
pub fn marcum_q1_oracle(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return 1.0;
    }
    let density = |t: f64| t * (-0.5 * (t - a) * (t - a)).exp() * i0e_trapezoid(a * t);
    let centre = a.max(1.0);
    if b >= centre {
        let mut total = 0.0;
        let mut lo = b;
        while lo < b + 40.0 {
            total += adaptive(&density, lo, lo + 2.0, 1e-15);
            lo += 2.0;
        }
        total
    } else {
        let mut total = 0.0;
        let mut lo = 0.0;
        while lo < b {
            let hi = (lo + 2.0).min(b);
            total += adaptive(&density, lo, hi, 1e-15);
            lo = hi;
        }
        1.0 - total
    }
}

/// Empirical CDF distance: `sup |F_emp - F|` over the sorted sample.
pub fn ks_distance(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        worst = worst.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    worst
}

/// Eigenvalues of a symmetric matrix by bisection on the Sylvester inertia
/// of `A - s I` (count of negative pivots in an LDL^T without pivoting).
#[allow(clippy::needless_range_loop)]
pub fn eigenvalues_by_bisection(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let bound = a
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let count_below = |s: f64| -> usize {
        let mut m: Vec<Vec<f64>> = a.to_vec();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= s;
        }
        let mut negatives = 0;
        for k in 0..n {
            let mut pivot = m[k][k];
            if pivot == 0.0 {
                pivot = 1e-300;
            }
            if pivot < 0.0 {
                negatives += 1;
            }
            for i in k + 1..n {
                let factor = m[i][k] / pivot;
                for j in k + 1..n {
                    m[i][j] -= factor * m[k][j];
                }
            }
        }
        negatives
    };
    let mut out = Vec::with_capacity(n);
    for idx in 0..n {
        // idx-th smallest eigenvalue
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.reverse();
    out
}

/// Scan of `f` over `[0, 1]` at the given step; returns the minimum value.
pub fn scan_min(f: impl Fn(f64) -> f64, step: f64) -> f64 {
    let n = (1.0 / step).round() as usize;
    (0..=n).map(|i| f(i as f64 * step)).fold(f64::INFINITY, f64::min)
}

/// KS distance with the model CDF tabulated on `points` equispaced nodes
/// up to the sample maximum and interpolated linearly; for smooth CDFs the
/// interpolation error is far below the sampling noise.
pub fn ks_distance_tabulated(sorted: &[f64], cdf: impl Fn(f64) -> f64 + Sync, points: usize) -> f64 {
    use rayon::prelude::*;
    let top = *sorted.last().unwrap();
    let step = top / (points - 1) as f64;
    let table: Vec<f64> = (0..points).into_par_iter().map(|i| cdf(i as f64 * step)).collect();
    ks_distance(sorted, |x| {
        let pos = x / step;
        let i = (pos.floor() as usize).min(points - 2);
        let frac = pos - i as f64;
        table[i] + frac * (table[i + 1] - table[i])
    })
}
