//! Special functions and quadrature primitives.
//!
//! Everything here is a pure function of its arguments. The `Result`
//! returning entry points validate their inputs; the crate-internal
//! unchecked variants are used on hot paths where the caller already
//! guarantees the domain.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result};
use crate::numeric::gauss_legendre_12;

/// Zero-order Bessel function of the first kind.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return domain(format!("bessel_j0 requires a finite argument, got {x}"));
    }
    Ok(j0(x))
}

pub(crate) fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 8.0 {
        j0_series(x)
    } else if x < 25.0 {
        j0_miller(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let y = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= y / (kf * kf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

// Backward recurrence normalised with J0 + 2 * sum_k J_{2k} = 1.
fn j0_miller(x: f64) -> f64 {
    let start = 2 * ((x + 10.0 * x.cbrt() + 30.0) / 2.0).ceil() as usize;
    let mut above = 0.0; // J_{k+1}
    let mut current = 1e-30; // J_k, k = start (even)
    let mut even_sum = 2.0 * current;
    for k in (1..=start).rev() {
        let below = (2.0 * k as f64 / x) * current - above;
        above = current;
        current = below;
        let order = k - 1;
        if order > 0 && order % 2 == 0 {
            even_sum += 2.0 * current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            even_sum *= 1e-250;
        }
    }
    current / (current + even_sum)
}

// Hankel expansion J0 = sqrt(2/(pi x)) (P cos(x - pi/4) - Q sin(x - pi/4)),
// summed until the terms stop decreasing or drop below 1e-17.
fn j0_asymptotic(x: f64) -> f64 {
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    for k in 1..200 {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (8.0 * k as f64 * x);
        if next >= term || next < 1e-17 {
            break;
        }
        term = next;
        let m = k / 2;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q -= sign * term;
        }
    }
    let (s, c) = x.sin_cos();
    let cos_chi = (c + s) * FRAC_1_SQRT_2;
    let sin_chi = (s - c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

/// Exponentially scaled modified Bessel function `e^(-x) I0(x)`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if !x.is_finite() || x < 0.0 {
        return domain(format!(
            "bessel_i0_scaled requires a finite non-negative argument, got {x}"
        ));
    }
    Ok(i0e(x))
}

pub(crate) fn i0e(x: f64) -> f64 {
    if x <= 20.0 {
        let y = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..400 {
            let kf = k as f64;
            term *= y / (kf * kf);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        let mut term: f64 = 1.0;
        let mut sum = 1.0;
        for k in 1..100 {
            let odd = (2 * k - 1) as f64;
            let next = term * odd * odd / (8.0 * k as f64 * x);
            if next >= term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum / (2.0 * PI * x).sqrt()
    }
}

/// First-order Marcum Q-function together with its complement.
///
/// `q = Q1(a, b)` and `p = 1 - Q1(a, b)`. Whichever of the two is the
/// smaller tail is computed directly, so both carry full absolute accuracy
/// and the small one keeps its relative accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarcumQ {
    pub q: f64,
    pub p: f64,
}

pub fn marcum_q1(a: f64, b: f64) -> Result<f64> {
    Ok(marcum_q1_pair(a, b)?.q)
}

pub fn marcum_q1_pair(a: f64, b: f64) -> Result<MarcumQ> {
    if !(a.is_finite() && b.is_finite()) || a < 0.0 || b < 0.0 {
        return domain(format!(
            "marcum_q1 requires finite non-negative arguments, got a={a}, b={b}"
        ));
    }
    Ok(marcum_pair(a, b))
}

/// Above this product the Bessel series is replaced by direct quadrature of
/// the Rician density.
const SERIES_LIMIT: f64 = 30.0;
/// Half-width (in units of the unit-variance Rician scale) beyond which the
/// density is below e^-72.
const QUAD_REACH: f64 = 12.0;

pub(crate) fn marcum_pair(a: f64, b: f64) -> MarcumQ {
    if b == 0.0 {
        return MarcumQ { q: 1.0, p: 0.0 };
    }
    if a == 0.0 {
        let h = -0.5 * b * b;
        return MarcumQ {
            q: h.exp(),
            p: -h.exp_m1(),
        };
    }
    let z = a * b;
    if z <= SERIES_LIMIT {
        marcum_series(a, b, z)
    } else {
        marcum_quadrature(a, b)
    }
}

// Q1 = e^{-(a-b)^2/2} e^{-ab} sum_{k>=0} (a/b)^k I_k(ab)       (a <= b)
// P1 = e^{-(a-b)^2/2} e^{-ab} sum_{k>=1} (b/a)^k I_k(ab)       (a >  b)
// with I_k/I_{k-1} from the backward continued-fraction recurrence.
fn marcum_series(a: f64, b: f64, z: f64) -> MarcumQ {
    let kmax = z.ceil() as usize + 60;
    let mut ratios = [0.0f64; 128];
    let mut next = 0.0;
    for k in (1..=kmax).rev() {
        let r = 1.0 / (2.0 * k as f64 / z + next);
        ratios[k] = r;
        next = r;
    }
    let prefactor = (-0.5 * (a - b) * (a - b)).exp() * i0e(z);
    let (c, mut sum) = if a <= b { (a / b, 1.0) } else { (b / a, 0.0) };
    let mut term = 1.0;
    for &r in &ratios[1..=kmax] {
        term *= c * r;
        sum += term;
        if term < 1e-16 * sum {
            break;
        }
    }
    let tail = (prefactor * sum).clamp(0.0, 1.0);
    if a <= b {
        MarcumQ { q: tail, p: 1.0 - tail }
    } else {
        MarcumQ { q: 1.0 - tail, p: tail }
    }
}

fn marcum_quadrature(a: f64, b: f64) -> MarcumQ {
    let density = |t: f64| t * (-0.5 * (t - a) * (t - a)).exp() * i0e(a * t);
    if a > b {
        let p = if a - b > QUAD_REACH {
            0.0
        } else {
            panel_integral((a - QUAD_REACH).max(0.0), b, density)
        };
        let p = p.clamp(0.0, 1.0);
        MarcumQ { q: 1.0 - p, p }
    } else {
        let q = if b - a > QUAD_REACH {
            0.0
        } else {
            panel_integral(b, b + QUAD_REACH, density)
        };
        let q = q.clamp(0.0, 1.0);
        MarcumQ { q, p: 1.0 - q }
    }
}

fn panel_integral<F: Fn(f64) -> f64>(lo: f64, hi: f64, f: F) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let rule = gauss_legendre_12();
    let panels = (hi - lo).ceil().max(1.0) as usize;
    let width = (hi - lo) / panels as f64;
    (0..panels)
        .map(|i| {
            let a = lo + i as f64 * width;
            rule.integrate(a, a + width, &f)
        })
        .sum()
}

/// Gauss-Chebyshev nodes of the first kind, `t_p = cos((2p-1)pi/(2U))`.
///
/// Used as `int_{-1}^{1} g(t) dt ~ (pi/U) sum_p sqrt(1 - t_p^2) g(t_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevRule {
    nodes: Vec<f64>,
    // sqrt(1 - t_p^2), taken as sin((2p-1)pi/(2U)) to avoid cancellation
    root_weights: Vec<f64>,
}

pub fn chebyshev_rule(order: usize) -> Result<ChebyshevRule> {
    if order == 0 {
        return domain("Chebyshev rule order must be at least 1");
    }
    let u = order as f64;
    let (nodes, root_weights) = (1..=order)
        .map(|p| {
            let angle = (2 * p - 1) as f64 * PI / (2.0 * u);
            (angle.cos(), angle.sin())
        })
        .unzip();
    Ok(ChebyshevRule {
        nodes,
        root_weights,
    })
}

impl ChebyshevRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `sqrt(1 - t_p^2)` for each node.
    pub fn root_weights(&self) -> &[f64] {
        &self.root_weights
    }

    /// Full weight `(pi/U) sqrt(1 - t_p^2)` of node `p` (zero-based).
    pub fn weight(&self, p: usize) -> f64 {
        PI / self.order() as f64 * self.root_weights[p]
    }

    /// Integrates `f` over `[a, b]` through `x = a + (b - a)(t + 1)/2`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        (0..self.order())
            .map(|p| self.weight(p) * f(a + half * (self.nodes[p] + 1.0)))
            .sum::<f64>()
            * half
    }
}
