//! Real gamma function and small stable helpers shared by the kernel and
//! characteristic-function code.

use num_complex::Complex64;

/// Lanczos coefficients, g = 7, n = 9 (GNU Scientific Library set).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_P: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Γ(x) for real x via Lanczos approximation, reflection formula for x < 1/2.
///
/// Poles at non-positive integers return NaN. The kernel only ever needs
/// Γ(−α/2), Γ(1±α/2) and similar off-integer arguments with 2 < α < 4.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        if x == x.floor() {
            return f64::NAN;
        }
        // Γ(x)Γ(1−x) = π / sin(πx)
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let z = x - 1.0;
    let mut acc = LANCZOS_P[0];
    for (i, p) in LANCZOS_P.iter().enumerate().skip(1) {
        acc += p / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// exp(x) − 1 for complex x, accurate near 0.
pub fn cexpm1(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        // Taylor series; 16 terms leave a remainder below 2^-53 at |x| = 0.5.
        let mut term = x;
        let mut sum = x;
        for k in 2..=16 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp() - Complex64::new(1.0, 0.0)
    }
}

/// exp(x) − 1 − x for complex x, accurate near 0 (quadratic-order remainder).
pub fn cexpm1m(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for k in 3..=18 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp() - Complex64::new(1.0, 0.0) - x
    }
}
