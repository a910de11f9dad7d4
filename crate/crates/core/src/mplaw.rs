//! Closed-form Marchenko–Pastur quantities.
//!
//! The limiting spectral law of `XX*/N` with aspect ratio `y = lim P/N` has
//! density `p_y(x) = √((b−x)(x−a))/(2πxy)` on `[a,b] = [(1−√y)², (1+√y)²]`
//! plus an atom of mass `1−1/y` at zero when `y > 1`. Its Stieltjes
//! transform `m_y` solves `z·y·m² + (1−z−y)·m + 1 = 0`.
//!
//! Branch selection is done by post-condition rather than by trusting any
//! fixed sign of the principal square root: both quadratic roots are formed
//! and the one with `Im(m)·Im(z) < 0` (the defining sign of a Stieltjes
//! transform of a positive measure) is kept, then the residual of the
//! quadratic is asserted. The matched square root is recovered from the
//! selected root, so the closed-form derivative stays on the same sheet.

use num_complex::Complex64;

use crate::quadrature::{integrate_finite, QuadratureConfig};
use crate::{Error, Result};

/// Aspect ratio together with the support edges of the bulk density.
#[derive(Debug, Clone, Copy)]
pub struct MPParams {
    pub y: f64,
    /// lower edge a = (1−√y)²
    pub a: f64,
    /// upper edge b = (1+√y)²
    pub b: f64,
}

impl MPParams {
    pub fn new(y: f64) -> Result<Self> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::Validation(format!("aspect ratio must be positive, got {y}")));
        }
        let s = y.sqrt();
        Ok(Self {
            y,
            a: (1.0 - s) * (1.0 - s),
            b: (1.0 + s) * (1.0 + s),
        })
    }

    /// Mass of the atom at 0 (non-zero only for y > 1).
    pub fn atom_mass(&self) -> f64 {
        if self.y > 1.0 {
            1.0 - 1.0 / self.y
        } else {
            0.0
        }
    }
}

/// Bulk density `p_y(x)`; zero outside `[a, b]`. The atom at 0 is reported
/// separately by [`MPParams::atom_mass`].
pub fn mp_density(x: f64, p: &MPParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "density evaluated at x = {x}; the atom at 0 is reported separately"
        )));
    }
    if x <= p.a || x >= p.b {
        return Ok(0.0);
    }
    Ok(((p.b - x) * (x - p.a)).sqrt() / (2.0 * std::f64::consts::PI * x * p.y))
}

/// ∫ of the bulk density over `[a, min(x,b)]` with the `x = a + (b−a)sin²φ`
/// substitution, which removes both square-root endpoints exactly.
pub fn mp_bulk_mass(x: f64, p: &MPParams, cfg: &QuadratureConfig) -> Result<f64> {
    if x <= p.a {
        return Ok(0.0);
    }
    let len = p.b - p.a;
    let phi_hi = if x >= p.b {
        std::f64::consts::FRAC_PI_2
    } else {
        (((x - p.a) / len).sqrt()).asin()
    };
    // p_y(x(φ))·x'(φ) = (b−a)²·2·sin²φ·cos²φ / (2πy·x(φ))
    let v = integrate_finite(
        |phi| {
            let (s, c) = phi.sin_cos();
            let xv = p.a + len * s * s;
            Complex64::new(len * len * 2.0 * s * s * c * c / (2.0 * std::f64::consts::PI * p.y * xv), 0.0)
        },
        0.0,
        phi_hi,
        cfg,
    )?;
    Ok(v.value.re)
}

/// Full CDF including the atom at zero.
pub fn mp_cdf(x: f64, p: &MPParams, cfg: &QuadratureConfig) -> Result<f64> {
    if x < 0.0 {
        return Ok(0.0);
    }
    Ok(p.atom_mass() + mp_bulk_mass(x, p, cfg)?)
}

fn require_nonreal(z: Complex64) -> Result<()> {
    if z.im == 0.0 {
        return Err(Error::Domain(format!(
            "Stieltjes-transform machinery needs Im z != 0, got z = {z}"
        )));
    }
    Ok(())
}

/// Tolerance on |z·y·m² + (1−z−y)·m + 1| accepted for the selected root.
const QUADRATIC_RESIDUAL_TOL: f64 = 1e-12;

/// Residual of the defining quadratic at a candidate root.
pub fn quadratic_residual(z: Complex64, y: f64, m: Complex64) -> f64 {
    (z * y * m * m + (Complex64::new(1.0 - y, 0.0) - z) * m + 1.0).norm()
}

/// Stieltjes transform and the matched square root
/// `S = 2·z·y·m − (z + y − 1)` (so `S² = (z−1−y)² − 4y` on the chosen sheet).
pub fn mp_stieltjes_with_sqrt(z: Complex64, y: f64) -> Result<(Complex64, Complex64)> {
    require_nonreal(z)?;
    if !(y > 0.0) {
        return Err(Error::Validation(format!("aspect ratio must be positive, got {y}")));
    }
    let zc = z;
    let half_b = zc + (y - 1.0); // = z + y - 1 = -(1-z-y)
    let disc = (zc - (1.0 + y)) * (zc - (1.0 + y)) - 4.0 * y;
    let root = disc.sqrt();
    let two_a = 2.0 * zc * y;
    let cands = [(half_b + root) / two_a, (half_b - root) / two_a];
    let mut best: Option<Complex64> = None;
    for &m in &cands {
        if m.im * z.im < 0.0 {
            best = Some(match best {
                // Both roots can momentarily share the sign near the support;
                // keep the one actually satisfying the quadratic.
                Some(prev) => {
                    if quadratic_residual(z, y, m) < quadratic_residual(z, y, prev) {
                        m
                    } else {
                        prev
                    }
                }
                None => m,
            });
        }
    }
    let m = best.ok_or_else(|| {
        Error::Numeric(format!(
            "no quadratic root with Im(m)·Im(z) < 0 at z = {z}, y = {y}"
        ))
    })?;
    let resid = quadratic_residual(z, y, m);
    if resid > QUADRATIC_RESIDUAL_TOL {
        return Err(Error::Numeric(format!(
            "quadratic residual {resid:e} above {QUADRATIC_RESIDUAL_TOL:e} at z = {z}, y = {y}"
        )));
    }
    let matched_sqrt = two_a * m - half_b;
    Ok((m, matched_sqrt))
}

/// Stieltjes transform `m_y(z)` of the Marchenko–Pastur law.
pub fn mp_stieltjes(z: Complex64, y: f64) -> Result<Complex64> {
    Ok(mp_stieltjes_with_sqrt(z, y)?.0)
}

/// Closed-form `d/dz [z·m_y(z)]` on the branch matched to [`mp_stieltjes`].
pub fn d_zm(z: Complex64, y: f64) -> Result<Complex64> {
    let (_, s) = mp_stieltjes_with_sqrt(z, y)?;
    Ok((1.0 + (z - (1.0 + y)) / s) / (2.0 * y))
}

/// K-slope `κ(z) = i·sgn(Im z)·z·m_y(z)`; `K(z,t) = t·κ(z)`.
///
/// `Re κ > 0` always (sign lemma for Stieltjes transforms of measures on
/// `[0,∞)`); violation means a branch error, so it is checked on every call.
pub fn kappa(z: Complex64, y: f64) -> Result<Complex64> {
    let m = mp_stieltjes(z, y)?;
    let k = Complex64::new(0.0, z.im.signum()) * z * m;
    if !(k.re > 0.0) {
        return Err(Error::Numeric(format!(
            "Re κ(z) = {} not positive at z = {z}, y = {y}; branch selection failed",
            k.re
        )));
    }
    Ok(k)
}

/// `m_y(z)` recomputed from the measure itself: adaptive quadrature of
/// `p_y(x)/(z−x)` over the bulk plus the atom contribution. Serves as the
/// independent second route for the closed form.
pub fn mp_stieltjes_via_density(z: Complex64, p: &MPParams, cfg: &QuadratureConfig) -> Result<Complex64> {
    require_nonreal(z)?;
    let len = p.b - p.a;
    let v = integrate_finite(
        |phi| {
            let (s, c) = phi.sin_cos();
            let xv = p.a + len * s * s;
            let dens = len * len * 2.0 * s * s * c * c / (2.0 * std::f64::consts::PI * p.y * xv);
            Complex64::new(dens, 0.0) / (z - xv)
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        cfg,
    )?;
    Ok(v.value + p.atom_mass() / z)
}

/// Cross-check from the companion-ratio identity
/// `m_y(z) = 1 / (z − (z/y)·m_{1/y}(z/y))`.
pub fn mp_stieltjes_via_companion(z: Complex64, y: f64) -> Result<Complex64> {
    let inner = mp_stieltjes(z / y, 1.0 / y)?;
    Ok(1.0 / (z - z / y * inner))
}
