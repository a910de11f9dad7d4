//! Unit-variance two-sided Pareto law with tail index `α ∈ (2,4)`, its
//! deterministic stream sampler, the `N^β` truncation/centering transform,
//! and the truncated characteristic function `φ_N`.
//!
//! The law is `Z = S·x_m·U^{−1/α}` with `S` a fair sign and `U` uniform on
//! `(0,1)`, so `P(|Z| > x) = x_m^α x^{−α}` for `x ≥ x_m` exactly (slowly
//! varying part ≡ 1). `x_m = √((α−2)/α)` makes the variance one, and the
//! tail constant in the `−c/(Γ(1−α/2) x^α)` convention is
//! `c = −Γ(1−α/2)·x_m^α > 0`; it reappears as the prefactor of the
//! covariance kernel.
//!
//! μ_N is identically zero for this symmetric law but is carried through the
//! pipeline so an asymmetric distribution can be swapped in.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::quadrature::{integrate_finite, QuadratureConfig};
use crate::special::{cexpm1m, gamma};
use crate::{Error, Result};

/// Regularly-varying distribution with unit variance: tail index `alpha`,
/// Pareto scale `x_m`, tail constant `c`, and the base RNG seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTailSpec {
    pub alpha: f64,
    pub x_m: f64,
    pub c: f64,
    pub seed: u64,
}

impl HeavyTailSpec {
    pub fn new(alpha: f64, seed: u64) -> Result<Self> {
        if !(alpha > 2.0 && alpha < 4.0) {
            return Err(Error::Validation(format!(
                "tail index must satisfy 2 < alpha < 4, got {alpha}"
            )));
        }
        let x_m = ((alpha - 2.0) / alpha).sqrt();
        let c = -gamma(1.0 - alpha / 2.0) * x_m.powf(alpha);
        let spec = Self { alpha, x_m, c, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 2.0 && self.alpha < 4.0) {
            return Err(Error::Validation(format!(
                "tail index must satisfy 2 < alpha < 4, got {}",
                self.alpha
            )));
        }
        let x_m = ((self.alpha - 2.0) / self.alpha).sqrt();
        if (self.x_m - x_m).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "x_m = {} violates the unit-variance normalization {x_m}",
                self.x_m
            )));
        }
        let c = -gamma(1.0 - self.alpha / 2.0) * x_m.powf(self.alpha);
        if !(self.c > 0.0) || (self.c - c).abs() > 1e-12 * c {
            return Err(Error::Validation(format!(
                "tail constant {} inconsistent with −Γ(1−α/2)·x_m^α = {c}",
                self.c
            )));
        }
        Ok(())
    }

    /// `P(|Z| > x)`.
    pub fn tail_prob(&self, x: f64) -> f64 {
        if x <= self.x_m {
            1.0
        } else {
            (self.x_m / x).powf(self.alpha)
        }
    }

    /// Density of `Z` (symmetric, supported on `|x| ≥ x_m`).
    pub fn density(&self, x: f64) -> f64 {
        let ax = x.abs();
        if ax < self.x_m {
            0.0
        } else {
            0.5 * self.alpha * self.x_m.powf(self.alpha) * ax.powf(-self.alpha - 1.0)
        }
    }
}

/// Truncation exponent and the analytic moments of the truncated entries for
/// one matrix width `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    /// β = 1/4 + 1/α + ε
    pub beta: f64,
    pub epsilon: f64,
    /// E[x·1_{|x|<N^β}] — identically 0 for the symmetric law.
    pub mu_n: f64,
    /// E[x̂²]
    pub sigma_n_sq: f64,
    /// width this spec was built for
    pub n_width: usize,
}

impl TruncationSpec {
    /// Builds the truncation data for matrix width `n`, checking the slack
    /// inequality `−1/2 + (2/α − α/8 − 1/2) + ε(4−α)/2 < 1 − α/2`.
    pub fn for_width(spec: &HeavyTailSpec, epsilon: f64, n: usize) -> Result<Self> {
        spec.validate()?;
        if !(epsilon > 0.0) {
            return Err(Error::Validation(format!("epsilon must be positive, got {epsilon}")));
        }
        let a = spec.alpha;
        let lhs = -0.5 + (2.0 / a - a / 8.0 - 0.5) + epsilon * (4.0 - a) / 2.0;
        if !(lhs < 1.0 - a / 2.0) {
            return Err(Error::Validation(format!(
                "epsilon = {epsilon} too large for alpha = {a}: slack inequality fails ({lhs} >= {})",
                1.0 - a / 2.0
            )));
        }
        if n == 0 {
            return Err(Error::Validation("matrix width must be at least 1".into()));
        }
        let beta = 0.25 + 1.0 / a + epsilon;
        let m = truncated_moments_unchecked(spec, beta, n);
        Ok(Self {
            beta,
            epsilon,
            mu_n: m.mu_n,
            sigma_n_sq: m.sigma_n_sq,
            n_width: n,
        })
    }

    /// Truncation threshold `N^β`.
    pub fn threshold(&self, n: usize) -> f64 {
        (n as f64).powf(self.beta)
    }
}

/// Moments of the truncated entry plus the measured constants of the
/// `|σ_N²−1| ≤ κ N^{β(2−α)}` and `m₄ ≤ κ N^{β(4−α)}` bounds.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedMoments {
    pub mu_n: f64,
    pub sigma_n_sq: f64,
    pub m3: f64,
    pub m4: f64,
    pub kappa_var: f64,
    pub kappa_m4: f64,
}

fn truncated_moments_unchecked(spec: &HeavyTailSpec, beta: f64, n: usize) -> TruncatedMoments {
    let a = spec.alpha;
    let xm = spec.x_m;
    let t = (n as f64).powf(beta);
    if t <= xm {
        // entire mass truncated away; the centred entry is identically 0
        return TruncatedMoments {
            mu_n: 0.0,
            sigma_n_sq: 0.0,
            m3: 0.0,
            m4: 0.0,
            kappa_var: 0.0,
            kappa_m4: 0.0,
        };
    }
    let xa = xm.powf(a);
    // E[|x|^k 1_{|x|<T}] = α x_m^α (T^{k−α} − x_m^{k−α})/(k−α), k ≠ α
    let partial = |k: f64| -> f64 {
        if (k - a).abs() < 1e-12 {
            a * xa * (t / xm).ln()
        } else {
            a * xa * (t.powf(k - a) - xm.powf(k - a)) / (k - a)
        }
    };
    let sigma = partial(2.0);
    let m3 = partial(3.0);
    let m4 = partial(4.0);
    let nf = n as f64;
    TruncatedMoments {
        mu_n: 0.0,
        sigma_n_sq: sigma,
        m3,
        m4,
        kappa_var: (sigma - 1.0).abs() / nf.powf(beta * (2.0 - a)),
        kappa_m4: m4 / nf.powf(beta * (4.0 - a)),
    }
}

/// Closed-form moments of the truncated, centred entry for width `n`.
pub fn truncated_moments(spec: &HeavyTailSpec, trunc: &TruncationSpec, n: usize) -> Result<TruncatedMoments> {
    spec.validate()?;
    if n != trunc.n_width {
        return Err(Error::Validation(format!(
            "truncation spec was built for width {}, asked about width {n}",
            trunc.n_width
        )));
    }
    Ok(truncated_moments_unchecked(spec, trunc.beta, n))
}

/// ChaCha stream for one `(seed, stream_id)` pair; the counter-based design
/// makes parallel replicas bit-reproducible regardless of scheduling.
fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Fills `out` with i.i.d. draws from the stream `(spec.seed, stream_id)`.
pub fn sample_into(spec: &HeavyTailSpec, out: &mut [f64], stream_id: u64) {
    let mut rng = stream_rng(spec.seed, stream_id);
    let inv_alpha = 1.0 / spec.alpha;
    for v in out.iter_mut() {
        let u: f64 = rng.sample(rand::distributions::Open01);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        *v = sign * spec.x_m * u.powf(-inv_alpha);
    }
}

/// `n` i.i.d. draws `Z = S·x_m·U^{−1/α}`; deterministic given
/// `(spec.seed, stream_id)`.
pub fn sample(spec: &HeavyTailSpec, n: usize, stream_id: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::EmptyRequest("asked for 0 samples".into()));
    }
    let mut out = vec![0.0; n];
    sample_into(spec, &mut out, stream_id);
    Ok(out)
}

/// In-place `x ↦ x·1_{|x|<N^β} − μ_N`; output is bounded by `N^β + |μ_N|`,
/// asserted on every batch.
pub fn truncate_center_in_place(values: &mut [f64], n: usize, trunc: &TruncationSpec) -> Result<()> {
    if n == 0 {
        return Err(Error::Validation("matrix width must be at least 1".into()));
    }
    if n != trunc.n_width {
        return Err(Error::Validation(format!(
            "truncation spec was built for width {}, applied at width {n}",
            trunc.n_width
        )));
    }
    let threshold = trunc.threshold(n);
    let bound = threshold + trunc.mu_n.abs();
    for v in values.iter_mut() {
        let kept = if v.abs() < threshold { *v } else { 0.0 };
        *v = kept - trunc.mu_n;
        debug_assert!(v.abs() <= bound);
        if v.abs() > bound {
            return Err(Error::Numeric(format!(
                "truncated entry {v} exceeds the bound N^β + |μ_N| = {bound}"
            )));
        }
    }
    Ok(())
}

/// Pure version of [`truncate_center_in_place`].
pub fn truncate_center(values: &[f64], n: usize, trunc: &TruncationSpec) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    truncate_center_in_place(&mut out, n, trunc)?;
    Ok(out)
}

fn phi_integral<K>(spec: &HeavyTailSpec, trunc: &TruncationSpec, n: usize, kernel: K) -> Result<Complex64>
where
    K: Fn(Complex64) -> Complex64,
{
    // ∫_{x_m}^{T} kernel(−iλx²/N)·α x_m^α x^{−α−1} dx on a log grid:
    // x = e^v makes the integrand smooth and well-scaled for Gauss–Kronrod.
    let t = trunc.threshold(n);
    if t <= spec.x_m {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let a = spec.alpha;
    let pref = a * spec.x_m.powf(a);
    let cfg = QuadratureConfig::with_tols(1e-13, 1e-16);
    let r = integrate_finite(
        |v: f64| {
            let x = v.exp();
            kernel(Complex64::new(x * x / n as f64, 0.0)) * pref * (-a * v).exp()
        },
        spec.x_m.ln(),
        t.ln(),
        &cfg,
    )?;
    Ok(r.value)
}

/// Truncated characteristic function
/// `φ_N(λ) = E[exp(−i·|x̂/√N|²·λ)]`, for `Im λ ≤ 0`, by deterministic
/// quadrature against the truncated density.
pub fn phi_n(lambda: Complex64, spec: &HeavyTailSpec, trunc: &TruncationSpec, n: usize) -> Result<Complex64> {
    if lambda.im > 0.0 {
        return Err(Error::Domain(format!(
            "phi_N needs Im λ ≤ 0 (integrand unbounded otherwise), got λ = {lambda}"
        )));
    }
    spec.validate()?;
    let minus_i_lambda = Complex64::new(0.0, -1.0) * lambda;
    // mass at x̂ = 0 (truncated-away entries) contributes exp(0) = 1
    let tail_mass = spec.tail_prob(trunc.threshold(n));
    let v = phi_integral(spec, trunc, n, |u| (minus_i_lambda * u.re).exp())?;
    let phi = tail_mass + v;
    if phi.norm() > 1.0 + 1e-10 {
        return Err(Error::Numeric(format!(
            "|φ_N| = {} exceeds 1 at λ = {lambda}",
            phi.norm()
        )));
    }
    Ok(phi)
}

/// Residual of the characteristic-function expansion,
/// `φ_N(λ) − [1 − iλσ_N²/N + c(iλσ_N²)^{α/2}/N^{α/2}]`,
/// computed in a cancellation-free form: the `1` and the `iλσ²/N` terms are
/// folded into the integrand analytically before quadrature.
pub fn phi_n_expansion_residual(
    lambda: Complex64,
    spec: &HeavyTailSpec,
    trunc: &TruncationSpec,
    n: usize,
) -> Result<Complex64> {
    if lambda.im > 0.0 {
        return Err(Error::Domain(format!(
            "phi_N needs Im λ ≤ 0, got λ = {lambda}"
        )));
    }
    spec.validate()?;
    let moments = truncated_moments(spec, trunc, n)?;
    let sigma2 = moments.sigma_n_sq;
    let minus_i_lambda = Complex64::new(0.0, -1.0) * lambda;
    // φ_N − 1 + iλσ_N²/N = α x_m^α ∫ (e^{−iλx²/N} − 1 + iλx²/N) x^{−α−1} dx
    // (the truncated tail mass cancels against the distribution's own tail,
    // and the σ² term is the same integral of iλx²/N).
    let core = phi_integral(spec, trunc, n, |u| cexpm1m(minus_i_lambda * u.re))?;
    let i_lambda_sigma = Complex64::new(0.0, 1.0) * lambda * sigma2;
    let leading = spec.c * i_lambda_sigma.powf(spec.alpha / 2.0) / (n as f64).powf(spec.alpha / 2.0);
    Ok(core - leading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn spec3() -> HeavyTailSpec {
        HeavyTailSpec::new(3.0, 7).unwrap()
    }

    #[test]
    fn normalization_reference_values() {
        let s = spec3();
        // x_m solves α·x_m²/(α−2) = 1
        assert_relative_eq!(s.x_m, (1.0f64 / 3.0).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(s.x_m, 0.577350, max_relative = 1e-6);
        assert_relative_eq!(s.alpha * s.x_m * s.x_m / (s.alpha - 2.0), 1.0, max_relative = 1e-14);
        // c = −Γ(−1/2)·x_m³ = 2√π·(1/3)^{3/2}
        assert_relative_eq!(s.c, 2.0 * std::f64::consts::PI.sqrt() * (1.0f64 / 3.0).powf(1.5), max_relative = 1e-13);
        assert_relative_eq!(s.c, 0.6822178052976590, max_relative = 1e-13);
    }

    #[test]
    fn spec_validation() {
        assert!(HeavyTailSpec::new(2.0, 0).is_err());
        assert!(HeavyTailSpec::new(4.0, 0).is_err());
        assert!(HeavyTailSpec::new(f64::NAN, 0).is_err());
        let mut s = spec3();
        s.x_m = 0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn sampler_contract() {
        let s = spec3();
        assert!(matches!(sample(&s, 0, 0), Err(Error::EmptyRequest(_))));
        let v = sample(&s, 10_000, 3).unwrap();
        assert!(v.iter().all(|x| x.abs() >= s.x_m));
        // determinism per (seed, stream)
        let w = sample(&s, 10_000, 3).unwrap();
        assert_eq!(v, w);
        let u = sample(&s, 10_000, 4).unwrap();
        assert_ne!(v, u);
        let other_seed = HeavyTailSpec::new(3.0, 8).unwrap();
        assert_ne!(sample(&other_seed, 16, 3).unwrap(), sample(&s, 16, 3).unwrap());
    }

    #[test]
    fn empirical_tail_three_sigma() {
        let s = spec3();
        let m = 1_000_000usize;
        let v = sample(&s, m, 11).unwrap();
        for &x in &[1.0, 2.0, 5.0] {
            let p = s.tail_prob(x);
            let hits = v.iter().filter(|z| z.abs() > x).count() as f64;
            let se = (p * (1.0 - p) / m as f64).sqrt();
            assert!(
                (hits / m as f64 - p).abs() <= 3.0 * se,
                "tail at x={x}: observed {} vs {p} (3se = {})",
                hits / m as f64,
                3.0 * se
            );
        }
    }

    #[test]
    fn empirical_variance_bands() {
        for (alpha, tol) in [(3.5, 0.05), (2.5, 0.15)] {
            let s = HeavyTailSpec::new(alpha, 0).unwrap();
            let v = sample(&s, 1_000_000, 1).unwrap();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64;
            assert!(
                (var - 1.0).abs() <= tol,
                "variance {var} outside ±{tol} at alpha={alpha}"
            );
        }
    }

    #[test]
    fn truncation_spec_values() {
        let s = spec3();
        let t = TruncationSpec::for_width(&s, 0.01, 1000).unwrap();
        assert_relative_eq!(t.beta, 0.25 + 1.0 / 3.0 + 0.01, max_relative = 1e-15);
        assert_relative_eq!(t.beta, 0.593333, max_relative = 1e-6);
        assert_eq!(t.mu_n, 0.0);
        assert!(t.sigma_n_sq < 1.0 && t.sigma_n_sq > 0.9);
        assert!(TruncationSpec::for_width(&s, -0.1, 1000).is_err());
        // epsilon large enough to break the slack inequality
        assert!(TruncationSpec::for_width(&s, 2.0, 1000).is_err());
    }

    #[test]
    fn truncate_center_behaviour() {
        let s = spec3();
        let n = 100;
        let t = TruncationSpec::for_width(&s, 0.01, n).unwrap();
        let thr = t.threshold(n);
        let out = truncate_center(&[thr + 1.0, -(thr + 5.0), 0.3, -0.3], n, &t).unwrap();
        // symmetric law: μ_N = 0, killed entries map to exactly 0
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], 0.0);
        assert_eq!(out[2], 0.3);
        assert_eq!(out[3], -0.3);
        assert!(truncate_center(&[1.0], n + 1, &t).is_err());
    }

    proptest! {
        #[test]
        fn truncate_center_bound_property(raw in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let s = HeavyTailSpec::new(2.7, 0).unwrap();
            let n = 50;
            let t = TruncationSpec::for_width(&s, 0.02, n).unwrap();
            let out = truncate_center(&raw, n, &t).unwrap();
            let bound = t.threshold(n) + t.mu_n.abs();
            prop_assert!(out.iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn moments_match_quadrature_oracle() {
        let s = spec3();
        let n = 10_000;
        let t = TruncationSpec::for_width(&s, 0.01, n).unwrap();
        let m = truncated_moments(&s, &t, n).unwrap();
        assert_eq!(m.mu_n, 0.0);
        // oracle: adaptive quadrature of x^k against the density over the window
        let cfg = QuadratureConfig::with_tols(1e-12, 1e-15);
        let thr = t.threshold(n);
        for (k, closed) in [(2.0, m.sigma_n_sq), (3.0, m.m3), (4.0, m.m4)] {
            let q = integrate_finite(
                |x| Complex64::new(2.0 * x.powf(k) * s.density(x), 0.0),
                s.x_m,
                thr,
                &cfg,
            )
            .unwrap();
            assert_relative_eq!(q.value.re, closed, max_relative = 1e-8);
        }
        assert!(m.m4.is_finite() && m.m4 > 0.0);
    }

    #[test]
    fn sigma_tends_to_one_with_stated_rate() {
        let s = spec3();
        let mut kappas = Vec::new();
        for n in [100usize, 10_000, 1_000_000] {
            let t = TruncationSpec::for_width(&s, 0.01, n).unwrap();
            let m = truncated_moments(&s, &t, n).unwrap();
            kappas.push(m.kappa_var);
            assert!((m.sigma_n_sq - 1.0).abs() < 0.2);
        }
        assert!((kappas[2] - 1.0).abs() > 0.0); // measured constant is finite…
        assert!((kappas[0] - kappas[2]).abs() <= 1e-9 * kappas[0]); // …and N-independent
        let t6 = TruncationSpec::for_width(&s, 0.01, 1_000_000).unwrap();
        let t2 = TruncationSpec::for_width(&s, 0.01, 100).unwrap();
        assert!((t6.sigma_n_sq - 1.0).abs() < (t2.sigma_n_sq - 1.0).abs());
    }

    #[test]
    fn phi_basics() {
        let s = spec3();
        let n = 1000;
        let t = TruncationSpec::for_width(&s, 0.01, n).unwrap();
        let one = phi_n(Complex64::new(0.0, 0.0), &s, &t, n).unwrap();
        assert!((one - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        // λ = −i·t, t > 0: positive integrand strictly below 1
        for tt in [0.5, 2.0, 10.0] {
            let v = phi_n(Complex64::new(0.0, -tt), &s, &t, n).unwrap();
            assert!(v.im.abs() < 1e-13);
            assert!(v.re > 0.0 && v.re <= 1.0);
        }
        assert!(phi_n(Complex64::new(1.0, 0.5), &s, &t, n).is_err());
        let v = phi_n(Complex64::new(1.0, -1.0), &s, &t, n).unwrap();
        assert!(v.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn phi_expansion_residual_shrinks() {
        let s = spec3();
        let lambda = Complex64::new(1.0, -1.0);
        let mut scaled = Vec::new();
        for n in [1000usize, 10_000, 100_000] {
            let t = TruncationSpec::for_width(&s, 0.01, n).unwrap();
            let r = phi_n_expansion_residual(lambda, &s, &t, n).unwrap();
            scaled.push(r.norm() * (n as f64).powf(s.alpha / 2.0));
        }
        assert!(
            scaled[1] < scaled[0] && scaled[2] < scaled[1],
            "scaled residuals not decreasing: {scaled:?}"
        );
    }
}
