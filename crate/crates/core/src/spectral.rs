//! Sample covariance matrices, their spectra and resolvent quantities, and
//! the exact finite-N resolvent identities used as hard test oracles.
//!
//! A replica is the `P×N` matrix `X` with i.i.d. heavy-tailed entries
//! (optionally truncated and centred); the object of study is
//! `A = XXᵀ/N` and its resolvent `G(z) = (z − A)^{-1}`.
//!
//! Large-`P` work goes through one symmetric eigendecomposition per replica
//! (trace resolvents are then `O(P)` per grid point); full resolvent matrices
//! are only formed at small `P` for the identity checks.

use std::sync::Once;

use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{EigValsh, Eigh, SVD, UPLO};
use num_complex::Complex64;

use crate::heavytail::{sample_into, truncate_center_in_place, HeavyTailSpec, TruncationSpec};
use crate::{Error, Result};

extern "C" {
    fn openblas_set_num_threads(num: i32);
}

static BLAS_PIN: Once = Once::new();

/// Replica-level parallelism lives in the caller; BLAS is pinned to one
/// thread so results are bit-identical for every `--threads` setting.
fn pin_blas() {
    BLAS_PIN.call_once(|| unsafe { openblas_set_num_threads(1) });
}

/// Matrix-entry budget guard (≈1 GiB of f64).
const MAX_ENTRIES: usize = 1 << 27;

/// Dimensions, target aspect ratio and entry distribution of one ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub p: usize,
    pub n: usize,
    pub y_target: f64,
    pub dist: HeavyTailSpec,
    pub truncate: bool,
    pub trunc: Option<TruncationSpec>,
}

impl EnsembleSpec {
    /// `P = round(y_target · N)`; the truncation spec is built for this `N`
    /// when truncation is on.
    pub fn new(
        n: usize,
        y_target: f64,
        dist: HeavyTailSpec,
        truncate: bool,
        epsilon: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("need N ≥ 1".into()));
        }
        if !(y_target > 0.0) || !y_target.is_finite() {
            return Err(Error::Validation(format!(
                "aspect ratio target must be positive, got {y_target}"
            )));
        }
        dist.validate()?;
        let p = (y_target * n as f64).round() as usize;
        if p == 0 {
            return Err(Error::Validation(format!(
                "P = round({y_target}·{n}) = 0; increase N or y"
            )));
        }
        if n >= (1usize << 32) || p.checked_mul(n).map_or(true, |e| e > MAX_ENTRIES) {
            return Err(Error::Resource(format!("matrix {p}×{n} exceeds the entry budget")));
        }
        let trunc = if truncate {
            Some(TruncationSpec::for_width(&dist, epsilon, n)?)
        } else {
            None
        };
        Ok(Self {
            p,
            n,
            y_target,
            dist,
            truncate,
            trunc,
        })
    }
}

/// Sorted spectrum of one replica.
#[derive(Debug, Clone)]
pub struct SpectralSample {
    /// ascending, all ≥ 0 up to round-off
    pub eigenvalues: Vec<f64>,
    pub p: usize,
    pub n: usize,
    pub replica_id: u64,
}

/// Stream id for one `(replica, column)` pair; deterministic parallel fills.
fn column_stream(replica_id: u64, column: usize) -> u64 {
    (replica_id << 32) | column as u64
}

/// Draws the raw `P×N` data matrix for one replica, applying the truncation
/// transform when the spec asks for it.
pub fn build_matrix(spec: &EnsembleSpec, replica_id: u64) -> Result<Array2<f64>> {
    pin_blas();
    if replica_id >= (1u64 << 32) {
        return Err(Error::Validation(format!(
            "replica id {replica_id} exceeds the stream layout (need < 2^32)"
        )));
    }
    let (p, n) = (spec.p, spec.n);
    let mut data = vec![0.0f64; p * n];
    for j in 0..n {
        sample_into(
            &spec.dist,
            &mut data[j * p..(j + 1) * p],
            column_stream(replica_id, j),
        );
    }
    if let Some(trunc) = &spec.trunc {
        truncate_center_in_place(&mut data, n, trunc)?;
    }
    Array2::from_shape_vec((p, n).f(), data)
        .map_err(|e| Error::Numeric(format!("matrix shape error: {e}")))
}

fn sym_eigvalsh(a: &Array2<f64>, context: &str) -> Result<Vec<f64>> {
    let mut vals: Vec<f64> = a
        .eigvalsh(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed in {context}: {e}")))?
        .to_vec();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn sym_eigh(a: &Array2<f64>, context: &str) -> Result<(Array1<f64>, Array2<f64>)> {
    a.eigh(UPLO::Lower)
        .map_err(|e| Error::Numeric(format!("eigensolver failed in {context}: {e}")))
}

/// Covariance matrix `A = X Xᵀ / N` of a data matrix.
pub fn covariance_matrix(x: &Array2<f64>, n: usize) -> Array2<f64> {
    pin_blas();
    x.dot(&x.t()) / n as f64
}

/// Eigenvalues of `X Xᵀ / N`, ascending.
pub fn spectrum(x: &Array2<f64>, n: usize, replica_id: u64) -> Result<SpectralSample> {
    if x.is_empty() {
        return Err(Error::Validation("spectrum of an empty matrix".into()));
    }
    if n == 0 {
        return Err(Error::Validation("need N ≥ 1".into()));
    }
    let a = covariance_matrix(x, n);
    let eigenvalues = sym_eigvalsh(&a, "spectrum")?;
    Ok(SpectralSample {
        eigenvalues,
        p: x.nrows(),
        n,
        replica_id,
    })
}

/// Trace resolvent `Σ_i 1/(z−λ_i)` and its normalized version
/// `(1/P)·Tr G`; the latter is the Stieltjes transform of the empirical
/// spectral measure and obeys `|·| ≤ 1/|Im z|`.
pub fn stieltjes_empirical(sample: &SpectralSample, z: Complex64) -> Result<(Complex64, Complex64)> {
    if z.im == 0.0 {
        return Err(Error::Domain(format!("need Im z ≠ 0, got z = {z}")));
    }
    let mut tr = Complex64::new(0.0, 0.0);
    for &lam in &sample.eigenvalues {
        tr += 1.0 / (z - lam);
    }
    let normalized = tr / sample.p as f64;
    if normalized.norm() > 1.0 / z.im.abs() + 1e-9 {
        return Err(Error::Numeric(format!(
            "|Tr G|/P = {} exceeds 1/|Im z| at z = {z}",
            normalized.norm()
        )));
    }
    Ok((tr, normalized))
}

/// Full resolvent `G = (z − XXᵀ/N)^{-1}` assembled from the real symmetric
/// eigendecomposition. Meant for small `P` identity checks; the residual
/// `‖(z−A)G − Id‖_max ≤ 1e−8` is verified before returning.
pub fn resolvent_entries(x: &Array2<f64>, n: usize, z: Complex64) -> Result<Array2<Complex64>> {
    if z.im == 0.0 {
        return Err(Error::Domain(format!("need Im z ≠ 0, got z = {z}")));
    }
    let a = covariance_matrix(x, n);
    let p = a.nrows();
    let (vals, vecs) = sym_eigh(&a, "resolvent_entries")?;
    let mut g = Array2::<Complex64>::zeros((p, p));
    for k in 0..p {
        let w = 1.0 / (z - vals[k]);
        for i in 0..p {
            let vik = vecs[(i, k)];
            if vik == 0.0 {
                continue;
            }
            for j in 0..p {
                g[(i, j)] += w * vik * vecs[(j, k)];
            }
        }
    }
    // residual check against the defining equation
    let mut max_resid = 0.0f64;
    for i in 0..p {
        for j in 0..p {
            let mut acc = z * g[(i, j)];
            for k in 0..p {
                acc -= a[(i, k)] * g[(k, j)];
            }
            if i == j {
                acc -= 1.0;
            }
            max_resid = max_resid.max(acc.norm());
        }
    }
    if max_resid > 1e-8 {
        return Err(Error::Numeric(format!(
            "resolvent residual ‖(z−A)G − Id‖_max = {max_resid:e} above 1e-8"
        )));
    }
    Ok(g)
}

/// Largest row violation of the Ward identity
/// `Σ_j |G_ij|² = −Im(G_ii)/Im z`.
pub fn ward_max_residual(g: &Array2<Complex64>, z: Complex64) -> f64 {
    let p = g.nrows();
    let mut worst = 0.0f64;
    for i in 0..p {
        let lhs: f64 = (0..p).map(|j| g[(i, j)].norm_sqr()).sum();
        let rhs = -g[(i, i)].im / z.im;
        worst = worst.max((lhs - rhs).abs());
    }
    worst
}

/// Largest diagonal magnitude; bounded by `1/|Im z|` for Hermitian matrices.
pub fn diag_max_abs(g: &Array2<Complex64>) -> f64 {
    (0..g.nrows()).map(|i| g[(i, i)].norm()).fold(0.0, f64::max)
}

/// Sign lemma: `sgn Im(z·Tr G) = −sgn Im z` for `A = XXᵀ/N`.
pub fn trace_sign_ok(g: &Array2<Complex64>, z: Complex64) -> bool {
    let tr: Complex64 = (0..g.nrows()).map(|i| g[(i, i)]).sum();
    ((z * tr).im).signum() == -z.im.signum()
}

/// Outcome of the resolvent-vs-rank comparison.
#[derive(Debug, Clone, Copy)]
pub struct RankCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub rank: usize,
    pub holds: bool,
}

/// `|Tr G_{XXᵀ/N}(z) − Tr G_{X̂X̂ᵀ/N}(z)| ≤ π·rank(X−X̂)/|Im z|`, the bound
/// that justifies truncation. Rank by singular-value thresholding at
/// `1e−10·σ_max`.
pub fn check_rank_inequality(x: &Array2<f64>, x_hat: &Array2<f64>, z: Complex64) -> Result<RankCheck> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Validation(format!(
            "shape mismatch: {:?} vs {:?}",
            x.dim(),
            x_hat.dim()
        )));
    }
    if z.im == 0.0 {
        return Err(Error::Domain(format!("need Im z ≠ 0, got z = {z}")));
    }
    pin_blas();
    let n = x.ncols();
    let tr = |m: &Array2<f64>| -> Result<Complex64> {
        let sample = spectrum(m, n, 0)?;
        Ok(stieltjes_empirical(&sample, z)?.0)
    };
    let lhs = (tr(x)? - tr(x_hat)?).norm();
    let diff = x - x_hat;
    let (_, sv, _) = diff
        .svd(false, false)
        .map_err(|e| Error::Numeric(format!("SVD failed in rank check: {e}")))?;
    let smax = sv.iter().cloned().fold(0.0f64, f64::max);
    let rank = sv.iter().filter(|&&s| s > 1e-10 * smax).count();
    let rhs = std::f64::consts::PI * rank as f64 / z.im.abs();
    Ok(RankCheck {
        lhs,
        rhs,
        rank,
        holds: lhs <= rhs + 1e-8,
    })
}

/// Outcome of the per-column diagonal resolvent identity, in the unscaled
/// form exactly as stated and in the `1/N`-scaled form that appears in the
/// martingale decomposition. Both must agree to `1e−8` relative.
#[derive(Debug, Clone, Copy)]
pub struct DiagIdentityCheck {
    pub lhs_unscaled: Complex64,
    pub rhs_unscaled: Complex64,
    pub lhs_scaled: Complex64,
    pub rhs_scaled: Complex64,
    pub rel_err_unscaled: f64,
    pub rel_err_scaled: f64,
    pub holds: bool,
}

/// Checks `(z − XᵀX)^{-1}_{ii} = 1/(z − x_iᵀ·[z·(z − (XXᵀ − x_i x_iᵀ))^{-1}]·x_i)`
/// for column `i`, plus the same identity for `XᵀX/N`.
pub fn check_diagonal_identity(
    x: &Array2<f64>,
    n: usize,
    z: Complex64,
    col: usize,
) -> Result<DiagIdentityCheck> {
    if z.im == 0.0 {
        return Err(Error::Domain(format!("need Im z ≠ 0, got z = {z}")));
    }
    if col >= x.ncols() {
        return Err(Error::Validation(format!(
            "column {col} out of range for a matrix with {} columns",
            x.ncols()
        )));
    }
    if n == 0 {
        return Err(Error::Validation("need N ≥ 1".into()));
    }
    pin_blas();
    let nf = n as f64;
    let xi = x.column(col).to_owned();

    // lhs: diagonal entries of (z − XᵀX)^{-1} via the N×N companion spectrum
    let gram = x.t().dot(x);
    let (mu, w) = sym_eigh(&gram, "diagonal identity (gram)")?;
    let mut lhs_unscaled = Complex64::new(0.0, 0.0);
    let mut lhs_scaled = Complex64::new(0.0, 0.0);
    for k in 0..mu.len() {
        let wk = w[(col, k)];
        lhs_unscaled += wk * wk / (z - mu[k]);
        lhs_scaled += wk * wk / (z - mu[k] / nf);
    }

    // rhs: quadratic form against the rank-one-deflated P×P matrix
    let b = x.dot(&x.t())
        - &xi
            .view()
            .insert_axis(ndarray::Axis(1))
            .dot(&xi.view().insert_axis(ndarray::Axis(0)));
    let (nu, v) = sym_eigh(&b, "diagonal identity (deflated)")?;
    let proj = v.t().dot(&xi);
    let mut q_unscaled = Complex64::new(0.0, 0.0);
    let mut q_scaled = Complex64::new(0.0, 0.0);
    for k in 0..nu.len() {
        let c2 = proj[k] * proj[k];
        q_unscaled += c2 / (z - nu[k]);
        q_scaled += c2 / (z - nu[k] / nf);
    }
    let rhs_unscaled = 1.0 / (z - z * q_unscaled);
    let rhs_scaled = 1.0 / (z - z / nf * q_scaled);

    let rel = |a: Complex64, b: Complex64| (a - b).norm() / a.norm().max(1e-300);
    let rel_err_unscaled = rel(lhs_unscaled, rhs_unscaled);
    let rel_err_scaled = rel(lhs_scaled, rhs_scaled);
    Ok(DiagIdentityCheck {
        lhs_unscaled,
        rhs_unscaled,
        lhs_scaled,
        rhs_scaled,
        rel_err_unscaled,
        rel_err_scaled,
        holds: rel_err_unscaled <= 1e-8 && rel_err_scaled <= 1e-8,
    })
}
