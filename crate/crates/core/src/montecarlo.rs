//! Replica engine estimating the distribution and covariance of the scaled
//! trace-resolvent fluctuations
//! `θ_N(z) = N^{α/4−1}·(Tr G(z) − E Tr G(z))`, for a single sample
//! covariance matrix and for pairs of overlapping submatrices drawn from the
//! same data matrix.
//!
//! The expectation is centred by the replica sample mean (no closed finite-N
//! form exists), which the `(M−1)` denominator corrects at `O(1/M)`.
//! Replicas are embarrassingly parallel; the reduction is indexed, so results
//! are bit-identical for every thread count.

use ndarray::Axis;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::kernel::OverlapParams;
use crate::mplaw::{mp_cdf, MPParams};
use crate::quadrature::QuadratureConfig;
use crate::spectral::{build_matrix, spectrum, EnsembleSpec, SpectralSample};
use crate::{Error, Result};

/// Explicit row/column index subsets defining two overlapping submatrices.
#[derive(Debug, Clone)]
pub struct OverlapIndexSets {
    pub rows_i: Vec<usize>,
    pub rows_j: Vec<usize>,
    pub cols_i: Vec<usize>,
    pub cols_j: Vec<usize>,
}

fn check_subset(name: &str, set: &[usize], limit: usize) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Validation(format!("overlap set {name} is empty")));
    }
    let mut seen = set.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != set.len() {
        return Err(Error::Validation(format!("overlap set {name} has duplicate indices")));
    }
    if *seen.last().unwrap() >= limit {
        return Err(Error::Validation(format!(
            "overlap set {name} has index {} out of range (< {limit})",
            seen.last().unwrap()
        )));
    }
    Ok(())
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let set: std::collections::HashSet<usize> = a.iter().copied().collect();
    b.iter().filter(|i| set.contains(i)).count()
}

impl OverlapIndexSets {
    pub fn validate(&self, p: usize, n: usize) -> Result<()> {
        check_subset("rows_i", &self.rows_i, p)?;
        check_subset("rows_j", &self.rows_j, p)?;
        check_subset("cols_i", &self.cols_i, n)?;
        check_subset("cols_j", &self.cols_j, n)?;
        Ok(())
    }

    /// Identical full-index sets: the overlap statistics degenerate to the
    /// single-matrix ones.
    pub fn full(p: usize, n: usize) -> Self {
        Self {
            rows_i: (0..p).collect(),
            rows_j: (0..p).collect(),
            cols_i: (0..n).collect(),
            cols_j: (0..n).collect(),
        }
    }

    /// Each submatrix takes two thirds of the rows/columns so that half of
    /// its indices are shared with the other.
    pub fn half(p: usize, n: usize) -> Self {
        let rp = (2 * p) / 3;
        let cn = (2 * n) / 3;
        Self {
            rows_i: (0..rp).collect(),
            rows_j: (p - rp..p).collect(),
            cols_i: (0..cn).collect(),
            cols_j: (n - cn..n).collect(),
        }
    }

    /// Disjoint rows and columns: independent submatrices, γ̂ = 0.
    pub fn disjoint(p: usize, n: usize) -> Self {
        Self {
            rows_i: (0..p / 2).collect(),
            rows_j: (p / 2..p).collect(),
            cols_i: (0..n / 2).collect(),
            cols_j: (n / 2..n).collect(),
        }
    }

    /// Empirical fractions `(p_i, q_i, p_j, q_j, γ̂)` relative to `n`.
    pub fn fractions(&self, n: usize) -> (f64, f64, f64, f64, f64) {
        let nf = n as f64;
        let gamma = intersection_size(&self.rows_i, &self.rows_j) as f64
            * intersection_size(&self.cols_i, &self.cols_j) as f64
            / (nf * nf);
        (
            self.rows_i.len() as f64 / nf,
            self.cols_i.len() as f64 / nf,
            self.rows_j.len() as f64 / nf,
            self.cols_j.len() as f64 / nf,
            gamma,
        )
    }

    /// Kernel-ready parameters; fails when γ̂ = 0 (no overlap).
    pub fn empirical_params(&self, n: usize) -> Result<OverlapParams> {
        let (p_i, q_i, p_j, q_j, gamma) = self.fractions(n);
        OverlapParams::new(p_i, q_i, p_j, q_j, gamma)
    }
}

/// One Monte Carlo experiment: ensemble, evaluation grid, replica count and
/// optional overlap structure.
#[derive(Debug, Clone)]
pub struct McPlan {
    pub ensemble: EnsembleSpec,
    pub z_grid: Vec<Complex64>,
    pub replicas: usize,
    pub overlap: Option<OverlapIndexSets>,
}

impl McPlan {
    pub fn validate(&self) -> Result<()> {
        if self.replicas < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 replicas, got {}",
                self.replicas
            )));
        }
        if self.z_grid.is_empty() {
            return Err(Error::Validation("empty z grid".into()));
        }
        if let Some(z) = self.z_grid.iter().find(|z| z.im == 0.0) {
            return Err(Error::Validation(format!("grid point {z} is real")));
        }
        if let Some(ov) = &self.overlap {
            ov.validate(self.ensemble.p, self.ensemble.n)?;
        }
        Ok(())
    }
}

/// Raw replica traces plus everything needed to center, scale and compare.
#[derive(Debug, Clone)]
pub struct McResult {
    pub z_grid: Vec<Complex64>,
    /// `traces[m][k]` = Tr G(z_k) of kept replica m (un-centred, un-scaled)
    pub traces: Vec<Vec<Complex64>>,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub requested: usize,
    pub dropped: usize,
    /// spectrum of the first kept replica, for ESD diagnostics
    pub first_eigenvalues: Option<Vec<f64>>,
}

/// Covariance estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy)]
pub struct CovEstimate {
    pub value: Complex64,
    pub se: f64,
}

fn cov_from_traces(u: &[Complex64], v: &[Complex64], scale: f64) -> CovEstimate {
    let m = u.len();
    let mf = m as f64;
    let su: Complex64 = u.iter().sum();
    let sv: Complex64 = v.iter().sum();
    let suv: Complex64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let full = (suv - su * sv / mf) * scale * scale / (mf - 1.0);
    if m < 3 {
        return CovEstimate {
            value: full,
            se: f64::INFINITY,
        };
    }
    // leave-one-out estimates from the sufficient statistics
    let m1 = mf - 1.0;
    let loo: Vec<Complex64> = (0..m)
        .map(|k| {
            let su_k = su - u[k];
            let sv_k = sv - v[k];
            let suv_k = suv - u[k] * v[k];
            (suv_k - su_k * sv_k / m1) * scale * scale / (m1 - 1.0)
        })
        .collect();
    let mean: Complex64 = loo.iter().sum::<Complex64>() / mf;
    let var: f64 = loo.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() * (mf - 1.0) / mf;
    CovEstimate {
        value: full,
        se: var.sqrt(),
    }
}

impl McResult {
    pub fn kept(&self) -> usize {
        self.traces.len()
    }

    /// `N^{α/4−1}`, the fluctuation normalization.
    pub fn scale(&self) -> f64 {
        (self.n as f64).powf(self.alpha / 4.0 - 1.0)
    }

    /// Centred, scaled fluctuations `θ̂_m(z_k)`.
    pub fn theta_hat(&self) -> Vec<Vec<Complex64>> {
        let m = self.kept() as f64;
        let nz = self.z_grid.len();
        let scale = self.scale();
        let means: Vec<Complex64> = (0..nz)
            .map(|k| self.traces.iter().map(|t| t[k]).sum::<Complex64>() / m)
            .collect();
        self.traces
            .iter()
            .map(|t| (0..nz).map(|k| (t[k] - means[k]) * scale).collect())
            .collect()
    }

    /// Pseudo-covariance estimate `Ĉ(z_i, z_j)` with jackknife SE.
    pub fn cov_hat(&self, i: usize, j: usize) -> CovEstimate {
        let u: Vec<Complex64> = self.traces.iter().map(|t| t[i]).collect();
        let v: Vec<Complex64> = self.traces.iter().map(|t| t[j]).collect();
        cov_from_traces(&u, &v, self.scale())
    }

    /// Variance of the raw (un-normalized) trace at grid point `i`.
    pub fn trace_variance(&self, i: usize) -> f64 {
        let m = self.kept() as f64;
        let mean: Complex64 = self.traces.iter().map(|t| t[i]).sum::<Complex64>() / m;
        self.traces.iter().map(|t| (t[i] - mean).norm_sqr()).sum::<f64>() / (m - 1.0)
    }
}

const MAX_DROP_FRACTION: f64 = 0.01;

fn finalize_replicas(
    requested: usize,
    outcomes: Vec<std::result::Result<(Vec<Complex64>, Option<Vec<f64>>), Error>>,
) -> Result<(Vec<Vec<Complex64>>, Option<Vec<f64>>, usize)> {
    let mut traces = Vec::with_capacity(requested);
    let mut first_eigs = None;
    let mut dropped = 0usize;
    for (id, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok((t, eigs)) => {
                if first_eigs.is_none() {
                    first_eigs = eigs;
                }
                traces.push(t);
            }
            Err(Error::Numeric(msg)) => {
                eprintln!("replica {id} dropped: {msg}");
                dropped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if (dropped as f64) > MAX_DROP_FRACTION * requested as f64 {
        return Err(Error::Numeric(format!(
            "{dropped} of {requested} replicas dropped (> {:.0}%)",
            MAX_DROP_FRACTION * 100.0
        )));
    }
    Ok((traces, first_eigs, dropped))
}

fn traces_for(sample: &SpectralSample, grid: &[Complex64]) -> Result<Vec<Complex64>> {
    grid.iter()
        .map(|&z| Ok(crate::spectral::stieltjes_empirical(sample, z)?.0))
        .collect()
}

/// Runs the replica loop: per replica one matrix draw, one eigendecomposition
/// and `O(P)` trace evaluations per grid point.
pub fn run_replicas(plan: &McPlan) -> Result<McResult> {
    plan.validate()?;
    let outcomes: Vec<_> = (0..plan.replicas)
        .into_par_iter()
        .map(|rep| -> std::result::Result<(Vec<Complex64>, Option<Vec<f64>>), Error> {
            let x = build_matrix(&plan.ensemble, rep as u64)?;
            let sample = spectrum(&x, plan.ensemble.n, rep as u64)?;
            let t = traces_for(&sample, &plan.z_grid)?;
            let eigs = (rep == 0).then(|| sample.eigenvalues.clone());
            Ok((t, eigs))
        })
        .collect();
    let (traces, first_eigenvalues, dropped) = finalize_replicas(plan.replicas, outcomes)?;
    Ok(McResult {
        z_grid: plan.z_grid.clone(),
        traces,
        n: plan.ensemble.n,
        p: plan.ensemble.p,
        alpha: plan.ensemble.dist.alpha,
        requested: plan.replicas,
        dropped,
        first_eigenvalues,
    })
}

/// Joint statistics of two overlapping submatrices of the same draws.
#[derive(Debug, Clone)]
pub struct McOverlapResult {
    pub result_i: McResult,
    pub result_j: McResult,
    /// empirical `(p_i, q_i, p_j, q_j, γ̂)` relative to N
    pub fractions: (f64, f64, f64, f64, f64),
}

impl McOverlapResult {
    /// Cross pseudo-covariance `Ĉ_{ij}(z_i-grid point, z_j-grid point)`.
    pub fn cross_cov_hat(&self, i: usize, j: usize) -> CovEstimate {
        let u: Vec<Complex64> = self.result_i.traces.iter().map(|t| t[i]).collect();
        let v: Vec<Complex64> = self.result_j.traces.iter().map(|t| t[j]).collect();
        cov_from_traces(&u, &v, self.result_i.scale())
    }
}

/// Per replica both submatrix statistics are computed from the SAME draw of
/// the full matrix, then cross-covariances estimated exactly as in
/// [`run_replicas`].
pub fn run_overlap_replicas(plan: &McPlan) -> Result<McOverlapResult> {
    plan.validate()?;
    let sets = plan
        .overlap
        .as_ref()
        .ok_or_else(|| Error::Validation("plan has no overlap index sets".into()))?;
    let n = plan.ensemble.n;
    let outcomes: Vec<_> = (0..plan.replicas)
        .into_par_iter()
        .map(|rep| -> std::result::Result<(Vec<Complex64>, Vec<Complex64>, Option<(Vec<f64>, Vec<f64>)>), Error> {
            let x = build_matrix(&plan.ensemble, rep as u64)?;
            let xi = x.select(Axis(0), &sets.rows_i).select(Axis(1), &sets.cols_i);
            let xj = x.select(Axis(0), &sets.rows_j).select(Axis(1), &sets.cols_j);
            let si = spectrum(&xi, n, rep as u64)?;
            let sj = spectrum(&xj, n, rep as u64)?;
            let ti = traces_for(&si, &plan.z_grid)?;
            let tj = traces_for(&sj, &plan.z_grid)?;
            let eigs = (rep == 0).then(|| (si.eigenvalues.clone(), sj.eigenvalues.clone()));
            Ok((ti, tj, eigs))
        })
        .collect();

    let mut outcomes_i = Vec::with_capacity(plan.replicas);
    let mut outcomes_j = Vec::with_capacity(plan.replicas);
    for o in outcomes {
        match o {
            Ok((ti, tj, eigs)) => {
                let (ei, ej) = match eigs {
                    Some((a, b)) => (Some(a), Some(b)),
                    None => (None, None),
                };
                outcomes_i.push(Ok((ti, ei)));
                outcomes_j.push(Ok((tj, ej)));
            }
            Err(e) => {
                // drop the replica from BOTH series to keep them paired
                outcomes_i.push(Err(clone_numeric(&e)?));
                outcomes_j.push(Err(clone_numeric(&e)?));
            }
        }
    }
    let (traces_i, eigs_i, dropped) = finalize_replicas(plan.replicas, outcomes_i)?;
    let (traces_j, eigs_j, _) = finalize_replicas(plan.replicas, outcomes_j)?;
    let make = |traces: Vec<Vec<Complex64>>, p: usize, eigs: Option<Vec<f64>>| McResult {
        z_grid: plan.z_grid.clone(),
        traces,
        n,
        p,
        alpha: plan.ensemble.dist.alpha,
        requested: plan.replicas,
        dropped,
        first_eigenvalues: eigs,
    };
    Ok(McOverlapResult {
        result_i: make(traces_i, sets.rows_i.len(), eigs_i),
        result_j: make(traces_j, sets.rows_j.len(), eigs_j),
        fractions: sets.fractions(n),
    })
}

/// Only numeric (droppable) errors may be duplicated across the paired
/// series; anything else aborts the run.
fn clone_numeric(e: &Error) -> Result<Error> {
    match e {
        Error::Numeric(m) => Ok(Error::Numeric(m.clone())),
        other => Err(Error::Validation(format!("unexpected replica error: {other}"))),
    }
}

/// One standardized-moment diagnostic with its bootstrap confidence interval.
#[derive(Debug, Clone, Copy)]
pub struct MomentDiagnostic {
    pub stat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub band: f64,
    /// true when the CI intersects the band [−band, +band]
    pub pass: bool,
}

/// Skewness/excess-kurtosis diagnostics of Re θ̂ and Im θ̂ at one grid point.
#[derive(Debug, Clone, Copy)]
pub struct GaussianityReport {
    pub z: Complex64,
    pub skew_re: MomentDiagnostic,
    pub kurt_re: MomentDiagnostic,
    pub skew_im: MomentDiagnostic,
    pub kurt_im: MomentDiagnostic,
}

impl GaussianityReport {
    pub fn pass(&self) -> bool {
        self.skew_re.pass && self.kurt_re.pass && self.skew_im.pass && self.kurt_im.pass
    }
}

fn skew_kurt(samples: &[f64]) -> Result<(f64, f64)> {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= m;
    m3 /= m;
    m4 /= m;
    if !(m2 > 0.0) || !m2.is_finite() {
        return Err(Error::Numeric("degenerate variance in moment diagnostics".into()));
    }
    Ok((m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0))
}

/// Bootstrap percentile CIs for skewness and excess kurtosis of a sample.
pub fn moment_diagnostics_from_samples(
    samples: &[f64],
    band: f64,
    bootstrap: usize,
    seed: u64,
) -> Result<(MomentDiagnostic, MomentDiagnostic)> {
    if samples.len() < 8 {
        return Err(Error::Validation("need at least 8 samples for moment diagnostics".into()));
    }
    if bootstrap < 100 {
        return Err(Error::Validation("need at least 100 bootstrap resamples".into()));
    }
    let (skew, kurt) = skew_kurt(samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = samples.len();
    let mut skews = Vec::with_capacity(bootstrap);
    let mut kurts = Vec::with_capacity(bootstrap);
    let mut resample = vec![0.0f64; m];
    for _ in 0..bootstrap {
        for slot in resample.iter_mut() {
            *slot = samples[rng.gen_range(0..m)];
        }
        let (s, k) = skew_kurt(&resample)?;
        skews.push(s);
        kurts.push(k);
    }
    let ci = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        let lo = v[(0.025 * bootstrap as f64).floor() as usize];
        let hi = v[((0.975 * bootstrap as f64).ceil() as usize).min(bootstrap - 1)];
        (lo, hi)
    };
    let (slo, shi) = ci(&mut skews);
    let (klo, khi) = ci(&mut kurts);
    let make = |stat: f64, lo: f64, hi: f64| MomentDiagnostic {
        stat,
        ci_lo: lo,
        ci_hi: hi,
        band,
        pass: lo <= band && hi >= -band,
    };
    Ok((make(skew, slo, shi), make(kurt, klo, khi)))
}

/// Gaussianity diagnostics of `θ̂` at grid point `z_idx`.
pub fn gaussianity_diagnostics(
    result: &McResult,
    z_idx: usize,
    band: f64,
    bootstrap: usize,
    seed: u64,
) -> Result<GaussianityReport> {
    if result.kept() < 500 {
        return Err(Error::Validation(format!(
            "gaussianity diagnostics need M ≥ 500 kept replicas, have {}",
            result.kept()
        )));
    }
    if z_idx >= result.z_grid.len() {
        return Err(Error::Validation(format!("grid index {z_idx} out of range")));
    }
    let theta = result.theta_hat();
    let re: Vec<f64> = theta.iter().map(|t| t[z_idx].re).collect();
    let im: Vec<f64> = theta.iter().map(|t| t[z_idx].im).collect();
    let (skew_re, kurt_re) = moment_diagnostics_from_samples(&re, band, bootstrap, seed)?;
    let (skew_im, kurt_im) = moment_diagnostics_from_samples(&im, band, bootstrap, seed ^ 0x9e3779b97f4a7c15)?;
    Ok(GaussianityReport {
        z: result.z_grid[z_idx],
        skew_re,
        kurt_re,
        skew_im,
        kurt_im,
    })
}

/// Kolmogorov distance between the empirical spectral CDF of one replica and
/// the Marchenko–Pastur CDF (bulk by quadrature, atom added for y > 1).
pub fn esd_compare(sample: &SpectralSample, y: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let params = MPParams::new(y)?;
    let p = sample.eigenvalues.len();
    if p == 0 {
        return Err(Error::Validation("empty spectrum".into()));
    }
    let mut dist = 0.0f64;
    for (i, &lam) in sample.eigenvalues.iter().enumerate() {
        let f = mp_cdf(lam.max(0.0), &params, cfg)?;
        let lo = i as f64 / p as f64;
        let hi = (i + 1) as f64 / p as f64;
        dist = dist.max((f - lo).abs()).max((f - hi).abs());
    }
    Ok(dist)
}

/// Installs the global worker pool with the given thread count. Results are
/// identical whatever the count; this only sets the parallelism width.
pub fn build_thread_pool(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Validation("need at least two points for a slope".into()));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Validation("log-log regression needs positive data".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
