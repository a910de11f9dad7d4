//! The five operator-facing commands: `verify`, `kernel`, `mc`, `esd`, `phi`.

use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use hht_rmt::heavytail::{
    phi_n, phi_n_expansion_residual, sample, truncate_center, HeavyTailSpec, TruncationSpec,
};
use hht_rmt::kernel::{
    kernel_route_a_double_integral, kernel_route_b_r_integral, kernel_route_c_closed_form,
    kfrak_denominator_forms, kfrak_t_integral, kfrak_t_integral_closed, overlap_kernel,
    verify_integral_lemmas, KernelParams,
};
use hht_rmt::montecarlo::{
    esd_compare, gaussianity_diagnostics, run_overlap_replicas, run_replicas, McPlan,
    OverlapIndexSets,
};
use hht_rmt::mplaw::{
    d_zm, kappa, mp_stieltjes, mp_stieltjes_via_density, quadratic_residual, MPParams,
};
use hht_rmt::quadrature::{cauchy_derivative, integrate_halfline, Decay, QuadratureConfig};
use hht_rmt::spectral::{
    build_matrix, check_diagonal_identity, check_rank_inequality, diag_max_abs, resolvent_entries,
    spectrum, trace_sign_ok, ward_max_residual, EnsembleSpec,
};
use hht_rmt::{Error, Result};

use crate::config::{
    config_hash, load_config, EsdConfig, KernelConfig, McConfig, PhiConfig, VerifyConfig,
};
use crate::out::{ensure_out_dir, fmt_complex, write_json, write_text, Provenance};

fn c64(p: [f64; 2]) -> Complex64 {
    Complex64::new(p[0], p[1])
}

// ---------------------------------------------------------------- verify --

const VERIFY_FAMILIES: [&str; 10] = [
    "quadrature",
    "mplaw",
    "lemmas",
    "frullani",
    "routes",
    "ward",
    "diagbound",
    "sign",
    "rank",
    "diagid",
];

struct VerifyOutcome {
    lines: Vec<String>,
    failures: Vec<String>,
}

impl VerifyOutcome {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn record(&mut self, family: &str, ok: bool, detail: String) {
        let status = if ok { "PASS" } else { "FAIL" };
        self.lines.push(format!("{status} {family}: {detail}"));
        if !ok {
            self.failures.push(format!("{family}: {detail}"));
        }
    }
}

fn mp_grid() -> Vec<Complex64> {
    let mut g = Vec::with_capacity(200);
    for k in 0..10 {
        let re = -10.0 + 20.0 * (k as f64 + 0.5) / 10.0;
        for j in 0..10 {
            let im = 10f64.powf(-2.0 + 3.0 * j as f64 / 9.0);
            g.push(Complex64::new(re, im));
            g.push(Complex64::new(re, -im));
        }
    }
    g
}

const Z_IDENTITY_GRID: [Complex64; 6] = [
    Complex64::new(0.0, 1.0),
    Complex64::new(0.0, -1.0),
    Complex64::new(1.0, 1.0),
    Complex64::new(1.0, -1.0),
    Complex64::new(2.0, 0.5),
    Complex64::new(2.0, -0.5),
];

/// Deterministic small heavy-tailed test matrix for one trial.
fn trial_matrix(trial: u64, seed: u64) -> Result<(ndarray::Array2<f64>, usize)> {
    let alpha = [2.5, 3.0, 3.5][(trial % 3) as usize];
    let dist = HeavyTailSpec::new(alpha, seed ^ trial)?;
    let p = 2 + (trial * 7 % 63) as usize;
    let n = 2 + (trial * 11 % 79) as usize;
    let data = sample(&dist, p * n, trial)?;
    Ok((
        ndarray::Array2::from_shape_vec((p, n), data)
            .map_err(|e| Error::Numeric(format!("shape: {e}")))?,
        n,
    ))
}

fn verify_quadrature(outcome: &mut VerifyOutcome, quad: &QuadratureConfig) -> Result<()> {
    let cases: Vec<(&str, hht_rmt::quadrature::QuadResult, Complex64)> = vec![
        (
            "exp(-t)",
            integrate_halfline(|t| Complex64::new((-t).exp(), 0.0), Decay::Exponential(1.0), 0.0, quad)?,
            Complex64::new(1.0, 0.0),
        ),
        (
            "t^{-1/2} exp(-t)",
            integrate_halfline(
                |t| Complex64::new(t.powf(-0.5) * (-t).exp(), 0.0),
                Decay::Exponential(1.0),
                -0.5,
                quad,
            )?,
            Complex64::new(std::f64::consts::PI.sqrt(), 0.0),
        ),
        (
            "exp(-(1+i)t)",
            integrate_halfline(|t| (-(Complex64::new(1.0, 1.0)) * t).exp(), Decay::Exponential(1.0), 0.0, quad)?,
            1.0 / Complex64::new(1.0, 1.0),
        ),
    ];
    let mut worst = 0.0f64;
    let mut bound_ok = true;
    for (_, got, exact) in &cases {
        let err = (got.value - exact).norm();
        worst = worst.max(err);
        bound_ok &= err <= got.err_est.max(1e-15);
    }
    outcome.record(
        "quadrature",
        worst <= 1e-12 && bound_ok,
        format!("3 closed-form smoke integrals, worst error {worst:.2e}, err_est bounds hold: {bound_ok}"),
    );
    Ok(())
}

fn verify_mplaw(outcome: &mut VerifyOutcome, quad: &QuadratureConfig) -> Result<()> {
    let grid = mp_grid();
    let mut worst_resid = 0.0f64;
    let mut sign_ok = true;
    for &y in &[0.25, 0.5, 1.0, 2.0] {
        for &z in &grid {
            let m = mp_stieltjes(z, y)?;
            worst_resid = worst_resid.max(quadratic_residual(z, y, m));
            sign_ok &= (z * m).im * z.im.signum() < 0.0;
            kappa(z, y)?;
        }
    }
    outcome.record(
        "mplaw",
        worst_resid <= 1e-12 && sign_ok,
        format!("quadratic residual ≤ {worst_resid:.2e} on 200-pt grid × 4 ratios, sign invariants: {sign_ok}"),
    );

    let points = [
        Complex64::new(0.0, 2.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(-2.0, 0.5),
        Complex64::new(3.0, -2.0),
        Complex64::new(0.5, 0.25),
        Complex64::new(-0.5, -1.5),
        Complex64::new(2.0, 3.0),
    ];
    let mut worst_meas = 0.0f64;
    for &y in &[0.5, 1.0, 2.0] {
        let p = MPParams::new(y)?;
        for &z in &points {
            let closed = mp_stieltjes(z, y)?;
            let against = mp_stieltjes_via_density(z, &p, quad)?;
            worst_meas = worst_meas.max((closed - against).norm());
        }
    }
    outcome.record(
        "mplaw",
        worst_meas <= 1e-6,
        format!("Stieltjes-vs-density (incl. y=2 atom) ≤ {worst_meas:.2e} at 21 points"),
    );

    let mut worst_dzm = 0.0f64;
    for &y in &[0.5, 1.0, 2.0] {
        for &z in &points[..5] {
            let closed = d_zm(z, y)?;
            let oracle = cauchy_derivative(
                |w| w * mp_stieltjes(w, y).unwrap_or_default(),
                z,
                z.im.abs() / 2.0,
                64,
            )?;
            worst_dzm = worst_dzm.max((closed - oracle).norm() / closed.norm().max(1.0));
        }
    }
    outcome.record(
        "mplaw",
        worst_dzm <= 1e-8,
        format!("d/dz(zm) vs Cauchy-integral derivative ≤ {worst_dzm:.2e} relative"),
    );
    Ok(())
}

fn verify_lemmas(outcome: &mut VerifyOutcome, cfg: &VerifyConfig, quad: &QuadratureConfig) -> Result<()> {
    for &alpha in &cfg.alphas {
        match verify_integral_lemmas(alpha, quad) {
            Ok(rep) => outcome.record(
                "lemmas",
                rep.max_rel_err() <= 1e-8,
                format!(
                    "alpha={alpha}: {} checks, max rel err {:.2e}",
                    rep.checks.len(),
                    rep.max_rel_err()
                ),
            ),
            Err(e) => outcome.record("lemmas", false, format!("alpha={alpha}: {e}")),
        }
    }
    Ok(())
}

fn verify_frullani(outcome: &mut VerifyOutcome, quad: &QuadratureConfig) -> Result<()> {
    let params = KernelParams::new(3.0, 0.5)?;
    let zs = [
        Complex64::new(0.0, 2.0),
        Complex64::new(0.0, -2.0),
        Complex64::new(1.0, 1.0),
        Complex64::new(-2.0, 0.5),
        Complex64::new(2.0, -1.0),
        Complex64::new(0.5, 3.0),
    ];
    let mut worst = 0.0f64;
    let mut worst_ident = 0.0f64;
    for &z in &zs {
        for &r in &[0.1, 1.0, 10.0] {
            let q = kfrak_t_integral(z, r, &params, quad)?;
            let closed = kfrak_t_integral_closed(z, r, &params)?;
            worst = worst.max((q.value - closed).norm() / closed.norm().max(1.0));
            let (raw, simplified) = kfrak_denominator_forms(z, r, &params)?;
            worst_ident = worst_ident.max((raw - simplified).norm() / raw.norm());
        }
    }
    outcome.record(
        "frullani",
        worst <= 1e-8 && worst_ident <= 1e-12,
        format!("t-integral vs −log(1−r·m/(1−ym)) ≤ {worst:.2e}; simplification identity ≤ {worst_ident:.2e}"),
    );
    Ok(())
}

fn verify_routes(outcome: &mut VerifyOutcome, quad: &QuadratureConfig) -> Result<()> {
    let params = KernelParams::new(3.0, 0.5)?;
    let pairs = [
        (Complex64::new(0.0, 2.0), Complex64::new(1.0, 2.0)),
        (Complex64::new(0.0, 2.0), Complex64::new(0.0, -2.0)),
        (Complex64::new(1.0, 1.0), Complex64::new(-1.0, 0.5)),
    ];
    let mut worst_b = 0.0f64;
    for &(z, w) in &pairs {
        let b = kernel_route_b_r_integral(z, w, &params, quad)?;
        let cc = kernel_route_c_closed_form(z, w, &params)?;
        worst_b = worst_b.max((b.value - cc).norm() / cc.norm());
    }
    let (z, w) = pairs[0];
    let a = kernel_route_a_double_integral(z, w, &params, &QuadratureConfig::with_tols(1e-6, 1e-12))?;
    let cc = kernel_route_c_closed_form(z, w, &params)?;
    let rel_a = (a.value - cc).norm() / cc.norm();
    outcome.record(
        "routes",
        worst_b <= 1e-8 && rel_a <= 1e-3,
        format!("B vs C ≤ {worst_b:.2e} on 3 pairs; A vs C = {rel_a:.2e} at one pair"),
    );
    Ok(())
}

fn verify_identities(
    outcome: &mut VerifyOutcome,
    family: &str,
    cfg: &VerifyConfig,
) -> Result<()> {
    let mut worst_ward = 0.0f64;
    let mut diag_ok = true;
    let mut sign_ok = true;
    let mut rank_ok = true;
    let mut worst_diagid = 0.0f64;
    for trial in 0..cfg.trials as u64 {
        let (x, n) = trial_matrix(trial, cfg.seed)?;
        match family {
            "ward" | "diagbound" | "sign" => {
                for &z in &Z_IDENTITY_GRID {
                    let g = resolvent_entries(&x, n, z)?;
                    match family {
                        "ward" => worst_ward = worst_ward.max(ward_max_residual(&g, z)),
                        "diagbound" => {
                            diag_ok &= diag_max_abs(&g) <= 1.0 / z.im.abs() + 1e-10;
                        }
                        _ => sign_ok &= trace_sign_ok(&g, z),
                    }
                }
            }
            "rank" => {
                let alpha = [2.5, 3.0, 3.5][(trial % 3) as usize];
                let dist = HeavyTailSpec::new(alpha, cfg.seed ^ trial)?;
                let trunc = TruncationSpec::for_width(&dist, 0.01, n)?;
                let flat: Vec<f64> = x.iter().cloned().collect();
                let cut = truncate_center(&flat, n, &trunc)?;
                let x_hat = ndarray::Array2::from_shape_vec(x.raw_dim(), cut)
                    .map_err(|e| Error::Numeric(format!("shape: {e}")))?;
                for &z in &Z_IDENTITY_GRID {
                    rank_ok &= check_rank_inequality(&x, &x_hat, z)?.holds;
                }
            }
            "diagid" => {
                // smaller matrices: the check is per-column
                let pp = 2 + (trial % 7) as usize;
                let nn = 2 + (trial % 5) as usize;
                let dist = HeavyTailSpec::new(3.0, cfg.seed ^ (trial + 1000))?;
                let data = sample(&dist, pp * nn, trial)?;
                let xs = ndarray::Array2::from_shape_vec((pp, nn), data)
                    .map_err(|e| Error::Numeric(format!("shape: {e}")))?;
                for col in 0..nn {
                    let chk = check_diagonal_identity(&xs, nn, Complex64::new(0.0, 2.0), col)?;
                    worst_diagid = worst_diagid
                        .max(chk.rel_err_unscaled)
                        .max(chk.rel_err_scaled);
                }
            }
            _ => unreachable!(),
        }
    }
    match family {
        "ward" => outcome.record(
            "ward",
            worst_ward <= 1e-9,
            format!("Ward identity residual ≤ {worst_ward:.2e} per row over {} trials × 6 z", cfg.trials),
        ),
        "diagbound" => outcome.record(
            "diagbound",
            diag_ok,
            format!("|G_ii| ≤ 1/|Im z| over {} trials", cfg.trials),
        ),
        "sign" => outcome.record(
            "sign",
            sign_ok,
            format!("sgn Im(z·Tr G) = −sgn Im z over {} trials", cfg.trials),
        ),
        "rank" => outcome.record(
            "rank",
            rank_ok,
            format!("resolvent-vs-rank bound holds on {} truncation trials × 6 z", cfg.trials),
        ),
        "diagid" => outcome.record(
            "diagid",
            worst_diagid <= 1e-8,
            format!("diagonal Stieltjes identity ≤ {worst_diagid:.2e} relative (both scalings)"),
        ),
        _ => unreachable!(),
    }
    Ok(())
}

pub fn cmd_verify(
    config_path: Option<&Path>,
    only: Option<&str>,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<()> {
    let mut cfg: VerifyConfig = load_config(config_path)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    cfg.quad.validate()?;
    if cfg.trials == 0 {
        return Err(Error::Validation("verify needs at least 1 trial".into()));
    }
    let families: Vec<&str> = match only {
        None => VERIFY_FAMILIES.to_vec(),
        Some(f) => {
            if VERIFY_FAMILIES.contains(&f) {
                vec![VERIFY_FAMILIES[VERIFY_FAMILIES.iter().position(|x| *x == f).unwrap()]]
            } else {
                return Err(Error::Validation(format!(
                    "unknown verify family {f}; valid: {}",
                    VERIFY_FAMILIES.join(", ")
                )));
            }
        }
    };
    let quad = cfg.quad.to_config();
    let mut outcome = VerifyOutcome::new();
    for fam in &families {
        match *fam {
            "quadrature" => verify_quadrature(&mut outcome, &quad)?,
            "mplaw" => verify_mplaw(&mut outcome, &quad)?,
            "lemmas" => verify_lemmas(&mut outcome, &cfg, &quad)?,
            "frullani" => verify_frullani(&mut outcome, &quad)?,
            "routes" => verify_routes(&mut outcome, &quad)?,
            f => verify_identities(&mut outcome, f, &cfg)?,
        }
    }
    let prov = Provenance::new(config_hash(&cfg), cfg.seed);
    let mut report = prov.csv_header();
    for line in &outcome.lines {
        println!("{line}");
        report.push_str(line);
        report.push('\n');
    }
    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("verify_report.txt"), &report)?;
    if let Some(first) = outcome.failures.first() {
        return Err(Error::Verification(first.clone()));
    }
    Ok(())
}

// ---------------------------------------------------------------- kernel --

pub fn cmd_kernel(config_path: Option<&Path>, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    let mut cfg: KernelConfig = load_config(config_path)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    cfg.quad.validate()?;
    cfg.quad_a.validate()?;
    for r in &cfg.routes {
        if !["A", "B", "C"].contains(&r.as_str()) {
            return Err(Error::Validation(format!("unknown route {r}; valid: A, B, C")));
        }
    }
    let params = KernelParams::new(cfg.alpha, cfg.y)?;
    let quad = cfg.quad.to_config();
    let quad_a = cfg.quad_a.to_config();
    let prov = Provenance::new(config_hash(&cfg), cfg.seed);

    let mut csv = prov.csv_header();
    csv.push_str("z_re,z_im,w_re,w_im,route,C_re,C_im,err_est\n");
    let mut worst_a = 0.0f64;
    let mut worst_b = 0.0f64;
    let mut numeric_failures = Vec::new();
    for pair in &cfg.pairs {
        let (z, w) = (c64(pair[0]), c64(pair[1]));
        let c_ref = if cfg.routes.iter().any(|r| r == "C") {
            let v = kernel_route_c_closed_form(z, w, &params)?;
            csv.push_str(&format!(
                "{},{},{},{},C,{},{},0\n",
                z.re, z.im, w.re, w.im, v.re, v.im
            ));
            Some(v)
        } else {
            None
        };
        if cfg.routes.iter().any(|r| r == "B") {
            match kernel_route_b_r_integral(z, w, &params, &quad) {
                Ok(v) => {
                    csv.push_str(&format!(
                        "{},{},{},{},B,{},{},{}\n",
                        z.re, z.im, w.re, w.im, v.value.re, v.value.im, v.err_est
                    ));
                    if let Some(c_ref) = c_ref {
                        worst_b = worst_b.max((v.value - c_ref).norm() / c_ref.norm().max(1e-300));
                    }
                }
                Err(e) => numeric_failures.push(format!("route B at ({}, {}): {e}", fmt_complex(z), fmt_complex(w))),
            }
        }
        if cfg.routes.iter().any(|r| r == "A") {
            match kernel_route_a_double_integral(z, w, &params, &quad_a) {
                Ok(v) => {
                    csv.push_str(&format!(
                        "{},{},{},{},A,{},{},{}\n",
                        z.re, z.im, w.re, w.im, v.value.re, v.value.im, v.err_est
                    ));
                    if let Some(c_ref) = c_ref {
                        worst_a = worst_a.max((v.value - c_ref).norm() / c_ref.norm().max(1e-300));
                    }
                }
                Err(e) => numeric_failures.push(format!("route A at ({}, {}): {e}", fmt_complex(z), fmt_complex(w))),
            }
        }
    }
    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("kernel.csv"), &csv)?;
    println!(
        "kernel: {} pairs, routes {:?}; |A−C|/|C| ≤ {worst_a:.2e}, |B−C|/|C| ≤ {worst_b:.2e}",
        cfg.pairs.len(),
        cfg.routes
    );
    for f in &numeric_failures {
        eprintln!("kernel: {f}");
    }
    if !numeric_failures.is_empty() {
        return Err(Error::Numeric(numeric_failures.swap_remove(0)));
    }
    if worst_a > cfg.tol_a || worst_b > cfg.tol_b {
        return Err(Error::Verification(format!(
            "route disagreement beyond tolerance: |A−C|/|C| = {worst_a:.2e} (tol {:.0e}), |B−C|/|C| = {worst_b:.2e} (tol {:.0e})",
            cfg.tol_a, cfg.tol_b
        )));
    }
    Ok(())
}

// -------------------------------------------------------------------- mc --

#[derive(Serialize)]
struct McEstimateRow {
    z: String,
    w: String,
    c_hat_re: f64,
    c_hat_im: f64,
    c_theory_re: f64,
    c_theory_im: f64,
    se: f64,
    within_band: bool,
}

#[derive(Serialize)]
struct McDiagnosticsRow {
    z: String,
    skew_re: f64,
    skew_re_ci: [f64; 2],
    kurt_re: f64,
    kurt_re_ci: [f64; 2],
    skew_im: f64,
    skew_im_ci: [f64; 2],
    kurt_im: f64,
    kurt_im_ci: [f64; 2],
    band: f64,
    pass: bool,
}

#[derive(Serialize)]
struct McOutput {
    provenance: Provenance,
    config: McConfig,
    kept: usize,
    dropped: usize,
    overlap_fractions: Option<[f64; 5]>,
    estimates: Vec<McEstimateRow>,
    diagnostics: Vec<McDiagnosticsRow>,
}

fn within_band(c_hat: Complex64, c_theory: Complex64, se: f64, rel: f64, se_mult: f64) -> bool {
    (c_hat - c_theory).norm() <= (se_mult * se).max(rel * c_theory.norm())
}

pub fn cmd_mc(
    config_path: Option<&Path>,
    overlap_preset: Option<&str>,
    out_dir: &Path,
    seed_override: Option<u64>,
    assert_bands: bool,
) -> Result<()> {
    let mut cfg: McConfig = load_config(config_path)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    cfg.quad.validate()?;
    let dist = HeavyTailSpec::new(cfg.alpha, cfg.seed)?;
    let ensemble = EnsembleSpec::new(cfg.n, cfg.y, dist, cfg.truncate, cfg.epsilon)?;
    let (p, n) = (ensemble.p, ensemble.n);
    let overlap = match overlap_preset {
        Some("full") => Some(OverlapIndexSets::full(p, n)),
        Some("half") => Some(OverlapIndexSets::half(p, n)),
        Some("disjoint") => Some(OverlapIndexSets::disjoint(p, n)),
        Some(other) => {
            return Err(Error::Validation(format!(
                "unknown overlap preset {other}; valid: full, half, disjoint"
            )))
        }
        None => cfg.overlap.as_ref().map(|o| OverlapIndexSets {
            rows_i: o.rows_i.clone(),
            rows_j: o.rows_j.clone(),
            cols_i: o.cols_i.clone(),
            cols_j: o.cols_j.clone(),
        }),
    };
    let plan = McPlan {
        ensemble,
        z_grid: cfg.z_grid.iter().map(|&p| c64(p)).collect(),
        replicas: cfg.m,
        overlap,
    };
    let params = KernelParams::new(cfg.alpha, cfg.y)?;
    let quad = cfg.quad.to_config();
    let prov = Provenance::new(config_hash(&cfg), cfg.seed);

    let mut estimates = Vec::new();
    let mut diagnostics = Vec::new();
    let (kept, dropped, overlap_fractions);
    if plan.overlap.is_some() {
        let ov = run_overlap_replicas(&plan)?;
        kept = ov.result_i.kept();
        dropped = ov.result_i.dropped;
        let fr = ov.fractions;
        overlap_fractions = Some([fr.0, fr.1, fr.2, fr.3, fr.4]);
        let oparams = plan.overlap.as_ref().unwrap().empirical_params(n).ok();
        for i in 0..plan.z_grid.len() {
            for j in 0..plan.z_grid.len() {
                let est = ov.cross_cov_hat(i, j);
                let theory = match &oparams {
                    Some(op) => overlap_kernel(plan.z_grid[i], plan.z_grid[j], &params, op, &quad)?.value,
                    None => Complex64::new(0.0, 0.0), // γ̂ = 0: independent submatrices
                };
                estimates.push(McEstimateRow {
                    z: fmt_complex(plan.z_grid[i]),
                    w: fmt_complex(plan.z_grid[j]),
                    c_hat_re: est.value.re,
                    c_hat_im: est.value.im,
                    c_theory_re: theory.re,
                    c_theory_im: theory.im,
                    se: est.se,
                    within_band: within_band(est.value, theory, est.se, cfg.bands.rel, cfg.bands.se_mult),
                });
            }
        }
    } else {
        let res = run_replicas(&plan)?;
        kept = res.kept();
        dropped = res.dropped;
        overlap_fractions = None;
        for i in 0..plan.z_grid.len() {
            for j in i..plan.z_grid.len() {
                let est = res.cov_hat(i, j);
                let theory = kernel_route_c_closed_form(plan.z_grid[i], plan.z_grid[j], &params)?;
                estimates.push(McEstimateRow {
                    z: fmt_complex(plan.z_grid[i]),
                    w: fmt_complex(plan.z_grid[j]),
                    c_hat_re: est.value.re,
                    c_hat_im: est.value.im,
                    c_theory_re: theory.re,
                    c_theory_im: theory.im,
                    se: est.se,
                    within_band: within_band(est.value, theory, est.se, cfg.bands.rel, cfg.bands.se_mult),
                });
            }
        }
        if res.kept() >= 500 {
            for i in 0..plan.z_grid.len() {
                let rep = gaussianity_diagnostics(&res, i, 0.6, 400, cfg.seed ^ i as u64)?;
                diagnostics.push(McDiagnosticsRow {
                    z: fmt_complex(rep.z),
                    skew_re: rep.skew_re.stat,
                    skew_re_ci: [rep.skew_re.ci_lo, rep.skew_re.ci_hi],
                    kurt_re: rep.kurt_re.stat,
                    kurt_re_ci: [rep.kurt_re.ci_lo, rep.kurt_re.ci_hi],
                    skew_im: rep.skew_im.stat,
                    skew_im_ci: [rep.skew_im.ci_lo, rep.skew_im.ci_hi],
                    kurt_im: rep.kurt_im.stat,
                    kurt_im_ci: [rep.kurt_im.ci_lo, rep.kurt_im.ci_hi],
                    band: 0.6,
                    pass: rep.pass(),
                });
            }
        }
    }

    ensure_out_dir(out_dir)?;
    let mut csv = prov.csv_header();
    csv.push_str("z,w,C_hat_re,C_hat_im,C_theory_re,C_theory_im,se\n");
    for e in &estimates {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.z, e.w, e.c_hat_re, e.c_hat_im, e.c_theory_re, e.c_theory_im, e.se
        ));
    }
    write_text(&out_dir.join("mc_covariance.csv"), &csv)?;
    let out = McOutput {
        provenance: prov,
        config: cfg.clone(),
        kept,
        dropped,
        overlap_fractions,
        estimates,
        diagnostics,
    };
    write_json(&out_dir.join("mc_results.json"), &out)?;
    println!(
        "mc: kept {kept} of {} replicas (dropped {dropped}); {} estimates written",
        cfg.m,
        out.estimates.len()
    );
    if assert_bands {
        let bad: Vec<&McEstimateRow> = out.estimates.iter().filter(|e| !e.within_band).collect();
        let diag_bad = out.diagnostics.iter().any(|d| !d.pass);
        if !bad.is_empty() || diag_bad {
            return Err(Error::Verification(format!(
                "{} covariance estimates outside band, diagnostics pass: {}",
                bad.len(),
                !diag_bad
            )));
        }
    }
    Ok(())
}

// ------------------------------------------------------------------- esd --

#[derive(Serialize)]
struct EsdOutput {
    provenance: Provenance,
    config: EsdConfig,
    ks: Vec<f64>,
    threshold: f64,
}

pub fn cmd_esd(
    config_path: Option<&Path>,
    out_dir: &Path,
    seed_override: Option<u64>,
    assert_threshold: bool,
) -> Result<()> {
    let mut cfg: EsdConfig = load_config(config_path)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    cfg.quad.validate()?;
    if cfg.replicas == 0 {
        return Err(Error::Validation("esd needs at least one replica".into()));
    }
    if !(cfg.ks_threshold > 0.0) {
        return Err(Error::Validation(format!(
            "ks_threshold must be positive, got {}",
            cfg.ks_threshold
        )));
    }
    let dist = HeavyTailSpec::new(cfg.alpha, cfg.seed)?;
    let ensemble = EnsembleSpec::new(cfg.n, cfg.y, dist, cfg.truncate, cfg.epsilon)?;
    let quad = cfg.quad.to_config();
    let prov = Provenance::new(config_hash(&cfg), cfg.seed);

    let mut csv = prov.csv_header();
    csv.push_str("replica,index,lambda\n");
    let mut ks = Vec::with_capacity(cfg.replicas);
    for rep in 0..cfg.replicas as u64 {
        let x = build_matrix(&ensemble, rep)?;
        let sm = spectrum(&x, ensemble.n, rep)?;
        for (idx, lam) in sm.eigenvalues.iter().enumerate() {
            csv.push_str(&format!("{rep},{idx},{lam}\n"));
        }
        ks.push(esd_compare(&sm, cfg.y, &quad)?);
    }
    ensure_out_dir(out_dir)?;
    write_text(&out_dir.join("esd_eigenvalues.csv"), &csv)?;
    let out = EsdOutput {
        provenance: prov,
        config: cfg.clone(),
        ks: ks.clone(),
        threshold: cfg.ks_threshold,
    };
    write_json(&out_dir.join("esd_results.json"), &out)?;
    let worst = ks.iter().cloned().fold(0.0f64, f64::max);
    println!(
        "esd: {} replica(s) at N={}, y={}; Kolmogorov distance max {worst:.4}",
        cfg.replicas, cfg.n, cfg.y
    );
    if assert_threshold && worst > cfg.ks_threshold {
        return Err(Error::Verification(format!(
            "Kolmogorov distance {worst:.4} exceeds threshold {}",
            cfg.ks_threshold
        )));
    }
    Ok(())
}

// ------------------------------------------------------------------- phi --

#[derive(Serialize)]
struct PhiRow {
    #[serde(rename = "N")]
    n: usize,
    lambda: String,
    phi_re: f64,
    phi_im: f64,
    resid_abs: f64,
    resid_scaled: f64,
}

#[derive(Serialize)]
struct PhiOutput {
    provenance: Provenance,
    config: PhiConfig,
    rows: Vec<PhiRow>,
    monotone: bool,
}

pub fn cmd_phi(
    config_path: Option<&Path>,
    out_dir: &Path,
    seed_override: Option<u64>,
    assert_monotone: bool,
) -> Result<()> {
    let mut cfg: PhiConfig = load_config(config_path)?;
    if let Some(s) = seed_override {
        cfg.seed = s;
    }
    if cfg.n_list.is_empty() || cfg.lambdas.is_empty() {
        return Err(Error::Validation("phi needs N values and λ values".into()));
    }
    let dist = HeavyTailSpec::new(cfg.alpha, cfg.seed)?;
    let prov = Provenance::new(config_hash(&cfg), cfg.seed);
    let mut rows = Vec::new();
    let mut monotone = true;
    for &lam in &cfg.lambdas {
        let lambda = c64(lam);
        let mut last = f64::INFINITY;
        for &n in &cfg.n_list {
            let trunc = TruncationSpec::for_width(&dist, cfg.epsilon, n)?;
            let phi = phi_n(lambda, &dist, &trunc, n)?;
            let resid = phi_n_expansion_residual(lambda, &dist, &trunc, n)?;
            let scaled = resid.norm() * (n as f64).powf(cfg.alpha / 2.0);
            monotone &= scaled < last;
            last = scaled;
            rows.push(PhiRow {
                n,
                lambda: fmt_complex(lambda),
                phi_re: phi.re,
                phi_im: phi.im,
                resid_abs: resid.norm(),
                resid_scaled: scaled,
            });
        }
    }
    ensure_out_dir(out_dir)?;
    let mut csv = prov.csv_header();
    csv.push_str("N,lambda,phi_re,phi_im,resid_abs,resid_scaled\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.n, r.lambda, r.phi_re, r.phi_im, r.resid_abs, r.resid_scaled
        ));
    }
    write_text(&out_dir.join("phi.csv"), &csv)?;
    let out = PhiOutput {
        provenance: prov,
        config: cfg.clone(),
        rows,
        monotone,
    };
    write_json(&out_dir.join("phi_results.json"), &out)?;
    println!(
        "phi: {} λ × {} widths; scaled residual monotone decreasing: {monotone}",
        cfg.lambdas.len(),
        cfg.n_list.len()
    );
    if assert_monotone && !monotone {
        return Err(Error::Verification(
            "scaled expansion residual not monotonically decreasing".into(),
        ));
    }
    Ok(())
}

