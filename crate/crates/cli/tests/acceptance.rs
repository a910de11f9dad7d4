//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test ... -- --nocapture`).
//!
//! Every tolerance is pinned here; nothing is deferred to calibration.

use std::process::Command;

use num_complex::Complex64;
use rayon::prelude::*;

use hht_rmt::heavytail::{phi_n_expansion_residual, sample, HeavyTailSpec, TruncationSpec};
use hht_rmt::kernel::{
    kernel_route_a_double_integral, kernel_route_b_r_integral, kernel_route_c_closed_form,
    kfrak_denominator_forms, kfrak_t_integral, kfrak_t_integral_closed, overlap_kernel,
    overlap_kernel_closed_form, verify_integral_lemmas, KernelParams, OverlapParams,
};
use hht_rmt::montecarlo::{
    esd_compare, gaussianity_diagnostics, log_log_slope, run_overlap_replicas, run_replicas,
    McPlan, OverlapIndexSets,
};
use hht_rmt::mplaw::{mp_stieltjes, mp_stieltjes_via_density, quadratic_residual, MPParams};
use hht_rmt::quadrature::QuadratureConfig;
use hht_rmt::spectral::{
    check_diagonal_identity, check_rank_inequality, diag_max_abs, resolvent_entries,
    trace_sign_ok, ward_max_residual, EnsembleSpec,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn report(criterion: u32, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion:2} {}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

fn mp_grid() -> Vec<Complex64> {
    let mut g = Vec::with_capacity(200);
    for k in 0..10 {
        let re = -10.0 + 20.0 * (k as f64 + 0.5) / 10.0;
        for j in 0..10 {
            let im = 10f64.powf(-2.0 + 3.0 * j as f64 / 9.0);
            g.push(c(re, im));
            g.push(c(re, -im));
        }
    }
    g
}

#[test]
fn criterion_01_mp_quadratic_residual() {
    let mut worst = 0.0f64;
    for &y in &[0.25, 0.5, 1.0, 2.0] {
        for &z in &mp_grid() {
            let m = mp_stieltjes(z, y).unwrap();
            worst = worst.max(quadratic_residual(z, y, m));
        }
    }
    report(
        1,
        worst <= 1e-12,
        &format!("|zym² + (1−z−y)m + 1| ≤ {worst:.2e} on 200-pt grid × y ∈ {{0.25,0.5,1,2}} (tol 1e-12)"),
    );
}

#[test]
fn criterion_02_stieltjes_vs_density() {
    let cfg = QuadratureConfig::default();
    let points = [
        c(0.0, 2.0),
        c(1.0, 1.0),
        c(-2.0, 0.5),
        c(3.0, -2.0),
        c(0.5, 0.25),
        c(-0.5, -1.5),
        c(2.0, 3.0),
    ];
    let mut worst = 0.0f64;
    let mut count = 0;
    for &y in &[0.5, 1.0, 2.0] {
        let p = MPParams::new(y).unwrap();
        for &z in &points {
            let closed = mp_stieltjes(z, y).unwrap();
            let quad = mp_stieltjes_via_density(z, &p, &cfg).unwrap();
            worst = worst.max((closed - quad).norm());
            count += 1;
        }
    }
    report(
        2,
        count >= 20 && worst <= 1e-6,
        &format!("|m_y − ∫dμ_MP/(z−x)| ≤ {worst:.2e} at {count} points incl. y=2 atom (tol 1e-6)"),
    );
}

#[test]
fn criterion_03_appendix_integral_lemmas() {
    let cfg = QuadratureConfig::default();
    let mut worst = 0.0f64;
    for &alpha in &[2.5, 3.0, 3.5] {
        let rep = verify_integral_lemmas(alpha, &cfg).unwrap();
        assert_eq!(rep.checks.len(), 30, "10-σ panel per lemma");
        worst = worst.max(rep.max_rel_err());
    }
    report(
        3,
        worst <= 1e-8,
        &format!("raising_into_power/subtract/int_r closed vs quadrature ≤ {worst:.2e} rel (tol 1e-8)"),
    );
}

#[test]
fn criterion_04_three_route_agreement() {
    let pairs = [
        (c(0.0, 2.0), c(1.0, 2.0)),
        (c(0.0, 2.0), c(0.0, -2.0)),
        (c(0.0, 1.0), c(0.0, 3.0)),
        (c(1.0, 1.0), c(1.0, -1.0)),
        (c(-1.0, 2.0), c(2.0, 0.5)),
        (c(0.0, 0.5), c(-0.5, 1.0)),
        (c(0.0, 3.0), c(0.0, 3.0)),
        (c(0.0, 2.0), c(0.0, 2.000001)),
        (c(-2.0, 1.0), c(-2.0, -1.0)),
        (c(1.0, 0.5), c(-1.0, 0.5)),
        (c(0.5, -1.5), c(2.0, 2.0)),
        (c(0.0, 4.0), c(0.25, 0.75)),
    ];
    let quad_b = QuadratureConfig::default();
    let quad_a = QuadratureConfig::with_tols(1e-5, 1e-12);
    let mut combos = Vec::new();
    for &alpha in &[2.5, 3.0, 3.5] {
        for &y in &[0.5, 1.0, 2.0] {
            for &(z, w) in &pairs {
                combos.push((alpha, y, z, w));
            }
        }
    }
    let rels: Vec<(f64, f64)> = combos
        .par_iter()
        .map(|&(alpha, y, z, w)| {
            let params = KernelParams::new(alpha, y).unwrap();
            let cc = kernel_route_c_closed_form(z, w, &params).unwrap();
            let b = kernel_route_b_r_integral(z, w, &params, &quad_b).unwrap();
            let a = kernel_route_a_double_integral(z, w, &params, &quad_a).unwrap();
            (
                (a.value - cc).norm() / cc.norm(),
                (b.value - cc).norm() / cc.norm(),
            )
        })
        .collect();
    let worst_a = rels.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_b = rels.iter().map(|r| r.1).fold(0.0, f64::max);
    report(
        4,
        worst_a <= 1e-3 && worst_b <= 1e-8,
        &format!(
            "12 pairs × 3α × 3y: |A−C|/|C| ≤ {worst_a:.2e} (tol 1e-3), |B−C|/|C| ≤ {worst_b:.2e} (tol 1e-8)"
        ),
    );
}

#[test]
fn criterion_05_frullani_sub_identity() {
    let cfg = QuadratureConfig::default();
    let params = KernelParams::new(3.0, 0.5).unwrap();
    let zs = [
        c(0.0, 2.0),
        c(0.0, -2.0),
        c(1.0, 1.0),
        c(-2.0, 0.5),
        c(2.0, -1.0),
        c(0.5, 3.0),
    ];
    let mut worst = 0.0f64;
    for &z in &zs {
        for &r in &[0.1, 1.0, 10.0] {
            let quad = kfrak_t_integral(z, r, &params, &cfg).unwrap();
            let closed = kfrak_t_integral_closed(z, r, &params).unwrap();
            worst = worst.max((quad.value - closed).norm() / closed.norm().max(1.0));
            let (raw, simplified) = kfrak_denominator_forms(z, r, &params).unwrap();
            assert!((raw - simplified).norm() <= 1e-12 * raw.norm());
        }
    }
    report(
        5,
        worst <= 1e-8,
        &format!("∫𝔨 dt vs −log(1−r(zm−1)) ≤ {worst:.2e} at r ∈ {{0.1,1,10}} × 6 z (tol 1e-8)"),
    );
}

#[test]
fn criterion_06_finite_n_identities() {
    let z_grid = [
        c(0.0, 1.0),
        c(0.0, -1.0),
        c(1.0, 1.0),
        c(1.0, -1.0),
        c(2.0, 0.5),
        c(2.0, -0.5),
    ];
    let mut worst_ward = 0.0f64;
    let mut diag_ok = true;
    let mut sign_ok = true;
    let mut rank_ok = true;
    let mut worst_diagid = 0.0f64;
    for trial in 0..100u64 {
        let alpha = [2.5, 3.0, 3.5][(trial % 3) as usize];
        let dist = HeavyTailSpec::new(alpha, 600 + trial).unwrap();
        let p = 2 + (trial * 7 % 63) as usize;
        let n = 2 + (trial * 11 % 79) as usize;
        let data = sample(&dist, p * n, trial).unwrap();
        let x = ndarray::Array2::from_shape_vec((p, n), data).unwrap();
        for &z in &z_grid {
            let g = resolvent_entries(&x, n, z).unwrap();
            worst_ward = worst_ward.max(ward_max_residual(&g, z));
            diag_ok &= diag_max_abs(&g) <= 1.0 / z.im.abs() + 1e-10;
            sign_ok &= trace_sign_ok(&g, z);
        }
        // rank bound under truncation
        let trunc = TruncationSpec::for_width(&dist, 0.01, n).unwrap();
        let flat: Vec<f64> = x.iter().cloned().collect();
        let cut = hht_rmt::heavytail::truncate_center(&flat, n, &trunc).unwrap();
        let x_hat = ndarray::Array2::from_shape_vec(x.raw_dim(), cut).unwrap();
        rank_ok &= check_rank_inequality(&x, &x_hat, z_grid[(trial % 6) as usize])
            .unwrap()
            .holds;
        // diagonal identity on a smaller companion
        let pp = 2 + (trial % 7) as usize;
        let nn = 2 + (trial % 5) as usize;
        let small = sample(&dist, pp * nn, trial + 5000).unwrap();
        let xs = ndarray::Array2::from_shape_vec((pp, nn), small).unwrap();
        for col in 0..nn {
            let chk = check_diagonal_identity(&xs, nn, c(0.0, 2.0), col).unwrap();
            worst_diagid = worst_diagid.max(chk.rel_err_unscaled).max(chk.rel_err_scaled);
        }
    }
    report(
        6,
        worst_ward <= 1e-9 && diag_ok && sign_ok && rank_ok && worst_diagid <= 1e-8,
        &format!(
            "100 trials, P ≤ 64: Ward ≤ {worst_ward:.2e} (tol 1e-9), diag bound {diag_ok}, sign {sign_ok}, rank {rank_ok}, diag identity ≤ {worst_diagid:.2e} (tol 1e-8)"
        ),
    );
}

#[test]
fn criterion_07_esd_convergence() {
    let dist = HeavyTailSpec::new(3.0, 777).unwrap();
    let ensemble = EnsembleSpec::new(2000, 0.5, dist, true, 0.01).unwrap();
    let x = hht_rmt::spectral::build_matrix(&ensemble, 0).unwrap();
    let sm = hht_rmt::spectral::spectrum(&x, 2000, 0).unwrap();
    let ks = esd_compare(&sm, 0.5, &QuadratureConfig::default()).unwrap();
    report(
        7,
        ks <= 0.05,
        &format!("Kolmogorov distance to MP = {ks:.4} at N=2000, y=0.5, α=3, truncated (tol 0.05)"),
    );
}

#[test]
fn criterion_08_phi_expansion_residual() {
    let dist = HeavyTailSpec::new(3.0, 0).unwrap();
    let mut all_monotone = true;
    let mut detail = String::new();
    for &lambda in &[c(1.0, -1.0), c(0.0, -2.0)] {
        let mut scaled = Vec::new();
        for &n in &[1_000usize, 10_000, 100_000, 1_000_000] {
            let trunc = TruncationSpec::for_width(&dist, 0.01, n).unwrap();
            let r = phi_n_expansion_residual(lambda, &dist, &trunc, n).unwrap();
            scaled.push(r.norm() * (n as f64).powf(1.5));
        }
        let monotone = scaled.windows(2).all(|w| w[1] < w[0]);
        all_monotone &= monotone;
        detail.push_str(&format!("λ={lambda}: {scaled:.4?} decreasing={monotone}; "));
    }
    report(8, all_monotone, &format!("residual·N^{{α/2}} over N ∈ 10³..10⁶: {detail}"));
}

#[test]
fn criterion_09_variance_scaling() {
    let mut points = Vec::new();
    for &n in &[250usize, 500, 1000, 2000] {
        let dist = HeavyTailSpec::new(3.0, 901).unwrap();
        let plan = McPlan {
            ensemble: EnsembleSpec::new(n, 0.5, dist, true, 0.01).unwrap(),
            z_grid: vec![c(0.0, 2.0)],
            replicas: 500,
            overlap: None,
        };
        let res = run_replicas(&plan).unwrap();
        points.push((n as f64, res.trace_variance(0)));
    }
    let slope = log_log_slope(&points).unwrap();
    let lo = 2.0 - 1.5 - 0.35;
    let hi = 2.0 - 1.5 + 0.35;
    report(
        9,
        slope >= lo && slope <= hi,
        &format!("log Var[Tr G(2i)] vs log N slope = {slope:.3} over N ∈ {{250..2000}}, M=500 (band [{lo},{hi}])"),
    );
}

#[test]
fn criterion_10_clt_covariance_band() {
    let dist = HeavyTailSpec::new(3.0, 1001).unwrap();
    let plan = McPlan {
        ensemble: EnsembleSpec::new(1000, 0.5, dist, true, 0.01).unwrap(),
        z_grid: vec![c(0.0, 2.0), c(0.0, -2.0), c(1.0, 2.0)],
        replicas: 2000,
        overlap: None,
    };
    let res = run_replicas(&plan).unwrap();
    let params = KernelParams::new(3.0, 0.5).unwrap();
    let mut pass = true;
    let mut detail = String::new();
    for (i, j) in [(0usize, 1usize), (0, 2)] {
        let est = res.cov_hat(i, j);
        let theory = kernel_route_c_closed_form(plan.z_grid[i], plan.z_grid[j], &params).unwrap();
        let gap = (est.value - theory).norm();
        let band = (3.0 * est.se).max(0.25 * theory.norm());
        pass &= gap <= band;
        detail.push_str(&format!(
            "C(2i,{}): |Ĉ−C| = {gap:.2e} vs band {band:.2e} (SE {:.1e}); ",
            if j == 1 { "-2i" } else { "1+2i" },
            est.se
        ));
    }
    let diag = gaussianity_diagnostics(&res, 0, 0.6, 500, 42).unwrap();
    let g_ok = diag.pass();
    pass &= g_ok;
    detail.push_str(&format!(
        "gaussianity at 2i (band ±0.6): skew_re {:.3} [{:.3},{:.3}], kurt_re {:.3} [{:.3},{:.3}], skew_im {:.3}, kurt_im {:.3} → {}",
        diag.skew_re.stat, diag.skew_re.ci_lo, diag.skew_re.ci_hi,
        diag.kurt_re.stat, diag.kurt_re.ci_lo, diag.kurt_re.ci_hi,
        diag.skew_im.stat, diag.kurt_im.stat,
        g_ok
    ));
    report(10, pass, &detail);
}

#[test]
fn criterion_11_overlap_reduction_and_cross_covariance() {
    // analytic reduction: full overlap equals the single-matrix kernel
    let kp = KernelParams::new(3.0, 0.5).unwrap();
    let full = OverlapParams::new(0.5, 1.0, 0.5, 1.0, 0.5).unwrap();
    let cfg = QuadratureConfig::default();
    let mut worst_red = 0.0f64;
    for &(z, w) in &[(c(0.0, 2.0), c(0.0, -2.0)), (c(0.0, 2.0), c(1.0, 2.0)), (c(0.0, 3.0), c(0.0, 2.0))] {
        let red = overlap_kernel(z, w, &kp, &full, &cfg).unwrap();
        let single = kernel_route_c_closed_form(z, w, &kp).unwrap();
        worst_red = worst_red.max((red.value - single).norm() / single.norm());
        let closed = overlap_kernel_closed_form(z, w, &kp, &full).unwrap();
        assert!((closed - red.value).norm() <= 1e-9 * single.norm());
    }
    // Monte Carlo: 50% row/column overlap at N=800, M=2000
    let dist = HeavyTailSpec::new(3.0, 1101).unwrap();
    let ensemble = EnsembleSpec::new(800, 0.5, dist, true, 0.01).unwrap();
    let sets = OverlapIndexSets::half(ensemble.p, ensemble.n);
    let oparams = sets.empirical_params(ensemble.n).unwrap();
    let plan = McPlan {
        ensemble,
        z_grid: vec![c(0.0, 2.0), c(0.0, -2.0)],
        replicas: 2000,
        overlap: Some(sets),
    };
    let ov = run_overlap_replicas(&plan).unwrap();
    let est = ov.cross_cov_hat(0, 1);
    let theory = overlap_kernel(c(0.0, 2.0), c(0.0, -2.0), &kp, &oparams, &cfg)
        .unwrap()
        .value;
    let gap = (est.value - theory).norm();
    let band = (3.0 * est.se).max(0.30 * theory.norm());
    report(
        11,
        worst_red <= 1e-3 && gap <= band,
        &format!(
            "full-overlap reduction ≤ {worst_red:.2e} (tol 1e-3); MC C_ij(2i,−2i): |Ĉ−C| = {gap:.2e} vs band {band:.2e} (C = {theory}, Ĉ = {}, SE {:.1e})",
            est.value, est.se
        ),
    );
}

#[test]
fn criterion_12_determinism_across_thread_counts() {
    let bin = env!("CARGO_BIN_EXE_hht-rmt");
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("mc.json");
    std::fs::write(
        &cfg_path,
        r#"{"alpha":3.0,"epsilon":0.01,"y":0.5,"N":60,"M":24,"seed":7,"truncate":true,"z_grid":[[0.0,2.0],[0.0,-2.0],[1.0,1.0]]}"#,
    )
    .unwrap();
    let run = |sub: &str, threads: &str, out: &str, extra: &[&str]| {
        let outdir = tmp.path().join(out);
        let mut cmd = Command::new(bin);
        cmd.arg(sub)
            .arg("--threads")
            .arg(threads)
            .arg("--out")
            .arg(&outdir);
        for e in extra {
            cmd.arg(e);
        }
        let status = cmd.status().unwrap();
        assert!(status.success(), "{sub} --threads {threads} failed");
        outdir
    };
    let mut pass = true;
    let mut detail = String::new();
    let cfg_str = cfg_path.to_str().unwrap().to_string();
    let cases: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("mc", vec!["--config", &cfg_str], vec!["mc_results.json", "mc_covariance.csv"]),
        ("kernel", vec![], vec!["kernel.csv"]),
        ("esd", vec![], vec!["esd_eigenvalues.csv", "esd_results.json"]),
        ("phi", vec![], vec!["phi.csv", "phi_results.json"]),
    ];
    for (sub, extra, files) in &cases {
        let d1 = run(sub, "1", &format!("{sub}_t1"), extra);
        let d2 = run(sub, "2", &format!("{sub}_t2"), extra);
        let d1b = run(sub, "1", &format!("{sub}_t1b"), extra);
        for f in files {
            let b1 = std::fs::read(d1.join(f)).unwrap();
            let b2 = std::fs::read(d2.join(f)).unwrap();
            let b1b = std::fs::read(d1b.join(f)).unwrap();
            let same = b1 == b2 && b1 == b1b;
            pass &= same;
            if !same {
                detail.push_str(&format!("{sub}/{f} differs; "));
            }
        }
    }
    if pass {
        detail = "mc/kernel/esd/phi outputs byte-identical for --threads 1 vs 2 and across reruns".into();
    }
    report(12, pass, &detail);
}
