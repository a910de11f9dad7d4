//! Run-configuration JSON schemas. Every command resolves its config (file
//! or built-in default, then CLI overrides), and the canonical serialized
//! form is hashed into the provenance header of every output file.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use hht_rmt::{Error, Result};

pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let canon = serde_json::to_string(cfg).expect("config serialization");
    let digest = Sha256::digest(canon.as_bytes());
    let mut hex = String::new();
    for b in digest.iter().take(8) {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadTols {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for QuadTols {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
        }
    }
}

impl QuadTols {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Validation(format!(
                "quadrature tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        Ok(())
    }

    pub fn to_config(&self) -> hht_rmt::quadrature::QuadratureConfig {
        hht_rmt::quadrature::QuadratureConfig::with_tols(self.rel_tol, self.abs_tol)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapSetsConfig {
    pub rows_i: Vec<usize>,
    pub rows_j: Vec<usize>,
    pub cols_i: Vec<usize>,
    pub cols_j: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BandConfig {
    /// relative band as a fraction of |C_theory|
    pub rel: f64,
    /// multiple of the jackknife SE
    pub se_mult: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            rel: 0.25,
            se_mult: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub y: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub truncate: bool,
    /// grid points as [re, im] pairs
    pub z_grid: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapSetsConfig>,
    #[serde(default)]
    pub bands: BandConfig,
    #[serde(default)]
    pub quad: QuadTols,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            epsilon: 0.01,
            y: 0.5,
            n: 50,
            m: 20,
            seed: 20250810,
            truncate: true,
            z_grid: vec![[0.0, 2.0], [0.0, -2.0], [1.0, 2.0]],
            overlap: None,
            bands: BandConfig::default(),
            quad: QuadTols::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    pub alpha: f64,
    pub y: f64,
    /// subset of {"A","B","C"}
    pub routes: Vec<String>,
    /// (z, w) pairs as [[z_re, z_im], [w_re, w_im]]
    pub pairs: Vec<[[f64; 2]; 2]>,
    /// route-A-vs-C acceptance tolerance
    pub tol_a: f64,
    /// route-B-vs-C acceptance tolerance
    pub tol_b: f64,
    #[serde(default)]
    pub quad: QuadTols,
    #[serde(default = "default_quad_a")]
    pub quad_a: QuadTols,
    pub seed: u64,
}

fn default_quad_a() -> QuadTols {
    QuadTols {
        rel_tol: 1e-5,
        abs_tol: 1e-12,
    }
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            y: 0.5,
            routes: vec!["A".into(), "B".into(), "C".into()],
            pairs: vec![
                [[0.0, 2.0], [1.0, 2.0]],
                [[0.0, 2.0], [0.0, -2.0]],
                [[1.0, 1.0], [-1.0, 0.5]],
                [[0.0, 3.0], [0.0, 3.0]],
            ],
            tol_a: 1e-3,
            tol_b: 1e-8,
            quad: QuadTols::default(),
            quad_a: default_quad_a(),
            seed: 20250810,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EsdConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub y: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub truncate: bool,
    pub replicas: usize,
    pub ks_threshold: f64,
    #[serde(default)]
    pub quad: QuadTols,
}

impl Default for EsdConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            epsilon: 0.01,
            y: 0.5,
            n: 400,
            seed: 20250810,
            truncate: true,
            replicas: 1,
            ks_threshold: 0.05,
            quad: QuadTols::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub n_list: Vec<usize>,
    /// λ values as [re, im] with im ≤ 0
    pub lambdas: Vec<[f64; 2]>,
}

impl Default for PhiConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            epsilon: 0.01,
            seed: 20250810,
            n_list: vec![1_000, 10_000, 100_000, 1_000_000],
            lambdas: vec![[1.0, -1.0], [0.0, -2.0]],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub alphas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub quad: QuadTols,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            alphas: vec![2.5, 3.0, 3.5],
            trials: 100,
            seed: 20250810,
        quad: QuadTols::default(),
        }
    }
}

pub fn load_config<T: serde::de::DeserializeOwned + Default>(path: Option<&std::path::Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Validation(format!("malformed config {}: {e}", p.display())))
        }
    }
}
