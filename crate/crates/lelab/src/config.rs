//! Run configuration: a single JSON document, every key optional.

use std::fmt;
use std::path::Path;

use lelab_core::monotonicity::{geometric_radii, ScanConfig};
use lelab_core::solver::{schedule, SolverOptions};
use lelab_core::symmetric::MAX_K;
use lelab_core::{gamma_q, Point, ProblemParams};
use serde::{Deserialize, Serialize};

/// A configuration that does not parse or violates a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Grid size used by `--fast`.
pub const FAST_N: usize = 129;

pub const ALL_CRITERIA: [u32; 15] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Optional; must match the pipeline named on the command line.
    pub pipeline: Option<String>,
    pub q: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub n: usize,
    pub eps0: f64,
    pub eps_steps: usize,
    pub tol: f64,
    pub k: u32,
    pub centers: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
    pub scales: Vec<f64>,
    /// Filled from `q` when absent: `[0, q, 2]`.
    pub t_list: Option<Vec<f64>>,
    /// Filled from `q` when absent: `[[1, q], [γ_q, q], [γ_q, 2]]`.
    pub gt_pairs: Option<Vec<[f64; 2]>>,
    pub seed: u64,
    /// Field analysed by `scan`, `nodal` and `blowup`: `"sector"`,
    /// `"one_phase"`, or the path of a field dump.
    pub field: String,
    pub w0: f64,
    pub w0p: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    /// Acceptance criteria run by `verify-all`.
    pub criteria: Vec<u32>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            pipeline: None,
            q: 0.5,
            lambda_plus: 1.0,
            lambda_minus: 1.0,
            n: 257,
            eps0: 0.1,
            eps_steps: 14,
            tol: 1e-8,
            k: 2,
            centers: vec![[0.0, 0.0]],
            radii: geometric_radii(0.125, 0.6, 12).expect("static radii"),
            scales: vec![0.8, 0.4, 0.2, 0.1],
            t_list: None,
            gt_pairs: None,
            seed: 0,
            field: "sector".into(),
            w0: 0.0,
            w0p: 1.0,
            t_end: 10.0,
            dt: 1e-4,
            criteria: ALL_CRITERIA.to_vec(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills the `q`-dependent defaults.
    pub fn resolved(mut self) -> Self {
        let q = self.q;
        if self.t_list.is_none() {
            self.t_list = Some(vec![0.0, q, 2.0]);
        }
        if self.gt_pairs.is_none() && q > 0.0 && q < 1.0 {
            let g = 2.0 / (2.0 - q);
            self.gt_pairs = Some(vec![[1.0, q], [g, q], [g, 2.0]]);
        }
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q = {} violates 0 < q < 1", self.q));
        }
        for (name, v) in [("lambda_plus", self.lambda_plus), ("lambda_minus", self.lambda_minus)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be finite and >= 0"));
            }
        }
        if self.n < 33 || self.n % 2 == 0 {
            return bad(format!("n = {} must be odd and >= 33", self.n));
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad(format!("eps0 = {} must be positive", self.eps0));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol = {} must be positive", self.tol));
        }
        if !(1..=MAX_K).contains(&self.k) {
            return bad(format!("k = {} must lie in 1..={MAX_K}", self.k));
        }
        if self.centers.iter().flatten().any(|c| !c.is_finite()) {
            return bad("centers must be finite");
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) || self.radii.windows(2).any(|w| w[1] <= w[0]) {
            return bad("radii must be positive and increasing");
        }
        if self.scales.iter().any(|r| !(*r > 0.0)) || self.scales.windows(2).any(|w| w[1] >= w[0]) {
            return bad("scales must be positive and decreasing");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("T = {} must be finite and >= 0", self.t_end));
        }
        if !(self.w0.is_finite() && self.w0p.is_finite()) {
            return bad("w0 and w0p must be finite");
        }
        if let Some(c) = self.criteria.iter().find(|c| !ALL_CRITERIA.contains(c)) {
            return bad(format!("unknown criterion {c}"));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ProblemParams, ConfigError> {
        ProblemParams::new(self.q, self.lambda_plus, self.lambda_minus).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn schedule(&self) -> Vec<f64> {
        schedule(self.eps0, self.eps_steps)
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, ..SolverOptions::default() }
    }

    pub fn gamma(&self) -> f64 {
        gamma_q(self.q).unwrap_or(f64::NAN)
    }

    pub fn center_points(&self) -> Vec<Point> {
        self.centers.iter().map(|c| Point::new(c[0], c[1])).collect()
    }

    pub fn scan_config(&self) -> ScanConfig {
        let r = self.clone().resolved();
        ScanConfig {
            t_list: r.t_list.unwrap_or_default(),
            gt_pairs: r.gt_pairs.unwrap_or_default().into_iter().map(|p| (p[0], p[1])).collect(),
            dr: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c, Config::default());
        c.validate().unwrap();
    }

    #[test]
    fn minimal_profile_config() {
        let c = Config::from_json(r#"{"pipeline": "profile1d", "q": 0.5, "w0p": 1.0, "T": 10}"#).unwrap();
        assert_eq!(c.pipeline.as_deref(), Some("profile1d"));
        assert_eq!(c.t_end, 10.0);
        c.validate().unwrap();
    }

    #[test]
    fn bound_violation_names_the_bound() {
        let c = Config::from_json(r#"{"q": 1.5}"#).unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("0 < q < 1"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Config::from_json(r#"{"qq": 0.5}"#).is_err());
        assert!(Config::from_json(r#"{"n": "big"}"#).is_err());
    }

    #[test]
    fn resolved_defaults_follow_q() {
        let c = Config::from_json(r#"{"q": 0.4}"#).unwrap().resolved();
        assert_eq!(c.t_list.unwrap(), vec![0.0, 0.4, 2.0]);
        let g = 2.0 / 1.6;
        assert_eq!(c.gt_pairs.unwrap(), vec![[1.0, 0.4], [g, 0.4], [g, 2.0]]);
    }

    #[test]
    fn default_radii_fit_coarse_grids() {
        let c = Config::default();
        assert!((c.radii[0] - 0.125).abs() < 1e-15);
        assert!((c.radii.last().unwrap() - 0.6).abs() < 1e-12);
    }
}
