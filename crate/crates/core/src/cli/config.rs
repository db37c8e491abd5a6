//! Flat `key = value` experiment configs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::la::ordering;
use crate::msgfem::CoarsePolicy;
use crate::problems::{self, ProblemParams};
use crate::solvers;

pub const OUT_DIR_ENV: &str = "MSGFEM_OUT_DIR";

const KEYS: &[&str] = &[
    "problem",
    "cells",
    "fill",
    "sigma_air",
    "h_inv",
    "mesh_n",
    "n_holes",
    "hole_cells",
    "hole_gap",
    "m",
    "overlap",
    "ovsp",
    "ovsp_sweep",
    "n_loc",
    "n_loc_sweep",
    "coarse_tol",
    "solver",
    "inner",
    "tol",
    "max_iter",
    "ordering",
    "workers",
    "output_dir",
    "subdomains",
    "flat_tol",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubdomainSelection {
    MostInterior,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub params: ProblemParams,
    pub m: usize,
    pub overlap: usize,
    pub ovsp: usize,
    /// Oversampling layers swept by `eigdecay`; defaults to `[ovsp]`.
    pub ovsp_sweep: Vec<usize>,
    pub coarse: CoarsePolicy,
    /// Local space sizes swept by `approx`.
    pub n_loc_sweep: Vec<usize>,
    pub solver: String,
    pub inner: String,
    pub tol: f64,
    pub max_iter: usize,
    pub ordering: String,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub subdomains: SubdomainSelection,
    /// Relative tolerance of the flat eigenvalue prefix in `topo`.
    pub flat_tol: f64,
    /// SHA-256 of the normalized key/value set.
    pub hash: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "smc".into(),
            params: ProblemParams::default(),
            m: 4,
            overlap: 2,
            ovsp: 8,
            ovsp_sweep: vec![8],
            coarse: CoarsePolicy::Fixed(15),
            n_loc_sweep: vec![5, 10, 20, 40],
            solver: "gmres".into(),
            inner: "energy".into(),
            tol: 1e-6,
            max_iter: 200,
            ordering: "nd".into(),
            workers: 1,
            output_dir: PathBuf::from("out"),
            subdomains: SubdomainSelection::MostInterior,
            flat_tol: 0.05,
            hash: String::new(),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", no + 1), format!("expected key = value, got `{line}`")))?;
        out.push((k.trim().to_string(), v.trim().to_string()))
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn list(key: &str, v: &str) -> Result<Vec<usize>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        let mut pairs = parse_pairs(&text)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::config(o.as_str(), "override must have the form key=value"))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::from_pairs(&pairs)
    }

    /// Later pairs override earlier ones. Unknown keys and bad values are
    /// errors naming the field.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::config(k.as_str(), "unknown key"));
            }
            map.insert(k.clone(), v.clone());
        }
        let mut c = RunConfig::default();
        let mut sweep_set = false;
        for (k, v) in &map {
            let v = v.as_str();
            match k.as_str() {
                "problem" => c.problem = v.into(),
                "cells" => c.params.cells = num(k, v)?,
                "fill" => c.params.fill = num(k, v)?,
                "sigma_air" => c.params.sigma_air = num(k, v)?,
                "h_inv" => c.params.h_inv = num(k, v)?,
                "mesh_n" => c.params.mesh_n = num(k, v)?,
                "n_holes" => c.params.n_holes = num(k, v)?,
                "hole_cells" => c.params.hole_cells = num(k, v)?,
                "hole_gap" => c.params.hole_gap = num(k, v)?,
                "m" => c.m = num(k, v)?,
                "overlap" => c.overlap = num(k, v)?,
                "ovsp" => c.ovsp = num(k, v)?,
                "ovsp_sweep" => {
                    c.ovsp_sweep = list(k, v)?;
                    sweep_set = true;
                }
                "n_loc" => c.coarse = CoarsePolicy::Fixed(num(k, v)?),
                "n_loc_sweep" => c.n_loc_sweep = list(k, v)?,
                "coarse_tol" => {}
                "solver" => c.solver = v.into(),
                "inner" => c.inner = v.into(),
                "tol" => c.tol = num(k, v)?,
                "max_iter" => c.max_iter = num(k, v)?,
                "ordering" => c.ordering = v.into(),
                "workers" => c.workers = num(k, v)?,
                "output_dir" => c.output_dir = PathBuf::from(v),
                "subdomains" => {
                    c.subdomains = match v {
                        "interior" => SubdomainSelection::MostInterior,
                        "all" => SubdomainSelection::All,
                        _ => return Err(Error::config(k.as_str(), "expected `interior` or `all`")),
                    }
                }
                "flat_tol" => c.flat_tol = num(k, v)?,
                _ => unreachable!(),
            }
        }
        if let Some(v) = map.get("coarse_tol") {
            if map.contains_key("n_loc") {
                return Err(Error::config("coarse_tol", "give either n_loc or coarse_tol, not both"));
            }
            c.coarse = CoarsePolicy::Tolerance(num("coarse_tol", v)?);
        }
        if !sweep_set {
            c.ovsp_sweep = vec![c.ovsp];
        }
        let canonical: String = map.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        c.hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        problems::default_registry().get(&self.problem)?;
        solvers::default_registry().get(&self.solver)?;
        solvers::inner_product_registry().get(&self.inner)?;
        ordering::default_registry().get(&self.ordering)?;
        let p = &self.params;
        let positive = [
            ("cells", p.cells),
            ("h_inv", p.h_inv),
            ("mesh_n", p.mesh_n),
            ("hole_cells", p.hole_cells),
            ("m", self.m),
            ("workers", self.workers),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(Error::config(k, "must be positive"));
            }
        }
        if !(p.fill > 0.0 && p.fill <= 1.0) {
            return Err(Error::config("fill", "must lie in (0, 1]"));
        }
        if !(p.sigma_air > 0.0 && p.sigma_air.is_finite()) {
            return Err(Error::config("sigma_air", "must be positive"));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::config("tol", "must lie in (0, 1)"));
        }
        if !(self.flat_tol >= 0.0 && self.flat_tol < 1.0) {
            return Err(Error::config("flat_tol", "must lie in [0, 1)"));
        }
        if let CoarsePolicy::Tolerance(t) = self.coarse {
            if !(t > 0.0) {
                return Err(Error::config("coarse_tol", "must be positive"));
            }
        }
        if self.ovsp_sweep.is_empty() {
            return Err(Error::config("ovsp_sweep", "must not be empty"));
        }
        if self.n_loc_sweep.is_empty() {
            return Err(Error::config("n_loc_sweep", "must not be empty"));
        }
        Ok(())
    }

    /// Output directory, with the environment override applied.
    pub fn out_dir(&self) -> PathBuf {
        std::env::var_os(OUT_DIR_ENV).map_or_else(|| self.output_dir.clone(), PathBuf::from)
    }

    /// Comment line written at the top of every CSV.
    pub fn provenance(&self) -> String {
        format!("# msgfem {} config_sha256={}", env!("CARGO_PKG_VERSION"), self.hash)
    }
}
