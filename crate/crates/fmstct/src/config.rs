//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::ScanConfig;

/// Reconstruction algorithm selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    FdBpf,
    FsBpf,
    FwFbp,
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fd-bpf" => Ok(Algorithm::FdBpf),
            "fs-bpf" => Ok(Algorithm::FsBpf),
            "fw-fbp" => Ok(Algorithm::FwFbp),
            other => Err(Error::config(
                "algorithm",
                format!("unknown algorithm `{other}` (expected fd-bpf, fs-bpf or fw-fbp)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::FdBpf => "fd-bpf",
            Algorithm::FsBpf => "fs-bpf",
            Algorithm::FwFbp => "fw-fbp",
        }
    }
}

/// One experiment: scan geometry, phantom, algorithm and output options.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub l: f64,
    pub h: f64,
    pub lambda_m: f64,
    pub n_source: usize,
    pub j_detectors: usize,
    pub pixel_pitch: f64,
    /// Phantom description file; relative paths resolve against the config
    /// file's directory.
    pub phantom: PathBuf,
    /// Reconstruction grid is `grid x grid` pixels covering the FOV square.
    pub grid: usize,
    pub algorithm: Algorithm,
    /// W-Line angle in degrees.
    pub phi_deg: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Also write per-segment DBP and partial images.
    pub save_partials: bool,
}

impl ExperimentConfig {
    pub fn scan(&self) -> Result<ScanConfig> {
        ScanConfig::new(self.l, self.h, self.lambda_m, self.n_source, self.j_detectors, self.pixel_pitch)
    }

    pub fn phi(&self) -> f64 {
        self.phi_deg.to_radians()
    }

    /// Header echo of every config value, for output provenance.
    pub fn echo(&self) -> Vec<(String, String)> {
        vec![
            ("cfg.l".into(), self.l.to_string()),
            ("cfg.h".into(), self.h.to_string()),
            ("cfg.lambda_m".into(), self.lambda_m.to_string()),
            ("cfg.n_source".into(), self.n_source.to_string()),
            ("cfg.j_detectors".into(), self.j_detectors.to_string()),
            ("cfg.pixel_pitch".into(), self.pixel_pitch.to_string()),
            ("cfg.phantom".into(), self.phantom.display().to_string()),
            ("cfg.grid".into(), self.grid.to_string()),
            ("cfg.algorithm".into(), self.algorithm.name().to_string()),
            ("cfg.phi_deg".into(), self.phi_deg.to_string()),
            ("cfg.seed".into(), self.seed.to_string()),
        ]
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            let key = k.trim().to_string();
            if map.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::config(key, "duplicate key"));
            }
        }
        let mut take = |key: &str| map.remove(key);
        let required = |key: &str, v: Option<String>| {
            v.ok_or_else(|| Error::config(key, "missing required key"))
        };
        fn num<T: std::str::FromStr>(key: &str, v: String) -> Result<T> {
            v.parse().map_err(|_| Error::config(key, format!("unparsable value `{v}`")))
        }
        let resolve = |p: String| {
            let path = PathBuf::from(p);
            if path.is_absolute() { path } else { base_dir.join(path) }
        };

        let cfg = ExperimentConfig {
            l: num("l", required("l", take("l"))?)?,
            h: num("h", required("h", take("h"))?)?,
            lambda_m: num("lambda_m", required("lambda_m", take("lambda_m"))?)?,
            n_source: num("n_source", required("n_source", take("n_source"))?)?,
            j_detectors: num("j_detectors", required("j_detectors", take("j_detectors"))?)?,
            pixel_pitch: num("pixel_pitch", required("pixel_pitch", take("pixel_pitch"))?)?,
            phantom: resolve(required("phantom", take("phantom"))?),
            grid: num("grid", required("grid", take("grid"))?)?,
            algorithm: Algorithm::parse(&required("algorithm", take("algorithm"))?)?,
            phi_deg: match take("phi_deg") {
                Some(v) => num("phi_deg", v)?,
                None => 135.0,
            },
            out_dir: resolve(take("out_dir").unwrap_or_else(|| "out".into())),
            seed: match take("seed") {
                Some(v) => num("seed", v)?,
                None => 0,
            },
            save_partials: match take("save_partials") {
                Some(v) => match v.as_str() {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => {
                        return Err(Error::config(
                            "save_partials",
                            format!("expected true/false, got `{other}`"),
                        ))
                    }
                },
                None => false,
            },
        };
        if let Some((key, _)) = map.into_iter().next() {
            return Err(Error::config(key, "unknown key"));
        }
        if cfg.grid < 8 {
            return Err(Error::config("grid", format!("grid must be at least 8, got {}", cfg.grid)));
        }
        if !(cfg.phi_deg > 90.0 && cfg.phi_deg < 180.0) {
            return Err(Error::config(
                "phi_deg",
                format!("W-Line angle must lie in (90, 180) degrees, got {}", cfg.phi_deg),
            ));
        }
        cfg.scan()?; // surface geometry problems at parse time
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }
}
