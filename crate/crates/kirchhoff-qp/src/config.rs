//! TOML run configuration shared by the CLI and the C interface.
//!
//! ```toml
//! threads = 1
//!
//! [problem]
//! nu = 1
//! d = 1
//! epsilon = 1e-3
//! omega_bar = "sqrt2"          # preset name or explicit list
//! gamma0 = 0.1
//! lambda = 1.0
//! forcing = "cos_phi_cos_x"    # preset; or forcing_file = "f.json"
//!
//! [numerics]
//! box = 16                     # or box_phi / box_x
//! N0 = 8
//! max_steps = 8
//! tol = 1e-9
//!
//! [exponents]                  # optional, greedy defaults from tau
//! tau = 3.0
//!
//! [scan]
//! lambda_min = 0.5
//! lambda_max = 1.5
//! lambda_points = 200
//! N_list = [4, 8]
//!
//! [diagnose]
//! theta = 0.0
//! N = 4
//! ```

use crate::diophantine::{omega_bar_preset, FrequencyData};
use crate::error::{KqpError, Result};
use crate::fourier::{ModeBox, TorusFunction};
use crate::kirchhoff::ProblemData;
use crate::measure_scan::{lambda_grid, ScanOptions};
use crate::multiscale::{DiagnoseOptions, GoodnessParams};
use crate::nash_moser::{check_exponents, ExponentSet, NewtonOptions};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OmegaSpec {
    Preset(String),
    Explicit(Vec<f64>),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub nu: usize,
    pub d: usize,
    pub epsilon: f64,
    #[serde(default = "default_omega")]
    pub omega_bar: OmegaSpec,
    #[serde(default = "default_gamma0")]
    pub gamma0: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    pub forcing: Option<String>,
    pub forcing_file: Option<PathBuf>,
}

fn default_omega() -> OmegaSpec {
    OmegaSpec::Preset("default".into())
}
fn default_gamma0() -> f64 {
    1e-2
}
fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    #[serde(rename = "box")]
    pub box_size: Option<usize>,
    pub box_phi: Option<usize>,
    pub box_x: Option<usize>,
    #[serde(rename = "N0", default = "default_n0")]
    pub n0: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: u32,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_n0() -> f64 {
    8.0
}
fn default_max_steps() -> u32 {
    8
}
fn default_tol() -> f64 {
    1e-9
}

impl Default for NumericsSection {
    fn default() -> Self {
        NumericsSection { box_size: None, box_phi: None, box_x: None, n0: default_n0(), max_steps: default_max_steps(), tol: default_tol() }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsSection {
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub kappa3: Option<f64>,
    pub s0: Option<f64>,
    pub s1: Option<f64>,
    #[serde(rename = "S")]
    pub big_s: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    #[serde(default = "half")]
    pub lambda_min: f64,
    #[serde(default = "three_halves")]
    pub lambda_max: f64,
    #[serde(default = "default_points")]
    pub lambda_points: usize,
    #[serde(rename = "N_list", default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_j0")]
    pub j0_list: Vec<Vec<i32>>,
    #[serde(default = "one")]
    pub tau0: f64,
    #[serde(default = "two")]
    pub tau1: f64,
    #[serde(default = "default_dio_n0")]
    pub dio_n0: usize,
    #[serde(default = "default_max_coeff")]
    pub max_coeff: usize,
    #[serde(rename = "box", default = "default_scan_box")]
    pub box_size: usize,
    /// extra epsilons scanned for the trend (the problem epsilon is always included)
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

fn half() -> f64 {
    0.5
}
fn three_halves() -> f64 {
    1.5
}
fn two() -> f64 {
    2.0
}
fn default_points() -> usize {
    200
}
fn default_n_list() -> Vec<usize> {
    vec![4, 8]
}
fn default_j0() -> Vec<Vec<i32>> {
    vec![]
}
fn default_dio_n0() -> usize {
    4
}
fn default_max_coeff() -> usize {
    1
}
fn default_scan_box() -> usize {
    8
}

impl Default for ScanSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    #[serde(default)]
    pub theta: f64,
    #[serde(rename = "N", default = "default_diag_n")]
    pub n: usize,
    pub j0: Option<Vec<i32>>,
    pub ambient_radius: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: i32,
    #[serde(rename = "C1", default = "two")]
    pub c1: f64,
    #[serde(default = "two")]
    pub tau1: f64,
    #[serde(default = "yes")]
    pub theta_scan: bool,
}

fn default_diag_n() -> usize {
    4
}
fn default_gamma() -> i32 {
    2
}
fn yes() -> bool {
    true
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub threads: Option<usize>,
    pub problem: ProblemSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub exponents: ExponentsSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub diagnose: DiagnoseSection,
    #[serde(skip)]
    pub hash: String,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Hex SHA-256 of the raw configuration text.
pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| KqpError::Config(e.to_string()))?;
        cfg.hash = config_hash(text);
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KqpError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.nu == 0 || p.d == 0 {
            return Err(KqpError::Config("problem.nu and problem.d must be at least 1".into()));
        }
        if p.nu + p.d > crate::fourier::MAX_DIM {
            return Err(KqpError::Config(format!("problem.nu + problem.d must not exceed {}", crate::fourier::MAX_DIM)));
        }
        if !(p.lambda > 0.0) {
            return Err(KqpError::Config("problem.lambda must be positive".into()));
        }
        match (&p.forcing, &p.forcing_file) {
            (Some(_), Some(_)) => return Err(KqpError::Config("problem.forcing and problem.forcing_file are exclusive".into())),
            (None, None) => return Err(KqpError::Config("problem.forcing (or problem.forcing_file) is required".into())),
            (_, Some(f)) if !self.base_dir.join(f).exists() => {
                return Err(KqpError::Config(format!("problem.forcing_file: {} does not exist", f.display())))
            }
            _ => {}
        }
        if self.numerics.n0 <= 1.0 {
            return Err(KqpError::Config("numerics.N0 must exceed 1".into()));
        }
        if !(self.numerics.tol >= 0.0) {
            return Err(KqpError::Config("numerics.tol must be nonnegative".into()));
        }
        if self.scan.lambda_points == 0 || self.scan.lambda_min > self.scan.lambda_max {
            return Err(KqpError::Config("scan: empty lambda grid".into()));
        }
        if self.threads == Some(0) {
            return Err(KqpError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn omega_bar(&self) -> Result<Vec<f64>> {
        match &self.problem.omega_bar {
            OmegaSpec::Preset(name) => omega_bar_preset(name, self.problem.nu),
            OmegaSpec::Explicit(v) if v.len() == self.problem.nu => Ok(v.clone()),
            OmegaSpec::Explicit(v) => Err(KqpError::Config(format!("problem.omega_bar has {} entries, nu = {}", v.len(), self.problem.nu))),
        }
    }

    pub fn work_box(&self) -> ModeBox {
        let b = self.numerics.box_size.unwrap_or(8);
        ModeBox::new(self.problem.nu, self.problem.d, self.numerics.box_phi.unwrap_or(b), self.numerics.box_x.unwrap_or(b))
    }

    pub fn forcing(&self) -> Result<TorusFunction> {
        let (nu, d) = (self.problem.nu, self.problem.d);
        if let Some(f) = &self.problem.forcing_file {
            let path = self.base_dir.join(f);
            let text = std::fs::read_to_string(&path).map_err(|e| KqpError::Io(format!("{}: {e}", path.display())))?;
            let f = TorusFunction::from_json(&text).map_err(|e| KqpError::Config(format!("problem.forcing_file: {e}")))?;
            if (f.nu(), f.d()) != (nu, d) {
                return Err(KqpError::Config("problem.forcing_file: dimensions differ from problem.nu/d".into()));
            }
            return Ok(f);
        }
        forcing_preset(self.problem.forcing.as_deref().unwrap_or(""), nu, d)
    }

    pub fn problem_data(&self) -> Result<ProblemData> {
        let fd = FrequencyData::new(self.omega_bar()?, self.problem.gamma0)?;
        ProblemData::new(fd, self.problem.epsilon, self.forcing()?)
    }

    /// Exponents with unspecified fields taken from the greedy feasible set.
    pub fn exponents(&self) -> ExponentSet {
        let e = &self.exponents;
        let g = ExponentSet::greedy(self.problem.nu, self.problem.d, e.tau.unwrap_or(3.0));
        ExponentSet {
            tau: e.tau.unwrap_or(g.tau),
            delta: e.delta.unwrap_or(g.delta),
            kappa1: e.kappa1.unwrap_or(g.kappa1),
            kappa2: e.kappa2.unwrap_or(g.kappa2),
            kappa3: e.kappa3.unwrap_or(g.kappa3),
            s0: e.s0.unwrap_or(g.s0),
            s1: e.s1.unwrap_or(g.s1),
            big_s: e.big_s.unwrap_or(g.big_s),
            sigma: e.sigma.unwrap_or(g.sigma),
        }
    }

    /// Exponents, rejected with ExponentViolation unless `override_check`.
    pub fn checked_exponents(&self, override_check: bool) -> Result<ExponentSet> {
        let es = self.exponents();
        let (ok, why) = check_exponents(&es);
        if !ok && !override_check {
            return Err(KqpError::ExponentViolation(format!("[exponents] {}", why.join("; "))));
        }
        Ok(es)
    }

    pub fn newton_options(&self) -> NewtonOptions {
        NewtonOptions { n0: self.numerics.n0, max_steps: self.numerics.max_steps, tol: self.numerics.tol, work: self.work_box() }
    }

    pub fn scan_options(&self, es: &ExponentSet) -> ScanOptions {
        let s = &self.scan;
        let (nu, d) = (self.problem.nu, self.problem.d);
        let j0_list = if s.j0_list.is_empty() {
            let mut e1 = vec![0; d];
            e1[0] = 1;
            vec![e1]
        } else {
            s.j0_list.clone()
        };
        let mut newton = self.newton_options();
        newton.work = ModeBox::new(nu, d, s.box_size, s.box_size);
        ScanOptions {
            lambda_grid: lambda_grid(s.lambda_min, s.lambda_max, s.lambda_points),
            n_list: s.n_list.clone(),
            j0_list,
            tau0: s.tau0,
            tau1: s.tau1,
            n0: s.dio_n0,
            max_coeff: s.max_coeff,
            newton,
            exponents: es.clone(),
        }
    }

    pub fn diagnose_options(&self, es: &ExponentSet) -> DiagnoseOptions {
        let g = &self.diagnose;
        let d = self.problem.d;
        let j0 = g.j0.clone().unwrap_or_else(|| {
            let mut e1 = vec![0; d];
            e1[0] = 1;
            e1
        });
        let n = g.n;
        DiagnoseOptions {
            j0,
            ambient_radius: g.ambient_radius.unwrap_or(2 * n),
            gamma: g.gamma,
            c1: g.c1,
            tau1: g.tau1,
            goodness: GoodnessParams::from_exponents(es),
            theta_range: if g.theta_scan { Some(crate::measure_scan::theta_range(d, n)) } else { None },
        }
    }
}

/// Named forcings, all with zero total average.
pub fn forcing_preset(name: &str, nu: usize, d: usize) -> Result<TorusFunction> {
    let l1 = |s: i32| {
        let mut v = vec![0; nu];
        v[0] = s;
        v
    };
    let mut j1 = vec![0; d];
    j1[0] = 1;
    let f = TorusFunction::zeros(nu, d, 2, 2);
    Ok(match name {
        // cos(phi_1) cos(x_1)
        "cos_phi_cos_x" => f.with_cos(&l1(1), &j1, 0.5).with_cos(&l1(-1), &j1, 0.5),
        "cos_x" => f.with_cos(&vec![0; nu], &j1, 1.0),
        // adds an x-independent part, exercising v0
        "mixed" => f.with_cos(&l1(1), &j1, 0.5).with_cos(&l1(-1), &j1, 0.5).with_cos(&l1(2), &vec![0; d], 1.0),
        other => return Err(KqpError::Config(format!("problem.forcing: unknown preset '{other}'"))),
    })
}
