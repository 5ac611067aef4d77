//! Flat `key = value` run configuration.
//!
//! Keys are dotted (`geometry.n = 64`); a `[geometry]` line prefixes the
//! keys that follow it. `#` starts a comment. Unset keys keep their
//! defaults, unknown keys are rejected.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mollify_core::operators::{operator_norm_estimate, GeometryConfig, MollifierSpec};
use mollify_core::preprocessing::PreprocessMethod;
use mollify_core::proximal::{LambdaSchedule, ProxConfig};
use mollify_core::pseudoinverse::TruncationPolicy;
use mollify_core::simulation::{Ellipse, NoiseSpec, PhantomSpec};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

/// Power iterations used for every operator-norm estimate.
pub const NORM_ITERATIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreprocessKind {
    Ppa,
    TikhonovPpa,
    TruncatedSvd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    Harmonic,
    Geometric,
}

impl PreprocessKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ppa => "ppa",
            Self::TikhonovPpa => "tikhonov_ppa",
            Self::TruncatedSvd => "truncated_svd",
        }
    }
}

impl ScheduleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Constant => "constant",
            Self::Harmonic => "harmonic",
            Self::Geometric => "geometric",
        }
    }
}

/// Preprocessing parameters. Step sizes and shifts are relative:
/// `λ = value / ‖R‖²` and `ε = epsilon_rel · ‖R‖²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessSettings {
    pub kind: PreprocessKind,
    pub epsilon_rel: f64,
    pub schedule: ScheduleKind,
    pub lambda0_rel: f64,
    pub ratio: f64,
    pub lambda_min_rel: f64,
    pub outer_tol: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Singular values below `svd_threshold_rel · s_max` are dropped; 0 keeps all.
    pub svd_threshold_rel: f64,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        Self {
            kind: PreprocessKind::TikhonovPpa,
            epsilon_rel: 1e-3,
            schedule: ScheduleKind::Geometric,
            lambda0_rel: 100.0,
            ratio: 0.7,
            lambda_min_rel: 1.0,
            outer_tol: 1e-2,
            max_outer: 200,
            inner_tol: 1e-8,
            max_inner: 1000,
            svd_threshold_rel: 0.0,
        }
    }
}

impl PreprocessSettings {
    /// Concrete method for a projector of norm `r_norm`.
    pub fn method(&self, r_norm: f64) -> PreprocessMethod {
        let norm_sq = r_norm * r_norm;
        let epsilon = match self.kind {
            PreprocessKind::TikhonovPpa => self.epsilon_rel * norm_sq,
            _ => 0.0,
        };
        let schedule = match self.schedule {
            ScheduleKind::Constant => LambdaSchedule::Constant(self.lambda0_rel / norm_sq),
            ScheduleKind::Harmonic => LambdaSchedule::Harmonic { lambda0: self.lambda0_rel / norm_sq },
            ScheduleKind::Geometric => LambdaSchedule::GeometricFloor {
                lambda0: self.lambda0_rel / norm_sq,
                ratio: self.ratio,
                floor: self.lambda_min_rel / norm_sq,
            },
        };
        let config = ProxConfig {
            epsilon,
            outer_tol: self.outer_tol,
            max_outer: self.max_outer,
            inner_tol: self.inner_tol,
            max_inner: self.max_inner,
        };
        match self.kind {
            PreprocessKind::Ppa => PreprocessMethod::Ppa { schedule, config },
            PreprocessKind::TikhonovPpa => PreprocessMethod::TikhonovPpa { schedule, config },
            PreprocessKind::TruncatedSvd => {
                let policy = if self.svd_threshold_rel > 0.0 {
                    TruncationPolicy::Threshold(self.svd_threshold_rel * r_norm)
                } else {
                    TruncationPolicy::Exact
                };
                PreprocessMethod::truncated_svd(policy)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconSettings {
    /// Penalty weight before scaling by `‖R‖² / ‖H‖²`.
    pub alpha: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub positivity: bool,
}

impl Default for ReconSettings {
    fn default() -> Self {
        Self { alpha: 0.11, tol: 1e-4, max_iters: 500, positivity: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub phantom: PhantomSpec,
    pub noise: NoiseSpec,
    pub cutoffs: Vec<f64>,
    pub preprocess: PreprocessSettings,
    pub recon: ReconSettings,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let n = 64;
        Self {
            geometry: GeometryConfig::ideal(n, 64, 64)
                .with_response(GeometryConfig::DEFAULT_SIGMA0, GeometryConfig::DEFAULT_SIGMA_SLOPE),
            phantom: PhantomSpec::shepp_logan(n),
            noise: NoiseSpec { target_total_counts: 50065.0, seed: 1 },
            cutoffs: vec![0.5, 0.6, 0.7, 0.8],
            preprocess: PreprocessSettings::default(),
            recon: ReconSettings::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn config_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> AppResult<T> {
    value.parse().map_err(|_| config_err(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> AppResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(config_err(format!("{key}: expected true or false, got {value:?}"))),
    }
}

/// One ellipse per line: centre x, centre y, semi-axes a and b, rotation in
/// degrees, intensity. Blank lines and `#` comments are skipped.
pub fn parse_ellipses(text: &str) -> AppResult<Vec<Ellipse>> {
    let mut ellipses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| parse_num(&format!("ellipse line {}", i + 1), t))
            .collect::<AppResult<_>>()?;
        if nums.len() != 6 {
            return Err(config_err(format!("ellipse line {}: expected 6 numbers, found {}", i + 1, nums.len())));
        }
        let e = Ellipse::new(nums[0], nums[1], nums[2], nums[3], nums[4], nums[5]);
        e.validate().map_err(|err| config_err(format!("ellipse line {}: {err}", i + 1)))?;
        ellipses.push(e);
    }
    if ellipses.is_empty() {
        return Err(config_err("phantom file has no ellipses"));
    }
    Ok(ellipses)
}

impl RunConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Parses `text`; relative file references resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> AppResult<Self> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        let mut phantom_file = None;
        let mut inline = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let key = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
            let value = value.trim().trim_matches('"');
            if key == "phantom.file" {
                phantom_file = Some(base.join(value));
            } else if let Some(index) = key.strip_prefix("phantom.ellipse.") {
                let index: usize = parse_num(&key, index)?;
                inline.push((index, value.to_string()));
            } else {
                cfg.set(&key, value)?;
            }
        }
        cfg.phantom.n = cfg.geometry.n;
        if let Some(path) = phantom_file {
            let text = fs::read_to_string(&path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            cfg.phantom.ellipses = parse_ellipses(&text)?;
        } else if !inline.is_empty() {
            inline.sort_by_key(|(i, _)| *i);
            let lines: Vec<String> = inline.into_iter().map(|(_, v)| v).collect();
            cfg.phantom.ellipses = parse_ellipses(&lines.join("\n"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str) -> AppResult<()> {
        let g = &mut self.geometry;
        let p = &mut self.preprocess;
        let r = &mut self.recon;
        match key {
            "geometry.n" => g.n = parse_num(key, value)?,
            "geometry.n_angles" => g.n_angles = parse_num(key, value)?,
            "geometry.n_bins" => g.n_bins = parse_num(key, value)?,
            "geometry.span_deg" => g.span_deg = parse_num(key, value)?,
            "geometry.response_sigma0" => g.response_sigma0 = parse_num(key, value)?,
            "geometry.response_sigma_slope" => g.response_sigma_slope = parse_num(key, value)?,
            "noise.target_total_counts" => self.noise.target_total_counts = parse_num(key, value)?,
            "noise.seed" => self.noise.seed = parse_num(key, value)?,
            "mollifier.cutoffs" => {
                self.cutoffs = value
                    .split(',')
                    .map(|t| t.trim())
                    .filter(|t| !t.is_empty())
                    .map(|t| parse_num(key, t))
                    .collect::<AppResult<_>>()?
            }
            "preprocess.method" => {
                p.kind = match value {
                    "ppa" => PreprocessKind::Ppa,
                    "tikhonov_ppa" => PreprocessKind::TikhonovPpa,
                    "truncated_svd" => PreprocessKind::TruncatedSvd,
                    _ => return Err(config_err(format!("{key}: unknown method {value:?}"))),
                }
            }
            "preprocess.epsilon_rel" => p.epsilon_rel = parse_num(key, value)?,
            "preprocess.schedule" => {
                p.schedule = match value {
                    "constant" => ScheduleKind::Constant,
                    "harmonic" => ScheduleKind::Harmonic,
                    "geometric" => ScheduleKind::Geometric,
                    _ => return Err(config_err(format!("{key}: unknown schedule {value:?}"))),
                }
            }
            "preprocess.lambda0_rel" => p.lambda0_rel = parse_num(key, value)?,
            "preprocess.ratio" => p.ratio = parse_num(key, value)?,
            "preprocess.lambda_min_rel" => p.lambda_min_rel = parse_num(key, value)?,
            "preprocess.outer_tol" => p.outer_tol = parse_num(key, value)?,
            "preprocess.max_outer" => p.max_outer = parse_num(key, value)?,
            "preprocess.inner_tol" => p.inner_tol = parse_num(key, value)?,
            "preprocess.max_inner" => p.max_inner = parse_num(key, value)?,
            "preprocess.svd_threshold_rel" => p.svd_threshold_rel = parse_num(key, value)?,
            "recon.alpha" => r.alpha = parse_num(key, value)?,
            "recon.tol" => r.tol = parse_num(key, value)?,
            "recon.max_iters" => r.max_iters = parse_num(key, value)?,
            "recon.positivity" => r.positivity = parse_bool(key, value)?,
            "output.dir" => self.output_dir = PathBuf::from(value),
            _ => return Err(config_err(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> AppResult<()> {
        let wrap = |e: mollify_core::Error| config_err(e.to_string());
        self.geometry.validate().map_err(wrap)?;
        if self.phantom.n != self.geometry.n {
            return Err(config_err("phantom size differs from geometry.n"));
        }
        for e in &self.phantom.ellipses {
            e.validate().map_err(wrap)?;
        }
        if !(self.noise.target_total_counts > 0.0 && self.noise.target_total_counts.is_finite()) {
            return Err(config_err("noise.target_total_counts must be positive"));
        }
        if self.cutoffs.is_empty() {
            return Err(config_err("mollifier.cutoffs is empty"));
        }
        for c in &self.cutoffs {
            MollifierSpec::hann(self.geometry.n, *c).validate().map_err(wrap)?;
        }
        let p = &self.preprocess;
        let positive = [p.lambda0_rel, p.lambda_min_rel, p.outer_tol, p.inner_tol];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(p.ratio > 0.0 && p.ratio <= 1.0) {
            return Err(config_err("preprocess step sizes, ratio and tolerances must be positive"));
        }
        if p.kind == PreprocessKind::TikhonovPpa && !(p.epsilon_rel > 0.0 && p.epsilon_rel.is_finite()) {
            return Err(config_err("tikhonov_ppa needs preprocess.epsilon_rel > 0"));
        }
        if !(p.svd_threshold_rel >= 0.0 && p.svd_threshold_rel < 1.0) {
            return Err(config_err("preprocess.svd_threshold_rel must lie in [0, 1)"));
        }
        if p.max_outer == 0 || p.max_inner == 0 {
            return Err(config_err("preprocess iteration limits must be positive"));
        }
        let r = &self.recon;
        if !(r.alpha > 0.0 && r.alpha.is_finite()) || !(r.tol > 0.0 && r.tol.is_finite()) || r.max_iters == 0 {
            return Err(config_err("recon.alpha, recon.tol and recon.max_iters must be positive"));
        }
        Ok(())
    }

    /// Every setting that influences results, one `key = value` per line.
    /// The output directory is excluded.
    pub fn canonical(&self) -> String {
        let g = &self.geometry;
        let p = &self.preprocess;
        let r = &self.recon;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("geometry.n", g.n.to_string());
        put("geometry.n_angles", g.n_angles.to_string());
        put("geometry.n_bins", g.n_bins.to_string());
        put("geometry.span_deg", format!("{:e}", g.span_deg));
        put("geometry.response_sigma0", format!("{:e}", g.response_sigma0));
        put("geometry.response_sigma_slope", format!("{:e}", g.response_sigma_slope));
        for (i, e) in self.phantom.ellipses.iter().enumerate() {
            put(
                &format!("phantom.ellipse.{i}"),
                format!(
                    "{:e} {:e} {:e} {:e} {:e} {:e}",
                    e.center_x, e.center_y, e.semi_axis_a, e.semi_axis_b, e.rotation_deg, e.intensity
                ),
            );
        }
        put("noise.target_total_counts", format!("{:e}", self.noise.target_total_counts));
        put("noise.seed", self.noise.seed.to_string());
        put("mollifier.cutoffs", self.cutoffs.iter().map(|c| format!("{c:e}")).collect::<Vec<_>>().join(","));
        put("preprocess.method", p.kind.as_str().to_string());
        put("preprocess.epsilon_rel", format!("{:e}", p.epsilon_rel));
        put("preprocess.schedule", p.schedule.as_str().to_string());
        put("preprocess.lambda0_rel", format!("{:e}", p.lambda0_rel));
        put("preprocess.ratio", format!("{:e}", p.ratio));
        put("preprocess.lambda_min_rel", format!("{:e}", p.lambda_min_rel));
        put("preprocess.outer_tol", format!("{:e}", p.outer_tol));
        put("preprocess.max_outer", p.max_outer.to_string());
        put("preprocess.inner_tol", format!("{:e}", p.inner_tol));
        put("preprocess.max_inner", p.max_inner.to_string());
        put("preprocess.svd_threshold_rel", format!("{:e}", p.svd_threshold_rel));
        put("recon.alpha", format!("{:e}", r.alpha));
        put("recon.tol", format!("{:e}", r.tol));
        put("recon.max_iters", r.max_iters.to_string());
        put("recon.positivity", r.positivity.to_string());
        s
    }

    /// SHA-256 of [`RunConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical().as_bytes()))
    }

    /// Operator norm by power iteration, seeded from the run seed.
    pub fn norm_estimate<M: mollify_core::LinearMap + ?Sized>(&self, map: &M) -> f64 {
        operator_norm_estimate(map, NORM_ITERATIONS, self.noise.seed)
    }
}
