//! The simulate → preprocess → reconstruct → evaluate pipeline.
//!
//! Stages talk to each other only through files in the output directory,
//! so any stage can be rerun on its own.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::thread;

use mollify_core::krylov::CgRecord;
use mollify_core::operators::{GeometryConfig, HighPass, ImageGrid, LinearMap, Mollifier, MollifierSpec, RadonProjector, Sinogram};
use mollify_core::preprocessing::{estimate_pinv, smoothed_projection};
use mollify_core::proximal::{ProxStatus, ProxTrace};
use mollify_core::reconstruction::{fbp_reconstruct, normalized_alpha, solve_problem_p_with, ReconProblem, ReconStatus};
use mollify_core::simulation::{normalized_error_against, poisson_corrupt, shepp_logan};

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::io;

pub const PHANTOM: &str = "phantom";
pub const SINO: &str = "sino";
pub const SINO_NOISY: &str = "sino_noisy";
pub const PINV: &str = "pinv";
pub const PINV_TRACE: &str = "pinv_trace.csv";
pub const METRICS: &str = "metrics.csv";
pub const ORDERING: &str = "ordering.txt";
pub const RESOLVED_CONFIG: &str = "config.resolved";

pub const PROX_TRACE_HEADER: &str = "k,lambda,objective,step_norm,inner_iters";
pub const CG_TRACE_HEADER: &str = "k,residual,backward_error,energy";
pub const METRICS_HEADER: &str = "cutoff,without_preproc,with_preproc,fbp";

/// File stems and trace names for one cutoff.
#[derive(Debug, Clone)]
pub struct CutoffFiles {
    pub prep_data: String,
    pub target: String,
    pub recon_noprep: String,
    pub recon_prep: String,
    pub fbp: String,
    pub trace_noprep: String,
    pub trace_prep: String,
}

impl CutoffFiles {
    pub fn new(cutoff: f64) -> Self {
        let tag = format!("{cutoff}");
        Self {
            prep_data: format!("sino_prep_{tag}"),
            target: format!("target_{tag}"),
            recon_noprep: format!("recon_noprep_{tag}"),
            recon_prep: format!("recon_prep_{tag}"),
            fbp: format!("fbp_{tag}"),
            trace_noprep: format!("trace_noprep_{tag}.csv"),
            trace_prep: format!("trace_prep_{tag}.csv"),
        }
    }
}

/// A run configuration bound to its output directory and hash.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub config: RunConfig,
    pub hash: String,
}

/// A stage that finished but left something unconverged.
#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub what: String,
    pub detail: String,
}

impl Workspace {
    pub fn new(config: RunConfig) -> AppResult<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self { config, hash })
    }

    pub fn dir(&self) -> &Path {
        &self.config.output_dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir().join(name)
    }

    fn raw_path(&self, stem: &str) -> PathBuf {
        self.path(&format!("{stem}.raw"))
    }

    fn base_meta(&self) -> Vec<(String, String)> {
        vec![("config_hash".into(), self.hash.clone())]
    }

    /// Writes `<stem>.raw`, its sidecar and `<stem>.pgm`.
    fn write_array(&self, stem: &str, rows: usize, cols: usize, values: &[f64], extra: &[(String, String)]) -> AppResult<()> {
        let raw = self.raw_path(stem);
        io::write_raw(&raw, rows, cols, values)?;
        let mut meta = self.base_meta();
        meta.extend_from_slice(extra);
        io::write_meta(&raw, &meta)?;
        let comment: Vec<String> = meta.iter().map(|(k, v)| format!("{k} = {v}")).collect();
        io::write_pgm(&self.path(&format!("{stem}.pgm")), rows, cols, values, &comment)
    }

    fn write_text(&self, name: &str, text: &str, extra: &[(String, String)]) -> AppResult<()> {
        let path = self.path(name);
        io::write_atomic(&path, text.as_bytes())?;
        let mut meta = self.base_meta();
        meta.extend_from_slice(extra);
        io::write_meta(&path, &meta)
    }

    fn read_array(&self, stem: &str, rows: usize, cols: usize) -> AppResult<Vec<f64>> {
        let path = self.raw_path(stem);
        let raw = io::read_raw(&path)?;
        if (raw.rows, raw.cols) != (rows, cols) {
            return Err(AppError::format(&path, format!("expected {rows}x{cols}, found {}x{}", raw.rows, raw.cols)));
        }
        Ok(raw.values)
    }

    fn geometry(&self) -> &GeometryConfig {
        &self.config.geometry
    }

    fn projector(&self) -> AppResult<RadonProjector> {
        Ok(RadonProjector::new(*self.geometry())?)
    }

    fn write_resolved_config(&self) -> AppResult<()> {
        let text = format!("# config_hash = {}\n{}", self.hash, self.config.canonical());
        io::write_atomic(&self.path(RESOLVED_CONFIG), text.as_bytes())
    }

    /// Noisy sinogram rescaled back to phantom units.
    pub fn measured_data(&self) -> AppResult<Vec<f64>> {
        let g = self.geometry();
        let counts = self.read_array(SINO_NOISY, g.n_angles, g.n_bins)?;
        let raw = self.raw_path(SINO_NOISY);
        let meta = io::read_meta(&raw)?;
        let scale: f64 = io::meta_value(&meta, "scale")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| AppError::format(io::meta_path(&raw), "missing scale"))?;
        if scale > 0.0 {
            Ok(counts.iter().map(|c| c / scale).collect())
        } else {
            Ok(counts)
        }
    }

    pub fn simulate(&self) -> AppResult<SimulationOutput> {
        let g = self.geometry();
        self.write_resolved_config()?;
        let phantom = shepp_logan(&self.config.phantom)?;
        let sino = self.projector()?.project(&phantom)?;
        let noisy = poisson_corrupt(&sino, &self.config.noise)?;
        self.write_array(PHANTOM, g.n, g.n, phantom.values(), &[])?;
        self.write_array(SINO, g.n_angles, g.n_bins, sino.values(), &[("total".into(), format!("{}", sino.total()))])?;
        let meta = [
            ("scale".to_string(), format!("{}", noisy.scale)),
            ("clamped".to_string(), format!("{}", noisy.clamped)),
            ("target_total_counts".to_string(), format!("{}", self.config.noise.target_total_counts)),
            ("total".to_string(), format!("{}", noisy.sinogram.total())),
            ("seed".to_string(), format!("{}", self.config.noise.seed)),
        ];
        self.write_array(SINO_NOISY, g.n_angles, g.n_bins, noisy.sinogram.values(), &meta)?;
        Ok(SimulationOutput { phantom, sinogram: sino, noisy: noisy.sinogram, scale: noisy.scale })
    }

    /// Estimates `R† g` once and writes `R C R† g` for every cutoff.
    pub fn preprocess(&self) -> AppResult<Vec<Warning>> {
        let geom = self.geometry();
        let r = self.projector()?;
        let data = self.measured_data()?;
        let r_norm = self.config.norm_estimate(&r);
        let method = self.config.preprocess.method(r_norm);
        let estimate = estimate_pinv(&r, &data, &method)?;
        let mut meta = estimate.metadata.clone();
        meta.push(("projector_norm".into(), format!("{r_norm}")));
        self.write_array(PINV, geom.n, geom.n, &estimate.x, &meta)?;
        let mut warnings = Vec::new();
        if let Some(trace) = &estimate.trace {
            self.write_text(PINV_TRACE, &prox_trace_csv(trace), &meta)?;
            if trace.status == ProxStatus::MaxOuterReached {
                warnings.push(Warning {
                    what: "preprocess".into(),
                    detail: format!("proximal iteration stopped after {} outer steps", trace.records.len()),
                });
            }
        }
        for &cutoff in &self.config.cutoffs {
            let c = Mollifier::new(MollifierSpec::hann(geom.n, cutoff))?;
            let smoothed = smoothed_projection(&r, &c, &estimate.x)?;
            let mut meta = meta.clone();
            meta.push(("cutoff".into(), format!("{cutoff}")));
            self.write_array(&CutoffFiles::new(cutoff).prep_data, geom.n_angles, geom.n_bins, &smoothed, &meta)?;
        }
        Ok(warnings)
    }

    /// Target, both variational reconstructions and FBP for every cutoff.
    /// Cutoffs run on separate threads.
    pub fn reconstruct(&self, skip_preprocess: bool) -> AppResult<Vec<Warning>> {
        let geom = *self.geometry();
        let r = self.projector()?;
        let data = self.measured_data()?;
        let f0 = self.read_array(PHANTOM, geom.n, geom.n)?;
        let r_norm = self.config.norm_estimate(&r);
        let prep: Vec<Option<Vec<f64>>> = self
            .config
            .cutoffs
            .iter()
            .map(|c| {
                if skip_preprocess {
                    Ok(None)
                } else {
                    self.read_array(&CutoffFiles::new(*c).prep_data, geom.n_angles, geom.n_bins).map(Some)
                }
            })
            .collect::<AppResult<_>>()?;
        let results: Vec<AppResult<Vec<Warning>>> = thread::scope(|scope| {
            let handles: Vec<_> = self
                .config
                .cutoffs
                .iter()
                .zip(&prep)
                .map(|(&cutoff, prep)| {
                    let (r, data, f0) = (&r, &data, &f0);
                    scope.spawn(move || self.reconstruct_cutoff(cutoff, r, r_norm, data, prep.as_deref(), f0))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("reconstruction thread panicked")).collect()
        });
        let mut warnings = Vec::new();
        for result in results {
            warnings.extend(result?);
        }
        Ok(warnings)
    }

    fn reconstruct_cutoff(
        &self,
        cutoff: f64,
        r: &RadonProjector,
        r_norm: f64,
        data: &[f64],
        prep: Option<&[f64]>,
        f0: &[f64],
    ) -> AppResult<Vec<Warning>> {
        let geom = self.geometry();
        let names = CutoffFiles::new(cutoff);
        let spec = MollifierSpec::hann(geom.n, cutoff);
        let c = Mollifier::new(spec)?;
        let h = HighPass::new(spec)?;
        let alpha = normalized_alpha(self.config.recon.alpha, r_norm, self.config.norm_estimate(&h))?;
        let cutoff_meta = vec![("cutoff".to_string(), format!("{cutoff}")), ("alpha_effective".to_string(), format!("{alpha}"))];

        let target = c.forward(f0)?;
        self.write_array(&names.target, geom.n, geom.n, &target, &cutoff_meta)?;

        let mut warnings = Vec::new();
        let mut solve = |stem: &str, trace_name: &str, g: &[f64]| -> AppResult<()> {
            let problem = ReconProblem::new(r, &c, &h, alpha, g)?.with_positivity(self.config.recon.positivity);
            let mut trace = Vec::new();
            let outcome = solve_problem_p_with(&problem, self.config.recon.tol, self.config.recon.max_iters, |rec| {
                trace.push(*rec)
            })?;
            let mut meta = cutoff_meta.clone();
            meta.push(("status".into(), format!("{:?}", outcome.status)));
            meta.push(("iterations".into(), format!("{}", outcome.iterations)));
            meta.push(("positivity".into(), format!("{}", self.config.recon.positivity)));
            self.write_array(stem, geom.n, geom.n, &outcome.image, &meta)?;
            self.write_text(trace_name, &cg_trace_csv(&trace), &meta)?;
            if outcome.status != ReconStatus::Converged {
                warnings.push(Warning {
                    what: stem.to_string(),
                    detail: format!("{:?} after {} iterations", outcome.status, outcome.iterations),
                });
            }
            Ok(())
        };
        solve(&names.recon_noprep, &names.trace_noprep, data)?;
        if let Some(prep) = prep {
            solve(&names.recon_prep, &names.trace_prep, prep)?;
        }

        let sino = Sinogram::for_geometry(geom, data.to_vec())?;
        let fbp = fbp_reconstruct(&sino, cutoff, geom)?;
        self.write_array(&names.fbp, geom.n, geom.n, fbp.values(), &cutoff_meta)?;
        Ok(warnings)
    }

    /// Reads the reconstructions back and writes the metrics table and the
    /// ordering report. A missing with-preprocessing image yields `NaN`.
    pub fn evaluate(&self) -> AppResult<Evaluation> {
        let n = self.geometry().n;
        let mut rows = Vec::new();
        for &cutoff in &self.config.cutoffs {
            let names = CutoffFiles::new(cutoff);
            let target = self.read_array(&names.target, n, n)?;
            let error = |stem: &str| -> AppResult<f64> {
                Ok(normalized_error_against(&self.read_array(stem, n, n)?, &target)?)
            };
            let with_preproc = if self.raw_path(&names.recon_prep).exists() { error(&names.recon_prep)? } else { f64::NAN };
            rows.push(MetricsRow {
                cutoff,
                without_preproc: error(&names.recon_noprep)?,
                with_preproc,
                fbp: error(&names.fbp)?,
            });
        }
        let evaluation = Evaluation { rows };
        self.write_text(METRICS, &evaluation.csv(), &[])?;
        self.write_text(ORDERING, &evaluation.ordering_report(), &[])?;
        Ok(evaluation)
    }

    pub fn run_all(&self, skip_preprocess: bool) -> AppResult<(Evaluation, Vec<Warning>)> {
        self.simulate()?;
        let mut warnings = Vec::new();
        if !skip_preprocess {
            warnings.extend(self.preprocess()?);
        }
        warnings.extend(self.reconstruct(skip_preprocess)?);
        Ok((self.evaluate()?, warnings))
    }
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub phantom: ImageGrid,
    pub sinogram: Sinogram,
    /// Integer counts.
    pub noisy: Sinogram,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    pub cutoff: f64,
    pub without_preproc: f64,
    pub with_preproc: f64,
    pub fbp: f64,
}

impl MetricsRow {
    /// `with < without < fbp`
    pub fn ordered(&self) -> bool {
        self.with_preproc < self.without_preproc && self.without_preproc < self.fbp
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub rows: Vec<MetricsRow>,
}

impl Evaluation {
    pub fn ordered(&self) -> bool {
        self.rows.iter().all(MetricsRow::ordered)
    }

    pub fn csv(&self) -> String {
        let mut s = format!("{METRICS_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.6},{:.6}", r.cutoff, r.without_preproc, r.with_preproc, r.fbp);
        }
        s
    }

    pub fn ordering_report(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let verdict = if r.ordered() { "PASS" } else { "FAIL" };
            let _ = writeln!(
                s,
                "cutoff {}: with {:.6} < without {:.6} < fbp {:.6}: {verdict}",
                r.cutoff, r.with_preproc, r.without_preproc, r.fbp
            );
        }
        let _ = writeln!(s, "ordering: {}", if self.ordered() { "PASS" } else { "FAIL" });
        s
    }
}

pub fn prox_trace_csv(trace: &ProxTrace) -> String {
    let mut s = format!("{PROX_TRACE_HEADER}\n0,,{},,0\n", trace.initial_objective);
    for r in &trace.records {
        let _ = writeln!(s, "{},{},{},{},{}", r.k, r.lambda, r.objective, r.step_norm, r.inner_iterations);
    }
    s
}

pub fn cg_trace_csv(records: &[CgRecord]) -> String {
    let mut s = format!("{CG_TRACE_HEADER}\n");
    for r in records {
        let _ = writeln!(s, "{},{},{},{}", r.k, r.residual, r.backward_error, r.energy);
    }
    s
}
