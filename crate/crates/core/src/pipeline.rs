//! End-to-end runs driven by a TOML [`RunConfig`].
//!
//! Every run writes into its own output directory: CSV data, `summary.json`
//! and `manifest.txt`. The manifest is itself a valid config (run metadata
//! sits in `#` comments), so `run --config manifest.txt` repeats the run.
//!
//! Randomness comes from the root `seed` only. Independent streams are
//! derived with [`stream_seed`]: stream 1 seeds the random-matrix ensemble,
//! stream 2 the classical Monte-Carlo samples.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::floquet::{
    build_grid, propagate_period, quasienergies, select_bound_states, FloquetEigen, QuasiSpectrum,
    UnitaryPropagator, DEFAULT_EDGE_FRACTION, DEFAULT_EDGE_THRESHOLD, DEFAULT_POINTS,
    DEFAULT_SLICES, MIN_RETAINED_STATES, MIN_SLICES,
};
use crate::io;
use crate::model::ModelParams;
use crate::phase_space::{
    classical_return_probability, default_epsilon, liouville_diagonal_estimate,
    wigner_propagator_diagonal, check_trace_identity, full_window, PhaseWindow,
    MIN_RETURN_SAMPLES,
};
use crate::rmt::{sample_unfolded, theory_pk, EnsembleKind, EnsembleSpec, Theory, MIN_DIM};
use crate::stats::{
    check_power_formfactor_identity, delta_series, fit_alpha, form_factor, form_factor_quasi,
    power_spectrum_delta, return_probability_qm, unfold_quasienergies, DeltaSeries, Detrend,
    AlphaFit, FormFactor, PowerOptions, PowerSpectrum, UnfoldedSpectrum, DEFAULT_OVERSAMPLE,
};

pub const STREAM_RMT: u64 = 1;
pub const STREAM_CLASSICAL: u64 = 2;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `stream` under root seed `root`.
pub fn stream_seed(root: u64, stream: u64) -> u64 {
    splitmix64(root ^ splitmix64(stream))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    FloquetAlpha,
    RmtAlpha,
    Formfactor,
    Phasespace,
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::FloquetAlpha => "floquet_alpha",
            Self::RmtAlpha => "rmt_alpha",
            Self::Formfactor => "formfactor",
            Self::Phasespace => "phasespace",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSettings {
    pub n_points: usize,
    /// Energy the grid must cover; `3 E_b` when absent.
    pub e_max: Option<f64>,
    pub slices: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_POINTS,
            e_max: None,
            slices: DEFAULT_SLICES,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retain {
    /// Floquet states with edge probability below `threshold`.
    Bounded,
    /// Every grid state.
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSettings {
    pub retain: Retain,
    pub edge_fraction: f64,
    pub threshold: f64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            retain: Retain::Bounded,
            edge_fraction: DEFAULT_EDGE_FRACTION,
            threshold: DEFAULT_EDGE_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AveragingSettings {
    /// `D_w`; the whole series when absent.
    pub window_len: Option<usize>,
    pub overlap: f64,
    pub detrend: Detrend,
    /// Extra drive frequencies `Omega + d` whose spectra join the average.
    pub omega_offsets: Vec<f64>,
}

impl Default for AveragingSettings {
    fn default() -> Self {
        Self {
            window_len: None,
            overlap: 0.0,
            detrend: Detrend::Bridge,
            omega_offsets: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSettings {
    pub k_min: usize,
    /// `D_w / 8` when absent.
    pub k_max: Option<usize>,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RmtSettings {
    pub ensemble: EnsembleKind,
    pub dim: usize,
    pub realizations: usize,
}

impl Default for RmtSettings {
    fn default() -> Self {
        Self {
            ensemble: EnsembleKind::Poisson,
            dim: 1000,
            realizations: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormFactorSource {
    Floquet,
    Rmt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FormFactorSettings {
    pub source: FormFactorSource,
    /// Largest `l`; `D_H` when absent.
    pub l_max: Option<usize>,
    /// Half width (in `l`) of the running mean written next to `K`.
    pub smoothing: usize,
    /// `tau` interval for the power/form-factor identity (rmt source only).
    pub identity_tau: [f64; 2],
}

impl Default for FormFactorSettings {
    fn default() -> Self {
        Self {
            source: FormFactorSource::Floquet,
            l_max: None,
            smoothing: 5,
            identity_tau: [0.05, 0.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseSpaceSettings {
    /// Raster window; the whole grid support when absent.
    pub window: Option<PhaseWindow>,
    pub resolution: [usize; 2],
    /// Evaluation time in periods.
    pub periods: u32,
    /// Classical regularization width; `sqrt(hbar)` when absent.
    pub epsilon: Option<f64>,
    pub n_samples: usize,
    /// Also estimate the Liouville diagonal on the same raster.
    pub liouville: bool,
}

impl Default for PhaseSpaceSettings {
    fn default() -> Self {
        Self {
            window: None,
            resolution: [256, 256],
            periods: 1,
            epsilon: None,
            n_samples: 100_000,
            liouville: true,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A complete, reproducible description of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: PipelineKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Also write the propagator and spectrum binaries.
    #[serde(default)]
    pub save_binary: bool,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub selection: SelectionSettings,
    #[serde(default)]
    pub averaging: AveragingSettings,
    #[serde(default)]
    pub fit: FitSettings,
    #[serde(default)]
    pub rmt: RmtSettings,
    #[serde(default)]
    pub formfactor: FormFactorSettings,
    #[serde(default)]
    pub phasespace: PhaseSpaceSettings,
}

/// One offending config field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigIssue {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Debug)]
pub enum PipelineError {
    Config(Vec<ConfigIssue>),
    Stage { stage: &'static str, source: Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Stage { .. } => EXIT_NUMERICAL,
        }
    }

    fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self::Config(vec![ConfigIssue {
            field: field.into(),
            reason: reason.into(),
        }])
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(issues) => {
                write!(f, "invalid config")?;
                for i in issues {
                    write!(f, "\n  {i}")?;
                }
                Ok(())
            }
            Self::Stage { stage, source } => write!(f, "stage `{stage}` failed: {source}"),
        }
    }
}

impl std::error::Error for PipelineError {}

type PResult<T> = std::result::Result<T, PipelineError>;

trait Stage<T> {
    fn stage(self, name: &'static str) -> PResult<T>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, name: &'static str) -> PResult<T> {
        self.map_err(|source| match source {
            Error::InvalidParameter { field, reason } => PipelineError::config(field, reason),
            source => PipelineError::Stage { stage: name, source },
        })
    }
}

impl<T> Stage<T> for std::io::Result<T> {
    fn stage(self, name: &'static str) -> PResult<T> {
        self.map_err(|e| PipelineError::Stage {
            stage: name,
            source: Error::Io(e),
        })
    }
}

impl RunConfig {
    pub fn new(pipeline: PipelineKind) -> Self {
        Self {
            pipeline,
            seed: 0,
            output_dir: default_output_dir(),
            save_binary: false,
            model: ModelParams::default(),
            grid: GridSettings::default(),
            selection: SelectionSettings::default(),
            averaging: AveragingSettings::default(),
            fit: FitSettings::default(),
            rmt: RmtSettings::default(),
            formfactor: FormFactorSettings::default(),
            phasespace: PhaseSpaceSettings::default(),
        }
    }

    /// Parses and validates.
    pub fn from_toml_str(text: &str) -> PResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(toml_issue)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> PResult<Self> {
        let text = read_config_text(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut push = |field: &str, reason: String| {
            out.push(ConfigIssue {
                field: field.to_owned(),
                reason,
            })
        };
        for (f, r) in self.model.issues() {
            push(&format!("model.{f}"), r);
        }
        let g = &self.grid;
        if g.n_points < 2 || !g.n_points.is_power_of_two() {
            push("grid.n_points", format!("must be a power of two >= 2, got {}", g.n_points));
        }
        if g.slices < MIN_SLICES {
            push("grid.slices", format!("must be >= {MIN_SLICES}, got {}", g.slices));
        }
        if let Some(e) = g.e_max {
            if !(e.is_finite() && e > 0.0) {
                push("grid.e_max", format!("must be finite and > 0, got {e}"));
            }
        }
        let s = &self.selection;
        if !(s.edge_fraction > 0.0 && s.edge_fraction < 0.5) {
            push("selection.edge_fraction", format!("must lie in (0, 0.5), got {}", s.edge_fraction));
        }
        if !(s.threshold > 0.0 && s.threshold <= 1.0) {
            push("selection.threshold", format!("must lie in (0, 1], got {}", s.threshold));
        }
        let a = &self.averaging;
        if !(0.0..=0.9).contains(&a.overlap) {
            push("averaging.overlap", format!("must lie in [0, 0.9], got {}", a.overlap));
        }
        if let Some(w) = a.window_len {
            if w < 16 {
                push("averaging.window_len", format!("must be >= 16, got {w}"));
            }
        }
        for (i, d) in a.omega_offsets.iter().enumerate() {
            if !(d.is_finite() && self.model.drive_frequency + d > 0.0) {
                push("averaging.omega_offsets", format!("entry {i} gives a non-positive Omega"));
            }
        }
        let f = &self.fit;
        if f.k_min < 1 {
            push("fit.k_min", "must be >= 1".into());
        }
        if let Some(k) = f.k_max {
            if k <= f.k_min {
                push("fit.k_max", format!("must exceed k_min = {}", f.k_min));
            }
        }
        let r = &self.rmt;
        if r.dim < MIN_DIM {
            push("rmt.dim", format!("must be >= {MIN_DIM}, got {}", r.dim));
        }
        if r.realizations < 1 {
            push("rmt.realizations", "must be >= 1".into());
        }
        if self.pipeline == PipelineKind::RmtAlpha && r.ensemble == EnsembleKind::Gse {
            push("rmt.ensemble", "gse sampling is not supported".into());
        }
        let ff = &self.formfactor;
        let [t0, t1] = ff.identity_tau;
        if !(t0 > 0.0 && t1 > t0 && t1 < 1.0) {
            push("formfactor.identity_tau", format!("need 0 < tau_min < tau_max < 1, got [{t0}, {t1}]"));
        }
        let ps = &self.phasespace;
        if ps.resolution.iter().any(|&n| n < 2) {
            push("phasespace.resolution", "need at least 2 cells per axis".into());
        }
        if ps.periods < 1 {
            push("phasespace.periods", "must be >= 1".into());
        }
        if let Some(e) = ps.epsilon {
            if !(e.is_finite() && e > 0.0) {
                push("phasespace.epsilon", format!("must be finite and > 0, got {e}"));
            }
        }
        if ps.n_samples < MIN_RETURN_SAMPLES {
            push("phasespace.n_samples", format!("must be >= {MIN_RETURN_SAMPLES}, got {}", ps.n_samples));
        }
        if let Some(w) = &ps.window {
            if let Err(e) = w.validate() {
                push("phasespace.window", e.to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> PResult<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(PipelineError::Config(issues))
        }
    }

    fn e_max(&self) -> f64 {
        self.grid.e_max.unwrap_or(3.0 * self.model.barrier_height)
    }
}

fn read_config_text(path: &Path) -> PResult<String> {
    std::fs::read_to_string(path)
        .map_err(|e| PipelineError::config("config", format!("cannot read {}: {e}", path.display())))
}

fn toml_issue(e: toml::de::Error) -> PipelineError {
    let msg = e.message().trim().to_owned();
    // toml reports the offending key in the message; keep the whole text
    PipelineError::config("config", msg)
}

/// Result of one run, also written as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub pipeline: PipelineKind,
    pub seed: u64,
    pub parameters: ModelParams,
    pub alpha: Option<f64>,
    pub k_range: Option<[usize; 2]>,
    pub residual: Option<f64>,
    #[serde(rename = "D_H")]
    pub d_h: Option<usize>,
    /// Number of spectra (or realizations) averaged.
    pub spectra: usize,
    pub window_len: Option<usize>,
    /// `field integral / |Tr U^l|^2`.
    pub trace_ratio: Option<f64>,
    pub trace_sq: Option<f64>,
    pub classical_return: Option<f64>,
    /// Largest `|ratio - 1|` of the power/form-factor identity.
    pub identity_deviation: Option<f64>,
    pub outputs: Vec<String>,
}

impl RunReport {
    fn new(cfg: &RunConfig) -> Self {
        Self {
            pipeline: cfg.pipeline,
            seed: cfg.seed,
            parameters: cfg.model,
            alpha: None,
            k_range: None,
            residual: None,
            d_h: None,
            spectra: 0,
            window_len: None,
            trace_ratio: None,
            trace_sq: None,
            classical_return: None,
            identity_deviation: None,
            outputs: Vec::new(),
        }
    }
}

struct Out<'a> {
    dir: &'a Path,
    files: Vec<String>,
}

impl<'a> Out<'a> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_owned());
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> PResult<()> {
        let p = self.path(name);
        io::write_csv(p, header, rows).stage("write")
    }
}

/// Floquet operator, its eigensystem and the retained spectrum for one
/// drive frequency.
pub struct FloquetRun {
    pub params: ModelParams,
    pub propagator: UnitaryPropagator,
    pub eigen: FloquetEigen,
    pub spectrum: QuasiSpectrum,
}

pub fn floquet_run(cfg: &RunConfig, params: ModelParams) -> PResult<FloquetRun> {
    let grid = build_grid(&params, cfg.e_max(), cfg.grid.n_points).stage("grid")?;
    let propagator = propagate_period(&params, &grid, cfg.grid.slices).stage("propagate")?;
    let eigen = quasienergies(&propagator, params.hbar).stage("diagonalize")?;
    let spectrum = match cfg.selection.retain {
        Retain::All => eigen.spectrum(),
        Retain::Bounded => {
            select_bound_states(&eigen, cfg.selection.edge_fraction, cfg.selection.threshold)
                .stage("select")?
                .spectrum
        }
    };
    if spectrum.dim() < MIN_RETAINED_STATES {
        return Err(PipelineError::Stage {
            stage: "select",
            source: Error::TooFewStates {
                retained: spectrum.dim(),
                required: MIN_RETAINED_STATES,
            },
        });
    }
    Ok(FloquetRun {
        params,
        propagator,
        eigen,
        spectrum,
    })
}

fn ensemble_params(cfg: &RunConfig) -> Vec<ModelParams> {
    std::iter::once(0.0)
        .chain(cfg.averaging.omega_offsets.iter().copied())
        .map(|d| ModelParams {
            drive_frequency: cfg.model.drive_frequency + d,
            ..cfg.model
        })
        .collect()
}

fn floquet_spectra(cfg: &RunConfig) -> PResult<Vec<QuasiSpectrum>> {
    ensemble_params(cfg)
        .into_iter()
        .map(|p| floquet_run(cfg, p).map(|r| r.spectrum))
        .collect()
}

/// Averaged power spectrum of `series` and its `alpha` fit, using the
/// averaging and fit settings of `cfg`.
pub fn alpha_from_series(cfg: &RunConfig, series: &[DeltaSeries]) -> PResult<(PowerSpectrum, AlphaFit)> {
    let opts = PowerOptions {
        window_len: cfg.averaging.window_len,
        overlap: cfg.averaging.overlap,
        detrend: cfg.averaging.detrend,
    };
    let ps = power_spectrum_delta(series, &opts).stage("power_spectrum")?;
    let k_hi = cfg.fit.k_max.unwrap_or(ps.window_len / 8);
    let fit = fit_alpha(&ps, cfg.fit.k_min, k_hi).stage("fit")?;
    Ok((ps, fit))
}

/// [`alpha_from_series`] on the unfolded quasienergies of `spectra`.
pub fn alpha_from_spectra(cfg: &RunConfig, spectra: &[QuasiSpectrum]) -> PResult<(PowerSpectrum, AlphaFit)> {
    let series = spectra
        .iter()
        .map(|s| unfold_quasienergies(s).map(|u| delta_series(&u)))
        .collect::<crate::Result<Vec<_>>>()
        .stage("unfold")?;
    alpha_from_series(cfg, &series)
}

fn alpha_stage(cfg: &RunConfig, series: &[DeltaSeries], report: &mut RunReport) -> PResult<PowerSpectrum> {
    let (ps, fit) = alpha_from_series(cfg, series)?;
    report.alpha = Some(fit.alpha);
    report.k_range = Some(fit.k_range);
    report.residual = Some(fit.residual_rms);
    report.window_len = Some(ps.window_len);
    Ok(ps)
}

fn power_rows(ps: &PowerSpectrum) -> Vec<Vec<f64>> {
    let w = ps.window_len;
    ps.k
        .iter()
        .zip(&ps.values)
        .map(|(&k, &v)| {
            let law = |t| theory_pk(t, w, k).unwrap_or(f64::NAN);
            vec![k as f64, v, law(Theory::Beta(1)), law(Theory::Poisson)]
        })
        .collect()
}

const POWER_HEADER: [&str; 4] = ["k", "P_k", "theory_goe", "theory_poisson"];

fn delta_rows(d: &DeltaSeries) -> Vec<Vec<f64>> {
    d.values
        .iter()
        .enumerate()
        .map(|(i, &v)| vec![(i + 1) as f64, v])
        .collect()
}

fn run_floquet_alpha(cfg: &RunConfig, out: &mut Out, report: &mut RunReport) -> PResult<()> {
    let params = ensemble_params(cfg);
    let mut series = Vec::with_capacity(params.len());
    for (i, p) in params.into_iter().enumerate() {
        let run = floquet_run(cfg, p)?;
        let unfolded = unfold_quasienergies(&run.spectrum).stage("unfold")?;
        series.push(delta_series(&unfolded));
        let suffix = if i == 0 { String::new() } else { format!("_{i}") };
        let path = out.path(&format!("quasienergies{suffix}.csv"));
        io::write_quasienergies_csv(path, &run.spectrum).stage("write")?;
        if i == 0 {
            report.d_h = Some(run.spectrum.dim());
            if cfg.save_binary {
                save_binaries(cfg, out, &run)?;
            }
        }
    }
    out.csv("delta.csv", &["q", "delta_q"], &delta_rows(&series[0]))?;
    report.spectra = series.len();
    let ps = alpha_stage(cfg, &series, report)?;
    out.csv("power.csv", &POWER_HEADER, &power_rows(&ps))
}

fn save_binaries(_cfg: &RunConfig, out: &mut Out, run: &FloquetRun) -> PResult<()> {
    let p = out.path("propagator.bin");
    io::save(p, |f| io::write_propagator(f, &run.propagator)).stage("write")?;
    let p = out.path("spectrum.bin");
    io::save(p, |f| io::write_spectrum(f, &run.spectrum)).stage("write")
}

fn rmt_spec(cfg: &RunConfig) -> EnsembleSpec {
    EnsembleSpec {
        kind: cfg.rmt.ensemble,
        dim: cfg.rmt.dim,
        realizations: cfg.rmt.realizations,
        seed: stream_seed(cfg.seed, STREAM_RMT),
    }
}

fn run_rmt_alpha(cfg: &RunConfig, out: &mut Out, report: &mut RunReport) -> PResult<()> {
    let unfolded = sample_unfolded(&rmt_spec(cfg)).stage("sample")?;
    let series: Vec<DeltaSeries> = unfolded.iter().map(delta_series).collect();
    report.d_h = Some(unfolded[0].count());
    report.spectra = series.len();
    out.csv("delta.csv", &["q", "delta_q"], &delta_rows(&series[0]))?;
    let ps = alpha_stage(cfg, &series, report)?;
    out.csv("power.csv", &POWER_HEADER, &power_rows(&ps))
}

fn form_factor_rows(ff: &FormFactor, smoothing: usize) -> Vec<Vec<f64>> {
    let sm = ff.smoothed(smoothing);
    ff.tau
        .iter()
        .zip(&ff.values)
        .zip(&sm.values)
        .map(|((&t, &k), &s)| vec![t, k, s])
        .collect()
}

fn mean_form_factor(all: &[FormFactor]) -> FormFactor {
    let mut acc = all[0].clone();
    for ff in &all[1..] {
        acc.values.iter_mut().zip(&ff.values).for_each(|(a, b)| *a += b);
    }
    let n = all.len() as f64;
    acc.values.iter_mut().for_each(|v| *v /= n);
    acc
}

fn run_formfactor(cfg: &RunConfig, out: &mut Out, report: &mut RunReport) -> PResult<()> {
    let ff = &cfg.formfactor;
    match ff.source {
        FormFactorSource::Floquet => {
            let spectra = floquet_spectra(cfg)?;
            let d_h = spectra[0].dim();
            let l_max = ff.l_max.unwrap_or(d_h);
            let all = spectra
                .iter()
                .map(|s| form_factor_quasi(s, l_max))
                .collect::<crate::Result<Vec<_>>>()
                .stage("form_factor")?;
            let rows: Vec<Vec<f64>> = (0..=l_max as u64)
                .map(|l| {
                    let p = return_probability_qm(&spectra[0], l).unwrap_or(f64::NAN);
                    vec![l as f64, p]
                })
                .collect();
            out.csv("return_probability.csv", &["l", "P_ret"], &rows)?;
            report.d_h = Some(d_h);
            report.spectra = spectra.len();
            out.csv("formfactor.csv", &["tau", "K", "K_smoothed"], &form_factor_rows(&mean_form_factor(&all), ff.smoothing))
        }
        FormFactorSource::Rmt => {
            let unfolded = sample_unfolded(&rmt_spec(cfg)).stage("sample")?;
            let d_h = unfolded[0].count();
            let l_max = ff.l_max.unwrap_or(d_h);
            let all = unfolded
                .par_iter()
                .map(|u| form_factor(u, l_max))
                .collect::<crate::Result<Vec<_>>>()
                .stage("form_factor")?;
            out.csv("formfactor.csv", &["tau", "K", "K_smoothed"], &form_factor_rows(&mean_form_factor(&all), ff.smoothing))?;
            let id = identity(&unfolded, ff.identity_tau)?;
            let rows: Vec<Vec<f64>> = (0..id.tau.len())
                .map(|i| vec![id.tau[i], id.power_n[i], id.form_factor[i], id.ratio[i]])
                .collect();
            out.csv("identity.csv", &["tau", "P_n", "K", "ratio"], &rows)?;
            report.identity_deviation = Some(id.max_abs_deviation());
            report.d_h = Some(d_h);
            report.spectra = unfolded.len();
            Ok(())
        }
    }
}

fn identity(unfolded: &[UnfoldedSpectrum], tau: [f64; 2]) -> PResult<crate::stats::IdentityReport> {
    let d = unfolded[0].count() as f64;
    let l_lo = ((tau[0] * d).ceil() as usize).max(1);
    let l_hi = ((tau[1] * d).floor() as usize).max(l_lo);
    check_power_formfactor_identity(unfolded, (l_lo, l_hi), DEFAULT_OVERSAMPLE).stage("identity")
}

fn run_phasespace(cfg: &RunConfig, out: &mut Out, report: &mut RunReport) -> PResult<()> {
    let ps = &cfg.phasespace;
    let run = floquet_run(cfg, cfg.model)?;
    let l = ps.periods;
    let u = if l == 1 {
        run.propagator
    } else {
        UnitaryPropagator {
            matrix: run.propagator.power(l),
            period: l as f64 * run.propagator.period,
            ..run.propagator
        }
    };
    let window = ps.window.unwrap_or_else(|| full_window(&u.grid));
    let res = (ps.resolution[0], ps.resolution[1]);
    let wigner = wigner_propagator_diagonal(&u, &window, res).stage("wigner")?;
    report.trace_ratio = Some(check_trace_identity(&wigner, &u));
    report.trace_sq = Some(u.trace().norm_sqr());
    report.d_h = Some(run.spectrum.dim());
    let p = out.path("wigner.csv");
    io::write_field_csv(p, &wigner).stage("write")?;
    let p = out.path("wigner.bin");
    io::save(p, |f| io::write_field(f, &wigner)).stage("write")?;
    if ps.liouville {
        let t = u.period;
        let eps = ps.epsilon.unwrap_or_else(|| default_epsilon(&cfg.model));
        let field = liouville_diagonal_estimate(&cfg.model, t, &window, res, eps).stage("classical")?;
        let p = out.path("liouville.csv");
        io::write_field_csv(p, &field).stage("write")?;
        let p = out.path("liouville.bin");
        io::save(p, |f| io::write_field(f, &field)).stage("write")?;
        let ret = classical_return_probability(
            &cfg.model,
            t,
            &window,
            ps.n_samples,
            eps,
            stream_seed(cfg.seed, STREAM_CLASSICAL),
        )
        .stage("classical")?;
        report.classical_return = Some(ret.density);
    }
    Ok(())
}

/// Executes the configured pipeline, writing into `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> PResult<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.output_dir).stage("write")?;
    let mut out = Out {
        dir: &cfg.output_dir,
        files: Vec::new(),
    };
    let mut report = RunReport::new(cfg);
    match cfg.pipeline {
        PipelineKind::FloquetAlpha => run_floquet_alpha(cfg, &mut out, &mut report)?,
        PipelineKind::RmtAlpha => run_rmt_alpha(cfg, &mut out, &mut report)?,
        PipelineKind::Formfactor => run_formfactor(cfg, &mut out, &mut report)?,
        PipelineKind::Phasespace => run_phasespace(cfg, &mut out, &mut report)?,
    }
    out.files.push("summary.json".into());
    out.files.push("manifest.txt".into());
    report.outputs = out.files;
    io::write_json(cfg.output_dir.join("summary.json"), &report).stage("write")?;
    let manifest = manifest_text(cfg, &report, start.elapsed().as_secs_f64());
    std::fs::write(cfg.output_dir.join("manifest.txt"), manifest).stage("write")?;
    Ok(report)
}

fn manifest_text(cfg: &RunConfig, report: &RunReport, wall: f64) -> String {
    let mut s = String::new();
    s.push_str("# quasinoise run manifest; the body below is the config of this run\n");
    s.push_str(&format!("# version = {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("# pipeline = {}\n", cfg.pipeline));
    s.push_str(&format!("# seed = {}\n", cfg.seed));
    s.push_str(&format!("# wall_time_s = {wall:.3}\n"));
    s.push_str(&format!("# outputs = {}\n", report.outputs.join(", ")));
    s.push_str(&cfg.to_toml());
    s
}

/// A base config plus the drive strengths to scan.
///
/// In TOML this is an ordinary run config with an extra table
/// `[sweep] S = [...]`. Run `i` writes to `output_dir/S_<value>`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub drive_strengths: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepAxis {
    #[serde(rename = "S")]
    drive_strengths: Vec<f64>,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> PResult<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(toml_issue)?;
        let axis = table
            .remove("sweep")
            .ok_or_else(|| PipelineError::config("sweep", "missing [sweep] table"))?;
        let axis: SweepAxis = axis
            .try_into()
            .map_err(|e: toml::de::Error| PipelineError::config("sweep", e.message().trim().to_owned()))?;
        let base: RunConfig = table.try_into().map_err(toml_issue)?;
        base.validate()?;
        Ok(Self {
            base,
            drive_strengths: axis.drive_strengths,
        })
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> PResult<Self> {
        Self::from_toml_str(&read_config_text(path.as_ref())?)
    }

    pub fn expand(&self) -> Vec<RunConfig> {
        self.drive_strengths
            .iter()
            .map(|&s| {
                let mut c = self.base.clone();
                c.model.drive_strength = s;
                c.output_dir = self.base.output_dir.join(format!("S_{s}"));
                c
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "S")]
    pub drive_strength: f64,
    pub alpha: Option<f64>,
    #[serde(rename = "D_H")]
    pub d_h: Option<usize>,
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// True when `alpha` never increases along the rows that succeeded.
    pub fn alpha_non_increasing(&self) -> bool {
        let a: Vec<f64> = self.rows.iter().filter_map(|r| r.alpha).collect();
        a.windows(2).all(|w| w[1] <= w[0])
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> crate::Result<()> {
        let rows: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.drive_strength,
                    r.alpha.unwrap_or(f64::NAN),
                    r.d_h.map_or(f64::NAN, |d| d as f64),
                    r.residual.unwrap_or(f64::NAN),
                ]
            })
            .collect();
        io::write_csv(path, &["S", "alpha", "D_H", "residual"], &rows)
    }
}

/// Runs every config (in parallel); failures are recorded per row.
pub fn sweep(configs: &[RunConfig]) -> PResult<SweepTable> {
    if configs.is_empty() {
        return Err(PipelineError::config("sweep", "no configurations to run"));
    }
    for c in configs {
        c.validate()?;
    }
    let rows = configs
        .par_iter()
        .map(|c| match run(c) {
            Ok(r) => SweepRow {
                drive_strength: c.model.drive_strength,
                alpha: r.alpha,
                d_h: r.d_h,
                residual: r.residual,
                error: None,
            },
            Err(e) => SweepRow {
                drive_strength: c.model.drive_strength,
                alpha: None,
                d_h: None,
                residual: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(SweepTable { rows })
}

/// [`sweep`] over the expanded config; writes `sweep.csv` and `sweep.json`
/// into the base output directory.
pub fn run_sweep(cfg: &SweepConfig) -> PResult<SweepTable> {
    let table = sweep(&cfg.expand())?;
    let dir = &cfg.base.output_dir;
    std::fs::create_dir_all(dir).stage("write")?;
    table.write_csv(dir.join("sweep.csv")).stage("write")?;
    io::write_json(dir.join("sweep.json"), &table).stage("write")?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct_and_stable() {
        assert_ne!(stream_seed(7, STREAM_RMT), stream_seed(7, STREAM_CLASSICAL));
        assert_ne!(stream_seed(7, STREAM_RMT), stream_seed(8, STREAM_RMT));
        assert_eq!(stream_seed(7, STREAM_RMT), stream_seed(7, STREAM_RMT));
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = RunConfig::from_toml_str("pipeline = \"floquet_alpha\"\n").unwrap();
        assert_eq!(cfg, RunConfig::new(PipelineKind::FloquetAlpha));
        let back = RunConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_fields_are_named() {
        let text = "pipeline = \"rmt_alpha\"\n[grid]\nn_points = 1000\nslices = 10\n[model]\nOmega = -1.0\nE_b = 100.0\n";
        let Err(PipelineError::Config(issues)) = RunConfig::from_toml_str(text) else {
            panic!("expected a config error");
        };
        let fields: Vec<&str> = issues.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, vec!["model.Omega", "grid.n_points", "grid.slices"]);
        let err = RunConfig::from_toml_str("pipeline = \"nope\"\n").unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(RunConfig::from_toml_str("pipeline = \"rmt_alpha\"\ncolour = 1\n").is_err());
    }

    #[test]
    fn sweep_config_expands_per_drive() {
        let text = "pipeline = \"floquet_alpha\"\noutput_dir = \"o\"\n[sweep]\nS = [0.0, 2.5]\n";
        let sc = SweepConfig::from_toml_str(text).unwrap();
        let runs = sc.expand();
        assert_eq!(runs.len(), 2);
        assert_eq!(runs[1].model.drive_strength, 2.5);
        assert_eq!(runs[1].output_dir, PathBuf::from("o/S_2.5"));
        assert!(SweepConfig::from_toml_str("pipeline = \"floquet_alpha\"\n").is_err());
        assert!(matches!(sweep(&[]), Err(PipelineError::Config(_))));
    }
}
