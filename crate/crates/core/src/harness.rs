//! Experiment configuration, the verification suites, and deterministic
//! report writing.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bott::{
    assemble_bott_dirac, commutator_growth_profile, compressed_square_spectrum, embedded_interior_indices, interior_square_spectrum,
    last_decade_slope, predicted_interior_spectrum, DEFAULT_MAX_DIM,
};
use crate::error::{Error, Result};
use crate::fock::{exterior_power_exact, FermionState};
use crate::fock_rep::{
    one_particle_action, require_global, sample_sector_state, sector_norm_bound, FockYmSpace, FockYmState, Weighting,
};
use crate::gauge::{holonomy, CMat, Connection, FlowTransport, GroupElement, LatticeSpinor, LieBasis, Multiplier, OneForm, TransportOptions};
use crate::io::{fmt_f64, render_dat, save_basis, CsvTable};
use crate::lattice::{integrate_flow, FlowPath, LatticeTorus, VectorField};
use crate::operator::{spectrum, SpectrumConfig};
use crate::oscillator::{embed_vacuum, levels_of, mode_inner, BosonicState, ModeParams};
use crate::qhd::{vacuum_shift_distance, HolonomyDiffeo, WeylReference, YmSpace, YmState};
use crate::sobolev::{
    build_sobolev_basis, hodge_laplacian, apply_componentwise, laplacian_symbol, sobolev_norm, SobolevParams, Trig, TIE_BREAK_RULE,
};

pub const OUTPUT_DIR_ENV: &str = "HOLONOMY_LAB_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeConfig {
    pub sites_per_axis: usize,
    pub box_length: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            sites_per_axis: 8,
            box_length: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeConfig {
    /// `n` of `SU(n)`.
    pub n: usize,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self { n: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SobolevConfig {
    pub tau1: f64,
    pub sigma: f64,
    pub basis_size: usize,
}

impl Default for SobolevConfig {
    fn default() -> Self {
        Self {
            tau1: 1.0,
            sigma: 2.0,
            basis_size: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesConfig {
    pub tau2: f64,
    /// `uniform` (`s_i = 1`) or `linear` (`s_i = i`); ignored when `s` is set.
    pub preset: String,
    pub s: Option<Vec<f64>>,
    /// Levels per bosonic mode.
    pub cutoff: usize,
}

impl Default for ModesConfig {
    fn default() -> Self {
        Self {
            tau2: 1.0,
            preset: "linear".into(),
            s: None,
            cutoff: 8,
        }
    }
}

pub fn preset_scales(name: &str, n: usize) -> Result<Vec<f64>> {
    match name {
        "uniform" => Ok(vec![1.0; n]),
        "linear" => Ok((1..=n).map(|i| i as f64).collect()),
        other => Err(Error::Config(format!("unknown s-preset `{other}`; use `uniform`, `linear` or an explicit `s` list"))),
    }
}

impl ModesConfig {
    pub fn scales(&self, n: usize) -> Result<Vec<f64>> {
        match &self.s {
            Some(s) if s.len() >= n => Ok(s[..n].to_vec()),
            Some(s) => Err(Error::Config(format!("modes.s lists {} scales, {n} needed", s.len()))),
            None => preset_scales(&self.preset, n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    /// Basis indices carrying a bosonic oscillator.
    pub bosonic_modes: Vec<usize>,
    /// One-particle modes of the Fock space.
    pub fermionic: usize,
    pub k_max: usize,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            bosonic_modes: vec![2],
            fermionic: 9,
            k_max: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Gauss–Hermite nodes per mode; `0` means the cutoff.
    pub order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    pub spectrum: f64,
    pub symmetry: f64,
    pub embedding: f64,
    pub gram: f64,
    pub symbol: f64,
    pub sobolev_norm: f64,
    pub transport_identity: f64,
    pub loop_holonomy: f64,
    pub reversal: f64,
    pub unitarity: f64,
    /// Lower bound on the norm drift of the negative control.
    pub control_drift: f64,
    pub group_law: f64,
    pub weyl: f64,
    pub convergence_ratio_low: f64,
    pub convergence_ratio_high: f64,
    pub continuity: f64,
    pub sector_norm: f64,
    pub isometry: f64,
    /// Lower bound on the orthogonality defect of the unweighted action.
    pub unweighted_defect: f64,
    pub slope: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            spectrum: 1e-9,
            symmetry: 1e-10,
            embedding: 1e-14,
            gram: 1e-10,
            symbol: 1e-12,
            sobolev_norm: 1e-10,
            transport_identity: 1e-14,
            loop_holonomy: 1e-8,
            reversal: 1e-10,
            unitarity: 1e-6,
            control_drift: 1e-3,
            group_law: 1e-9,
            weyl: 1e-8,
            convergence_ratio_low: 3.0,
            convergence_ratio_high: 5.0,
            continuity: 1e-8,
            sector_norm: 1e-10,
            isometry: 1e-6,
            unweighted_defect: 1e-3,
            slope: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("report") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSuiteConfig {
    /// `[modes, cutoff]` pairs.
    pub cases: Vec<[usize; 2]>,
    pub presets: Vec<String>,
    pub tau2: Vec<f64>,
    pub count: usize,
    pub embedding_samples: usize,
}

impl Default for SpectrumSuiteConfig {
    fn default() -> Self {
        Self {
            cases: vec![[1, 16], [2, 12], [3, 8]],
            presets: vec!["uniform".into(), "linear".into()],
            tau2: vec![0.5, 1.0],
            count: 8,
            embedding_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolonomySuiteConfig {
    pub loop_steps: usize,
    pub theta: f64,
    pub unitarity_sites: usize,
    pub transport_steps: usize,
    /// `a` in the compressible control field `(a sin(2πx/L), 0, 0)`.
    pub control_amplitude: f64,
}

impl Default for HolonomySuiteConfig {
    fn default() -> Self {
        Self {
            loop_steps: 1000,
            theta: 0.7,
            unitarity_sites: 16,
            transport_steps: 16,
            control_amplitude: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CcrSuiteConfig {
    pub omegas: Vec<f64>,
    pub cutoff: usize,
    pub basis_size: usize,
    pub group_law_shifts: [f64; 2],
}

impl Default for CcrSuiteConfig {
    fn default() -> Self {
        Self {
            omegas: vec![0.0, 0.3, 1.0],
            cutoff: 20,
            basis_size: 200,
            group_law_shifts: [0.3, 0.45],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuitySuiteConfig {
    pub times: Vec<f64>,
    pub omega: f64,
    pub cutoff: usize,
    pub field: [f64; 3],
}

impl Default for ContinuitySuiteConfig {
    fn default() -> Self {
        Self {
            times: vec![0.25, 0.125, 0.0625, 0.03125, 0.015625, 0.0078125],
            omega: 1.0,
            cutoff: 24,
            field: [1.0, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FockSuiteConfig {
    /// One-particle modes of the random test map.
    pub random_modes: usize,
    /// Lattice of the orthogonality test (full basis).
    pub sites_per_axis: usize,
    /// Commensurate constant flow, in lattice spacings.
    pub shift: [f64; 3],
}

impl Default for FockSuiteConfig {
    fn default() -> Self {
        Self {
            random_modes: 6,
            sites_per_axis: 4,
            shift: [1.0, 1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommutatorSuiteConfig {
    pub sigmas: Vec<f64>,
    /// Modes in the profile; `0` means the full basis.
    pub n_max: usize,
    pub field: [f64; 3],
    /// Flow time in units of the lattice spacing.
    pub time_in_spacings: f64,
    pub steps: usize,
    pub fd_step: f64,
    pub coupling_floor: f64,
}

impl Default for CommutatorSuiteConfig {
    fn default() -> Self {
        Self {
            sigmas: vec![2.0, 3.0],
            n_max: 0,
            field: [1.0, 0.0, 0.0],
            time_in_spacings: 0.01,
            steps: 4,
            fd_step: 1e-4,
            coupling_floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub lattice: LatticeConfig,
    pub gauge: GaugeConfig,
    pub sobolev: SobolevConfig,
    pub modes: ModesConfig,
    pub truncations: TruncationConfig,
    pub quadrature: QuadratureConfig,
    pub tolerances: ToleranceConfig,
    pub output: OutputConfig,
    pub spectrum: SpectrumSuiteConfig,
    pub holonomy: HolonomySuiteConfig,
    pub ccr: CcrSuiteConfig,
    pub continuity: ContinuitySuiteConfig,
    pub fock: FockSuiteConfig,
    pub commutator: CommutatorSuiteConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_917,
            lattice: LatticeConfig::default(),
            gauge: GaugeConfig::default(),
            sobolev: SobolevConfig::default(),
            modes: ModesConfig::default(),
            truncations: TruncationConfig::default(),
            quadrature: QuadratureConfig::default(),
            tolerances: ToleranceConfig::default(),
            output: OutputConfig::default(),
            spectrum: SpectrumSuiteConfig::default(),
            holonomy: HolonomySuiteConfig::default(),
            ccr: CcrSuiteConfig::default(),
            continuity: ContinuitySuiteConfig::default(),
            fock: FockSuiteConfig::default(),
            commutator: CommutatorSuiteConfig::default(),
        }
    }
}

/// False for NaN as well as for non-positive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn torus(&self) -> Result<LatticeTorus> {
        LatticeTorus::new(self.lattice.sites_per_axis, self.lattice.box_length)
    }

    pub fn sobolev_params(&self) -> Result<SobolevParams> {
        SobolevParams::new(self.sobolev.tau1, self.sobolev.sigma)
    }

    pub fn bosonic_params(&self, cutoff: usize) -> Result<ModeParams> {
        let n = self.truncations.bosonic_modes.len();
        ModeParams::new(self.modes.tau2, self.modes.scales(n)?, cutoff)
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.lattice;
        if l.sites_per_axis < 2 {
            return Err(cfg_err("lattice.sites_per_axis must be at least 2"));
        }
        if !(l.box_length > 0.0 && l.box_length.is_finite()) {
            return Err(cfg_err("lattice.box_length must be positive"));
        }
        if self.gauge.n < 2 {
            return Err(cfg_err("gauge.n must be at least 2 (SU(n))"));
        }
        self.sobolev_params().map_err(|e| cfg_err(format!("sobolev: {e}")))?;
        let full = l.sites_per_axis.pow(3) * 3 * (self.gauge.n * self.gauge.n - 1);
        if self.sobolev.basis_size == 0 || self.sobolev.basis_size > full {
            return Err(cfg_err(format!("sobolev.basis_size must lie in 1..={full} for this lattice and gauge group")));
        }
        if self.truncations.bosonic_modes.is_empty() {
            return Err(cfg_err("truncations.bosonic_modes must name at least one basis index"));
        }
        if self.truncations.k_max > self.truncations.fermionic {
            return Err(cfg_err("truncations.k_max cannot exceed truncations.fermionic"));
        }
        if self.truncations.fermionic > crate::fock::MAX_MODES {
            return Err(cfg_err(format!("truncations.fermionic is limited to {}", crate::fock::MAX_MODES)));
        }
        self.bosonic_params(self.modes.cutoff).map_err(|e| cfg_err(format!("modes: {e}")))?;
        if self.quadrature.order != 0 && self.quadrature.order < self.modes.cutoff.max(self.continuity.cutoff) {
            return Err(cfg_err("quadrature.order must be 0 or at least every bosonic cutoff"));
        }
        for p in &self.spectrum.presets {
            preset_scales(p, 1)?;
        }
        if self.spectrum.cases.iter().any(|&[n, k]| n == 0 || k < 2) {
            return Err(cfg_err("spectrum.cases need modes >= 1 and cutoff >= 2"));
        }
        if self.spectrum.tau2.iter().any(|&t| !positive(t)) {
            return Err(cfg_err("spectrum.tau2 values must be positive"));
        }
        if self.holonomy.loop_steps == 0 || self.holonomy.transport_steps == 0 || self.holonomy.unitarity_sites < 2 {
            return Err(cfg_err("holonomy: steps must be positive and unitarity_sites at least 2"));
        }
        if self.ccr.cutoff < 2 || self.continuity.cutoff < 2 {
            return Err(cfg_err("ccr.cutoff and continuity.cutoff must be at least 2"));
        }
        if self.continuity.times.iter().any(|&t| !positive(t)) {
            return Err(cfg_err("continuity.times must be positive"));
        }
        if self.fock.random_modes == 0 || self.fock.random_modes > 12 {
            return Err(cfg_err("fock.random_modes must lie in 1..=12"));
        }
        if self.commutator.steps == 0 || !positive(self.commutator.fd_step) || !positive(self.commutator.time_in_spacings) {
            return Err(cfg_err("commutator: steps, fd_step and time_in_spacings must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Spectrum,
    Holonomy,
    Sobolev,
    Ccr,
    Continuity,
    Fock,
    CommutatorProfile,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Spectrum,
        Suite::Holonomy,
        Suite::Sobolev,
        Suite::Ccr,
        Suite::Continuity,
        Suite::Fock,
        Suite::CommutatorProfile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Spectrum => "spectrum",
            Suite::Holonomy => "holonomy",
            Suite::Sobolev => "sobolev",
            Suite::Ccr => "ccr",
            Suite::Continuity => "continuity",
            Suite::Fock => "fock",
            Suite::CommutatorProfile => "commutator-profile",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A suite name or `all`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    One(Suite),
    All,
}

impl Selection {
    pub fn suites(self) -> Vec<Suite> {
        match self {
            Selection::One(s) => vec![s],
            Selection::All => Suite::ALL.to_vec(),
        }
    }
}

impl FromStr for Selection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Ok(Selection::All);
        }
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .map(Selection::One)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                cfg_err(format!("unknown suite `{s}`; expected one of {} or all", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `residual <= tolerance`.
    #[serde(rename = "<=")]
    AtMost,
    /// `residual >= tolerance` (negative controls).
    #[serde(rename = ">=")]
    AtLeast,
}

/// One judged invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub operation: String,
    pub parameters: Value,
    pub residual: f64,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
}

impl Record {
    fn params_compact(&self) -> String {
        serde_json::to_string(&self.parameters).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub records: Vec<Record>,
    pub tables: Vec<(String, CsvTable)>,
    pub data_files: Vec<(String, String)>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            records: Vec::new(),
            tables: Vec::new(),
            data_files: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    fn records_table(&self) -> CsvTable {
        let mut t = CsvTable::new(&["operation", "parameters", "residual", "relation", "tolerance", "pass"]);
        for r in &self.records {
            let rel = match r.relation {
                Relation::AtMost => "<=",
                Relation::AtLeast => ">=",
            };
            let params = format!("\"{}\"", r.params_compact().replace('"', "\"\""));
            t.push(&[
                r.operation.clone(),
                params,
                fmt_f64(r.residual),
                rel.into(),
                fmt_f64(r.tolerance),
                r.pass.to_string(),
            ])
            .expect("fixed column count");
        }
        t
    }
}

struct Judge<'a> {
    report: &'a mut SuiteReport,
    scale: f64,
}

impl Judge<'_> {
    /// Upper-bound check; the tolerance is multiplied by the scale.
    fn at_most(&mut self, operation: &str, parameters: Value, residual: f64, tolerance: f64) {
        let tolerance = tolerance * self.scale;
        self.report.records.push(Record {
            operation: operation.into(),
            parameters,
            residual,
            tolerance,
            relation: Relation::AtMost,
            pass: residual <= tolerance,
        });
    }

    /// Lower-bound check; not scaled.
    fn at_least(&mut self, operation: &str, parameters: Value, residual: f64, bound: f64) {
        self.report.records.push(Record {
            operation: operation.into(),
            parameters,
            residual,
            tolerance: bound,
            relation: Relation::AtLeast,
            pass: residual >= bound,
        });
    }

    fn failed(&mut self, operation: &str, parameters: Value, err: &Error) {
        let mut p = parameters;
        if let Value::Object(m) = &mut p {
            m.insert("error".into(), Value::String(err.to_string()));
        }
        self.report.records.push(Record {
            operation: operation.into(),
            parameters: p,
            residual: f64::INFINITY,
            tolerance: 0.0,
            relation: Relation::AtMost,
            pass: false,
        });
    }
}

fn suite_seed(seed: u64, suite: Suite) -> u64 {
    seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(suite as u64 + 1))
}

/// Runs one suite. Errors inside a suite become failing records.
pub fn run_suite(suite: Suite, cfg: &ExperimentConfig, tolerance_scale: f64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(suite);
    let mut rng = ChaCha8Rng::seed_from_u64(suite_seed(cfg.seed, suite));
    let mut judge = Judge {
        report: &mut report,
        scale: tolerance_scale,
    };
    let outcome = match suite {
        Suite::Spectrum => spectrum_suite(cfg, &mut judge, &mut rng),
        Suite::Holonomy => holonomy_suite(cfg, &mut judge, &mut rng),
        Suite::Sobolev => sobolev_suite(cfg, &mut judge),
        Suite::Ccr => ccr_suite(cfg, &mut judge, &mut rng),
        Suite::Continuity => continuity_suite(cfg, &mut judge, &mut rng),
        Suite::Fock => fock_suite(cfg, &mut judge, &mut rng),
        Suite::CommutatorProfile => commutator_suite(cfg, &mut judge),
    };
    if let Err(e) = outcome {
        judge.failed(suite.name(), json!({}), &e);
    }
    Ok(report)
}

fn spectrum_suite(cfg: &ExperimentConfig, j: &mut Judge<'_>, rng: &mut ChaCha8Rng) -> Result<()> {
    let tol = &cfg.tolerances;
    let sc = &cfg.spectrum;
    let solver = SpectrumConfig::default();
    let mut table = CsvTable::new(&[
        "modes",
        "cutoff",
        "preset",
        "tau2",
        "index",
        "eigenvalue",
        "closed_form_prediction",
        "residual",
        "tolerance",
        "eigenvalue_c_over_sqrt2",
    ]);
    for &[n, k] in &sc.cases {
        for preset in &sc.presets {
            for &tau2 in &sc.tau2 {
                let params = ModeParams::new(tau2, preset_scales(preset, n)?, k)?;
                let p = json!({"modes": n, "cutoff": k, "preset": preset, "tau2": tau2});
                let got = interior_square_spectrum(&params, sc.count, DEFAULT_MAX_DIM, &solver)?;
                let want = predicted_interior_spectrum(&params, sc.count);
                let mut worst = if got.len() == want.len() { 0.0 } else { f64::INFINITY };
                for (i, (g, w)) in got.iter().zip(&want).enumerate() {
                    let r = (g - w).abs();
                    worst = f64::max(worst, r);
                    table.push(&[
                        n.to_string(),
                        k.to_string(),
                        preset.clone(),
                        fmt_f64(tau2),
                        i.to_string(),
                        fmt_f64(*g),
                        fmt_f64(*w),
                        fmt_f64(r),
                        fmt_f64(tol.spectrum * j.scale),
                        fmt_f64(0.5 * g),
                    ])?;
                }
                j.at_most("bott_square_lowest_eigenvalues", p.clone(), worst, tol.spectrum);
                let zeros = got.iter().filter(|&&e| e.abs() <= tol.spectrum).count();
                j.at_most("bott_square_kernel_dimension", p.clone(), (zeros as f64 - 1.0).abs(), 0.0);

                let b = assemble_bott_dirac(&params, DEFAULT_MAX_DIM)?;
                let ev = spectrum(&b, b.dim(), &solver)?;
                let asym = ev.iter().zip(ev.iter().rev()).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
                j.at_most("bott_dirac_spectral_symmetry", p.clone(), asym, tol.symmetry);

                let rows: Vec<Vec<f64>> = got.iter().zip(&want).enumerate().map(|(i, (g, w))| vec![i as f64, *g, *w]).collect();
                j.report.data_files.push((
                    format!("spectrum_n{n}_k{k}_{preset}_tau{}.dat", fmt_f64(tau2)),
                    render_dat("index eigenvalue closed_form_prediction", &rows),
                ));

                if preset == &sc.presets[0] && tau2 == sc.tau2[0] {
                    embedding_checks(&params, sc, j, rng, &solver, &got)?;
                }
            }
        }
    }
    j.report.tables.push(("spectrum.csv".into(), table));
    Ok(())
}

fn embedding_checks(
    params: &ModeParams,
    sc: &SpectrumSuiteConfig,
    j: &mut Judge<'_>,
    rng: &mut ChaCha8Rng,
    solver: &SpectrumConfig,
    lower_spectrum: &[f64],
) -> Result<()> {
    let n = params.modes();
    let k = params.cutoff;
    let p = json!({"modes": n, "cutoff": k, "samples": sc.embedding_samples});
    let mut norm_res = 0.0f64;
    let mut inner_res = 0.0f64;
    let mut prev = BosonicState::random(n, k, rng);
    for _ in 0..sc.embedding_samples {
        let eta = BosonicState::random(n, k, rng);
        let scale: f64 = 0.5 + rng.random::<f64>();
        let eta = BosonicState::from_amplitudes(n, k, eta.amplitudes().iter().map(|a| a * scale).collect())?;
        let e = embed_vacuum(&eta);
        norm_res = norm_res.max((e.norm() - eta.norm()).abs());
        let before = mode_inner(&prev, &eta)?;
        let after = mode_inner(&embed_vacuum(&prev), &e)?;
        inner_res = inner_res.max((before - after).norm());
        prev = eta;
    }
    let base = ExperimentConfig::default().tolerances;
    j.at_most("embedding_norm", p.clone(), norm_res, base.embedding);
    j.at_most("embedding_inner_product", p.clone(), inner_res, base.embedding);

    let mut s = params.s.clone();
    s.push(*s.last().unwrap_or(&1.0));
    let upper = ModeParams::new(params.tau2, s, k)?;
    if crate::bott::bott_dimension(&upper) <= DEFAULT_MAX_DIM {
        let idx = embedded_interior_indices(&upper)?;
        let got = compressed_square_spectrum(&upper, &idx, lower_spectrum.len(), DEFAULT_MAX_DIM, solver)?;
        let r = if got.len() == lower_spectrum.len() {
            got.iter().zip(lower_spectrum).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        j.at_most("embedded_square_spectrum", p, r, base.spectrum);
    }
    Ok(())
}

fn su2_sigma3() -> CMat {
    CMat::from_row_slice(
        2,
        2,
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ],
    )
}

fn smooth_connection(torus: &LatticeTorus, lie: &LieBasis, amplitude: f64) -> Result<Connection> {
    let l = torus.box_length();
    let g = lie.dim();
    let form = OneForm::from_fn(torus, lie.rep_dim(), |p, axis| {
        let mut m = CMat::zeros(lie.rep_dim(), lie.rep_dim());
        for a in 0..g {
            let phase = 2.0 * PI * (p[(axis + a) % 3] + 0.5 * p[(axis + 1) % 3]) / l + a as f64;
            m += lie.generator(a) * Complex64::new(amplitude * phase.sin() / (1 + a) as f64, 0.0);
        }
        m
    });
    Connection::from_form(form)
}

fn smooth_spinor(torus: &LatticeTorus, n: usize) -> LatticeSpinor {
    let l = torus.box_length();
    LatticeSpinor::from_fn(torus, n, |p| {
        (0..n)
            .map(|i| {
                let a = 2.0 * PI * p[0] / l;
                let b = 2.0 * PI * p[1] / l;
                Complex64::new(1.0 + 0.6 * (a + i as f64).cos(), 0.4 * (b - 0.3 * i as f64).sin())
            })
            .collect()
    })
}

fn holonomy_suite(cfg: &ExperimentConfig, j: &mut Judge<'_>, _rng: &mut ChaCha8Rng) -> Result<()> {
    let tol = &cfg.tolerances;
    let hc = &cfg.holonomy;
    let torus = cfg.torus()?;
    let lie = LieBasis::su(cfg.gauge.n)?;
    let n = cfg.gauge.n;
    let l = torus.box_length();

    let shear = VectorField::sampled(&torus, |p| [0.3 * (2.0 * PI * p[1] / l).sin(), 0.2, 0.1 * (2.0 * PI * p[0] / l).cos()]);
    let transport = FlowTransport::new(&shear, 1.0, hc.transport_steps, false)?;
    let zero = Connection::zero(&torus, n);
    let id = CMat::identity(n, n);
    let r = transport.holonomies(&zero).iter().map(|h| (&h.0 - &id).camax()).fold(0.0, f64::max);
    j.at_most("zero_connection_transport", json!({"sites_per_axis": torus.sites_per_axis(), "steps": hc.transport_steps}), r, tol.transport_identity);

    let a1 = su2_sigma3() * Complex64::new(0.0, hc.theta);
    let z = CMat::zeros(2, 2);
    let conn = Connection::constant(&torus, &[a1, z.clone(), z])?;
    let path = FlowPath::straight(&torus, [0.0; 3], [l, 0.0, 0.0], hc.loop_steps)?;
    let h = holonomy(&path, &conn);
    let expect = (su2_sigma3() * Complex64::new(0.0, -hc.theta * l)).exp();
    j.at_most(
        "abelian_loop_holonomy",
        json!({"theta": hc.theta, "box_length": l, "steps": hc.loop_steps}),
        (h.0 - expect).norm(),
        tol.loop_holonomy,
    );

    let smooth = smooth_connection(&torus, &lie, 0.8)?;
    let mut worst = 0.0f64;
    for site in [0, torus.site_count() / 3, torus.site_count() - 1] {
        let path = integrate_flow(&torus, &shear, torus.site_position(site), 1.0, hc.transport_steps)?;
        let fwd = holonomy(&path, &smooth);
        let back = holonomy(&path.reversed(&torus), &smooth);
        worst = worst.max((back.compose(&fwd).0 - &id).camax());
        worst = worst.max((fwd.inverse().0 - back.0).camax());
    }
    j.at_most("path_reversal_inverse", json!({"steps": hc.transport_steps}), worst, tol.reversal);

    let big = LatticeTorus::new(hc.unitarity_sites, l)?;
    let hb = big.spacing();
    let x = VectorField::constant(&big, [3.0 * hb, 2.0 * hb, hb]);
    let conn = smooth_connection(&big, &lie, 0.8)?;
    let psi = smooth_spinor(&big, n);
    let phi = LatticeSpinor::from_fn(&big, n, |p| {
        (0..n).map(|i| Complex64::new((2.0 * PI * p[2] / l).sin() + i as f64, 0.5)).collect()
    });
    let opts = TransportOptions {
        steps: hc.transport_steps,
        unitarize: true,
    };
    let tr = FlowTransport::new(&x, 1.0, opts.steps, false)?;
    let hols = tr.holonomies(&conn);
    let a = tr.apply_to_spinor(&Multiplier::One, &hols, &psi, true)?;
    let b = tr.apply_to_spinor(&Multiplier::One, &hols, &phi, true)?;
    let drift = (a.norm() - psi.norm()).abs() / psi.norm();
    let inner = (a.inner(&b) - psi.inner(&phi)).norm() / (psi.norm() * phi.norm());
    let unitary = hols.iter().map(GroupElement::unitarity_defect).fold(0.0, f64::max);
    let p = json!({"sites_per_axis": hc.unitarity_sites, "shift_in_spacings": [3, 2, 1]});
    j.at_most("constant_flow_norm_preservation", p.clone(), drift, tol.unitarity);
    j.at_most("constant_flow_inner_product", p.clone(), inner, tol.unitarity);
    j.at_most("holonomy_unitarity", p, unitary, tol.unitarity);

    let amp = hc.control_amplitude;
    let control = VectorField::sampled(&torus, |p| [amp * (2.0 * PI * p[0] / l).sin(), 0.0, 0.0]);
    let tr = FlowTransport::new(&control, 1.0, hc.transport_steps, false)?;
    let hols = tr.holonomies(&smooth);
    let raw = tr.apply_to_spinor(&Multiplier::One, &hols, &smooth_spinor(&torus, n), false)?;
    let fixed = tr.apply_to_spinor(&Multiplier::One, &hols, &smooth_spinor(&torus, n), true)?;
    let base = smooth_spinor(&torus, n).norm();
    let raw_drift = (raw.norm() - base).abs() / base;
    let fixed_drift = (fixed.norm() - base).abs() / base;
    j.at_least(
        "jacobian_disabled_norm_drift",
        json!({"field": "(a sin(2 pi x / L), 0, 0)", "a": amp, "unitarized_drift": fixed_drift}),
        raw_drift,
        tol.control_drift,
    );
    Ok(())
}

fn sobolev_suite(cfg: &ExperimentConfig, j: &mut Judge<'_>) -> Result<()> {
    let tol = &cfg.tolerances;
    let torus = cfg.torus()?;
    let params = cfg.sobolev_params()?;
    let basis = build_sobolev_basis(&torus, cfg.gauge.n, &params, cfg.sobolev.basis_size)?;
    let p = json!({
        "sites_per_axis": torus.sites_per_axis(),
        "basis_size": basis.len(),
        "tau1": params.tau1,
        "sigma": params.sigma,
        "tie_break": TIE_BREAK_RULE,
    });
    let forms: Vec<OneForm> = (0..basis.len()).map(|i| basis.eigenform(i)).collect();
    let mut gram = 0.0f64;
    for a in 0..forms.len() {
        for b in a..forms.len() {
            let expect = if a == b { 1.0 } else { 0.0 };
            gram = gram.max((forms[a].l2_inner(&forms[b])? - Complex64::new(expect, 0.0)).norm());
        }
    }
    j.at_most("eigenform_gram_identity", p.clone(), gram, tol.gram);

    let lap = hodge_laplacian(&torus, cfg.gauge.n)?;
    let mut harmonic = 0.0f64;
    let mut symbol = 0.0f64;
    let mut snorm = 0.0f64;
    let mut table = CsvTable::new(&["index", "k", "trig", "axis", "lie", "eigenvalue", "symbol", "rayleigh", "weight"]);
    for (i, e) in forms.iter().enumerate() {
        let m = basis.modes()[i];
        let s = laplacian_symbol(&torus, m.k);
        let q = e.l2_inner(&apply_componentwise(&lap, e)?)?.re;
        if m.k == [0, 0, 0] {
            harmonic = harmonic.max(m.eigenvalue.abs()).max(q.abs());
        }
        symbol = symbol.max((m.eigenvalue - s).abs() / s.max(1.0)).max((q - s).abs() / s.max(1.0));
        let w = basis.weight(i);
        let sn = sobolev_norm(e, &params)?;
        let l2 = e.l2_norm();
        snorm = snorm.max((sn * sn - w * w * l2 * l2).abs() / (w * w * l2 * l2));
        table.push(&[
            i.to_string(),
            format!("\"{} {} {}\"", m.k[0], m.k[1], m.k[2]),
            match m.trig {
                Trig::Cos => "cos".into(),
                Trig::Sin => "sin".into(),
            },
            m.axis.to_string(),
            m.lie.to_string(),
            fmt_f64(m.eigenvalue),
            fmt_f64(s),
            fmt_f64(q),
            fmt_f64(w),
        ])?;
    }
    j.at_most("harmonic_eigenvalue_zero", p.clone(), harmonic, 0.0);
    j.at_most("plane_wave_symbol_relative", p.clone(), symbol, tol.symbol);
    j.at_most("eigenform_sobolev_norm_relative", p, snorm, tol.sobolev_norm);
    j.report.tables.push(("sobolev_modes.csv".into(), table));
    Ok(())
}

/// `η` with only levels below `K/2` occupied, embedded at cutoff `K`.
fn low_level_state(modes: usize, cutoff: usize, rng: &mut ChaCha8Rng) -> Result<BosonicState> {
    let half = (cutoff / 2).max(1);
    let small = BosonicState::random(modes, half, rng);
    let mut amps = vec![Complex64::new(0.0, 0.0); cutoff.pow(modes as u32)];
    for (i, a) in small.amplitudes().iter().enumerate() {
        let lv = levels_of(i, modes, half);
        let idx = lv.iter().rev().fold(0usize, |acc, &l| acc * cutoff + l);
        amps[idx] = *a;
    }
    BosonicState::from_amplitudes(modes, cutoff, amps)
}

struct WeylRun {
    lattice: f64,
    closed_form: f64,
    sign_lattice: i32,
    sign_closed: i32,
}

fn weyl_run(cfg: &ExperimentConfig, sites: usize, k: [i64; 3], omega: f64) -> Result<WeylRun> {
    let cc = &cfg.ccr;
    let t = LatticeTorus::new(sites, cfg.lattice.box_length)?;
    let l = t.box_length();
    let basis = build_sobolev_basis(&t, 2, &cfg.sobolev_params()?, cc.basis_size.min(t.site_count() * 9))?;
    let idx = basis
        .modes()
        .iter()
        .position(|m| m.k == k && m.trig == Trig::Cos && m.axis == 0 && m.lie == 2)
        .ok_or_else(|| cfg_err("ccr.basis_size too small for the probe mode"))?;
    let w = basis.weight(idx);
    let order = cfg.quadrature.order.max(cc.cutoff);
    let sp = YmSpace::new(basis, vec![idx], ModeParams::new(cfg.modes.tau2, cfg.modes.scales(1)?, cc.cutoff)?, order)?;
    let x = VectorField::constant(&t, [0.25 * l, 0.0, 0.0]);
    let one = Multiplier::One;
    let op = HolonomyDiffeo {
        multiplier: &one,
        field: &x,
        t: 1.0,
        options: TransportOptions::default(),
    };
    let psi = LatticeSpinor::from_fn(&t, 2, |p| {
        vec![
            Complex64::new((2.0 * PI * p[1] / l).cos() + 0.3, 0.1),
            Complex64::new(0.2, (2.0 * PI * p[0] / l).sin()),
        ]
    });
    let probe = YmState::product(&BosonicState::vacuum(1, cc.cutoff), &psi);
    let gen = LieBasis::su(2)?.generator(2).clone();
    let constant = k == [0, 0, 0];
    let closure = move |p: &FlowPath| -> CMat {
        let s = p.samples();
        let (a, b) = (s[0].1[0], s[s.len() - 1].1[0]);
        let integral = if constant {
            b - a
        } else {
            2f64.sqrt() * l / (2.0 * PI) * ((2.0 * PI * b / l).sin() - (2.0 * PI * a / l).sin())
        };
        &gen * Complex64::new(omega / w * integral, 0.0)
    };
    let lat = sp.weyl_conjugation_check(&op, &[omega], &probe, &WeylReference::Lattice)?;
    let closed = sp.weyl_conjugation_check(&op, &[omega], &probe, &WeylReference::AbelianClosedForm(&closure))?;
    Ok(WeylRun {
        lattice: lat.best(),
        closed_form: closed.best(),
        sign_lattice: lat.sign(),
        sign_closed: closed.sign(),
    })
}

fn ccr_suite(cfg: &ExperimentConfig, j: &mut Judge<'_>, rng: &mut ChaCha8Rng) -> Result<()> {
    let tol = &cfg.tolerances;
    let cc = &cfg.ccr;
    let torus = cfg.torus()?;
    let basis = build_sobolev_basis(&torus, cfg.gauge.n, &cfg.sobolev_params()?, cfg.sobolev.basis_size)?;
    let params = cfg.bosonic_params(cc.cutoff)?;
    let nb = params.modes();
    let order = cfg.quadrature.order.max(cc.cutoff);
    let sp = YmSpace::new(basis, cfg.truncations.bosonic_modes.clone(), params, order)?;
    let eta = low_level_state(nb, cc.cutoff, rng)?;
    let psi = smooth_spinor(&torus, cfg.gauge.n);
    let state = YmState::product(&eta, &psi);
    let [a, b] = cc.group_law_shifts;
    let ua = vec![a; nb];
    let ub = vec![b; nb];
    let uab = vec![a + b; nb];
    let lhs = sp.translate_u(&ua, &sp.translate_u(&ub, &state)?)?;
    let rhs = sp.translate_u(&uab, &state)?;
    let r = lhs.distance(&rhs)? / state.norm();
    j.at_most("translation_group_law", json!({"cutoff": cc.cutoff, "shifts": [a, b]}), r, tol.group_law);
    let back = sp.translate_u(&ua.iter().map(|v| -v).collect::<Vec<_>>(), &sp.translate_u(&ua, &state)?)?;
    j.at_most("translation_inverse", json!({"cutoff": cc.cutoff, "shift": a}), back.distance(&state)? / state.norm(), tol.group_law);

    let mut signs = Vec::new();
    let mut table = CsvTable::new(&["probe", "sites_per_axis", "omega", "lattice_residual", "closed_form_residual", "sign", "tolerance"]);
    let n1 = cfg.lattice.sites_per_axis;
    for &omega in &cc.omegas {
        let c = weyl_run(cfg, n1, [0, 0, 0], omega)?;
        let s1 = weyl_run(cfg, n1, [1, 0, 0], omega)?;
        let p = json!({"omega": omega, "cutoff": cc.cutoff, "sites_per_axis": n1});
        if omega == 0.0 {
            let worst = [c.lattice, c.closed_form, s1.lattice, s1.closed_form].into_iter().fold(0.0, f64::max);
            j.at_most("weyl_zero_shift", p, worst, 0.0);
            continue;
        }
        j.at_most("weyl_constant_mode", p.clone(), c.lattice, tol.weyl);
        j.at_most("weyl_smooth_mode_lattice_reference", p.clone(), s1.lattice, tol.weyl);
        let s2 = weyl_run(cfg, 2 * n1, [1, 0, 0], omega)?;
        let ratio = s1.closed_form / s2.closed_form;
        let mid = 0.5 * (tol.convergence_ratio_low + tol.convergence_ratio_high);
        let half = 0.5 * (tol.convergence_ratio_high - tol.convergence_ratio_low);
        let mut q = p.clone();
        q["ratio"] = json!(ratio);
        q["coarse"] = json!(s1.closed_form);
        q["fine"] = json!(s2.closed_form);
        j.report.records.push(Record {
            operation: "weyl_closed_form_refinement_ratio".into(),
            parameters: q,
            residual: (ratio - mid).abs(),
            tolerance: half,
            relation: Relation::AtMost,
            pass: (ratio - mid).abs() <= half,
        });
        for (name, run, sites) in [("constant", &c, n1), ("smooth", &s1, n1), ("smooth", &s2, 2 * n1)] {
            signs.push(run.sign_lattice);
            signs.push(run.sign_closed);
            table.push(&[
                name.into(),
                sites.to_string(),
                fmt_f64(omega),
                fmt_f64(run.lattice),
                fmt_f64(run.closed_form),
                run.sign_lattice.to_string(),
                fmt_f64(tol.weyl * j.scale),
            ])?;
        }
    }
    let consistent = signs.windows(2).all(|w| w[0] == w[1]);
    j.at_most(
        "weyl_sign_consistency",
        json!({"measured_sign": signs.first().copied().unwrap_or(0), "probes": signs.len()}),
        if consistent { 0.0 } else { 1.0 },
        0.0,
    );
    j.report.tables.push(("ccr.csv".into(), table));
    Ok(())
}

fn monotone_to_zero(ts: &[f64], values: &[f64]) -> bool {
    let mut pairs: Vec<(f64, f64)> = ts.iter().copied().zip(values.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-15)
}

fn continuity_suite(cfg: &ExperimentConfig, j: &mut Judge<'_>, rng: &mut ChaCha8Rng) -> Result<()> {
    let tol = &cfg.tolerances;
    let cc = &cfg.continuity;
    let torus = cfg.torus()?;
    let params = cfg.bosonic_params(cc.cutoff)?;
    let nb = params.modes();
    let order = cfg.quadrature.order.max(cc.cutoff);
    let size = cfg.truncations.bosonic_modes.iter().max().unwrap() + 1;
    let basis = build_sobolev_basis(&torus, cfg.gauge.n, &cfg.sobolev_params()?, size.max(cfg.truncations.fermionic))?;

    let sp = YmSpace::new(basis.clone(), cfg.truncations.bosonic_modes.clone(), params.clone(), order)?;
    let psi = smooth_spinor(&torus, cfg.gauge.n);
    let state = YmState::product(&BosonicState::vacuum(nb, cc.cutoff), &psi);
    let mut omega = vec![0.0; nb];
    omega[0] = cc.omega;
    let profile = sp.strong_continuity_profile(&omega, &cc.times, &state)?;
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    let mut table = CsvTable::new(&["profile", "t", "distance", "closed_form", "residual", "tolerance"]);
    for (&t, &d) in cc.times.iter().zip(&profile) {
        let rel = d / state.norm();
        let cf = vacuum_shift_distance(params.s[0], params.tau2, t * cc.omega);
        worst = worst.max((rel - cf).abs());
        rows.push(vec![t, rel, cf]);
        table.push(&["translation".into(), fmt_f64(t), fmt_f64(rel), fmt_f64(cf), fmt_f64((rel - cf).abs()), fmt_f64(tol.continuity * j.scale)])?;
    }
    j.at_most("translation_gaussian_overlap", json!({"omega": cc.omega, "cutoff": cc.cutoff}), worst, tol.continuity);
    j.report.data_files.push(("continuity_translation.dat".into(), render_dat("t distance closed_form", &rows)));

    let nf = cfg.truncations.fermionic;
    let fs = FockYmSpace::new(basis, nf, cfg.truncations.bosonic_modes.clone(), params.clone(), order)?;
    let x = VectorField::constant(&torus, cc.field);
    let eta = low_level_state(nb, cc.cutoff, rng)?;
    let mut rows: Vec<Vec<f64>> = cc.times.iter().map(|&t| vec![t]).collect();
    for k in 0..=2.min(nf) {
        let xi = sample_sector_state(nf, k, cfg.seed.wrapping_add(k as u64))?;
        let st = FockYmState::product(&xi, &eta);
        let ds: Vec<f64> = cc
            .times
            .iter()
            .map(|&t| fs.combined_action(&x, t, cfg.holonomy.transport_steps, Weighting::Conjugated, &st)?.distance(&st))
            .collect::<Result<_>>()?;
        for (row, &d) in rows.iter_mut().zip(&ds) {
            row.push(d);
        }
        for (&t, &d) in cc.times.iter().zip(&ds) {
            table.push(&[format!("combined_k{k}"), fmt_f64(t), fmt_f64(d), String::new(), String::new(), String::new()])?;
        }
        let p = json!({"particles": k, "times": cc.times, "distances": ds});
        j.at_most("combined_action_monotone", p.clone(), if monotone_to_zero(&cc.times, &ds) { 0.0 } else { 1.0 }, 0.0);
        let tmin = cc.times.iter().copied().fold(f64::INFINITY, f64::min);
        let smallest = ds[cc.times.iter().position(|&t| t == tmin).unwrap()];
        let largest = ds.iter().copied().fold(0.0, f64::max);
        j.at_most("combined_action_small_time_ratio", p, smallest / (largest + tol.continuity), 0.1);
    }
    j.report.data_files.push(("continuity_combined.dat".into(), render_dat("t k0 k1 k2", &rows)));
    j.report.tables.push(("continuity.csv".into(), table));
    Ok(())
}

fn int_matrix(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<i64>> {
    (0..n).map(|_| (0..n).map(|_| rng.random_range(-3..=3)).collect()).collect()
}

fn fock_suite(cfg: &ExperimentConfig, j: &mut Judge<'_>, rng: &mut ChaCha8Rng) -> Result<()> {
    let tol = &cfg.tolerances;
    let fc = &cfg.fock;
    let n = fc.random_modes;

    let f = int_matrix(n, rng);
    let g = int_matrix(n, rng);
    let fg: Vec<Vec<i64>> = (0..n).map(|r| (0..n).map(|c| (0..n).map(|m| f[r][m] * g[m][c]).sum()).collect()).collect();
    let mut mismatches = 0usize;
    for k in 0..=n {
        let lf = exterior_power_exact(&f, k)?;
        let lg = exterior_power_exact(&g, k)?;
        let lfg = exterior_power_exact(&fg, k)?;
        let d = lf.len();
        for r in 0..d {
            for c in 0..d {
                let prod: i128 = (0..d).map(|m| lf[r][m] * lg[m][c]).sum();
                if prod != lfg[r][c] {
                    mismatches += 1;
                }
            }
        }
    }
    j.at_most("exterior_power_multiplicativity_exact", json!({"modes": n}), mismatches as f64, 0.0);

    let vf: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    let wf: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random::<f64>() - 0.5, 0.0)).collect();
    let m = DMatrix::from_fn(n, n, |r, c| f[r][c] as f64);
    let mv: Vec<Complex64> = (0..n).map(|r| (0..n).map(|c| vf[c] * m[(r, c)]).sum()).collect();
    let mw: Vec<Complex64> = (0..n).map(|r| (0..n).map(|c| wf[c] * m[(r, c)]).sum()).collect();
    let v = FermionState::one_particle(&vf)?;
    let w = FermionState::one_particle(&wf)?;
    let lhs = crate::fock_rep::fock_action(&m, &v.wedge(&w)?)?;
    let rhs = FermionState::one_particle(&mv)?.wedge(&FermionState::one_particle(&mw)?)?;
    let r = lhs.amplitudes().iter().zip(rhs.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    j.at_most("fock_action_wedge_multiplicativity", json!({"modes": n}), r, 1e-12);

    let rf = DMatrix::from_fn(n, n, |_, _| 2.0 * rng.random::<f64>() - 1.0);
    let norms = sector_norm_bound(&rf, n, usize::MAX)?;
    let mut table = CsvTable::new(&["map", "k", "norm", "svd_prediction", "residual", "tolerance"]);
    let mut worst = 0.0f64;
    for s in &norms {
        let d = s.direct.unwrap_or(f64::NAN);
        let r = s.residual().unwrap_or(f64::INFINITY);
        worst = worst.max(r);
        table.push(&["random".into(), s.k.to_string(), fmt_f64(d), fmt_f64(s.prediction), fmt_f64(r), fmt_f64(tol.sector_norm * j.scale)])?;
    }
    j.at_most("sector_norm_svd_product", json!({"modes": n}), worst, tol.sector_norm);

    let t4 = LatticeTorus::new(fc.sites_per_axis, cfg.lattice.box_length)?;
    let lie = LieBasis::su(cfg.gauge.n)?;
    let full = t4.site_count() * 3 * lie.dim();
    let basis = build_sobolev_basis(&t4, cfg.gauge.n, &cfg.sobolev_params()?, full)?;
    let conn = smooth_connection(&t4, &lie, 0.8)?;
    let h = t4.spacing();
    let x = VectorField::constant(&t4, [fc.shift[0] * h, fc.shift[1] * h, fc.shift[2] * h]);
    let steps = cfg.holonomy.transport_steps;
    let conj = one_particle_action(&basis, full, &x, 1.0, &conn, steps, Weighting::Conjugated)?;
    let direct = one_particle_action(&basis, full, &x, 1.0, &conn, steps, Weighting::Direct)?;
    let p = json!({
        "sites_per_axis": fc.sites_per_axis,
        "modes": full,
        "tau1": cfg.sobolev.tau1,
        "sigma": cfg.sobolev.sigma,
        "shift_in_spacings": fc.shift,
    });
    j.at_most("weight_conjugated_orthogonality", p.clone(), conj.orthogonality_defect(), tol.isometry);
    j.at_least("unweighted_orthogonality_defect", p.clone(), direct.orthogonality_defect(), tol.unweighted_defect);
    let k_max = cfg.truncations.k_max.min(full);
    let iso = sector_norm_bound(&conj.matrix(), k_max, 0)?;
    let mut worst = 0.0f64;
    for s in &iso {
        worst = worst.max((s.prediction - 1.0).abs());
        table.push(&["isometric".into(), s.k.to_string(), String::new(), fmt_f64(s.prediction), fmt_f64((s.prediction - 1.0).abs()), fmt_f64(tol.isometry * j.scale)])?;
    }
    j.at_most("isometric_sector_norms", p, worst, tol.isometry);

    let rejected = matches!(require_global(&Multiplier::Sites(vec![1.0; t4.site_count()])), Err(Error::Unsupported(_)));
    j.at_most("local_algebra_rejected", json!({}), if rejected { 0.0 } else { 1.0 }, 0.0);
    j.report.tables.push(("sector_norms.csv".into(), table));
    Ok(())
}

fn commutator_suite(cfg: &ExperimentConfig, j: &mut Judge<'_>) -> Result<()> {
    let tol = &cfg.tolerances;
    let cc = &cfg.commutator;
    let torus = cfg.torus()?;
    let lie_dim = cfg.gauge.n * cfg.gauge.n - 1;
    let full = torus.site_count() * 3 * lie_dim;
    let n_max = if cc.n_max == 0 { full } else { cc.n_max.min(full) };
    let x = VectorField::constant(&torus, cc.field);
    let t = cc.time_in_spacings * torus.spacing();
    let mut table = CsvTable::new(&["sigma", "n", "eigenvalue", "weight", "increment", "gamma"]);
    let mut rows = Vec::new();
    for &sigma in &cc.sigmas {
        let params = SobolevParams::new(cfg.sobolev.tau1, sigma)?;
        let basis = build_sobolev_basis(&torus, cfg.gauge.n, &params, n_max)?;
        let prof = commutator_growth_profile(&x, [0.0; 3], t, cc.steps, &basis, cfg.modes.tau2, n_max, cc.fd_step)?;
        let p = json!({"sigma": sigma, "tau1": cfg.sobolev.tau1, "n_max": n_max, "sites_per_axis": torus.sites_per_axis()});
        let drops = prof.gamma.windows(2).filter(|w| w[1] < w[0]).count();
        j.at_most("gamma_non_decreasing", p.clone(), drops as f64, 0.0);
        let slope = last_decade_slope(&prof, cc.coupling_floor)?;
        let mut q = p.clone();
        q["measured_slope"] = json!(slope.measured);
        q["predicted_slope"] = json!(slope.predicted);
        q["points"] = json!(slope.points);
        j.at_most("increment_decay_slope_relative", q, slope.relative_error(), tol.slope);
        for i in 0..n_max {
            table.push(&[
                fmt_f64(sigma),
                (i + 1).to_string(),
                fmt_f64(prof.eigenvalues[i]),
                fmt_f64(prof.weights[i]),
                fmt_f64(prof.increments[i]),
                fmt_f64(prof.gamma[i]),
            ])?;
            rows.push(vec![sigma, (i + 1) as f64, prof.increments[i], prof.gamma[i]]);
        }
    }
    j.report.tables.push(("commutator_profile.csv".into(), table));
    j.report.data_files.push(("commutator_profile.dat".into(), render_dat("sigma n increment gamma", &rows)));
    Ok(())
}

/// Everything a run produced, ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub suites: Vec<SuiteReport>,
    pub seed: u64,
    pub tolerance_scale: f64,
}

impl RunReport {
    pub fn pass(&self) -> bool {
        self.suites.iter().all(SuiteReport::pass)
    }

    pub fn summary_json(&self) -> Result<String> {
        let suites: Vec<Value> = self
            .suites
            .iter()
            .map(|s| {
                json!({
                    "suite": s.suite.name(),
                    "pass": s.pass(),
                    "records": s.records,
                })
            })
            .collect();
        let mut out = serde_json::to_string_pretty(&json!({
            "seed": self.seed,
            "tolerance_scale": self.tolerance_scale,
            "pass": self.pass(),
            "suites": suites,
        }))?;
        out.push('\n');
        Ok(out)
    }

    /// Writes `summary.json`, one `<suite>.csv` of records per suite, the
    /// suite tables and data files.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut put = |name: &str, text: &str| -> Result<()> {
            let p = dir.join(name);
            std::fs::write(&p, text)?;
            written.push(p);
            Ok(())
        };
        put("summary.json", &self.summary_json()?)?;
        for s in &self.suites {
            put(&format!("{}_checks.csv", s.suite.name()), &s.records_table().render())?;
            for (name, t) in &s.tables {
                put(name, &t.render())?;
            }
            for (name, text) in &s.data_files {
                put(name, text)?;
            }
        }
        Ok(written)
    }
}

pub fn run(selection: Selection, cfg: &ExperimentConfig, tolerance_scale: f64) -> Result<RunReport> {
    if !(tolerance_scale > 0.0 && tolerance_scale.is_finite()) {
        return Err(cfg_err("--tolerance-scale must be a positive number"));
    }
    cfg.validate()?;
    let suites = selection
        .suites()
        .into_iter()
        .map(|s| run_suite(s, cfg, tolerance_scale))
        .collect::<Result<_>>()?;
    Ok(RunReport {
        suites,
        seed: cfg.seed,
        tolerance_scale,
    })
}

/// Runs and writes the sobolev basis cache next to the reports.
pub fn run_and_write(selection: Selection, cfg: &ExperimentConfig, tolerance_scale: f64, dir: &Path) -> Result<RunReport> {
    let report = run(selection, cfg, tolerance_scale)?;
    report.write(dir)?;
    if selection.suites().contains(&Suite::Sobolev) {
        let basis = build_sobolev_basis(&cfg.torus()?, cfg.gauge.n, &cfg.sobolev_params()?, cfg.sobolev.basis_size)?;
        save_basis(&dir.join("sobolev_basis.json"), &basis)?;
    }
    Ok(report)
}

/// `--out`, then the environment override, then the config.
pub fn resolve_output_dir(cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.dir.clone(),
    }
}

/// One line per suite with the failing operations.
pub fn summary_lines(report: &RunReport) -> Vec<String> {
    report
        .suites
        .iter()
        .map(|s| {
            let failed: BTreeMap<&str, usize> = s.records.iter().filter(|r| !r.pass).fold(BTreeMap::new(), |mut m, r| {
                *m.entry(r.operation.as_str()).or_insert(0) += 1;
                m
            });
            if failed.is_empty() {
                format!("{:<20} PASS ({} checks)", s.suite.name(), s.records.len())
            } else {
                let names: Vec<String> = failed.iter().map(|(k, v)| format!("{k} x{v}")).collect();
                format!("{:<20} FAIL ({})", s.suite.name(), names.join(", "))
            }
        })
        .collect()
}
