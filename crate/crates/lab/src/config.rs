//! Run configuration: a TOML file with one table per concern. Every key has
//! a default, so an empty file describes the default experiment.

use std::path::{Path, PathBuf};

use magwell_core::field::{FieldModel, GaugeField, GaugeKind};
use magwell_core::lattice::{BoundaryCondition, Grid};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io;

/// Resolution below which results are not trusted at all.
pub const MIN_NODES_PER_LENGTH: f64 = 8.0;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("malformed configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub field: FieldSection,
    pub gauge: GaugeSection,
    pub grid: GridSection,
    pub sweep: SweepSection,
    pub thresholds: Thresholds,
    pub spectra: SpectraSection,
    pub solver: SolverSection,
    pub quasimode: QuasimodeSection,
    pub agmon: AgmonSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    /// `constant`, `trig-well` or `tabulated`.
    pub kind: String,
    pub params: Vec<f64>,
    /// CSV of `(x, y, b)` rows for `tabulated`, relative to the config file.
    pub table: Option<PathBuf>,
}

impl Default for FieldSection {
    fn default() -> Self {
        Self {
            kind: "trig-well".into(),
            params: vec![1.0, 1.0, 1.0],
            table: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeSection {
    /// `landau` or `symmetric-local`.
    pub kind: String,
    pub center: [f64; 2],
    pub quadrature_order: usize,
}

impl Default for GaugeSection {
    fn default() -> Self {
        Self {
            kind: "landau".into(),
            center: [0.0, 0.0],
            quadrature_order: GaugeField::DEFAULT_ORDER,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Supercell is `cells × cells` fundamental cells.
    pub cells: usize,
    /// `dirichlet` or `torus`.
    pub boundary: String,
    /// Nodes per magnetic length `√(h / b_max)`; sets the spacing per `h`.
    pub nodes_per_length: f64,
    /// Fixed nodes per cell, overriding `nodes_per_length`.
    pub per_cell: Option<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            cells: 3,
            boundary: "dirichlet".into(),
            nodes_per_length: 12.0,
            per_cell: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Strictly decreasing.
    pub h: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            h: vec![0.3, 0.2, 0.14, 0.1, 0.07, 0.05],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eta: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            eps0: 0.9,
            eps1: 0.5,
            eps2: 0.7,
            eta: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectraSection {
    /// Spacing window `[hα, hβ]`; default `b₀ + 0.1` and `b₀ + 0.4`.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub m_exponent: f64,
}

impl Default for SpectraSection {
    fn default() -> Self {
        Self {
            alpha: None,
            beta: None,
            m_exponent: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub seed: u64,
    pub max_runs: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            seed: 0x5EED,
            max_runs: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuasimodeSection {
    pub center: [f64; 2],
    pub h: Vec<f64>,
    pub r0: f64,
}

impl Default for QuasimodeSection {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            h: vec![0.4, 0.283, 0.2, 0.141, 0.1],
            r0: magwell_core::quasimode::DEFAULT_R0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgmonSection {
    pub eps: f64,
    /// 8 or 16.
    pub stencil: usize,
}

impl Default for AgmonSection {
    fn default() -> Self {
        Self { eps: 0.3, stencil: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Golden summary compared after each sweep, relative to the config file.
    pub golden: Option<PathBuf>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("magwell-out"),
            golden: None,
        }
    }
}

/// A validated configuration together with the resolved field model.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: RunConfig,
    pub model: FieldModel,
    /// Directory relative paths in the file are resolved against.
    pub base: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// sha256 of the canonical JSON rendering, so formatting and key order
    /// of the file do not matter but every effective value does.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(canon.as_bytes()))
    }

    /// Checks everything that does not need the field model.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let t = &self.thresholds;
        if !(t.eps1 > 0.0 && t.eps1 < t.eps2 && t.eps2 < t.eps0) {
            errs.push(format!(
                "thresholds must satisfy 0 < eps1 < eps2 < eps0 (got eps1 = {}, eps2 = {}, eps0 = {})",
                t.eps1, t.eps2, t.eps0
            ));
        }
        if !(t.eta > 0.0) {
            errs.push(format!("eta must be positive (got {})", t.eta));
        }
        check_h_list("sweep.h", &self.sweep.h, &mut errs);
        check_h_list("quasimode.h", &self.quasimode.h, &mut errs);
        if self.grid.cells == 0 {
            errs.push("grid.cells must be positive".into());
        }
        match self.grid.boundary.as_str() {
            "dirichlet" | "torus" => {}
            other => errs.push(format!("grid.boundary must be `dirichlet` or `torus` (got `{other}`)")),
        }
        if self.grid.boundary == "torus" && self.gauge.kind != "landau" {
            errs.push("torus grids need the landau gauge".into());
        }
        match self.grid.per_cell {
            Some(m) if m < 2 => errs.push(format!("grid.per_cell must be at least 2 (got {m})")),
            None if !(self.grid.nodes_per_length >= MIN_NODES_PER_LENGTH) => errs.push(format!(
                "grid.nodes_per_length must be at least {MIN_NODES_PER_LENGTH} (got {})",
                self.grid.nodes_per_length
            )),
            _ => {}
        }
        match self.gauge.kind.as_str() {
            "landau" | "symmetric-local" => {}
            other => errs.push(format!("gauge.kind must be `landau` or `symmetric-local` (got `{other}`)")),
        }
        if self.gauge.quadrature_order == 0 {
            errs.push("gauge.quadrature_order must be positive".into());
        }
        if !(self.solver.tol > 0.0) {
            errs.push(format!("solver.tol must be positive (got {})", self.solver.tol));
        }
        if self.solver.max_runs == 0 {
            errs.push("solver.max_runs must be positive".into());
        }
        if !(self.spectra.m_exponent > 0.0) {
            errs.push(format!("spectra.m_exponent must be positive (got {})", self.spectra.m_exponent));
        }
        if let (Some(a), Some(b)) = (self.spectra.alpha, self.spectra.beta) {
            if !(a < b) {
                errs.push(format!("spectra.alpha must be below spectra.beta (got {a}, {b})"));
            }
        }
        if !(self.quasimode.r0 > 0.0) {
            errs.push(format!("quasimode.r0 must be positive (got {})", self.quasimode.r0));
        }
        if !(self.agmon.eps > 0.0 && self.agmon.eps <= 1.0) {
            errs.push(format!("agmon.eps must lie in (0, 1] (got {})", self.agmon.eps));
        }
        if !matches!(self.agmon.stencil, 8 | 16) {
            errs.push(format!("agmon.stencil must be 8 or 16 (got {})", self.agmon.stencil));
        }
        if self.field.kind == "tabulated" && self.field.table.is_none() {
            errs.push("field.table is required for a tabulated field".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }

    /// Validates and resolves the field model; tabulated paths are taken
    /// relative to `base`.
    pub fn resolve(self, base: &Path) -> Result<Loaded, ConfigError> {
        self.validate()?;
        let model = match self.field.kind.as_str() {
            "tabulated" => {
                let path = base.join(self.field.table.as_ref().expect("validated"));
                io::load_tabulated_csv(&path).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?
            }
            kind => FieldModel::from_kind(kind, &self.field.params)
                .map_err(|e| ConfigError::Invalid(vec![format!("field: {e}")]))?,
        };
        Ok(Loaded {
            config: self,
            model,
            base: base.to_path_buf(),
        })
    }
}

fn check_h_list(name: &str, hs: &[f64], errs: &mut Vec<String>) {
    if hs.is_empty() {
        errs.push(format!("{name} must not be empty"));
    }
    if hs.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
        errs.push(format!("{name} entries must be positive"));
    }
    if hs.windows(2).any(|w| !(w[1] < w[0])) {
        errs.push(format!("{name} must be strictly decreasing"));
    }
}

impl Loaded {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::load(path)?.resolve(&base)
    }

    pub fn gauge(&self) -> GaugeField {
        let g = &self.config.gauge;
        let kind = match g.kind.as_str() {
            "symmetric-local" => GaugeKind::SymmetricLocal { center: g.center },
            _ => GaugeKind::Landau,
        };
        GaugeField::new(self.model.clone(), kind, g.quadrature_order)
    }

    pub fn boundary(&self) -> BoundaryCondition {
        match self.config.grid.boundary.as_str() {
            "torus" => BoundaryCondition::Torus,
            _ => BoundaryCondition::Dirichlet,
        }
    }

    /// Nodes per cell for `h`.
    pub fn per_cell(&self, h: f64) -> usize {
        self.config.grid.per_cell.unwrap_or_else(|| {
            let bmax = self.model.max_intensity(256);
            let a = (h / bmax).sqrt() / self.config.grid.nodes_per_length;
            ((1.0 / a).ceil() as usize).max(2)
        })
    }

    pub fn grid(&self, h: f64) -> Grid {
        Grid::new(self.config.grid.cells, self.per_cell(h), self.boundary()).expect("validated grid")
    }

    /// Single-cell Dirichlet grid used by the quasimode job.
    pub fn cell_grid(&self, h: f64) -> Grid {
        Grid::new(1, self.per_cell(h), BoundaryCondition::Dirichlet).expect("validated grid")
    }

    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        match override_dir {
            Some(d) => d.to_path_buf(),
            None => self.base.join(&self.config.output.dir),
        }
    }

    pub fn golden_path(&self) -> Option<PathBuf> {
        self.config.output.golden.as_ref().map(|g| self.base.join(g))
    }

    /// Spacing window `(α, β)` given `b₀`.
    pub fn spacing_window(&self, b0: f64) -> (f64, f64) {
        (
            self.config.spectra.alpha.unwrap_or(b0 + 0.1),
            self.config.spectra.beta.unwrap_or(b0 + 0.4),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn threshold_order_enforced() {
        let c = RunConfig::from_toml_str("[thresholds]\neps1 = 0.95\n").unwrap();
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("eps1 < eps2 < eps0"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml_str("[grid]\nsize = 3\n").is_err());
    }

    #[test]
    fn h_list_must_decrease() {
        let c = RunConfig::from_toml_str("[sweep]\nh = [0.1, 0.2]\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_values_not_layout() {
        let a = RunConfig::from_toml_str("[solver]\ntol = 1e-10\n").unwrap();
        let b = RunConfig::from_toml_str("# comment\n[solver]\n  tol=1.0e-10\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = RunConfig::from_toml_str("[solver]\ntol = 1e-9\n").unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn resolution_follows_h() {
        let l = RunConfig::default().resolve(Path::new(".")).unwrap();
        assert_eq!(l.per_cell(0.05), 93);
        assert!(l.per_cell(0.2) < l.per_cell(0.1));
    }
}
