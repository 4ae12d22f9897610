//! Experiment pipeline behind the subcommands. Each command writes its
//! bundle under the output directory and returns an [`Outcome`].

use std::path::{Path, PathBuf};

use log::{info, warn};
use magwell_core::agmon::{self, agmon_distance, decay_profile, energy_identity_residual, make_weight, Stencil, WeightFunction};
use magwell_core::eigensolve::{eigen_count_below, lowest_eigenpairs_with, nearest_eigenpairs, EigenError, SolverOptions};
use magwell_core::field::{check_assumptions, detect_wells, find_b0, FieldError, FieldModel, GaugeField};
use magwell_core::lattice::{assemble, BoundaryCondition, DomainMask, Grid, LatticeError, LatticeWarning, MagneticOperator};
use magwell_core::quasimode::{build_quasimode, spectral_hit_check, QuasimodeError};
use magwell_core::spectra::{self, conjugated_resolvent_norm, ResolventOptions, SpectraError};
use magwell_core::{Point, C64};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Loaded};
use crate::io::{self, IoError};
use crate::pool::run_indexed;
use crate::report::{
    verdicts, AwayRecord, EigenRecord, Golden, HRecord, Parameters, Provenance, QuasimodeRecord, SweepReport, Verdict,
};

/// Resolution of the `b₀` scan.
const B0_RESOLUTION: usize = 512;
/// Nodes per cell of the grid used to label wells in `check-field`.
const WELL_GRID: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl PipelineError {
    /// 2 for configuration or usage problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Usage(_) | PipelineError::Io(_) => 2,
            PipelineError::Numerical(_) => 3,
        }
    }
}

impl From<LatticeError> for PipelineError {
    fn from(e: LatticeError) -> Self {
        match e {
            LatticeError::FluxNotQuantized { .. }
            | LatticeError::TorusGauge
            | LatticeError::InvalidGrid { .. }
            | LatticeError::InvalidH(_) => PipelineError::Usage(e.to_string()),
            _ => PipelineError::Numerical(e.to_string()),
        }
    }
}

impl From<FieldError> for PipelineError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::InvalidThresholds { .. } | FieldError::InvalidModel(_) => PipelineError::Usage(e.to_string()),
            _ => PipelineError::Numerical(e.to_string()),
        }
    }
}

impl From<SpectraError> for PipelineError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::Lattice(l) => l.into(),
            e => PipelineError::Numerical(e.to_string()),
        }
    }
}

macro_rules! numerical {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                PipelineError::Numerical(e.to_string())
            }
        }
    )*};
}
numerical!(EigenError, QuasimodeError, agmon::AgmonError);

/// Command result: whether every verdict passed, and where the bundle went.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
    pub out: PathBuf,
    pub lines: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// Shared state of one invocation.
#[derive(Debug)]
pub struct Context {
    pub loaded: Loaded,
    pub b0: f64,
    pub out: PathBuf,
    pub jobs: usize,
    pub plot_data: bool,
}

impl Context {
    pub fn new(loaded: Loaded, out: Option<&Path>, jobs: usize, plot_data: bool) -> Result<Self, PipelineError> {
        let (b0, _) = find_b0(&loaded.model, B0_RESOLUTION)?;
        let out = loaded.output_dir(out);
        Ok(Self {
            loaded,
            b0,
            out,
            jobs: jobs.max(1),
            plot_data,
        })
    }

    fn model(&self) -> &FieldModel {
        &self.loaded.model
    }

    fn gauge(&self) -> GaugeField {
        self.loaded.gauge()
    }

    fn solver(&self) -> SolverOptions {
        let s = &self.loaded.config.solver;
        SolverOptions {
            tol: s.tol,
            seed: s.seed,
            shift: None,
            max_runs: s.max_runs,
        }
    }

    fn stencil(&self) -> Stencil {
        match self.loaded.config.agmon.stencil {
            8 => Stencil::Eight,
            _ => Stencil::Sixteen,
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(self.loaded.config.hash())
    }

    pub fn parameters(&self) -> Parameters {
        let c = &self.loaded.config;
        let (alpha, beta) = self.loaded.spacing_window(self.b0);
        Parameters {
            b0: self.b0,
            eps0: c.thresholds.eps0,
            eps1: c.thresholds.eps1,
            eps2: c.thresholds.eps2,
            eta: c.thresholds.eta,
            alpha,
            beta,
            m_exponent: c.spectra.m_exponent,
            agmon_eps: c.agmon.eps,
        }
    }

    /// Top of the counting window, `h(b₀+ε₀)`.
    fn window_top(&self, h: f64) -> f64 {
        h * (self.b0 + self.loaded.config.thresholds.eps0)
    }

    fn wells_mask(&self, grid: &Grid) -> DomainMask {
        DomainMask::wells(grid, self.model(), self.b0, self.loaded.config.thresholds.eps2)
    }

    fn away_mask(&self, grid: &Grid) -> DomainMask {
        let t = &self.loaded.config.thresholds;
        DomainMask::away(grid, self.model(), self.b0, t.eps1, t.eta)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn warnings_of(op: &MagneticOperator) -> Vec<String> {
    op.warnings()
        .iter()
        .map(|w| match w {
            LatticeWarning::CoarseGrid { nodes_per_length } => {
                format!("coarse grid: {nodes_per_length:.2} nodes per magnetic length")
            }
        })
        .collect()
}

struct SupercellOut {
    per_cell: usize,
    count: usize,
    record: EigenRecord,
    warnings: Vec<String>,
    op: Option<MagneticOperator>,
}

struct WellsOut {
    count: usize,
    record: EigenRecord,
    decay: f64,
    mask: DomainMask,
    distance: Option<Vec<f64>>,
}

fn supercell_job(ctx: &Context, h: f64, keep_op: bool) -> Result<SupercellOut, PipelineError> {
    let grid = ctx.loaded.grid(h);
    let op = assemble(&ctx.gauge(), &grid, &DomainMask::full(&grid), h)?;
    let warnings = warnings_of(&op);
    for w in &warnings {
        warn!("h = {h}: {w}");
    }
    let count = eigen_count_below(&op, ctx.window_top(h))?;
    let eig = lowest_eigenpairs_with(&op, count.max(1).min(op.dim()), &ctx.solver())?;
    info!("h = {h}: supercell n = {}, {count} eigenvalues below h(b0+eps0)", op.dim());
    Ok(SupercellOut {
        per_cell: grid.per_cell(),
        count,
        record: EigenRecord::new(h, "full", op.dim(), &eig),
        warnings,
        op: keep_op.then_some(op),
    })
}

/// Well operator, its spectrum through the counting window plus one, and
/// the decay of its ground state measured from the well minima.
fn wells_job(ctx: &Context, h: f64, keep_distance: bool) -> Result<WellsOut, PipelineError> {
    let grid = ctx.loaded.grid(h);
    let mask = ctx.wells_mask(&grid);
    let op = assemble(&ctx.gauge(), &grid, &mask, h)?;
    let count = eigen_count_below(&op, ctx.window_top(h))?;
    let eig = lowest_eigenpairs_with(&op, (count + 1).min(op.dim()), &ctx.solver())?;
    let set = detect_wells(ctx.model(), ctx.loaded.config.thresholds.eps1, &grid)?;
    let sources: Vec<usize> = set.wells.iter().map(|w| w.minimum).collect();
    let dist = agmon_distance(ctx.model(), &mask, &sources, ctx.b0, ctx.stencil())?;
    let decay = decay_profile(&eig, &op, &dist, h, ctx.loaded.config.agmon.eps)?;
    info!("h = {h}: wells n = {}, {count} eigenvalues below h(b0+eps0)", op.dim());
    Ok(WellsOut {
        count,
        record: EigenRecord::new(h, "wells", op.dim(), &eig),
        decay,
        mask,
        distance: keep_distance.then_some(dist.distance),
    })
}

fn away_job(ctx: &Context, h: f64) -> Result<AwayRecord, PipelineError> {
    let t = &ctx.loaded.config.thresholds;
    let grid = ctx.loaded.grid(h);
    let r = spectra::away_region_check(&ctx.gauge(), &grid, h, ctx.b0, t.eps1, t.eta, &ctx.solver())?;
    Ok(AwayRecord::from(&r))
}

fn quasimode_job(ctx: &Context, y: Point, h: f64) -> Result<QuasimodeRecord, PipelineError> {
    let grid = ctx.loaded.cell_grid(h);
    let mask = DomainMask::full(&grid);
    let gauge = ctx.gauge();
    let op = assemble(&gauge, &grid, &mask, h)?;
    let q = build_quasimode(&gauge, &grid, &mask, y, h, ctx.loaded.config.quasimode.r0)?;
    let eig = nearest_eigenpairs(&op, q.target(), 1, &ctx.solver())?;
    let hit = spectral_hit_check(&q, &op, &eig)?;
    Ok(QuasimodeRecord {
        y,
        h,
        mu: q.mu,
        r: q.radius,
        residual_ratio: hit.residual_ratio,
        spectral_distance: hit.distance,
        pass: hit.pass,
    })
}

fn require_in_well(ctx: &Context, y: Point) -> Result<(), PipelineError> {
    let b = ctx.model().intensity(y);
    let top = ctx.b0 + ctx.loaded.config.thresholds.eps1;
    if b < top {
        Ok(())
    } else {
        Err(PipelineError::Usage(format!(
            "quasimode center ({}, {}) has Tr+B = {b} >= b0 + eps1 = {top}",
            y[0], y[1]
        )))
    }
}

fn fmt_h(h: f64) -> String {
    format!("{h}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WellRecord {
    pub minimum_point: Point,
    pub cell: (usize, usize),
    pub nodes: usize,
    pub touches_cell_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionRecord {
    pub provenance: Provenance,
    pub field: String,
    pub b0: f64,
    pub argmin: Point,
    pub eps0: f64,
    pub eps1: f64,
    pub boundary_min: f64,
    pub boundary_argmin: Point,
    pub sublevel_range: (f64, f64),
    pub eps0_margin: f64,
    pub wells: Vec<WellRecord>,
    pub wells_per_cell: Vec<usize>,
    pub violations: Vec<String>,
    pub pass: bool,
}

fn assumptions(ctx: &Context) -> Result<AssumptionRecord, PipelineError> {
    let t = &ctx.loaded.config.thresholds;
    let rep = check_assumptions(ctx.model(), t.eps0, t.eps1, B0_RESOLUTION)?;
    let grid = Grid::new(ctx.loaded.config.grid.cells, WELL_GRID, BoundaryCondition::Dirichlet)?;
    let set = detect_wells(ctx.model(), t.eps1, &grid)?;
    Ok(AssumptionRecord {
        provenance: ctx.provenance(),
        field: ctx.model().kind().into(),
        b0: rep.b0,
        argmin: rep.argmin,
        eps0: rep.eps0,
        eps1: rep.eps1,
        boundary_min: rep.boundary_min,
        boundary_argmin: rep.boundary_argmin,
        sublevel_range: rep.sublevel_range,
        eps0_margin: set.eps0_margin,
        wells: set
            .wells
            .iter()
            .map(|w| WellRecord {
                minimum_point: w.minimum_point,
                cell: w.cell,
                nodes: w.nodes.len(),
                touches_cell_boundary: w.touches_cell_boundary,
            })
            .collect(),
        wells_per_cell: set.per_cell.clone(),
        violations: rep.violations.iter().map(|v| v.to_string()).collect(),
        pass: rep.passed(),
    })
}

pub fn cmd_check_field(ctx: &Context) -> Result<Outcome, PipelineError> {
    let rec = assumptions(ctx)?;
    io::write_json(&ctx.path("assumptions.json"), &rec)?;
    let mut lines = vec![format!(
        "b0 = {} at ({}, {}), boundary min {} (need >= {})",
        rec.b0,
        rec.argmin[0],
        rec.argmin[1],
        rec.boundary_min,
        rec.b0 + rec.eps0
    )];
    lines.push(format!("{} wells, per cell {:?}", rec.wells.len(), rec.wells_per_cell));
    lines.extend(rec.violations.iter().map(|v| format!("FAIL {v}")));
    Ok(Outcome {
        pass: rec.pass,
        out: ctx.out.clone(),
        lines,
    })
}

#[derive(Clone, Copy, Debug)]
enum Job {
    Supercell(f64),
    Wells(f64),
    Away(f64),
    Quasimode(f64),
}

enum JobOut {
    Supercell(SupercellOut),
    Wells(WellsOut),
    Away(AwayRecord),
    Quasimode(QuasimodeRecord),
}

fn run_job(ctx: &Context, job: Job, y: Point) -> Result<JobOut, PipelineError> {
    Ok(match job {
        Job::Supercell(h) => JobOut::Supercell(supercell_job(ctx, h, false)?),
        Job::Wells(h) => JobOut::Wells(wells_job(ctx, h, ctx.plot_data)?),
        Job::Away(h) => JobOut::Away(away_job(ctx, h)?),
        Job::Quasimode(h) => JobOut::Quasimode(quasimode_job(ctx, y, h)?),
    })
}

/// Whatever finished, written when some job failed.
#[derive(Serialize)]
struct Partial<'a> {
    provenance: Provenance,
    rows: Vec<HRecord>,
    quasimode: Vec<QuasimodeRecord>,
    errors: &'a [String],
}

/// Options of `sweep` beyond the context.
#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    pub h: Option<Vec<f64>>,
    pub golden_update: bool,
}

pub fn cmd_sweep(ctx: &Context, opts: &SweepOptions) -> Result<Outcome, PipelineError> {
    let assumed = assumptions(ctx)?;
    io::write_json(&ctx.path("assumptions.json"), &assumed)?;
    if !assumed.pass {
        let mut lines = vec!["FAIL standing assumptions; no spectra computed".to_string()];
        lines.extend(assumed.violations.iter().map(|v| format!("FAIL {v}")));
        return Ok(Outcome {
            pass: false,
            out: ctx.out.clone(),
            lines,
        });
    }
    let golden = golden_target(ctx, opts.golden_update)?;

    let hs = opts.h.clone().unwrap_or_else(|| ctx.loaded.config.sweep.h.clone());
    let qhs = &ctx.loaded.config.quasimode.h;
    let y = ctx.loaded.config.quasimode.center;
    require_in_well(ctx, y)?;

    // Finest (slowest) jobs first for load balance; results are keyed by job.
    let mut jobs = Vec::new();
    for &h in hs.iter().rev() {
        jobs.extend([Job::Supercell(h), Job::Wells(h), Job::Away(h)]);
    }
    jobs.extend(qhs.iter().rev().map(|&h| Job::Quasimode(h)));
    let results = run_indexed(&jobs, ctx.jobs, |&j| run_job(ctx, j, y));

    let mut errors = Vec::new();
    let mut first_err = None;
    let mut sc = Vec::new();
    let mut wl = Vec::new();
    let mut aw = Vec::new();
    let mut qm = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(JobOut::Supercell(o)) => sc.push((job_h(*job), o)),
            Ok(JobOut::Wells(o)) => wl.push((job_h(*job), o)),
            Ok(JobOut::Away(o)) => aw.push((job_h(*job), o)),
            Ok(JobOut::Quasimode(o)) => qm.push(o),
            Err(e) => {
                errors.push(format!("{job:?}: {e}"));
                first_err.get_or_insert(e);
            }
        }
    }
    fn find<T>(v: &mut Vec<(f64, T)>, h: f64) -> Option<T> {
        v.iter().position(|(x, _)| *x == h).map(|i| v.swap_remove(i).1)
    }
    let mut rows = Vec::new();
    let mut wells_out = Vec::new();
    for &h in &hs {
        let (Some(s), Some(w), Some(a)) = (find(&mut sc, h), find(&mut wl, h), find(&mut aw, h)) else {
            continue;
        };
        rows.push(HRecord {
            h,
            per_cell: s.per_cell,
            supercell_count: s.count,
            supercell: s.record,
            wells_count: w.count,
            wells: w.record.clone(),
            away: a,
            decay: w.decay,
            warnings: s.warnings,
        });
        wells_out.push((h, w));
    }
    qm.sort_by(|a, b| b.h.total_cmp(&a.h));

    if let Some(e) = first_err {
        io::write_json(
            &ctx.path("sweep.partial.json"),
            &Partial {
                provenance: ctx.provenance(),
                rows,
                quasimode: qm,
                errors: &errors,
            },
        )?;
        return Err(e);
    }

    let params = ctx.parameters();
    let vs = verdicts(&params, &rows, &qm);
    let report = SweepReport {
        provenance: ctx.provenance(),
        parameters: params,
        rows,
        quasimode: qm,
        verdicts: vs,
    };
    write_sweep_bundle(ctx, &report)?;
    if ctx.plot_data {
        write_sweep_plots(ctx, &report, &wells_out)?;
    }

    let mut lines = verdict_lines(&report.verdicts);
    let mut pass = report.verdicts.iter().all(|v| v.pass);
    if let Some((path, update)) = golden {
        let current = Golden::of(&report);
        if update {
            io::write_json(&path, &current)?;
            lines.push(format!("golden file updated: {}", path.display()));
        } else {
            let stored: Golden = io::read_json(&path)?;
            let diffs = current.diff(&stored);
            if diffs.is_empty() {
                lines.push(format!("PASS golden {}", path.display()));
            } else {
                pass = false;
                lines.push(format!("FAIL golden {}", path.display()));
                lines.extend(diffs.into_iter().map(|d| format!("  {d}")));
            }
        }
    }
    Ok(Outcome {
        pass,
        out: ctx.out.clone(),
        lines,
    })
}

fn job_h(job: Job) -> f64 {
    match job {
        Job::Supercell(h) | Job::Wells(h) | Job::Away(h) | Job::Quasimode(h) => h,
    }
}

/// Environment variable that must be `1` for `--golden-update`.
pub const GOLDEN_UPDATE_ENV: &str = "MAGWELL_GOLDEN_UPDATE";

fn golden_target(ctx: &Context, update: bool) -> Result<Option<(PathBuf, bool)>, PipelineError> {
    let path = ctx.loaded.golden_path();
    if update {
        if std::env::var(GOLDEN_UPDATE_ENV).as_deref() != Ok("1") {
            return Err(PipelineError::Usage(format!("--golden-update needs {GOLDEN_UPDATE_ENV}=1")));
        }
        let path = path.ok_or_else(|| PipelineError::Usage("--golden-update needs output.golden in the config".into()))?;
        return Ok(Some((path, true)));
    }
    Ok(path.map(|p| (p, false)))
}

pub fn verdict_lines(vs: &[Verdict]) -> Vec<String> {
    vs.iter()
        .map(|v| format!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail))
        .collect()
}

fn write_sweep_bundle(ctx: &Context, report: &SweepReport) -> Result<(), PipelineError> {
    io::write_json(&ctx.path("sweep.json"), report)?;
    let rows: Vec<Vec<String>> = report
        .verdicts
        .iter()
        .map(|v| vec![v.name.clone(), if v.pass { "PASS" } else { "FAIL" }.into(), v.detail.clone()])
        .collect();
    io::write_table(&ctx.path("verdicts.csv"), &["criterion", "verdict", "detail"], &rows)?;
    let p = &report.parameters;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let d = r.derive(p);
            vec![
                fmt_h(r.h),
                r.per_cell.to_string(),
                r.supercell.dim.to_string(),
                r.supercell_count.to_string(),
                r.supercell.eigenvalues.first().map_or(String::new(), |l| (l / r.h).to_string()),
                d.ground_ratio.to_string(),
                d.cluster.as_ref().map_or(String::new(), |c| c.delta.to_string()),
                d.census.as_ref().map_or(String::new(), |c| c.count.to_string()),
                d.spacing.as_ref().map_or(String::new(), |s| s.max_spacing.to_string()),
                r.away.normalized_deficit.to_string(),
                r.decay.to_string(),
            ]
        })
        .collect();
    io::write_table(
        &ctx.path("summary.csv"),
        &[
            "h",
            "per_cell",
            "nodes",
            "count_below",
            "supercell_lowest_over_h",
            "wells_lowest_over_hb0",
            "delta",
            "gaps",
            "max_spacing",
            "away_deficit",
            "sup_log_excess",
        ],
        &rows,
    )?;
    Ok(())
}

fn write_sweep_plots(ctx: &Context, report: &SweepReport, wells: &[(f64, WellsOut)]) -> Result<(), PipelineError> {
    let p = &report.parameters;
    let dir = ctx.path("plot");
    let mut ground = Vec::new();
    let mut delta = Vec::new();
    let mut spacing = Vec::new();
    let mut weyl = Vec::new();
    let mut decay = Vec::new();
    for r in &report.rows {
        let d = r.derive(p);
        ground.push((r.h, d.ground_ratio));
        if let Ok(c) = &d.cluster {
            delta.push((1.0 / r.h.sqrt(), c.delta.ln()));
        }
        if let Ok(s) = &d.spacing {
            spacing.push((r.h.ln(), s.max_spacing.ln()));
        }
        if let Ok(c) = &d.census {
            let pts = c.gaps.to_vec();
            io::write_series(&dir.join(format!("gaps_h{}.dat", fmt_h(r.h))), "gap_lo gap_hi", &pts)?;
            let ev: Vec<(f64, f64)> = c.eigenvalues.iter().map(|&l| (l / r.h, 0.0)).collect();
            io::write_series(&dir.join(format!("spectrum_h{}.dat", fmt_h(r.h))), "lambda/h 0", &ev)?;
        }
        weyl.push((r.h, r.supercell_count as f64 * r.h * r.h));
        decay.push((1.0 / r.h.sqrt(), r.decay));
    }
    io::write_series(&dir.join("ground_state.dat"), "h lambda1/(h b0)", &ground)?;
    io::write_series(&dir.join("delta.dat"), "1/sqrt(h) log(delta)", &delta)?;
    io::write_series(&dir.join("spacing.dat"), "log(h) log(max_spacing)", &spacing)?;
    io::write_series(&dir.join("weyl.dat"), "h N h^2", &weyl)?;
    io::write_series(&dir.join("decay.dat"), "1/sqrt(h) sup_log_excess", &decay)?;
    let qm: Vec<(f64, f64)> = report.quasimode.iter().map(|q| (q.h.ln(), q.residual_ratio.ln())).collect();
    io::write_series(&dir.join("quasimode_residual.dat"), "log(h) log(residual/h)", &qm)?;
    for (h, w) in wells {
        io::write_mask_pgm(&dir.join(format!("wells_mask_h{}.pgm", fmt_h(*h))), &w.mask)?;
        if let Some(d) = &w.distance {
            io::write_heatmap_pgm(&dir.join(format!("agmon_h{}.pgm", fmt_h(*h))), w.mask.grid(), d)?;
        }
    }
    Ok(())
}

/// Recomputes verdicts of a stored sweep.
pub fn cmd_report(out: &Path) -> Result<Outcome, PipelineError> {
    let report: SweepReport = io::read_json(&out.join("sweep.json"))?;
    let vs = verdicts(&report.parameters, &report.rows, &report.quasimode);
    if vs != report.verdicts {
        return Err(PipelineError::Numerical(
            "stored verdicts differ from the ones recomputed from the raw data".into(),
        ));
    }
    Ok(Outcome {
        pass: vs.iter().all(|v| v.pass),
        out: out.to_path_buf(),
        lines: verdict_lines(&vs),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub provenance: Provenance,
    pub h: f64,
    pub per_cell: usize,
    pub supercell_count: usize,
    pub supercell: EigenRecord,
    pub wells_count: usize,
    pub wells: EigenRecord,
    pub warnings: Vec<String>,
}

pub fn cmd_spectrum(ctx: &Context, hs: Option<Vec<f64>>, export_matrix: bool) -> Result<Outcome, PipelineError> {
    let hs = hs.unwrap_or_else(|| ctx.loaded.config.sweep.h.clone());
    let jobs: Vec<(f64, bool)> = hs.iter().flat_map(|&h| [(h, true), (h, false)]).collect();
    enum Out {
        S(SupercellOut),
        W(WellsOut),
    }
    let results = run_indexed(&jobs, ctx.jobs, |&(h, full)| -> Result<Out, PipelineError> {
        Ok(if full {
            Out::S(supercell_job(ctx, h, export_matrix)?)
        } else {
            Out::W(wells_job(ctx, h, false)?)
        })
    });
    let mut lines = Vec::new();
    let mut it = results.into_iter();
    for &h in &hs {
        let (s, w) = match (it.next().expect("one result per job")?, it.next().expect("one result per job")?) {
            (Out::S(s), Out::W(w)) => (s, w),
            _ => unreachable!("jobs alternate supercell and wells"),
        };
        if let Some(op) = &s.op {
            io::write_coo(&ctx.path(&format!("spectrum/operator_h{}.coo", fmt_h(h))), op.matrix())?;
            io::write_mask_pgm(&ctx.path(&format!("spectrum/wells_mask_h{}.pgm", fmt_h(h))), &w.mask)?;
        }
        lines.push(format!(
            "h = {h}: lambda1/h = {:.6}, {} supercell and {} well eigenvalues below h(b0+eps0)",
            s.record.eigenvalues[0] / h,
            s.count,
            w.count
        ));
        let rec = SpectrumRecord {
            provenance: ctx.provenance(),
            h,
            per_cell: s.per_cell,
            supercell_count: s.count,
            supercell: s.record,
            wells_count: w.count,
            wells: w.record,
            warnings: s.warnings,
        };
        io::write_json(&ctx.path(&format!("spectrum/h{}.json", fmt_h(h))), &rec)?;
    }
    Ok(Outcome {
        pass: true,
        out: ctx.out.clone(),
        lines,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeReport {
    pub provenance: Provenance,
    pub y: Point,
    pub records: Vec<QuasimodeRecord>,
    pub slope: Option<f64>,
}

pub fn cmd_quasimode(ctx: &Context, y: Option<Point>, hs: Option<Vec<f64>>) -> Result<Outcome, PipelineError> {
    let y = y.unwrap_or(ctx.loaded.config.quasimode.center);
    require_in_well(ctx, y)?;
    let hs = hs.unwrap_or_else(|| ctx.loaded.config.quasimode.h.clone());
    let records: Result<Vec<_>, _> = run_indexed(&hs, ctx.jobs, |&h| quasimode_job(ctx, y, h)).into_iter().collect();
    let records = records?;
    let slope = if records.len() >= 2 {
        spectra::loglog_slope(
            &records.iter().map(|r| r.h).collect::<Vec<_>>(),
            &records.iter().map(|r| r.residual_ratio).collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let mut lines: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "{} h = {}: residual/h = {:.4}, distance/h = {:.4e}",
                if r.pass { "PASS" } else { "FAIL" },
                r.h,
                r.residual_ratio / r.h,
                r.spectral_distance / r.h
            )
        })
        .collect();
    if let Some(s) = slope {
        lines.push(format!("log-log slope of the residual: {s:.4}"));
    }
    if ctx.plot_data {
        let pts: Vec<(f64, f64)> = records.iter().map(|q| (q.h.ln(), q.residual_ratio.ln())).collect();
        io::write_series(&ctx.path("plot/quasimode_residual.dat"), "log(h) log(residual)", &pts)?;
    }
    let pass = records.iter().all(|r| r.pass);
    io::write_json(
        &ctx.path("quasimode.json"),
        &QuasimodeReport {
            provenance: ctx.provenance(),
            y,
            records,
            slope,
        },
    )?;
    Ok(Outcome {
        pass,
        out: ctx.out.clone(),
        lines,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightRecord {
    pub eps: f64,
    pub source: Point,
    pub max_distance: f64,
    pub admissible: bool,
    /// Smallest `Tr⁺B − b₀ − |∇Φ|²` and where it occurs.
    pub inf_margin: Option<f64>,
    pub inf_margin_point: Option<Point>,
    pub max_weight: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityRecord {
    pub z: [f64; 2],
    pub unweighted: f64,
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolventRecord {
    pub z: [f64; 2],
    pub norm: f64,
    pub h_times_norm: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgmonReport {
    pub provenance: Provenance,
    pub h: f64,
    pub b0w: f64,
    pub stencil: usize,
    /// `sup_log_excess` of the well ground state.
    pub well_decay: f64,
    pub away: WeightRecord,
    pub identity: Option<IdentityRecord>,
    pub resolvent: Option<ResolventRecord>,
}

/// Offset below `h b₀` of the spectral parameter used on the away region.
const AWAY_Z_OFFSET: f64 = 0.2;

pub fn cmd_agmon(ctx: &Context, h: f64, eps: Option<f64>) -> Result<Outcome, PipelineError> {
    let eps = eps.unwrap_or(ctx.loaded.config.agmon.eps);
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(PipelineError::Usage(format!("eps must lie in (0, 1] (got {eps})")));
    }
    let wells = wells_job(ctx, h, ctx.plot_data)?;
    let grid = ctx.loaded.grid(h);
    let away = ctx.away_mask(&grid);
    let src = away
        .active_nodes()
        .into_iter()
        .min_by(|&p, &q| {
            let m = ctx.model();
            m.intensity(grid.point(p)).total_cmp(&m.intensity(grid.point(q))).then(p.cmp(&q))
        })
        .ok_or_else(|| PipelineError::Numerical("away region is empty".into()))?;
    let dist = agmon_distance(ctx.model(), &away, &[src], ctx.b0, ctx.stencil())?;
    let mut rec = WeightRecord {
        eps,
        source: grid.point(src),
        max_distance: dist.max_distance(),
        admissible: false,
        inf_margin: None,
        inf_margin_point: None,
        max_weight: None,
        failure: None,
    };
    let mut identity = None;
    let mut resolvent = None;
    let mut weight_values = None;
    match make_weight(&dist, eps) {
        Err(e @ agmon::AgmonError::NotAdmissible { .. }) => rec.failure = Some(e.to_string()),
        Err(e) => return Err(e.into()),
        Ok(w) => {
            rec.admissible = true;
            if let Some((m, node)) = w.inf_margin() {
                rec.inf_margin = Some(m);
                rec.inf_margin_point = Some(grid.point(node));
            }
            rec.max_weight = Some(w.max_value());
            let op = assemble(&ctx.gauge(), &grid, &away, h)?;
            let eig = lowest_eigenpairs_with(&op, 1, &ctx.solver())?;
            let u = op.scatter(&eig.eigenvectors[0]);
            let z = C64::new(h * (ctx.b0 - AWAY_Z_OFFSET), 0.0);
            identity = Some(IdentityRecord {
                z: [z.re, z.im],
                unweighted: energy_identity_residual(&op, &WeightFunction::zero(&away), z, &u)?,
                weighted: energy_identity_residual(&op, &w, z, &u)?,
            });
            let ropts = ResolventOptions {
                seed: ctx.loaded.config.solver.seed,
                ..ResolventOptions::default()
            };
            let r = conjugated_resolvent_norm(&op, &w, z, &ropts)?;
            resolvent = Some(ResolventRecord {
                z: [z.re, z.im],
                norm: r.norm,
                h_times_norm: r.h_times_norm,
                alpha: r.alpha,
                iterations: r.iterations,
                converged: r.converged,
            });
            weight_values = Some(w.values);
        }
    }
    let mut lines = vec![format!("well ground state sup_log_excess = {:.6}", wells.decay)];
    match (&rec.failure, &resolvent) {
        (Some(f), _) => lines.push(format!("FAIL weight: {f}")),
        (None, Some(r)) => lines.push(format!(
            "PASS weight: eps = {eps}, inf margin {:.4}, h * resolvent norm {:.4}",
            rec.inf_margin.unwrap_or(f64::INFINITY),
            r.h_times_norm
        )),
        (None, None) => {}
    }
    if ctx.plot_data {
        io::write_grid_csv(&ctx.path("agmon/away_distance.csv"), &grid, &dist.distance)?;
        io::write_heatmap_pgm(&ctx.path("agmon/away_distance.pgm"), &grid, &dist.distance)?;
        if let Some(v) = &weight_values {
            io::write_grid_csv(&ctx.path("agmon/weight.csv"), &grid, v)?;
        }
        if let Some(d) = &wells.distance {
            io::write_grid_csv(&ctx.path("agmon/wells_distance.csv"), &grid, d)?;
        }
    }
    let pass = rec.admissible;
    io::write_json(
        &ctx.path("agmon.json"),
        &AgmonReport {
            provenance: ctx.provenance(),
            h,
            b0w: ctx.b0,
            stencil: ctx.loaded.config.agmon.stencil,
            well_decay: wells.decay,
            away: rec,
            identity,
            resolvent,
        },
    )?;
    Ok(Outcome {
        pass,
        out: ctx.out.clone(),
        lines,
    })
}
