//! Serialized reports. Reports hold raw eigenvalue lists and scalar
//! measurements only; every verdict is recomputed from them by [`verdicts`].

use magwell_core::eigensolve::EigenResult;
use magwell_core::spectra::{self, GapCensus, SpacingReport};
use serde::{Deserialize, Serialize};

pub const TOOL: &str = "magwell";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(config_hash: String) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            config_hash,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub iterations: usize,
    pub runs: usize,
    pub factorizations: usize,
    pub shift: f64,
    pub tol: f64,
    pub norm_one: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenRecord {
    pub h: f64,
    pub mask: String,
    pub dim: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub meta: SolverRecord,
}

impl EigenRecord {
    pub fn new(h: f64, mask: &str, dim: usize, e: &EigenResult) -> Self {
        let m = &e.meta;
        Self {
            h,
            mask: mask.into(),
            dim,
            eigenvalues: e.eigenvalues.clone(),
            residuals: e.residuals.clone(),
            meta: SolverRecord {
                iterations: m.iterations,
                runs: m.runs,
                factorizations: m.factorizations,
                shift: m.shift,
                tol: m.tol,
                norm_one: m.norm_one,
                seed: m.seed,
            },
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AwayRecord {
    pub h: f64,
    pub nodes: usize,
    pub lambda_min: f64,
    pub residual: f64,
    pub b0_m0: f64,
    pub normalized_deficit: f64,
    pub window_top: f64,
    pub pollutes: bool,
}

impl From<&spectra::AwayReport> for AwayRecord {
    fn from(r: &spectra::AwayReport) -> Self {
        Self {
            h: r.h,
            nodes: r.nodes,
            lambda_min: r.lambda_min,
            residual: r.residual,
            b0_m0: r.b0_m0,
            normalized_deficit: r.normalized_deficit,
            window_top: r.window_top,
            pollutes: r.pollutes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeRecord {
    pub y: [f64; 2],
    pub h: f64,
    pub mu: f64,
    pub r: f64,
    pub residual_ratio: f64,
    pub spectral_distance: f64,
    pub pass: bool,
}

/// Everything computed at one `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HRecord {
    pub h: f64,
    pub per_cell: usize,
    /// Inertia count of supercell eigenvalues below `h(b₀+ε₀)`.
    pub supercell_count: usize,
    pub supercell: EigenRecord,
    /// Inertia count of well eigenvalues below `h(b₀+ε₀)`.
    pub wells_count: usize,
    pub wells: EigenRecord,
    pub away: AwayRecord,
    /// `sup_log_excess` of the lowest well eigenvector.
    pub decay: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub b0: f64,
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub m_exponent: f64,
    pub agmon_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub parameters: Parameters,
    pub rows: Vec<HRecord>,
    pub quasimode: Vec<QuasimodeRecord>,
    pub verdicts: Vec<Verdict>,
}

/// Derived per-`h` quantities, recomputed from raw lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Derived {
    pub h: f64,
    pub cluster: Result<spectra::ClusterReport, String>,
    pub census: Result<GapCensus, String>,
    pub spacing: Result<SpacingReport, String>,
    pub ground_ratio: f64,
}

impl HRecord {
    pub fn derive(&self, p: &Parameters) -> Derived {
        let h = self.h;
        let resolution = self.supercell.max_residual().max(self.wells.max_residual());
        let cluster = spectra::ClusterReport::from_values(
            h,
            p.b0,
            p.eps1,
            &self.supercell.eigenvalues,
            &self.wells.eigenvalues,
            resolution,
        )
        .map_err(|e| e.to_string());
        let census = GapCensus::from_values(
            &self.supercell.eigenvalues,
            self.supercell.max_residual(),
            h,
            (0.0, h * (p.b0 + p.eps0)),
            p.m_exponent,
        )
        .map_err(|e| e.to_string())
        .and_then(|c| {
            if c.eigenvalues.len() == self.supercell_count {
                Ok(c)
            } else {
                Err(format!(
                    "inertia certifies {} eigenvalues in the window but {} were computed",
                    self.supercell_count,
                    c.eigenvalues.len()
                ))
            }
        });
        let spacing = SpacingReport::from_values(&self.wells.eigenvalues, h, p.alpha, p.beta).map_err(|e| e.to_string());
        let ground_ratio = self.wells.eigenvalues.first().map_or(f64::NAN, |l| l / (h * p.b0));
        Derived {
            h,
            cluster,
            census,
            spacing,
            ground_ratio,
        }
    }
}

/// Rows used for the clustering verdict.
pub const CLUSTER_MAX_H: f64 = 0.2;
/// `δ` at the finest `h` must be below this multiple of `h`.
pub const CLUSTER_FINAL_RATIO: f64 = 1e-6;
/// Reference `h` and tolerance for the ground state.
pub const GROUND_H: f64 = 0.1;
pub const GROUND_TOL: f64 = 0.15;
pub const QUASIMODE_SLOPE: (f64, f64) = (1.15, 1.55);
pub const MIN_FINAL_GAPS: usize = 5;
pub const SPACING_MIN_SLOPE: f64 = 1.1;
pub const WEYL_MAX_RATIO: f64 = 2.0;
/// Upper bound imposed on `(h b₀(M₀) − λ_min)/h^{5/4}`.
pub const DEFICIT_BOUND: f64 = 1.0;
pub const DECAY_MAX_SLOPE: f64 = 0.05;

fn verdict(name: &str, pass: bool, detail: String) -> Verdict {
    Verdict {
        name: name.into(),
        pass,
        detail,
    }
}

/// Verdicts of a sweep, recomputed from raw data. Rows are in sweep order,
/// i.e. decreasing `h`.
pub fn verdicts(p: &Parameters, rows: &[HRecord], quasimode: &[QuasimodeRecord]) -> Vec<Verdict> {
    let derived: Vec<Derived> = rows.iter().map(|r| r.derive(p)).collect();
    let mut out = Vec::new();

    if !quasimode.is_empty() {
        let hs: Vec<f64> = quasimode.iter().map(|q| q.h).collect();
        let rs: Vec<f64> = quasimode.iter().map(|q| q.residual_ratio).collect();
        let slope = spectra::loglog_slope(&hs, &rs);
        let hits = quasimode.iter().all(|q| q.pass);
        let ok = slope.is_some_and(|s| s >= QUASIMODE_SLOPE.0 && s <= QUASIMODE_SLOPE.1) && hits;
        out.push(verdict(
            "quasimode-scaling",
            ok,
            format!("slope {} (want [{}, {}]), spectral hits {}", fmt_opt(slope), QUASIMODE_SLOPE.0, QUASIMODE_SLOPE.1, hits),
        ));
    }

    if !derived.is_empty() {
        let ratios: Vec<f64> = derived.iter().map(|d| d.ground_ratio).collect();
        let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
        let at = derived
            .iter()
            .find(|d| (d.h - GROUND_H).abs() < 1e-12)
            .or(derived.last())
            .expect("nonempty");
        let ok = decreasing && (at.ground_ratio - 1.0).abs() <= GROUND_TOL;
        out.push(verdict(
            "ground-state",
            ok,
            format!(
                "lambda1/(h b0) = {:.6} at h = {} (want within {GROUND_TOL} of 1), decreasing {decreasing}",
                at.ground_ratio, at.h
            ),
        ));

        let rows_c: Vec<&Derived> = derived.iter().filter(|d| d.h <= CLUSTER_MAX_H + 1e-12).collect();
        let deltas: Result<Vec<(f64, f64)>, String> = rows_c
            .iter()
            .map(|d| d.cluster.as_ref().map(|c| (d.h, c.delta)).map_err(|e| format!("h = {}: {e}", d.h)))
            .collect();
        let (ok, detail) = match deltas {
            Err(e) => (false, e),
            Ok(ds) if ds.is_empty() => (false, format!("no row with h <= {CLUSTER_MAX_H}")),
            Ok(ds) => {
                let hs: Vec<f64> = ds.iter().map(|d| d.0).collect();
                let dv: Vec<f64> = ds.iter().map(|d| d.1).collect();
                let fit = spectra::exponential_fit(&hs, &dv);
                let (hf, df) = *ds.last().expect("nonempty");
                let monotone = fit.as_ref().is_some_and(|f| f.monotone);
                let c = fit.as_ref().map(|f| f.c);
                let ok = monotone && c.is_some_and(|c| c > 0.0) && df <= CLUSTER_FINAL_RATIO * hf;
                (
                    ok,
                    format!(
                        "delta/h at h = {hf}: {:.3e} (want <= {CLUSTER_FINAL_RATIO:e}), strictly decreasing {monotone}, fitted c {}",
                        df / hf,
                        fmt_opt(c)
                    ),
                )
            }
        };
        out.push(verdict("clustering", ok, detail));

        let counts: Result<Vec<usize>, String> = derived
            .iter()
            .map(|d| d.census.as_ref().map(|c| c.count).map_err(|e| format!("h = {}: {e}", d.h)))
            .collect();
        let (ok, detail) = match counts {
            Err(e) => (false, e),
            Ok(cs) => {
                let nondecreasing = cs.windows(2).all(|w| w[1] >= w[0]);
                let guarded = derived
                    .iter()
                    .filter_map(|d| d.census.as_ref().ok())
                    .all(|c| c.gaps.iter().all(|(a, b)| b - a > c.guard));
                let last = *cs.last().expect("nonempty");
                (
                    nondecreasing && guarded && last >= MIN_FINAL_GAPS,
                    format!("gap counts {cs:?} (want non-decreasing, final >= {MIN_FINAL_GAPS}), guarded {guarded}"),
                )
            }
        };
        out.push(verdict("gap-census", ok, detail));

        let sp: Vec<(f64, f64)> = derived
            .iter()
            .filter_map(|d| d.spacing.as_ref().ok().map(|s| (d.h, s.max_spacing)))
            .collect();
        let missing: Vec<String> = derived
            .iter()
            .filter_map(|d| d.spacing.as_ref().err().map(|e| format!("h = {}: {e}", d.h)))
            .collect();
        let slope = if sp.len() >= 2 {
            spectra::loglog_slope(&sp.iter().map(|s| s.0).collect::<Vec<_>>(), &sp.iter().map(|s| s.1).collect::<Vec<_>>())
        } else {
            None
        };
        out.push(verdict(
            "spacing",
            slope.is_some_and(|s| s >= SPACING_MIN_SLOPE),
            format!(
                "log-log slope {} over {} rows (want >= {SPACING_MIN_SLOPE}){}",
                fmt_opt(slope),
                sp.len(),
                if missing.is_empty() { String::new() } else { format!("; skipped {}", missing.join(", ")) }
            ),
        ));

        let counts: Vec<(f64, usize)> = rows.iter().map(|r| (r.h, r.supercell_count)).collect();
        let w = spectra::weyl_count_check(&counts, 2);
        out.push(verdict(
            "weyl",
            w.finest_ratio.is_some_and(|r| r <= WEYL_MAX_RATIO),
            format!(
                "sup N h^2 = {:.4}, ratio at the two finest h {} (want <= {WEYL_MAX_RATIO})",
                w.sup,
                fmt_opt(w.finest_ratio)
            ),
        ));

        let worst = rows.iter().map(|r| r.away.normalized_deficit).fold(f64::NEG_INFINITY, f64::max);
        let clean = rows.iter().all(|r| !r.away.pollutes);
        out.push(verdict(
            "away-region",
            worst <= DEFICIT_BOUND && clean,
            format!("max normalized deficit {worst:.4} (want <= {DEFICIT_BOUND}), window free {clean}"),
        ));

        let pts: Vec<(f64, f64)> = rows.iter().map(|r| (1.0 / r.h.sqrt(), r.decay)).collect();
        let slope = spectra::least_squares(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>())
            .map(|f| f.0);
        out.push(verdict(
            "agmon-decay",
            slope.is_some_and(|s| s <= DECAY_MAX_SLOPE),
            format!("slope of sup_log_excess vs 1/sqrt(h) {} (want <= {DECAY_MAX_SLOPE})", fmt_opt(slope)),
        ));
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

/// Key figures compared against a golden file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Golden {
    pub config_hash: String,
    pub rows: Vec<GoldenRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub h: f64,
    pub supercell_count: usize,
    pub wells_count: usize,
    pub supercell_lowest: f64,
    pub wells_lowest: f64,
    pub away_lowest: f64,
    pub delta: Option<f64>,
    pub gap_count: Option<usize>,
}

/// Relative tolerance of golden comparisons.
pub const GOLDEN_RTOL: f64 = 1e-8;

impl Golden {
    pub fn of(report: &SweepReport) -> Self {
        Self {
            config_hash: report.provenance.config_hash.clone(),
            rows: report
                .rows
                .iter()
                .map(|r| {
                    let d = r.derive(&report.parameters);
                    GoldenRow {
                        h: r.h,
                        supercell_count: r.supercell_count,
                        wells_count: r.wells_count,
                        supercell_lowest: r.supercell.eigenvalues.first().copied().unwrap_or(f64::NAN),
                        wells_lowest: r.wells.eigenvalues.first().copied().unwrap_or(f64::NAN),
                        away_lowest: r.away.lambda_min,
                        delta: d.cluster.ok().map(|c| c.delta),
                        gap_count: d.census.ok().map(|c| c.count),
                    }
                })
                .collect(),
        }
    }

    /// Differences from `other`, empty when they agree.
    pub fn diff(&self, other: &Golden) -> Vec<String> {
        let mut out = Vec::new();
        if self.rows.len() != other.rows.len() {
            out.push(format!("row count {} vs {}", self.rows.len(), other.rows.len()));
            return out;
        }
        let close = |a: f64, b: f64| (a - b).abs() <= GOLDEN_RTOL * a.abs().max(b.abs()) || (a.is_nan() && b.is_nan());
        for (a, b) in self.rows.iter().zip(&other.rows) {
            let tag = format!("h = {}", a.h);
            if !close(a.h, b.h) {
                out.push(format!("{tag}: h differs ({})", b.h));
            }
            if a.supercell_count != b.supercell_count || a.wells_count != b.wells_count || a.gap_count != b.gap_count {
                out.push(format!("{tag}: counts differ"));
            }
            for (name, x, y) in [
                ("supercell_lowest", a.supercell_lowest, b.supercell_lowest),
                ("wells_lowest", a.wells_lowest, b.wells_lowest),
                ("away_lowest", a.away_lowest, b.away_lowest),
            ] {
                if !close(x, y) {
                    out.push(format!("{tag}: {name} {x} vs {y}"));
                }
            }
            match (a.delta, b.delta) {
                (Some(x), Some(y)) if close(x, y) => {}
                (None, None) => {}
                (x, y) => out.push(format!("{tag}: delta {x:?} vs {y:?}")),
            }
        }
        out
    }
}
