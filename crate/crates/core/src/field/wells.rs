use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{FieldError, FieldModel};
use crate::lattice::{DomainMask, Grid};
use crate::Point;

/// Resolution used internally when a routine needs `b₀` itself.
const B0_RESOLUTION: usize = 512;

/// Minimum of `Tr⁺B` over the cell, refined by a local quadratic fit.
///
/// The scan visits `x_i = -1/2 + i/resolution`; ties keep the first node.
pub fn find_b0(model: &FieldModel, resolution: usize) -> Result<(f64, Point), FieldError> {
    if resolution < 64 {
        return Err(FieldError::ResolutionTooLow {
            got: resolution,
            min: 64,
        });
    }
    let step = 1.0 / resolution as f64;
    let at = |i: i64, j: i64| -> f64 { model.intensity([-0.5 + i as f64 * step, -0.5 + j as f64 * step]) };
    let mut best = (f64::INFINITY, 0i64, 0i64);
    for j in 0..resolution as i64 {
        for i in 0..resolution as i64 {
            let v = at(i, j);
            if v < best.0 {
                best = (v, i, j);
            }
        }
    }
    let (v0, i, j) = best;
    let grid_point = [-0.5 + i as f64 * step, -0.5 + j as f64 * step];
    // Separable parabola through the two neighbour pairs.
    let offset = |fm: f64, f0: f64, fp: f64| -> f64 {
        let curv = fm - 2.0 * f0 + fp;
        if curv > 0.0 {
            (0.5 * (fm - fp) / curv).clamp(-1.0, 1.0)
        } else {
            0.0
        }
    };
    let ox = offset(at(i - 1, j), v0, at(i + 1, j));
    let oy = offset(at(i, j - 1), v0, at(i, j + 1));
    let refined = [grid_point[0] + ox * step, grid_point[1] + oy * step];
    let vr = model.intensity(refined);
    if vr < v0 {
        Ok((vr, refined))
    } else {
        Ok((v0, grid_point))
    }
}

/// A violated standing assumption with its witness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    /// `Tr⁺B(witness) < b₀ + ε₀` on the cell boundary.
    BoundaryTooLow {
        witness: Point,
        value: f64,
        required: f64,
    },
    /// `Tr⁺B` takes a single value on `U_{ε₀}`.
    LocallyConstant { witness: Point, value: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BoundaryTooLow {
                witness,
                value,
                required,
            } => write!(
                f,
                "boundary condition fails at ({}, {}): Tr+B = {} < b0 + eps0 = {}",
                witness[0], witness[1], value, required
            ),
            Violation::LocallyConstant { witness, value } => write!(
                f,
                "Tr+B is constant (= {}) on U_eps0, witness ({}, {})",
                value, witness[0], witness[1]
            ),
        }
    }
}

/// Outcome of [`check_assumptions`].
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub b0: f64,
    pub argmin: Point,
    pub eps0: f64,
    pub eps1: f64,
    pub boundary_min: f64,
    pub boundary_argmin: Point,
    pub boundary_ok: bool,
    /// Smallest and largest `Tr⁺B` sampled on `U_{ε₀}`.
    pub sublevel_range: (f64, f64),
    pub non_constant_ok: bool,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts the first violation into an error.
    pub fn require(&self) -> Result<(), FieldError> {
        match self.violations.first() {
            Some(v) => Err(FieldError::Assumption(*v)),
            None => Ok(()),
        }
    }
}

/// Checks the boundary lower bound `Tr⁺B ≥ b₀ + ε₀` on `∂𝓕` and that `Tr⁺B`
/// is not constant on `U_{ε₀}` (for `b > 0` in two dimensions the rank of `B`
/// is constant, so this is the non-local-constancy condition).
pub fn check_assumptions(
    model: &FieldModel,
    eps0: f64,
    eps1: f64,
    resolution: usize,
) -> Result<AssumptionReport, FieldError> {
    if !(eps1 > 0.0 && eps1 < eps0) {
        return Err(FieldError::InvalidThresholds { eps0, eps1 });
    }
    let (b0, argmin) = find_b0(model, resolution)?;
    let n = resolution;
    let step = 1.0 / n as f64;

    let mut boundary_min = f64::INFINITY;
    let mut boundary_argmin = [0.0, 0.0];
    for k in 0..=n {
        let t = -0.5 + k as f64 * step;
        for p in [[t, -0.5], [t, 0.5], [-0.5, t], [0.5, t]] {
            let v = model.intensity(p);
            if v < boundary_min {
                boundary_min = v;
                boundary_argmin = p;
            }
        }
    }

    let level = b0 + eps0;
    let mut lo = (f64::INFINITY, [0.0, 0.0]);
    let mut hi = (f64::NEG_INFINITY, [0.0, 0.0]);
    for j in 1..n {
        for i in 1..n {
            let p = [-0.5 + i as f64 * step, -0.5 + j as f64 * step];
            let v = model.intensity(p);
            if v < level {
                if v < lo.0 {
                    lo = (v, p);
                }
                if v > hi.0 {
                    hi = (v, p);
                }
            }
        }
    }

    let mut violations = Vec::new();
    let boundary_ok = boundary_min >= level;
    if !boundary_ok {
        violations.push(Violation::BoundaryTooLow {
            witness: boundary_argmin,
            value: boundary_min,
            required: level,
        });
    }
    let non_constant_ok = lo.0.is_finite() && hi.0 - lo.0 > 1e-12;
    if !non_constant_ok {
        let (value, witness) = if lo.0.is_finite() { lo } else { (b0, argmin) };
        violations.push(Violation::LocallyConstant { witness, value });
    }
    Ok(AssumptionReport {
        b0,
        argmin,
        eps0,
        eps1,
        boundary_min,
        boundary_argmin,
        boundary_ok,
        sublevel_range: (lo.0, hi.0),
        non_constant_ok,
        violations,
    })
}

/// One connected component of `U_{ε₁}` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Well {
    /// Grid node indices, ascending.
    pub nodes: Vec<usize>,
    /// Node of smallest `Tr⁺B` (first index on ties).
    pub minimum: usize,
    pub minimum_point: Point,
    /// Cell `(cx, cy)` holding the minimum, counted from the lower-left cell.
    pub cell: (usize, usize),
    /// True when some node has a four-neighbour in another cell.
    pub touches_cell_boundary: bool,
}

/// Connected components of `U_{ε₁} = {Tr⁺B < b₀ + ε₁}` on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WellSet {
    pub eps1: f64,
    pub b0: f64,
    /// Largest `ε₀` for which the boundary bound holds: `min_{∂𝓕} Tr⁺B − b₀`.
    pub eps0_margin: f64,
    pub wells: Vec<Well>,
    /// Component count per cell, indexed `cy * cells + cx`.
    pub per_cell: Vec<usize>,
    grid: Grid,
}

impl WellSet {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// All well nodes as a custom mask.
    pub fn mask(&self) -> DomainMask {
        let mut bits = vec![false; self.grid.len()];
        for w in &self.wells {
            for &n in &w.nodes {
                bits[n] = true;
            }
        }
        DomainMask::custom(&self.grid, bits).expect("mask has grid length")
    }

    /// Component label of a node, if any.
    pub fn label_of(&self, node: usize) -> Option<usize> {
        self.wells
            .iter()
            .position(|w| w.nodes.binary_search(&node).is_ok())
    }
}

/// Flood fill (four-connectivity) of the sublevel set on the nodes of `grid`.
///
/// Components are labelled in order of their smallest node index.
pub fn detect_wells(model: &FieldModel, eps1: f64, grid: &Grid) -> Result<WellSet, FieldError> {
    let (b0, _) = find_b0(model, B0_RESOLUTION)?;
    let level = b0 + eps1;
    let n = grid.len();
    let inside: Vec<bool> = (0..n).map(|k| model.intensity(grid.point(k)) < level).collect();
    if !inside.iter().any(|&b| b) {
        return Err(FieldError::EmptyWellSet { eps1 });
    }

    let mut label = vec![usize::MAX; n];
    let mut wells = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !inside[start] || label[start] != usize::MAX {
            continue;
        }
        let id = wells.len();
        label[start] = id;
        queue.push_back(start);
        let mut nodes = Vec::new();
        let mut touches = false;
        while let Some(k) = queue.pop_front() {
            nodes.push(k);
            let cell_k = grid.cell_of(grid.point(k));
            for nb in grid.neighbors4(k).into_iter().flatten() {
                if inside[nb] {
                    if grid.cell_of(grid.point(nb)) != cell_k {
                        touches = true;
                    }
                    if label[nb] == usize::MAX {
                        label[nb] = id;
                        queue.push_back(nb);
                    }
                }
            }
        }
        nodes.sort_unstable();
        let mut minimum = nodes[0];
        let mut vmin = model.intensity(grid.point(minimum));
        for &k in &nodes[1..] {
            let v = model.intensity(grid.point(k));
            if v < vmin {
                vmin = v;
                minimum = k;
            }
        }
        let minimum_point = grid.point(minimum);
        wells.push(Well {
            nodes,
            minimum,
            minimum_point,
            cell: grid.cell_of(minimum_point),
            touches_cell_boundary: touches,
        });
    }

    let cells = grid.cells();
    let mut per_cell = vec![0; cells * cells];
    for w in &wells {
        per_cell[w.cell.1 * cells + w.cell.0] += 1;
    }

    let res = B0_RESOLUTION;
    let mut boundary_min = f64::INFINITY;
    for k in 0..=res {
        let t = -0.5 + k as f64 / res as f64;
        for p in [[t, -0.5], [-0.5, t]] {
            boundary_min = boundary_min.min(model.intensity(p));
        }
    }

    Ok(WellSet {
        eps1,
        b0,
        eps0_margin: boundary_min - b0,
        wells,
        per_cell,
        grid: *grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::BoundaryCondition;

    #[test]
    fn b0_of_default_and_anisotropic_models() {
        let (b0, at) = find_b0(&FieldModel::default(), 256).unwrap();
        assert!((b0 - 1.0).abs() < 1e-8);
        assert!(at[0].abs() < 1.0 / 256.0 && at[1].abs() < 1.0 / 256.0);
        let m = FieldModel::from_kind("trig-well", &[1.0, 1.0, 4.0]).unwrap();
        let (b0, at) = find_b0(&m, 64).unwrap();
        assert!((b0 - 1.0).abs() < 1e-12 && at == [0.0, 0.0]);
        let (b0, _) = find_b0(&FieldModel::Constant { b: 2.0 }, 64).unwrap();
        assert_eq!(b0, 2.0);
        assert!(find_b0(&m, 32).is_err());
    }

    #[test]
    fn b0_refinement_recovers_off_grid_minimum() {
        // b(x - 0.3, y) tabulated finely; 0.3 is not a node of the 96 scan
        let n = 400;
        let mut v = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let x = -0.5 + i as f64 / n as f64 - 0.3;
                let y = -0.5 + j as f64 / n as f64;
                v.push(FieldModel::default().b([x, y]));
            }
        }
        let m = FieldModel::Tabulated(crate::field::TabulatedField::new(-0.5, -0.5, n, n, v).unwrap());
        let (b0, at) = find_b0(&m, 96).unwrap();
        assert!((at[0] - 0.3).abs() < 0.5 / 96.0, "{at:?}");
        assert!(b0 >= 1.0 - 1e-12 && b0 - 1.0 < 1e-3);
    }

    #[test]
    fn default_model_assumptions() {
        let r = check_assumptions(&FieldModel::default(), 0.9, 0.5, 256).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert!((r.boundary_min - 2.0).abs() < 1e-12);
        let r = check_assumptions(&FieldModel::default(), 1.2, 0.5, 256).unwrap();
        assert!(!r.boundary_ok && r.non_constant_ok);
        assert!(matches!(r.require(), Err(FieldError::Assumption(Violation::BoundaryTooLow { .. }))));
    }

    #[test]
    fn constant_model_fails_both() {
        let r = check_assumptions(&FieldModel::Constant { b: 2.0 }, 0.9, 0.5, 128).unwrap();
        assert!(!r.boundary_ok && !r.non_constant_ok);
        assert_eq!(r.violations.len(), 2);
    }

    #[test]
    fn thresholds_must_be_ordered() {
        assert!(matches!(
            check_assumptions(&FieldModel::default(), 0.5, 0.5, 128),
            Err(FieldError::InvalidThresholds { .. })
        ));
    }

    #[test]
    fn one_well_per_cell() {
        let grid = Grid::new(3, 48, BoundaryCondition::Dirichlet).unwrap();
        let ws = detect_wells(&FieldModel::default(), 0.5, &grid).unwrap();
        assert_eq!(ws.wells.len(), 9);
        assert!(ws.per_cell.iter().all(|&c| c == 1));
        for w in &ws.wells {
            assert!(!w.touches_cell_boundary);
            let p = w.minimum_point;
            assert!((p[0] - p[0].round()).abs() < 1e-12 && (p[1] - p[1].round()).abs() < 1e-12);
        }
        // (0.5, 0.5) has b = 3
        let far = grid.nearest_node([0.5, 0.5]);
        assert_eq!(ws.label_of(far), None);
    }

    #[test]
    fn tiny_threshold_is_an_error() {
        let grid = Grid::new(1, 7, BoundaryCondition::Dirichlet).unwrap();
        assert!(matches!(
            detect_wells(&FieldModel::default(), 1e-6, &grid),
            Err(FieldError::EmptyWellSet { .. })
        ));
    }
}
