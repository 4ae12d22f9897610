//! Masked uniform grids over `k × k` supercells and the Peierls
//! discretization of `H = (ih∇ + A)²`.

mod assemble;
mod sparse;

pub use assemble::{assemble, gauge_transform, restrict, LatticeWarning, MagneticOperator};
pub use sparse::SparseHermitian;

#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use crate::field::FieldModel;
use crate::Point;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("grid needs at least one cell and two nodes per cell edge (got {cells} cells, {per_cell} nodes)")]
    InvalidGrid { cells: usize, per_cell: usize },
    #[error("semiclassical parameter must be positive and finite (got {0})")]
    InvalidH(f64),
    #[error("mask has no active node")]
    EmptyMask,
    #[error("vector of length {got} does not match {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("torus boundary needs quantized flux: flux/(2 pi h) = {quanta}, off an integer by {deviation:e}")]
    FluxNotQuantized { quanta: f64, deviation: f64 },
    #[error("torus boundary is only implemented for the landau gauge")]
    TorusGauge,
    #[error("node {node} of the submask is not active in the operator mask")]
    NotSubmask { node: usize },
    #[error("operands live on different grids or masks")]
    GridMismatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryCondition {
    /// `u = 0` on the supercell boundary; nodes sit strictly inside.
    Dirichlet,
    /// Periodic up to magnetic translations; needs quantized flux.
    Torus,
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Dirichlet => "dirichlet",
            BoundaryCondition::Torus => "torus",
        }
    }
}

/// Uniform grid with spacing `a = 1/m` over the supercell `[-k/2, k/2]²`.
///
/// Node `(ix, iy)` sits at `-k/2 + (i + 1) a` in each coordinate and has
/// linear index `iy * side + ix`. Dirichlet grids have `k m - 1` nodes per
/// side (the boundary nodes carry `u = 0` and are not stored); torus grids
/// have `k m`, the last one standing for the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    cells: usize,
    per_cell: usize,
    boundary: BoundaryCondition,
}

impl Grid {
    pub fn new(cells: usize, per_cell: usize, boundary: BoundaryCondition) -> Result<Self, LatticeError> {
        if cells == 0 || per_cell < 2 || (boundary == BoundaryCondition::Torus && cells * per_cell < 3) {
            return Err(LatticeError::InvalidGrid { cells, per_cell });
        }
        Ok(Self {
            cells,
            per_cell,
            boundary,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn per_cell(&self) -> usize {
        self.per_cell
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.boundary
    }

    pub fn side(&self) -> usize {
        match self.boundary {
            BoundaryCondition::Dirichlet => self.cells * self.per_cell - 1,
            BoundaryCondition::Torus => self.cells * self.per_cell,
        }
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.per_cell as f64
    }

    /// Lower-left corner `-k/2` of the supercell.
    pub fn origin(&self) -> f64 {
        -0.5 * self.cells as f64
    }

    /// Side length `k` of the supercell.
    pub fn extent(&self) -> f64 {
        self.cells as f64
    }

    /// Coordinate of axis index `i`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        // Integer arithmetic keeps nodes on exact cell fractions.
        let twice = 2 * (i + 1) as i64 - (self.cells * self.per_cell) as i64;
        twice as f64 / (2 * self.per_cell) as f64
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.side() + ix
    }

    #[inline]
    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.side(), node / self.side())
    }

    #[inline]
    pub fn point(&self, node: usize) -> Point {
        let (ix, iy) = self.ij(node);
        [self.coord(ix), self.coord(iy)]
    }

    /// Cell `(cx, cy)` containing `p`, counted from the lower-left cell and
    /// clamped into the supercell.
    pub fn cell_of(&self, p: Point) -> (usize, usize) {
        let f = |t: f64| -> usize {
            let c = (t - self.origin()).floor();
            (c.max(0.0) as usize).min(self.cells - 1)
        };
        (f(p[0]), f(p[1]))
    }

    /// Neighbours east, west, north and south; torus grids wrap.
    pub fn neighbors4(&self, node: usize) -> [Option<usize>; 4] {
        let n = self.side();
        let (ix, iy) = self.ij(node);
        let wrap = self.boundary == BoundaryCondition::Torus;
        let step = |i: usize, up: bool| -> Option<usize> {
            if up {
                if i + 1 < n {
                    Some(i + 1)
                } else if wrap {
                    Some(0)
                } else {
                    None
                }
            } else if i > 0 {
                Some(i - 1)
            } else if wrap {
                Some(n - 1)
            } else {
                None
            }
        };
        [
            step(ix, true).map(|x| self.index(x, iy)),
            step(ix, false).map(|x| self.index(x, iy)),
            step(iy, true).map(|y| self.index(ix, y)),
            step(iy, false).map(|y| self.index(ix, y)),
        ]
    }

    /// Node closest to `p` (clamped into the grid).
    pub fn nearest_node(&self, p: Point) -> usize {
        let n = self.side() as f64;
        let f = |t: f64| -> usize {
            let i = ((t - self.origin()) / self.spacing() - 1.0).round();
            i.clamp(0.0, n - 1.0) as usize
        };
        self.index(f(p[0]), f(p[1]))
    }

    /// Grid nodes per magnetic length `√(h / b_max)`.
    pub fn nodes_per_magnetic_length(&self, h: f64, b_max: f64) -> f64 {
        (h / b_max).sqrt() / self.spacing()
    }
}

/// How a mask was produced.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaskProvenance {
    Full,
    /// `{Tr⁺B < b₀ + ε₂}`.
    Wells { eps2: f64 },
    /// `{Tr⁺B ≥ b₀ + ε₁ + η}`.
    Away { eps1: f64, eta: f64 },
    Custom,
}

impl MaskProvenance {
    pub fn name(&self) -> &'static str {
        match self {
            MaskProvenance::Full => "full",
            MaskProvenance::Wells { .. } => "wells",
            MaskProvenance::Away { .. } => "away",
            MaskProvenance::Custom => "custom",
        }
    }
}

/// Active-node bitmap over a grid. Inactive nodes carry `u = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    grid: Grid,
    bits: Vec<bool>,
    provenance: MaskProvenance,
}

impl DomainMask {
    pub fn full(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            bits: vec![true; grid.len()],
            provenance: MaskProvenance::Full,
        }
    }

    pub fn custom(grid: &Grid, bits: Vec<bool>) -> Result<Self, LatticeError> {
        if bits.len() != grid.len() {
            return Err(LatticeError::ShapeMismatch {
                expected: grid.len(),
                got: bits.len(),
            });
        }
        Ok(Self {
            grid: *grid,
            bits,
            provenance: MaskProvenance::Custom,
        })
    }

    pub fn from_fn<F: FnMut(Point) -> bool>(grid: &Grid, mut keep: F) -> Self {
        let bits = (0..grid.len()).map(|k| keep(grid.point(k))).collect();
        Self {
            grid: *grid,
            bits,
            provenance: MaskProvenance::Custom,
        }
    }

    /// Wells domain `{Tr⁺B < b₀ + ε₂}`.
    pub fn wells(grid: &Grid, model: &FieldModel, b0: f64, eps2: f64) -> Self {
        let mut m = Self::from_fn(grid, |p| model.intensity(p) < b0 + eps2);
        m.provenance = MaskProvenance::Wells { eps2 };
        m
    }

    /// Away region `{Tr⁺B ≥ b₀ + ε₁ + η}`.
    pub fn away(grid: &Grid, model: &FieldModel, b0: f64, eps1: f64, eta: f64) -> Self {
        let mut m = Self::from_fn(grid, |p| model.intensity(p) >= b0 + eps1 + eta);
        m.provenance = MaskProvenance::Away { eps1, eta };
        m
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn provenance(&self) -> MaskProvenance {
        self.provenance
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_active(&self, node: usize) -> bool {
        self.bits[node]
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn active_nodes(&self) -> Vec<usize> {
        (0..self.bits.len()).filter(|&k| self.bits[k]).collect()
    }

    /// First node of `self` missing from `other`, if any.
    pub fn first_outside(&self, other: &DomainMask) -> Option<usize> {
        (0..self.bits.len()).find(|&k| self.bits[k] && !other.bits.get(k).copied().unwrap_or(false))
    }

    pub fn is_subset_of(&self, other: &DomainMask) -> bool {
        self.grid == other.grid && self.first_outside(other).is_none()
    }

    pub fn is_disjoint_from(&self, other: &DomainMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !(a & b))
    }

    pub fn intersect(&self, other: &DomainMask) -> DomainMask {
        let bits = self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect();
        DomainMask {
            grid: self.grid,
            bits,
            provenance: MaskProvenance::Custom,
        }
    }

    /// Distance from `p` to the nearest inactive node (or to the supercell
    /// boundary on Dirichlet grids), whichever is closer.
    pub fn clearance(&self, p: Point) -> f64 {
        let g = &self.grid;
        let mut best = f64::INFINITY;
        if g.boundary() == BoundaryCondition::Dirichlet {
            let lo = g.origin();
            let hi = lo + g.extent();
            best = (p[0] - lo).min(hi - p[0]).min(p[1] - lo).min(hi - p[1]);
        }
        for (k, &on) in self.bits.iter().enumerate() {
            if !on {
                let q = g.point(k);
                let d = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                best = best.min(d);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_nodes_are_interior() {
        let g = Grid::new(3, 8, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(g.side(), 23);
        assert_eq!(g.coord(0), -1.5 + 0.125);
        assert_eq!(g.coord(22), 1.5 - 0.125);
        assert_eq!(g.coord(11), 0.0);
        assert_eq!(g.point(g.nearest_node([0.0, 1.0])), [0.0, 1.0]);
        let t = Grid::new(3, 8, BoundaryCondition::Torus).unwrap();
        assert_eq!(t.side(), 24);
        assert_eq!(t.coord(23), 1.5);
    }

    #[test]
    fn neighbours_wrap_only_on_torus() {
        let g = Grid::new(1, 4, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(g.neighbors4(0), [Some(1), None, Some(3), None]);
        let t = Grid::new(1, 4, BoundaryCondition::Torus).unwrap();
        assert_eq!(t.neighbors4(0), [Some(1), Some(3), Some(4), Some(12)]);
    }

    #[test]
    fn wells_and_away_masks_are_disjoint() {
        let g = Grid::new(3, 24, BoundaryCondition::Dirichlet).unwrap();
        let m = FieldModel::default();
        let w = DomainMask::wells(&g, &m, 1.0, 0.7);
        let a = DomainMask::away(&g, &m, 1.0, 0.5, 0.2);
        assert!(w.is_disjoint_from(&a));
        assert!(w.active_count() > 0 && a.active_count() > 0);
        let w_small = DomainMask::wells(&g, &m, 1.0, 0.5);
        assert!(w_small.is_subset_of(&w));
    }

    #[test]
    fn clearance_sees_inactive_nodes() {
        let g = Grid::new(1, 10, BoundaryCondition::Dirichlet).unwrap();
        let m = DomainMask::from_fn(&g, |p| p[0] < 0.25);
        assert!((m.clearance([0.0, 0.0]) - 0.3).abs() < 1e-12);
        assert!((DomainMask::full(&g).clearance([0.0, 0.0]) - 0.5).abs() < 1e-12);
    }
}
