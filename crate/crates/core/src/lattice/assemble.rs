#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{BoundaryCondition, DomainMask, Grid, LatticeError, SparseHermitian};
use crate::field::{GaugeField, GaugeKind};
use crate::quadrature::GaussLegendre;
use crate::C64;

/// Assembly proceeds but the result may be under-resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LatticeWarning {
    /// Fewer than 12 nodes per magnetic length `√(h / b_max)`.
    CoarseGrid { nodes_per_length: f64 },
}

/// Discrete `H = (ih∇ + A)²` on the active nodes of a masked grid.
///
/// Rows and columns are the active nodes in ascending grid order.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticOperator {
    matrix: SparseHermitian,
    h: f64,
    grid: Grid,
    mask: DomainMask,
    gauge: GaugeKind,
    nodes: Vec<usize>,
    /// `Tr⁺B` at each row's node.
    intensity: Vec<f64>,
    warnings: Vec<LatticeWarning>,
}

impl MagneticOperator {
    pub fn matrix(&self) -> &SparseHermitian {
        &self.matrix
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn gauge(&self) -> GaugeKind {
        self.gauge
    }

    /// Smallest intensity `Tr⁺B` over the active nodes.
    pub fn b_min(&self) -> f64 {
        self.intensity.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr⁺B` at the node of each row.
    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn warnings(&self) -> &[LatticeWarning] {
        &self.warnings
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Grid node of each row.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn row_of(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    /// Hopping amplitude `t = h² / a²`.
    pub fn hopping(&self) -> f64 {
        let a = self.grid.spacing();
        self.h * self.h / (a * a)
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.apply(x)
    }

    /// Discrete quadratic form `q(u) = u† H u`.
    pub fn quadratic_form(&self, u: &[C64]) -> f64 {
        self.matrix.quadratic_form(u)
    }

    /// Lifts a row vector to a grid vector, zero on inactive nodes.
    pub fn scatter(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.grid.len()];
        for (r, &n) in self.nodes.iter().enumerate() {
            out[n] = v[r];
        }
        out
    }

    /// Restricts a grid vector to the rows.
    pub fn gather(&self, u: &[C64]) -> Vec<C64> {
        self.nodes.iter().map(|&n| u[n]).collect()
    }

    /// Gauge invariant phase of the plaquette with lower-left node `node`,
    /// `-Σ θ` around it counterclockwise, reduced to `(-π, π]`. Equals
    /// `(1/h) ∬ b` over the plaquette modulo `2π`. `None` when a corner is
    /// inactive or missing.
    pub fn plaquette_phase(&self, node: usize) -> Option<f64> {
        let g = &self.grid;
        let e = g.neighbors4(node)[0]?;
        let ne = g.neighbors4(e)[2]?;
        let n = g.neighbors4(node)[2]?;
        let corners = [node, e, ne, n];
        let rows: Vec<usize> = corners.iter().map(|&c| self.row_of(c)).collect::<Option<_>>()?;
        let mut sum = 0.0;
        for k in 0..4 {
            let hop = -self.matrix.get(rows[k], rows[(k + 1) % 4]);
            if hop.norm() == 0.0 {
                return None;
            }
            sum -= hop.arg();
        }
        Some(wrap_phase(sum))
    }
}

impl AsRef<SparseHermitian> for MagneticOperator {
    fn as_ref(&self) -> &SparseHermitian {
        &self.matrix
    }
}

/// Reduces an angle to `(-π, π]`.
pub(crate) fn wrap_phase(t: f64) -> f64 {
    let r = t - 2.0 * PI * (t / (2.0 * PI)).round();
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Peierls five-point discretization.
///
/// The hop from node `j` to its neighbour `k` is `-(h²/a²) e^{iθ_jk}` with
/// `θ_jk = -(1/h) ∫_j^k A`; the diagonal is `4 h²/a²` for every active node
/// since nodes outside the mask count as Dirichlet neighbours.
pub fn assemble(
    gauge: &GaugeField,
    grid: &Grid,
    mask: &DomainMask,
    h: f64,
) -> Result<MagneticOperator, LatticeError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(LatticeError::InvalidH(h));
    }
    if mask.grid() != grid {
        return Err(LatticeError::GridMismatch);
    }
    let nodes = mask.active_nodes();
    if nodes.is_empty() {
        return Err(LatticeError::EmptyMask);
    }
    let model = gauge.model();
    let torus = grid.boundary() == BoundaryCondition::Torus;
    // Wrap phase χ(y)/h for the east hop across x = k/2; see below.
    let wrap = if torus {
        if gauge.kind() != GaugeKind::Landau || gauge.shift().is_some() {
            return Err(LatticeError::TorusGauge);
        }
        let lo = grid.origin();
        let hi = lo + grid.extent();
        let flux = model.flux([lo, lo], [hi, hi]);
        let quanta = flux / (2.0 * PI * h);
        let deviation = (quanta - quanta.round()).abs();
        if deviation > 1e-8 {
            return Err(LatticeError::FluxNotQuantized { quanta, deviation });
        }
        Some(WrapPhase::new(gauge, grid).scaled(h))
    } else {
        None
    };

    let a = grid.spacing();
    let t = h * h / (a * a);
    let n = grid.side();
    let mut position = vec![usize::MAX; grid.len()];
    for (r, &k) in nodes.iter().enumerate() {
        position[k] = r;
    }

    let mut rows: Vec<Vec<(usize, C64)>> = nodes.iter().map(|_| Vec::with_capacity(5)).collect();
    for (r, &k) in nodes.iter().enumerate() {
        rows[r].push((r, C64::new(4.0 * t, 0.0)));
        let p = grid.point(k);
        let [east, _, north, _] = grid.neighbors4(k);
        let (ix, iy) = grid.ij(k);
        if let Some(e) = east.filter(|&e| mask.is_active(e)) {
            let mut theta = -gauge.line_integral(p, [p[0] + a, p[1]]) / h;
            if ix + 1 == n {
                if let Some(w) = &wrap {
                    theta += w.at(iy);
                }
            }
            let hop = C64::from_polar(t, theta) * -1.0;
            let c = position[e];
            rows[r].push((c, hop));
            rows[c].push((r, hop.conj()));
        }
        if let Some(nb) = north.filter(|&x| mask.is_active(x)) {
            let theta = -gauge.line_integral(p, [p[0], p[1] + a]) / h;
            let hop = C64::from_polar(t, theta) * -1.0;
            let c = position[nb];
            rows[r].push((c, hop));
            rows[c].push((r, hop.conj()));
        }
    }

    let mut warnings = Vec::new();
    let intensity: Vec<f64> = nodes.iter().map(|&k| model.intensity(grid.point(k))).collect();
    let b_max = intensity.iter().copied().fold(0.0, f64::max);
    if b_max > 0.0 {
        let per_length = grid.nodes_per_magnetic_length(h, b_max);
        if per_length < 12.0 {
            warnings.push(LatticeWarning::CoarseGrid {
                nodes_per_length: per_length,
            });
        }
    }

    Ok(MagneticOperator {
        matrix: SparseHermitian::from_rows(rows),
        h,
        grid: *grid,
        mask: mask.clone(),
        gauge: gauge.kind(),
        nodes,
        intensity,
        warnings,
    })
}

/// Extra phase on hops across the `x = k/2` seam of a torus in the Landau
/// gauge. There `A(x + L, y) = A(x, y) + ∇χ(y)` with
/// `χ(y) = ∫_{y₀}^y ∫_x^{x+L} b(s, t) ds dt`, so wavefunctions obey
/// `u(x + L, y) = e^{iχ(y)/h} u(x, y)`.
struct WrapPhase {
    values: Vec<f64>,
}

impl WrapPhase {
    fn new(gauge: &GaugeField, grid: &Grid) -> Self {
        let model = gauge.model();
        let rule = GaussLegendre::new(gauge.order());
        let lo = grid.origin();
        let hi = lo + grid.extent();
        let line = |y: f64| rule.integrate_composite(lo, hi, 0.125, |s| model.b([s, y]));
        let mut values = Vec::with_capacity(grid.side());
        let mut acc = 0.0;
        let mut prev = lo;
        for i in 0..grid.side() {
            let y = grid.coord(i);
            acc += rule.integrate_composite(prev, y, 0.125, line);
            prev = y;
            values.push(acc);
        }
        Self { values }
    }

    fn at(&self, iy: usize) -> f64 {
        self.values[iy]
    }

    fn scaled(mut self, h: f64) -> Self {
        for v in &mut self.values {
            *v /= h;
        }
        self
    }
}

/// Principal submatrix on `submask`: the Dirichlet realization on the smaller
/// domain with identical stencil data.
pub fn restrict(op: &MagneticOperator, submask: &DomainMask) -> Result<MagneticOperator, LatticeError> {
    if submask.grid() != op.grid() {
        return Err(LatticeError::GridMismatch);
    }
    if let Some(node) = submask.first_outside(op.mask()) {
        return Err(LatticeError::NotSubmask { node });
    }
    let nodes = submask.active_nodes();
    if nodes.is_empty() {
        return Err(LatticeError::EmptyMask);
    }
    let rows: Vec<usize> = nodes.iter().map(|&n| op.row_of(n).expect("checked subset")).collect();
    Ok(MagneticOperator {
        matrix: op.matrix.principal_submatrix(&rows),
        h: op.h,
        grid: op.grid,
        mask: submask.clone(),
        gauge: op.gauge,
        intensity: rows.iter().map(|&r| op.intensity[r]).collect(),
        nodes,
        warnings: op.warnings.clone(),
    })
}

/// Conjugation by `diag(e^{iχ/h})` for grid-indexed real `χ`; this is the
/// operator in the gauge `A + ∇χ`.
pub fn gauge_transform(op: &MagneticOperator, chi: &[f64]) -> Result<MagneticOperator, LatticeError> {
    if chi.len() != op.grid.len() {
        return Err(LatticeError::ShapeMismatch {
            expected: op.grid.len(),
            got: chi.len(),
        });
    }
    let phase: Vec<C64> = op.nodes.iter().map(|&n| C64::from_polar(1.0, chi[n] / op.h)).collect();
    let mut out = op.clone();
    out.matrix = op.matrix.conjugate_by(&phase);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{FieldModel, QuadraticGauge};

    fn dens(op: &MagneticOperator) -> nalgebra::DMatrix<C64> {
        let n = op.dim();
        nalgebra::DMatrix::from_row_slice(n, n, &op.matrix().to_dense())
    }

    fn eigs(op: &MagneticOperator) -> Vec<f64> {
        let mut v: Vec<f64> = dens(op).symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn zero_field_gives_scaled_dirichlet_laplacian() {
        let grid = Grid::new(1, 9, BoundaryCondition::Dirichlet).unwrap();
        let gauge = GaugeField::landau(FieldModel::Constant { b: 0.0 });
        let h = 0.3;
        let op = assemble(&gauge, &grid, &DomainMask::full(&grid), h).unwrap();
        let a = grid.spacing();
        let t = h * h / (a * a);
        let mut want = Vec::new();
        for p in 1..=8 {
            for q in 1..=8 {
                let c = |k: usize| (PI * k as f64 * a).cos();
                want.push(t * (4.0 - 2.0 * c(p) - 2.0 * c(q)));
            }
        }
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, w) in eigs(&op).iter().zip(&want) {
            assert!((g - w).abs() < 1e-10 * t, "{g} vs {w}");
        }
    }

    /// `∫ A₂ dy` along the vertical edge from `(x, y0)` to `(x, y1)` for the
    /// default model in the Landau gauge, in closed form.
    fn default_vertical_integral(x: f64, y0: f64, y1: f64) -> f64 {
        let base = 1.5 * x - (2.0 * PI * x).sin() / (4.0 * PI);
        let s2 = 0.5 * (y1 - y0) - ((2.0 * PI * y1).sin() - (2.0 * PI * y0).sin()) / (4.0 * PI);
        base * (y1 - y0) + x * s2
    }

    #[test]
    fn matches_hand_assembled_toy_operators() {
        let grid = Grid::new(1, 4, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(grid.len(), 9);
        let a = grid.spacing();
        for (model, h) in [(FieldModel::Constant { b: 1.0 }, 1.0), (FieldModel::default(), 0.37)] {
            let op = assemble(&GaugeField::landau(model.clone()), &grid, &DomainMask::full(&grid), h).unwrap();
            let t = h * h / (a * a);
            let mut want = vec![C64::new(0.0, 0.0); 81];
            for iy in 0..3 {
                for ix in 0..3 {
                    let k = iy * 3 + ix;
                    let x = -0.5 + (ix + 1) as f64 * a;
                    let y = -0.5 + (iy + 1) as f64 * a;
                    want[k * 9 + k] = C64::new(4.0 * t, 0.0);
                    if ix < 2 {
                        want[k * 9 + k + 1] = C64::new(-t, 0.0);
                        want[(k + 1) * 9 + k] = C64::new(-t, 0.0);
                    }
                    if iy < 2 {
                        let integral = match model {
                            FieldModel::Constant { .. } => x * a,
                            _ => default_vertical_integral(x, y, y + a),
                        };
                        let hop = -C64::from_polar(t, -integral / h);
                        want[k * 9 + k + 3] = hop;
                        want[(k + 3) * 9 + k] = hop.conj();
                    }
                }
            }
            for (g, w) in op.matrix().to_dense().iter().zip(&want) {
                assert!((g - w).norm() < 1e-14 * t.max(1.0), "{g} vs {w}");
            }
        }
    }

    #[test]
    fn assembled_matrix_is_exactly_hermitian_and_psd() {
        let grid = Grid::new(2, 8, BoundaryCondition::Dirichlet).unwrap();
        let mask = DomainMask::from_fn(&grid, |p| p[0] * p[0] + p[1] * p[1] < 0.7);
        for gauge in [
            GaugeField::landau(FieldModel::default()),
            GaugeField::symmetric(FieldModel::default(), [0.1, -0.2]),
        ] {
            let op = assemble(&gauge, &grid, &mask, 0.2).unwrap();
            assert!(op.matrix().is_exactly_hermitian());
            let e = eigs(&op);
            assert!(e[0] >= -1e-10 * op.matrix().norm_one());
        }
    }

    #[test]
    fn plaquette_phases_carry_the_flux() {
        let grid = Grid::new(2, 10, BoundaryCondition::Dirichlet).unwrap();
        let model = FieldModel::default();
        let h = 0.05;
        let a = grid.spacing();
        for gauge in [
            GaugeField::landau(model.clone()),
            GaugeField::symmetric(model.clone(), [0.3, 0.1]),
        ] {
            let op = assemble(&gauge, &grid, &DomainMask::full(&grid), h).unwrap();
            for node in (0..grid.len()).step_by(7) {
                if let Some(phase) = op.plaquette_phase(node) {
                    let p = grid.point(node);
                    let flux = model.flux(p, [p[0] + a, p[1] + a]) / h;
                    assert!(wrap_phase(phase - flux).abs() < 1e-8, "{phase} vs {flux}");
                }
            }
        }
    }

    #[test]
    fn restriction_is_principal_submatrix() {
        let grid = Grid::new(1, 7, BoundaryCondition::Dirichlet).unwrap();
        let full = DomainMask::full(&grid);
        let op = assemble(&GaugeField::landau(FieldModel::default()), &grid, &full, 0.3).unwrap();
        assert_eq!(restrict(&op, &full).unwrap(), op);
        let mut bits = vec![false; grid.len()];
        bits[10] = true;
        let one = restrict(&op, &DomainMask::custom(&grid, bits).unwrap()).unwrap();
        assert_eq!(one.dim(), 1);
        assert_eq!(one.matrix().get(0, 0), op.matrix().get(10, 10));
        let small = DomainMask::from_fn(&grid, |p| p[0] < 0.1);
        let sub = restrict(&op, &small).unwrap();
        assert!(matches!(restrict(&sub, &full), Err(LatticeError::NotSubmask { .. })));
    }

    #[test]
    fn gauge_transform_matches_shifted_assembly() {
        let grid = Grid::new(1, 12, BoundaryCondition::Dirichlet).unwrap();
        let model = FieldModel::default();
        let shift = QuadraticGauge {
            hessian: [[0.7, -0.4], [-0.4, 1.3]],
            gradient: [0.2, -0.9],
        };
        let h = 0.15;
        let mask = DomainMask::full(&grid);
        let base = assemble(&GaugeField::landau(model.clone()), &grid, &mask, h).unwrap();
        let shifted = assemble(&GaugeField::landau(model).with_shift(shift), &grid, &mask, h).unwrap();
        let chi: Vec<f64> = (0..grid.len()).map(|k| shift.value(grid.point(k))).collect();
        let conj = gauge_transform(&base, &chi).unwrap();
        for (x, y) in conj.matrix().to_dense().iter().zip(shifted.matrix().to_dense()) {
            assert!((x - y).norm() < 1e-9 * base.hopping());
        }
        let zero = gauge_transform(&base, &vec![0.0; grid.len()]).unwrap();
        assert_eq!(zero, base);
    }

    #[test]
    fn torus_requires_quantized_flux_and_landau_gauge() {
        let grid = Grid::new(2, 8, BoundaryCondition::Torus).unwrap();
        let mask = DomainMask::full(&grid);
        let model = FieldModel::default();
        // default model carries flux 2 per cell, 8 over the supercell
        let good_h = 8.0 / (2.0 * PI * 3.0);
        let op = assemble(&GaugeField::landau(model.clone()), &grid, &mask, good_h).unwrap();
        assert!(op.matrix().is_exactly_hermitian());
        assert!(matches!(
            assemble(&GaugeField::landau(model.clone()), &grid, &mask, 0.2),
            Err(LatticeError::FluxNotQuantized { .. })
        ));
        assert!(matches!(
            assemble(&GaugeField::symmetric(model, [0.0, 0.0]), &grid, &mask, good_h),
            Err(LatticeError::TorusGauge)
        ));
    }

    #[test]
    fn torus_seam_plaquettes_carry_the_flux() {
        let grid = Grid::new(1, 12, BoundaryCondition::Torus).unwrap();
        let model = FieldModel::default();
        let h = 2.0 / (2.0 * PI * 5.0);
        let a = grid.spacing();
        let op = assemble(&GaugeField::landau(model.clone()), &grid, &DomainMask::full(&grid), h).unwrap();
        for node in 0..grid.len() {
            let phase = op.plaquette_phase(node).unwrap();
            let p = grid.point(node);
            let flux = model.flux(p, [p[0] + a, p[1] + a]) / h;
            assert!(wrap_phase(phase - flux).abs() < 1e-8, "node {node}: {phase} vs {flux}");
        }
    }

    #[test]
    fn coarse_grids_warn() {
        let grid = Grid::new(1, 8, BoundaryCondition::Dirichlet).unwrap();
        let op = assemble(&GaugeField::landau(FieldModel::default()), &grid, &DomainMask::full(&grid), 0.05).unwrap();
        assert!(matches!(op.warnings(), [LatticeWarning::CoarseGrid { .. }]));
    }
}
