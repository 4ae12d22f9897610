//! Distances in the degenerate Agmon metric `[Tr⁺B − b₀(W)]₊ g`, the
//! conjugation weights built from them, and the weighted energy identity.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;

use crate::eigensolve::EigenResult;
use crate::field::FieldModel;
use crate::lattice::{BoundaryCondition, DomainMask, Grid, MagneticOperator};
use crate::{Point, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgmonError {
    #[error("source set is empty")]
    EmptySources,
    #[error("source node {node} is outside the domain")]
    SourceOutsideMask { node: usize },
    #[error("weight slack must satisfy 0 < eps <= 1 (got {0})")]
    InvalidEps(f64),
    #[error("weight is not admissible: margin {margin} at node {node} ({point:?})")]
    NotAdmissible { node: usize, point: Point, margin: f64 },
    #[error("objects live on different grids")]
    GridMismatch,
    #[error("node {node} is outside the weight's domain")]
    OutsideDomain { node: usize },
    #[error("node {node} is not reachable from the source set")]
    Unreachable { node: usize },
    #[error("value array has length {got}, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("eigen result holds no eigenvector")]
    NoEigenvector,
    #[error("vector vanishes on the domain")]
    ZeroVector,
}

/// Neighbourhood used by the graph distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Stencil {
    Eight,
    #[default]
    Sixteen,
}

impl Stencil {
    pub fn offsets(self) -> &'static [(i64, i64)] {
        const EIGHT: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        const SIXTEEN: [(i64, i64); 16] = [
            (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1),
            (2, 1), (2, -1), (-2, 1), (-2, -1), (1, 2), (1, -2), (-1, 2), (-1, -2),
        ];
        match self {
            Stencil::Eight => &EIGHT,
            Stencil::Sixteen => &SIXTEEN,
        }
    }

    pub fn directions(self) -> usize {
        self.offsets().len()
    }
}

/// `d(x) = d_W(x, X)` on the active nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct AgmonField {
    pub b0w: f64,
    pub sources: Vec<usize>,
    /// Grid-indexed; `+∞` on inactive or unreachable nodes.
    pub distance: Vec<f64>,
    /// Grid-indexed `Tr⁺B − b₀(W)`, signed.
    pub excess: Vec<f64>,
    pub stencil: Stencil,
    mask: DomainMask,
}

impl AgmonField {
    pub fn grid(&self) -> &Grid {
        self.mask.grid()
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    /// Weight of the edge between two nodes a grid offset apart.
    pub fn edge_weight(&self, p: usize, q: usize, offset: (i64, i64)) -> f64 {
        edge_weight(&self.excess, self.grid().spacing(), p, q, offset)
    }

    /// Largest finite distance.
    pub fn max_distance(&self) -> f64 {
        self.distance.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }
}

fn edge_weight(excess: &[f64], a: f64, p: usize, q: usize, (dx, dy): (i64, i64)) -> f64 {
    let len = a * ((dx * dx + dy * dy) as f64).sqrt();
    len * (0.5 * (excess[p].max(0.0) + excess[q].max(0.0))).sqrt()
}

/// Node reached from `node` by a stencil offset. Torus grids wrap; on
/// Dirichlet grids offsets leaving the grid give `None`.
fn offset_node(grid: &Grid, node: usize, (dx, dy): (i64, i64)) -> Option<usize> {
    let n = grid.side() as i64;
    let (ix, iy) = grid.ij(node);
    let (mut x, mut y) = (ix as i64 + dx, iy as i64 + dy);
    if grid.boundary() == BoundaryCondition::Torus {
        x = x.rem_euclid(n);
        y = y.rem_euclid(n);
    } else if x < 0 || y < 0 || x >= n || y >= n {
        return None;
    }
    Some(grid.index(x as usize, y as usize))
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on distance, ties broken by node index for determinism.
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra over the masked grid graph. An edge joins two active nodes one
/// stencil offset apart; its weight is the Euclidean length times the root
/// of the endpoint-averaged `(Tr⁺B − b₀W)₊`.
pub fn agmon_distance(
    model: &FieldModel,
    mask: &DomainMask,
    sources: &[usize],
    b0w: f64,
    stencil: Stencil,
) -> Result<AgmonField, AgmonError> {
    if sources.is_empty() {
        return Err(AgmonError::EmptySources);
    }
    let grid = *mask.grid();
    if let Some(&node) = sources.iter().find(|&&s| s >= grid.len() || !mask.is_active(s)) {
        return Err(AgmonError::SourceOutsideMask { node });
    }
    let excess: Vec<f64> = (0..grid.len())
        .map(|k| model.intensity(grid.point(k)) - b0w)
        .collect();
    let a = grid.spacing();
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut done = vec![false; grid.len()];
    let mut heap = BinaryHeap::new();
    let mut srcs: Vec<usize> = sources.to_vec();
    srcs.sort_unstable();
    srcs.dedup();
    for &s in &srcs {
        dist[s] = 0.0;
        heap.push(Entry { dist: 0.0, node: s });
    }
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        for &off in stencil.offsets() {
            let Some(q) = offset_node(&grid, node, off) else { continue };
            if !mask.is_active(q) || done[q] {
                continue;
            }
            let nd = d + edge_weight(&excess, a, node, q, off);
            if nd < dist[q] {
                dist[q] = nd;
                heap.push(Entry { dist: nd, node: q });
            }
        }
    }
    Ok(AgmonField {
        b0w,
        sources: srcs,
        distance: dist,
        excess,
        stencil,
        mask: mask.clone(),
    })
}

/// Squared upwind (Godunov) gradient of grid values on the active nodes;
/// differences towards inactive or missing neighbours are dropped.
fn upwind_grad_sq(mask: &DomainMask, values: &[f64]) -> Vec<f64> {
    let grid = mask.grid();
    let a = grid.spacing();
    (0..grid.len())
        .map(|k| {
            if !mask.is_active(k) {
                return 0.0;
            }
            let [e, w, n, s] = grid.neighbors4(k);
            let diff = |q: Option<usize>| -> Option<f64> {
                q.filter(|&q| mask.is_active(q)).map(|q| (values[q] - values[k]) / a)
            };
            // backward difference D⁻ = −(value at the lower neighbour − here)/a
            let axis = |fwd: Option<f64>, bwd: Option<f64>| -> f64 {
                let dm = bwd.map(|d| -d).unwrap_or(0.0);
                let dp = fwd.unwrap_or(0.0);
                dm.max(0.0).max(-dp.min(0.0))
            };
            let gx = axis(diff(e), diff(w));
            let gy = axis(diff(n), diff(s));
            gx * gx + gy * gy
        })
        .collect()
}

/// A conjugation weight `Φ` with its upwind gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    /// Grid-indexed, zero off the domain.
    pub values: Vec<f64>,
    /// Grid-indexed `|∇Φ|²`.
    pub grad_sq: Vec<f64>,
    /// Slack when built from a distance.
    pub eps: Option<f64>,
    /// Grid-indexed `Tr⁺B − b₀W − |∇Φ|²` when built from a distance; empty
    /// otherwise. `NaN` off the domain.
    pub margin: Vec<f64>,
    mask: DomainMask,
}

impl WeightFunction {
    /// Arbitrary weight values on a domain, without any admissibility data.
    pub fn from_values(mask: &DomainMask, values: Vec<f64>) -> Result<Self, AgmonError> {
        let len = mask.grid().len();
        if values.len() != len {
            return Err(AgmonError::BadLength {
                got: values.len(),
                expected: len,
            });
        }
        let values: Vec<f64> = values
            .into_iter()
            .enumerate()
            .map(|(k, v)| if mask.is_active(k) { v } else { 0.0 })
            .collect();
        let grad_sq = upwind_grad_sq(mask, &values);
        Ok(Self {
            values,
            grad_sq,
            eps: None,
            margin: Vec::new(),
            mask: mask.clone(),
        })
    }

    /// `Φ ≡ 0` on a domain.
    pub fn zero(mask: &DomainMask) -> Self {
        Self::from_values(mask, vec![0.0; mask.grid().len()]).expect("length matches")
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn grid(&self) -> &Grid {
        self.mask.grid()
    }

    /// Smallest margin and the node attaining it, if margins were computed.
    pub fn inf_margin(&self) -> Option<(f64, usize)> {
        self.margin
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_nan())
            .map(|(k, &m)| (m, k))
            .min_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// `Φ = (1−ε) d` with its admissibility margin. Fails when the margin is not
/// positive on the whole domain.
pub fn make_weight(dist: &AgmonField, eps: f64) -> Result<WeightFunction, AgmonError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(AgmonError::InvalidEps(eps));
    }
    let mask = dist.mask();
    let values: Vec<f64> = dist
        .distance
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            if !mask.is_active(k) || eps == 1.0 {
                0.0
            } else {
                (1.0 - eps) * d
            }
        })
        .collect();
    if let Some(node) = (0..values.len()).find(|&k| mask.is_active(k) && !values[k].is_finite()) {
        return Err(AgmonError::Unreachable { node });
    }
    let mut w = WeightFunction::from_values(mask, values)?;
    w.eps = Some(eps);
    w.margin = (0..w.values.len())
        .map(|k| {
            if mask.is_active(k) {
                dist.excess[k] - w.grad_sq[k]
            } else {
                f64::NAN
            }
        })
        .collect();
    if let Some((margin, node)) = w.inf_margin() {
        if !(margin > 0.0) {
            return Err(AgmonError::NotAdmissible {
                node,
                point: dist.grid().point(node),
                margin,
            });
        }
    }
    Ok(w)
}

/// Defect of the weighted energy identity
/// `Re⟨e^{2Φ/√h}(H−z)u, u⟩ = q(e^{Φ/√h}u) − h‖|∇Φ| e^{Φ/√h}u‖² − Re z ‖e^{Φ/√h}u‖²`,
/// normalized by `‖e^{Φ/√h}u‖²`. `u` is grid-indexed.
pub fn energy_identity_residual(
    op: &MagneticOperator,
    phi: &WeightFunction,
    z: C64,
    u: &[C64],
) -> Result<f64, AgmonError> {
    if op.grid() != phi.grid() {
        return Err(AgmonError::GridMismatch);
    }
    if u.len() != op.grid().len() {
        return Err(AgmonError::BadLength {
            got: u.len(),
            expected: op.grid().len(),
        });
    }
    if let Some(node) = (0..u.len()).find(|&k| u[k].norm_sqr() > 0.0 && !op.mask().is_active(k)) {
        return Err(AgmonError::OutsideDomain { node });
    }
    if let Some(&node) = op.nodes().iter().find(|&&k| !phi.mask().is_active(k)) {
        return Err(AgmonError::OutsideDomain { node });
    }
    let h = op.h();
    let sh = h.sqrt();
    // Both sides are quadratic in the weight, so a global rescaling keeps
    // the exponentials in range without changing the ratio.
    let top = op.nodes().iter().map(|&k| phi.values[k]).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = op.nodes().iter().map(|&k| ((phi.values[k] - top) / sh).exp()).collect();
    let ur = op.gather(u);
    let hu = op.apply(&ur);
    let wu: Vec<C64> = ur.iter().zip(&w).map(|(x, w)| x * *w).collect();
    let norm2: f64 = wu.iter().map(|x| x.norm_sqr()).sum();
    if norm2 == 0.0 {
        return Err(AgmonError::ZeroVector);
    }
    let lhs: f64 = hu
        .iter()
        .zip(&ur)
        .zip(&w)
        .map(|((hx, x), w)| (w * w * (hx - z * x) * x.conj()).re)
        .sum();
    let q = op.quadratic_form(&wu);
    let grad: f64 = op
        .nodes()
        .iter()
        .zip(&wu)
        .map(|(&k, x)| phi.grad_sq[k] * x.norm_sqr())
        .sum();
    Ok((lhs - q + h * grad + z.re * norm2).abs() / norm2)
}

/// `sup_x [log|v₁(x)| + (1−ε) d(x)/√h] − log‖v₁‖_∞` for the lowest
/// eigenvector of `eig`, computed on the rows of `op`.
pub fn decay_profile(
    eig: &EigenResult,
    op: &MagneticOperator,
    dist: &AgmonField,
    h: f64,
    eps: f64,
) -> Result<f64, AgmonError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(AgmonError::InvalidEps(eps));
    }
    if op.grid() != dist.grid() {
        return Err(AgmonError::GridMismatch);
    }
    let v = eig.eigenvectors.first().ok_or(AgmonError::NoEigenvector)?;
    if v.len() != op.dim() {
        return Err(AgmonError::BadLength {
            got: v.len(),
            expected: op.dim(),
        });
    }
    let vmax = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if vmax == 0.0 {
        return Err(AgmonError::ZeroVector);
    }
    let root = h.sqrt();
    let mut sup = f64::NEG_INFINITY;
    for (x, &node) in v.iter().zip(op.nodes()) {
        if !dist.mask().is_active(node) {
            return Err(AgmonError::OutsideDomain { node });
        }
        let m = x.norm();
        if m == 0.0 {
            continue;
        }
        let d = dist.distance[node];
        if !d.is_finite() {
            return Err(AgmonError::Unreachable { node });
        }
        let weight = if eps == 1.0 { 0.0 } else { (1.0 - eps) * d / root };
        sup = sup.max((m / vmax).ln() + weight);
    }
    Ok(sup)
}
