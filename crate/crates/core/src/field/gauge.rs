
#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use super::FieldModel;
use crate::quadrature::GaussLegendre;
use crate::Point;

/// Longest sub-interval handed to a single Gauss–Legendre panel.
const PANEL: f64 = 0.125;

/// Choice of vector potential `A` with `dA = B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GaugeKind {
    /// `A = (0, ∫₀^x b(s, y) ds)`, globally defined.
    Landau,
    /// Radial (Poincaré) gauge about `center`:
    /// `A(x) = (∫₀¹ t b(c + t(x−c)) dt) · (−(x₂−c₂), x₁−c₁)`.
    /// Reduces to the symmetric gauge `b/2 (−y, x)` for constant `b`.
    SymmetricLocal { center: Point },
}

impl GaugeKind {
    pub fn name(&self) -> &'static str {
        match self {
            GaugeKind::Landau => "landau",
            GaugeKind::SymmetricLocal { .. } => "symmetric-local",
        }
    }
}

/// Pure-gauge shift `A ↦ A + ∇χ` with quadratic `χ(x) = ½ xᵀQx + g·x`.
///
/// Second-order Taylor expansions of the potential are exact for such shifts,
/// which makes it the natural probe of gauge covariance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadraticGauge {
    /// Symmetric Hessian `[[q11, q12], [q12, q22]]`.
    pub hessian: [[f64; 2]; 2],
    pub gradient: [f64; 2],
}

impl QuadraticGauge {
    pub fn value(&self, p: Point) -> f64 {
        let q = &self.hessian;
        0.5 * (q[0][0] * p[0] * p[0] + 2.0 * q[0][1] * p[0] * p[1] + q[1][1] * p[1] * p[1])
            + self.gradient[0] * p[0]
            + self.gradient[1] * p[1]
    }

    fn grad(&self, p: Point) -> [f64; 2] {
        let q = &self.hessian;
        [
            q[0][0] * p[0] + q[0][1] * p[1] + self.gradient[0],
            q[0][1] * p[0] + q[1][1] * p[1] + self.gradient[1],
        ]
    }
}

/// A vector potential for a field model, evaluated by nested quadrature.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeField {
    kind: GaugeKind,
    model: FieldModel,
    rule: GaussLegendre,
    shift: Option<QuadraticGauge>,
}

impl GaugeField {
    /// Default quadrature order per panel.
    pub const DEFAULT_ORDER: usize = 8;

    pub fn new(model: FieldModel, kind: GaugeKind, order: usize) -> Self {
        Self {
            kind,
            model,
            rule: GaussLegendre::new(order.max(1)),
            shift: None,
        }
    }

    pub fn landau(model: FieldModel) -> Self {
        Self::new(model, GaugeKind::Landau, Self::DEFAULT_ORDER)
    }

    pub fn symmetric(model: FieldModel, center: Point) -> Self {
        Self::new(model, GaugeKind::SymmetricLocal { center }, Self::DEFAULT_ORDER)
    }

    /// The same field in the gauge `A + ∇χ`.
    pub fn with_shift(mut self, shift: QuadraticGauge) -> Self {
        self.shift = Some(shift);
        self
    }

    pub fn kind(&self) -> GaugeKind {
        self.kind
    }

    pub fn model(&self) -> &FieldModel {
        &self.model
    }

    pub fn order(&self) -> usize {
        self.rule.order()
    }

    pub fn shift(&self) -> Option<&QuadraticGauge> {
        self.shift.as_ref()
    }

    /// `A(p)`.
    pub fn potential(&self, p: Point) -> [f64; 2] {
        let mut a = match self.kind {
            GaugeKind::Landau => [0.0, self.landau_a2(p)],
            GaugeKind::SymmetricLocal { center } => {
                let dx = p[0] - center[0];
                let dy = p[1] - center[1];
                let g = self.radial_weight(center, dx, dy, 1);
                [-g * dy, g * dx]
            }
        };
        if let Some(s) = &self.shift {
            let g = s.grad(p);
            a[0] += g[0];
            a[1] += g[1];
        }
        a
    }

    /// Jacobian `J[i][j] = ∂_j A_i` at `p`.
    ///
    /// Analytic (by quadrature of `∇b`) for the built-in models; central
    /// differences with `fd_step` for tabulated fields.
    pub fn jacobian(&self, p: Point, fd_step: f64) -> [[f64; 2]; 2] {
        let mut j = if self.model.is_analytic() {
            match self.kind {
                GaugeKind::Landau => {
                    let x = p[0];
                    let dy = self.rule.integrate_composite(0.0, x, PANEL, |s| {
                        self.model.grad_b([s, p[1]])[1]
                    });
                    [[0.0, 0.0], [self.model.b(p), dy]]
                }
                GaugeKind::SymmetricLocal { center } => {
                    let dx = p[0] - center[0];
                    let dy = p[1] - center[1];
                    let g = self.radial_weight(center, dx, dy, 1);
                    let (gx, gy) = self.radial_grad(center, dx, dy);
                    [[-dy * gx, -g - dy * gy], [g + dx * gx, dx * gy]]
                }
            }
        } else {
            let unshifted = Self {
                shift: None,
                ..self.clone()
            };
            let h = fd_step;
            let ax = |q: Point| unshifted.potential(q);
            let px = ax([p[0] + h, p[1]]);
            let mx = ax([p[0] - h, p[1]]);
            let py = ax([p[0], p[1] + h]);
            let my = ax([p[0], p[1] - h]);
            [
                [(px[0] - mx[0]) / (2.0 * h), (py[0] - my[0]) / (2.0 * h)],
                [(px[1] - mx[1]) / (2.0 * h), (py[1] - my[1]) / (2.0 * h)],
            ]
        };
        if let Some(s) = &self.shift {
            for (r, row) in j.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    *v += s.hessian[r][c];
                }
            }
        }
        j
    }

    /// `∫_p^q A` along the straight segment.
    pub fn line_integral(&self, p: Point, q: Point) -> f64 {
        let d = [q[0] - p[0], q[1] - p[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        if len == 0.0 {
            return 0.0;
        }
        let base = match self.kind {
            // Horizontal segments see A₁ = 0.
            GaugeKind::Landau if d[1] == 0.0 => 0.0,
            _ => {
                let unshifted_potential = |pt: Point| match self.kind {
                    GaugeKind::Landau => [0.0, self.landau_a2(pt)],
                    GaugeKind::SymmetricLocal { center } => {
                        let dx = pt[0] - center[0];
                        let dy = pt[1] - center[1];
                        let g = self.radial_weight(center, dx, dy, 1);
                        [-g * dy, g * dx]
                    }
                };
                self.rule.integrate_composite(0.0, 1.0, PANEL / len, |s| {
                    let a = unshifted_potential([p[0] + s * d[0], p[1] + s * d[1]]);
                    a[0] * d[0] + a[1] * d[1]
                })
            }
        };
        match &self.shift {
            Some(s) => base + s.value(q) - s.value(p),
            None => base,
        }
    }

    fn landau_a2(&self, p: Point) -> f64 {
        let y = p[1];
        self.rule
            .integrate_composite(0.0, p[0], PANEL, |s| self.model.b([s, y]))
    }

    /// `∫₀¹ t^power b(c + tX) dt`.
    fn radial_weight(&self, c: Point, dx: f64, dy: f64, power: i32) -> f64 {
        let r = (dx * dx + dy * dy).sqrt();
        let panel = if r > 0.0 { PANEL / r } else { 1.0 };
        self.rule.integrate_composite(0.0, 1.0, panel.min(1.0), |t| {
            t.powi(power) * self.model.b([c[0] + t * dx, c[1] + t * dy])
        })
    }

    fn radial_grad(&self, c: Point, dx: f64, dy: f64) -> (f64, f64) {
        let r = (dx * dx + dy * dy).sqrt();
        let panel = if r > 0.0 { (PANEL / r).min(1.0) } else { 1.0 };
        let gx = self.rule.integrate_composite(0.0, 1.0, panel, |t| {
            t * t * self.model.grad_b([c[0] + t * dx, c[1] + t * dy])[0]
        });
        let gy = self.rule.integrate_composite(0.0, 1.0, panel, |t| {
            t * t * self.model.grad_b([c[0] + t * dx, c[1] + t * dy])[1]
        });
        (gx, gy)
    }
}

impl FieldModel {
    /// Flux `∬ b` over the rectangle `[lo, hi]`.
    pub fn flux(&self, lo: Point, hi: Point) -> f64 {
        let rule = GaussLegendre::new(GaugeField::DEFAULT_ORDER);
        rule.integrate_composite(lo[0], hi[0], PANEL, |x| {
            rule.integrate_composite(lo[1], hi[1], PANEL, |y| self.b([x, y]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    /// Adaptive Simpson, used as an independent reference.
    fn simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 40)
    }

    #[test]
    fn constant_field_vertical_edge() {
        let g = GaugeField::landau(FieldModel::Constant { b: 2.5 });
        let x = 0.3;
        let a = 0.07;
        let v = g.line_integral([x, 0.1], [x, 0.1 + a]);
        assert!((v - 2.5 * x * a).abs() < 1e-15);
    }

    #[test]
    fn landau_horizontal_edges_vanish() {
        let g = GaugeField::landau(FieldModel::default());
        assert_eq!(g.line_integral([0.1, 0.2], [0.13, 0.2]), 0.0);
        assert_eq!(g.line_integral([-1.1, -0.7], [-1.3, -0.7]), 0.0);
    }

    #[test]
    fn default_model_edge_matches_adaptive_simpson() {
        let g = GaugeField::landau(FieldModel::default());
        let got = g.line_integral([0.2, 0.0], [0.2, 0.01]);
        let b = |x: f64, y: f64| 1.0 + (PI * x).sin().powi(2) + (PI * y).sin().powi(2);
        let a2 = |y: f64| simpson(|s| b(s, y), 0.0, 0.2, 1e-15);
        let want = simpson(a2, 0.0, 0.01, 1e-15);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn symmetric_gauge_of_constant_field() {
        let g = GaugeField::symmetric(FieldModel::Constant { b: 3.0 }, [0.0, 0.0]);
        let a = g.potential([0.2, -0.4]);
        assert!((a[0] - 1.5 * 0.4).abs() < 1e-14 && (a[1] - 1.5 * 0.2).abs() < 1e-14);
        let j = g.jacobian([0.2, -0.4], 1e-4);
        assert!((j[0][1] + 1.5).abs() < 1e-14 && (j[1][0] - 1.5).abs() < 1e-14);
        assert!(j[0][0].abs() < 1e-14 && j[1][1].abs() < 1e-14);
    }

    fn check_curl(g: &GaugeField, p: Point) {
        let j = g.jacobian(p, 1e-4);
        let curl = j[1][0] - j[0][1];
        assert!((curl - g.model().b(p)).abs() < 1e-11, "curl {curl} at {p:?}");
        // against finite differences of the potential
        let s = 1e-5;
        let ax = g.potential([p[0] + s, p[1]]);
        let bx = g.potential([p[0] - s, p[1]]);
        let ay = g.potential([p[0], p[1] + s]);
        let by = g.potential([p[0], p[1] - s]);
        let fd = [
            [(ax[0] - bx[0]) / (2.0 * s), (ay[0] - by[0]) / (2.0 * s)],
            [(ax[1] - bx[1]) / (2.0 * s), (ay[1] - by[1]) / (2.0 * s)],
        ];
        for r in 0..2 {
            for c in 0..2 {
                assert!((fd[r][c] - j[r][c]).abs() < 1e-7, "J[{r}][{c}]");
            }
        }
    }

    #[test]
    fn jacobians_have_curl_b() {
        let model = FieldModel::from_kind("trig-well", &[1.0, 1.0, 4.0]).unwrap();
        for p in [[0.13, -0.27], [-1.2, 0.9], [0.0, 0.0]] {
            check_curl(&GaugeField::landau(model.clone()), p);
            check_curl(&GaugeField::symmetric(model.clone(), [0.1, -0.2]), p);
        }
    }

    #[test]
    fn shift_adds_exact_gradient() {
        let shift = QuadraticGauge {
            hessian: [[0.3, -0.2], [-0.2, 0.5]],
            gradient: [0.1, -0.4],
        };
        let g = GaugeField::landau(FieldModel::default());
        let gs = g.clone().with_shift(shift);
        let p = [0.1, 0.2];
        let q = [0.35, -0.1];
        let diff = gs.line_integral(p, q) - g.line_integral(p, q);
        assert!((diff - (shift.value(q) - shift.value(p))).abs() < 1e-14);
    }
}
