#[allow(unused_imports)] // shadowed by std float methods when std is in the graph
use num_traits::Float;
use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::FieldError;
use crate::Point;

/// A `Z²`-periodic scalar magnetic field `b(x)` over the unit cell
/// `[-1/2, 1/2]²`.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldModel {
    /// `b(x) = b`.
    Constant { b: f64 },
    /// `b(x, y) = base + amp_x sin²(πx) + amp_y sin²(πy)`.
    TrigWell { base: f64, amp_x: f64, amp_y: f64 },
    /// Samples on a regular periodic grid, bilinearly interpolated.
    Tabulated(TabulatedField),
}

impl Default for FieldModel {
    /// `b(x, y) = 1 + sin²(πx) + sin²(πy)`, one well per cell at the origin.
    fn default() -> Self {
        FieldModel::TrigWell {
            base: 1.0,
            amp_x: 1.0,
            amp_y: 1.0,
        }
    }
}

impl FieldModel {
    /// Builds an analytic model from its kind name and parameter list.
    ///
    /// `constant` takes `[b]`; `trig-well` takes `[base, amp]` or
    /// `[base, amp_x, amp_y]`.
    pub fn from_kind(kind: &str, params: &[f64]) -> Result<Self, FieldError> {
        let model = match (kind, params) {
            ("constant", [b]) => FieldModel::Constant { b: *b },
            ("trig-well", []) => FieldModel::default(),
            ("trig-well", [base, amp]) => FieldModel::TrigWell {
                base: *base,
                amp_x: *amp,
                amp_y: *amp,
            },
            ("trig-well", [base, amp_x, amp_y]) => FieldModel::TrigWell {
                base: *base,
                amp_x: *amp_x,
                amp_y: *amp_y,
            },
            ("constant" | "trig-well", _) => {
                return Err(FieldError::InvalidModel(format!(
                    "wrong number of parameters ({}) for kind `{kind}`",
                    params.len()
                )))
            }
            _ => return Err(FieldError::InvalidModel(format!("unknown field kind `{kind}`"))),
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(FieldError::InvalidModel("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            FieldModel::Constant { .. } => "constant",
            FieldModel::TrigWell { .. } => "trig-well",
            FieldModel::Tabulated(_) => "user-tabulated",
        }
    }

    pub fn parameters(&self) -> Vec<f64> {
        match self {
            FieldModel::Constant { b } => alloc::vec![*b],
            FieldModel::TrigWell { base, amp_x, amp_y } => alloc::vec![*base, *amp_x, *amp_y],
            FieldModel::Tabulated(t) => alloc::vec![t.nx as f64, t.ny as f64],
        }
    }

    /// Field value `b(x)`.
    #[inline]
    pub fn b(&self, p: Point) -> f64 {
        match self {
            FieldModel::Constant { b } => *b,
            FieldModel::TrigWell { base, amp_x, amp_y } => {
                let sx = (PI * p[0]).sin();
                let sy = (PI * p[1]).sin();
                base + amp_x * sx * sx + amp_y * sy * sy
            }
            FieldModel::Tabulated(t) => t.eval(p),
        }
    }

    /// Gradient of `b`; analytic for the built-in models.
    pub fn grad_b(&self, p: Point) -> [f64; 2] {
        match self {
            FieldModel::Constant { .. } => [0.0, 0.0],
            FieldModel::TrigWell { amp_x, amp_y, .. } => [
                amp_x * PI * (2.0 * PI * p[0]).sin(),
                amp_y * PI * (2.0 * PI * p[1]).sin(),
            ],
            FieldModel::Tabulated(t) => {
                let step = 1e-6;
                [
                    (t.eval([p[0] + step, p[1]]) - t.eval([p[0] - step, p[1]])) / (2.0 * step),
                    (t.eval([p[0], p[1] + step]) - t.eval([p[0], p[1] - step])) / (2.0 * step),
                ]
            }
        }
    }

    /// Intensity `Tr⁺B(x) = |b(x)|`.
    #[inline]
    pub fn intensity(&self, p: Point) -> f64 {
        self.b(p).abs()
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, FieldModel::Tabulated(_))
    }

    /// Largest intensity seen on a `res × res` scan of the cell.
    pub fn max_intensity(&self, res: usize) -> f64 {
        let mut best = 0.0f64;
        for i in 0..res {
            for j in 0..res {
                let p = [-0.5 + i as f64 / res as f64, -0.5 + j as f64 / res as f64];
                best = best.max(self.intensity(p));
            }
        }
        best
    }
}

/// Periodic samples `b(x_i, y_j)` at `x_i = x0 + i/nx`, `y_j = y0 + j/ny`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedField {
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    /// Row-major in `j` (y), `values[j * nx + i]`.
    values: Vec<f64>,
}

impl TabulatedField {
    pub fn new(x0: f64, y0: f64, nx: usize, ny: usize, values: Vec<f64>) -> Result<Self, FieldError> {
        if nx < 2 || ny < 2 || values.len() != nx * ny {
            return Err(FieldError::InvalidModel(format!(
                "tabulated field needs nx, ny >= 2 and nx*ny values (got {nx}x{ny}, {} values)",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::InvalidModel("non-finite tabulated value".into()));
        }
        Ok(Self {
            x0,
            y0,
            nx,
            ny,
            values,
        })
    }

    /// Deduces the regular grid from scattered `(x, y, b)` triples covering one
    /// period. A closing row/column at `x0 + 1` (resp. `y0 + 1`) is accepted and
    /// must repeat the opening one.
    pub fn from_samples(samples: &[(f64, f64, f64)]) -> Result<Self, FieldError> {
        let tol = 1e-9;
        let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let mut ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let dedup = |v: &mut Vec<f64>| {
            v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            v.dedup_by(|a, b| (*a - *b).abs() < tol);
        };
        dedup(&mut xs);
        dedup(&mut ys);
        if xs.len() * ys.len() != samples.len() {
            return Err(FieldError::InvalidModel(format!(
                "samples do not form a regular grid ({} x {} axes, {} samples)",
                xs.len(),
                ys.len(),
                samples.len()
            )));
        }
        let axis = |v: &[f64]| -> Result<(f64, usize, bool), FieldError> {
            if v.len() < 2 {
                return Err(FieldError::InvalidModel("axis needs at least two samples".into()));
            }
            let step = v[1] - v[0];
            for w in v.windows(2) {
                if ((w[1] - w[0]) - step).abs() > 1e-7 {
                    return Err(FieldError::InvalidModel("axis spacing is not uniform".into()));
                }
            }
            let span = v[v.len() - 1] - v[0];
            if (span - 1.0).abs() < 1e-7 {
                Ok((v[0], v.len() - 1, true))
            } else if (span + step - 1.0).abs() < 1e-7 {
                Ok((v[0], v.len(), false))
            } else {
                Err(FieldError::InvalidModel(format!(
                    "axis does not cover one period (span {span}, step {step})"
                )))
            }
        };
        let (x0, nx, _) = axis(&xs)?;
        let (y0, ny, _) = axis(&ys)?;
        let mut values = alloc::vec![f64::NAN; nx * ny];
        for &(x, y, b) in samples {
            let i = ((x - x0) * nx as f64).round() as usize;
            let j = ((y - y0) * ny as f64).round() as usize;
            if i == nx || j == ny {
                continue;
            }
            values[j * nx + i] = b;
        }
        let field = Self::new(x0, y0, nx, ny, values)?;
        for &(x, y, b) in samples {
            if (field.eval([x, y]) - b).abs() > 1e-9 * (1.0 + b.abs()) {
                return Err(FieldError::InvalidModel(format!(
                    "closing sample at ({x}, {y}) does not repeat the periodic value"
                )));
            }
        }
        Ok(field)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn at(&self, i: i64, j: i64) -> f64 {
        let i = i.rem_euclid(self.nx as i64) as usize;
        let j = j.rem_euclid(self.ny as i64) as usize;
        self.values[j * self.nx + i]
    }

    pub fn eval(&self, p: Point) -> f64 {
        let u = (p[0] - self.x0) * self.nx as f64;
        let v = (p[1] - self.y0) * self.ny as f64;
        let i = u.floor();
        let j = v.floor();
        let fu = u - i;
        let fv = v - j;
        let (i, j) = (i as i64, j as i64);
        let b00 = self.at(i, j);
        let b10 = self.at(i + 1, j);
        let b01 = self.at(i, j + 1);
        let b11 = self.at(i + 1, j + 1);
        (1.0 - fu) * ((1.0 - fv) * b00 + fv * b01) + fu * ((1.0 - fv) * b10 + fv * b11)
    }
}
