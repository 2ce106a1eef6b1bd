//! Collocated finite-difference operators and trapezoidal quadrature.
//!
//! Interior nodes use second-order central differences; boundary nodes use
//! second-order one-sided stencils so the convergence order is uniform.

use crate::error::{Error, Result};
use crate::grid::{BoundaryField, Face, Grid, ScalarField, VectorField};

/// First derivative of `values` along `axis`.
pub fn derivative(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.count(axis);
    let s = grid.stride(axis);
    let h = grid.spacing(axis);
    let inv = 1.0 / (2.0 * h);
    (0..grid.len())
        .map(|f| {
            let i = (f / s) % n;
            if i == 0 {
                (-3.0 * values[f] + 4.0 * values[f + s] - values[f + 2 * s]) * inv
            } else if i + 1 == n {
                (3.0 * values[f] - 4.0 * values[f - s] + values[f - 2 * s]) * inv
            } else {
                (values[f + s] - values[f - s]) * inv
            }
        })
        .collect()
}

/// Second derivative of `values` along `axis`. Boundary nodes use the four-point
/// one-sided stencil when the axis has at least four nodes.
pub fn second_derivative(grid: &Grid, values: &[f64], axis: usize) -> Vec<f64> {
    let n = grid.count(axis);
    let s = grid.stride(axis);
    let h = grid.spacing(axis);
    let inv = 1.0 / (h * h);
    (0..grid.len())
        .map(|f| {
            let i = (f / s) % n;
            let v = |k: isize| values[(f as isize + k * s as isize) as usize];
            if i == 0 {
                if n >= 4 {
                    (2.0 * v(0) - 5.0 * v(1) + 4.0 * v(2) - v(3)) * inv
                } else {
                    (v(0) - 2.0 * v(1) + v(2)) * inv
                }
            } else if i + 1 == n {
                if n >= 4 {
                    (2.0 * v(0) - 5.0 * v(-1) + 4.0 * v(-2) - v(-3)) * inv
                } else {
                    (v(0) - 2.0 * v(-1) + v(-2)) * inv
                }
            } else {
                (v(-1) - 2.0 * v(0) + v(1)) * inv
            }
        })
        .collect()
}

pub fn gradient(s: &ScalarField) -> Result<VectorField> {
    s.check_finite()?;
    let g = &s.grid;
    Ok(VectorField {
        grid: g.clone(),
        components: (0..g.dim()).map(|a| derivative(g, &s.values, a)).collect(),
    })
}

pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    require_full(v)?;
    v.check_finite()?;
    let g = &v.grid;
    let mut out = vec![0.0; g.len()];
    for (a, c) in v.components.iter().enumerate() {
        for (o, d) in out.iter_mut().zip(derivative(g, c, a)) {
            *o += d;
        }
    }
    Ok(ScalarField {
        grid: g.clone(),
        values: out,
    })
}

/// Divergence whose trapezoidal integral equals the boundary flux exactly.
///
/// Identical to [`divergence`] in the interior; boundary nodes use the first-order
/// one-sided difference so that the discrete Gauss theorem holds face by face.
/// This is the source term matching the Neumann operator in [`crate::poisson`].
pub fn flux_divergence(v: &VectorField) -> Result<ScalarField> {
    require_full(v)?;
    v.check_finite()?;
    let g = &v.grid;
    let mut out = vec![0.0; g.len()];
    for (a, c) in v.components.iter().enumerate() {
        let n = g.count(a);
        let s = g.stride(a);
        let h = g.spacing(a);
        for (f, o) in out.iter_mut().enumerate() {
            let i = (f / s) % n;
            *o += if i == 0 {
                (c[f + s] - c[f]) / h
            } else if i + 1 == n {
                (c[f] - c[f - s]) / h
            } else {
                (c[f + s] - c[f - s]) / (2.0 * h)
            };
        }
    }
    Ok(ScalarField {
        grid: g.clone(),
        values: out,
    })
}

/// Curl. In 3D returns three components; in 2D returns the single out-of-plane
/// component `dv_y/dx - dv_x/dy` as a one-component field.
pub fn curl(v: &VectorField) -> Result<VectorField> {
    require_full(v)?;
    v.check_finite()?;
    let g = &v.grid;
    let d = |c: usize, a: usize| derivative(g, &v.components[c], a);
    let sub = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>();
    let components = match g.dim() {
        2 => vec![sub(d(1, 0), d(0, 1))],
        3 => vec![
            sub(d(2, 1), d(1, 2)),
            sub(d(0, 2), d(2, 0)),
            sub(d(1, 0), d(0, 1)),
        ],
        n => {
            return Err(Error::InvalidInput(format!(
                "curl needs a 2D or 3D field, got {n}D"
            )))
        }
    };
    Ok(VectorField {
        grid: g.clone(),
        components,
    })
}

/// Perpendicular gradient `(ds/dy, -ds/dx)` of a 2D stream function.
pub fn rot2(s: &ScalarField) -> Result<VectorField> {
    if s.grid.dim() != 2 {
        return Err(Error::InvalidInput("stream function must be 2D".into()));
    }
    let g = &s.grid;
    let dx = derivative(g, &s.values, 0);
    let dy = derivative(g, &s.values, 1);
    Ok(VectorField {
        grid: g.clone(),
        components: vec![dy, dx.into_iter().map(|v| -v).collect()],
    })
}

pub fn laplacian(s: &ScalarField) -> Result<ScalarField> {
    s.check_finite()?;
    let g = &s.grid;
    let mut out = vec![0.0; g.len()];
    for a in 0..g.dim() {
        for (o, d) in out.iter_mut().zip(second_derivative(g, &s.values, a)) {
            *o += d;
        }
    }
    Ok(ScalarField {
        grid: g.clone(),
        values: out,
    })
}

/// `(1/c²)∂²s/∂t² - Σ ∂²s/∂x²` with axis 0 as time.
pub fn dalembertian(s: &ScalarField, c: f64) -> Result<ScalarField> {
    s.check_finite()?;
    let g = &s.grid;
    if g.dim() < 2 {
        return Err(Error::InvalidInput(
            "need a time axis and at least one space axis".into(),
        ));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidInput("wave speed must be positive".into()));
    }
    let mut out: Vec<f64> = second_derivative(g, &s.values, 0)
        .into_iter()
        .map(|v| v / (c * c))
        .collect();
    for a in 1..g.dim() {
        for (o, d) in out.iter_mut().zip(second_derivative(g, &s.values, a)) {
            *o -= d;
        }
    }
    Ok(ScalarField {
        grid: g.clone(),
        values: out,
    })
}

/// Anything that can enter the trapezoidal inner product.
pub trait FieldData {
    fn grid(&self) -> &Grid;
    fn components(&self) -> Vec<&[f64]>;
}

impl FieldData for ScalarField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn components(&self) -> Vec<&[f64]> {
        vec![&self.values]
    }
}

impl FieldData for VectorField {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn components(&self) -> Vec<&[f64]> {
        self.components.iter().map(Vec::as_slice).collect()
    }
}

/// Trapezoidal product-rule approximation of `∫ a·b dV`.
pub fn inner_product<F: FieldData>(a: &F, b: &F) -> Result<f64> {
    a.grid().same_shape(b.grid())?;
    let (ca, cb) = (a.components(), b.components());
    if ca.len() != cb.len() {
        return Err(Error::InvalidInput("component count mismatch".into()));
    }
    let w = a.grid().weights();
    Ok(ca
        .iter()
        .zip(&cb)
        .map(|(x, y)| {
            x.iter()
                .zip(y.iter())
                .zip(&w)
                .map(|((p, q), w)| p * q * w)
                .sum::<f64>()
        })
        .sum())
}

/// Trapezoidal L2 norm.
pub fn l2_norm<F: FieldData>(a: &F) -> f64 {
    inner_product(a, a).map(f64::sqrt).unwrap_or(0.0)
}

/// Normal component `v·n̂` on every face.
pub fn boundary_normal_component(v: &VectorField) -> Result<BoundaryField> {
    require_full(v)?;
    let g = &v.grid;
    let mut faces = Vec::with_capacity(2 * g.dim());
    for axis in 0..g.dim() {
        for side in [crate::grid::Side::Lo, crate::grid::Side::Hi] {
            let nodes = g.face_nodes(axis, side);
            let values = nodes
                .iter()
                .map(|&i| side.sign() * v.components[axis][i])
                .collect();
            faces.push(Face {
                axis,
                side,
                nodes,
                values,
            });
        }
    }
    Ok(BoundaryField {
        grid: g.clone(),
        faces,
    })
}

fn require_full(v: &VectorField) -> Result<()> {
    if v.ncomp() != v.grid.dim() {
        return Err(Error::InvalidInput(format!(
            "expected {} components, got {}",
            v.grid.dim(),
            v.ncomp()
        )));
    }
    Ok(())
}
