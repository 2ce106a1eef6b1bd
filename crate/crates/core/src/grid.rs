//! Uniform rectilinear grids and the sampled fields that live on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of axes a grid may carry (three spatial plus one temporal).
pub const MAX_AXES: usize = 4;

/// Upper bound on the total number of samples.
pub const MAX_POINTS: usize = 2_000_000;

/// One axis of a grid: a closed interval sampled at `count` equispaced nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        Self { lo, hi, count }
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.count - 1) as f64
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.count {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

/// Uniform rectilinear grid. Storage order is row-major: the last axis varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_AXES {
            return Err(Error::InvalidGrid(format!(
                "expected 1..={MAX_AXES} axes, got {}",
                axes.len()
            )));
        }
        let mut total: usize = 1;
        for (a, ax) in axes.iter().enumerate() {
            if ax.count < 3 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has {} points, need at least 3",
                    ax.count
                )));
            }
            if !(ax.lo.is_finite() && ax.hi.is_finite()) || ax.hi <= ax.lo {
                return Err(Error::InvalidGrid(format!(
                    "axis {a} has empty or non-finite extent [{}, {}]",
                    ax.lo, ax.hi
                )));
            }
            total = total.saturating_mul(ax.count);
        }
        if total > MAX_POINTS {
            return Err(Error::InvalidGrid(format!(
                "{total} points exceeds the limit of {MAX_POINTS}"
            )));
        }
        Ok(Self { axes })
    }

    /// Same extent `[lo, hi]` and count on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, count: usize) -> Result<Self> {
        Self::new(vec![Axis::new(lo, hi, count); dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    #[inline]
    pub fn axis(&self, a: usize) -> &Axis {
        &self.axes[a]
    }

    #[inline]
    pub fn count(&self, a: usize) -> usize {
        self.axes[a].count
    }

    #[inline]
    pub fn spacing(&self, a: usize) -> f64 {
        self.axes[a].spacing()
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat-index stride of axis `a`.
    #[inline]
    pub fn stride(&self, a: usize) -> usize {
        self.axes[a + 1..].iter().map(|ax| ax.count).product()
    }

    pub fn strides(&self) -> [usize; MAX_AXES] {
        let mut s = [0; MAX_AXES];
        let mut acc = 1;
        for a in (0..self.dim()).rev() {
            s[a] = acc;
            acc *= self.axes[a].count;
        }
        s
    }

    #[inline]
    pub fn index(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for (a, &i) in idx.iter().enumerate() {
            flat = flat * self.axes[a].count + i;
        }
        flat
    }

    #[inline]
    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_AXES] {
        let mut idx = [0; MAX_AXES];
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].count;
            idx[a] = flat % n;
            flat /= n;
        }
        idx
    }

    /// Coordinates of the node with flat index `flat`; unused trailing slots are zero.
    #[inline]
    pub fn point(&self, flat: usize) -> [f64; MAX_AXES] {
        let idx = self.multi_index(flat);
        let mut p = [0.0; MAX_AXES];
        for a in 0..self.dim() {
            p[a] = self.axes[a].coord(idx[a]);
        }
        p
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim()).any(|a| idx[a] == 0 || idx[a] + 1 == self.axes[a].count)
    }

    /// Trapezoidal product-rule weight of node `flat`.
    pub fn weight(&self, flat: usize) -> f64 {
        let idx = self.multi_index(flat);
        let mut w = 1.0;
        for a in 0..self.dim() {
            let h = self.axes[a].spacing();
            w *= if idx[a] == 0 || idx[a] + 1 == self.axes[a].count {
                0.5 * h
            } else {
                h
            };
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Measure of the domain.
    pub fn volume(&self) -> f64 {
        self.axes.iter().map(|a| a.hi - a.lo).product()
    }

    /// Grid with every axis refined to `2(n-1)+1` points.
    pub fn refined(&self) -> Result<Self> {
        Self::new(
            self.axes
                .iter()
                .map(|a| Axis::new(a.lo, a.hi, 2 * (a.count - 1) + 1))
                .collect(),
        )
    }

    /// Sub-grid spanned by all axes except `skip` (used for boundary faces).
    pub fn face_grid(&self, skip: usize) -> Option<Grid> {
        if self.dim() == 1 {
            return None;
        }
        let axes = self
            .axes
            .iter()
            .enumerate()
            .filter(|&(a, _)| a != skip)
            .map(|(_, ax)| *ax)
            .collect();
        Some(Grid { axes })
    }

    /// Flat indices of the nodes on face (`axis`, `side`), in row-major order of the
    /// remaining axes.
    pub fn face_nodes(&self, axis: usize, side: Side) -> Vec<usize> {
        let fixed = match side {
            Side::Lo => 0,
            Side::Hi => self.axes[axis].count - 1,
        };
        (0..self.len())
            .filter(|&i| self.multi_index(i)[axis] == fixed)
            .collect()
    }

    pub(crate) fn same_shape(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

/// Which end of an axis a boundary face sits on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lo,
    Hi,
}

impl Side {
    /// Sign of the outward normal along the face axis.
    pub fn sign(self) -> f64 {
        match self {
            Side::Lo => -1.0,
            Side::Hi => 1.0,
        }
    }
}

/// Real scalar samples on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                got: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every node; `f` receives the first `dim` coordinates.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let d = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                f(&p[..d])
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }

    /// Trapezoidal mean over the domain.
    pub fn mean(&self) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.grid.weight(i))
            .sum();
        s / self.grid.volume()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.same_shape(&other.grid)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_finite(&self) -> Result<()> {
        check_finite(&self.values)
    }
}

/// Real vector samples on a grid, stored component by component.
///
/// Most fields carry `grid.dim()` components; the 2D curl is the exception and
/// carries a single out-of-plane component.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn new(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidInput(
                "vector field with no components".into(),
            ));
        }
        for c in &components {
            if c.len() != grid.len() {
                return Err(Error::Shape {
                    expected: grid.len(),
                    got: c.len(),
                });
            }
            check_finite(c)?;
        }
        Ok(Self { grid, components })
    }

    pub fn zeros(grid: &Grid, ncomp: usize) -> Self {
        Self {
            grid: grid.clone(),
            components: vec![vec![0.0; grid.len()]; ncomp],
        }
    }

    /// Samples a `grid.dim()`-component field.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        Self::from_fn_n(grid, grid.dim(), f)
    }

    pub fn from_fn_n(grid: &Grid, ncomp: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let d = grid.dim();
        let mut components = vec![Vec::with_capacity(grid.len()); ncomp];
        for i in 0..grid.len() {
            let p = grid.point(i);
            let v = f(&p[..d]);
            assert_eq!(
                v.len(),
                ncomp,
                "field closure returned wrong component count"
            );
            for (c, x) in components.iter_mut().zip(v) {
                c.push(x);
            }
        }
        Self {
            grid: grid.clone(),
            components,
        }
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: self.components[c].clone(),
        }
    }

    pub fn from_scalars(fields: &[ScalarField]) -> Result<Self> {
        let grid = fields
            .first()
            .ok_or_else(|| Error::InvalidInput("no components".into()))?
            .grid
            .clone();
        for f in fields {
            grid.same_shape(&f.grid)?;
        }
        Ok(Self {
            grid,
            components: fields.iter().map(|f| f.values.clone()).collect(),
        })
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> ScalarField {
        let values = (0..self.grid.len())
            .map(|i| {
                self.components
                    .iter()
                    .map(|c| c[i] * c[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        ScalarField {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .map(|c| max_abs(c))
            .fold(0.0, f64::max)
    }

    pub fn zip_with(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.same_shape(&other.grid)?;
        if self.ncomp() != other.ncomp() {
            return Err(Error::InvalidInput(format!(
                "component count mismatch: {} vs {}",
                self.ncomp(),
                other.ncomp()
            )));
        }
        Ok(Self {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
                .collect(),
        })
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    pub fn check_finite(&self) -> Result<()> {
        self.components.iter().try_for_each(|c| check_finite(c))
    }
}

/// One boundary face with its samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub axis: usize,
    pub side: Side,
    /// Flat grid indices of the face nodes.
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl Face {
    /// Outward unit normal (in the full grid dimension).
    pub fn normal(&self, dim: usize) -> Vec<f64> {
        let mut n = vec![0.0; dim];
        n[self.axis] = self.side.sign();
        n
    }
}

/// Scalar samples on the boundary, assembled face by face.
///
/// Edge and corner nodes appear once on every incident face, each time paired with
/// that face's normal.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryField {
    pub grid: Grid,
    pub faces: Vec<Face>,
}

impl BoundaryField {
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64], &[f64]) -> f64) -> Self {
        let d = grid.dim();
        let mut faces = Vec::with_capacity(2 * d);
        for axis in 0..d {
            for side in [Side::Lo, Side::Hi] {
                let nodes = grid.face_nodes(axis, side);
                let mut n = [0.0; MAX_AXES];
                n[axis] = side.sign();
                let values = nodes
                    .iter()
                    .map(|&i| {
                        let p = grid.point(i);
                        f(&p[..d], &n[..d])
                    })
                    .collect();
                faces.push(Face {
                    axis,
                    side,
                    nodes,
                    values,
                });
            }
        }
        Self {
            grid: grid.clone(),
            faces,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_fn(grid, |_, _| 0.0)
    }

    pub fn face(&self, axis: usize, side: Side) -> &Face {
        self.faces
            .iter()
            .find(|f| f.axis == axis && f.side == side)
            .expect("boundary field has every face")
    }

    /// Largest absolute sample over all faces.
    pub fn max_abs(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| max_abs(&f.values))
            .fold(0.0, f64::max)
    }

    /// Trapezoidal surface integral summed over faces. In 1D faces are points.
    pub fn integral(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| self.face_integral(f, |v| v))
            .sum()
    }

    pub fn abs_integral(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| self.face_integral(f, f64::abs))
            .sum()
    }

    fn face_integral(&self, face: &Face, g: impl Fn(f64) -> f64) -> f64 {
        face.nodes
            .iter()
            .zip(&face.values)
            .map(|(&i, &v)| g(v) * face_weight(&self.grid, face.axis, i))
            .sum()
    }
}

/// Trapezoidal weight of node `flat` on a face normal to `axis`.
pub(crate) fn face_weight(grid: &Grid, axis: usize, flat: usize) -> f64 {
    let idx = grid.multi_index(flat);
    let mut w = 1.0;
    for a in 0..grid.dim() {
        if a == axis {
            continue;
        }
        let h = grid.spacing(a);
        w *= if idx[a] == 0 || idx[a] + 1 == grid.count(a) {
            0.5 * h
        } else {
            h
        };
    }
    w
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite { index: i }),
        None => Ok(()),
    }
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_axes() {
        assert!(Grid::cube(2, 0.0, 1.0, 2).is_err());
        assert!(Grid::cube(2, 1.0, 0.0, 5).is_err());
        assert!(Grid::cube(5, 0.0, 1.0, 3).is_err());
        assert!(Grid::cube(3, 0.0, 1.0, 200).is_err());
    }

    #[test]
    fn index_round_trip() {
        let g = Grid::new(vec![
            Axis::new(0.0, 1.0, 4),
            Axis::new(0.0, 2.0, 5),
            Axis::new(-1.0, 1.0, 3),
        ])
        .unwrap();
        for i in 0..g.len() {
            let idx = g.multi_index(i);
            assert_eq!(g.index(&idx[..3]), i);
        }
        assert_eq!(g.stride(0), 15);
        assert_eq!(g.strides()[..3], [15, 3, 1]);
        assert_eq!(g.point(g.len() - 1)[..3], [1.0, 2.0, 1.0]);
    }

    #[test]
    fn weights_sum_to_volume() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 7), Axis::new(-1.0, 2.0, 9)]).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 3.0).abs() < 1e-13);
    }

    #[test]
    fn boundary_faces_count_corners_per_face() {
        let g = Grid::cube(2, 0.0, 1.0, 5).unwrap();
        let b = BoundaryField::from_fn(&g, |_, _| 1.0);
        assert_eq!(b.faces.len(), 4);
        assert!(b.faces.iter().all(|f| f.nodes.len() == 5));
        // perimeter of the unit square
        assert!((b.integral() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn non_finite_rejected() {
        let g = Grid::cube(1, 0.0, 1.0, 3).unwrap();
        assert!(ScalarField::new(g, vec![0.0, f64::NAN, 1.0]).is_err());
    }
}
