//! Iterative Poisson solvers on the collocated grid.
//!
//! Boundary faces are either Neumann (ghost-node reflection carrying the prescribed
//! outward normal derivative) or Dirichlet (node value fixed). Multiplying each row
//! by its trapezoidal weight makes the operator symmetric, so conjugate gradients
//! apply directly; with all faces Neumann the constants form the null space and the
//! right-hand side must integrate to zero (the discrete Gauss theorem).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{face_weight, BoundaryField, Grid, ScalarField, Side, VectorField};
use crate::ops;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ConjugateGradient,
    SuccessiveOverRelaxation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100_000,
            method: Method::ConjugateGradient,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidInput(
                "solver tolerance and max_iterations must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual of the weighted linear system.
    pub residual: f64,
    /// Relative mismatch between the source integral and the boundary flux
    /// (zero for problems with a Dirichlet face).
    pub compatibility_defect: f64,
    /// Relative residual after each iteration (CG) or residual check (SOR).
    pub history: Vec<f64>,
    /// Value of the quadratic energy `½xᵀAx − bᵀx` after each CG iteration.
    #[serde(skip)]
    pub energy: Vec<f64>,
    /// Largest tangential mismatch `(curl λ − t) × n̂` on the boundary, when a
    /// target field was supplied to [`solve_vector_poisson`].
    pub boundary_defect: Option<f64>,
}

impl SolveReport {
    fn merge(&mut self, other: SolveReport) {
        self.iterations += other.iterations;
        self.residual = self.residual.max(other.residual);
        self.history.extend(other.history);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaceKind {
    Neumann,
    Dirichlet,
}

/// Boundary kinds for each axis, `[lo, hi]`.
#[derive(Clone, Debug)]
pub struct BoundaryKinds(pub Vec<[FaceKind; 2]>);

impl BoundaryKinds {
    pub fn all(dim: usize, kind: FaceKind) -> Self {
        Self(vec![[kind; 2]; dim])
    }

    fn get(&self, axis: usize, side: Side) -> FaceKind {
        self.0[axis][match side {
            Side::Lo => 0,
            Side::Hi => 1,
        }]
    }

    fn any_dirichlet(&self) -> bool {
        self.0.iter().flatten().any(|&k| k == FaceKind::Dirichlet)
    }
}

/// Matrix-free weighted operator `A = -W L` restricted to the free nodes.
struct Operator<'a> {
    grid: &'a Grid,
    kinds: &'a BoundaryKinds,
    free: Vec<bool>,
    weight: Vec<f64>,
    diag: Vec<f64>,
}

impl<'a> Operator<'a> {
    fn new(grid: &'a Grid, kinds: &'a BoundaryKinds) -> Self {
        let n = grid.len();
        let mut free = vec![true; n];
        for axis in 0..grid.dim() {
            for side in [Side::Lo, Side::Hi] {
                if kinds.get(axis, side) == FaceKind::Dirichlet {
                    for i in grid.face_nodes(axis, side) {
                        free[i] = false;
                    }
                }
            }
        }
        let weight = grid.weights();
        let stiff: f64 = (0..grid.dim())
            .map(|a| 2.0 / (grid.spacing(a) * grid.spacing(a)))
            .sum();
        let diag = (0..n)
            .map(|i| if free[i] { weight[i] * stiff } else { 1.0 })
            .collect();
        Self {
            grid,
            kinds,
            free,
            weight,
            diag,
        }
    }

    /// `y = A x`, where `x` is zero on fixed nodes and `y` is zero there as well.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let g = self.grid;
        for a in 0..g.dim() {
            let n = g.count(a);
            let s = g.stride(a);
            let inv = 1.0 / (g.spacing(a) * g.spacing(a));
            for f in 0..g.len() {
                if !self.free[f] {
                    continue;
                }
                let i = (f / s) % n;
                let d2 = if i == 0 {
                    2.0 * (x[f + s] - x[f])
                } else if i + 1 == n {
                    2.0 * (x[f - s] - x[f])
                } else {
                    x[f - s] - 2.0 * x[f] + x[f + s]
                };
                y[f] -= self.weight[f] * d2 * inv;
            }
        }
    }

    /// `Σ_{j≠i} A_ij x_j` for one free row.
    fn offdiag(&self, f: usize, x: &[f64]) -> f64 {
        let g = self.grid;
        let mut acc = 0.0;
        for a in 0..g.dim() {
            let n = g.count(a);
            let s = g.stride(a);
            let inv = 1.0 / (g.spacing(a) * g.spacing(a));
            let i = (f / s) % n;
            let nb = if i == 0 {
                2.0 * x[f + s]
            } else if i + 1 == n {
                2.0 * x[f - s]
            } else {
                x[f - s] + x[f + s]
            };
            acc -= nb * inv;
        }
        acc * self.weight[f]
    }

    /// Right-hand side `b = -W s + (Neumann flux) + (Dirichlet lift)`.
    fn rhs(&self, source: &[f64], data: &BoundaryField, lift: &[f64]) -> Vec<f64> {
        let g = self.grid;
        let mut b: Vec<f64> = (0..g.len())
            .map(|i| {
                if self.free[i] {
                    -self.weight[i] * source[i]
                } else {
                    0.0
                }
            })
            .collect();
        for face in &data.faces {
            if self.kinds.get(face.axis, face.side) != FaceKind::Neumann {
                continue;
            }
            for (&i, &v) in face.nodes.iter().zip(&face.values) {
                if self.free[i] {
                    b[i] += face_weight(g, face.axis, i) * v;
                }
            }
        }
        // Known Dirichlet values coupled into free rows.
        if lift.iter().any(|&v| v != 0.0) {
            let mut al = vec![0.0; g.len()];
            // A applied to the lift: only free rows are filled, and the lift is zero on them.
            for a in 0..g.dim() {
                let n = g.count(a);
                let s = g.stride(a);
                let inv = 1.0 / (g.spacing(a) * g.spacing(a));
                for f in 0..g.len() {
                    if !self.free[f] {
                        continue;
                    }
                    let i = (f / s) % n;
                    if i > 0 && i + 1 < n {
                        al[f] -= self.weight[f] * (lift[f - s] + lift[f + s]) * inv;
                    }
                }
            }
            for (bi, ai) in b.iter_mut().zip(al) {
                *bi -= ai;
            }
        }
        b
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(v: &mut [f64], free: &[bool]) {
    let (s, n) = v
        .iter()
        .zip(free)
        .filter(|(_, &f)| f)
        .fold((0.0, 0usize), |(s, n), (x, _)| (s + x, n + 1));
    if n > 0 {
        let m = s / n as f64;
        v.iter_mut()
            .zip(free)
            .filter(|(_, &f)| f)
            .for_each(|(x, _)| *x -= m);
    }
}

fn pcg(
    op: &Operator,
    b: &[f64],
    singular: bool,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = b.len();
    let bnorm = norm(b);
    let mut report = SolveReport::default();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let precond = |r: &[f64], z: &mut [f64]| {
        for i in 0..n {
            z[i] = if op.free[i] { r[i] / op.diag[i] } else { 0.0 };
        }
        if singular {
            remove_mean(z, &op.free);
        }
    };
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=cfg.max_iterations {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if singular {
            remove_mean(&mut r, &op.free);
        }
        let rel = norm(&r) / bnorm;
        report.history.push(rel);
        report.energy.push(
            -0.5 * x
                .iter()
                .zip(b.iter().zip(&r))
                .map(|(x, (b, r))| x * (b + r))
                .sum::<f64>(),
        );
        report.iterations = it;
        report.residual = rel;
        if rel <= cfg.tolerance {
            return Ok((x, report));
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // Recompute the true residual before giving up.
    op.apply(&x, &mut ap);
    let mut rt: Vec<f64> = b.iter().zip(&ap).map(|(b, a)| b - a).collect();
    if singular {
        remove_mean(&mut rt, &op.free);
    }
    let rel = norm(&rt) / bnorm;
    if rel <= cfg.tolerance {
        report.residual = rel;
        return Ok((x, report));
    }
    Err(Error::NotConverged {
        iterations: report.iterations,
        residual: rel,
        history: report.history,
    })
}

fn sor(
    op: &Operator,
    b: &[f64],
    singular: bool,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let g = op.grid;
    let n = b.len();
    let bnorm = norm(b);
    let mut report = SolveReport::default();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, report));
    }
    let longest = (0..g.dim()).map(|a| g.count(a)).max().unwrap_or(3) as f64;
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / longest).sin());
    let mut ax = vec![0.0; n];
    let check_every = 10;
    let mut sweep = 0;
    while sweep < cfg.max_iterations {
        for f in 0..n {
            if op.free[f] {
                let gs = (b[f] - op.offdiag(f, &x)) / op.diag[f];
                x[f] += omega * (gs - x[f]);
            }
        }
        sweep += 1;
        if sweep % check_every == 0 || sweep == cfg.max_iterations {
            op.apply(&x, &mut ax);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if singular {
                remove_mean(&mut r, &op.free);
            }
            let rel = norm(&r) / bnorm;
            report.history.push(rel);
            report.iterations = sweep;
            report.residual = rel;
            if rel <= cfg.tolerance {
                return Ok((x, report));
            }
        }
    }
    Err(Error::NotConverged {
        iterations: report.iterations,
        residual: report.residual,
        history: report.history,
    })
}

/// Solves `∇²u = source` with the given face kinds. `data` carries the outward
/// normal derivative on Neumann faces and the node values on Dirichlet faces.
pub fn solve_scalar(
    source: &ScalarField,
    kinds: &BoundaryKinds,
    data: &BoundaryField,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    cfg.validate()?;
    source.check_finite()?;
    let g = &source.grid;
    g.same_shape(&data.grid)?;
    if kinds.0.len() != g.dim() {
        return Err(Error::InvalidInput(
            "boundary kinds do not match grid dimension".into(),
        ));
    }
    let singular = !kinds.any_dirichlet();
    let op = Operator::new(g, kinds);

    let mut src = source.values.clone();
    let mut defect = 0.0;
    if singular {
        let vol: f64 = src.iter().zip(&op.weight).map(|(s, w)| s * w).sum();
        let abs_vol: f64 = src.iter().zip(&op.weight).map(|(s, w)| s.abs() * w).sum();
        let flux = data.integral();
        let scale = abs_vol + data.abs_integral();
        if scale > 0.0 {
            defect = (vol - flux).abs() / scale;
        }
        let limit = 10.0 * cfg.tolerance;
        if defect > limit {
            return Err(Error::Incompatible { defect, limit });
        }
        let shift = (vol - flux) / g.volume();
        src.iter_mut().for_each(|s| *s -= shift);
    }

    let mut lift = vec![0.0; g.len()];
    for face in &data.faces {
        if kinds.get(face.axis, face.side) == FaceKind::Dirichlet {
            for (&i, &v) in face.nodes.iter().zip(&face.values) {
                lift[i] = v;
            }
        }
    }
    let mut b = op.rhs(&src, data, &lift);
    if singular {
        remove_mean(&mut b, &op.free);
    }

    let (mut x, mut report) = match cfg.method {
        Method::ConjugateGradient => pcg(&op, &b, singular, cfg)?,
        Method::SuccessiveOverRelaxation => sor(&op, &b, singular, cfg)?,
    };
    report.compatibility_defect = defect;
    for (xi, (&l, &free)) in x.iter_mut().zip(lift.iter().zip(&op.free)) {
        if !free {
            *xi = l;
        }
    }
    let mut u = ScalarField {
        grid: g.clone(),
        values: x,
    };
    if singular {
        let m = u.mean();
        u.values.iter_mut().for_each(|v| *v -= m);
    }
    Ok((u, report))
}

/// Scalar Neumann problem `∇²φ = source`, `∂φ/∂n = neumann`, normalized to zero mean.
///
/// The compatibility defect between `∫ source` and `∮ neumann` is measured; above
/// ten times the solver tolerance the problem is rejected, otherwise the source is
/// shifted by the defect.
pub fn solve_scalar_neumann(
    source: &ScalarField,
    neumann: &BoundaryField,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    let kinds = BoundaryKinds::all(source.grid.dim(), FaceKind::Neumann);
    solve_scalar(source, &kinds, neumann, cfg)
}

/// `∇²u = source` with `u = 0` on the whole boundary.
pub fn solve_scalar_dirichlet(
    source: &ScalarField,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SolveReport)> {
    let kinds = BoundaryKinds::all(source.grid.dim(), FaceKind::Dirichlet);
    solve_scalar(source, &kinds, &BoundaryField::zeros(&source.grid), cfg)
}

/// Gauge-fixed vector Poisson problem `∇²λ = -curl_source`, `∇·λ = 0`.
///
/// In 3D each component `λ_c` vanishes on the faces tangential to it and has zero
/// normal derivative on the faces normal to it, so `λ × n̂ = 0` on the boundary. The
/// divergence left by the componentwise solves is removed with `λ ← λ + ∇ψ`,
/// `∇²ψ = -∇·λ`, `ψ = 0` on the boundary. In 2D the problem reduces to a single
/// stream function with homogeneous Dirichlet data; `curl_source` then has one
/// component and so does the result.
///
/// When `target_curl_field` is given, the tangential defect `(curl λ − t) × n̂` is
/// measured and stored in the report; it is monitored, not enforced.
pub fn solve_vector_poisson(
    curl_source: &VectorField,
    target_curl_field: Option<&VectorField>,
    cfg: &SolverConfig,
) -> Result<(VectorField, SolveReport)> {
    cfg.validate()?;
    let g = &curl_source.grid;
    let lambda = match (g.dim(), curl_source.ncomp()) {
        (2, 1) => {
            let src = curl_source.component(0).map(|v| -v);
            let (psi, report) = solve_scalar_dirichlet(&src, cfg)?;
            (VectorField::from_scalars(&[psi])?, report)
        }
        (3, 3) => {
            let mut report = SolveReport::default();
            let mut comps = Vec::with_capacity(3);
            for c in 0..3 {
                let mut kinds = BoundaryKinds::all(3, FaceKind::Dirichlet);
                kinds.0[c] = [FaceKind::Neumann; 2];
                let src = curl_source.component(c).map(|v| -v);
                let (u, r) = solve_scalar(&src, &kinds, &BoundaryField::zeros(g), cfg)?;
                report.merge(r);
                comps.push(u);
            }
            let lambda = VectorField::from_scalars(&comps)?;
            let (lambda, r) = project_gauge(&lambda, cfg)?;
            report.merge(r);
            (lambda, report)
        }
        (d, k) => {
            return Err(Error::InvalidInput(format!(
                "vector Poisson needs a 2D grid with 1 component or a 3D grid with 3, got {d}D/{k}"
            )))
        }
    };
    let (lambda, mut report) = lambda;
    if let Some(t) = target_curl_field {
        report.boundary_defect = Some(tangential_defect(&lambda, t)?);
    }
    Ok((lambda, report))
}

/// Removes the divergence of a 3D vector potential: `λ + ∇ψ` with `∇²ψ = -∇·λ`
/// and `ψ = 0` on the boundary (which leaves `λ × n̂` unchanged).
pub fn project_gauge(
    lambda: &VectorField,
    cfg: &SolverConfig,
) -> Result<(VectorField, SolveReport)> {
    let div = ops::divergence(lambda)?.map(|v| -v);
    let (psi, report) = solve_scalar_dirichlet(&div, cfg)?;
    let grad = ops::gradient(&psi)?;
    Ok((lambda.add(&grad)?, report))
}

/// Curl of a vector potential: the 3D curl, or the perpendicular gradient of a 2D
/// stream function.
pub fn potential_curl(lambda: &VectorField) -> Result<VectorField> {
    match (lambda.grid.dim(), lambda.ncomp()) {
        (2, 1) => ops::rot2(&lambda.component(0)),
        _ => ops::curl(lambda),
    }
}

/// Largest `|(curl λ − t) × n̂|` over all boundary faces.
pub fn tangential_defect(lambda: &VectorField, t: &VectorField) -> Result<f64> {
    let c = potential_curl(lambda)?;
    let diff = c.sub(t)?;
    let g = &diff.grid;
    let mut worst: f64 = 0.0;
    for axis in 0..g.dim() {
        for side in [Side::Lo, Side::Hi] {
            for i in g.face_nodes(axis, side) {
                // tangential part: drop the normal component
                let tang: f64 = (0..g.dim())
                    .filter(|&a| a != axis)
                    .map(|a| diff.components[a][i].powi(2))
                    .sum();
                worst = worst.max(tang.sqrt());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use std::f64::consts::PI;

    fn square(n: usize) -> Grid {
        Grid::cube(2, 0.0, 1.0, n).unwrap()
    }

    #[test]
    fn homogeneous_problem_gives_zero() {
        let g = square(9);
        let (phi, rep) = solve_scalar_neumann(
            &ScalarField::zeros(&g),
            &BoundaryField::zeros(&g),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(phi.max_abs(), 0.0);
        assert_eq!(rep.iterations, 0);
    }

    fn manufactured(n: usize, method: Method) -> f64 {
        let g = square(n);
        let exact = |p: &[f64]| p[0] * p[0] + p[1] * p[1];
        let src = ScalarField::constant(&g, 4.0);
        let neu = BoundaryField::from_fn(&g, |p, nrm| 2.0 * p[0] * nrm[0] + 2.0 * p[1] * nrm[1]);
        let cfg = SolverConfig {
            method,
            ..SolverConfig::with_tolerance(1e-11)
        };
        let (phi, rep) = solve_scalar_neumann(&src, &neu, &cfg).unwrap();
        assert!(rep.residual <= 1e-11);
        let ex = ScalarField::from_fn(&g, exact);
        let m = ex.mean();
        (0..g.len())
            .map(|i| (phi.values[i] - (ex.values[i] - m)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn neumann_manufactured_quadratic() {
        // The ghost-node scheme is exact for quadratics.
        assert!(manufactured(9, Method::ConjugateGradient) < 1e-9);
        assert!(manufactured(9, Method::SuccessiveOverRelaxation) < 1e-9);
    }

    #[test]
    fn neumann_manufactured_trig_converges() {
        let err = |n: usize| {
            let g = square(n);
            let exact = |p: &[f64]| (PI * p[0]).cos() * (2.0 * p[1]).sin();
            let src = ScalarField::from_fn(&g, |p| -(PI * PI + 4.0) * exact(p));
            let neu = BoundaryField::from_fn(&g, |p, nrm| {
                let gx = -PI * (PI * p[0]).sin() * (2.0 * p[1]).sin();
                let gy = 2.0 * (PI * p[0]).cos() * (2.0 * p[1]).cos();
                gx * nrm[0] + gy * nrm[1]
            });
            // exact data has an O(h²) discrete compatibility defect; allow it
            let cfg = SolverConfig::with_tolerance(1e-4);
            let (phi, _) = solve_scalar_neumann(&src, &neu, &cfg).unwrap();
            let ex = ScalarField::from_fn(&g, exact);
            let m = ex.mean();
            (0..g.len())
                .map(|i| (phi.values[i] - (ex.values[i] - m)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e1 / e2 > 3.0, "{e1} {e2}");
    }

    #[test]
    fn rejects_inconsistent_data() {
        let g = square(9);
        let src = ScalarField::constant(&g, 1.0);
        let r = solve_scalar_neumann(&src, &BoundaryField::zeros(&g), &SolverConfig::default());
        assert!(matches!(r, Err(Error::Incompatible { .. })));
    }

    #[test]
    fn reports_non_convergence() {
        let g = square(17);
        let src = ScalarField::from_fn(&g, |p| p[0] - 0.5);
        let cfg = SolverConfig {
            max_iterations: 2,
            ..SolverConfig::default()
        };
        match solve_scalar_neumann(&src, &BoundaryField::zeros(&g), &cfg) {
            Err(Error::NotConverged { history, .. }) => assert_eq!(history.len(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cg_energy_decreases_monotonically() {
        let g = Grid::new(vec![Axis::new(0.0, 1.0, 21), Axis::new(0.0, 2.0, 17)]).unwrap();
        let src = ScalarField::from_fn(&g, |p| (PI * p[0]).cos() * (PI * p[1]).cos());
        let (_, rep) =
            solve_scalar_neumann(&src, &BoundaryField::zeros(&g), &SolverConfig::default())
                .unwrap();
        assert!(rep
            .energy
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-14 * w[0].abs()));
    }

    #[test]
    fn cg_and_sor_agree() {
        let g = square(17);
        let src = ScalarField::from_fn(&g, |p| (PI * p[0]).cos() + (PI * p[1]).cos());
        let cg = SolverConfig::with_tolerance(1e-10);
        let sor = SolverConfig {
            method: Method::SuccessiveOverRelaxation,
            ..cg
        };
        let (a, _) = solve_scalar_neumann(&src, &BoundaryField::zeros(&g), &cg).unwrap();
        let (b, _) = solve_scalar_neumann(&src, &BoundaryField::zeros(&g), &sor).unwrap();
        let d = a.zip_with(&b, |x, y| x - y).unwrap().max_abs();
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn dirichlet_stream_function_recovered() {
        let err = |n: usize| {
            let g = square(n);
            let psi = |p: &[f64]| (PI * p[0]).sin() * (PI * p[1]).sin();
            let t = VectorField::from_fn(&g, |p| {
                vec![
                    PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
                    -PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
                ]
            });
            let c = ops::curl(&t).unwrap();
            let (lam, rep) = solve_vector_poisson(&c, Some(&t), &SolverConfig::default()).unwrap();
            assert!(rep.boundary_defect.is_some());
            let ex = ScalarField::from_fn(&g, psi);
            (0..g.len())
                .map(|i| (lam.components[0][i] - ex.values[i]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(17), err(33));
        assert!(e2 < 2e-3 && e1 / e2 > 3.5, "{e1} {e2}");
    }

    #[test]
    fn gauge_projection_is_idempotent() {
        let g = Grid::cube(3, -0.5, 0.5, 13).unwrap();
        let f = VectorField::from_fn(&g, |p| vec![-p[1] * p[2], p[0], (p[0] * p[1]).sin()]);
        let c = ops::curl(&f).unwrap();
        let cfg = SolverConfig::with_tolerance(1e-10);
        let (lam, _) = solve_vector_poisson(&c, None, &cfg).unwrap();
        let (again, _) = project_gauge(&lam, &cfg).unwrap();
        let d = again.sub(&lam).unwrap().max_abs();
        assert!(d < 1e-3 * lam.max_abs(), "{d}");
    }
}
