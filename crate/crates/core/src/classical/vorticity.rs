//! Vorticity of an ensemble's momentum field, computed on the Lagrangian mesh
//! formed by the seed lattice.
//!
//! With seed coordinates `a`, `∂p/∂q = (∂p/∂a)(∂q/∂a)⁻¹`. Derivatives along
//! the lattice use the same stencils as the grid operators, so no scattered
//! interpolation enters the curl itself.

use super::{Ensemble, HamiltonianSpec};
use crate::error::{Error, Result};
use crate::grid::{Grid, VectorField};
use crate::ops;

type Mat = [[f64; 3]; 3];

fn lattice(e: &Ensemble) -> Result<&Grid> {
    let g = e
        .lattice
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("ensemble was not seeded on a lattice".into()))?;
    if g.len() != e.len() {
        return Err(Error::Shape {
            expected: g.len(),
            got: e.len(),
        });
    }
    Ok(g)
}

/// Inverse of the leading `d×d` block, or `None` unless its determinant is
/// positive.
fn inverse(m: &Mat, d: usize) -> Option<Mat> {
    let mut r = [[0.0; 3]; 3];
    if d == 2 {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det <= 0.0 || !det.is_finite() {
            return None;
        }
        r[0][0] = m[1][1] / det;
        r[0][1] = -m[0][1] / det;
        r[1][0] = -m[1][0] / det;
        r[1][1] = m[0][0] / det;
    } else {
        let c = |i: usize, j: usize| {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
            m[i1][j1] * m[i2][j2] - m[i1][j2] * m[i2][j1]
        };
        let det = (0..3).map(|j| m[0][j] * c(0, j)).sum::<f64>();
        if det <= 0.0 || !det.is_finite() {
            return None;
        }
        for i in 0..3 {
            for j in 0..3 {
                r[j][i] = c(i, j) / det;
            }
        }
    }
    Some(r)
}

/// Per node: `∂q/∂a` inverted, and `∂p_i/∂q_j`.
fn mesh_gradients(e: &Ensemble) -> Result<(Vec<Mat>, Vec<Mat>)> {
    let g = lattice(e)?;
    let d = g.dim();
    let n = g.len();
    let col = |f: &dyn Fn(usize) -> f64| (0..n).map(f).collect::<Vec<_>>();
    let mut jq = vec![[[0.0; 3]; 3]; n];
    let mut jp = vec![[[0.0; 3]; 3]; n];
    for i in 0..d {
        let qi = col(&|k| e.particles[k].q[i]);
        let pi = col(&|k| e.particles[k].p[i]);
        for a in 0..d {
            let dq = ops::derivative(g, &qi, a);
            let dp = ops::derivative(g, &pi, a);
            for k in 0..n {
                jq[k][i][a] = dq[k];
                jp[k][i][a] = dp[k];
            }
        }
    }
    let mut inv = Vec::with_capacity(n);
    let mut grad = Vec::with_capacity(n);
    for k in 0..n {
        let ji = inverse(&jq[k], d).ok_or(Error::TrajectoryCrossing)?;
        let mut gp = [[0.0; 3]; 3];
        for i in 0..d {
            for j in 0..d {
                gp[i][j] = (0..d).map(|a| jp[k][i][a] * ji[a][j]).sum();
            }
        }
        inv.push(ji);
        grad.push(gp);
    }
    Ok((inv, grad))
}

fn curl_of(gp: &Mat, d: usize) -> Vec<f64> {
    if d == 2 {
        vec![gp[1][0] - gp[0][1]]
    } else {
        vec![
            gp[2][1] - gp[1][2],
            gp[0][2] - gp[2][0],
            gp[1][0] - gp[0][1],
        ]
    }
}

/// Curl of the momentum field at every particle, laid out on the seed
/// lattice (one component in 2D, three in 3D). Fails with
/// `TrajectoryCrossing` once the mesh folds.
pub fn lagrangian_vorticity(e: &Ensemble) -> Result<VectorField> {
    let g = lattice(e)?.clone();
    let d = g.dim();
    let (_, grad) = mesh_gradients(e)?;
    let nc = if d == 2 { 1 } else { 3 };
    let mut comps = vec![vec![0.0; g.len()]; nc];
    for (k, gp) in grad.iter().enumerate() {
        for (c, v) in curl_of(gp, d).into_iter().enumerate() {
            comps[c][k] = v;
        }
    }
    VectorField::new(g, comps)
}

#[derive(Clone, Debug)]
pub struct VorticityDiagnostics {
    /// Curl at the particles, on the seed lattice.
    pub lagrangian: VectorField,
    /// The same, interpolated multilinearly onto the requested grid. Nodes the
    /// deformed mesh does not cover hold zero.
    pub eulerian: VectorField,
    pub covered: Vec<bool>,
}

impl VorticityDiagnostics {
    pub fn max_abs(&self) -> f64 {
        self.lagrangian.max_abs()
    }

    pub fn coverage(&self) -> f64 {
        self.covered.iter().filter(|&&c| c).count() as f64 / self.covered.len().max(1) as f64
    }
}

/// Lagrangian vorticity plus its interpolation onto `grid`, which must have
/// the lattice's dimension.
pub fn vorticity_diagnostics(e: &Ensemble, grid: &Grid) -> Result<VorticityDiagnostics> {
    let lag = lagrangian_vorticity(e)?;
    let lat = lag.grid.clone();
    let d = lat.dim();
    if grid.dim() != d {
        return Err(Error::InvalidInput(format!(
            "diagnostic grid is {}D but the seed lattice is {d}D",
            grid.dim()
        )));
    }
    let nc = lag.ncomp();
    let mut eul = vec![vec![0.0; grid.len()]; nc];
    let mut covered = vec![false; grid.len()];
    let corners = 1usize << d;
    let cells: Vec<usize> = (0..lat.len())
        .filter(|&k| {
            let idx = lat.multi_index(k);
            (0..d).all(|a| idx[a] + 1 < lat.count(a))
        })
        .collect();
    for &base in &cells {
        let nodes: Vec<usize> = (0..corners)
            .map(|c| {
                base + (0..d)
                    .filter(|a| c >> a & 1 == 1)
                    .map(|a| lat.stride(a))
                    .sum::<usize>()
            })
            .collect();
        let xs: Vec<[f64; 3]> = nodes.iter().map(|&k| e.particles[k].q).collect();
        // grid index range of the cell's bounding box
        let mut range = [(0usize, 0usize); 3];
        let mut empty = false;
        for a in 0..d {
            let lo = xs.iter().map(|x| x[a]).fold(f64::INFINITY, f64::min);
            let hi = xs.iter().map(|x| x[a]).fold(f64::NEG_INFINITY, f64::max);
            let ax = grid.axis(a);
            let h = ax.spacing();
            let i0 = ((lo - ax.lo) / h).ceil().max(0.0);
            let i1 = ((hi - ax.lo) / h).floor().min((ax.count - 1) as f64);
            if i1 < i0 {
                empty = true;
                break;
            }
            range[a] = (i0 as usize, i1 as usize);
        }
        if empty {
            continue;
        }
        let mut idx = [0usize; 3];
        let total: usize = (0..d).map(|a| range[a].1 - range[a].0 + 1).product();
        for m in 0..total {
            let mut r = m;
            for a in (0..d).rev() {
                let w = range[a].1 - range[a].0 + 1;
                idx[a] = range[a].0 + r % w;
                r /= w;
            }
            let flat = grid.index(&idx[..d]);
            let pt = grid.point(flat);
            if let Some(u) = local_coords(&xs, &pt[..d], d) {
                let w = weights(&u, d);
                for c in 0..nc {
                    eul[c][flat] = nodes
                        .iter()
                        .zip(&w)
                        .map(|(&k, wk)| wk * lag.components[c][k])
                        .sum();
                }
                covered[flat] = true;
            }
        }
    }
    Ok(VorticityDiagnostics {
        lagrangian: lag,
        eulerian: VectorField::new(grid.clone(), eul)?,
        covered,
    })
}

fn weights(u: &[f64; 3], d: usize) -> Vec<f64> {
    (0..1usize << d)
        .map(|c| {
            (0..d)
                .map(|a| if c >> a & 1 == 1 { u[a] } else { 1.0 - u[a] })
                .product()
        })
        .collect()
}

/// Newton solve for the multilinear cell coordinates of `x`; `None` if it is
/// outside the cell.
fn local_coords(xs: &[[f64; 3]], x: &[f64], d: usize) -> Option<[f64; 3]> {
    let mut u = [0.5; 3];
    for _ in 0..30 {
        let w = weights(&u, d);
        let mut r = [0.0; 3];
        let mut jac = [[0.0; 3]; 3];
        for (c, xc) in xs.iter().enumerate() {
            for i in 0..d {
                r[i] += w[c] * xc[i];
                for a in 0..d {
                    // ∂w_c/∂u_a
                    let dw: f64 = (0..d)
                        .map(|b| match (b == a, c >> b & 1 == 1) {
                            (true, true) => 1.0,
                            (true, false) => -1.0,
                            (false, true) => u[b],
                            (false, false) => 1.0 - u[b],
                        })
                        .product();
                    jac[i][a] += dw * xc[i];
                }
            }
        }
        for i in 0..d {
            r[i] -= x[i];
        }
        let inv = inverse(&jac, d).or_else(|| {
            // orientation of the local map may be reversed; flip and retry
            let mut neg = jac;
            neg.iter_mut().for_each(|row| row[0] = -row[0]);
            inverse(&neg, d).map(|mut m| {
                m[0].iter_mut().for_each(|v| *v = -*v);
                m
            })
        })?;
        let mut step = 0.0f64;
        for a in 0..d {
            let du: f64 = (0..d).map(|i| inv[a][i] * r[i]).sum();
            u[a] -= du;
            step = step.max(du.abs());
        }
        if step < 1e-13 {
            let tol = 1e-9;
            return (0..d).all(|a| u[a] >= -tol && u[a] <= 1.0 + tol).then(|| {
                let mut c = u;
                (0..d).for_each(|a| c[a] = c[a].clamp(0.0, 1.0));
                c
            });
        }
    }
    None
}

/// Residual of the space-time identity
/// `∂p_i/∂t + ∂H(q, p(q,t), t)/∂q_i = Σ_j q̇_j (∂p_j/∂q_i − ∂p_i/∂q_j)`
/// at the middle of three snapshots of the same seeded ensemble. The
/// Eulerian time derivative is recovered from the particle derivative as
/// `Dp/Dt − (∇p) q̇`. One component per lattice axis.
pub fn space_time_identity_residual(
    prev: &Ensemble,
    cur: &Ensemble,
    next: &Ensemble,
    spec: &HamiltonianSpec,
) -> Result<VectorField> {
    let g = lattice(cur)?.clone();
    if lattice(prev)? != &g || lattice(next)? != &g {
        return Err(Error::GridMismatch);
    }
    let dt = next.time - prev.time;
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::InvalidInput(
            "snapshots must be at distinct times".into(),
        ));
    }
    let d = g.dim();
    let n = g.len();
    let (inv, grad) = mesh_gradients(cur)?;
    let energy: Vec<f64> = cur
        .particles
        .iter()
        .map(|pt| spec.energy(pt.q, pt.p, cur.time))
        .collect();
    let dh_da: Vec<Vec<f64>> = (0..d).map(|a| ops::derivative(&g, &energy, a)).collect();
    let mut comps = vec![vec![0.0; n]; d];
    for k in 0..n {
        let pt = &cur.particles[k];
        let v = spec.velocity(pt.q, pt.p, cur.time);
        let gp = &grad[k];
        for i in 0..d {
            let material = (next.particles[k].p[i] - prev.particles[k].p[i]) / dt;
            let advect: f64 = (0..d).map(|j| gp[i][j] * v[j]).sum();
            let dh: f64 = (0..d).map(|a| dh_da[a][k] * inv[k][a][i]).sum();
            let rhs: f64 = (0..d).map(|j| v[j] * (gp[j][i] - gp[i][j])).sum();
            comps[i][k] = material - advect + dh - rhs;
        }
    }
    VectorField::new(g, comps)
}
