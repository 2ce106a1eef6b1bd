//! Gradient plus solenoidal splitting of vector fields.
//!
//! `f = ∇φ + t` where `φ` minimizes `½∫(∇φ − f)² dV`. The minimizer satisfies
//! `∇²φ = ∇·f` with `(∇φ − f)·n̂ = 0` on the boundary, so `t` is divergence-free,
//! tangential to the boundary, and orthogonal to every gradient. The solenoidal
//! part is `t = curl λ` with `∇²λ = −curl f` and `∇·λ = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::ops;
use crate::poisson::{self, SolveReport, SolverConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `‖∇φ + t − f‖ / ‖f‖`.
    pub reconstruction_error: f64,
    /// `‖∇φ + curl λ − f‖ / ‖f‖`, i.e. the reconstruction through the vector potential.
    pub potential_reconstruction_error: f64,
    /// `max |∇·t|`.
    pub divergence_defect: f64,
    /// `max |t·n̂|` over the boundary.
    pub boundary_normal_defect: f64,
    /// `max |(curl λ − t) × n̂|` over the boundary.
    pub boundary_tangential_defect: f64,
    /// `max |curl t − curl f|` over interior nodes.
    pub curl_defect: f64,
    /// `|⟨t, ∇φ⟩| / (‖t‖ ‖∇φ‖)`, zero when either part vanishes.
    pub orthogonality_defect: f64,
    /// `max |∇·λ|` (3D only).
    pub gauge_defect: f64,
    pub phi_solve: SolveReport,
    pub lambda_solve: SolveReport,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub phi: ScalarField,
    /// Vector potential: three components in 3D, the stream function in 2D.
    pub lambda: VectorField,
    pub t: VectorField,
    pub diagnostics: Diagnostics,
}

impl Decomposition {
    pub fn grid(&self) -> &Grid {
        &self.phi.grid
    }
}

/// Splits `f` into `∇φ + t`.
pub fn decompose(f: &VectorField, cfg: &SolverConfig) -> Result<Decomposition> {
    let g = &f.grid;
    if !(2..=3).contains(&g.dim()) || f.ncomp() != g.dim() {
        return Err(Error::InvalidInput(format!(
            "decomposition needs a 2D or 3D vector field, got {}D with {} components",
            g.dim(),
            f.ncomp()
        )));
    }
    f.check_finite()?;
    // the flux-consistent divergence satisfies the discrete Gauss theorem exactly
    let source = ops::flux_divergence(f)?;
    let neumann = ops::boundary_normal_component(f)?;
    let (phi, phi_solve) = poisson::solve_scalar_neumann(&source, &neumann, cfg)?;
    let grad_phi = ops::gradient(&phi)?;
    let t = f.sub(&grad_phi)?;
    let curl_f = ops::curl(f)?;
    let (lambda, lambda_solve) = poisson::solve_vector_poisson(&curl_f, Some(&t), cfg)?;

    let fnorm = ops::l2_norm(f);
    let rel = |v: &VectorField| {
        if fnorm > 0.0 {
            ops::l2_norm(v) / fnorm
        } else {
            ops::l2_norm(v)
        }
    };
    let reconstruction_error = rel(&grad_phi.add(&t)?.sub(f)?);
    let potential_reconstruction_error =
        rel(&grad_phi.add(&poisson::potential_curl(&lambda)?)?.sub(f)?);
    let divergence_defect = ops::divergence(&t)?.max_abs();
    let boundary_normal_defect = ops::boundary_normal_component(&t)?.max_abs();
    let curl_t = ops::curl(&t)?;
    let curl_defect = interior_max(&curl_t.sub(&curl_f)?);
    let tn = ops::l2_norm(&t);
    let gn = ops::l2_norm(&grad_phi);
    let orthogonality_defect = if tn > 0.0 && gn > 0.0 {
        ops::inner_product(&t, &grad_phi)?.abs() / (tn * gn)
    } else {
        0.0
    };
    let gauge_defect = if g.dim() == 3 {
        ops::divergence(&lambda)?.max_abs()
    } else {
        0.0
    };
    let diagnostics = Diagnostics {
        reconstruction_error,
        potential_reconstruction_error,
        divergence_defect,
        boundary_normal_defect,
        boundary_tangential_defect: lambda_solve.boundary_defect.unwrap_or(0.0),
        curl_defect,
        orthogonality_defect,
        gauge_defect,
        phi_solve,
        lambda_solve,
    };
    Ok(Decomposition {
        phi,
        lambda,
        t,
        diagnostics,
    })
}

fn interior_max(v: &VectorField) -> f64 {
    let g = &v.grid;
    (0..g.len())
        .filter(|&i| !g.is_boundary(i))
        .map(|i| v.components.iter().map(|c| c[i].abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

/// `½ ∫ (∇φ − f)² dV`.
pub fn best_approximation_error(f: &VectorField, phi: &ScalarField) -> Result<f64> {
    let r = ops::gradient(phi)?.sub(f)?;
    Ok(0.5 * ops::inner_product(&r, &r)?)
}

/// `|⟨t, ∇ψ⟩|` for every probe `ψ`.
pub fn verify_orthogonality(dec: &Decomposition, probes: &[ScalarField]) -> Result<Vec<f64>> {
    probes
        .iter()
        .map(|p| {
            let gp = ops::gradient(p)?;
            Ok(ops::inner_product(&dec.t, &gp)?.abs())
        })
        .collect()
}

/// Seeded random trigonometric polynomials: each probe is a sum of three modes
/// `a·cos(k·x + θ)` with integer wave numbers up to 2 per unit extent.
pub fn random_trig_probes(grid: &Grid, count: usize, seed: u64) -> Vec<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let extents: Vec<f64> = grid.axes().iter().map(|a| a.hi - a.lo).collect();
    (0..count)
        .map(|_| {
            let modes: Vec<(f64, Vec<f64>, f64)> = (0..3)
                .map(|_| {
                    let amp = rng.gen_range(-1.0..1.0);
                    let k = (0..d)
                        .map(|a| rng.gen_range(0..=2) as f64 * std::f64::consts::PI / extents[a])
                        .collect();
                    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
                    (amp, k, phase)
                })
                .collect();
            ScalarField::from_fn(grid, |p| {
                modes
                    .iter()
                    .map(|(a, k, th)| {
                        let arg: f64 = k.iter().zip(p).map(|(k, x)| k * x).sum();
                        a * (arg + th).cos()
                    })
                    .sum()
            })
        })
        .collect()
}

/// `Φ_ij = Λ_ij + δ_ij φ` with `Λ` antisymmetric, so that `f_i = Σ_j ∂_j Φ_ij`.
#[derive(Clone, Debug)]
pub struct TensorPotential {
    pub grid: Grid,
    pub phi: ScalarField,
    /// Upper-triangle entries `Λ_ij`, `i < j`, in row-major pair order.
    pub antisymmetric: Vec<((usize, usize), Vec<f64>)>,
}

impl TensorPotential {
    pub fn lambda(&self, i: usize, j: usize) -> Vec<f64> {
        if i == j {
            return vec![0.0; self.grid.len()];
        }
        let (a, b, sign) = if i < j { (i, j, 1.0) } else { (j, i, -1.0) };
        let v = &self
            .antisymmetric
            .iter()
            .find(|(ij, _)| *ij == (a, b))
            .expect("pair present")
            .1;
        v.iter().map(|x| sign * x).collect()
    }

    /// `Φ_ij` at every node.
    pub fn component(&self, i: usize, j: usize) -> Vec<f64> {
        let mut c = self.lambda(i, j);
        if i == j {
            c.iter_mut()
                .zip(&self.phi.values)
                .for_each(|(c, p)| *c += p);
        }
        c
    }

    /// `Σ_j ∂_j Φ_ij`.
    pub fn divergence(&self) -> VectorField {
        let d = self.grid.dim();
        let components = (0..d)
            .map(|i| {
                let mut acc = vec![0.0; self.grid.len()];
                for j in 0..d {
                    let dj = ops::derivative(&self.grid, &self.component(i, j), j);
                    acc.iter_mut().zip(dj).for_each(|(a, v)| *a += v);
                }
                acc
            })
            .collect();
        VectorField {
            grid: self.grid.clone(),
            components,
        }
    }
}

/// Tensor potential of `f`. In 2D `Λ_12` is the stream function; in 3D
/// `Λ_ij = ε_ijk λ_k` from the vector potential.
pub fn tensor_potential(f: &VectorField, cfg: &SolverConfig) -> Result<TensorPotential> {
    if f.grid.dim() == 1 {
        return Err(Error::InvalidInput(
            "a 1D field has no antisymmetric part; it is always a pure gradient".into(),
        ));
    }
    if f.grid.dim() != 2 {
        let dec = decompose(f, cfg)?;
        return Ok(tensor_potential_from(&dec));
    }
    // Vorticity at the box corners makes both the Neumann potential and the
    // Dirichlet stream function singular there, which caps the reconstruction
    // at first order in max norm. A polynomial stream function carrying the
    // bilinear interpolant of the corner vorticity is split off first; the
    // remainder is then curl-free at the corners and decomposes smoothly.
    let g = &f.grid;
    let psi_p = corner_stream_function(f)?;
    let rest = f.sub(&ops::rot2(&psi_p)?)?;
    let dec = decompose(&rest, cfg)?;
    let mut tp = tensor_potential_from(&dec);
    let l = &mut tp.antisymmetric[0].1;
    l.iter_mut().zip(&psi_p.values).for_each(|(a, b)| *a += b);
    debug_assert_eq!(tp.grid, *g);
    Ok(tp)
}

/// Polynomial `ψ` with `−∇²ψ` equal to the bilinear interpolant of the
/// corner values of `curl f` (2D only).
fn corner_stream_function(f: &VectorField) -> Result<ScalarField> {
    let g = &f.grid;
    let w = ops::curl(f)?.components.swap_remove(0);
    let (nx, ny) = (g.count(0), g.count(1));
    let (ax, ay) = (g.axis(0), g.axis(1));
    let (cx, cy) = (0.5 * (ax.lo + ax.hi), 0.5 * (ay.lo + ay.hi));
    let (hx, hy) = (0.5 * (ax.hi - ax.lo), 0.5 * (ay.hi - ay.lo));
    let c = |i: usize, j: usize| w[g.index(&[i, j])];
    let (w00, w10, w01, w11) = (c(0, 0), c(nx - 1, 0), c(0, ny - 1), c(nx - 1, ny - 1));
    // L(u, v) = a + b u + c v + d u v on [-1, 1]², u = (x - cx) / hx.
    let a = 0.25 * (w00 + w10 + w01 + w11);
    let b = 0.25 * (-w00 + w10 - w01 + w11) / hx;
    let cc = 0.25 * (-w00 - w10 + w01 + w11) / hy;
    let d = 0.25 * (w00 - w10 - w01 + w11) / (hx * hy);
    Ok(ScalarField::from_fn(g, |p| {
        let (x, y) = (p[0] - cx, p[1] - cy);
        -(a * (x * x + y * y) / 4.0
            + b * x * x * x / 6.0
            + cc * y * y * y / 6.0
            + d * (x * x * x * y + x * y * y * y) / 12.0)
    }))
}

pub fn tensor_potential_from(dec: &Decomposition) -> TensorPotential {
    let g = dec.grid().clone();
    let antisymmetric = match g.dim() {
        2 => vec![((0, 1), dec.lambda.components[0].clone())],
        _ => {
            let l = &dec.lambda.components;
            // Λ_01 = λ_2, Λ_02 = -λ_1, Λ_12 = λ_0
            vec![
                ((0, 1), l[2].clone()),
                ((0, 2), l[1].iter().map(|v| -v).collect()),
                ((1, 2), l[0].clone()),
            ]
        }
    };
    TensorPotential {
        grid: g,
        phi: dec.phi.clone(),
        antisymmetric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn pure_gradient_has_no_solenoidal_part() {
        let g = Grid::cube(2, 0.0, 1.0, 17).unwrap();
        let f = VectorField::from_fn(&g, |p| vec![2.0 * p[0], 2.0 * p[1]]);
        let dec = decompose(&f, &SolverConfig::default()).unwrap();
        assert!(dec.t.max_abs() < 1e-7, "{}", dec.t.max_abs());
        let ex = ScalarField::from_fn(&g, |p| p[0] * p[0] + p[1] * p[1]);
        let m = ex.mean();
        let err = dec.phi.zip_with(&ex, |a, b| a - (b - m)).unwrap().max_abs();
        assert!(err < 1e-7, "{err}");
        assert!(best_approximation_error(&f, &dec.phi).unwrap() < 1e-14);
    }

    #[test]
    fn zero_field() {
        let g = Grid::cube(2, 0.0, 1.0, 9).unwrap();
        let f = VectorField::zeros(&g, 2);
        let dec = decompose(&f, &SolverConfig::default()).unwrap();
        assert_eq!(best_approximation_error(&f, &dec.phi).unwrap(), 0.0);
        let probes = random_trig_probes(&g, 3, 1);
        assert!(verify_orthogonality(&dec, &probes)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn constant_probe_is_orthogonal() {
        let g = Grid::cube(2, -0.5, 0.5, 17).unwrap();
        let f = VectorField::from_fn(&g, |p| vec![-p[1], p[0]]);
        let dec = decompose(&f, &SolverConfig::default()).unwrap();
        let o = verify_orthogonality(&dec, &[ScalarField::constant(&g, 3.0)]).unwrap();
        assert_eq!(o[0], 0.0);
    }

    #[test]
    fn one_dimensional_tensor_rejected() {
        let g = Grid::cube(1, 0.0, 1.0, 9).unwrap();
        let f = VectorField::from_fn(&g, |p| vec![p[0]]);
        assert!(tensor_potential(&f, &SolverConfig::default()).is_err());
    }

    #[test]
    fn tensor_reconstruction_is_second_order() {
        let err = |n| {
            let g = Grid::cube(2, 0.0, 1.0, n).unwrap();
            let f = VectorField::from_fn(&g, |p| {
                vec![-p[1] * (1.0 + p[0] * p[0]), p[0] * (1.0 + p[1].powi(3))]
            });
            let tp = tensor_potential(&f, &SolverConfig::default()).unwrap();
            tp.divergence().sub(&f).unwrap().max_abs()
        };
        let ratio = err(17) / err(33);
        assert!((3.3..4.7).contains(&ratio), "{ratio}");
    }

    #[test]
    fn uniform_rotation_tensor_is_exact() {
        let g = Grid::cube(2, -0.5, 0.5, 17).unwrap();
        let f = VectorField::from_fn(&g, |p| vec![-p[1], p[0]]);
        let tp = tensor_potential(&f, &SolverConfig::default()).unwrap();
        assert!(tp.divergence().sub(&f).unwrap().max_abs() < 1e-12);
        let lap = ops::laplacian(&ScalarField::new(g.clone(), tp.lambda(0, 1)).unwrap()).unwrap();
        assert!(lap.values.iter().all(|v| (v + 2.0).abs() < 1e-9));
    }

    #[test]
    fn three_d_tensor_is_antisymmetric() {
        let g = Grid::cube(3, -0.5, 0.5, 9).unwrap();
        let f = VectorField::from_fn(&g, |p| vec![-p[1], p[0], 0.1 * p[0]]);
        let tp = tensor_potential(&f, &SolverConfig::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let a = tp.lambda(i, j);
                let b = tp.lambda(j, i);
                assert!(a.iter().zip(&b).all(|(x, y)| x == &-y));
            }
        }
    }

    #[test]
    fn probes_are_reproducible() {
        let g = Grid::cube(2, 0.0, 1.0, 9).unwrap();
        assert_eq!(random_trig_probes(&g, 2, 7), random_trig_probes(&g, 2, 7));
        assert_ne!(random_trig_probes(&g, 1, 7), random_trig_probes(&g, 1, 8));
    }
}
