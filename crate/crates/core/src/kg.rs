//! Klein-Gordon fields in 1+1 dimensions and their Madelung form.
//!
//! Conventions: grid axis 0 is `t`, axis 1 is `x`; `x⁰ = ct`, metric
//! `diag(+, −)`, so `∂_0 = (1/c)∂_t` and `∂_1 = ∂_x`. Lower-index vectors are
//! stored; [`raise`] is the only place an index moves.
//!
//! With `Ψ = √ρ e^{iS/ħ}` and `k_μ = −∂_μS − (q/c)A_μ`, the field equation
//! `(iħ∂_μ − (q/c)A_μ)(iħ∂^μ − (q/c)A^μ)Ψ = m²c²Ψ` splits into
//!
//! ```text
//! m²c² − k·k + ħ²(□√ρ)/√ρ = 0      (quantum Hamilton-Jacobi)
//! ∂^μ(ρ k_μ) = 0                    (continuity)
//! ```
//!
//! A four-momentum `k + ω` of fixed length `mc` is completed by an auxiliary
//! field `ω_μ`, whose source `∂^μ(ρω_μ)` measures local creation of particles.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField, VectorField};
use crate::ops;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    pub m: f64,
    pub c: f64,
    pub q: f64,
    pub hbar: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            m: 1.0,
            c: 1.0,
            q: 0.0,
            hbar: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("m", self.m), ("c", self.c), ("hbar", self.hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !self.q.is_finite() {
            return Err(Error::InvalidInput("charge must be finite".into()));
        }
        Ok(())
    }

    /// Angular frequency of a free plane wave with wavenumber `k`.
    pub fn frequency(&self, k: f64) -> f64 {
        let kc = self.m * self.c / self.hbar;
        self.c * (k * k + kc * kc).sqrt()
    }
}

/// `v^μ` from `v_μ`.
pub fn raise(v: [f64; 2]) -> [f64; 2] {
    [v[0], -v[1]]
}

/// `a_μ b^μ` for two lower-index vectors.
pub fn minkowski_dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    let b = raise(b);
    a[0] * b[0] + a[1] * b[1]
}

fn check_spacetime(grid: &Grid) -> Result<()> {
    if grid.dim() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected a 1+1 space-time grid (t, x), got {} axes",
            grid.dim()
        )));
    }
    Ok(())
}

/// Complex field `Ψ` on a (t, x) grid plus an external potential `A_μ`
/// (lower index).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub potential: [Vec<f64>; 2],
}

impl ComplexField {
    pub fn new(grid: Grid, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        check_spacetime(&grid)?;
        let n = grid.len();
        for v in [&re, &im] {
            if v.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: v.len(),
                });
            }
            crate::grid::check_finite(v)?;
        }
        Ok(Self {
            grid,
            re,
            im,
            potential: [vec![0.0; n], vec![0.0; n]],
        })
    }

    pub fn with_potential(mut self, a0: Vec<f64>, a1: Vec<f64>) -> Result<Self> {
        let n = self.grid.len();
        for v in [&a0, &a1] {
            if v.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    got: v.len(),
                });
            }
            crate::grid::check_finite(v)?;
        }
        self.potential = [a0, a1];
        Ok(self)
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let (re, im): (Vec<f64>, Vec<f64>) = (0..grid.len())
            .map(|n| {
                let p = grid.point(n);
                let z = f(p[0], p[1]);
                (z.re, z.im)
            })
            .unzip();
        Self::new(grid.clone(), re, im)
    }

    pub fn value(&self, n: usize) -> Complex64 {
        Complex64::new(self.re[n], self.im[n])
    }

    pub fn has_potential(&self) -> bool {
        self.potential.iter().any(|c| c.iter().any(|&v| v != 0.0))
    }

    pub fn density(&self) -> Vec<f64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(a, b)| a * a + b * b)
            .collect()
    }

    /// Components `re, im` followed by `A_0, A_1` when a potential is set.
    pub fn to_components(&self) -> Vec<Vec<f64>> {
        let mut c = vec![self.re.clone(), self.im.clone()];
        if self.has_potential() {
            c.extend(self.potential.iter().cloned());
        }
        c
    }

    pub fn from_components(grid: Grid, mut comps: Vec<Vec<f64>>) -> Result<Self> {
        match comps.len() {
            2 => {
                let im = comps.pop().unwrap();
                let re = comps.pop().unwrap();
                Self::new(grid, re, im)
            }
            4 => {
                let a1 = comps.pop().unwrap();
                let a0 = comps.pop().unwrap();
                let im = comps.pop().unwrap();
                let re = comps.pop().unwrap();
                Self::new(grid, re, im)?.with_potential(a0, a1)
            }
            k => Err(Error::InvalidInput(format!(
                "a complex field has 2 or 4 components, got {k}"
            ))),
        }
    }
}

/// `e^{i(kx − Ωt)}` with the free dispersion relation.
pub fn make_plane_wave(k: f64, consts: &PhysicalConstants, grid: &Grid) -> Result<ComplexField> {
    make_superposition(&[(1.0, k)], consts, grid)
}

/// `Σ a_j e^{i(k_j x − Ω_j t)}`.
pub fn make_superposition(
    waves: &[(f64, f64)],
    consts: &PhysicalConstants,
    grid: &Grid,
) -> Result<ComplexField> {
    consts.validate()?;
    check_spacetime(grid)?;
    if waves.is_empty() {
        return Err(Error::InvalidInput(
            "superposition needs at least one wave".into(),
        ));
    }
    if waves.iter().any(|(a, k)| !(a.is_finite() && k.is_finite())) {
        return Err(Error::InvalidInput(
            "wave amplitudes and numbers must be finite".into(),
        ));
    }
    let w: Vec<(f64, f64, f64)> = waves
        .iter()
        .map(|&(a, k)| (a, k, consts.frequency(k)))
        .collect();
    ComplexField::from_fn(grid, |t, x| {
        w.iter()
            .map(|&(a, k, om)| Complex64::from_polar(a, k * x - om * t))
            .sum()
    })
}

fn d_mu(grid: &Grid, v: &[f64], mu: usize, c: f64) -> Vec<f64> {
    let d = ops::derivative(grid, v, mu);
    if mu == 0 {
        d.into_iter().map(|x| x / c).collect()
    } else {
        d
    }
}

fn d2_mu(grid: &Grid, v: &[f64], mu: usize, c: f64) -> Vec<f64> {
    let d = ops::second_derivative(grid, v, mu);
    if mu == 0 {
        d.into_iter().map(|x| x / (c * c)).collect()
    } else {
        d
    }
}

/// Pointwise `|(iħ∂ − (q/c)A)² Ψ − m²c²Ψ|` from grid derivatives of the
/// real and imaginary parts. Second order; used for dispersion checks and
/// wherever the polar form is unavailable.
pub fn kg_residual_cartesian(f: &ComplexField, consts: &PhysicalConstants) -> Result<ScalarField> {
    consts.validate()?;
    let g = &f.grid;
    let (c, hb, qc) = (consts.c, consts.hbar, consts.q / consts.c);
    let n = g.len();
    let dd = |v: &[f64], mu| d2_mu(g, v, mu, c);
    let d1 = |v: &[f64], mu| d_mu(g, v, mu, c);
    let box_re: Vec<f64> = dd(&f.re, 0)
        .iter()
        .zip(dd(&f.re, 1))
        .map(|(a, b)| a - b)
        .collect();
    let box_im: Vec<f64> = dd(&f.im, 0)
        .iter()
        .zip(dd(&f.im, 1))
        .map(|(a, b)| a - b)
        .collect();
    let mut out = Vec::with_capacity(n);
    let with_a = f.has_potential() && consts.q != 0.0;
    let (dre, dim, div_a) = if with_a {
        let a_up = [
            f.potential[0].clone(),
            f.potential[1].iter().map(|v| -v).collect::<Vec<_>>(),
        ];
        let div: Vec<f64> = d1(&a_up[0], 0)
            .iter()
            .zip(d1(&a_up[1], 1))
            .map(|(a, b)| a + b)
            .collect();
        (
            [d1(&f.re, 0), d1(&f.re, 1)],
            [d1(&f.im, 0), d1(&f.im, 1)],
            div,
        )
    } else {
        Default::default()
    };
    for i in 0..n {
        let psi = f.value(i);
        let boxed = Complex64::new(box_re[i], box_im[i]);
        let mut r = -hb * hb * boxed - consts.m * consts.m * c * c * psi;
        if with_a {
            let a = [f.potential[0][i], f.potential[1][i]];
            let au = raise(a);
            let grad = [
                Complex64::new(dre[0][i], dim[0][i]),
                Complex64::new(dre[1][i], dim[1][i]),
            ];
            let a_dot_grad = au[0] * grad[0] + au[1] * grad[1];
            r += -Complex64::i() * hb * qc * (div_a[i] * psi + 2.0 * a_dot_grad)
                + qc * qc * minkowski_dot(a, a) * psi;
        }
        out.push(r.norm());
    }
    ScalarField::new(g.clone(), out)
}

/// Madelung decomposition of a field together with the mask of points where
/// it is not trusted.
#[derive(Clone, Debug)]
pub struct MadelungState {
    pub grid: Grid,
    pub consts: PhysicalConstants,
    pub rho: ScalarField,
    /// Action, `ħ` times the unwrapped phase.
    pub s: ScalarField,
    /// `k_μ = −∂_μS − (q/c)A_μ`, lower index.
    pub k: VectorField,
    /// `ω_μ`, lower index; zero until [`MadelungState::set_omega`].
    pub omega: VectorField,
    /// `j^μ = ρ (k^μ + ω^μ)/(mc)`.
    pub current: VectorField,
    /// Points excluded from every residual: low density, phase jumps across
    /// nodes, and everything whose stencils reach those.
    pub mask: Vec<bool>,
    /// Subset of `mask` flagged directly, before stencil widening.
    pub node_mask: Vec<bool>,
    /// `∂_ν k_μ` as `[ν][μ]`, from second differences of `S` so that no
    /// first difference is differenced again along the same axis.
    dk: [[Vec<f64>; 2]; 2],
    /// Set when `ω = α k`; derivatives of `ω` then follow by the chain rule.
    alpha: Option<Vec<f64>>,
}

/// Points with density below this fraction of the maximum count as nodes.
pub const DENSITY_FLOOR: f64 = 1e-12;
/// Wrapped phase increments between neighbours above this are treated as a
/// node crossing rather than smooth phase change.
pub const PHASE_JUMP: f64 = PI / 2.0;

fn wrap(d: f64) -> f64 {
    d - 2.0 * PI * (d / (2.0 * PI)).round()
}

/// Grows `mask` by the footprint of the derivative stencils along each axis.
fn widen(grid: &Grid, mask: &[bool]) -> Vec<bool> {
    let mut out = mask.to_vec();
    for a in 0..grid.dim() {
        let (n, st) = (grid.count(a), grid.stride(a));
        for flat in 0..grid.len() {
            let i = grid.multi_index(flat)[a];
            let base = flat - i * st;
            let range = if i == 0 {
                0..n.min(4)
            } else if i == n - 1 {
                n.saturating_sub(4)..n
            } else {
                i - 1..i + 2
            };
            if range.into_iter().any(|j| mask[base + j * st]) {
                out[flat] = true;
            }
        }
    }
    out
}

pub fn madelung(f: &ComplexField, consts: &PhysicalConstants) -> Result<MadelungState> {
    consts.validate()?;
    let g = &f.grid;
    let (nt, nx) = (g.count(0), g.count(1));
    let n = g.len();
    let rho = f.density();
    let floor = DENSITY_FLOOR * rho.iter().cloned().fold(0.0, f64::max);
    let theta: Vec<f64> = f.im.iter().zip(&f.re).map(|(b, a)| b.atan2(*a)).collect();
    let at = |i: usize, j: usize| i * nx + j;

    let mut node: Vec<bool> = rho.iter().map(|&r| r <= floor).collect();
    for i in 0..nt {
        for j in 0..nx {
            for (ii, jj) in [(i + 1, j), (i, j + 1)] {
                if ii < nt
                    && jj < nx
                    && wrap(theta[at(ii, jj)] - theta[at(i, j)]).abs() > PHASE_JUMP
                {
                    node[at(i, j)] = true;
                    node[at(ii, jj)] = true;
                }
            }
        }
    }

    // unwrap each row in x, one segment between masked points at a time
    let mut phase = theta.clone();
    let mut segments: Vec<(usize, usize, usize)> = Vec::new(); // (row, start, end)
    for i in 0..nt {
        let mut j = 0;
        while j < nx {
            if node[at(i, j)] {
                j += 1;
                continue;
            }
            let start = j;
            while j + 1 < nx && !node[at(i, j + 1)] {
                phase[at(i, j + 1)] = phase[at(i, j)] + wrap(theta[at(i, j + 1)] - theta[at(i, j)]);
                j += 1;
            }
            segments.push((i, start, j));
            j += 1;
        }
    }
    // stitch segments to the previous row through their first clean link
    for &(i, s, e) in &segments {
        if i == 0 {
            continue;
        }
        if let Some(j) = (s..=e).find(|&j| !node[at(i - 1, j)]) {
            let target = phase[at(i - 1, j)] + wrap(theta[at(i, j)] - theta[at(i - 1, j)]);
            let shift = 2.0 * PI * ((target - phase[at(i, j)]) / (2.0 * PI)).round();
            for j in s..=e {
                phase[at(i, j)] += shift;
            }
        }
    }
    // anything still discontinuous in t is ambiguous: mask it
    for i in 1..nt {
        for j in 0..nx {
            let (p, q) = (at(i - 1, j), at(i, j));
            if !node[p] && !node[q] {
                let jump = phase[q] - phase[p] - wrap(theta[q] - theta[p]);
                if jump.abs() > 1e-6 {
                    node[p] = true;
                    node[q] = true;
                }
            }
        }
    }

    let mask = widen(g, &widen(g, &node));
    let s: Vec<f64> = phase.iter().map(|p| consts.hbar * p).collect();
    let qc = consts.q / consts.c;
    let k: Vec<Vec<f64>> = (0..2)
        .map(|mu| {
            d_mu(g, &s, mu, consts.c)
                .into_iter()
                .zip(&f.potential[mu])
                .zip(&mask)
                .map(|((ds, a), &m)| if m { 0.0 } else { -ds - qc * a })
                .collect()
        })
        .collect();
    let c = consts.c;
    let hess = |nu: usize, mu: usize| -> Vec<f64> {
        if nu == mu {
            d2_mu(g, &s, mu, c)
        } else {
            d_mu(g, &d_mu(g, &s, mu, c), nu, c)
        }
    };
    let dk: [[Vec<f64>; 2]; 2] = std::array::from_fn(|nu| {
        std::array::from_fn(|mu| {
            let da = d_mu(g, &f.potential[mu], nu, c);
            hess(nu, mu)
                .into_iter()
                .zip(da)
                .zip(&mask)
                .map(|((h, a), &m)| if m { 0.0 } else { -h - qc * a })
                .collect()
        })
    });
    let mut st = MadelungState {
        grid: g.clone(),
        consts: *consts,
        rho: ScalarField::new(g.clone(), rho)?,
        s: ScalarField::new(g.clone(), s)?,
        k: VectorField::new(g.clone(), k)?,
        omega: VectorField::zeros(g, 2),
        current: VectorField::zeros(g, 2),
        mask,
        node_mask: node,
        dk,
        alpha: None,
    };
    st.update_current();
    debug_assert_eq!(st.rho.values.len(), n);
    Ok(st)
}

/// Solution of the normalization condition for `ω`.
#[derive(Clone, Debug)]
pub struct OmegaSolution {
    pub omega: VectorField,
    /// `ω = α k`.
    pub alpha: ScalarField,
    /// Masked points, including those where `k` is not time-like.
    pub mask: Vec<bool>,
}

impl MadelungState {
    fn k_at(&self, i: usize) -> [f64; 2] {
        [self.k.components[0][i], self.k.components[1][i]]
    }

    fn omega_at(&self, i: usize) -> [f64; 2] {
        [self.omega.components[0][i], self.omega.components[1][i]]
    }

    fn d(&self, v: &[f64], mu: usize) -> Vec<f64> {
        d_mu(&self.grid, v, mu, self.consts.c)
    }

    fn masked(&self, v: Vec<f64>) -> Result<ScalarField> {
        let v = v
            .into_iter()
            .zip(&self.mask)
            .map(|(x, &m)| if m { 0.0 } else { x })
            .collect();
        ScalarField::new(self.grid.clone(), v)
    }

    /// Fraction of grid points excluded.
    pub fn mask_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    /// `√ρ e^{iS/ħ}` for comparison with the input.
    pub fn reconstruct(&self) -> Vec<Complex64> {
        self.rho
            .values
            .iter()
            .zip(&self.s.values)
            .map(|(r, s)| Complex64::from_polar(r.sqrt(), s / self.consts.hbar))
            .collect()
    }

    fn update_current(&mut self) {
        let mc = self.consts.m * self.consts.c;
        for i in 0..self.grid.len() {
            let k = self.k_at(i);
            let w = self.omega_at(i);
            let p = raise([k[0] + w[0], k[1] + w[1]]);
            let r = self.rho.values[i];
            for mu in 0..2 {
                self.current.components[mu][i] = r * p[mu] / mc;
            }
        }
    }

    /// Installs the output of [`solve_omega`] and widens the mask to cover
    /// its excluded points.
    pub fn set_omega(&mut self, sol: &OmegaSolution) -> Result<()> {
        sol.omega.grid.same_shape(&self.grid)?;
        self.omega = sol.omega.clone();
        self.alpha = Some(sol.alpha.values.clone());
        self.mask = widen(&self.grid, &sol.mask);
        self.update_current();
        Ok(())
    }

    /// Installs an arbitrary two-component `ω_μ`.
    pub fn set_omega_field(&mut self, omega: VectorField) -> Result<()> {
        omega.grid.same_shape(&self.grid)?;
        if omega.ncomp() != 2 {
            return Err(Error::InvalidInput("ω needs two components".into()));
        }
        self.omega = omega;
        self.alpha = None;
        self.update_current();
        Ok(())
    }

    /// `∂^μ(ρ k_μ) = ∂^μρ k_μ + ρ ∂^μk_μ`.
    pub fn continuity_residual(&self) -> Result<ScalarField> {
        let (r0, r1) = (self.d(&self.rho.values, 0), self.d(&self.rho.values, 1));
        let v = (0..self.grid.len())
            .map(|i| {
                let k = self.k_at(i);
                let div_k = self.dk[0][0][i] - self.dk[1][1][i];
                r0[i] * k[0] - r1[i] * k[1] + self.rho.values[i] * div_k
            })
            .collect();
        self.masked(v)
    }

    /// `m²c² − k·k + ħ²(□√ρ)/√ρ`.
    pub fn quantum_hj_residual(&self) -> Result<ScalarField> {
        let c = self.consts;
        let amp = self.rho.map(f64::sqrt);
        let box_amp = ops::dalembertian(&amp, c.c)?;
        let mc2 = (c.m * c.c).powi(2);
        let v = (0..self.grid.len())
            .map(|i| {
                let k = self.k_at(i);
                let a = amp.values[i];
                let quantum = if a > 0.0 { box_amp.values[i] / a } else { 0.0 };
                mc2 - minkowski_dot(k, k) + c.hbar * c.hbar * quantum
            })
            .collect();
        self.masked(v)
    }

    /// Field-equation residual evaluated in polar form,
    /// `|√ρ·QHJ| + |ħ·CONT/√ρ|` combined in quadrature; equal to
    /// `|(iħ∂ − (q/c)A)²Ψ − m²c²Ψ|` for smooth `ρ, S`.
    pub fn kg_residual(&self) -> Result<ScalarField> {
        let qhj = self.quantum_hj_residual()?;
        let cont = self.continuity_residual()?;
        let v = (0..self.grid.len())
            .map(|i| {
                let amp = self.rho.values[i].sqrt();
                if amp == 0.0 {
                    return 0.0;
                }
                (amp * qhj.values[i]).hypot(self.consts.hbar * cont.values[i] / amp)
            })
            .collect();
        self.masked(v)
    }

    /// `(k + ω)·(k + ω) − m²c²`.
    pub fn normalization_residual(&self) -> Result<ScalarField> {
        let mc2 = (self.consts.m * self.consts.c).powi(2);
        let v = (0..self.grid.len())
            .map(|i| {
                let (k, w) = (self.k_at(i), self.omega_at(i));
                let p = [k[0] + w[0], k[1] + w[1]];
                minkowski_dot(p, p) - mc2
            })
            .collect();
        self.masked(v)
    }

    /// `∂_ν ω_μ` as `[ν][μ]`. For `ω = α k` this is
    /// `∂_να k_μ + α ∂_νk_μ` with `∂_να = −mc k^λ∂_νk_λ / (k·k)^{3/2}`;
    /// any other `ω` is differenced directly.
    fn omega_jacobian(&self) -> [[Vec<f64>; 2]; 2] {
        let n = self.grid.len();
        let Some(alpha) = &self.alpha else {
            return std::array::from_fn(|nu| {
                std::array::from_fn(|mu| self.d(&self.omega.components[mu], nu))
            });
        };
        let mc = self.consts.m * self.consts.c;
        let mut out: [[Vec<f64>; 2]; 2] = Default::default();
        for (nu, row) in out.iter_mut().enumerate() {
            for (mu, cell) in row.iter_mut().enumerate() {
                *cell = (0..n)
                    .map(|i| {
                        if self.mask[i] {
                            return 0.0;
                        }
                        let k = self.k_at(i);
                        let kk = minkowski_dot(k, k);
                        let dk_nu = [self.dk[nu][0][i], self.dk[nu][1][i]];
                        let dalpha = -mc * minkowski_dot(k, dk_nu) / kk.powf(1.5);
                        dalpha * k[mu] + alpha[i] * self.dk[nu][mu][i]
                    })
                    .collect();
            }
        }
        out
    }

    /// `P^μ(∂_μω_ν − ∂_νω_μ)` for `ν = 0, 1`, with `P = k + ω`. In 1+1D the
    /// only vorticity component is `F = ∂_0ω_1 − ∂_1ω_0`.
    pub fn vorticity_orthogonality_residual(&self) -> Result<VectorField> {
        let dw = self.omega_jacobian();
        let mut comps = vec![vec![0.0; self.grid.len()]; 2];
        for i in 0..self.grid.len() {
            if self.mask[i] {
                continue;
            }
            let f = dw[0][1][i] - dw[1][0][i];
            let (k, w) = (self.k_at(i), self.omega_at(i));
            let p = raise([k[0] + w[0], k[1] + w[1]]);
            comps[0][i] = -p[1] * f;
            comps[1][i] = p[0] * f;
        }
        VectorField::new(self.grid.clone(), comps)
    }

    /// `∂^μ ω_μ`, reported only.
    pub fn omega_divergence(&self) -> Result<ScalarField> {
        let dw = self.omega_jacobian();
        self.masked(dw[0][0].iter().zip(&dw[1][1]).map(|(a, b)| a - b).collect())
    }

    /// `∂^μ(ρ ω_μ)`, the local creation rate. Since `∂^μ(ρk_μ) = 0`, this is
    /// also `mc ∂_μ j^μ`.
    pub fn creation_rate(&self) -> Result<ScalarField> {
        let dw = self.omega_jacobian();
        let (r0, r1) = (self.d(&self.rho.values, 0), self.d(&self.rho.values, 1));
        let v = (0..self.grid.len())
            .map(|i| {
                let w = self.omega_at(i);
                r0[i] * w[0] - r1[i] * w[1] + self.rho.values[i] * (dw[0][0][i] - dw[1][1][i])
            })
            .collect();
        self.masked(v)
    }
}

/// Chooses `ω = α k` with `α = mc/√(k·k) − 1`, the smallest `ω` along `k`
/// that makes `k + ω` have length `mc`. Points where `k` is not time-like
/// are masked.
pub fn solve_omega(st: &MadelungState) -> Result<OmegaSolution> {
    let mc = st.consts.m * st.consts.c;
    let n = st.grid.len();
    let mut mask = st.mask.clone();
    let mut alpha = vec![0.0; n];
    let mut omega = vec![vec![0.0; n]; 2];
    for i in 0..n {
        if mask[i] {
            continue;
        }
        let k = st.k_at(i);
        let kk = minkowski_dot(k, k);
        if kk.is_nan() || kk <= 0.0 {
            mask[i] = true;
            continue;
        }
        let a = mc / kk.sqrt() - 1.0;
        alpha[i] = a;
        omega[0][i] = a * k[0];
        omega[1][i] = a * k[1];
    }
    Ok(OmegaSolution {
        omega: VectorField::new(st.grid.clone(), omega)?,
        alpha: ScalarField::new(st.grid.clone(), alpha)?,
        mask,
    })
}

/// Largest absolute value over unmasked points.
pub fn masked_max(values: &[f64], mask: &[bool]) -> f64 {
    values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| !m)
        .fold(0.0, |acc, (v, _)| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        Grid::new(vec![
            crate::grid::Axis::new(0.0, 2.0, n),
            crate::grid::Axis::new(0.0, 2.0 * PI, n),
        ])
        .unwrap()
    }

    #[test]
    fn dispersion_relation() {
        let c = PhysicalConstants::default();
        assert!((c.frequency(1.0) - 2f64.sqrt()).abs() < 1e-15);
        let w = make_plane_wave(0.0, &c, &grid(9)).unwrap();
        let g = &w.grid;
        for i in 0..g.len() {
            let t = g.point(i)[0];
            assert!((w.value(i) - Complex64::from_polar(1.0, -t)).norm() < 1e-15);
        }
    }

    #[test]
    fn plane_wave_is_an_eigenstate() {
        let c = PhysicalConstants {
            m: 1.3,
            c: 0.8,
            q: 0.0,
            hbar: 0.9,
        };
        let f = make_plane_wave(1.0, &c, &grid(65)).unwrap();
        let st = madelung(&f, &c).unwrap();
        assert_eq!(st.mask_fraction(), 0.0);
        let om = c.frequency(1.0);
        for i in 0..f.grid.len() {
            assert!((st.k.components[0][i] - c.hbar * om / c.c).abs() < 1e-10);
            assert!((st.k.components[1][i] + c.hbar).abs() < 1e-10);
        }
        assert!(st.continuity_residual().unwrap().max_abs() < 1e-10);
        assert!(st.quantum_hj_residual().unwrap().max_abs() < 1e-10);
        assert!(st.kg_residual().unwrap().max_abs() < 1e-10);
        let sol = solve_omega(&st).unwrap();
        assert!(sol.omega.max_abs() < 1e-10);
    }

    #[test]
    fn cartesian_residual_is_second_order() {
        let c = PhysicalConstants::default();
        let r = |n| {
            kg_residual_cartesian(&make_plane_wave(1.0, &c, &grid(n)).unwrap(), &c)
                .unwrap()
                .max_abs()
        };
        let ratio = r(33) / r(65);
        assert!((ratio - 4.0).abs() < 0.5, "{ratio}");
        let zero = ComplexField::new(grid(9), vec![0.0; 81], vec![0.0; 81]).unwrap();
        assert_eq!(kg_residual_cartesian(&zero, &c).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn residual_detects_noise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = grid(33);
        let re = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let im = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f = ComplexField::new(g, re, im).unwrap();
        assert!(
            kg_residual_cartesian(&f, &PhysicalConstants::default())
                .unwrap()
                .max_abs()
                > 1.0
        );
    }

    #[test]
    fn real_positive_field_has_no_phase() {
        let c = PhysicalConstants {
            q: 0.5,
            ..Default::default()
        };
        let g = grid(17);
        let f = ComplexField::from_fn(&g, |t, x| Complex64::new(2.0 + (x + t).sin(), 0.0)).unwrap();
        let a0: Vec<f64> = (0..g.len()).map(|i| g.point(i)[1]).collect();
        let f = f.with_potential(a0.clone(), vec![0.25; g.len()]).unwrap();
        let st = madelung(&f, &c).unwrap();
        assert_eq!(st.s.max_abs(), 0.0);
        for i in 0..g.len() {
            assert!((st.k.components[0][i] + 0.5 * a0[i]).abs() < 1e-15);
            assert!((st.k.components[1][i] + 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn gauge_covariant_residual_with_potential() {
        // a constant potential shifts k by −(q/c)A, so e^{i(kx − Ωt)} solves
        // the equation with the shifted dispersion relation
        let c = PhysicalConstants {
            q: 1.0,
            ..Default::default()
        };
        let (a0, a1, k): (f64, f64, f64) = (0.3, -0.2, 1.0);
        let g = grid(33);
        let kx = -k - a1; // k_1 = −ħk − (q/c)A_1
        let om = (1.0 + kx * kx).sqrt() + a0; // k_0 = ħΩ/c − (q/c)A_0
        let f = ComplexField::from_fn(&g, |t, x| Complex64::from_polar(1.0, k * x - om * t))
            .unwrap()
            .with_potential(vec![a0; g.len()], vec![a1; g.len()])
            .unwrap();
        let st = madelung(&f, &c).unwrap();
        assert!(st.quantum_hj_residual().unwrap().max_abs() < 1e-10);
        let e1 = kg_residual_cartesian(&f, &c).unwrap().max_abs();
        let f2 =
            ComplexField::from_fn(&grid(65), |t, x| Complex64::from_polar(1.0, k * x - om * t))
                .unwrap()
                .with_potential(vec![a0; 65 * 65], vec![a1; 65 * 65])
                .unwrap();
        let e2 = kg_residual_cartesian(&f2, &c).unwrap().max_abs();
        assert!((e1 / e2 - 4.0).abs() < 0.5, "{e1} {e2}");
    }

    #[test]
    fn standing_wave_nodes_are_masked() {
        let c = PhysicalConstants::default();
        let f = make_superposition(&[(1.0, 1.0), (1.0, -1.0)], &c, &grid(129)).unwrap();
        let st = madelung(&f, &c).unwrap();
        let frac = st.mask_fraction();
        assert!(frac > 0.0 && frac < 0.2, "{frac}");
        // nodes at x = π/2, 3π/2 are masked
        let g = &st.grid;
        for i in 0..g.len() {
            let x = g.point(i)[1];
            let near_node = [PI / 2.0, 1.5 * PI].iter().any(|n| (x - n).abs() < 0.03);
            if near_node {
                assert!(st.mask[i]);
            }
        }
        // away from nodes the decomposition reproduces the field
        let back = st.reconstruct();
        for i in 0..g.len() {
            if !st.mask[i] {
                assert!((back[i] - f.value(i)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn two_wave_residuals_are_second_order() {
        let c = PhysicalConstants::default();
        let g = |n| {
            Grid::new(vec![
                crate::grid::Axis::new(0.0, 2.0 * PI, n),
                crate::grid::Axis::new(0.0, 2.0 * PI, n),
            ])
            .unwrap()
        };
        let norms = |n| {
            let f = make_superposition(&[(1.0, 1.0), (0.5, 2.0)], &c, &g(n)).unwrap();
            let mut st = madelung(&f, &c).unwrap();
            st.set_omega(&solve_omega(&st).unwrap()).unwrap();
            assert_eq!(st.mask_fraction(), 0.0);
            assert!(st.normalization_residual().unwrap().max_abs() < 1e-12);
            [
                st.kg_residual().unwrap().max_abs(),
                st.continuity_residual().unwrap().max_abs(),
                st.quantum_hj_residual().unwrap().max_abs(),
            ]
        };
        let (a, b) = (norms(65), norms(129));
        for k in 0..3 {
            assert!((a[k] / b[k] - 4.0).abs() < 0.5, "{k}: {} {}", a[k], b[k]);
        }
    }

    #[test]
    fn standing_wave_creates_nothing_net() {
        let c = PhysicalConstants::default();
        let period = 2.0 * PI / c.frequency(1.0);
        let g = Grid::new(vec![
            crate::grid::Axis::new(0.0, period, 65),
            crate::grid::Axis::new(0.0, 2.0 * PI, 65),
        ])
        .unwrap();
        let f = make_superposition(&[(1.0, 1.0), (1.0, -1.0)], &c, &g).unwrap();
        let mut st = madelung(&f, &c).unwrap();
        st.set_omega(&solve_omega(&st).unwrap()).unwrap();
        // ω is a uniform multiple of k = (ħΩ/c, 0) and ρ is static
        assert!(st.creation_rate().unwrap().max_abs() < 1e-9);
        assert!(st.continuity_residual().unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn scaled_momentum_gives_uniform_alpha() {
        let c = PhysicalConstants::default();
        let f = make_plane_wave(0.7, &c, &grid(17)).unwrap();
        let mut st = madelung(&f, &c).unwrap();
        st.k = st.k.scale(0.9);
        let sol = solve_omega(&st).unwrap();
        let want = 1.0 / 0.9 - 1.0;
        assert!(sol.alpha.values.iter().all(|a| (a - want).abs() < 1e-12));
        st.set_omega(&sol).unwrap();
        assert!(st.normalization_residual().unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn space_like_momentum_is_masked() {
        let c = PhysicalConstants::default();
        let f = make_plane_wave(1.0, &c, &grid(9)).unwrap();
        let mut st = madelung(&f, &c).unwrap();
        st.k.components[0].iter_mut().for_each(|v| *v = 0.1);
        let sol = solve_omega(&st).unwrap();
        assert!(sol.mask.iter().all(|&m| m));
    }

    #[test]
    fn gradient_omega_has_no_vorticity() {
        let c = PhysicalConstants::default();
        let g = grid(33);
        let f = make_plane_wave(0.5, &c, &g).unwrap();
        let mut st = madelung(&f, &c).unwrap();
        // ω_μ = ∂_μ(t² x)
        let w0: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                2.0 * p[0] * p[1]
            })
            .collect();
        let w1: Vec<f64> = (0..g.len())
            .map(|i| {
                let p = g.point(i);
                p[0] * p[0]
            })
            .collect();
        st.set_omega_field(VectorField::new(g.clone(), vec![w0, w1]).unwrap())
            .unwrap();
        assert!(st.vorticity_orthogonality_residual().unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn time_reversal_conjugates() {
        let c = PhysicalConstants::default();
        let g = Grid::new(vec![
            crate::grid::Axis::new(-1.0, 1.0, 9),
            crate::grid::Axis::new(0.0, 3.0, 7),
        ])
        .unwrap();
        let a = make_plane_wave(0.8, &c, &g).unwrap();
        let b = make_plane_wave(-0.8, &c, &g).unwrap();
        let (nt, nx) = (9, 7);
        for i in 0..nt {
            for j in 0..nx {
                let z = a.value((nt - 1 - i) * nx + j).conj();
                assert!((z - b.value(i * nx + j)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn empty_superposition_rejected() {
        let c = PhysicalConstants::default();
        assert!(make_superposition(&[], &c, &grid(9)).is_err());
    }
}
