//! Ensembles of classical particles, their momentum fields, and the
//! Hamilton-Jacobi equation generalized to momentum fields with vorticity.
//!
//! When the momentum field `p` of an ensemble is not a gradient it is split as
//! `p = ∇Φ − A`, and `Φ` solves the Hamilton-Jacobi equation of the
//! alternative Hamiltonian `H' = (p − A)²/2m + V + Θ`, provided the force
//! balance `−∇Θ − ∂A/∂t + v × (∇ × A) = 0` holds.

mod dynamics;
mod rotor;
mod vorticity;

use std::sync::Arc;

pub use dynamics::{integrate_ensemble, Ensemble, Particle};
pub use rotor::{ClosedForms, RotorScenario, ThetaForm};
pub use vorticity::{
    lagrangian_vorticity, space_time_identity_residual, vorticity_diagnostics, VorticityDiagnostics,
};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField};
use crate::ops;

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

type PotentialFn = Arc<dyn Fn([f64; 3]) -> (f64, [f64; 3]) + Send + Sync>;
type VectorPotentialFn = Arc<dyn Fn([f64; 3], f64) -> ([f64; 3], [[f64; 3]; 3]) + Send + Sync>;
type ThetaFn = Arc<dyn Fn([f64; 3], f64) -> (f64, [f64; 3]) + Send + Sync>;

/// `H(q, p, t) = (p − A)²/2m + V + Θ` for one particle. Each callback returns
/// its value together with its spatial gradient (for `A`, the Jacobian
/// `∂A_i/∂q_j` as `[i][j]`).
#[derive(Clone)]
pub struct HamiltonianSpec {
    pub mass: f64,
    potential: Option<PotentialFn>,
    vector_potential: Option<VectorPotentialFn>,
    theta: Option<ThetaFn>,
}

impl std::fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("mass", &self.mass)
            .field("potential", &self.potential.is_some())
            .field("vector_potential", &self.vector_potential.is_some())
            .field("theta", &self.theta.is_some())
            .finish()
    }
}

impl HamiltonianSpec {
    pub fn free(mass: f64) -> Self {
        Self {
            mass,
            potential: None,
            vector_potential: None,
            theta: None,
        }
    }

    /// Isotropic oscillator `V = ½ m Ω² |q|²`.
    pub fn harmonic(mass: f64, big_omega: f64) -> Self {
        let k = mass * big_omega * big_omega;
        Self::free(mass).with_potential(move |q| (0.5 * k * dot(q, q), q.map(|v| k * v)))
    }

    pub fn with_potential(
        mut self,
        v: impl Fn([f64; 3]) -> (f64, [f64; 3]) + Send + Sync + 'static,
    ) -> Self {
        self.potential = Some(Arc::new(v));
        self
    }

    pub fn with_vector_potential(
        mut self,
        a: impl Fn([f64; 3], f64) -> ([f64; 3], [[f64; 3]; 3]) + Send + Sync + 'static,
    ) -> Self {
        self.vector_potential = Some(Arc::new(a));
        self
    }

    pub fn with_theta(
        mut self,
        th: impl Fn([f64; 3], f64) -> (f64, [f64; 3]) + Send + Sync + 'static,
    ) -> Self {
        self.theta = Some(Arc::new(th));
        self
    }

    pub fn has_vector_potential(&self) -> bool {
        self.vector_potential.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::InvalidInput(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        Ok(())
    }

    fn a(&self, q: [f64; 3], t: f64) -> ([f64; 3], [[f64; 3]; 3]) {
        self.vector_potential
            .as_ref()
            .map_or(([0.0; 3], [[0.0; 3]; 3]), |f| f(q, t))
    }

    fn scalar_terms(&self, q: [f64; 3], t: f64) -> (f64, [f64; 3]) {
        let (mut v, mut g) = self.potential.as_ref().map_or((0.0, [0.0; 3]), |f| f(q));
        if let Some(th) = &self.theta {
            let (tv, tg) = th(q, t);
            v += tv;
            (0..3).for_each(|k| g[k] += tg[k]);
        }
        (v, g)
    }

    pub fn energy(&self, q: [f64; 3], p: [f64; 3], t: f64) -> f64 {
        let (a, _) = self.a(q, t);
        let k = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
        dot(k, k) / (2.0 * self.mass) + self.scalar_terms(q, t).0
    }

    /// `∂H/∂p`.
    pub fn velocity(&self, q: [f64; 3], p: [f64; 3], t: f64) -> [f64; 3] {
        let (a, _) = self.a(q, t);
        std::array::from_fn(|k| (p[k] - a[k]) / self.mass)
    }

    /// `−∂H/∂q`.
    pub fn force(&self, q: [f64; 3], p: [f64; 3], t: f64) -> [f64; 3] {
        let (a, jac) = self.a(q, t);
        let (_, g) = self.scalar_terms(q, t);
        std::array::from_fn(|j| {
            (0..3)
                .map(|i| (p[i] - a[i]) / self.mass * jac[i][j])
                .sum::<f64>()
                - g[j]
        })
    }
}

/// Fields entering the generalized Hamilton-Jacobi system at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointFields {
    pub phi: f64,
    pub grad_phi: [f64; 3],
    pub dphi_dt: f64,
    pub a: [f64; 3],
    pub da_dt: [f64; 3],
    pub curl_a: [f64; 3],
    pub div_a: f64,
    pub theta: f64,
    pub grad_theta: [f64; 3],
    pub dtheta_dt: f64,
    pub potential: f64,
    pub grad_potential: [f64; 3],
}

impl PointFields {
    /// `(∇Φ − A)²/2m + V + Θ + ∂Φ/∂t`.
    pub fn hj_residual(&self, mass: f64) -> f64 {
        let k: [f64; 3] = std::array::from_fn(|i| self.grad_phi[i] - self.a[i]);
        dot(k, k) / (2.0 * mass) + self.potential + self.theta + self.dphi_dt
    }

    /// `−∇Θ − ∂A/∂t + v × (∇ × A)` with `v = (∇Φ − A)/m`.
    pub fn lorentz_residual(&self, mass: f64) -> [f64; 3] {
        let v: [f64; 3] = std::array::from_fn(|i| (self.grad_phi[i] - self.a[i]) / mass);
        let vxb = cross(v, self.curl_a);
        std::array::from_fn(|i| -self.grad_theta[i] - self.da_dt[i] + vxb[i])
    }

    pub(crate) fn max_difference(&self, o: &PointFields) -> f64 {
        let mut m: f64 = 0.0;
        let mut acc = |a: f64, b: f64| m = m.max((a - b).abs());
        for k in 0..3 {
            acc(self.grad_phi[k], o.grad_phi[k]);
            acc(self.da_dt[k], o.da_dt[k]);
            acc(self.curl_a[k], o.curl_a[k]);
            acc(self.grad_theta[k], o.grad_theta[k]);
        }
        acc(self.dphi_dt, o.dphi_dt);
        acc(self.dtheta_dt, o.dtheta_dt);
        acc(self.div_a, o.div_a);
        m
    }
}

/// Hamilton-Jacobi residual `H'(q, ∇Φ, t) + ∂Φ/∂t` at the middle of three
/// time levels of `Φ` (spacing may be uneven). Space derivatives are grid
/// derivatives, the time derivative is the three-point difference.
pub fn hj_residual(
    phi: [&ScalarField; 3],
    times: [f64; 3],
    spec: &HamiltonianSpec,
) -> Result<ScalarField> {
    spec.validate()?;
    let g = &phi[1].grid;
    phi[0].grid.same_shape(g)?;
    phi[2].grid.same_shape(g)?;
    let (h1, h2) = (times[1] - times[0], times[2] - times[1]);
    if !(h1 > 0.0 && h2 > 0.0) {
        return Err(Error::InvalidInput("time levels must be increasing".into()));
    }
    let (c0, c1, c2) = (
        -h2 / (h1 * (h1 + h2)),
        (h2 - h1) / (h1 * h2),
        h1 / (h2 * (h1 + h2)),
    );
    let grad: VectorField = ops::gradient(phi[1])?;
    let t = times[1];
    let values = (0..g.len())
        .map(|n| {
            let pt = g.point(n);
            let q = [pt[0], pt[1], pt[2]];
            let mut p = [0.0; 3];
            (0..grad.ncomp().min(3)).for_each(|k| p[k] = grad.components[k][n]);
            let dphi = c0 * phi[0].values[n] + c1 * phi[1].values[n] + c2 * phi[2].values[n];
            spec.energy(q, p, t) + dphi
        })
        .collect();
    ScalarField::new(g.clone(), values)
}
