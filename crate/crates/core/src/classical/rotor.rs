//! Free particles started with `v = ω × r₀` about the z axis.
//!
//! All closed forms are written in terms of `τ = t − t₀` and
//! `D = 1 + ω²τ²`.

use serde::{Deserialize, Serialize};

use super::{cross, HamiltonianSpec, PointFields};
use crate::error::Result;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::ops;

/// Which expression to use for the scalar potential `Θ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaForm {
    /// `Θ = −K − ∂Φ/∂t = −mω²r²/D²`.
    Corrected,
    /// `−mω²r²/D`, the unsquared denominator. Inconsistent with the
    /// Hamilton-Jacobi equation for `τ ≠ 0`; kept to show that the residuals
    /// catch it.
    Printed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorScenario {
    pub omega: f64,
    pub mass: f64,
    pub t0: f64,
}

impl Default for RotorScenario {
    fn default() -> Self {
        Self {
            omega: 1.0,
            mass: 1.0,
            t0: 0.0,
        }
    }
}

/// Closed-form fields sampled on a grid. Grids with fewer than three axes are
/// treated as slices `z = 0` (and `y = 0`).
#[derive(Clone, Debug)]
pub struct ClosedForms {
    pub kinetic: ScalarField,
    pub phi: ScalarField,
    pub a: VectorField,
    pub theta: ScalarField,
}

fn pad(p: &[f64]) -> [f64; 3] {
    let mut r = [0.0; 3];
    r[..p.len().min(3)].copy_from_slice(&p[..p.len().min(3)]);
    r
}

impl RotorScenario {
    pub fn new(omega: f64, mass: f64, t0: f64) -> Self {
        Self { omega, mass, t0 }
    }

    fn tau_d(&self, t: f64) -> (f64, f64) {
        let tau = t - self.t0;
        (tau, 1.0 + self.omega * self.omega * tau * tau)
    }

    pub fn flow_map(&self, r0: [f64; 3], t: f64) -> [f64; 3] {
        let wt = self.omega * (t - self.t0);
        [r0[0] - wt * r0[1], r0[1] + wt * r0[0], r0[2]]
    }

    pub fn inverse_flow_map(&self, r: [f64; 3], t: f64) -> [f64; 3] {
        let wt = self.omega * (t - self.t0);
        let d = 1.0 + wt * wt;
        [(r[0] + wt * r[1]) / d, (r[1] - wt * r[0]) / d, r[2]]
    }

    pub fn initial_momentum(&self, r0: [f64; 3]) -> [f64; 3] {
        let m = self.mass;
        cross([0.0, 0.0, self.omega], r0).map(|v| m * v)
    }

    /// `m ω × r₀(r, t)`.
    pub fn momentum_field(&self, r: [f64; 3], t: f64) -> [f64; 3] {
        self.initial_momentum(self.inverse_flow_map(r, t))
    }

    /// Analytic z-vorticity of the momentum field, `2mω/D`.
    pub fn vorticity(&self, t: f64) -> f64 {
        let (_, d) = self.tau_d(t);
        2.0 * self.mass * self.omega / d
    }

    pub fn kinetic(&self, r: [f64; 3], t: f64) -> f64 {
        let (_, d) = self.tau_d(t);
        0.5 * self.mass * self.omega.powi(2) * (r[0] * r[0] + r[1] * r[1]) / d
    }

    pub fn phi(&self, r: [f64; 3], t: f64) -> f64 {
        let (tau, d) = self.tau_d(t);
        0.5 * self.mass * self.omega.powi(2) * tau * (r[0] * r[0] + r[1] * r[1]) / d
    }

    pub fn vector_potential(&self, r: [f64; 3], t: f64) -> [f64; 3] {
        let (_, d) = self.tau_d(t);
        let c = self.mass * self.omega / d;
        [c * r[1], -c * r[0], 0.0]
    }

    pub fn theta(&self, r: [f64; 3], t: f64, form: ThetaForm) -> f64 {
        let (_, d) = self.tau_d(t);
        let r2 = r[0] * r[0] + r[1] * r[1];
        let den = match form {
            ThetaForm::Corrected => d * d,
            ThetaForm::Printed => d,
        };
        -self.mass * self.omega.powi(2) * r2 / den
    }

    /// Values and hand-differentiated derivatives at one point.
    pub fn fields_at(&self, r: [f64; 3], t: f64, form: ThetaForm) -> PointFields {
        let (m, w) = (self.mass, self.omega);
        let (tau, d) = self.tau_d(t);
        let (x, y) = (r[0], r[1]);
        let r2 = x * x + y * y;
        let w2 = w * w;
        let (grad_theta, dtheta_dt) = match form {
            ThetaForm::Corrected => (
                [
                    -2.0 * m * w2 * x / (d * d),
                    -2.0 * m * w2 * y / (d * d),
                    0.0,
                ],
                4.0 * m * w2 * w2 * tau * r2 / (d * d * d),
            ),
            ThetaForm::Printed => (
                [-2.0 * m * w2 * x / d, -2.0 * m * w2 * y / d, 0.0],
                2.0 * m * w2 * w2 * tau * r2 / (d * d),
            ),
        };
        let da = -2.0 * m * w * w2 * tau / (d * d);
        PointFields {
            phi: self.phi(r, t),
            grad_phi: [m * w2 * tau * x / d, m * w2 * tau * y / d, 0.0],
            dphi_dt: 0.5 * m * w2 * r2 * (1.0 - w2 * tau * tau) / (d * d),
            a: self.vector_potential(r, t),
            da_dt: [da * y, -da * x, 0.0],
            curl_a: [0.0, 0.0, -2.0 * m * w / d],
            div_a: 0.0,
            theta: self.theta(r, t, form),
            grad_theta,
            dtheta_dt,
            potential: 0.0,
            grad_potential: [0.0; 3],
        }
    }

    /// Same fields with every derivative replaced by a central difference of
    /// the closed-form values, spacing `h` in space and `dt` in time.
    pub fn fields_numeric(
        &self,
        r: [f64; 3],
        t: f64,
        h: f64,
        dt: f64,
        form: ThetaForm,
    ) -> PointFields {
        let shift = |k: usize, s: f64| {
            let mut q = r;
            q[k] += s;
            q
        };
        let dspace = |f: &dyn Fn([f64; 3]) -> f64| -> [f64; 3] {
            std::array::from_fn(|k| (f(shift(k, h)) - f(shift(k, -h))) / (2.0 * h))
        };
        let dtime = |f: &dyn Fn(f64) -> f64| (f(t + dt) - f(t - dt)) / (2.0 * dt);
        let a_jac: [[f64; 3]; 3] =
            std::array::from_fn(|i| dspace(&|q| self.vector_potential(q, t)[i]));
        PointFields {
            phi: self.phi(r, t),
            grad_phi: dspace(&|q| self.phi(q, t)),
            dphi_dt: dtime(&|s| self.phi(r, s)),
            a: self.vector_potential(r, t),
            da_dt: std::array::from_fn(|i| dtime(&|s| self.vector_potential(r, s)[i])),
            curl_a: [
                a_jac[2][1] - a_jac[1][2],
                a_jac[0][2] - a_jac[2][0],
                a_jac[1][0] - a_jac[0][1],
            ],
            div_a: a_jac[0][0] + a_jac[1][1] + a_jac[2][2],
            theta: self.theta(r, t, form),
            grad_theta: dspace(&|q| self.theta(q, t, form)),
            dtheta_dt: dtime(&|s| self.theta(r, s, form)),
            potential: 0.0,
            grad_potential: [0.0; 3],
        }
    }

    /// Largest discrepancy between the analytic derivatives and central
    /// differences of the closed forms with steps `h`, `dt`.
    pub fn derivative_cross_check(
        &self,
        r: [f64; 3],
        t: f64,
        h: f64,
        dt: f64,
        form: ThetaForm,
    ) -> f64 {
        self.fields_at(r, t, form)
            .max_difference(&self.fields_numeric(r, t, h, dt, form))
    }

    pub fn closed_form_fields(&self, t: f64, grid: &Grid, form: ThetaForm) -> ClosedForms {
        let s = |f: &dyn Fn([f64; 3]) -> f64| ScalarField::from_fn(grid, |p| f(pad(p)));
        ClosedForms {
            kinetic: s(&|r| self.kinetic(r, t)),
            phi: s(&|r| self.phi(r, t)),
            a: VectorField::from_fn_n(grid, 3, |p| self.vector_potential(pad(p), t).to_vec()),
            theta: s(&|r| self.theta(r, t, form)),
        }
    }

    /// The alternative Hamiltonian `(p − A)²/2m + Θ` whose Hamilton-Jacobi
    /// equation `Φ` solves.
    pub fn alternative_hamiltonian(&self, form: ThetaForm) -> HamiltonianSpec {
        let sc = *self;
        HamiltonianSpec::free(self.mass)
            .with_vector_potential(move |q, t| {
                let f = sc.fields_at(q, t, form);
                let c = sc.mass * sc.omega / sc.tau_d(t).1;
                (f.a, [[0.0, c, 0.0], [-c, 0.0, 0.0], [0.0; 3]])
            })
            .with_theta(move |q, t| {
                let f = sc.fields_at(q, t, form);
                (f.theta, f.grad_theta)
            })
    }

    /// Pointwise Hamilton-Jacobi residual with analytic derivatives.
    pub fn hj_residual_at(&self, r: [f64; 3], t: f64, form: ThetaForm) -> f64 {
        self.fields_at(r, t, form).hj_residual(self.mass)
    }

    /// Pointwise force-balance residual with analytic derivatives.
    pub fn lorentz_residual_at(&self, r: [f64; 3], t: f64, form: ThetaForm) -> [f64; 3] {
        self.fields_at(r, t, form).lorentz_residual(self.mass)
    }

    /// Force-balance residual on every grid node, analytic derivatives.
    pub fn lorentz_residual(&self, t: f64, grid: &Grid, form: ThetaForm) -> VectorField {
        VectorField::from_fn_n(grid, 3, |p| {
            self.lorentz_residual_at(pad(p), t, form).to_vec()
        })
    }

    /// Force-balance residual with grid derivatives in space and a central
    /// difference over `t ± dt` in time. Needs a 3D grid.
    pub fn lorentz_residual_numeric(
        &self,
        t: f64,
        dt: f64,
        grid: &Grid,
        form: ThetaForm,
    ) -> Result<VectorField> {
        let now = self.closed_form_fields(t, grid, form);
        let a_next = self.closed_form_fields(t + dt, grid, form).a;
        let a_prev = self.closed_form_fields(t - dt, grid, form).a;
        let da_dt = a_next.sub(&a_prev)?.scale(0.5 / dt);
        let grad_theta = pad_vector(ops::gradient(&now.theta)?);
        let curl_a = ops::curl(&now.a)?;
        let grad_phi = pad_vector(ops::gradient(&now.phi)?);
        let mut out = VectorField::zeros(grid, 3);
        for n in 0..grid.len() {
            let v: [f64; 3] = std::array::from_fn(|k| {
                (grad_phi.components[k][n] - now.a.components[k][n]) / self.mass
            });
            let b: [f64; 3] = std::array::from_fn(|k| curl_a.components[k][n]);
            let vxb = cross(v, b);
            for k in 0..3 {
                out.components[k][n] =
                    -grad_theta.components[k][n] - da_dt.components[k][n] + vxb[k];
            }
        }
        Ok(out)
    }

    /// The scalar constraint `∂Θ/∂t − ∇·A`, reported only: it does not vanish
    /// for this flow.
    pub fn constraint_residual_at(&self, r: [f64; 3], t: f64, form: ThetaForm) -> f64 {
        let f = self.fields_at(r, t, form);
        f.dtheta_dt - f.div_a
    }
}

fn pad_vector(mut v: VectorField) -> VectorField {
    while v.components.len() < 3 {
        v.components.push(vec![0.0; v.grid.len()]);
    }
    v
}
