use serde::{Deserialize, Serialize};

use super::{dot, HamiltonianSpec};
use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub q: [f64; 3],
    pub p: [f64; 3],
    /// Action accumulated along the trajectory, `∫ p·dq − H dt`.
    pub s: f64,
}

/// Particles plus the lattice they were seeded on, if any. Seeding on a
/// lattice keeps the Lagrangian connectivity needed for vorticity
/// diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub time: f64,
    pub lattice: Option<Grid>,
}

impl Ensemble {
    pub fn new(particles: Vec<Particle>, time: f64) -> Self {
        Self {
            particles,
            time,
            lattice: None,
        }
    }

    /// One particle per node of `lattice` (2D or 3D; missing coordinates are
    /// zero) with momentum `p0(q)` and zero action.
    pub fn seeded(lattice: &Grid, time: f64, p0: impl Fn([f64; 3]) -> [f64; 3]) -> Result<Self> {
        if !(2..=3).contains(&lattice.dim()) {
            return Err(Error::InvalidInput("seed lattice must be 2D or 3D".into()));
        }
        let particles = (0..lattice.len())
            .map(|n| {
                let pt = lattice.point(n);
                let q = [pt[0], pt[1], pt[2]];
                Particle {
                    q,
                    p: p0(q),
                    s: 0.0,
                }
            })
            .collect();
        Ok(Self {
            particles,
            time,
            lattice: Some(lattice.clone()),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    fn check_finite(&self, step: usize) -> Result<()> {
        let ok = self
            .particles
            .iter()
            .all(|pt| pt.q.iter().chain(&pt.p).all(|v| v.is_finite()) && pt.s.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::StepRejected { step })
        }
    }
}

fn axpy(a: [f64; 3], s: f64, b: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| a[k] + s * b[k])
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| a[k] - b[k])
}

/// Störmer-Verlet (kick-drift-kick); exact for separable `H`.
fn leapfrog(pt: &Particle, spec: &HamiltonianSpec, t: f64, dt: f64) -> Particle {
    let h0 = spec.energy(pt.q, pt.p, t);
    let p_half = axpy(pt.p, 0.5 * dt, spec.force(pt.q, pt.p, t));
    let q1 = axpy(pt.q, dt / spec.mass, p_half);
    let p1 = axpy(p_half, 0.5 * dt, spec.force(q1, p_half, t + dt));
    let h1 = spec.energy(q1, p1, t + dt);
    Particle {
        q: q1,
        p: p1,
        s: pt.s + dot(p_half, sub(q1, pt.q)) - 0.5 * (h0 + h1) * dt,
    }
}

const MIDPOINT_MAX_ITER: usize = 200;

/// Implicit midpoint, solved by fixed-point iteration.
fn midpoint(pt: &Particle, spec: &HamiltonianSpec, t: f64, dt: f64) -> Option<Particle> {
    let tm = t + 0.5 * dt;
    let (mut q1, mut p1) = (pt.q, pt.p);
    for _ in 0..MIDPOINT_MAX_ITER {
        let qm: [f64; 3] = std::array::from_fn(|k| 0.5 * (pt.q[k] + q1[k]));
        let pm: [f64; 3] = std::array::from_fn(|k| 0.5 * (pt.p[k] + p1[k]));
        let qn = axpy(pt.q, dt, spec.velocity(qm, pm, tm));
        let pn = axpy(pt.p, dt, spec.force(qm, pm, tm));
        let change = sub(qn, q1)
            .iter()
            .chain(&sub(pn, p1))
            .fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = 1.0 + qn.iter().chain(&pn).fold(0.0f64, |m, v| m.max(v.abs()));
        q1 = qn;
        p1 = pn;
        if !change.is_finite() {
            return None;
        }
        if change <= 4.0 * f64::EPSILON * scale {
            let qm: [f64; 3] = std::array::from_fn(|k| 0.5 * (pt.q[k] + q1[k]));
            let pm: [f64; 3] = std::array::from_fn(|k| 0.5 * (pt.p[k] + p1[k]));
            let s = pt.s + dot(pm, sub(q1, pt.q)) - spec.energy(qm, pm, tm) * dt;
            return Some(Particle { q: q1, p: p1, s });
        }
    }
    None
}

/// Advances every particle by `steps` steps of size `dt`. Leapfrog is used
/// when there is no vector potential, implicit midpoint otherwise. The
/// action increment per step is `p·Δq − H dt` at the scheme's intermediate
/// state.
pub fn integrate_ensemble(
    e: &Ensemble,
    spec: &HamiltonianSpec,
    dt: f64,
    steps: usize,
) -> Result<Ensemble> {
    spec.validate()?;
    if !(dt.is_finite() && dt != 0.0) {
        return Err(Error::InvalidInput(format!(
            "time step must be finite and nonzero, got {dt}"
        )));
    }
    let mut cur = e.clone();
    for step in 0..steps {
        let t = e.time + step as f64 * dt;
        let next: Option<Vec<Particle>> = if spec.has_vector_potential() {
            cur.particles
                .iter()
                .map(|pt| midpoint(pt, spec, t, dt))
                .collect()
        } else {
            Some(
                cur.particles
                    .iter()
                    .map(|pt| leapfrog(pt, spec, t, dt))
                    .collect(),
            )
        };
        cur.particles = next.ok_or(Error::StepRejected { step })?;
        cur.time = e.time + (step + 1) as f64 * dt;
        cur.check_finite(step)?;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{RotorScenario, ThetaForm};

    fn single(q: [f64; 3], p: [f64; 3]) -> Ensemble {
        Ensemble::new(vec![Particle { q, p, s: 0.0 }], 0.0)
    }

    #[test]
    fn free_particles_move_straight() {
        let e = single([0.1, 0.2, 0.3], [1.0, -2.0, 0.5]);
        let out = integrate_ensemble(&e, &HamiltonianSpec::free(2.0), 0.01, 100).unwrap();
        let pt = out.particles[0];
        assert_eq!(pt.p, [1.0, -2.0, 0.5]);
        let want = [0.6, -0.8, 0.55];
        assert!(pt.q.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-13));
        // S = p²t/2m for a free particle
        assert!((pt.s - 5.25 / 4.0).abs() < 1e-13, "{}", pt.s);
        assert!((out.time - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oscillator_returns_after_one_period() {
        let spec = HamiltonianSpec::harmonic(1.0, 2.0);
        let period = std::f64::consts::PI;
        let err = |n: usize| {
            let e = single([1.0, 0.0, 0.0], [0.0, 0.5, 0.0]);
            let out = integrate_ensemble(&e, &spec, period / n as f64, n).unwrap();
            let pt = out.particles[0];
            (0..3)
                .map(|k| {
                    (pt.q[k] - e.particles[0].q[k])
                        .abs()
                        .max((pt.p[k] - e.particles[0].p[k]).abs())
                })
                .fold(0.0, f64::max)
        };
        let (a, b) = (err(200), err(400));
        assert!(a < 1e-3 && (a / b - 4.0).abs() < 0.5, "{a} {b}");
    }

    #[test]
    fn rotor_trajectories_match_flow_map() {
        let sc = RotorScenario::default();
        let r0 = [0.5, -0.5, 0.2];
        let e = single(r0, sc.initial_momentum(r0));
        let out = integrate_ensemble(&e, &HamiltonianSpec::free(1.0), 0.1, 10).unwrap();
        let want = sc.flow_map(r0, 1.0);
        assert!(out.particles[0]
            .q
            .iter()
            .zip(&want)
            .all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn alternative_hamiltonian_reproduces_flow() {
        // Started from p = ∇Φ, motion under H' follows the rotor flow.
        let sc = RotorScenario::new(1.0, 1.0, -0.5);
        let spec = sc.alternative_hamiltonian(ThetaForm::Corrected);
        let r0 = [0.7, 0.3, 0.0];
        let err = |n: usize| {
            let f = sc.fields_at(r0, 0.0, ThetaForm::Corrected);
            let e = single(r0, f.grad_phi);
            let out = integrate_ensemble(&e, &spec, 1.0 / n as f64, n).unwrap();
            let want = sc.flow_map(sc.inverse_flow_map(r0, 0.0), 1.0);
            out.particles[0]
                .q
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let (a, b) = (err(20), err(40));
        assert!(a < 1e-2 && (a / b - 4.0).abs() < 0.5, "{a} {b}");
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let spec = HamiltonianSpec::free(1.0).with_potential(|q| (0.0, [1.0 / q[0], 0.0, 0.0]));
        let e = single([0.0, 0.0, 0.0], [0.0; 3]);
        assert!(matches!(
            integrate_ensemble(&e, &spec, 0.1, 3),
            Err(Error::StepRejected { step: 0 })
        ));
    }
}
